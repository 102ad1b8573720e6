#ifndef COMMITSCAN_H
#define COMMITSCAN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum CsStatus {
  CS_STATUS_OK = 0,
  /**
   * Null pointer, bad UTF-8, unknown name or wrong buffer length.
   */
  CS_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Well-formed call on data the library rejects.
   */
  CS_STATUS_INVALID_INPUT = 2,
  /**
   * I/O, parse or model failure.
   */
  CS_STATUS_RUNTIME = 3,
  /**
   * A Rust panic was caught at the boundary.
   */
  CS_STATUS_PANIC = 4,
} CsStatus;

/**
 * One static analyzer with its feature names.
 */
typedef struct CsAnalyzer CsAnalyzer;

/**
 * The changed files of one commit.
 */
typedef struct CsCommit CsCommit;

/**
 * A trained single-embedding pipeline (`models/<analyzer>.json`).
 */
typedef struct CsModel CsModel;

typedef struct CsChiSquare {
  double chi2;
  double p_value;
  size_t dof;
} CsChiSquare;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 */
const char *cs_last_error(void);

/**
 * Library version, statically allocated.
 */
const char *cs_version(void);

/**
 * Creates an analyzer by name: `lint_strict`, `lint_style`, `metrics` or `graph`.
 *
 * # Safety
 * `name` must be a valid C string and `out` a valid pointer.
 */
enum CsStatus cs_analyzer_new(const char *name, struct CsAnalyzer **out);

/**
 * # Safety
 * `a` must come from [`cs_analyzer_new`] or be null.
 */
void cs_analyzer_free(struct CsAnalyzer *a);

/**
 * Length of the per-file vector.
 *
 * # Safety
 * `a` must be a live analyzer handle.
 */
size_t cs_analyzer_file_len(const struct CsAnalyzer *a);

/**
 * Name of per-file feature `i`, or null when out of range.
 *
 * # Safety
 * `a` must be a live analyzer handle.
 */
const char *cs_analyzer_file_name(const struct CsAnalyzer *a, size_t i);

/**
 * Length of the commit embedding (`<feature>_pos` and `<feature>_neg`).
 *
 * # Safety
 * `a` must be a live analyzer handle.
 */
size_t cs_analyzer_commit_len(const struct CsAnalyzer *a);

/**
 * Name of commit feature `i`, or null when out of range.
 *
 * # Safety
 * `a` must be a live analyzer handle.
 */
const char *cs_analyzer_commit_name(const struct CsAnalyzer *a, size_t i);

/**
 * Analyzes one source text into `out[0..len]`, `len` = [`cs_analyzer_file_len`].
 *
 * # Safety
 * `a` must be live, `source` a valid C string, `out` writable for `len` values.
 */
enum CsStatus cs_analyzer_analyze(const struct CsAnalyzer *a,
                                  const char *source,
                                  double *out,
                                  size_t len);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum CsStatus cs_commit_new(struct CsCommit **out);

/**
 * # Safety
 * `c` must come from [`cs_commit_new`] or be null.
 */
void cs_commit_free(struct CsCommit *c);

/**
 * Adds one file; `pre` is null for an added file and `post` null for a
 * deleted one. Unchanged files are ignored.
 *
 * # Safety
 * `c` must be live; `path` a valid C string; `pre` and `post` valid C strings or null.
 */
enum CsStatus cs_commit_add_file(struct CsCommit *c,
                                 const char *path,
                                 const char *pre,
                                 const char *post);

/**
 * Number of changed files held.
 *
 * # Safety
 * `c` must be a live commit handle.
 */
size_t cs_commit_file_count(const struct CsCommit *c);

/**
 * Commit embedding into `out[0..len]`, `len` = [`cs_analyzer_commit_len`].
 *
 * # Safety
 * `c` and `a` must be live; `out` writable for `len` values.
 */
enum CsStatus cs_commit_embed(const struct CsCommit *c,
                              const struct CsAnalyzer *a,
                              double *out,
                              size_t len);

/**
 * Chi-square test of a row-major `rows` × `cols` count table. With
 * `corrected` set, 2×2 tables get Yates' correction.
 *
 * # Safety
 * `counts` must hold `rows * cols` values; `out` must be valid.
 */
enum CsStatus cs_chi_square(const uint64_t *counts,
                            size_t rows,
                            size_t cols,
                            bool corrected,
                            struct CsChiSquare *out);

/**
 * Cramér's V for a statistic over `n` observations in an `r` × `c` table.
 */
double cs_cramers_v(double chi2, uint64_t n, size_t r, size_t c);

/**
 * # Safety
 * `path` must be a valid C string and `out` a valid pointer.
 */
enum CsStatus cs_model_load(const char *path, struct CsModel **out);

/**
 * # Safety
 * `m` must come from [`cs_model_load`] or be null.
 */
void cs_model_free(struct CsModel *m);

/**
 * Number of input features the model expects.
 *
 * # Safety
 * `m` must be a live model handle.
 */
size_t cs_model_feature_count(const struct CsModel *m);

/**
 * Name of input feature `i`, or null when out of range.
 *
 * # Safety
 * `m` must be a live model handle.
 */
const char *cs_model_feature_name(const struct CsModel *m, size_t i);

/**
 * Positive-class probabilities of `n_rows` row-major rows of
 * [`cs_model_feature_count`] values each, written to `out[0..n_rows]`.
 *
 * # Safety
 * `m` must be live; `rows` readable for `n_rows * width` values; `out` writable for `n_rows`.
 */
enum CsStatus cs_model_predict(const struct CsModel *m,
                               const double *rows,
                               size_t n_rows,
                               size_t width,
                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COMMITSCAN_H */
