//! C interface to the commitscan analyzers, chi-square statistics and saved
//! embedding pipelines.
//!
//! Every function returns a [`CsStatus`]; on failure the message is available
//! from [`cs_last_error`] on the same thread. Handles are opaque and must be
//! released with their `_free` function. Strings passed in are NUL-terminated
//! UTF-8; strings handed out stay valid while their owning handle lives.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use commitscan::corpus::{CommitRecord, CommitSnapshot, FilePair};
use commitscan::embedding::{aggregated_names, commit_embedding, Analyzer, AnalyzerId};
use commitscan::learners::Matrix;
use commitscan::lint::Thresholds;
use commitscan::pipeline::SavedPipeline;
use commitscan::stats::{chi_square, chi_square_uncorrected, cramers_v, ContingencyTable};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8, unknown name or wrong buffer length.
    InvalidArgument = 1,
    /// Well-formed call on data the library rejects.
    InvalidInput = 2,
    /// I/O, parse or model failure.
    Runtime = 3,
    /// A Rust panic was caught at the boundary.
    Panic = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("NUL bytes removed"));
}

struct Failure(CsStatus, String);

impl From<commitscan::Error> for Failure {
    fn from(e: commitscan::Error) -> Self {
        let code = if e.exit_code() == 1 { CsStatus::InvalidInput } else { CsStatus::Runtime };
        Failure(code, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(CsStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CsStatus::Ok
        }
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("panic inside commitscan");
            CsStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(invalid(format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn optional_text(p: *const c_char, what: &str) -> Result<Option<String>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        text(p, what).map(|s| Some(s.to_string()))
    }
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, want: usize) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(invalid("output buffer is null"));
    }
    if len != want {
        return Err(invalid(format!("output buffer holds {len} values, expected {want}")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn c_strings(names: &[String]) -> Vec<CString> {
    names.iter().map(|n| CString::new(n.as_str()).expect("feature names carry no NUL")).collect()
}

/// Message of the last failed call on this thread; empty after a success.
#[no_mangle]
pub extern "C" fn cs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, statically allocated.
#[no_mangle]
pub extern "C" fn cs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// One static analyzer with its feature names.
pub struct CsAnalyzer {
    inner: Analyzer,
    file_names: Vec<CString>,
    commit_names: Vec<String>,
    commit_cnames: Vec<CString>,
}

/// Creates an analyzer by name: `lint_strict`, `lint_style`, `metrics` or `graph`.
///
/// # Safety
/// `name` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_analyzer_new(name: *const c_char, out: *mut *mut CsAnalyzer) -> CsStatus {
    guard(|| {
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        let name = text(name, "name")?;
        let id = AnalyzerId::parse(name).ok_or_else(|| invalid(format!("unknown analyzer {name:?}")))?;
        let inner = Analyzer::new(id, Thresholds::default());
        let file = inner.feature_names();
        let commit_names = aggregated_names(&file);
        let handle = CsAnalyzer { file_names: c_strings(&file), commit_cnames: c_strings(&commit_names), commit_names, inner };
        *out = Box::into_raw(Box::new(handle));
        Ok(())
    })
}

/// # Safety
/// `a` must come from [`cs_analyzer_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn cs_analyzer_free(a: *mut CsAnalyzer) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// Length of the per-file vector.
///
/// # Safety
/// `a` must be a live analyzer handle.
#[no_mangle]
pub unsafe extern "C" fn cs_analyzer_file_len(a: *const CsAnalyzer) -> usize {
    a.as_ref().map_or(0, |a| a.file_names.len())
}

/// Name of per-file feature `i`, or null when out of range.
///
/// # Safety
/// `a` must be a live analyzer handle.
#[no_mangle]
pub unsafe extern "C" fn cs_analyzer_file_name(a: *const CsAnalyzer, i: usize) -> *const c_char {
    a.as_ref().and_then(|a| a.file_names.get(i)).map_or(ptr::null(), |s| s.as_ptr())
}

/// Length of the commit embedding (`<feature>_pos` and `<feature>_neg`).
///
/// # Safety
/// `a` must be a live analyzer handle.
#[no_mangle]
pub unsafe extern "C" fn cs_analyzer_commit_len(a: *const CsAnalyzer) -> usize {
    a.as_ref().map_or(0, |a| a.commit_cnames.len())
}

/// Name of commit feature `i`, or null when out of range.
///
/// # Safety
/// `a` must be a live analyzer handle.
#[no_mangle]
pub unsafe extern "C" fn cs_analyzer_commit_name(a: *const CsAnalyzer, i: usize) -> *const c_char {
    a.as_ref().and_then(|a| a.commit_cnames.get(i)).map_or(ptr::null(), |s| s.as_ptr())
}

/// Analyzes one source text into `out[0..len]`, `len` = [`cs_analyzer_file_len`].
///
/// # Safety
/// `a` must be live, `source` a valid C string, `out` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn cs_analyzer_analyze(a: *const CsAnalyzer, source: *const c_char, out: *mut f64, len: usize) -> CsStatus {
    guard(|| {
        let a = a.as_ref().ok_or_else(|| invalid("analyzer is null"))?;
        let source = text(source, "source")?;
        let out = out_slice(out, len, a.file_names.len())?;
        out.copy_from_slice(a.inner.analyze(source).values());
        Ok(())
    })
}

/// The changed files of one commit.
#[derive(Default)]
pub struct CsCommit {
    files: Vec<FilePair>,
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_commit_new(out: *mut *mut CsCommit) -> CsStatus {
    guard(|| {
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        *out = Box::into_raw(Box::default());
        Ok(())
    })
}

/// # Safety
/// `c` must come from [`cs_commit_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn cs_commit_free(c: *mut CsCommit) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Adds one file; `pre` is null for an added file and `post` null for a
/// deleted one. Unchanged files are ignored.
///
/// # Safety
/// `c` must be live; `path` a valid C string; `pre` and `post` valid C strings or null.
#[no_mangle]
pub unsafe extern "C" fn cs_commit_add_file(c: *mut CsCommit, path: *const c_char, pre: *const c_char, post: *const c_char) -> CsStatus {
    guard(|| {
        let c = c.as_mut().ok_or_else(|| invalid("commit is null"))?;
        let path = text(path, "path")?.to_string();
        let (pre, post) = (optional_text(pre, "pre")?, optional_text(post, "post")?);
        if pre.is_none() && post.is_none() {
            return Err(invalid("pre and post are both null"));
        }
        c.files.extend(FilePair::from_sides(path, pre, post));
        Ok(())
    })
}

/// Number of changed files held.
///
/// # Safety
/// `c` must be a live commit handle.
#[no_mangle]
pub unsafe extern "C" fn cs_commit_file_count(c: *const CsCommit) -> usize {
    c.as_ref().map_or(0, |c| c.files.len())
}

/// Commit embedding into `out[0..len]`, `len` = [`cs_analyzer_commit_len`].
///
/// # Safety
/// `c` and `a` must be live; `out` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn cs_commit_embed(c: *const CsCommit, a: *const CsAnalyzer, out: *mut f64, len: usize) -> CsStatus {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| invalid("commit is null"))?;
        let a = a.as_ref().ok_or_else(|| invalid("analyzer is null"))?;
        let out = out_slice(out, len, a.commit_names.len())?;
        let record = CommitRecord { repo_url: "ffi".into(), sha: "0".repeat(40), label: 0, test_fold: 0, message: None };
        let v = commit_embedding(&CommitSnapshot { record, files: c.files.clone() }, &a.inner)?;
        out.copy_from_slice(v.values());
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CsChiSquare {
    pub chi2: f64,
    pub p_value: f64,
    pub dof: usize,
}

/// Chi-square test of a row-major `rows` × `cols` count table. With
/// `corrected` set, 2×2 tables get Yates' correction.
///
/// # Safety
/// `counts` must hold `rows * cols` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cs_chi_square(counts: *const u64, rows: usize, cols: usize, corrected: bool, out: *mut CsChiSquare) -> CsStatus {
    guard(|| {
        if counts.is_null() || out.is_null() {
            return Err(invalid("counts or out is null"));
        }
        let n = rows.checked_mul(cols).ok_or_else(|| invalid("table too large"))?;
        let flat = std::slice::from_raw_parts(counts, n);
        let table = ContingencyTable::new(flat.chunks(cols.max(1)).map(<[u64]>::to_vec).collect())?;
        let r = if corrected { chi_square(&table)? } else { chi_square_uncorrected(&table)? };
        *out = CsChiSquare { chi2: r.chi2, p_value: r.p_value, dof: r.dof };
        Ok(())
    })
}

/// Cramér's V for a statistic over `n` observations in an `r` × `c` table.
#[no_mangle]
pub extern "C" fn cs_cramers_v(chi2: f64, n: u64, r: usize, c: usize) -> f64 {
    cramers_v(chi2, n, r, c)
}

/// A trained single-embedding pipeline (`models/<analyzer>.json`).
pub struct CsModel {
    inner: SavedPipeline,
    names: Vec<CString>,
}

/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_model_load(path: *const c_char, out: *mut *mut CsModel) -> CsStatus {
    guard(|| {
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        let path = Path::new(text(path, "path")?);
        let bytes = std::fs::read(path).map_err(|e| Failure(CsStatus::Runtime, format!("{}: {e}", path.display())))?;
        let inner: SavedPipeline = serde_json::from_slice(&bytes).map_err(|e| Failure(CsStatus::Runtime, format!("{}: {e}", path.display())))?;
        let names = c_strings(&inner.feature_names);
        *out = Box::into_raw(Box::new(CsModel { inner, names }));
        Ok(())
    })
}

/// # Safety
/// `m` must come from [`cs_model_load`] or be null.
#[no_mangle]
pub unsafe extern "C" fn cs_model_free(m: *mut CsModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of input features the model expects.
///
/// # Safety
/// `m` must be a live model handle.
#[no_mangle]
pub unsafe extern "C" fn cs_model_feature_count(m: *const CsModel) -> usize {
    m.as_ref().map_or(0, |m| m.names.len())
}

/// Name of input feature `i`, or null when out of range.
///
/// # Safety
/// `m` must be a live model handle.
#[no_mangle]
pub unsafe extern "C" fn cs_model_feature_name(m: *const CsModel, i: usize) -> *const c_char {
    m.as_ref().and_then(|m| m.names.get(i)).map_or(ptr::null(), |s| s.as_ptr())
}

/// Positive-class probabilities of `n_rows` row-major rows of
/// [`cs_model_feature_count`] values each, written to `out[0..n_rows]`.
///
/// # Safety
/// `m` must be live; `rows` readable for `n_rows * width` values; `out` writable for `n_rows`.
#[no_mangle]
pub unsafe extern "C" fn cs_model_predict(m: *const CsModel, rows: *const f64, n_rows: usize, width: usize, out: *mut f64) -> CsStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| invalid("model is null"))?;
        if rows.is_null() && n_rows > 0 {
            return Err(invalid("rows is null"));
        }
        if width != m.names.len() {
            return Err(invalid(format!("rows have {width} values, model expects {}", m.names.len())));
        }
        let out = out_slice(out, n_rows, n_rows)?;
        if n_rows == 0 {
            return Ok(());
        }
        let flat = std::slice::from_raw_parts(rows, n_rows * width);
        let x = Matrix::from_rows(&flat.chunks(width.max(1)).map(<[f64]>::to_vec).collect::<Vec<_>>())?;
        out.copy_from_slice(&m.inner.pipeline.predict(&x)?);
        Ok(())
    })
}
