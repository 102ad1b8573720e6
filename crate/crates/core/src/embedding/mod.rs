//! Commit embeddings: per-file analyzer vectors for both versions, their
//! differences, positive/negative aggregation per commit, and column pruning.

mod vector;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{CommitSnapshot, FilePair};
use crate::error::{Error, Result};
use crate::lint::{self, Catalog, Thresholds};
use crate::{graph_measures, metrics};

pub use vector::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyzerId {
    LintStrict,
    LintStyle,
    Metrics,
    Graph,
}

impl AnalyzerId {
    pub const ALL: [AnalyzerId; 4] = [AnalyzerId::LintStrict, AnalyzerId::LintStyle, AnalyzerId::Metrics, AnalyzerId::Graph];

    pub fn as_str(self) -> &'static str {
        match self {
            AnalyzerId::LintStrict => "lint_strict",
            AnalyzerId::LintStyle => "lint_style",
            AnalyzerId::Metrics => "metrics",
            AnalyzerId::Graph => "graph",
        }
    }

    pub fn parse(s: &str) -> Option<AnalyzerId> {
        Self::ALL.into_iter().find(|a| a.as_str() == s.replace('-', "_"))
    }

    /// Upper bound on quantile bins used when screening this embedding.
    pub fn default_max_bins(self) -> usize {
        match self {
            AnalyzerId::LintStrict | AnalyzerId::Graph => 4,
            AnalyzerId::LintStyle => 5,
            AnalyzerId::Metrics => 7,
        }
    }
}

impl std::fmt::Display for AnalyzerId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One configured analyzer producing a fixed-length vector per file version.
#[derive(Debug, Clone)]
pub struct Analyzer {
    pub id: AnalyzerId,
    catalog: Option<Catalog>,
}

impl Analyzer {
    pub fn new(id: AnalyzerId, thresholds: Thresholds) -> Self {
        let catalog = match id {
            AnalyzerId::LintStrict => Some(Catalog::strict_with(thresholds)),
            AnalyzerId::LintStyle => Some(Catalog::style_with(thresholds)),
            _ => None,
        };
        Analyzer { id, catalog }
    }

    pub fn feature_names(&self) -> Vec<String> {
        match (&self.catalog, self.id) {
            (Some(c), _) => c.feature_names(),
            (None, AnalyzerId::Metrics) => metrics::feature_names(),
            _ => graph_measures::feature_names(),
        }
    }

    pub fn analyze(&self, text: &str) -> FeatureVector {
        match (&self.catalog, self.id) {
            (Some(c), _) => lint::lint_vector(text, c),
            (None, AnalyzerId::Metrics) => metrics::metrics_vector(text),
            _ => graph_measures::graph_vector(text),
        }
    }
}

/// Vectors for the two versions of a file; a missing side is all-zero.
pub fn version_vectors(pair: &FilePair, analyzer: &Analyzer) -> (FeatureVector, FeatureVector) {
    let names = analyzer.feature_names();
    let side = |t: &Option<String>| match t {
        Some(text) => analyzer.analyze(text),
        None => FeatureVector::zeros(&names),
    };
    (side(&pair.pre_text), side(&pair.post_text))
}

/// Element-wise `post - pre`.
pub fn file_diff(pre: &FeatureVector, post: &FeatureVector) -> Result<FeatureVector> {
    if pre.len() != post.len() {
        return Err(Error::Invalid(format!("vector lengths differ: {} vs {}", pre.len(), post.len())));
    }
    for (i, (a, b)) in pre.names().iter().zip(post.names()).enumerate() {
        if a != b {
            return Err(Error::FeatureMismatch { index: i, left: a.clone(), right: b.clone() });
        }
    }
    let values = pre.values().iter().zip(post.values()).map(|(a, b)| b - a).collect();
    FeatureVector::new(pre.names().to_vec(), values)
}

/// Names of the aggregated vector: `<f>_pos` and `<f>_neg` per input feature, sorted.
pub fn aggregated_names(names: &[String]) -> Vec<String> {
    let mut out: Vec<String> = names.iter().flat_map(|n| [format!("{n}_pos"), format!("{n}_neg")]).collect();
    out.sort();
    out
}

/// Sums positive parts into `<f>_pos` and magnitudes of negative parts into `<f>_neg`.
pub fn aggregate_commit(diffs: &[FeatureVector], names: &[String]) -> Result<FeatureVector> {
    let mut map: BTreeMap<String, f64> = aggregated_names(names).into_iter().map(|n| (n, 0.0)).collect();
    for d in diffs {
        if d.names() != names {
            return Err(Error::Invalid("diff vectors do not share the feature universe".into()));
        }
        for (n, v) in d.iter() {
            if v > 0.0 {
                *map.get_mut(&format!("{n}_pos")).expect("name present") += v;
            } else if v < 0.0 {
                *map.get_mut(&format!("{n}_neg")).expect("name present") -= v;
            }
        }
    }
    Ok(FeatureVector::from_map(&map))
}

/// The commit-level embedding of one snapshot.
pub fn commit_embedding(snapshot: &CommitSnapshot, analyzer: &Analyzer) -> Result<FeatureVector> {
    let names = analyzer.feature_names();
    let diffs = snapshot
        .files
        .iter()
        .map(|p| {
            let (pre, post) = version_vectors(p, analyzer);
            file_diff(&pre, &post)
        })
        .collect::<Result<Vec<_>>>()?;
    aggregate_commit(&diffs, &names)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    pub analyzer: String,
    pub feature_names: Vec<String>,
    pub commit_ids: Vec<String>,
    pub labels: Vec<u8>,
    pub folds: Vec<u8>,
    pub rows: Vec<Vec<f64>>,
}

impl EmbeddingMatrix {
    pub fn new(analyzer: &str, feature_names: Vec<String>) -> Self {
        EmbeddingMatrix {
            analyzer: analyzer.to_string(),
            feature_names,
            commit_ids: Vec::new(),
            labels: Vec::new(),
            folds: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, commit_id: String, label: u8, fold: u8, row: Vec<f64>) -> Result<()> {
        if row.len() != self.feature_names.len() {
            return Err(Error::Invalid(format!("row for {commit_id} has {} values, expected {}", row.len(), self.feature_names.len())));
        }
        self.commit_ids.push(commit_id);
        self.labels.push(label);
        self.folds.push(fold);
        self.rows.push(row);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.feature_names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// commit id → (label, fold).
    pub fn provenance(&self) -> BTreeMap<String, (u8, u8)> {
        self.commit_ids.iter().cloned().zip(self.labels.iter().copied().zip(self.folds.iter().copied())).collect()
    }

    pub fn select_columns(&self, keep: &[usize]) -> EmbeddingMatrix {
        EmbeddingMatrix {
            analyzer: self.analyzer.clone(),
            feature_names: keep.iter().map(|&j| self.feature_names[j].clone()).collect(),
            commit_ids: self.commit_ids.clone(),
            labels: self.labels.clone(),
            folds: self.folds.clone(),
            rows: self.rows.iter().map(|r| keep.iter().map(|&j| r[j]).collect()).collect(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["commit_id".to_string(), "label".into(), "test_fold".into()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec = vec![self.commit_ids[i].clone(), self.labels[i].to_string(), self.folds[i].to_string()];
            rec.extend(self.rows[i].iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path, analyzer: &str) -> Result<EmbeddingMatrix> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let mut r = csv::Reader::from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.len() < 3 || header[..3] != ["commit_id", "label", "test_fold"] {
            return Err(Error::Invalid(format!("{}: unexpected embedding header", path.display())));
        }
        let mut m = EmbeddingMatrix::new(analyzer, header[3..].to_vec());
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::Invalid(format!("{}: row {}: bad {what}", path.display(), i + 1));
            let label = rec[1].parse().map_err(|_| bad("label"))?;
            let fold = rec[2].parse().map_err(|_| bad("test_fold"))?;
            let row = rec.iter().skip(3).map(|v| v.parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>().map_err(|_| bad("value"))?;
            m.push(rec[0].to_string(), label, fold, row)?;
        }
        Ok(m)
    }
}

/// Value key used for duplicate and constant detection: 12 significant digits.
fn rounded_key(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    format!("{v:.11e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneOutcome {
    pub matrix: EmbeddingMatrix,
    pub constant: Vec<String>,
    /// (dropped, kept) pairs.
    pub duplicates: Vec<(String, String)>,
}

/// Indices of the columns that survive pruning when judged on `rows`.
/// Columns are visited in name order, so the lexicographically first of a
/// duplicate group is kept.
pub fn prune_plan(m: &EmbeddingMatrix, rows: &[usize]) -> (Vec<usize>, Vec<usize>, Vec<(usize, usize)>) {
    let mut order: Vec<usize> = (0..m.n_cols()).collect();
    order.sort_by(|&a, &b| m.feature_names[a].cmp(&m.feature_names[b]));
    let mut seen: HashMap<Vec<String>, usize> = HashMap::new();
    let (mut keep, mut constant, mut dups) = (Vec::new(), Vec::new(), Vec::new());
    for j in order {
        let key: Vec<String> = rows.iter().map(|&i| rounded_key(m.rows[i][j])).collect();
        if key.windows(2).all(|w| w[0] == w[1]) {
            constant.push(j);
            continue;
        }
        match seen.get(&key) {
            Some(&first) => dups.push((j, first)),
            None => {
                seen.insert(key, j);
                keep.push(j);
            }
        }
    }
    keep.sort_unstable();
    (keep, constant, dups)
}

/// Drops constant columns and duplicate columns over the whole matrix.
pub fn prune_columns(m: &EmbeddingMatrix) -> PruneOutcome {
    let all: Vec<usize> = (0..m.n_rows()).collect();
    let (keep, constant, dups) = prune_plan(m, &all);
    PruneOutcome {
        matrix: m.select_columns(&keep),
        constant: constant.into_iter().map(|j| m.feature_names[j].clone()).collect(),
        duplicates: dups.into_iter().map(|(d, k)| (m.feature_names[d].clone(), m.feature_names[k].clone())).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CommitRecord, FileStatus};
    use proptest::prelude::*;

    fn fv(names: &[&str], vals: &[f64]) -> FeatureVector {
        FeatureVector::new(names.iter().map(|s| s.to_string()).collect(), vals.to_vec()).unwrap()
    }

    #[test]
    fn missing_side_is_zero() {
        let a = Analyzer::new(AnalyzerId::Metrics, Thresholds::default());
        let added = FilePair::from_sides("A.java".into(), None, Some("class A { void f() {} }".into())).unwrap();
        let (pre, post) = version_vectors(&added, &a);
        assert!(pre.values().iter().all(|&v| v == 0.0));
        assert_eq!(post.get("method_count"), Some(1.0));
        let deleted = FilePair::from_sides("A.java".into(), Some("class A {}".into()), None).unwrap();
        assert_eq!(deleted.status, FileStatus::Deleted);
        let (pre, post) = version_vectors(&deleted, &a);
        assert!(post.values().iter().all(|&v| v == 0.0));
        assert_eq!(pre.get("loc"), Some(1.0));
        let same_output = FilePair::from_sides("A.java".into(), Some("class A {}".into()), Some("class A {}\n".into())).unwrap();
        let (pre, post) = version_vectors(&same_output, &a);
        assert_eq!(pre, post);
    }

    #[test]
    fn parse_failure_sets_flag_on_that_side() {
        let a = Analyzer::new(AnalyzerId::Graph, Thresholds::default());
        let pair = FilePair::from_sides("A.java".into(), Some("class A {}".into()), Some("class A {".into())).unwrap();
        let (pre, post) = version_vectors(&pair, &a);
        assert_eq!(pre.get("parse_error"), Some(0.0));
        assert_eq!(post.get("parse_error"), Some(1.0));
        assert_eq!(post.values().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn diff_and_aggregate() {
        let n = ["a", "b", "c"];
        let d = file_diff(&fv(&n, &[2.0, 0.0, 1.0]), &fv(&n, &[3.0, 0.0, 0.0])).unwrap();
        assert_eq!(d.values(), &[1.0, 0.0, -1.0]);
        assert!(file_diff(&fv(&n, &[1.0, 2.0, 3.0]), &fv(&n, &[1.0, 2.0, 3.0])).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(matches!(file_diff(&fv(&n, &[0.0; 3]), &fv(&["a", "x", "c"], &[0.0; 3])), Err(Error::FeatureMismatch { index: 1, .. })));

        let names: Vec<String> = vec!["f".into()];
        let agg = aggregate_commit(&[fv(&["f"], &[2.0]), fv(&["f"], &[-3.0])], &names).unwrap();
        assert_eq!(agg.get("f_pos"), Some(2.0));
        assert_eq!(agg.get("f_neg"), Some(3.0));
        let empty = aggregate_commit(&[], &names).unwrap();
        assert_eq!(empty.names(), &["f_neg".to_string(), "f_pos".to_string()]);
        assert!(empty.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_commit_is_zero_row() {
        let record = CommitRecord { repo_url: "r".into(), sha: "a".repeat(40), label: 0, test_fold: 0, message: None };
        // FilePair construction refuses unchanged files, so build one directly.
        let pair = FilePair {
            path: "A.java".into(),
            status: FileStatus::Modified,
            pre_text: Some("class A { void f() { if (x) { g(); } } }".into()),
            post_text: Some("class A { void f() { if (x) { g(); } } }".into()),
        };
        let snap = CommitSnapshot { record, files: vec![pair] };
        for id in AnalyzerId::ALL {
            let v = commit_embedding(&snap, &Analyzer::new(id, Thresholds::default())).unwrap();
            assert!(v.values().iter().all(|&x| x == 0.0), "{id}");
        }
    }

    fn matrix(cols: &[(&str, Vec<f64>)]) -> EmbeddingMatrix {
        let n = cols[0].1.len();
        let mut m = EmbeddingMatrix::new("t", cols.iter().map(|c| c.0.to_string()).collect());
        for i in 0..n {
            m.push(format!("c{i}"), (i % 2) as u8, (i % 5) as u8, cols.iter().map(|c| c.1[i]).collect()).unwrap();
        }
        m
    }

    #[test]
    fn prune_constant_and_duplicates() {
        let m = matrix(&[
            ("z", vec![1.0, 2.0, 3.0]),
            ("seven", vec![7.0, 7.0, 7.0]),
            ("a", vec![1.0, 2.0, 3.0]),
            ("b", vec![1.0, 2.0, 3.0000000000001]),
            ("c", vec![0.0, 1.0, 0.0]),
        ]);
        let out = prune_columns(&m);
        assert_eq!(out.matrix.feature_names, vec!["a", "c"]);
        assert_eq!(out.constant, vec!["seven"]);
        assert_eq!(out.duplicates, vec![("b".to_string(), "a".to_string()), ("z".to_string(), "a".to_string())]);
        assert_eq!(out.matrix.provenance(), m.provenance());
        let all_gone = prune_columns(&matrix(&[("k", vec![1.0, 1.0])]));
        assert_eq!(all_gone.matrix.n_cols(), 0);
        assert_eq!(all_gone.matrix.n_rows(), 2);
    }

    #[test]
    fn csv_round_trip() {
        let m = matrix(&[("a", vec![0.1, 1.0 / 3.0, -2.5]), ("b", vec![1e-17, 0.0, 12345.678])]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        m.write_csv(&p).unwrap();
        assert_eq!(EmbeddingMatrix::read_csv(&p, "t").unwrap(), m);
    }

    proptest! {
        #[test]
        fn diff_is_antisymmetric(a in prop::collection::vec(-1e6f64..1e6, 5), b in prop::collection::vec(-1e6f64..1e6, 5)) {
            let names = ["a", "b", "c", "d", "e"];
            let x = fv(&names, &a);
            let y = fv(&names, &b);
            let d1 = file_diff(&x, &y).unwrap();
            let d2 = file_diff(&y, &x).unwrap();
            for (p, q) in d1.values().iter().zip(d2.values()) {
                prop_assert_eq!(*p, -*q);
            }
        }

        #[test]
        fn net_change_is_conserved(diffs in prop::collection::vec(prop::collection::vec(-50i32..50, 3), 0..6)) {
            let names: Vec<String> = vec!["p".into(), "q".into(), "r".into()];
            let vs: Vec<FeatureVector> = diffs.iter().map(|d| FeatureVector::new(names.clone(), d.iter().map(|&x| x as f64).collect()).unwrap()).collect();
            let agg = aggregate_commit(&vs, &names).unwrap();
            for (j, n) in names.iter().enumerate() {
                let net: f64 = diffs.iter().map(|d| d[j] as f64).sum();
                let pos = agg.get(&format!("{n}_pos")).unwrap();
                let neg = agg.get(&format!("{n}_neg")).unwrap();
                prop_assert!(pos >= 0.0 && neg >= 0.0);
                prop_assert_eq!(pos - neg, net);
            }
        }

        #[test]
        fn pruning_is_idempotent(cols in prop::collection::vec(prop::collection::vec(0u8..3, 6), 1..8)) {
            let named: Vec<(String, Vec<f64>)> = cols.iter().enumerate().map(|(i, c)| (format!("f{i}"), c.iter().map(|&x| x as f64).collect())).collect();
            let refs: Vec<(&str, Vec<f64>)> = named.iter().map(|(n, v)| (n.as_str(), v.clone())).collect();
            let m = matrix(&refs);
            let once = prune_columns(&m).matrix;
            let twice = prune_columns(&once).matrix;
            prop_assert_eq!(&once, &twice);
            for j in 0..once.n_cols() {
                let c = once.column(j);
                prop_assert!(c.iter().any(|&v| v != c[0]));
                for k in j + 1..once.n_cols() {
                    prop_assert_ne!(c.clone(), once.column(k));
                }
            }
        }
    }
}
