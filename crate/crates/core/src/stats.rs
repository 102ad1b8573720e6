//! Chi-square screening of embedding columns against the label: binning,
//! contingency tables, Yates-corrected statistics and Cramér's V.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};

pub const ALPHA: f64 = 0.05;

/// r × c table of observed counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self> {
        let c = counts.first().map_or(0, Vec::len);
        if counts.len() < 2 || c < 2 || counts.iter().any(|r| r.len() != c) {
            return Err(Error::Invalid("contingency table must be rectangular and at least 2x2".into()));
        }
        Ok(ContingencyTable { counts })
    }

    /// Cross-tabulates category ids (rows) against labels (columns). Rows
    /// and columns without observations are left out.
    pub fn from_categories(categories: &[usize], labels: &[u8]) -> Result<Self> {
        let n_cat = categories.iter().copied().max().map_or(0, |m| m + 1);
        let n_lab = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
        let mut counts = vec![vec![0u64; n_lab]; n_cat];
        for (&c, &l) in categories.iter().zip(labels) {
            counts[c][l as usize] += 1;
        }
        counts.retain(|r| r.iter().any(|&x| x > 0));
        let keep: Vec<usize> = (0..n_lab).filter(|&j| counts.iter().any(|r| r[j] > 0)).collect();
        let counts = counts.into_iter().map(|r| keep.iter().map(|&j| r[j]).collect()).collect();
        Self::new(counts)
    }

    pub fn rows(&self) -> usize {
        self.counts.len()
    }

    pub fn cols(&self) -> usize {
        self.counts[0].len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Expected counts under independence; errors on an empty margin.
    pub fn expected(&self) -> Result<Vec<Vec<f64>>> {
        let rs: Vec<u64> = self.counts.iter().map(|r| r.iter().sum()).collect();
        let cs: Vec<u64> = (0..self.cols()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect();
        if let Some(i) = rs.iter().position(|&x| x == 0) {
            return Err(Error::EmptyMargin { axis: "row", index: i });
        }
        if let Some(j) = cs.iter().position(|&x| x == 0) {
            return Err(Error::EmptyMargin { axis: "column", index: j });
        }
        let n = self.total() as f64;
        Ok(rs.iter().map(|&r| cs.iter().map(|&c| r as f64 * c as f64 / n).collect()).collect())
    }

    pub fn min_expected(&self) -> Result<f64> {
        Ok(self.expected()?.into_iter().flatten().fold(f64::INFINITY, f64::min))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub chi2: f64,
    pub p_value: f64,
    pub dof: usize,
}

/// Upper tail of the chi-square distribution.
pub fn chi2_sf(x: f64, dof: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64).map(|d| d.sf(x)).unwrap_or(f64::NAN)
}

fn statistic(t: &ContingencyTable, yates: bool) -> Result<f64> {
    let e = t.expected()?;
    let mut chi2 = 0.0;
    for (orow, erow) in t.counts.iter().zip(&e) {
        for (&o, &ex) in orow.iter().zip(erow) {
            let mut d = (o as f64 - ex).abs();
            if yates {
                // The correction never moves |O - E| past zero.
                d -= d.min(0.5);
            }
            chi2 += d * d / ex;
        }
    }
    Ok(chi2)
}

/// Pearson's test of independence; Yates' correction applies when dof = 1.
pub fn chi_square(t: &ContingencyTable) -> Result<ChiSquare> {
    let dof = (t.rows() - 1) * (t.cols() - 1);
    let chi2 = statistic(t, dof == 1)?;
    Ok(ChiSquare { chi2, p_value: chi2_sf(chi2, dof), dof })
}

/// Pearson's statistic without any continuity correction.
pub fn chi_square_uncorrected(t: &ContingencyTable) -> Result<ChiSquare> {
    let dof = (t.rows() - 1) * (t.cols() - 1);
    let chi2 = statistic(t, false)?;
    Ok(ChiSquare { chi2, p_value: chi2_sf(chi2, dof), dof })
}

/// sqrt(χ² / (n · min(r−1, c−1))), clamped to [0, 1].
pub fn cramers_v(chi2: f64, n: u64, r: usize, c: usize) -> f64 {
    let k = (r.min(c) - 1) as f64;
    (chi2 / (n as f64 * k)).sqrt().clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strength {
    None,
    Low,
    Moderate,
    High,
}

impl Strength {
    pub const ALL: [Strength; 4] = [Strength::None, Strength::Low, Strength::Moderate, Strength::High];

    /// Bands with inclusive lower bounds: 0.1 low, 0.3 moderate, 0.5 high.
    pub fn of(v: f64) -> Strength {
        if v >= 0.5 {
            Strength::High
        } else if v >= 0.3 {
            Strength::Moderate
        } else if v >= 0.1 {
            Strength::Low
        } else {
            Strength::None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strength::None => "none",
            Strength::Low => "low",
            Strength::Moderate => "moderate",
            Strength::High => "high",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binning {
    pub categories: Vec<usize>,
    /// Number of quantile bins for non-zero values (1 for binary features).
    pub nonzero_bins: usize,
    pub binary: bool,
    pub degenerate: bool,
}

/// Cut positions (exclusive ends of bins) of `m` sorted values into k bins.
fn cuts(m: usize, k: usize) -> Vec<usize> {
    (1..k).map(|i| ((i * m) as f64 / k as f64).round() as usize).collect()
}

fn splits_ties(sorted: &[f64], cut_positions: &[usize]) -> bool {
    cut_positions.iter().any(|&p| p == 0 || p >= sorted.len() || sorted[p - 1] == sorted[p])
}

/// Largest k ≤ `max_k` whose equal-frequency cuts keep equal values together.
fn feasible_bins(sorted: &[f64], max_k: usize) -> usize {
    (1..=max_k.min(sorted.len()).max(1)).rev().find(|&k| !splits_ties(sorted, &cuts(sorted.len(), k))).unwrap_or(1)
}

fn assign(values: &[f64], sorted_nonzero: &[f64], k: usize) -> Vec<usize> {
    let cut_positions = cuts(sorted_nonzero.len(), k);
    values
        .iter()
        .map(|&v| {
            if v == 0.0 {
                return 0;
            }
            let pos = sorted_nonzero.partition_point(|&x| x < v);
            1 + cut_positions.iter().filter(|&&c| c <= pos).count()
        })
        .collect()
}

/// Category 0 for zeros, then equal-frequency bins over the non-zero
/// values. A feature with more than 90% zeros becomes binary.
pub fn bin_feature(values: &[f64], max_bins: usize) -> Binning {
    let degenerate = values.windows(2).all(|w| w[0] == w[1]);
    let zeros = values.iter().filter(|&&v| v == 0.0).count();
    if degenerate {
        return Binning { categories: vec![0; values.len()], nonzero_bins: 0, binary: false, degenerate: true };
    }
    if zeros as f64 > 0.9 * values.len() as f64 {
        let categories = values.iter().map(|&v| usize::from(v != 0.0)).collect();
        return Binning { categories, nonzero_bins: 1, binary: true, degenerate: false };
    }
    let mut sorted: Vec<f64> = values.iter().copied().filter(|&v| v != 0.0).collect();
    sorted.sort_by(f64::total_cmp);
    let k = feasible_bins(&sorted, max_bins);
    Binning { categories: assign(values, &sorted, k), nonzero_bins: k, binary: false, degenerate: false }
}

/// Re-bins with fewer non-zero bins until every expected count is at least
/// 5 or only two categories remain. Returns the binning and whether it had
/// to be reduced.
pub fn bin_with_min_expected(values: &[f64], labels: &[u8], max_bins: usize) -> (Binning, bool) {
    let mut b = bin_feature(values, max_bins);
    let mut reduced = false;
    if b.degenerate || b.binary {
        return (b, false);
    }
    let mut sorted: Vec<f64> = values.iter().copied().filter(|&v| v != 0.0).collect();
    sorted.sort_by(f64::total_cmp);
    loop {
        let ok = ContingencyTable::from_categories(&b.categories, labels).and_then(|t| t.min_expected()).map_or(true, |m| m >= 5.0);
        let n_categories = b.categories.iter().collect::<std::collections::BTreeSet<_>>().len();
        if ok || b.nonzero_bins <= 1 || n_categories <= 2 {
            return (b, reduced);
        }
        let k = feasible_bins(&sorted, b.nonzero_bins - 1);
        b = Binning { categories: assign(values, &sorted, k), nonzero_bins: k, binary: false, degenerate: false };
        reduced = true;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureAssociation {
    pub feature: String,
    pub chi2: f64,
    pub p_value: f64,
    pub dof: usize,
    pub significant: bool,
    pub cramers_v: Option<f64>,
    pub strength: Option<Strength>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AssociationReport {
    pub entries: Vec<FeatureAssociation>,
    /// (feature, reason) for features that could not be tested.
    pub skipped: Vec<(String, String)>,
    /// Features whose bin count was lowered to satisfy the expected-count rule.
    pub reduced: Vec<String>,
}

impl AssociationReport {
    /// Significant features per strength band, plus the totals.
    pub fn summary(&self) -> BTreeMap<String, usize> {
        let mut s: BTreeMap<String, usize> = Strength::ALL.iter().map(|b| (b.as_str().to_string(), 0)).collect();
        for e in &self.entries {
            if let Some(b) = e.strength {
                *s.get_mut(b.as_str()).expect("band present") += 1;
            }
        }
        s.insert("tested".into(), self.entries.len());
        s.insert("significant".into(), self.entries.iter().filter(|e| e.significant).count());
        s.insert("skipped".into(), self.skipped.len());
        s
    }
}

/// Tests one column against the labels at the default level.
pub fn associate(feature: &str, values: &[f64], labels: &[u8], max_bins: usize) -> std::result::Result<(FeatureAssociation, bool), String> {
    associate_at(feature, values, labels, max_bins, ALPHA)
}

pub fn associate_at(
    feature: &str,
    values: &[f64],
    labels: &[u8],
    max_bins: usize,
    alpha: f64,
) -> std::result::Result<(FeatureAssociation, bool), String> {
    let (binning, reduced) = bin_with_min_expected(values, labels, max_bins);
    if binning.degenerate {
        return Err("constant".into());
    }
    let table = ContingencyTable::from_categories(&binning.categories, labels).map_err(|e| e.to_string())?;
    let test = chi_square(&table).map_err(|e| e.to_string())?;
    let significant = test.p_value < alpha;
    let v = significant.then(|| cramers_v(test.chi2, table.total(), table.rows(), table.cols()));
    let assoc = FeatureAssociation {
        feature: feature.to_string(),
        chi2: test.chi2,
        p_value: test.p_value,
        dof: test.dof,
        significant,
        cramers_v: v,
        strength: v.map(Strength::of),
    };
    Ok((assoc, reduced))
}

/// Screens every column of the matrix; columns are independent and tested in parallel.
pub fn association_report(m: &EmbeddingMatrix, max_bins: usize) -> AssociationReport {
    association_report_at(m, max_bins, ALPHA)
}

pub fn association_report_at(m: &EmbeddingMatrix, max_bins: usize, alpha: f64) -> AssociationReport {
    use rayon::prelude::*;
    let results: Vec<_> = (0..m.n_cols())
        .into_par_iter()
        .map(|j| (j, associate_at(&m.feature_names[j], &m.column(j), &m.labels, max_bins, alpha)))
        .collect();
    let mut report = AssociationReport::default();
    for (j, r) in results {
        let name = m.feature_names[j].clone();
        match r {
            Ok((a, reduced)) => {
                if reduced {
                    log::warn!("{name}: expected counts below 5, bins reduced");
                    report.reduced.push(name);
                }
                report.entries.push(a);
            }
            Err(reason) => report.skipped.push((name, reason)),
        }
    }
    report
}

pub fn write_report_csv(path: &std::path::Path, report: &AssociationReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["feature", "chi2", "p", "dof", "significant", "cramers_v", "strength"])?;
    for e in &report.entries {
        w.write_record([
            e.feature.clone(),
            e.chi2.to_string(),
            e.p_value.to_string(),
            e.dof.to_string(),
            e.significant.to_string(),
            e.cramers_v.map(|v| v.to_string()).unwrap_or_default(),
            e.strength.map(|s| s.as_str().to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
