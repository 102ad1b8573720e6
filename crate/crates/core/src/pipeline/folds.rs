use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Shuffles each class, then deals its members round-robin, continuing the
/// dealer position from one class to the next.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<Vec<u8>> {
    if k < 2 {
        return Err(Error::Invalid(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0u8; labels.len()];
    let mut next = 0usize;
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::Invalid(format!("class {class} has {} members, fewer than {k} folds", members.len())));
        }
        members.shuffle(&mut rng);
        for i in members {
            folds[i] = (next % k) as u8;
            next += 1;
        }
    }
    Ok(folds)
}

/// Checks an externally supplied assignment: folds numbered `0..k` with
/// both classes present in every fold.
pub fn validate_folds(labels: &[u8], folds: &[u8]) -> Result<usize> {
    if labels.len() != folds.len() {
        return Err(Error::Invalid(format!("{} labels but {} fold entries", labels.len(), folds.len())));
    }
    let k = folds.iter().map(|f| *f as usize + 1).max().unwrap_or(0);
    if k < 2 {
        return Err(Error::Invalid("fold assignment has fewer than 2 folds".into()));
    }
    for f in 0..k as u8 {
        for class in [0u8, 1] {
            if !labels.iter().zip(folds).any(|(l, g)| *l == class && *g == f) {
                return Err(Error::Invalid(format!("fold {f} has no rows of class {class}")));
            }
        }
    }
    Ok(k)
}

pub fn split(folds: &[u8], test: u8) -> (Vec<usize>, Vec<usize>) {
    (0..folds.len()).partition(|&i| folds[i] != test)
}
