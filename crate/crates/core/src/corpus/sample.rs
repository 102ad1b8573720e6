use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CommitRecord, Repo};
use crate::error::Result;

/// The candidate pool ran out before every positive got a negative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialSample {
    pub found: Vec<CommitRecord>,
    pub requested: usize,
}

impl std::fmt::Display for PartialSample {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "only {} of {} negatives found", self.found.len(), self.requested)
    }
}

/// Draws one random commit of the same repository per positive, skipping
/// positives, commits whose message mentions a keyword, and commits with a
/// number of changed source files outside `size_limits`. The i-th negative
/// inherits the test fold of the i-th positive.
pub fn sample_negatives(
    repo: &Repo,
    positives: &[CommitRecord],
    keywords: &[String],
    size_limits: (usize, usize),
    extensions: &[String],
    seed: u64,
) -> Result<Result<Vec<CommitRecord>, PartialSample>> {
    let taken: HashSet<&str> = positives.iter().map(|p| p.sha.as_str()).collect();
    let keywords: Vec<String> = keywords.iter().map(|k| k.to_lowercase()).collect();
    let mut pool: Vec<_> = repo
        .all_commits()?
        .into_iter()
        .filter(|c| !taken.contains(c.sha.as_str()))
        .filter(|c| {
            let msg = c.message.to_lowercase();
            !keywords.iter().any(|k| msg.contains(k.as_str()))
        })
        .collect();
    pool.sort_by(|a, b| a.sha.cmp(&b.sha));
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let repo_url = positives.first().map(|p| p.repo_url.clone()).unwrap_or_default();
    let mut found = Vec::new();
    for c in pool {
        if found.len() == positives.len() {
            break;
        }
        let n = repo.source_change_count(&c.sha, extensions)?;
        if n < size_limits.0.max(1) || n > size_limits.1 {
            continue;
        }
        found.push(CommitRecord {
            repo_url: repo_url.clone(),
            sha: c.sha,
            label: 0,
            test_fold: positives[found.len()].test_fold,
            message: Some(c.message),
        });
    }
    if found.len() < positives.len() {
        return Ok(Err(PartialSample { found, requested: positives.len() }));
    }
    Ok(Ok(found))
}
