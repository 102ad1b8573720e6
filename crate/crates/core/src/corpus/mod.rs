//! Labeled commit manifest, before/after file contents from git, negative
//! sampling and the on-disk snapshot cache.

mod cache;
mod git;
mod sample;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cache::{read_snapshot, write_snapshot};
pub use git::{fetch_mirror, CommitInfo, Repo};
pub use sample::{sample_negatives, PartialSample};

pub const DEFAULT_KEYWORDS: [&str; 10] =
    ["security", "vulnerab", "exploit", "cve", "xss", "injection", "overflow", "csrf", "denial of service", "rce"];

pub const MANIFEST_HEADER: [&str; 4] = ["repo_url", "sha", "label", "test_fold"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub repo_url: String,
    pub sha: String,
    pub label: u8,
    pub test_fold: u8,
    pub message: Option<String>,
}

impl CommitRecord {
    /// Identifier used in caches and embedding rows: `<repo slug>@<sha>`.
    pub fn commit_id(&self) -> String {
        format!("{}@{}", repo_slug(&self.repo_url), self.sha)
    }
}

/// Filesystem-safe name for a repository URL: the path part with `/`
/// replaced by `_` and any `.git` suffix removed.
pub fn repo_slug(url: &str) -> String {
    let rest = url.split_once("://").map(|(_, r)| r).unwrap_or(url);
    let path = match rest.split_once('/') {
        Some((host, p)) if url.contains("://") && !host.is_empty() => p,
        _ => rest,
    };
    let path = path.trim_end_matches('/').trim_end_matches(".git");
    let slug: String = path
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '.' | '_') { c } else { '_' })
        .collect();
    slug.trim_matches('_').to_string()
}

pub fn is_hex_sha(s: &str) -> bool {
    s.len() == 40 && s.bytes().all(|b| b.is_ascii_hexdigit())
}

/// Reads a manifest CSV (`repo_url,sha,label,test_fold[,message]`).
pub fn load_manifest(path: &Path) -> Result<Vec<CommitRecord>> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::Csv(e),
    })?;
    let bad = |row: usize, column: &str, message: String| Error::Manifest {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        message,
    };
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let with_message = header.len() == 5 && header[4] == "message";
    if header[..header.len().min(4)] != MANIFEST_HEADER[..] || !(header.len() == 4 || with_message) {
        return Err(bad(0, "header", format!("expected {}[,message], found {}", MANIFEST_HEADER.join(","), header.join(","))));
    }

    let mut records = Vec::new();
    let mut seen = std::collections::HashMap::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| bad(row_no, "*", e.to_string()))?;
        let repo_url = row[0].trim().to_string();
        if repo_url.is_empty() {
            return Err(bad(row_no, "repo_url", "empty".into()));
        }
        let sha = row[1].trim().to_ascii_lowercase();
        if !is_hex_sha(&sha) {
            return Err(bad(row_no, "sha", format!("{:?} is not a 40-character hex object id", &row[1])));
        }
        let label = match row[2].trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(bad(row_no, "label", format!("{other:?} is not 0 or 1"))),
        };
        let test_fold = match row[3].trim().parse::<u8>() {
            Ok(f) if f <= 4 => f,
            _ => return Err(bad(row_no, "test_fold", format!("unknown fold {:?}", &row[3]))),
        };
        let message = if with_message { Some(row[4].to_string()) } else { None };
        if let Some(first) = seen.insert((repo_url.clone(), sha.clone()), row_no) {
            return Err(Error::DuplicateCommit { repo_url, sha, first, second: row_no });
        }
        records.push(CommitRecord { repo_url, sha, label, test_fold, message });
    }
    Ok(records)
}

pub fn write_manifest(path: &Path, records: &[CommitRecord]) -> Result<()> {
    let with_message = records.iter().any(|r| r.message.is_some());
    let mut w = csv::Writer::from_path(path)?;
    let mut header = MANIFEST_HEADER.to_vec();
    if with_message {
        header.push("message");
    }
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.repo_url.clone(), r.sha.clone(), r.label.to_string(), r.test_fold.to_string()];
        if with_message {
            row.push(r.message.clone().unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileStatus {
    Modified,
    Added,
    Deleted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilePair {
    pub path: String,
    pub status: FileStatus,
    pub pre_text: Option<String>,
    pub post_text: Option<String>,
}

impl FilePair {
    /// Builds a pair from the two sides, or `None` when nothing changed.
    pub fn from_sides(path: String, pre: Option<String>, post: Option<String>) -> Option<FilePair> {
        let status = match (&pre, &post) {
            (None, Some(_)) => FileStatus::Added,
            (Some(_), None) => FileStatus::Deleted,
            (Some(a), Some(b)) if a != b => FileStatus::Modified,
            _ => return None,
        };
        Some(FilePair { path, status, pre_text: pre, post_text: post })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitSnapshot {
    pub record: CommitRecord,
    pub files: Vec<FilePair>,
}

pub fn has_source_extension(path: &str, extensions: &[String]) -> bool {
    extensions.iter().any(|e| path.ends_with(e.as_str()))
}
