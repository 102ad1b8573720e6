use std::fs;
use std::path::{Path, PathBuf};

use super::{CommitRecord, CommitSnapshot, FilePair};
use crate::error::{Error, Result};

fn side_files(root: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    if !root.exists() {
        return Ok(out);
    }
    let mut stack: Vec<PathBuf> = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else if let Ok(rel) = p.strip_prefix(root) {
                out.push(rel.to_string_lossy().replace('\\', "/"));
            }
        }
    }
    Ok(out)
}

/// Writes the snapshot under `dir/<commit_id>/{pre,post}/<path>`, replacing
/// whatever was there.
pub fn write_snapshot(dir: &Path, snap: &CommitSnapshot) -> Result<PathBuf> {
    let root = dir.join(snap.record.commit_id());
    if root.exists() {
        fs::remove_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    }
    fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    for pair in &snap.files {
        for (side, text) in [("pre", &pair.pre_text), ("post", &pair.post_text)] {
            if let Some(text) = text {
                let p = root.join(side).join(&pair.path);
                if let Some(parent) = p.parent() {
                    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
                fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
            }
        }
    }
    Ok(root)
}

/// Reads a snapshot written by [`write_snapshot`]; statuses follow from which
/// sides exist.
pub fn read_snapshot(dir: &Path, record: &CommitRecord) -> Result<CommitSnapshot> {
    let root = dir.join(record.commit_id());
    if !root.is_dir() {
        return Err(Error::MissingArtifact(root));
    }
    let mut paths = side_files(&root.join("pre"))?;
    paths.extend(side_files(&root.join("post"))?);
    paths.sort();
    paths.dedup();
    let read = |side: &str, p: &str| -> Result<Option<String>> {
        let f = root.join(side).join(p);
        match fs::read(&f) {
            Ok(bytes) => Ok(Some(String::from_utf8_lossy(&bytes).into_owned())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(&f, e)),
        }
    };
    let mut files = Vec::new();
    for p in paths {
        let pre = read("pre", &p)?;
        let post = read("post", &p)?;
        files.extend(FilePair::from_sides(p, pre, post));
    }
    Ok(CommitSnapshot { record: record.clone(), files })
}

#[cfg(test)]
mod tests {
    use super::super::FileStatus;
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let record = CommitRecord { repo_url: "https://h/o/r.git".into(), sha: "c".repeat(40), label: 1, test_fold: 1, message: None };
        let snap = CommitSnapshot {
            record: record.clone(),
            files: vec![
                FilePair::from_sides("a/B.java".into(), Some("x".into()), Some("y".into())).unwrap(),
                FilePair::from_sides("C.java".into(), None, Some("z".into())).unwrap(),
                FilePair::from_sides("D.java".into(), Some("w".into()), None).unwrap(),
            ],
        };
        write_snapshot(dir.path(), &snap).unwrap();
        let back = read_snapshot(dir.path(), &record).unwrap();
        let mut expected = snap.files.clone();
        expected.sort_by(|a, b| a.path.cmp(&b.path));
        assert_eq!(back.files, expected);
        assert_eq!(back.files.iter().filter(|f| f.status == FileStatus::Added).count(), 1);
    }
}
