use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use super::{has_source_extension, CommitRecord, CommitSnapshot, FilePair};
use crate::error::{Error, Result};

/// A local clone accessed through the system `git` client.
#[derive(Debug, Clone)]
pub struct Repo {
    path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitInfo {
    pub sha: String,
    pub parents: Vec<String>,
    pub message: String,
}

impl Repo {
    pub fn open(path: &Path) -> Result<Repo> {
        let repo = Repo { path: path.to_path_buf() };
        repo.git(&["rev-parse", "--git-dir"])?;
        Ok(repo)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn git(&self, args: &[&str]) -> Result<Vec<u8>> {
        let out = Command::new("git")
            .arg("-C")
            .arg(&self.path)
            .args(args)
            .stdin(Stdio::null())
            .output()
            .map_err(|e| Error::Git { args: args.join(" "), message: e.to_string() })?;
        if !out.status.success() {
            return Err(Error::Git { args: args.join(" "), message: String::from_utf8_lossy(&out.stderr).trim().to_string() });
        }
        Ok(out.stdout)
    }

    fn git_text(&self, args: &[&str]) -> Result<String> {
        Ok(String::from_utf8_lossy(&self.git(args)?).into_owned())
    }

    /// True when the commit exists and some ref contains it.
    pub fn is_reachable(&self, sha: &str) -> bool {
        let spec = format!("{sha}^{{commit}}");
        if self.git(&["cat-file", "-e", &spec]).is_err() {
            return false;
        }
        self.git(&["for-each-ref", "--count=1", "--contains", sha, "--format=%(refname)"])
            .map(|o| !o.trim_ascii().is_empty())
            .unwrap_or(false)
    }

    pub fn parents(&self, sha: &str) -> Result<Vec<String>> {
        let line = self.git_text(&["rev-list", "--parents", "-n", "1", sha])?;
        Ok(line.split_whitespace().skip(1).map(str::to_string).collect())
    }

    pub fn message(&self, sha: &str) -> Result<String> {
        self.git_text(&["log", "-1", "--format=%B", sha])
    }

    /// Every commit reachable from any ref, in a stable order.
    pub fn all_commits(&self) -> Result<Vec<CommitInfo>> {
        let text = self.git_text(&["log", "--all", "--topo-order", "--format=%H%x1f%P%x1f%B%x1e"])?;
        let mut out = Vec::new();
        for entry in text.split('\x1e') {
            let entry = entry.trim_start_matches('\n');
            let mut parts = entry.splitn(3, '\x1f');
            let (Some(sha), Some(parents), Some(message)) = (parts.next(), parts.next(), parts.next()) else { continue };
            out.push(CommitInfo {
                sha: sha.to_string(),
                parents: parents.split_whitespace().map(str::to_string).collect(),
                message: message.trim_end().to_string(),
            });
        }
        Ok(out)
    }

    /// Paths changed by `sha` relative to its first parent, with git's
    /// one-letter status. Root commits diff against the empty tree.
    pub fn changed_paths(&self, sha: &str) -> Result<Vec<(char, String)>> {
        let parents = self.parents(sha)?;
        let raw = match parents.first() {
            Some(p) => self.git(&["diff-tree", "-r", "--no-renames", "--no-commit-id", "--name-status", "-z", p, sha])?,
            None => self.git(&["diff-tree", "-r", "--root", "--no-renames", "--no-commit-id", "--name-status", "-z", sha])?,
        };
        let fields: Vec<&[u8]> = raw.split(|&b| b == 0).filter(|f| !f.is_empty()).collect();
        let mut out = Vec::new();
        for pair in fields.chunks(2) {
            if let [status, path] = pair {
                let s = status.first().copied().unwrap_or(b'M') as char;
                out.push((s, String::from_utf8_lossy(path).into_owned()));
            }
        }
        Ok(out)
    }

    /// Contents of `rev:path` for each request, `None` where the object is missing.
    pub fn read_blobs(&self, requests: &[String]) -> Result<Vec<Option<Vec<u8>>>> {
        if requests.is_empty() {
            return Ok(Vec::new());
        }
        let err = |m: String| Error::Git { args: "cat-file --batch".into(), message: m };
        let mut child = Command::new("git")
            .arg("-C")
            .arg(&self.path)
            .args(["cat-file", "--batch"])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| err(e.to_string()))?;
        let mut stdin = child.stdin.take().ok_or_else(|| err("no stdin".into()))?;
        let input: String = requests.iter().map(|r| format!("{r}\n")).collect();
        let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
        let mut reader = BufReader::new(child.stdout.take().ok_or_else(|| err("no stdout".into()))?);
        let mut out = Vec::with_capacity(requests.len());
        for _ in requests {
            let mut header = String::new();
            reader.read_line(&mut header).map_err(|e| err(e.to_string()))?;
            let parts: Vec<&str> = header.split_whitespace().collect();
            if parts.len() == 3 && parts[1] == "blob" {
                let size: usize = parts[2].parse().map_err(|_| err(format!("bad header {header}")))?;
                let mut buf = vec![0; size + 1];
                reader.read_exact(&mut buf).map_err(|e| err(e.to_string()))?;
                buf.pop();
                out.push(Some(buf));
            } else if parts.len() == 3 {
                // Not a blob (e.g. a submodule commit): skip its payload.
                let size: usize = parts[2].parse().unwrap_or(0);
                let mut buf = vec![0; size + 1];
                reader.read_exact(&mut buf).map_err(|e| err(e.to_string()))?;
                out.push(None);
            } else {
                out.push(None);
            }
        }
        let _ = writer.join();
        let _ = child.wait();
        Ok(out)
    }

    /// Materializes the source files a commit changed, diffed against its
    /// first parent (all files count as added for a root commit).
    pub fn resolve_commit(&self, record: &CommitRecord, extensions: &[String]) -> Result<CommitSnapshot> {
        if !self.is_reachable(&record.sha) {
            return Err(Error::UnreachableCommit { repo: record.repo_url.clone(), sha: record.sha.clone() });
        }
        let parent = self.parents(&record.sha)?.into_iter().next();
        let mut paths: Vec<String> =
            self.changed_paths(&record.sha)?.into_iter().map(|(_, p)| p).filter(|p| has_source_extension(p, extensions)).collect();
        paths.sort();
        paths.dedup();
        let mut requests = Vec::new();
        for p in &paths {
            if let Some(par) = &parent {
                requests.push(format!("{par}:{p}"));
            }
            requests.push(format!("{}:{p}", record.sha));
        }
        let mut blobs = self.read_blobs(&requests)?.into_iter();
        let text = |b: Option<Vec<u8>>| b.map(|v| String::from_utf8_lossy(&v).into_owned());
        let mut files = Vec::new();
        for p in paths {
            let pre = if parent.is_some() { text(blobs.next().flatten()) } else { None };
            let post = text(blobs.next().flatten());
            files.extend(FilePair::from_sides(p, pre, post));
        }
        Ok(CommitSnapshot { record: record.clone(), files })
    }

    /// Number of changed paths with a source extension.
    pub fn source_change_count(&self, sha: &str, extensions: &[String]) -> Result<usize> {
        Ok(self.changed_paths(sha)?.iter().filter(|(_, p)| has_source_extension(p, extensions)).count())
    }
}

/// Clones `url` as a mirror into `dest`, or fetches when it already exists.
pub fn fetch_mirror(url: &str, dest: &Path) -> Result<()> {
    let run = |cmd: &mut Command, what: &str| -> Result<()> {
        let out = cmd.output().map_err(|e| Error::Git { args: what.into(), message: e.to_string() })?;
        if out.status.success() {
            Ok(())
        } else {
            Err(Error::Git { args: what.into(), message: String::from_utf8_lossy(&out.stderr).trim().to_string() })
        }
    };
    if dest.join("HEAD").exists() || dest.join(".git").exists() {
        run(Command::new("git").arg("-C").arg(dest).args(["fetch", "--prune", "--all", "-q"]), "fetch")
    } else {
        if let Some(parent) = dest.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        run(Command::new("git").args(["clone", "--mirror", "-q", url]).arg(dest), "clone --mirror")
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixture::FixtureRepo;
    use super::super::FileStatus;
    use super::*;

    fn java() -> Vec<String> {
        vec![".java".into()]
    }

    fn record(sha: &str) -> CommitRecord {
        CommitRecord { repo_url: "https://x/fixture.git".into(), sha: sha.into(), label: 1, test_fold: 0, message: None }
    }

    #[test]
    fn add_modify_delete_statuses() {
        let f = FixtureRepo::new();
        f.write("B.java", "class B {}\n");
        f.write("C.java", "class C {}\n");
        f.write("README.md", "hi\n");
        let root = f.commit("init");
        f.write("src/A.java", "class A {}\n");
        f.write("B.java", "class B { int x; }\n");
        f.remove("C.java");
        f.write("README.md", "changed\n");
        let sha = f.commit("change");
        let repo = Repo::open(&f.path()).unwrap();

        let snap = repo.resolve_commit(&record(&sha), &java()).unwrap();
        let got: Vec<(&str, FileStatus)> = snap.files.iter().map(|p| (p.path.as_str(), p.status)).collect();
        assert_eq!(got, vec![("B.java", FileStatus::Modified), ("C.java", FileStatus::Deleted), ("src/A.java", FileStatus::Added)]);
        assert_eq!(snap.files[0].pre_text.as_deref(), Some("class B {}\n"));
        assert_eq!(snap.files[0].post_text.as_deref(), Some("class B { int x; }\n"));
        assert!(snap.files[1].post_text.is_none());
        assert!(snap.files[2].pre_text.is_none());
        assert_eq!(repo.resolve_commit(&record(&sha), &java()).unwrap(), snap);

        let root_snap = repo.resolve_commit(&record(&root), &java()).unwrap();
        assert!(root_snap.files.iter().all(|p| p.status == FileStatus::Added));
        assert_eq!(root_snap.files.len(), 2);
    }

    #[test]
    fn non_source_commit_is_empty() {
        let f = FixtureRepo::new();
        f.write("A.java", "class A {}\n");
        f.commit("init");
        f.write("README.md", "docs\n");
        let sha = f.commit("docs");
        let snap = Repo::open(&f.path()).unwrap().resolve_commit(&record(&sha), &java()).unwrap();
        assert!(snap.files.is_empty());
    }

    #[test]
    fn deleted_branch_makes_commit_unreachable() {
        let f = FixtureRepo::new();
        f.write("A.java", "class A {}\n");
        f.commit("init");
        f.git(&["checkout", "-q", "-b", "topic"]);
        f.write("A.java", "class A { int y; }\n");
        let sha = f.commit("topic work");
        f.git(&["checkout", "-q", "main"]);
        f.git(&["branch", "-q", "-D", "topic"]);
        let repo = Repo::open(&f.path()).unwrap();
        assert!(matches!(repo.resolve_commit(&record(&sha), &java()), Err(Error::UnreachableCommit { .. })));
        assert!(matches!(repo.resolve_commit(&record(&"0".repeat(40)), &java()), Err(Error::UnreachableCommit { .. })));
    }

    #[test]
    fn merge_commit_diffs_against_first_parent() {
        let f = FixtureRepo::new();
        f.write("A.java", "class A {}\n");
        f.commit("init");
        f.git(&["checkout", "-q", "-b", "side"]);
        f.write("S.java", "class S {}\n");
        f.commit("side");
        f.git(&["checkout", "-q", "main"]);
        f.write("M.java", "class M {}\n");
        f.commit("main");
        f.git(&["-c", "user.name=x", "merge", "-q", "--no-ff", "-m", "merge", "side"]);
        let sha = f.git(&["rev-parse", "HEAD"]);
        let snap = Repo::open(&f.path()).unwrap().resolve_commit(&record(&sha), &java()).unwrap();
        let paths: Vec<&str> = snap.files.iter().map(|p| p.path.as_str()).collect();
        assert_eq!(paths, vec!["S.java"]);
    }
}
