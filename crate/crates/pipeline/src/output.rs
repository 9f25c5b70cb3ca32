//! Per-file atomic writes and the output manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{PipelineError, Result};

pub const MANIFEST: &str = "manifest.csv";

/// A file produced by a stage, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub path: String,
    pub contents: String,
}

impl Artifact {
    pub fn new(path: impl Into<String>, contents: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            contents: contents.into(),
        }
    }
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| PipelineError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| PipelineError::io(path, e))
}

/// Output directory that records what it writes.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: BTreeMap<String, usize>,
}

impl OutputDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            written: BTreeMap::new(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, artifact: &Artifact) -> Result<()> {
        let path = self.root.join(&artifact.path);
        write_atomic(&path, artifact.contents.as_bytes())?;
        log::debug!("wrote {}", path.display());
        self.written.insert(artifact.path.clone(), artifact.contents.len());
        Ok(())
    }

    pub fn write_all(&mut self, artifacts: &[Artifact]) -> Result<()> {
        artifacts.iter().try_for_each(|a| self.write(a))
    }

    /// Paths written so far, sorted.
    pub fn written(&self) -> Vec<&str> {
        self.written.keys().map(String::as_str).collect()
    }

    /// Merges this run's files into `manifest.csv`. Entries from earlier
    /// runs are kept only while their file still exists.
    pub fn finish(self) -> Result<Vec<String>> {
        let path = self.root.join(MANIFEST);
        let mut entries: BTreeMap<String, usize> = BTreeMap::new();
        if let Ok(text) = fs::read_to_string(&path) {
            for line in text.lines().skip(1) {
                if let Some((p, bytes)) = line.rsplit_once(',') {
                    if let Ok(b) = bytes.parse() {
                        if self.root.join(p).is_file() {
                            entries.insert(p.to_string(), b);
                        }
                    }
                }
            }
        }
        entries.extend(self.written);
        let mut text = String::from("path,bytes\n");
        for (p, b) in &entries {
            text.push_str(&format!("{p},{b}\n"));
        }
        write_atomic(&path, text.as_bytes())?;
        Ok(entries.into_keys().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_merges_runs_and_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::new(dir.path());
        out.write(&Artifact::new("a.csv", "x\n")).unwrap();
        out.write(&Artifact::new("sub/b.csv", "yy\n")).unwrap();
        out.finish().unwrap();
        let mut again = OutputDir::new(dir.path());
        again.write(&Artifact::new("c.md", "z")).unwrap();
        let listed = again.finish().unwrap();
        assert_eq!(listed, ["a.csv", "c.md", "sub/b.csv"]);
        let text = fs::read_to_string(dir.path().join(MANIFEST)).unwrap();
        assert_eq!(text, "path,bytes\na.csv,2\nc.md,1\nsub/b.csv,3\n");
        let names: Vec<String> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        assert!(names.iter().all(|n| !n.contains(".tmp")));
    }
}
