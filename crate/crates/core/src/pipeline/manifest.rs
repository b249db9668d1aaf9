use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{PipelineConfig, PipelineError};

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: impl AsRef<Path>) -> Result<String, PipelineError> {
    Ok(hash_bytes(&std::fs::read(path)?))
}

/// Record of one command run: the full configuration plus SHA-256 hashes
/// of every input and output file. Contains nothing run-specific, so
/// identical runs write identical manifests.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub command: String,
    pub config: String,
    pub inputs: Vec<(String, String)>,
    pub outputs: Vec<(String, String)>,
}

/// Files under `path` (or `path` itself), sorted, with names relative to
/// `path`'s parent.
fn files(path: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out = Vec::new();
    let mut stack = vec![path.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else if !p.extension().is_some_and(|e| e == "manifest") {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn label(path: &Path, root: &Path) -> String {
    let base = if root.is_file() { root.parent().unwrap_or(Path::new("")) } else { root };
    let rel = path.strip_prefix(base).unwrap_or(path);
    let name = rel.to_string_lossy().replace('\\', "/");
    if root.is_dir() {
        let root_name = root.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        format!("{root_name}/{name}")
    } else {
        name
    }
}

impl Manifest {
    pub fn new(command: &str, cfg: &PipelineConfig) -> Self {
        Self { command: command.into(), config: cfg.to_text(), inputs: Vec::new(), outputs: Vec::new() }
    }

    /// Hashes a file, or every file below a directory.
    pub fn add_input(&mut self, path: impl AsRef<Path>) -> Result<(), PipelineError> {
        let path = path.as_ref();
        for f in files(path)? {
            self.inputs.push((label(&f, path), hash_file(&f)?));
        }
        Ok(())
    }

    pub fn add_output(&mut self, path: impl AsRef<Path>) -> Result<(), PipelineError> {
        let path = path.as_ref();
        for f in files(path)? {
            self.outputs.push((label(&f, path), hash_file(&f)?));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("command = {}\n", self.command);
        s.push_str(&self.config);
        for (name, h) in &self.inputs {
            let _ = writeln!(s, "input {name} = {h}");
        }
        for (name, h) in &self.outputs {
            let _ = writeln!(s, "output {name} = {h}");
        }
        s
    }

    /// Writes `<command>.manifest` into `dir` and returns its path.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<PathBuf, PipelineError> {
        let path = dir.as_ref().join(format!("{}.manifest", self.command));
        std::fs::write(&path, self.to_text())?;
        Ok(path)
    }
}
