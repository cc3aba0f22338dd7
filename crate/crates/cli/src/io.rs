//! Filesystem helpers shared by the commands: atomic writes and prepared
//! dataset directories.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crisiscnn_core::corpus::{self, LabelSchema, LabeledExample, Origin};
use crisiscnn_core::error::{Error, Result};

/// Write via a temp file in the same directory and rename into place, so an
/// interrupted command never leaves a partial artifact at the target path.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", file_name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })?;
    Ok(())
}

pub fn atomic_write_str(path: &Path, text: &str) -> Result<()> {
    atomic_write(path, text.as_bytes())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub fractions: [f64; 3],
    pub binary: bool,
    pub vocab_percent: f64,
    pub schema: Vec<String>,
    pub train_count: usize,
    pub validation_count: usize,
    pub test_count: usize,
}

/// A directory produced by `prepare`: train/dev/test TSVs, vocab.tsv, and a
/// manifest carrying the schema.
#[derive(Debug)]
pub struct PreparedDir {
    pub root: PathBuf,
    pub manifest: Manifest,
    pub schema: LabelSchema,
    pub train: Vec<LabeledExample>,
    pub dev: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
}

impl PreparedDir {
    pub fn load(root: &Path, origin: Origin) -> Result<Self> {
        let manifest_path = root.join("manifest.json");
        let manifest_text =
            fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: Manifest = serde_json::from_str(&manifest_text)
            .map_err(|e| Error::invalid(format!("{}: {e}", manifest_path.display())))?;
        let schema = LabelSchema::new(manifest.schema.clone())?;
        let load =
            |name: &str| corpus::load_tsv(&root.join(name), &schema, false, origin);
        let train = load("train.tsv")?;
        let dev = load("dev.tsv")?;
        let test = load("test.tsv")?;
        Ok(PreparedDir { root: root.to_path_buf(), schema, train, dev, test, manifest })
    }

    /// All examples in the directory, train then dev then test.
    pub fn pool(&self) -> Vec<LabeledExample> {
        let mut all = self.train.clone();
        all.extend(self.dev.iter().cloned());
        all.extend(self.test.iter().cloned());
        all
    }
}

/// Render examples back to the `id<TAB>text<TAB>label` format, with the
/// normalized tokens rejoined by single spaces.
pub fn examples_to_tsv(examples: &[LabeledExample], schema: &LabelSchema) -> String {
    let mut out = String::new();
    for e in examples {
        out.push_str(&format!("{}\t{}\t{}\n", e.id, e.tokens.join(" "), schema.name(e.label)));
    }
    out
}

/// Worker count from CRISISCNN_THREADS; 1 (the fully deterministic baseline)
/// when unset or unparsable.
pub fn thread_count() -> usize {
    std::env::var("CRISISCNN_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        atomic_write_str(&path, "one").unwrap();
        atomic_write_str(&path, "two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        // No temp files left behind.
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
