//! Artifact writing: CSV tables, SVG files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "AGEDYN_OUTPUT_ROOT";

/// Default output root: `$AGEDYN_OUTPUT_ROOT`, else `./agedyn-output`.
pub fn default_output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("agedyn-output"))
}

/// Machine-readable record of one run, sufficient to re-run it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub operation: String,
    pub preset: Option<String>,
    /// SHA-256 of the canonical JSON serialization of `config`.
    pub config_hash: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub wall_time_seconds: f64,
    pub artifacts: Vec<String>,
    /// Desk-scale reductions and other remarks.
    pub notes: Vec<String>,
}

pub fn config_hash(config: &serde_json::Value) -> String {
    let canonical = serde_json::to_string(config).expect("json values serialize");
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects artifacts for one output directory.
pub struct ArtifactDir {
    root: PathBuf,
    artifacts: Vec<String>,
    notes: Vec<String>,
    started: Instant,
}

impl ArtifactDir {
    pub fn create(root: impl AsRef<Path>) -> Result<Self> {
        fs::create_dir_all(root.as_ref())?;
        Ok(ArtifactDir { root: root.as_ref().to_path_buf(), artifacts: Vec::new(), notes: Vec::new(), started: Instant::now() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn csv<R: AsRef<[String]>>(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
        let path = self.root.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            let r = r.as_ref();
            if r.len() != header.len() {
                return Err(Error::Assertion(format!("{name}: row of {} fields under {} columns", r.len(), header.len())));
            }
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush()?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    pub fn text(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.root.join(name), contents)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let s = serde_json::to_string_pretty(value)?;
        self.text(name, &s)
    }

    /// Writes `manifest.json` and returns the manifest.
    pub fn finish<C: Serialize>(self, operation: &str, preset: Option<&str>, config: &C, seed: u64) -> Result<Manifest> {
        let config = serde_json::to_value(config)?;
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            operation: operation.to_string(),
            preset: preset.map(str::to_string),
            config_hash: config_hash(&config),
            config,
            seed,
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            artifacts: self.artifacts,
            notes: self.notes,
        };
        fs::write(self.root.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(manifest)
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Scheme(format!("csv: {other:?}")),
    }
}

/// Formats a float for CSV output with full round-trip precision.
pub fn num(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_artifacts_and_hash() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = ArtifactDir::create(dir.path()).unwrap();
        out.csv("a.csv", &["x", "y"], vec![vec![num(1.0), num(2.5)]]).unwrap();
        let m = out.finish("test", None, &serde_json::json!({"k": 1}), 7).unwrap();
        assert_eq!(m.artifacts, vec!["a.csv"]);
        assert_eq!(m.config_hash.len(), 64);
        let text = fs::read_to_string(dir.path().join("a.csv")).unwrap();
        assert_eq!(text, "x,y\n1,2.5\n");
        let back: Manifest = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(back.seed, 7);
    }

    #[test]
    fn ragged_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = ArtifactDir::create(dir.path()).unwrap();
        assert!(out.csv("b.csv", &["x"], vec![vec![num(1.0), num(2.0)]]).is_err());
    }
}
