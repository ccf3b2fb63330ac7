//! Run directories: naming, lockfile, manifest and per-step files.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use regenera::continuation::ContinuationStep;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST: &str = "manifest.json";
pub const LOCK: &str = "run.lock";

/// One entry of the manifest per solved x.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepEntry {
    pub x: f64,
    pub file: String,
    pub final_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub config: RunConfig,
    pub schedule: Vec<f64>,
    pub tolerance: f64,
    pub status: String,
    #[serde(default)]
    pub failed_x: Option<f64>,
    #[serde(default)]
    pub error: Option<String>,
    pub steps: Vec<StepEntry>,
    pub elapsed_ms: f64,
}

/// Deterministic directory name: the key inputs and a digest of the config.
pub fn run_name(cfg: &RunConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
    format!("n{}-T2_{}-x{}-{}", cfg.n, cfg.t2_0, cfg.x, hex)
}

pub fn step_file(x: f64) -> String {
    format!("step-x{x:.6}.json")
}

/// Exclusive use of a run directory while a command works in it.
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> anyhow::Result<Self> {
        let path = dir.join(LOCK);
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .with_context(|| format!("run directory {} is locked ({} exists)", dir.display(), path.display()))?;
        writeln!(f, "{}", std::process::id())?;
        Ok(RunLock { path })
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed {}", path.display()))
}

pub fn load_manifest(dir: &Path) -> anyhow::Result<Manifest> {
    read_json(&dir.join(MANIFEST))
}

pub fn load_steps(dir: &Path, manifest: &Manifest) -> anyhow::Result<Vec<ContinuationStep>> {
    manifest.steps.iter().map(|s| read_json(&dir.join(&s.file))).collect()
}

/// The solved step at x, within 1e−9.
pub fn find_step(dir: &Path, manifest: &Manifest, x: f64) -> anyhow::Result<ContinuationStep> {
    let Some(entry) = manifest.steps.iter().find(|s| (s.x - x).abs() <= 1e-9) else {
        let have: Vec<f64> = manifest.steps.iter().map(|s| s.x).collect();
        bail!("run has no solution at x = {x}; solved values are {have:?}");
    };
    read_json(&dir.join(&entry.file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_depend_on_every_key() {
        let a: RunConfig = serde_json::from_str(r#"{"n": 1, "T2_0": 0.5, "x": 0.2}"#).unwrap();
        let b: RunConfig = serde_json::from_str(r#"{"n": 1, "T2_0": 0.5, "x": 0.2, "tolerance": 1e-9}"#).unwrap();
        assert_eq!(run_name(&a), run_name(&a.clone()));
        assert_ne!(run_name(&a), run_name(&b));
        assert!(run_name(&a).starts_with("n1-T2_0.5-x0.2-"));
        assert_eq!(step_file(0.15000000000000002), "step-x0.150000.json");
    }

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let lock = RunLock::acquire(dir.path()).unwrap();
        assert!(RunLock::acquire(dir.path()).is_err());
        drop(lock);
        assert!(RunLock::acquire(dir.path()).is_ok());
    }
}
