//! Run configuration: the JSON file given to `solve`.

use std::path::Path;

use anyhow::{bail, Context};
use regenera::continuation::{FreeValues, NewtonOptions};
use regenera::geometry::MeshOptions;
use regenera::surface_model::{build_config, NeckParameter, NodedSurfaceConfig};
use serde::{Deserialize, Serialize};

/// Seed (u, v) of neck (k, i).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeckSeed {
    pub k: usize,
    pub i: usize,
    pub u: f64,
    pub v: f64,
}

/// Values of the free parameters u_{1,2}, v_{1,2}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeSeed {
    pub u12: f64,
    pub v12: f64,
}

/// Grid resolution used by `mesh` and `verify`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSettings {
    #[serde(default = "default_angular")]
    pub angular: usize,
    #[serde(default = "default_neck_rings")]
    pub max_neck_rings: usize,
}

fn default_angular() -> usize {
    MeshOptions::default().angular
}

fn default_neck_rings() -> usize {
    MeshOptions::default().max_neck_rings
}

impl Default for MeshSettings {
    fn default() -> Self {
        MeshSettings { angular: default_angular(), max_neck_rings: default_neck_rings() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    #[serde(rename = "T2_0")]
    pub t2_0: f64,
    /// Final value of x.
    pub x: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub necks: Vec<NeckSeed>,
    /// Continuation schedule; defaults to four equal steps from 0 to x.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free: Option<FreeSeed>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<MeshSettings>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> anyhow::Result<()> {
        if !(self.x >= 0.0 && self.x.is_finite()) {
            bail!("x must be a finite nonnegative number, got {}", self.x);
        }
        let schedule = self.schedule();
        if schedule.first() != Some(&0.0) {
            bail!("schedule must start at 0");
        }
        if schedule.windows(2).any(|w| !(w[1] > w[0])) {
            bail!("schedule must be strictly increasing");
        }
        if (schedule.last().copied().unwrap_or(0.0) - self.x).abs() > 1e-12 {
            bail!("schedule must end at x = {}", self.x);
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0) {
                bail!("tolerance must be positive");
            }
        }
        if let Some(m) = self.mesh {
            if m.angular < 8 || m.max_neck_rings == 0 {
                bail!("mesh needs at least 8 angular points and one neck ring");
            }
        }
        self.noded()?;
        Ok(())
    }

    pub fn schedule(&self) -> Vec<f64> {
        match &self.schedule {
            Some(s) => s.clone(),
            None if self.x == 0.0 => vec![0.0],
            None => (0..=4).map(|i| self.x * i as f64 / 4.0).collect(),
        }
    }

    /// The noded surface at x = 0 with this seed.
    pub fn noded(&self) -> anyhow::Result<NodedSurfaceConfig> {
        let seeds: Vec<NeckParameter> = self.necks.iter().map(|s| NeckParameter { k: s.k, i: s.i, u: s.u, v: s.v }).collect();
        Ok(build_config(self.n, self.t2_0, 0.0, &seeds, self.epsilon)?)
    }

    pub fn newton(&self) -> NewtonOptions {
        let mut o = NewtonOptions::default();
        if let Some(t) = self.tolerance {
            o.tol = t;
        }
        if let Some(m) = self.max_iterations {
            o.max_iter = m;
        }
        o
    }

    pub fn free_values(&self) -> Option<FreeValues> {
        self.free.map(|f| FreeValues { u12: f.u12, v12: f.v12 })
    }

    pub fn mesh_options(&self) -> MeshOptions {
        let m = self.mesh.unwrap_or_default();
        MeshOptions { angular: m.angular, max_neck_rings: m.max_neck_rings, ..Default::default() }
    }
}
