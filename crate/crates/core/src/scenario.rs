//! JSON scenario files.
//!
//! ```json
//! {
//!   "n": 10, "k": 100, "M": 5, "alpha": 0.8,
//!   "gamma": [0.2907, 0.6591, 0.0430, 0.0072],
//!   "distribution": { "kind": "robust_soliton", "c": 0.05, "delta": 0.5 },
//!   "epsilon_tail": 1e-6, "delta_cap": 400, "seed": 1
//! }
//! ```
//!
//! `gamma` may instead be `{"radius": 60, "spacing": 80, "samples": 1000000}`
//! to derive it from the grid geometry. Distributions are `ideal_soliton`,
//! `robust_soliton {c, delta}`, `point_mass {degree}`, `explicit {probs}`
//! (`probs[d - 1] = Ω_d`) or `file {path}` (relative paths resolve against
//! the scenario file's directory).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{default_delta_cap, failure_curve, FailureCurve, DEFAULT_EPSILON_TAIL};
use crate::error::{Error, Result};
use crate::fountain::{ideal_soliton, robust_soliton, DegreeDistribution};
use crate::netmodel::{derive_connectivity, zipf_popularity, CacheSystem, ConnectivityEstimate, GridGeometry};

pub const DEFAULT_GEOMETRY_SAMPLES: u64 = 1_000_000;
pub const DEFAULT_TRIALS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    pub k: usize,
    #[serde(rename = "M")]
    pub cache_files: usize,
    #[serde(default)]
    pub alpha: f64,
    pub gamma: GammaSpec,
    pub distribution: DistributionSpec,
    #[serde(default = "default_epsilon_tail")]
    pub epsilon_tail: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_cap: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub simulation: SimulationSpec,
}

fn default_epsilon_tail() -> f64 {
    DEFAULT_EPSILON_TAIL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSpec {
    Explicit(Vec<f64>),
    Geometry(GeometrySpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub radius: f64,
    pub spacing: f64,
    #[serde(default = "default_geometry_samples")]
    pub samples: u64,
}

fn default_geometry_samples() -> u64 {
    DEFAULT_GEOMETRY_SAMPLES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    IdealSoliton,
    RobustSoliton { c: f64, delta: f64 },
    PointMass { degree: usize },
    Explicit { probs: Vec<f64> },
    File { path: PathBuf },
}

/// Parameter grids for the rate sweeps. Defaults: `M = 1..=n` and
/// `alpha = 0, 0.1, …, 1.2`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub cache_files: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default = "default_trials")]
    pub trials: u64,
    /// Also write one CSV row per simulated request.
    #[serde(default)]
    pub per_trial: bool,
}

fn default_trials() -> u64 {
    DEFAULT_TRIALS
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            trials: DEFAULT_TRIALS,
            per_trial: false,
        }
    }
}

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

/// A connectivity vector and, when it was sampled, the sampling record.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedGamma {
    pub gamma: Vec<f64>,
    pub estimate: Option<ConnectivityEstimate>,
}

impl ScenarioConfig {
    /// Parses and validates; errors carry the offending key path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(".", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(config_err("n", "must be at least 1"));
        }
        if self.k == 0 {
            return Err(config_err("k", "must be at least 1"));
        }
        if self.cache_files > self.n {
            return Err(config_err("M", format!("must not exceed n = {}", self.n)));
        }
        check_alpha("alpha", self.alpha)?;
        if !(self.epsilon_tail > 0.0 && self.epsilon_tail < 1.0) {
            return Err(config_err("epsilon_tail", "must lie in (0, 1)"));
        }
        if self.delta_cap == Some(0) {
            return Err(config_err("delta_cap", "must be at least 1"));
        }
        match &self.gamma {
            GammaSpec::Explicit(g) => {
                if g.is_empty() {
                    return Err(config_err("gamma", "must not be empty"));
                }
                if let Some(i) = g.iter().position(|x| !(*x >= 0.0 && x.is_finite())) {
                    return Err(config_err(&format!("gamma[{i}]"), "must be a non-negative number"));
                }
                let total: f64 = g.iter().sum();
                if (total - 1.0).abs() > crate::netmodel::MASS_TOLERANCE {
                    return Err(config_err("gamma", format!("sums to {total}, expected 1")));
                }
            }
            GammaSpec::Geometry(geo) => {
                if !(geo.radius > 0.0 && geo.radius.is_finite()) {
                    return Err(config_err("gamma.radius", "must be positive"));
                }
                if !(geo.spacing > 0.0 && geo.spacing.is_finite()) {
                    return Err(config_err("gamma.spacing", "must be positive"));
                }
                if geo.samples == 0 {
                    return Err(config_err("gamma.samples", "must be at least 1"));
                }
            }
        }
        match &self.distribution {
            DistributionSpec::RobustSoliton { c, delta } => {
                if !(*c > 0.0 && c.is_finite()) {
                    return Err(config_err("distribution.c", "must be positive"));
                }
                if !(*delta > 0.0 && *delta < 1.0) {
                    return Err(config_err("distribution.delta", "must lie in (0, 1)"));
                }
            }
            DistributionSpec::PointMass { degree } => {
                if *degree == 0 || *degree > self.k {
                    return Err(config_err("distribution.degree", format!("must lie in 1..={}", self.k)));
                }
            }
            DistributionSpec::Explicit { probs } => {
                if probs.len() > self.k {
                    return Err(config_err("distribution.probs", format!("has more than k = {} degrees", self.k)));
                }
                DegreeDistribution::new(probs.clone())
                    .map_err(|e| config_err("distribution.probs", e.to_string()))?;
            }
            DistributionSpec::IdealSoliton | DistributionSpec::File { .. } => {}
        }
        if let Some(ms) = &self.sweep.cache_files {
            if let Some(i) = ms.iter().position(|&m| m > self.n) {
                return Err(config_err(&format!("sweep.M[{i}]"), format!("must not exceed n = {}", self.n)));
            }
        }
        if let Some(alphas) = &self.sweep.alpha {
            for (i, a) in alphas.iter().enumerate() {
                check_alpha(&format!("sweep.alpha[{i}]"), *a)?;
            }
        }
        if self.simulation.trials == 0 {
            return Err(config_err("simulation.trials", "must be at least 1"));
        }
        Ok(())
    }

    pub fn delta_cap(&self) -> usize {
        self.delta_cap.unwrap_or_else(|| default_delta_cap(self.k))
    }

    pub fn sweep_cache_files(&self) -> Vec<usize> {
        self.sweep.cache_files.clone().unwrap_or_else(|| (1..=self.n).collect())
    }

    pub fn sweep_alpha(&self) -> Vec<f64> {
        self.sweep
            .alpha
            .clone()
            .unwrap_or_else(|| (0..=12).map(|i| i as f64 / 10.0).collect())
    }

    /// Builds the degree distribution; `base_dir` anchors relative file paths.
    pub fn distribution(&self, base_dir: &Path) -> Result<DegreeDistribution<f64>> {
        let at = |e: Error| config_err("distribution", e.to_string());
        let dist = match &self.distribution {
            DistributionSpec::IdealSoliton => ideal_soliton(self.k).map_err(at)?,
            DistributionSpec::RobustSoliton { c, delta } => robust_soliton(self.k, *c, *delta).map_err(at)?,
            DistributionSpec::PointMass { degree } => DegreeDistribution::point_mass(*degree).map_err(at)?,
            DistributionSpec::Explicit { probs } => DegreeDistribution::new(probs.clone()).map_err(at)?,
            DistributionSpec::File { path } => {
                let full = if path.is_absolute() { path.clone() } else { base_dir.join(path) };
                DegreeDistribution::load(&full).map_err(|e| config_err("distribution.path", e.to_string()))?
            }
        };
        dist.validate_for(self.k).map_err(at)?;
        Ok(dist)
    }

    /// Explicit `gamma`, or one sampled from the geometry with `self.seed`.
    pub fn resolve_gamma(&self) -> Result<ResolvedGamma> {
        match &self.gamma {
            GammaSpec::Explicit(g) => Ok(ResolvedGamma {
                gamma: g.clone(),
                estimate: None,
            }),
            GammaSpec::Geometry(geo) => {
                let geom = GridGeometry::new(geo.radius, geo.spacing)
                    .map_err(|e| config_err("gamma", e.to_string()))?;
                let est = derive_connectivity(geom, geo.samples, self.seed)
                    .map_err(|e| config_err("gamma", e.to_string()))?;
                Ok(ResolvedGamma {
                    gamma: est.gamma.clone(),
                    estimate: Some(est),
                })
            }
        }
    }

    /// The cache system at this scenario's `alpha` and `M` unless overridden.
    pub fn system(&self, gamma: &[f64], cache_files: usize, alpha: f64) -> Result<CacheSystem<f64>> {
        CacheSystem::new(self.k, cache_files, zipf_popularity(self.n, alpha)?, gamma.to_vec())
    }

    pub fn failure_curve(&self, dist: &DegreeDistribution<f64>) -> Result<FailureCurve<f64>> {
        failure_curve(self.k, dist, self.epsilon_tail, self.delta_cap())
    }
}

fn check_alpha(path: &str, alpha: f64) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(config_err(path, "must be a finite number >= 0"));
    }
    Ok(())
}
