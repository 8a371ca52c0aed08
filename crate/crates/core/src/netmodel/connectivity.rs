use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seed::{domain, rng_for};

/// Transmitters on an infinite square lattice with pitch `spacing`, each
/// covering a disk of `radius` (both in meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub radius: f64,
    pub spacing: f64,
}

impl GridGeometry {
    pub fn new(radius: f64, spacing: f64) -> Result<Self> {
        let g = Self { radius, spacing };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(invalid(format!("radius must be positive, got {}", self.radius)));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(invalid(format!("spacing must be positive, got {}", self.spacing)));
        }
        Ok(())
    }

    /// Number of transmitters within `radius` of the point `(x, y)`.
    pub fn coverage(&self, x: f64, y: f64) -> usize {
        let (r, s) = (self.radius, self.spacing);
        let r2 = r * r;
        let i0 = ((x - r) / s).ceil() as i64;
        let i1 = ((x + r) / s).floor() as i64;
        let j0 = ((y - r) / s).ceil() as i64;
        let j1 = ((y + r) / s).floor() as i64;
        let mut count = 0;
        for i in i0..=i1 {
            let dx = x - i as f64 * s;
            for j in j0..=j1 {
                let dy = y - j as f64 * s;
                if dx * dx + dy * dy <= r2 {
                    count += 1;
                }
            }
        }
        count
    }
}

/// Empirical connectivity distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityEstimate {
    /// `gamma[h - 1]`, conditioned on being covered at all.
    pub gamma: Vec<f64>,
    /// `counts[h]` for `h = 0..`; `counts[0]` are uncovered positions.
    pub counts: Vec<u64>,
    pub samples: u64,
    pub zero_coverage_fraction: f64,
    pub master_seed: u64,
}

impl ConnectivityEstimate {
    pub fn has_zero_coverage(&self) -> bool {
        self.counts[0] > 0
    }
}

const CHUNK: u64 = 1 << 16;

/// Drops `samples` uniform user positions into one lattice cell and tallies
/// how many transmitters cover each. Chunks of positions use their own
/// derived seed, so the result does not depend on the thread count.
pub fn derive_connectivity(geom: GridGeometry, samples: u64, master_seed: u64) -> Result<ConnectivityEstimate> {
    geom.validate()?;
    if samples == 0 {
        return Err(invalid("connectivity needs at least one sample"));
    }
    let chunks = samples.div_ceil(CHUNK);
    let partial: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_for(master_seed, domain::GEOMETRY, c);
            let n = CHUNK.min(samples - c * CHUNK);
            let mut counts = Vec::new();
            for _ in 0..n {
                let x = rng.gen::<f64>() * geom.spacing;
                let y = rng.gen::<f64>() * geom.spacing;
                let h = geom.coverage(x, y);
                if counts.len() <= h {
                    counts.resize(h + 1, 0);
                }
                counts[h] += 1;
            }
            counts
        })
        .collect();
    let width = partial.iter().map(Vec::len).max().unwrap_or(1).max(1);
    let mut counts = vec![0u64; width];
    for p in &partial {
        for (h, c) in p.iter().enumerate() {
            counts[h] += c;
        }
    }
    let covered = samples - counts[0];
    if covered == 0 {
        return Err(invalid("no sampled position is covered by any transmitter"));
    }
    let gamma = counts[1..].iter().map(|&c| c as f64 / covered as f64).collect();
    Ok(ConnectivityEstimate {
        gamma,
        zero_coverage_fraction: counts[0] as f64 / samples as f64,
        counts,
        samples,
        master_seed,
    })
}
