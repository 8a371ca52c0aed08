//! End-to-end delivery simulation: draw a request, collect the cached LT
//! symbols the user reaches, then pull fresh symbols over the backhaul one at
//! a time until peeling succeeds.

use std::collections::BTreeMap;
use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{structural, trial_symbol_seed, McEstimate};
use crate::error::{invalid, Error, Result};
use crate::fountain::{symbol_structure, DegreeDistribution, PeelingDecoder};
use crate::netmodel::{CacheSystem, Placement};
use crate::scalar::Scalar;
use crate::seed::{domain, rng_for};

/// Backhaul symbols allowed per request, as a multiple of `k`.
pub const RUNAWAY_FACTOR: u64 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryOutcome {
    pub request_index: u64,
    /// 1-based requested file.
    pub file_index: usize,
    /// Number of transmitters reached.
    pub h: usize,
    /// Cached symbols collected, `w_j h`.
    pub z: u64,
    /// Backhaul symbols needed.
    pub t: u64,
    /// Recovered inputs after the cached batch and after each backhaul
    /// symbol, when tracing is enabled.
    pub trace: Option<Vec<usize>>,
}

/// A scenario prepared for repeated request simulation.
#[derive(Debug, Clone)]
pub struct DeliverySimulator<'a, T> {
    sys: &'a CacheSystem<T>,
    place: &'a Placement,
    dist: &'a DegreeDistribution<T>,
    files: WeightedIndex<f64>,
    links: WeightedIndex<f64>,
    trace: bool,
}

impl<'a, T: Scalar> DeliverySimulator<'a, T> {
    pub fn new(sys: &'a CacheSystem<T>, place: &'a Placement, dist: &'a DegreeDistribution<T>) -> Result<Self> {
        place.validate(sys)?;
        dist.validate_for(sys.k())?;
        let weights = |v: &[T]| {
            WeightedIndex::new(v.iter().map(Scalar::as_f64))
                .map_err(|e| invalid(format!("cannot sample from weights: {e}")))
        };
        Ok(Self {
            files: weights(sys.theta())?,
            links: weights(sys.gamma())?,
            sys,
            place,
            dist,
            trace: false,
        })
    }

    pub fn with_trace(mut self, on: bool) -> Self {
        self.trace = on;
        self
    }

    /// Simulates request `request_index`. Everything it draws is derived from
    /// `(master_seed, request_index)`, so it does not depend on other
    /// requests.
    pub fn simulate(&self, master_seed: u64, request_index: u64) -> Result<DeliveryOutcome> {
        let k = self.sys.k();
        let mut rng = rng_for(master_seed, domain::REQUEST, request_index);
        let j = self.files.sample(&mut rng);
        let h = self.links.sample(&mut rng) + 1;
        let z = self.place.w()[j] * h as u64;

        let mut dec = PeelingDecoder::new(k)?;
        let mut next = 0u64;
        let mut receive = |dec: &mut PeelingDecoder| -> Result<()> {
            let seed = trial_symbol_seed(master_seed, request_index, next);
            next += 1;
            dec.add_symbol(structural(&symbol_structure(k, self.dist, seed), seed))
        };
        for _ in 0..z {
            receive(&mut dec)?;
        }
        let mut done = dec.peel();
        let mut trace = self.trace.then(|| vec![dec.resolved()]);
        let limit = RUNAWAY_FACTOR * k as u64;
        let mut t = 0;
        while !done {
            if t == limit {
                return Err(Error::Runaway { request_index, limit });
            }
            receive(&mut dec)?;
            t += 1;
            done = dec.peel();
            if let Some(tr) = trace.as_mut() {
                tr.push(dec.resolved());
            }
        }
        Ok(DeliveryOutcome {
            request_index,
            file_index: j + 1,
            h,
            z,
            t,
            trace,
        })
    }

    /// Requests `range`, simulated in parallel and returned in order.
    pub fn simulate_range(&self, master_seed: u64, range: std::ops::Range<u64>) -> Result<Vec<DeliveryOutcome>> {
        range.into_par_iter().map(|i| self.simulate(master_seed, i)).collect()
    }
}

pub fn simulate_request<T: Scalar>(
    sys: &CacheSystem<T>,
    place: &Placement,
    dist: &DegreeDistribution<T>,
    master_seed: u64,
    request_index: u64,
) -> Result<DeliveryOutcome> {
    DeliverySimulator::new(sys, place, dist)?.simulate(master_seed, request_index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
    pub master_seed: u64,
    /// `t → number of requests`.
    pub histogram: BTreeMap<u64, u64>,
}

impl RateEstimate {
    pub fn from_outcomes(outcomes: &[DeliveryOutcome], master_seed: u64) -> Self {
        let samples: Vec<f64> = outcomes.iter().map(|o| o.t as f64).collect();
        let mc = McEstimate::from_samples(&samples);
        let mut histogram = BTreeMap::new();
        for o in outcomes {
            *histogram.entry(o.t).or_insert(0) += 1;
        }
        Self {
            mean: mc.estimate,
            stderr: mc.stderr,
            trials: mc.trials,
            master_seed,
            histogram,
        }
    }

    pub fn within_sigmas(&self, reference: f64, sigmas: f64) -> bool {
        (self.mean - reference).abs() <= sigmas * self.stderr
    }
}

/// Mean backhaul symbols per request over requests `0..trials`.
pub fn estimate_rate<T: Scalar>(
    sys: &CacheSystem<T>,
    place: &Placement,
    dist: &DegreeDistribution<T>,
    trials: u64,
    master_seed: u64,
) -> Result<RateEstimate> {
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let outcomes = DeliverySimulator::new(sys, place, dist)?.simulate_range(master_seed, 0..trials)?;
    Ok(RateEstimate::from_outcomes(&outcomes, master_seed))
}

/// SHA-256 over everything that determines the simulated ensemble.
pub fn scenario_digest<T: Scalar>(sys: &CacheSystem<T>, place: &Placement, dist: &DegreeDistribution<T>) -> String {
    let mut h = Sha256::new();
    for v in [sys.k() as u64, sys.cache_files() as u64, sys.n() as u64, sys.h_max() as u64] {
        h.update(v.to_le_bytes());
    }
    for p in sys.theta().iter().chain(sys.gamma()) {
        h.update(p.as_f64().to_bits().to_le_bytes());
    }
    for w in place.w() {
        h.update(w.to_le_bytes());
    }
    h.update(dist.digest().as_bytes());
    hex::encode(h.finalize())
}

/// Summary record written after a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub mean: f64,
    pub mean_normalized: f64,
    pub stderr: f64,
    pub trials: u64,
    pub seed: u64,
    pub scenario_digest: String,
}

/// Per-request CSV `trial,j,h,z,t`.
pub fn write_outcomes_csv<W: Write>(w: W, outcomes: &[DeliveryOutcome]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| invalid(format!("csv write failed: {e}"));
    out.write_record(["trial", "j", "h", "z", "t"]).map_err(io)?;
    for o in outcomes {
        out.write_record([
            o.request_index.to_string(),
            o.file_index.to_string(),
            o.h.to_string(),
            o.z.to_string(),
            o.t.to_string(),
        ])
        .map_err(io)?;
    }
    out.flush().map_err(|e| invalid(format!("csv flush failed: {e}")))?;
    Ok(())
}

impl RateSummary {
    pub fn new<T: Scalar>(
        est: &RateEstimate,
        sys: &CacheSystem<T>,
        place: &Placement,
        dist: &DegreeDistribution<T>,
    ) -> Self {
        Self {
            mean: est.mean,
            mean_normalized: est.mean / sys.k() as f64,
            stderr: est.stderr,
            trials: est.trials,
            seed: est.master_seed,
            scenario_digest: scenario_digest(sys, place, dist),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fountain::{ideal_soliton, peel_decode};

    #[test]
    fn no_cache_needs_at_least_k() {
        let sys = CacheSystem::new(20, 0, vec![1.0], vec![1.0]).unwrap();
        let place = Placement::new(vec![0]);
        let dist = ideal_soliton::<f64>(20).unwrap();
        for i in 0..50 {
            let o = simulate_request(&sys, &place, &dist, 3, i).unwrap();
            assert_eq!(o.z, 0);
            assert!(o.t >= 20);
        }
    }

    #[test]
    fn single_input_file() {
        let dist = DegreeDistribution::<f64>::point_mass(1).unwrap();
        let sys = CacheSystem::new(1, 1, vec![0.5, 0.5], vec![1.0]).unwrap();
        let place = Placement::new(vec![1, 0]);
        for i in 0..100 {
            let o = simulate_request(&sys, &place, &dist, 9, i).unwrap();
            assert_eq!(o.t, 1u64.saturating_sub(o.z));
        }
        let sys = CacheSystem::new(1, 1, vec![1.0], vec![0.0, 1.0]).unwrap();
        let place = Placement::new(vec![1]);
        let est = estimate_rate(&sys, &place, &dist, 1000, 1).unwrap();
        assert_eq!((est.mean, est.stderr), (0.0, 0.0));
    }

    #[test]
    fn degree_one_worked_example() {
        // k = 2, all-degree-1, z = 4: E[T] = 1/4.
        let dist = DegreeDistribution::<f64>::point_mass(1).unwrap();
        let sys = CacheSystem::new(2, 1, vec![1.0], vec![0.0, 1.0]).unwrap();
        let place = Placement::new(vec![2]);
        let est = estimate_rate(&sys, &place, &dist, 100_000, 11).unwrap();
        assert!(est.within_sigmas(0.25, 3.0), "{est:?}");
    }

    #[test]
    fn deterministic_and_seed_isolated() {
        let sys = CacheSystem::new(30, 1, vec![0.5, 0.3, 0.2], vec![0.3, 0.7]).unwrap();
        let place = Placement::new(vec![20, 10, 0]);
        let dist = ideal_soliton::<f64>(30).unwrap();
        let a = estimate_rate(&sys, &place, &dist, 300, 5).unwrap();
        let b = estimate_rate(&sys, &place, &dist, 300, 5).unwrap();
        assert_eq!(a, b);
        let sim = DeliverySimulator::new(&sys, &place, &dist).unwrap();
        let short = sim.simulate_range(5, 0..50).unwrap();
        let long = sim.simulate_range(5, 0..300).unwrap();
        assert_eq!(short[..], long[..50]);
        assert_ne!(estimate_rate(&sys, &place, &dist, 300, 6).unwrap(), a);
    }

    #[test]
    fn incremental_matches_restart() {
        let k = 40;
        let sys = CacheSystem::new(k, 1, vec![0.6, 0.4], vec![0.5, 0.5]).unwrap();
        let place = Placement::new(vec![30, 10]);
        let dist = ideal_soliton::<f64>(k).unwrap();
        let sim = DeliverySimulator::new(&sys, &place, &dist).unwrap().with_trace(true);
        for i in 0..40 {
            let o = sim.simulate(17, i).unwrap();
            let trace = o.trace.as_ref().unwrap();
            assert_eq!(trace.len() as u64, o.t + 1);
            assert_eq!(*trace.last().unwrap(), k);
            let upto = |n: u64| {
                let symbols = (0..n).map(|s| {
                    let seed = trial_symbol_seed(17, i, s);
                    structural(&symbol_structure(k, &dist, seed), seed)
                });
                peel_decode(k, symbols).unwrap().success
            };
            let n = o.z + o.t;
            assert!(upto(n));
            if o.t > 0 {
                assert!(!upto(n - 1));
            }
        }
    }

    #[test]
    fn outcomes_csv_header() {
        let o = DeliveryOutcome { request_index: 0, file_index: 2, h: 1, z: 5, t: 7, trace: None };
        let mut buf = Vec::new();
        write_outcomes_csv(&mut buf, &[o]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "trial,j,h,z,t\n0,2,1,5,7\n");
    }
}
