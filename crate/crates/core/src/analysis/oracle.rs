//! Independent checks on the recursion: exhaustive enumeration for tiny
//! instances and seeded Monte Carlo for everything else.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fountain::{symbol_structure, DegreeDistribution, EncodedSymbol, PeelingDecoder};
use crate::scalar::Scalar;
use crate::seed::{derive_seed, domain};

pub const BRUTE_FORCE_MAX_K: usize = 6;
pub const BRUTE_FORCE_MAX_M: usize = 10;
pub const BRUTE_FORCE_MAX_OUTCOMES: u128 = 10_000_000;

fn binomial(n: u128, r: u128) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    (0..r).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

fn subsets_of_size(k: usize, d: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << k) {
        if mask.count_ones() as usize == d {
            out.push((0..k as u32).filter(|i| mask & (1 << i) != 0).collect());
        }
    }
    out
}

pub(crate) fn structural(neighbors: &[u32], seed_id: u64) -> EncodedSymbol {
    EncodedSymbol {
        payload: vec![0],
        neighbors: neighbors.to_vec(),
        seed_id,
    }
}

/// Exact failure probability by enumerating every multiset of `m`
/// (degree, neighbor set) outcomes with its multinomial weight and running
/// the real peeling decoder on it. Exact when `T` is rational.
pub fn brute_force_failure<T: Scalar>(k: usize, dist: &DegreeDistribution<T>, m: usize) -> Result<T> {
    dist.validate_for(k)?;
    if k > BRUTE_FORCE_MAX_K || m > BRUTE_FORCE_MAX_M {
        return Err(Error::TooLarge(format!(
            "k = {k}, m = {m}; limits are k <= {BRUTE_FORCE_MAX_K}, m <= {BRUTE_FORCE_MAX_M}"
        )));
    }
    // Each outcome type: a neighbor set, with weight Ω_d / C(k, d).
    let mut types: Vec<(Vec<u32>, T)> = Vec::new();
    for d in 1..=dist.d_max() {
        let w = dist.prob(d);
        if w.is_zero() {
            continue;
        }
        let count = binomial(k as u128, d as u128) as u64;
        for set in subsets_of_size(k, d) {
            types.push((set, w.clone() / T::from_u64(count).expect("small count")));
        }
    }
    let multisets = binomial((types.len() + m) as u128 - 1, m as u128);
    if multisets > BRUTE_FORCE_MAX_OUTCOMES {
        return Err(Error::TooLarge(format!(
            "{multisets} multisets exceed the {BRUTE_FORCE_MAX_OUTCOMES} limit"
        )));
    }
    let mut failure = T::zero();
    let mut chosen: Vec<usize> = Vec::with_capacity(m);
    enumerate(k, m, &types, 0, &mut chosen, T::one(), 0, &mut failure)?;
    Ok(failure)
}

#[allow(clippy::too_many_arguments)]
fn enumerate<T: Scalar>(
    k: usize,
    m: usize,
    types: &[(Vec<u32>, T)],
    first: usize,
    chosen: &mut Vec<usize>,
    weight: T,
    run: usize,
    failure: &mut T,
) -> Result<()> {
    if chosen.len() == m {
        let symbols = chosen
            .iter()
            .enumerate()
            .map(|(i, &t)| structural(&types[t].0, i as u64));
        if !crate::fountain::peel_decode(k, symbols)?.success {
            *failure = failure.clone() + weight;
        }
        return Ok(());
    }
    let position = chosen.len() + 1;
    for t in first..types.len() {
        // `run` counts how many copies of `first` are already chosen; the
        // multinomial m!/∏c! is built up as ∏ position / count.
        let count = if t == first && chosen.last() == Some(&t) { run + 1 } else { 1 };
        let w = weight.clone() * types[t].1.clone() * T::from_usize_exact(position)
            / T::from_usize_exact(count);
        chosen.push(t);
        enumerate(k, m, types, t, chosen, w, count, failure)?;
        chosen.pop();
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub trials: u64,
}

impl McEstimate {
    pub fn from_proportion(hits: u64, trials: u64) -> Self {
        let p = hits as f64 / trials as f64;
        Self {
            estimate: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
        }
    }

    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            estimate: mean,
            stderr: (var / n).sqrt(),
            trials: samples.len() as u64,
        }
    }

    pub fn within_sigmas(&self, reference: f64, sigmas: f64) -> bool {
        (self.estimate - reference).abs() <= sigmas * self.stderr
    }
}

/// Seed of symbol `index` in trial `trial`.
pub fn trial_symbol_seed(master_seed: u64, trial: u64, index: u64) -> u64 {
    derive_seed(derive_seed(master_seed, domain::TRIAL, trial), domain::SYMBOL, index)
}

/// Fraction of `trials` in which peeling fails on `m` fresh symbols.
pub fn monte_carlo_failure<T: Scalar>(
    k: usize,
    dist: &DegreeDistribution<T>,
    m: usize,
    trials: u64,
    master_seed: u64,
) -> Result<McEstimate> {
    dist.validate_for(k)?;
    if trials == 0 {
        return Err(crate::error::invalid("trials must be at least 1"));
    }
    let failures: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<bool> {
            let mut dec = PeelingDecoder::new(k)?;
            for i in 0..m as u64 {
                let seed = trial_symbol_seed(master_seed, trial, i);
                dec.add_symbol(structural(&symbol_structure(k, dist, seed), seed))?;
            }
            Ok(!dec.peel())
        })
        .collect::<Result<_>>()?;
    Ok(McEstimate::from_proportion(
        failures.iter().filter(|&&f| f).count() as u64,
        trials,
    ))
}

/// Number of symbols needed before peeling first succeeds, adding fresh
/// symbols one at a time. `None` if `limit` symbols do not suffice.
pub fn symbols_until_decoded<T: Scalar>(
    k: usize,
    dist: &DegreeDistribution<T>,
    master_seed: u64,
    trial: u64,
    limit: usize,
) -> Result<Option<usize>> {
    let mut dec = PeelingDecoder::new(k)?;
    for i in 0..limit as u64 {
        let seed = trial_symbol_seed(master_seed, trial, i);
        dec.add_symbol(structural(&symbol_structure(k, dist, seed), seed))?;
        if dec.peel() {
            return Ok(Some(i as usize + 1));
        }
    }
    Ok(None)
}

/// Sample mean of the overhead `Δ = N - k`, an unbiased estimate of
/// `E[Δ] = Σ_δ P_F(δ)`.
pub fn monte_carlo_overhead<T: Scalar>(
    k: usize,
    dist: &DegreeDistribution<T>,
    trials: u64,
    master_seed: u64,
) -> Result<McEstimate> {
    dist.validate_for(k)?;
    if trials == 0 {
        return Err(crate::error::invalid("trials must be at least 1"));
    }
    let limit = 10 * k + 100;
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<f64> {
            match symbols_until_decoded(k, dist, master_seed, trial, limit)? {
                Some(n) => Ok((n - k) as f64),
                None => Err(Error::Runaway {
                    request_index: trial,
                    limit: limit as u64,
                }),
            }
        })
        .collect::<Result<_>>()?;
    Ok(McEstimate::from_samples(&samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{exact_int, Exact};

    #[test]
    fn brute_force_small_closed_forms() {
        let one = DegreeDistribution::<Exact>::point_mass(1).unwrap();
        assert_eq!(brute_force_failure(2, &one, 2).unwrap(), Exact::from_ratio(1, 2));
        for m in 1..=8 {
            let expect = Exact::from_ratio(1, 1 << (m - 1));
            assert_eq!(brute_force_failure(2, &one, m).unwrap(), expect, "m={m}");
        }
        let single = DegreeDistribution::<f64>::point_mass(1).unwrap();
        assert_eq!(brute_force_failure(1, &single, 1).unwrap(), 0.0);
        let two = DegreeDistribution::<Exact>::point_mass(2).unwrap();
        assert_eq!(brute_force_failure(3, &two, 3).unwrap(), exact_int(1));
    }

    #[test]
    fn brute_force_refuses_large_instances() {
        let one = DegreeDistribution::<f64>::point_mass(1).unwrap();
        assert!(matches!(brute_force_failure(7, &one, 3), Err(Error::TooLarge(_))));
        assert!(matches!(brute_force_failure(2, &one, 11), Err(Error::TooLarge(_))));
        let isd = crate::fountain::ideal_soliton::<f64>(6).unwrap();
        assert!(matches!(brute_force_failure(6, &isd, 10), Err(Error::TooLarge(_))));
    }

    #[test]
    fn monte_carlo_trivial_and_closed_form() {
        let one = DegreeDistribution::<f64>::point_mass(1).unwrap();
        let e = monte_carlo_failure(1, &one, 1, 1000, 5).unwrap();
        assert_eq!(e.estimate, 0.0);
        let e = monte_carlo_failure(2, &one, 3, 200_000, 6).unwrap();
        assert!(e.within_sigmas(0.25, 3.0), "{e:?}");
        assert_eq!(e, monte_carlo_failure(2, &one, 3, 200_000, 6).unwrap());
    }

    #[test]
    fn monte_carlo_overhead_degree_one() {
        // k = 2, all degree 1: E[Δ] = 1.
        let one = DegreeDistribution::<f64>::point_mass(1).unwrap();
        let e = monte_carlo_overhead(2, &one, 100_000, 3).unwrap();
        assert!(e.within_sigmas(1.0, 3.0), "{e:?}");
    }
}
