//! Output-degree distributions for LT encoding.

use std::fmt::Write as _;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::scalar::{compensated_sum, Real, Scalar};

/// Tolerance on the total mass of a constructed distribution.
pub const SUM_TOLERANCE: f64 = 1e-12;
/// Tolerance accepted when reading a distribution from a text file.
pub const FILE_SUM_TOLERANCE: f64 = 1e-9;

/// Probability vector over output degrees `1..=d_max`.
///
/// `probs()[i]` is the probability of degree `i + 1`.
#[derive(Debug, Clone)]
pub struct DegreeDistribution<T> {
    probs: Vec<T>,
    sampler: WeightedIndex<f64>,
}

impl<T: Scalar> PartialEq for DegreeDistribution<T> {
    fn eq(&self, other: &Self) -> bool {
        self.probs == other.probs
    }
}

impl<T: Scalar> DegreeDistribution<T> {
    /// Builds a distribution from `probs[i] = P(degree = i + 1)`. Trailing
    /// zeros are trimmed so that `d_max` is the largest degree with mass.
    pub fn new(probs: Vec<T>) -> Result<Self> {
        Self::with_tolerance(probs, SUM_TOLERANCE)
    }

    fn with_tolerance(mut probs: Vec<T>, tol: f64) -> Result<Self> {
        while probs.last().is_some_and(|p| p.is_zero()) {
            probs.pop();
        }
        if probs.is_empty() {
            return Err(invalid("degree distribution has no mass"));
        }
        if let Some(d) = probs.iter().position(|p| *p < T::zero()) {
            return Err(invalid(format!("negative probability at degree {}", d + 1)));
        }
        let total = compensated_sum(probs.iter().cloned()).as_f64();
        if (total - 1.0).abs() > tol {
            return Err(invalid(format!(
                "degree probabilities sum to {total}, expected 1 within {tol:e}"
            )));
        }
        let weights: Vec<f64> = probs.iter().map(Scalar::as_f64).collect();
        let sampler = WeightedIndex::new(&weights)
            .map_err(|e| invalid(format!("degree distribution not samplable: {e}")))?;
        Ok(Self { probs, sampler })
    }

    /// Every symbol has degree `d`.
    pub fn point_mass(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(invalid("degree must be at least 1"));
        }
        let mut probs = vec![T::zero(); d];
        probs[d - 1] = T::one();
        Self::new(probs)
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn d_max(&self) -> usize {
        self.probs.len()
    }

    /// `P(degree = d)`, zero outside `1..=d_max`.
    pub fn prob(&self, d: usize) -> T {
        if d == 0 || d > self.probs.len() {
            T::zero()
        } else {
            self.probs[d - 1].clone()
        }
    }

    pub fn mean_degree(&self) -> T {
        compensated_sum(
            self.probs
                .iter()
                .enumerate()
                .map(|(i, p)| p.clone() * T::from_usize_exact(i + 1)),
        )
    }

    /// Checks `d_max <= k` for a source block of `k` symbols.
    pub fn validate_for(&self, k: usize) -> Result<()> {
        if k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        if self.d_max() > k {
            return Err(invalid(format!(
                "d_max = {} exceeds k = {k}",
                self.d_max()
            )));
        }
        Ok(())
    }

    pub fn to_f64(&self) -> DegreeDistribution<f64> {
        DegreeDistribution {
            probs: self.probs.iter().map(Scalar::as_f64).collect(),
            sampler: self.sampler.clone(),
        }
    }

    /// Draws a degree in `1..=d_max` with probability `Ω_d`.
    pub fn sample_degree<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sampler.sample(rng) + 1
    }

    /// SHA-256 over the f64 bit patterns of the probabilities.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.probs {
            h.update(p.as_f64().to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Text form: one `degree probability` line per nonzero degree.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.probs.iter().enumerate() {
            if !p.is_zero() {
                let _ = writeln!(out, "{} {:.17e}", i + 1, p.as_f64());
            }
        }
        out
    }
}

impl DegreeDistribution<f64> {
    /// Parses the text form. Blank lines and `#` comments are ignored; the
    /// probabilities must sum to 1 within [`FILE_SUM_TOLERANCE`] and are then
    /// renormalized.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut probs: Vec<f64> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            let mut fields = line.split_whitespace();
            let (Some(d), Some(p), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(parse_err(format!("expected `degree probability`, got `{line}`")));
            };
            let d: usize = d
                .parse()
                .map_err(|e| parse_err(format!("bad degree `{d}`: {e}")))?;
            let p: f64 = p
                .parse()
                .map_err(|e| parse_err(format!("bad probability `{p}`: {e}")))?;
            if d == 0 {
                return Err(parse_err("degree must be at least 1".into()));
            }
            if !(p.is_finite() && p >= 0.0) {
                return Err(parse_err(format!("probability {p} is not a finite non-negative value")));
            }
            if probs.len() < d {
                probs.resize(d, 0.0);
            }
            if probs[d - 1] != 0.0 {
                return Err(parse_err(format!("degree {d} listed twice")));
            }
            probs[d - 1] = p;
        }
        let total = compensated_sum(probs.iter().copied());
        if (total - 1.0).abs() > FILE_SUM_TOLERANCE {
            return Err(invalid(format!(
                "file probabilities sum to {total}, expected 1 within {FILE_SUM_TOLERANCE:e}"
            )));
        }
        for p in &mut probs {
            *p /= total;
        }
        Self::with_tolerance(probs, FILE_SUM_TOLERANCE)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }
}

/// Ideal Soliton: `Ω_1 = 1/k`, `Ω_d = 1/(d(d-1))` for `2 <= d <= k`.
///
/// Exact when `T` is a rational type.
pub fn ideal_soliton<T: Scalar>(k: usize) -> Result<DegreeDistribution<T>> {
    DegreeDistribution::new(ideal_soliton_weights(k)?)
}

fn ideal_soliton_weights<T: Scalar>(k: usize) -> Result<Vec<T>> {
    if k == 0 {
        return Err(invalid("ideal soliton needs k >= 1"));
    }
    let k64 = k as u64;
    Ok((1..=k64)
        .map(|d| {
            if d == 1 {
                T::from_ratio(1, k64)
            } else {
                T::from_ratio(1, d * (d - 1))
            }
        })
        .collect())
}

/// Luby's robust Soliton distribution with parameters `c > 0` and
/// `delta_rsd ∈ (0, 1)`.
///
/// With `R = c ln(k/δ) √k` and spike position `s = round(k/R)` clamped to
/// `1..=k`, the extra mass is `τ_d = R/(dk)` for `d < s` and
/// `τ_s = R ln(R/δ)/k`; the result is `(ρ + τ)/β`.
pub fn robust_soliton<T: Real>(k: usize, c: T, delta_rsd: T) -> Result<DegreeDistribution<T>> {
    if k == 0 {
        return Err(invalid("robust soliton needs k >= 1"));
    }
    if !(c > T::zero()) || !c.is_finite() {
        return Err(invalid(format!("robust soliton c must be > 0, got {c:?}")));
    }
    if !(delta_rsd > T::zero() && delta_rsd < T::one()) {
        return Err(invalid(format!(
            "robust soliton delta must lie in (0, 1), got {delta_rsd:?}"
        )));
    }
    let kt = T::from_usize_exact(k);
    let r = c * (kt / delta_rsd).ln() * kt.sqrt();
    let spike = (kt / r).round().to_usize().unwrap_or(k).clamp(1, k);
    let mut weights: Vec<T> = ideal_soliton_weights(k)?;
    for (i, w) in weights.iter_mut().enumerate() {
        let d = i + 1;
        let dt = T::from_usize_exact(d);
        if d < spike {
            *w = *w + r / (dt * kt);
        } else if d == spike {
            // ln(R/δ) is negative when R < δ; the spike then carries no mass.
            let tau = r * (r / delta_rsd).ln() / kt;
            if tau > T::zero() {
                *w = *w + tau;
            }
        }
    }
    let beta = compensated_sum(weights.iter().copied());
    for w in &mut weights {
        *w = *w / beta;
    }
    // Re-normalize once more so the sum is 1 to round-off.
    let total = compensated_sum(weights.iter().copied());
    for w in &mut weights {
        *w = *w / total;
    }
    DegreeDistribution::new(weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ideal_soliton_small_cases() {
        assert_eq!(ideal_soliton::<f64>(1).unwrap().probs(), &[1.0]);
        assert_eq!(ideal_soliton::<f64>(2).unwrap().probs(), &[0.5, 0.5]);
        let four = ideal_soliton::<Exact>(4).unwrap();
        let expected = [
            Exact::from_ratio(1, 4),
            Exact::from_ratio(1, 2),
            Exact::from_ratio(1, 6),
            Exact::from_ratio(1, 12),
        ];
        assert_eq!(four.probs(), &expected);
        assert!(ideal_soliton::<f64>(0).is_err());
    }

    #[test]
    fn robust_soliton_normalized_and_boosts_degree_one() {
        for &(k, c, d) in &[(100, 0.05, 0.5), (1000, 0.1, 0.05), (10, 0.5, 0.9), (1, 0.05, 0.5)] {
            let rsd = robust_soliton(k, c, d).unwrap();
            let s: f64 = rsd.probs().iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "k={k}: sum {s}");
            assert!(rsd.d_max() <= k);
        }
        let rsd = robust_soliton(100, 0.05, 0.5).unwrap();
        let isd = ideal_soliton::<f64>(100).unwrap();
        assert!(rsd.prob(1) > isd.prob(1));
    }

    #[test]
    fn robust_soliton_rejects_bad_parameters() {
        assert!(robust_soliton(100, 0.05, 0.0).is_err());
        assert!(robust_soliton(100, 0.05, 1.0).is_err());
        assert!(robust_soliton(100, 0.0, 0.5).is_err());
        assert!(robust_soliton(0, 0.05, 0.5).is_err());
    }

    #[test]
    fn rejects_invalid_vectors() {
        assert!(DegreeDistribution::new(vec![0.5, 0.4]).is_err());
        assert!(DegreeDistribution::new(vec![1.5, -0.5]).is_err());
        assert!(DegreeDistribution::<f64>::new(vec![]).is_err());
        assert_eq!(DegreeDistribution::new(vec![0.0, 1.0, 0.0]).unwrap().d_max(), 2);
        let d = DegreeDistribution::<f64>::point_mass(3).unwrap();
        assert!(d.validate_for(2).is_err());
        assert!(d.validate_for(3).is_ok());
    }

    #[test]
    fn sample_degree_point_mass_and_determinism() {
        let point = DegreeDistribution::<f64>::point_mass(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..1000).all(|_| point.sample_degree(&mut rng) == 1));

        let rsd = robust_soliton(100, 0.05, 0.5).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..200).map(|_| rsd.sample_degree(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));
    }

    #[test]
    fn sample_degree_half_half_frequency() {
        let dist = DegreeDistribution::new(vec![0.5, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 1_000_000;
        let ones = (0..n).filter(|_| dist.sample_degree(&mut rng) == 1).count();
        let freq = ones as f64 / n as f64;
        // 3σ binomial band is 0.0015; the stated band is 0.002.
        assert!((freq - 0.5).abs() < 0.002, "freq {freq}");
    }

    #[test]
    fn text_round_trip_and_errors() {
        let rsd = robust_soliton(50, 0.1, 0.5).unwrap();
        let back = DegreeDistribution::from_text(&rsd.to_text()).unwrap();
        for (a, b) in rsd.probs().iter().zip(back.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
        let parsed = DegreeDistribution::from_text("# comment\n1 0.25\n\n3 0.75\n").unwrap();
        assert_eq!(parsed.probs(), &[0.25, 0.0, 0.75]);
        assert!(matches!(
            DegreeDistribution::from_text("1 0.5\n2 0.4\n"),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            DegreeDistribution::from_text("1 0.5 extra\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            DegreeDistribution::from_text("1 0.5\n1 0.5\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(DegreeDistribution::from_text("0 1.0\n").is_err());
    }
}
