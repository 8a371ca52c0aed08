use std::io::Write;

use serde::{Deserialize, Serialize};

use super::recursion::failure_probabilities;
use crate::error::{invalid, Error, Result};
use crate::fountain::DegreeDistribution;
use crate::scalar::{compensated_sum, Real, Scalar};

pub const DEFAULT_EPSILON_TAIL: f64 = 1e-6;

/// `delta_cap` default: twice the number of inputs.
pub fn default_delta_cap(k: usize) -> usize {
    2 * k
}

/// `P_F(δ)` for `δ = 0..=delta_max`.
///
/// `pf(δ)` is 1 for negative `δ` and 0 past `delta_max`; use
/// [`FailureCurve::covers`] to know whether a lookup hit the tail.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureCurve<T> {
    k: usize,
    pf: Vec<T>,
    epsilon_tail: f64,
    truncated: bool,
    distribution_digest: String,
}

impl<T: Scalar> FailureCurve<T> {
    /// Wraps precomputed values. `truncated` is derived from the last entry.
    pub fn from_values(k: usize, pf: Vec<T>, epsilon_tail: f64, distribution_digest: String) -> Result<Self> {
        if pf.is_empty() {
            return Err(invalid("failure curve needs at least delta = 0"));
        }
        if let Some(d) = pf.iter().position(|p| *p < T::zero() || *p > T::one()) {
            return Err(invalid(format!("P_F({d}) outside [0, 1]")));
        }
        let truncated = pf.last().map(Scalar::as_f64).unwrap_or(1.0) >= epsilon_tail;
        Ok(Self {
            k,
            pf,
            epsilon_tail,
            truncated,
            distribution_digest,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[T] {
        &self.pf
    }

    pub fn delta_max(&self) -> usize {
        self.pf.len() - 1
    }

    pub fn epsilon_tail(&self) -> f64 {
        self.epsilon_tail
    }

    /// True when the cap was reached before `P_F < epsilon_tail`.
    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    pub fn distribution_digest(&self) -> &str {
        &self.distribution_digest
    }

    pub fn covers(&self, delta: i64) -> bool {
        delta < 0 || (delta as u64) <= self.delta_max() as u64
    }

    pub fn pf(&self, delta: i64) -> T {
        if delta < 0 {
            T::one()
        } else {
            self.pf.get(delta as usize).cloned().unwrap_or_else(T::zero)
        }
    }

    /// `Σ_{δ=0}^{n-1} P_F(δ)` for every `n = 0..=delta_max + 1`.
    pub fn prefix_sums(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.pf.len() + 1);
        out.push(T::zero());
        let mut acc = crate::scalar::CompensatedSum::<T>::default();
        for p in &self.pf {
            acc.add(p.clone());
            out.push(acc.value());
        }
        out
    }

    pub fn metadata(&self) -> CurveMetadata {
        CurveMetadata {
            k: self.k,
            delta_max: self.delta_max(),
            epsilon_tail: self.epsilon_tail,
            truncated: self.truncated,
            distribution_digest: self.distribution_digest.clone(),
            tail_bias_bound: tail_bias_bound(self),
        }
    }

    /// CSV with header `delta,pf`, values at 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| invalid(format!("csv write failed: {e}"));
        out.write_record(["delta", "pf"]).map_err(io)?;
        for (d, p) in self.pf.iter().enumerate() {
            out.write_record([d.to_string(), fmt_f64(p.as_f64())]).map_err(io)?;
        }
        out.flush().map_err(|e| invalid(format!("csv flush failed: {e}")))?;
        Ok(())
    }
}

impl FailureCurve<f64> {
    /// Reads a `delta,pf` CSV written by [`FailureCurve::write_csv`].
    pub fn read_csv<R: std::io::Read>(
        r: R,
        k: usize,
        epsilon_tail: f64,
        distribution_digest: String,
    ) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut pf = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })?;
            let parse = |field: usize| -> Result<&str> {
                rec.get(field).ok_or_else(|| Error::Parse {
                    line: i + 2,
                    message: "missing field".into(),
                })
            };
            let delta: usize = parse(0)?.trim().parse().map_err(|e| Error::Parse {
                line: i + 2,
                message: format!("bad delta: {e}"),
            })?;
            if delta != i {
                return Err(Error::Parse {
                    line: i + 2,
                    message: format!("expected delta {i}, found {delta}"),
                });
            }
            let v: f64 = parse(1)?.trim().parse().map_err(|e| Error::Parse {
                line: i + 2,
                message: format!("bad pf: {e}"),
            })?;
            pf.push(v);
        }
        Self::from_values(k, pf, epsilon_tail, distribution_digest)
    }
}

/// Sidecar record for a serialized curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMetadata {
    pub k: usize,
    pub delta_max: usize,
    pub epsilon_tail: f64,
    pub truncated: bool,
    pub distribution_digest: String,
    pub tail_bias_bound: f64,
}

/// Shortest-free formatting with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Computes `P_F(δ)` for `δ = 0, 1, …` until it drops below `epsilon_tail`
/// or `delta_cap` is reached.
///
/// Values come from the backward pass of the recursion, which yields every
/// `δ` up to a horizon at once; the horizon doubles until the tail threshold
/// is crossed.
pub fn failure_curve<T: Real>(
    k: usize,
    dist: &DegreeDistribution<T>,
    epsilon_tail: f64,
    delta_cap: usize,
) -> Result<FailureCurve<T>> {
    if !(epsilon_tail > 0.0 && epsilon_tail < 1.0) {
        return Err(invalid(format!("epsilon_tail must lie in (0, 1), got {epsilon_tail}")));
    }
    dist.validate_for(k)?;
    let mut horizon = delta_cap.min(k.max(32));
    loop {
        let all = failure_probabilities(k, dist, k + horizon)?;
        let tail = &all[k..];
        if let Some(stop) = tail.iter().position(|p| p.as_f64() < epsilon_tail) {
            return FailureCurve::from_values(k, tail[..=stop].to_vec(), epsilon_tail, dist.digest());
        }
        if horizon >= delta_cap {
            return FailureCurve::from_values(k, tail.to_vec(), epsilon_tail, dist.digest());
        }
        horizon = (2 * horizon).min(delta_cap);
    }
}

/// Average overhead with its truncation bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadEstimate<T> {
    /// `Σ_{δ=0}^{delta_max} P_F(δ)`.
    pub value: T,
    /// Estimate of the omitted `Σ_{δ>delta_max} P_F(δ)`, assuming the tail
    /// decays geometrically at the rate of its last two points.
    pub tail_bias_bound: f64,
    pub delta_max: usize,
}

/// `E[Δ] = Σ_δ P_F(δ)`. Refuses curves that were cut off by the cap.
pub fn average_overhead<T: Scalar>(curve: &FailureCurve<T>) -> Result<OverheadEstimate<T>> {
    if curve.is_truncated() {
        return Err(Error::TruncatedCurve {
            delta_cap: curve.delta_max(),
            last_pf: curve.pf(curve.delta_max() as i64).as_f64(),
        });
    }
    Ok(OverheadEstimate {
        value: compensated_sum(curve.values().iter().cloned()),
        tail_bias_bound: tail_bias_bound(curve),
        delta_max: curve.delta_max(),
    })
}

fn tail_bias_bound<T: Scalar>(curve: &FailureCurve<T>) -> f64 {
    let n = curve.values().len();
    let last = curve.values()[n - 1].as_f64();
    if last == 0.0 {
        return 0.0;
    }
    let ratio = if n >= 2 {
        let prev = curve.values()[n - 2].as_f64();
        if prev > 0.0 {
            last / prev
        } else {
            1.0
        }
    } else {
        1.0
    };
    if ratio < 1.0 {
        last * ratio / (1.0 - ratio)
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fountain::ideal_soliton;

    fn degree_one() -> DegreeDistribution<f64> {
        DegreeDistribution::point_mass(1).unwrap()
    }

    #[test]
    fn single_input_curve() {
        let curve = failure_curve(1, &degree_one(), 1e-6, 2).unwrap();
        assert_eq!(curve.values(), &[0.0]);
        assert_eq!(curve.delta_max(), 0);
        assert_eq!(average_overhead(&curve).unwrap().value, 0.0);
    }

    #[test]
    fn two_input_degree_one_curve() {
        let curve = failure_curve(2, &degree_one(), 1e-6, 100).unwrap();
        // 2^-20 is the first value below 1e-6.
        assert_eq!(curve.delta_max(), 19);
        for (d, p) in curve.values().iter().enumerate() {
            assert!((p - 2f64.powi(-(1 + d as i32))).abs() < 1e-12);
        }
        let e = average_overhead(&curve).unwrap();
        assert!((e.value - 1.0).abs() < 1e-6);
        // Geometric tail with ratio 1/2: the omitted mass equals the last term.
        assert!((e.tail_bias_bound - 2f64.powi(-20)).abs() < 1e-15);
    }

    #[test]
    fn cap_flags_truncation_and_overhead_refuses() {
        let curve = failure_curve(2, &degree_one(), 1e-6, 5).unwrap();
        assert!(curve.is_truncated());
        assert_eq!(curve.delta_max(), 5);
        assert!(matches!(average_overhead(&curve), Err(Error::TruncatedCurve { .. })));
    }

    #[test]
    fn lookup_conventions() {
        let curve = failure_curve(2, &degree_one(), 1e-6, 100).unwrap();
        assert_eq!(curve.pf(-1), 1.0);
        assert_eq!(curve.pf(-7), 1.0);
        assert_eq!(curve.pf(20), 0.0);
        assert!(!curve.covers(20));
        assert!(curve.covers(-3));
        let prefix = curve.prefix_sums();
        assert_eq!(prefix.len(), 21);
        assert!((prefix[2] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn zero_at_start_means_zero_overhead() {
        let curve = FailureCurve::from_values(3, vec![0.0], 1e-6, String::new()).unwrap();
        assert_eq!(average_overhead(&curve).unwrap().value, 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let curve = failure_curve(8, &ideal_soliton(8).unwrap(), 1e-4, 40).unwrap();
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("delta,pf\n"));
        let back = FailureCurve::read_csv(&buf[..], 8, 1e-4, curve.distribution_digest().into()).unwrap();
        assert_eq!(back, curve);
    }

    #[test]
    fn rejects_bad_epsilon() {
        assert!(failure_curve(2, &degree_one(), 0.0, 10).is_err());
        assert!(failure_curve(2, &degree_one(), 1.0, 10).is_err());
    }
}
