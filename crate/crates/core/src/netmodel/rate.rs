use std::io::Write;

use serde::{Deserialize, Serialize};

use super::system::{symbol_supply_pmf, CacheSystem, Placement};
use crate::analysis::{average_overhead, fmt_f64, FailureCurve};
use crate::error::{invalid, Result};
use crate::scalar::{compensated_sum, Scalar};

/// `P(T = t | Z = z)` for a request that found `z` cached symbols.
///
/// `P_F` is 1 for negative overheads and 0 past the end of the curve.
pub fn backhaul_pmf_given_z<T: Scalar>(curve: &FailureCurve<T>, z: u64, t: u64) -> T {
    let k = curve.k() as i64;
    let base = z as i64 - k;
    if base > 0 && t == 0 {
        return T::one() - curve.pf(base);
    }
    let delta = base + t as i64;
    curve.pf(delta - 1) - curve.pf(delta)
}

/// An expected backhaul load in symbols per request, together with the same
/// value divided by `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackhaulRate<T> {
    pub symbols: T,
    pub normalized: T,
    /// Some term read `P_F` past the end of the curve (taken as 0).
    pub used_tail: bool,
    /// Magnitude bound on the error from the truncated `P_F` tail.
    pub tail_bias_bound: f64,
}

fn check_curve<T: Scalar>(sys: &CacheSystem<T>, curve: &FailureCurve<T>) -> Result<()> {
    if curve.k() != sys.k() {
        return Err(invalid(format!(
            "failure curve is for k = {}, system has k = {}",
            curve.k(),
            sys.k()
        )));
    }
    Ok(())
}

/// `E[T] = E[Δ] + Σ_{z≤k} (k−z) P_Z(z) − Σ_{z>k} P_Z(z) Σ_{δ<z−k} P_F(δ)`.
pub fn expected_backhaul<T: Scalar>(
    sys: &CacheSystem<T>,
    place: &Placement,
    curve: &FailureCurve<T>,
) -> Result<BackhaulRate<T>> {
    check_curve(sys, curve)?;
    let overhead = average_overhead(curve)?;
    let supply = symbol_supply_pmf(sys, place)?;
    let k = sys.k() as u64;
    let prefix = curve.prefix_sums();
    let mut used_tail = false;
    let terms = supply.iter().map(|(z, p)| {
        if z <= k {
            p.clone() * T::from_u64(k - z).expect("small integer")
        } else {
            let n = (z - k) as usize;
            if n > prefix.len() - 1 {
                used_tail = true;
            }
            T::zero() - p.clone() * prefix[n.min(prefix.len() - 1)].clone()
        }
    });
    let symbols = overhead.value + compensated_sum(terms);
    Ok(BackhaulRate {
        normalized: sys.normalize(symbols.clone()),
        symbols,
        used_tail,
        tail_bias_bound: overhead.tail_bias_bound,
    })
}

/// `E[T]` evaluated as `Σ_z P_Z(z) Σ_t t P(T = t | z)` directly; used to
/// cross-check [`expected_backhaul`].
pub fn expected_backhaul_direct<T: Scalar>(
    sys: &CacheSystem<T>,
    place: &Placement,
    curve: &FailureCurve<T>,
) -> Result<T> {
    check_curve(sys, curve)?;
    let supply = symbol_supply_pmf(sys, place)?;
    let k = sys.k() as i64;
    let last = curve.delta_max() as i64 + 1;
    let terms = supply.iter().map(|(z, p)| {
        // Beyond δ = delta_max + 1 every P(T = t | z) is 0.
        let t_max = (last + k - z as i64).max(0) as u64;
        let inner = compensated_sum(
            (1..=t_max).map(|t| T::from_u64(t).expect("small integer") * backhaul_pmf_given_z(curve, z, t)),
        );
        p.clone() * inner
    });
    Ok(compensated_sum(terms))
}

/// `T_UP = E[Δ] + Σ_j θ_j Σ_h γ_h max(0, k − w_j h)`, an upper bound on
/// [`expected_backhaul`].
pub fn backhaul_upper_bound<T: Scalar>(sys: &CacheSystem<T>, place: &Placement, e_delta: T) -> Result<T> {
    place.validate(sys)?;
    Ok(e_delta + sys.expected_shortfall(place.w()))
}

/// Backhaul load when files are MDS-coded: a request needs exactly `k`
/// symbols, so `T = max(0, k − z)`.
pub fn mds_expected_backhaul<T: Scalar>(sys: &CacheSystem<T>, place: &Placement) -> Result<T> {
    place.validate(sys)?;
    Ok(sys.expected_shortfall(place.w()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "LT")]
    Lt,
    #[serde(rename = "MDS")]
    Mds,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Lt => "LT",
            Scheme::Mds => "MDS",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One row of a rate sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub cache_files: usize,
    pub alpha: f64,
    pub scheme: Scheme,
    pub rate_normalized: f64,
}

/// CSV `M,alpha,scheme,rate_normalized`.
pub fn write_rate_csv<W: Write>(w: W, rows: &[RatePoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| invalid(format!("csv write failed: {e}"));
    out.write_record(["M", "alpha", "scheme", "rate_normalized"]).map_err(io)?;
    for r in rows {
        out.write_record([
            r.cache_files.to_string(),
            fmt_f64(r.alpha),
            r.scheme.to_string(),
            fmt_f64(r.rate_normalized),
        ])
        .map_err(io)?;
    }
    out.flush().map_err(|e| invalid(format!("csv flush failed: {e}")))?;
    Ok(())
}
