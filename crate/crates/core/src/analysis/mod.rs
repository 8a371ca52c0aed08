//! Finite-length analysis of the peeling decoder: `P_F(δ)`, the failure
//! curve, the average overhead and the oracles used to check them.

mod curve;
mod oracle;
mod recursion;

pub use curve::{
    average_overhead, default_delta_cap, failure_curve, fmt_f64, CurveMetadata, FailureCurve,
    OverheadEstimate, DEFAULT_EPSILON_TAIL,
};
pub(crate) use oracle::structural;
pub use oracle::{
    brute_force_failure, monte_carlo_failure, monte_carlo_overhead, symbols_until_decoded,
    trial_symbol_seed, McEstimate, BRUTE_FORCE_MAX_K, BRUTE_FORCE_MAX_M, BRUTE_FORCE_MAX_OUTCOMES,
};
pub use recursion::{failure_probabilities, failure_probability, DecoderStateDistribution, PeelingRecursion};
