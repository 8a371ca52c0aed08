//! LT fountain codes under peeling decoding, their exact finite-length
//! failure analysis, and the backhaul-rate model of an edge-caching network
//! that stores LT-coded file fragments.
//!
//! The numeric code is generic over [`Scalar`] / [`Real`]; the aliases below
//! fix the common instantiations.

pub mod analysis;
pub mod error;
pub mod fountain;
pub mod montecarlo;
pub mod netmodel;
pub mod placement;
pub mod scalar;
pub mod scenario;
pub mod seed;

pub use error::{Error, Result};
pub use scalar::{Exact, Real, Scalar};

pub type DegreeDistributionF64 = fountain::DegreeDistribution<f64>;
pub type ExactDegreeDistribution = fountain::DegreeDistribution<Exact>;
pub type FailureCurveF64 = analysis::FailureCurve<f64>;
pub type CacheSystemF64 = netmodel::CacheSystem<f64>;
pub type ExactCacheSystem = netmodel::CacheSystem<Exact>;
pub type PlacementProblemF64 = placement::PlacementProblem<f64>;
