//! Caching-network model: file popularity, connectivity, the distribution of
//! cached symbols a request finds, and the resulting backhaul load.

mod connectivity;
mod rate;
mod system;

pub use connectivity::{derive_connectivity, ConnectivityEstimate, GridGeometry};
pub use rate::{
    backhaul_pmf_given_z, backhaul_upper_bound, expected_backhaul, expected_backhaul_direct,
    mds_expected_backhaul, write_rate_csv, BackhaulRate, RatePoint, Scheme,
};
pub use system::{symbol_supply_pmf, zipf_popularity, CacheSystem, Placement, SymbolSupplyPmf, MASS_TOLERANCE};
