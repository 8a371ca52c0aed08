//! LT degree distributions, the rateless encoder and the peeling decoder.

mod decoder;
mod distribution;
mod encoder;

pub use decoder::{peel_decode, DecodeResult, PeelingDecoder};
pub use distribution::{
    ideal_soliton, robust_soliton, DegreeDistribution, FILE_SUM_TOLERANCE, SUM_TOLERANCE,
};
pub use encoder::{encode_symbol, sample_neighbors, symbol_structure, EncodedSymbol, LtEncoder, SourceBlock};
