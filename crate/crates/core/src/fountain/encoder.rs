use std::collections::HashMap;

use rand::{Rng, SeedableRng};

use super::distribution::DegreeDistribution;
use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::seed::{derive_seed, domain, rng_for, Rng as SeedRng};

/// The `k` input symbols of one file. All symbols share one nonzero length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceBlock {
    symbols: Vec<Vec<u8>>,
}

impl SourceBlock {
    pub fn new(symbols: Vec<Vec<u8>>) -> Result<Self> {
        let Some(first) = symbols.first() else {
            return Err(invalid("source block needs at least one symbol"));
        };
        let len = first.len();
        if len == 0 {
            return Err(invalid("symbols must be non-empty"));
        }
        if let Some(i) = symbols.iter().position(|s| s.len() != len) {
            return Err(invalid(format!(
                "symbol {i} has length {}, expected {len}",
                symbols[i].len()
            )));
        }
        Ok(Self { symbols })
    }

    /// Uniformly random payloads, determined by `seed`.
    pub fn random(k: usize, symbol_size: usize, seed: u64) -> Result<Self> {
        let mut rng = rng_for(seed, domain::SOURCE, k as u64);
        Self::new(
            (0..k)
                .map(|_| (0..symbol_size).map(|_| rng.gen()).collect())
                .collect(),
        )
    }

    pub fn k(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbol_size(&self) -> usize {
        self.symbols[0].len()
    }

    pub fn symbols(&self) -> &[Vec<u8>] {
        &self.symbols
    }

    pub fn symbol(&self, i: usize) -> &[u8] {
        &self.symbols[i]
    }

    pub fn into_symbols(self) -> Vec<Vec<u8>> {
        self.symbols
    }
}

/// One LT output symbol: a column of the generator matrix plus its payload.
///
/// Neighbor indices are zero-based and sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSymbol {
    pub payload: Vec<u8>,
    pub neighbors: Vec<u32>,
    pub seed_id: u64,
}

impl EncodedSymbol {
    pub fn degree(&self) -> usize {
        self.neighbors.len()
    }
}

pub(crate) fn xor_into(acc: &mut [u8], other: &[u8]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a ^= b;
    }
}

/// Draws `d` distinct indices from `0..k` by a partial Fisher–Yates shuffle
/// over a virtual identity array (only displaced slots are stored).
pub fn sample_neighbors<R: Rng + ?Sized>(k: usize, d: usize, rng: &mut R) -> Vec<u32> {
    debug_assert!(d <= k);
    let mut out = Vec::with_capacity(d);
    if d <= 16 {
        let mut displaced: Vec<(u32, u32)> = Vec::with_capacity(2 * d);
        let lookup = |displaced: &[(u32, u32)], slot: u32| {
            displaced
                .iter()
                .rev()
                .find(|(s, _)| *s == slot)
                .map_or(slot, |&(_, v)| v)
        };
        for i in 0..d as u32 {
            let j = rng.gen_range(i..k as u32);
            let vi = lookup(&displaced, i);
            let vj = lookup(&displaced, j);
            displaced.push((j, vi));
            displaced.push((i, vj));
            out.push(vj);
        }
    } else {
        let mut displaced: HashMap<u32, u32> = HashMap::with_capacity(2 * d);
        for i in 0..d as u32 {
            let j = rng.gen_range(i..k as u32);
            let vi = displaced.get(&i).copied().unwrap_or(i);
            let vj = displaced.get(&j).copied().unwrap_or(j);
            displaced.insert(j, vi);
            out.push(vj);
        }
    }
    out.sort_unstable();
    out
}

/// Neighbor set of the symbol identified by `seed_id`, without a payload.
pub fn symbol_structure<T: Scalar>(k: usize, dist: &DegreeDistribution<T>, seed_id: u64) -> Vec<u32> {
    let mut rng = SeedRng::seed_from_u64(seed_id);
    let d = dist.sample_degree(&mut rng).min(k);
    sample_neighbors(k, d, &mut rng)
}

/// Generates the output symbol identified by `seed_id`: a degree from
/// `dist`, then that many distinct inputs, XORed together.
pub fn encode_symbol<T: Scalar>(
    block: &SourceBlock,
    dist: &DegreeDistribution<T>,
    seed_id: u64,
) -> EncodedSymbol {
    let neighbors = symbol_structure(block.k(), dist, seed_id);
    let mut payload = vec![0u8; block.symbol_size()];
    for &i in &neighbors {
        xor_into(&mut payload, block.symbol(i as usize));
    }
    EncodedSymbol {
        payload,
        neighbors,
        seed_id,
    }
}

/// Rateless encoder: symbol `index` is seeded with
/// `derive_seed(master_seed, SYMBOL, index)`.
#[derive(Debug, Clone)]
pub struct LtEncoder<'a, T> {
    block: &'a SourceBlock,
    dist: &'a DegreeDistribution<T>,
    master_seed: u64,
}

impl<'a, T: Scalar> LtEncoder<'a, T> {
    pub fn new(block: &'a SourceBlock, dist: &'a DegreeDistribution<T>, master_seed: u64) -> Result<Self> {
        dist.validate_for(block.k())?;
        Ok(Self {
            block,
            dist,
            master_seed,
        })
    }

    pub fn seed_id(&self, index: u64) -> u64 {
        derive_seed(self.master_seed, domain::SYMBOL, index)
    }

    pub fn symbol(&self, index: u64) -> EncodedSymbol {
        encode_symbol(self.block, self.dist, self.seed_id(index))
    }

    pub fn symbols(&self, range: std::ops::Range<u64>) -> Vec<EncodedSymbol> {
        range.map(|i| self.symbol(i)).collect()
    }
}
