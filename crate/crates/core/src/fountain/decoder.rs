//! Peeling (iterative) decoder over the explicit bipartite graph.
//!
//! Symbols can be added at any time; [`PeelingDecoder::peel`] then runs the
//! schedule until the ripple (current degree-one symbols) is empty. When
//! several ripple symbols are available the one with the smallest `seed_id`
//! is processed first.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::encoder::{xor_into, EncodedSymbol, SourceBlock};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone)]
struct Slot {
    seed_id: u64,
    payload: Vec<u8>,
    /// Reduced neighbor set: always a subset of the unresolved inputs.
    neighbors: Vec<u32>,
    active: bool,
}

#[derive(Debug, Clone)]
pub struct PeelingDecoder {
    k: usize,
    symbol_size: Option<usize>,
    slots: Vec<Slot>,
    adjacency: Vec<Vec<u32>>,
    recovered: Vec<Option<Vec<u8>>>,
    resolved: usize,
    ripple: BinaryHeap<Reverse<(u64, u32)>>,
    received: usize,
}

impl PeelingDecoder {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("decoder needs k >= 1"));
        }
        Ok(Self {
            k,
            symbol_size: None,
            slots: Vec::new(),
            adjacency: vec![Vec::new(); k],
            recovered: vec![None; k],
            resolved: 0,
            ripple: BinaryHeap::new(),
            received: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn resolved(&self) -> usize {
        self.resolved
    }

    pub fn received(&self) -> usize {
        self.received
    }

    pub fn is_complete(&self) -> bool {
        self.resolved == self.k
    }

    pub fn unresolved(&self) -> impl Iterator<Item = usize> + '_ {
        self.recovered
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_none())
            .map(|(i, _)| i)
    }

    pub fn recovered(&self) -> &[Option<Vec<u8>>] {
        &self.recovered
    }

    /// Current size of the ripple, counting only live degree-one symbols.
    pub fn ripple_len(&self) -> usize {
        self.slots
            .iter()
            .filter(|s| s.active && s.neighbors.len() == 1)
            .count()
    }

    /// Reduced neighbor sets of the symbols still in the graph.
    pub fn pending_neighbor_sets(&self) -> impl Iterator<Item = &[u32]> + '_ {
        self.slots
            .iter()
            .filter(|s| s.active)
            .map(|s| s.neighbors.as_slice())
    }

    fn validate(&self, sym: &EncodedSymbol) -> Result<()> {
        if sym.neighbors.is_empty() {
            return Err(Error::InvalidInput(format!(
                "symbol {} has no neighbors",
                sym.seed_id
            )));
        }
        let mut sorted = sym.neighbors.clone();
        sorted.sort_unstable();
        if let Some(&bad) = sorted.iter().find(|&&i| i as usize >= self.k) {
            return Err(Error::InvalidInput(format!(
                "symbol {} references input {bad}, k = {}",
                sym.seed_id, self.k
            )));
        }
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(format!(
                "symbol {} repeats a neighbor",
                sym.seed_id
            )));
        }
        if let Some(size) = self.symbol_size {
            if sym.payload.len() != size {
                return Err(Error::InvalidInput(format!(
                    "symbol {} payload has {} bytes, expected {size}",
                    sym.seed_id,
                    sym.payload.len()
                )));
            }
        }
        Ok(())
    }

    /// Adds a received symbol, reducing it by already recovered inputs.
    /// Does not peel.
    pub fn add_symbol(&mut self, sym: EncodedSymbol) -> Result<()> {
        self.validate(&sym)?;
        self.symbol_size.get_or_insert(sym.payload.len());
        self.received += 1;
        let EncodedSymbol {
            mut payload,
            neighbors,
            seed_id,
        } = sym;
        let mut remaining = Vec::with_capacity(neighbors.len());
        for i in neighbors {
            match &self.recovered[i as usize] {
                Some(value) => xor_into(&mut payload, value),
                None => remaining.push(i),
            }
        }
        // Degree-0 symbols carry no information.
        if remaining.is_empty() {
            return Ok(());
        }
        remaining.sort_unstable();
        let slot = self.slots.len() as u32;
        for &i in &remaining {
            self.adjacency[i as usize].push(slot);
        }
        if remaining.len() == 1 {
            self.ripple.push(Reverse((seed_id, slot)));
        }
        self.slots.push(Slot {
            seed_id,
            payload,
            neighbors: remaining,
            active: true,
        });
        Ok(())
    }

    /// Runs peeling until the ripple is empty. Returns whether all `k`
    /// inputs are recovered.
    pub fn peel(&mut self) -> bool {
        while let Some(Reverse((_, slot))) = self.ripple.pop() {
            let s = &mut self.slots[slot as usize];
            if !s.active || s.neighbors.len() != 1 {
                continue;
            }
            s.active = false;
            let input = s.neighbors[0] as usize;
            let value = std::mem::take(&mut s.payload);
            self.resolve(input, value, slot);
        }
        self.is_complete()
    }

    fn resolve(&mut self, input: usize, value: Vec<u8>, source: u32) {
        debug_assert!(self.recovered[input].is_none());
        let touching = std::mem::take(&mut self.adjacency[input]);
        for slot in touching {
            if slot == source {
                continue;
            }
            let s = &mut self.slots[slot as usize];
            if !s.active {
                continue;
            }
            let Some(pos) = s.neighbors.iter().position(|&i| i as usize == input) else {
                continue;
            };
            s.neighbors.remove(pos);
            xor_into(&mut s.payload, &value);
            match s.neighbors.len() {
                0 => s.active = false,
                1 => self.ripple.push(Reverse((s.seed_id, slot))),
                _ => {}
            }
        }
        self.recovered[input] = Some(value);
        self.resolved += 1;
    }

    pub fn into_result(self) -> DecodeResult {
        DecodeResult {
            success: self.resolved == self.k,
            resolved: self.resolved,
            recovered: self.recovered,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeResult {
    pub success: bool,
    pub resolved: usize,
    pub recovered: Vec<Option<Vec<u8>>>,
}

impl DecodeResult {
    pub fn into_source_block(self) -> Option<SourceBlock> {
        if !self.success {
            return None;
        }
        let symbols = self.recovered.into_iter().collect::<Option<Vec<_>>>()?;
        SourceBlock::new(symbols).ok()
    }
}

/// Peels `received` against `k` unknown inputs.
///
/// A malformed symbol is an error; running out of degree-one symbols is a
/// normal unsuccessful result.
pub fn peel_decode<I>(k: usize, received: I) -> Result<DecodeResult>
where
    I: IntoIterator<Item = EncodedSymbol>,
{
    let mut dec = PeelingDecoder::new(k)?;
    for s in received {
        dec.add_symbol(s)?;
    }
    dec.peel();
    Ok(dec.into_result())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(neighbors: &[u32], payload: u8, seed_id: u64) -> EncodedSymbol {
        EncodedSymbol {
            payload: vec![payload],
            neighbors: neighbors.to_vec(),
            seed_id,
        }
    }

    #[test]
    fn two_step_peel() {
        let (u1, u2) = (0x3c, 0xa5);
        let r = peel_decode(2, vec![sym(&[0], u1, 0), sym(&[0, 1], u1 ^ u2, 1)]).unwrap();
        assert!(r.success);
        assert_eq!(r.resolved, 2);
        assert_eq!(r.recovered, vec![Some(vec![u1]), Some(vec![u2])]);
    }

    #[test]
    fn no_degree_one_symbol_fails_immediately() {
        let r = peel_decode(2, vec![sym(&[0, 1], 1, 0), sym(&[0, 1], 1, 1)]).unwrap();
        assert!(!r.success);
        assert_eq!(r.resolved, 0);
        assert!(r.into_source_block().is_none());
    }

    #[test]
    fn singletons_resolve_in_k_stages() {
        let mut dec = PeelingDecoder::new(3).unwrap();
        for i in 0..3 {
            dec.add_symbol(sym(&[i], i as u8 + 10, i as u64)).unwrap();
        }
        assert!(dec.peel());
        assert_eq!(dec.resolved(), 3);
        let block = dec.into_result().into_source_block().unwrap();
        assert_eq!(block.symbols(), &[vec![10], vec![11], vec![12]]);
    }

    #[test]
    fn malformed_symbols_are_errors() {
        assert!(matches!(
            peel_decode(2, vec![sym(&[2], 0, 0)]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            peel_decode(2, vec![sym(&[1, 1], 0, 0)]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            peel_decode(2, vec![sym(&[], 0, 0)]),
            Err(Error::InvalidInput(_))
        ));
        let mixed = vec![
            sym(&[0], 0, 0),
            EncodedSymbol {
                payload: vec![0, 0],
                neighbors: vec![1],
                seed_id: 1,
            },
        ];
        assert!(matches!(peel_decode(2, mixed), Err(Error::InvalidInput(_))));
        assert!(PeelingDecoder::new(0).is_err());
    }

    #[test]
    fn incremental_addition_after_stall() {
        let mut dec = PeelingDecoder::new(3).unwrap();
        dec.add_symbol(sym(&[0, 1], 1 ^ 2, 0)).unwrap();
        dec.add_symbol(sym(&[1, 2], 2 ^ 3, 1)).unwrap();
        assert!(!dec.peel());
        assert_eq!(dec.unresolved().count() + dec.resolved(), 3);
        dec.add_symbol(sym(&[2], 3, 2)).unwrap();
        assert!(dec.peel());
        // A symbol arriving after completion reduces to degree 0 and is dropped.
        dec.add_symbol(sym(&[0, 2], 1 ^ 3, 3)).unwrap();
        assert_eq!(dec.pending_neighbor_sets().count(), 0);
        let block = dec.into_result().into_source_block().unwrap();
        assert_eq!(block.symbols(), &[vec![1], vec![2], vec![3]]);
    }
}
