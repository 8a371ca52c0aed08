//! Cache placement: choose how many symbols of each file every transmitter
//! stores so as to minimize the backhaul upper bound
//! `T_UP(w) = E[Δ] + Σ_j θ_j Σ_h γ_h max(0, k − w_j h)` subject to
//! `Σ_j w_j = M k`.
//!
//! The objective is separable and each term is convex and piecewise linear in
//! `w_j` (breakpoints at `k / h`), so greedy marginal allocation is optimal
//! for the integer problem and waterfilling over the linear pieces solves the
//! continuous relaxation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::analysis::{average_overhead, FailureCurve};
use crate::error::{invalid, Result};
use crate::netmodel::{expected_backhaul, mds_expected_backhaul, BackhaulRate, CacheSystem, Placement};
use crate::scalar::{compensated_sum, scalar_max, Scalar};

/// Relative tolerance of the relaxed solution's first-order certificate.
pub const TRANSFER_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementProblem<T> {
    sys: CacheSystem<T>,
    e_delta: T,
}

impl<T: Scalar> PlacementProblem<T> {
    pub fn new(sys: CacheSystem<T>, e_delta: T) -> Result<Self> {
        if e_delta < T::zero() {
            return Err(invalid(format!("E[Δ] must be non-negative, got {e_delta:?}")));
        }
        Ok(Self { sys, e_delta })
    }

    pub fn sys(&self) -> &CacheSystem<T> {
        &self.sys
    }

    pub fn e_delta(&self) -> &T {
        &self.e_delta
    }

    /// `θ_j Σ_h γ_h max(0, k − w h)` for real `w`.
    fn term(&self, j: usize, w: &T) -> T {
        let k = T::from_usize_exact(self.sys.k());
        let per_file = compensated_sum(self.sys.gamma().iter().enumerate().map(|(h, g)| {
            let h = T::from_usize_exact(h + 1);
            g.clone() * scalar_max(T::zero(), k.clone() - w.clone() * h)
        }));
        self.sys.theta()[j].clone() * per_file
    }

    /// Objective decrease from storing one more symbol of file `j` at `w`.
    fn unit_gain(&self, j: usize, w: u64) -> T {
        let k = self.sys.k() as u64;
        let per_file = compensated_sum(self.sys.gamma().iter().enumerate().filter_map(|(h, g)| {
            let h = h as u64 + 1;
            let before = k.saturating_sub(w * h);
            let after = k.saturating_sub((w + 1) * h);
            (before > after).then(|| g.clone() * T::from_u64(before - after).expect("small integer"))
        }));
        self.sys.theta()[j].clone() * per_file
    }

    /// Slope of file `j`'s term on the piece right of `w` (`right = true`)
    /// or left of it.
    fn slope(&self, j: usize, w: &T, right: bool) -> T {
        let k = T::from_usize_exact(self.sys.k());
        let mut s = T::zero();
        for (h, g) in self.sys.gamma().iter().enumerate() {
            let h = T::from_usize_exact(h + 1);
            let wh = w.clone() * h.clone();
            let active = if right { wh < k } else { wh <= k };
            if active {
                s = s - g.clone() * h;
            }
        }
        self.sys.theta()[j].clone() * s
    }
}

/// `T_UP` at an integer placement; errors when the placement does not use
/// exactly the budget.
pub fn objective_tup<T: Scalar>(prob: &PlacementProblem<T>, place: &Placement) -> Result<T> {
    place.validate(&prob.sys)?;
    Ok(prob.e_delta.clone() + prob.sys.expected_shortfall(place.w()))
}

/// `T_UP` at a real-valued allocation (budget not checked).
pub fn objective_relaxed<T: Scalar>(prob: &PlacementProblem<T>, w: &[T]) -> T {
    prob.e_delta.clone() + compensated_sum(w.iter().enumerate().map(|(j, wj)| prob.term(j, wj)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub objective: f64,
    pub iterations: u64,
    /// Allocation steps where the best gain was shared by another file.
    pub ties: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegerSolution<T> {
    pub placement: Placement,
    pub objective: T,
    pub summary: SolverSummary,
}

struct Candidate<T> {
    gain: T,
    w: u64,
    j: usize,
}

impl<T: Scalar> Candidate<T> {
    fn same_gain(&self, other: &Self) -> bool {
        self.gain.partial_cmp(&other.gain) == Some(Ordering::Equal)
    }
}

// Max-heap order: larger gain, then fewer stored symbols, then lower index.
impl<T: Scalar> Ord for Candidate<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .partial_cmp(&other.gain)
            .expect("gains are comparable")
            .then_with(|| other.w.cmp(&self.w))
            .then_with(|| other.j.cmp(&self.j))
    }
}

impl<T: Scalar> PartialOrd for Candidate<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> PartialEq for Candidate<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for Candidate<T> {}

/// Greedy marginal allocation, one symbol at a time, to the file whose next
/// symbol lowers the objective most. Equal gains go to the file holding
/// fewer symbols, then to the lower index, which keeps symmetric files
/// evenly loaded.
pub fn optimize_integer<T: Scalar>(prob: &PlacementProblem<T>) -> Result<IntegerSolution<T>> {
    let n = prob.sys.n();
    let mut w = vec![0u64; n];
    let mut heap: BinaryHeap<Candidate<T>> = (0..n)
        .map(|j| Candidate {
            gain: prob.unit_gain(j, 0),
            w: 0,
            j,
        })
        .collect();
    let mut ties = 0;
    let budget = prob.sys.budget();
    for _ in 0..budget {
        let best = heap.pop().expect("heap holds one candidate per file");
        if heap.peek().is_some_and(|next| next.same_gain(&best)) {
            ties += 1;
        }
        w[best.j] += 1;
        heap.push(Candidate {
            gain: prob.unit_gain(best.j, w[best.j]),
            w: w[best.j],
            j: best.j,
        });
    }
    let placement = Placement::new(w);
    let objective = objective_tup(prob, &placement)?;
    Ok(IntegerSolution {
        summary: SolverSummary {
            objective: objective.as_f64(),
            iterations: budget,
            ties,
        },
        placement,
        objective,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSolution<T> {
    pub w: Vec<T>,
    pub objective: T,
    /// Largest first-order objective decrease per unit of mass moved from one
    /// file to another; zero at an optimum.
    pub transfer_gap: T,
}

impl<T: Scalar> RelaxedSolution<T> {
    pub fn is_certified(&self) -> bool {
        self.transfer_gap.as_f64() <= TRANSFER_TOLERANCE
    }
}

struct Piece<T> {
    j: usize,
    len: T,
    slope: T,
}

/// Waterfilling over the linear pieces of every file's term, steepest
/// descent first. Pieces with equal slope share the remaining budget evenly.
pub fn optimize_relaxed<T: Scalar>(prob: &PlacementProblem<T>) -> RelaxedSolution<T> {
    let sys = &prob.sys;
    let k = T::from_usize_exact(sys.k());
    let mut pieces = Vec::new();
    for j in 0..sys.n() {
        // Breakpoints k/h in increasing order: k/h_max, ..., k/2, k.
        let mut start = T::zero();
        for h in (1..=sys.h_max()).rev() {
            let end = k.clone() / T::from_usize_exact(h);
            let slope = prob.slope(j, &start, true);
            pieces.push(Piece {
                j,
                len: end.clone() - start.clone(),
                slope,
            });
            start = end;
        }
    }
    pieces.sort_by(|a, b| {
        a.slope
            .partial_cmp(&b.slope)
            .expect("slopes are comparable")
            .then(a.j.cmp(&b.j))
    });

    let mut w = vec![T::zero(); sys.n()];
    let mut remaining = T::from_u64(sys.budget()).expect("small integer");
    let mut i = 0;
    while i < pieces.len() && remaining > T::zero() {
        let mut end = i + 1;
        while end < pieces.len() && pieces[end].slope == pieces[i].slope {
            end += 1;
        }
        let mut group: Vec<&Piece<T>> = pieces[i..end].iter().collect();
        group.sort_by(|a, b| a.len.partial_cmp(&b.len).expect("lengths are comparable"));
        let mut left = group.len();
        for p in group {
            let share = remaining.clone() / T::from_usize_exact(left);
            let take = if p.len < share { p.len.clone() } else { share };
            w[p.j] = w[p.j].clone() + take.clone();
            remaining = remaining - take;
            left -= 1;
        }
        i = end;
    }
    // Only reachable when every file is already at k (M = n); the rest has
    // zero marginal value.
    if remaining > T::zero() {
        let share = remaining / T::from_usize_exact(sys.n());
        for wj in &mut w {
            *wj = wj.clone() + share.clone();
        }
    }

    let objective = objective_relaxed(prob, &w);
    let transfer_gap = transfer_gap(prob, &w);
    RelaxedSolution {
        w,
        objective,
        transfer_gap,
    }
}

/// Largest `(decrease from adding to j) − (increase from removing from j')`
/// per unit over pairs `j ≠ j'` with `w_{j'} > 0`, clamped at zero.
pub fn transfer_gap<T: Scalar>(prob: &PlacementProblem<T>, w: &[T]) -> T {
    let n = w.len();
    let gains: Vec<T> = (0..n).map(|j| T::zero() - prob.slope(j, &w[j], true)).collect();
    let losses: Vec<Option<T>> = (0..n)
        .map(|j| (w[j] > T::zero()).then(|| T::zero() - prob.slope(j, &w[j], false)))
        .collect();
    let mut gap = T::zero();
    for (a, gain) in gains.iter().enumerate() {
        for (b, loss) in losses.iter().enumerate() {
            if let (true, Some(loss)) = (a != b, loss) {
                let d = gain.clone() - loss.clone();
                if d > gap {
                    gap = d;
                }
            }
        }
    }
    gap
}

/// Both schemes at their optimized placements: LT minimizes `T_UP` with the
/// curve's `E[Δ]`, MDS the same objective with `E[Δ] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedRates<T> {
    pub lt_placement: Placement,
    pub lt: BackhaulRate<T>,
    pub lt_upper_bound: T,
    pub mds_placement: Placement,
    pub mds: T,
    pub mds_normalized: T,
}

pub fn optimized_rates<T: Scalar>(sys: &CacheSystem<T>, curve: &FailureCurve<T>) -> Result<OptimizedRates<T>> {
    let e_delta = average_overhead(curve)?.value;
    let lt_solution = optimize_integer(&PlacementProblem::new(sys.clone(), e_delta)?)?;
    let lt = expected_backhaul(sys, &lt_solution.placement, curve)?;
    let mds_solution = optimize_integer(&PlacementProblem::new(sys.clone(), T::zero())?)?;
    let mds = mds_expected_backhaul(sys, &mds_solution.placement)?;
    Ok(OptimizedRates {
        lt_placement: lt_solution.placement,
        lt,
        lt_upper_bound: lt_solution.objective,
        mds_placement: mds_solution.placement,
        mds_normalized: sys.normalize(mds.clone()),
        mds,
    })
}
