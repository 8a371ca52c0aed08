//! Exact finite-length analysis of peeling decoding.
//!
//! The decoder is tracked as a Markov chain on `(cloud, ripple)` sizes while
//! `u` inputs remain unresolved. Cloud symbols never influence the schedule
//! except through not being released, so conditioned on the chain state they
//! are i.i.d. with neighbor sets uniform among those having at least two
//! unresolved members. A single release probability per stage is therefore
//! exact for any degree distribution, with no stratification by reduced
//! degree. One transition `u -> u - 1`:
//!
//! * one ripple symbol is consumed and its input resolved;
//! * each other ripple symbol is attached to that input with probability
//!   `1/u` and becomes redundant;
//! * each cloud symbol is released into the ripple with probability `p_u`.
//!
//! A state with an empty ripple and `u >= 1` is a decoding failure; its mass
//! is moved out of the table into the failure accumulator.

use crate::error::Result;
use crate::fountain::DegreeDistribution;
use crate::scalar::{CompensatedSum, Real};

/// Binomial terms below `TRUNCATION * mode` are dropped (and the kept terms
/// renormalized so that no mass is lost).
const TRUNCATION: f64 = 1e-24;

/// Table of `ln(i!)` for `i = 0..=n`.
pub(crate) fn ln_factorials<T: Real>(n: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = CompensatedSum::<T>::default();
    out.push(T::zero());
    for i in 1..=n {
        acc.add(T::from_usize_exact(i).ln());
        out.push(acc.value());
    }
    out
}

fn ln_choose<T: Real>(lnf: &[T], n: usize, r: usize) -> Option<T> {
    (r <= n).then(|| lnf[n] - lnf[r] - lnf[n - r])
}

/// Truncated binomial pmf `Bin(n, p)` as `(first index, terms)`.
pub(crate) fn binomial_pmf<T: Real>(n: usize, p: T, lnf: &[T]) -> (usize, Vec<T>) {
    if n == 0 || p <= T::zero() {
        return (0, vec![T::one()]);
    }
    if p >= T::one() {
        return (n, vec![T::one()]);
    }
    let q = T::one() - p;
    let nt = T::from_usize_exact(n);
    let mode = ((nt + T::one()) * p).floor().to_usize().unwrap_or(0).min(n);
    let ln_mode = ln_choose(lnf, n, mode).expect("mode <= n")
        + T::from_usize_exact(mode) * p.ln()
        + T::from_usize_exact(n - mode) * (-p).ln_1p();
    let peak = ln_mode.exp();
    let cut = peak * T::from_f64_lossy(TRUNCATION);
    let odds = p / q;

    let mut below = Vec::new();
    let mut v = peak;
    let mut i = mode;
    while i > 0 {
        // pmf(i-1) = pmf(i) * i / (n - i + 1) * q / p
        v = v * T::from_usize_exact(i) / (T::from_usize_exact(n - i + 1) * odds);
        if v < cut {
            break;
        }
        below.push(v);
        i -= 1;
    }
    let start = mode - below.len();
    below.reverse();
    below.push(peak);
    let mut v = peak;
    let mut i = mode;
    while i < n {
        // pmf(i+1) = pmf(i) * (n - i) / (i + 1) * p / q
        v = v * T::from_usize_exact(n - i) * odds / T::from_usize_exact(i + 1);
        if v < cut {
            break;
        }
        below.push(v);
        i += 1;
    }
    let total: T = below.iter().copied().fold(T::zero(), |a, b| a + b);
    for t in &mut below {
        *t = *t / total;
    }
    (start, below)
}

/// Probability that a cloud symbol is released when the number of
/// unresolved inputs drops from `u` to `u - 1`, for `u = 0..=k`
/// (entries for `u < 2` are unused and set to 1).
pub(crate) fn release_probabilities<T: Real>(
    k: usize,
    dist: &DegreeDistribution<T>,
    lnf: &[T],
) -> Vec<T> {
    let ln_ck: Vec<T> = (0..=dist.d_max())
        .map(|d| ln_choose(lnf, k, d).unwrap_or(T::neg_infinity()))
        .collect();
    let term = |u: usize, d: usize, i: usize| -> T {
        // C(u, i) C(k-u, d-i) / C(k, d)
        match (ln_choose(lnf, u, i), d.checked_sub(i).and_then(|r| ln_choose(lnf, k - u, r))) {
            (Some(a), Some(b)) => (a + b - ln_ck[d]).exp(),
            _ => T::zero(),
        }
    };
    let mut out = vec![T::one(); k + 1];
    for (u, slot) in out.iter_mut().enumerate().skip(2) {
        let mut num = CompensatedSum::<T>::default();
        let mut den = CompensatedSum::<T>::default();
        for d in 2..=dist.d_max() {
            let w = dist.prob(d);
            if w == T::zero() {
                continue;
            }
            // Released: the resolved input plus exactly one other unresolved
            // neighbor, remaining d - 2 among the k - u resolved inputs.
            let released = match d
                .checked_sub(2)
                .and_then(|r| ln_choose(lnf, k - u, r))
            {
                Some(l) => T::from_usize_exact(u - 1) * (l - ln_ck[d]).exp(),
                None => T::zero(),
            };
            num.add(w * released);
            den.add(w * in_cloud(u, d, &term));
        }
        let den = den.value();
        *slot = if den > T::zero() {
            (num.value() / den).min(T::one())
        } else {
            T::zero()
        };
    }
    out
}

/// `P(|N ∩ U| >= 2)` for a uniform `d`-subset `N` of `k` inputs and a fixed
/// unresolved set `U` of size `u`.
fn in_cloud<T: Real>(u: usize, d: usize, term: &impl Fn(usize, usize, usize) -> T) -> T {
    let complement = T::one() - term(u, d, 0) - term(u, d, 1);
    if complement > T::from_f64_lossy(1e-2) {
        return complement;
    }
    // Small probability: sum the hypergeometric terms directly to avoid
    // cancellation. They decrease from i = 2 here.
    let mut acc = T::zero();
    for i in 2..=u.min(d) {
        let t = term(u, d, i);
        acc = acc + t;
        if t <= acc * T::from_f64_lossy(1e-20) {
            break;
        }
    }
    acc
}

/// Distribution of `(cloud, ripple)` sizes with `u` unresolved inputs,
/// restricted to states that have not yet failed.
#[derive(Debug, Clone)]
pub struct DecoderStateDistribution<T> {
    u: usize,
    m: usize,
    table: Vec<T>,
    cloud: (usize, usize),
    ripple: (usize, usize),
}

impl<T: Real> DecoderStateDistribution<T> {
    fn empty(u: usize, m: usize) -> Self {
        Self {
            u,
            m,
            table: vec![T::zero(); (m + 1) * (m + 1)],
            cloud: (usize::MAX, 0),
            ripple: (usize::MAX, 0),
        }
    }

    fn idx(&self, c: usize, r: usize) -> usize {
        c * (self.m + 1) + r
    }

    fn add(&mut self, c: usize, r: usize, v: T) {
        let i = self.idx(c, r);
        self.table[i] = self.table[i] + v;
        self.cloud = (self.cloud.0.min(c), self.cloud.1.max(c));
        self.ripple = (self.ripple.0.min(r), self.ripple.1.max(r));
    }

    pub fn u(&self) -> usize {
        self.u
    }

    pub fn get(&self, cloud: usize, ripple: usize) -> T {
        if cloud > self.m || ripple > self.m {
            return T::zero();
        }
        self.table[self.idx(cloud, ripple)]
    }

    fn is_empty(&self) -> bool {
        self.cloud.0 > self.cloud.1
    }

    /// Nonzero entries as `(cloud, ripple, probability)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        let (c0, c1) = self.cloud;
        let (r0, r1) = self.ripple;
        (c0..=c1.min(self.m))
            .flat_map(move |c| (r0..=r1).map(move |r| (c, r)))
            .filter_map(|(c, r)| {
                let v = self.get(c, r);
                (v != T::zero()).then_some((c, r, v))
            })
    }

    pub fn total_mass(&self) -> T {
        self.entries()
            .map(|(_, _, v)| v)
            .collect::<CompensatedSum<T>>()
            .value()
    }

    /// Removes and returns the mass of states with an empty ripple.
    fn take_empty_ripple(&mut self) -> T {
        if self.is_empty() || self.ripple.0 > 0 {
            return T::zero();
        }
        let mut acc = CompensatedSum::<T>::default();
        for c in self.cloud.0..=self.cloud.1 {
            let i = self.idx(c, 0);
            acc.add(self.table[i]);
            self.table[i] = T::zero();
        }
        self.ripple.0 = 1;
        acc.value()
    }
}

/// Stage-by-stage evaluation of the recursion for `m` received symbols.
#[derive(Debug, Clone)]
pub struct PeelingRecursion<T> {
    k: usize,
    lnf: Vec<T>,
    release: Vec<T>,
    state: DecoderStateDistribution<T>,
    failure: CompensatedSum<T>,
    success: T,
}

impl<T: Real> PeelingRecursion<T> {
    /// State at `u = k`: each of the `m` symbols lands in the ripple with
    /// probability `Ω_1` and in the cloud otherwise.
    pub fn new(k: usize, dist: &DegreeDistribution<T>, m: usize) -> Result<Self> {
        dist.validate_for(k)?;
        let lnf = ln_factorials::<T>(k.max(m));
        let release = release_probabilities(k, dist, &lnf);
        let mut state = DecoderStateDistribution::empty(k, m);
        let (start, pmf) = binomial_pmf(m, dist.prob(1), &lnf);
        for (i, p) in pmf.into_iter().enumerate() {
            let r = start + i;
            state.add(m - r, r, p);
        }
        let mut failure = CompensatedSum::default();
        failure.add(state.take_empty_ripple());
        Ok(Self {
            k,
            lnf,
            release,
            state,
            failure,
            success: T::zero(),
        })
    }

    pub fn state(&self) -> &DecoderStateDistribution<T> {
        &self.state
    }

    pub fn unresolved(&self) -> usize {
        self.state.u
    }

    pub fn failure_mass(&self) -> T {
        self.failure.value()
    }

    pub fn success_mass(&self) -> T {
        self.success
    }

    pub fn is_done(&self) -> bool {
        self.state.u == 0
    }

    /// Advances from `u` to `u - 1` unresolved inputs.
    pub fn step(&mut self) {
        let u = self.state.u;
        if u == 0 {
            return;
        }
        let m = self.state.m;
        let lnf = &self.lnf;
        let inv_u = T::one() / T::from_usize_exact(u);

        // Other ripple symbols hit by the resolved input become redundant.
        let mut after_ripple = DecoderStateDistribution::empty(u - 1, m);
        if !self.state.is_empty() {
            let (r0, r1) = self.state.ripple;
            let ripple_pmfs: Vec<(usize, Vec<T>)> = (r0.max(1)..=r1)
                .map(|r| binomial_pmf(r - 1, inv_u, lnf))
                .collect();
            for c in self.state.cloud.0..=self.state.cloud.1 {
                for r in r0.max(1)..=r1 {
                    let p = self.state.get(c, r);
                    if p == T::zero() {
                        continue;
                    }
                    let (start, pmf) = &ripple_pmfs[r - r0.max(1)];
                    for (i, w) in pmf.iter().enumerate() {
                        let lost = start + i;
                        after_ripple.add(c, r - 1 - lost, p * *w);
                    }
                }
            }
        }

        // Cloud symbols released into the ripple.
        let mut next = DecoderStateDistribution::empty(u - 1, m);
        if !after_ripple.is_empty() {
            let p_release = self.release[u];
            let (c0, c1) = after_ripple.cloud;
            let (r0, r1) = after_ripple.ripple;
            let cloud_pmfs: Vec<(usize, Vec<T>)> =
                (c0..=c1).map(|c| binomial_pmf(c, p_release, lnf)).collect();
            for c in c0..=c1 {
                let (start, pmf) = &cloud_pmfs[c - c0];
                for r in r0..=r1 {
                    let p = after_ripple.get(c, r);
                    if p == T::zero() {
                        continue;
                    }
                    for (i, w) in pmf.iter().enumerate() {
                        let b = start + i;
                        next.add(c - b, r + b, p * *w);
                    }
                }
            }
        }

        if u - 1 == 0 {
            self.success = next.total_mass();
            next = DecoderStateDistribution::empty(0, m);
        } else {
            self.failure.add(next.take_empty_ripple());
        }
        self.state = next;
    }

    pub fn run(mut self) -> T {
        while !self.is_done() {
            self.step();
        }
        self.failure_mass()
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// Probability that peeling fails to recover all `k` inputs from `m`
/// independently generated symbols. Exactly 1 when `m < k`.
pub fn failure_probability<T: Real>(k: usize, dist: &DegreeDistribution<T>, m: usize) -> Result<T> {
    dist.validate_for(k)?;
    if m < k {
        return Ok(T::one());
    }
    Ok(PeelingRecursion::new(k, dist, m)?.run().min(T::one()).max(T::zero()))
}

/// `P_F` for every number of received symbols `m = 0..=m_max` in one pass.
///
/// The stage kernels do not depend on `m`, only the initial state does, so
/// the chain is run backwards: `fail_u(c, r)` is the probability of failing
/// from state `(c, r)` with `u` unresolved inputs, and
/// `P_F(m) = Σ_r Bin(m, Ω_1)(r) · fail_k(m - r, r)`. Agrees with
/// [`failure_probability`] term by term.
pub fn failure_probabilities<T: Real>(
    k: usize,
    dist: &DegreeDistribution<T>,
    m_max: usize,
) -> Result<Vec<T>> {
    dist.validate_for(k)?;
    let lnf = ln_factorials::<T>(k.max(m_max));
    let release = release_probabilities(k, dist, &lnf);
    let width = m_max + 1;
    let at = |c: usize, r: usize| c * width + r;
    // Stage 0: everything decoded.
    let mut fail = vec![T::zero(); width * width];
    let mut released = vec![T::zero(); width * width];
    for u in 1..=k {
        // released(c, r1): after the ripple update, before cloud release.
        let p_release = release[u];
        for c in 0..m_max {
            let (start, pmf) = binomial_pmf(c, p_release, &lnf);
            for r1 in 0..m_max - c {
                let mut acc = T::zero();
                for (i, w) in pmf.iter().enumerate() {
                    let b = start + i;
                    acc = acc + *w * fail[at(c - b, r1 + b)];
                }
                released[at(c, r1)] = acc;
            }
        }
        let inv_u = T::one() / T::from_usize_exact(u);
        for r in 1..=m_max {
            let (start, pmf) = binomial_pmf(r - 1, inv_u, &lnf);
            for c in 0..=m_max - r {
                let mut acc = T::zero();
                for (i, w) in pmf.iter().enumerate() {
                    let lost = start + i;
                    acc = acc + *w * released[at(c, r - 1 - lost)];
                }
                fail[at(c, r)] = acc;
            }
        }
        for c in 0..=m_max {
            fail[at(c, 0)] = T::one();
        }
    }
    let omega1 = dist.prob(1);
    Ok((0..=m_max)
        .map(|m| {
            if m < k {
                return T::one();
            }
            let (start, pmf) = binomial_pmf(m, omega1, &lnf);
            let p = pmf
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    let r = start + i;
                    *w * fail[at(m - r, r)]
                })
                .collect::<CompensatedSum<T>>()
                .value();
            p.min(T::one()).max(T::zero())
        })
        .collect())
}
