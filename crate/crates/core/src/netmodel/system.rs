use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::scalar::{compensated_sum, Real, Scalar};

pub const MASS_TOLERANCE: f64 = 1e-12;

/// Zipf popularity: `θ_j ∝ j^{-α}` for `j = 1..=n`.
pub fn zipf_popularity<T: Real>(n: usize, alpha: T) -> Result<Vec<T>> {
    if n == 0 {
        return Err(invalid("library must contain at least one file"));
    }
    if !(alpha >= T::zero()) || !alpha.is_finite() {
        return Err(invalid(format!("zipf alpha must be finite and >= 0, got {alpha:?}")));
    }
    let weights: Vec<T> = (1..=n)
        .map(|j| T::from_usize_exact(j).powf(-alpha))
        .collect();
    let total = compensated_sum(weights.iter().copied());
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// One caching scenario: `n` files of `k` input symbols, caches holding `M`
/// files' worth of symbols, request popularity `θ` and connectivity `γ`
/// (`gamma[h - 1]` is the probability of being served by `h` transmitters).
#[derive(Debug, Clone, PartialEq)]
pub struct CacheSystem<T> {
    k: usize,
    cache_files: usize,
    theta: Vec<T>,
    gamma: Vec<T>,
}

impl<T: Scalar> CacheSystem<T> {
    pub fn new(k: usize, cache_files: usize, theta: Vec<T>, gamma: Vec<T>) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        if theta.is_empty() {
            return Err(invalid("popularity vector is empty"));
        }
        if cache_files > theta.len() {
            return Err(invalid(format!(
                "cache size M = {cache_files} exceeds library size n = {}",
                theta.len()
            )));
        }
        check_pmf("popularity", &theta)?;
        if let Some(j) = theta.windows(2).position(|w| w[1] > w[0]) {
            return Err(invalid(format!(
                "popularity must be non-increasing in file index (file {} > file {})",
                j + 2,
                j + 1
            )));
        }
        if gamma.is_empty() {
            return Err(invalid("connectivity vector is empty"));
        }
        check_pmf("connectivity", &gamma)?;
        Ok(Self {
            k,
            cache_files,
            theta,
            gamma,
        })
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cache_files(&self) -> usize {
        self.cache_files
    }

    pub fn theta(&self) -> &[T] {
        &self.theta
    }

    pub fn gamma(&self) -> &[T] {
        &self.gamma
    }

    pub fn h_max(&self) -> usize {
        self.gamma.len()
    }

    /// Total cached symbols per transmitter, `M k`.
    pub fn budget(&self) -> u64 {
        (self.cache_files * self.k) as u64
    }

    pub fn with_cache_files(&self, cache_files: usize) -> Result<Self> {
        Self::new(self.k, cache_files, self.theta.clone(), self.gamma.clone())
    }

    /// `(j, h, θ_j γ_h)` over pairs with nonzero weight; `j` and `h` are
    /// 1-based.
    pub fn request_pairs(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.theta.iter().enumerate().flat_map(move |(j, th)| {
            self.gamma
                .iter()
                .enumerate()
                .filter(|(_, g)| !g.is_zero())
                .map(move |(h, g)| (j + 1, h + 1, th.clone() * g.clone()))
        })
    }

    /// Expected symbols still missing after the caches, for a decoder that
    /// needs exactly `k`: `Σ_j θ_j Σ_h γ_h max(0, k - w_j h)`.
    pub fn expected_shortfall(&self, w: &[u64]) -> T {
        let k = self.k as u64;
        compensated_sum(self.theta.iter().zip(w).map(|(th, &wj)| {
            let per_file = compensated_sum(self.gamma.iter().enumerate().map(|(h, g)| {
                let z = wj.saturating_mul(h as u64 + 1);
                g.clone() * T::from_u64(k.saturating_sub(z)).expect("small integer")
            }));
            th.clone() * per_file
        }))
    }

    pub fn normalize(&self, symbols: T) -> T {
        symbols / T::from_usize_exact(self.k)
    }
}

fn check_pmf<T: Scalar>(what: &str, v: &[T]) -> Result<()> {
    if let Some(i) = v.iter().position(|p| *p < T::zero()) {
        return Err(invalid(format!("{what} entry {} is negative", i + 1)));
    }
    let total = compensated_sum(v.iter().cloned()).as_f64();
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(invalid(format!(
            "{what} sums to {total}, expected 1 within {MASS_TOLERANCE:e}"
        )));
    }
    Ok(())
}

/// Symbols of each file cached per transmitter.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Placement {
    w: Vec<u64>,
}

impl Placement {
    pub fn new(w: Vec<u64>) -> Self {
        Self { w }
    }

    /// `Mk / n` symbols of every file; requires `n | Mk`.
    pub fn uniform<T: Scalar>(sys: &CacheSystem<T>) -> Result<Self> {
        let n = sys.n() as u64;
        if sys.budget() % n != 0 {
            return Err(invalid(format!(
                "budget {} is not divisible by n = {n}",
                sys.budget()
            )));
        }
        Ok(Self::new(vec![sys.budget() / n; sys.n()]))
    }

    pub fn w(&self) -> &[u64] {
        &self.w
    }

    pub fn total(&self) -> u64 {
        self.w.iter().sum()
    }

    pub fn validate<T: Scalar>(&self, sys: &CacheSystem<T>) -> Result<()> {
        if self.w.len() != sys.n() {
            return Err(Error::InvalidInput(format!(
                "placement has {} entries, library has {} files",
                self.w.len(),
                sys.n()
            )));
        }
        if self.total() != sys.budget() {
            return Err(Error::BudgetViolated {
                stored: self.total(),
                budget: sys.budget(),
            });
        }
        Ok(())
    }

    /// CSV `file_index,w` with 1-based file indices.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| invalid(format!("csv write failed: {e}"));
        out.write_record(["file_index", "w"]).map_err(io)?;
        for (j, v) in self.w.iter().enumerate() {
            out.write_record([(j + 1).to_string(), v.to_string()]).map_err(io)?;
        }
        out.flush().map_err(|e| invalid(format!("csv flush failed: {e}")))?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut w = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            let field = |f: usize| -> Result<u64> {
                rec.get(f)
                    .ok_or_else(|| Error::Parse {
                        line,
                        message: "missing field".into(),
                    })?
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse {
                        line,
                        message: format!("{e}"),
                    })
            };
            if field(0)? != (i + 1) as u64 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected file index {}", i + 1),
                });
            }
            w.push(field(1)?);
        }
        Ok(Self::new(w))
    }
}

/// Distribution of `Z`, the number of cached symbols of the requested file
/// a user collects from the transmitters it is connected to.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolSupplyPmf<T> {
    support: BTreeMap<u64, T>,
}

impl<T: Scalar> SymbolSupplyPmf<T> {
    pub fn prob(&self, z: u64) -> T {
        self.support.get(&z).cloned().unwrap_or_else(T::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &T)> + '_ {
        self.support.iter().map(|(z, p)| (*z, p))
    }

    pub fn total_mass(&self) -> T {
        compensated_sum(self.support.values().cloned())
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }
}

/// `P_Z(z) = Σ_{(j,h): w_j h = z} θ_j γ_h`.
pub fn symbol_supply_pmf<T: Scalar>(sys: &CacheSystem<T>, place: &Placement) -> Result<SymbolSupplyPmf<T>> {
    place.validate(sys)?;
    let mut support: BTreeMap<u64, T> = BTreeMap::new();
    for (j, h, p) in sys.request_pairs() {
        let z = place.w()[j - 1] * h as u64;
        let e = support.entry(z).or_insert_with(T::zero);
        *e = e.clone() + p;
    }
    Ok(SymbolSupplyPmf { support })
}
