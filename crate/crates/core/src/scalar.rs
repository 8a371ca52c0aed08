//! Scalar traits the numeric code is generic over.
//!
//! [`Scalar`] only asks for field arithmetic and conversions, so it is met by
//! `f32`, `f64` and exact rationals (`BigRational`). Everything that is a
//! sum of products of probabilities (distributions, the enumeration oracle,
//! the backhaul formulas, placement objectives) is written against it.
//! [`Real`] adds transcendental functions for the code that needs logs and
//! powers (the peeling recursion, Zipf weights, the robust Soliton spike).

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

pub trait Scalar:
    Num + Signed + Clone + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    fn from_usize_exact(v: usize) -> Self {
        Self::from_usize(v).expect("integer representable in scalar")
    }

    fn from_ratio(num: u64, den: u64) -> Self {
        Self::from_u64(num).expect("integer representable in scalar")
            / Self::from_u64(den).expect("integer representable in scalar")
    }

    /// Lossy view used for tolerance checks and sampling.
    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Conversion from f64; exact for rationals (the binary expansion is kept).
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite value")
    }
}

impl<T> Scalar for T where
    T: Num
        + Signed
        + Clone
        + PartialOrd
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Send
        + Sync
        + 'static
{
}

/// Floating-point scalars.
pub trait Real: Scalar + Float {}

impl<T: Scalar + Float> Real for T {}

/// Exact rational scalar used by the enumeration oracles.
pub type Exact = BigRational;

pub fn exact_int(v: i64) -> Exact {
    BigRational::from_integer(BigInt::from(v))
}

pub(crate) fn scalar_max<T: Scalar>(a: T, b: T) -> T {
    if a >= b {
        a
    } else {
        b
    }
}

/// Kahan-compensated accumulator.
#[derive(Debug, Clone)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Scalar> Default for CompensatedSum<T> {
    fn default() -> Self {
        Self {
            sum: T::zero(),
            carry: T::zero(),
        }
    }
}

impl<T: Scalar> CompensatedSum<T> {
    pub fn add(&mut self, v: T) {
        let y = v - self.carry.clone();
        let t = self.sum.clone() + y.clone();
        self.carry = (t.clone() - self.sum.clone()) - y;
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum.clone()
    }
}

impl<T: Scalar> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::default();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

pub fn compensated_sum<T: Scalar, I: IntoIterator<Item = T>>(iter: I) -> T {
    iter.into_iter().collect::<CompensatedSum<T>>().value()
}
