//! Floating-point abstraction shared by every solver and sampler.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Real scalar type the library is generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Converts a count into `Self`.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Widens to `f64` (used for hashing, CSV output and library calls).
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Draws a standard normal variate in `T`.
#[inline]
pub(crate) fn std_normal<T: Scalar, R: rand::Rng + ?Sized>(rng: &mut R) -> T {
    let z: f64 = rng.sample(rand_distr::StandardNormal);
    T::lit(z)
}

/// Draws a uniform variate on `[lo, hi)` in `T`.
#[inline]
pub(crate) fn uniform<T: Scalar, R: rand::Rng + ?Sized>(rng: &mut R, lo: T, hi: T) -> T {
    let v: f64 = rng.gen();
    lo + (hi - lo) * T::lit(v)
}

/// Linear interpolation of `values` sampled on the increasing `grid`,
/// held constant outside the grid.
pub fn interp_linear<T: Scalar>(grid: &[T], values: &[T], x: T) -> T {
    debug_assert_eq!(grid.len(), values.len());
    let n = grid.len();
    if n == 0 {
        return T::nan();
    }
    if x <= grid[0] {
        return values[0];
    }
    if x >= grid[n - 1] {
        return values[n - 1];
    }
    // first index with grid[i] > x
    let hi = grid.partition_point(|&g| g <= x);
    let lo = hi - 1;
    let w = (x - grid[lo]) / (grid[hi] - grid[lo]);
    values[lo] + w * (values[hi] - values[lo])
}
