//! Scalar abstraction for the floating-point parts of the engine.
//!
//! Energies are integers throughout; only temperatures, probabilities and
//! estimators are generic. Everything instantiated at the crate root uses
//! `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by the Monte Carlo and analysis code.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for literal constants.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `ln(sum_i exp(x_i))` without overflow; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<F: Real>(xs: &[F]) -> F {
    let max = xs.iter().copied().fold(F::neg_infinity(), F::max);
    if max == F::neg_infinity() {
        return max;
    }
    // pairwise reduction keeps the rounding error at O(log n)
    fn tree<F: Real>(xs: &[F], max: F) -> F {
        if xs.len() <= 8 {
            xs.iter().map(|&x| (x - max).exp()).sum()
        } else {
            let mid = xs.len() / 2;
            tree(&xs[..mid], max) + tree(&xs[mid..], max)
        }
    }
    max + tree(xs, max).ln()
}

/// Mean of a slice; `None` when empty.
pub fn mean<F: Real>(xs: &[F]) -> Option<F> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().copied().sum::<F>() / F::from_usize_lossy(xs.len()))
    }
}

/// Population variance (divides by `n`).
pub fn variance<F: Real>(xs: &[F]) -> Option<F> {
    let m = mean(xs)?;
    Some(xs.iter().map(|&x| (x - m) * (x - m)).sum::<F>() / F::from_usize_lossy(xs.len()))
}
