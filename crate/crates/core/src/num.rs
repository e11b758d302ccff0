//! Scalar abstraction for the dynamics code paths.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point type usable by the transfer-function and dynamics code.
pub trait Scalar: Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Relative precision used for internal convergence checks.
    const EPS: Self;

    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable")
    }

    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f64 {
    const EPS: Self = f64::EPSILON;

    fn to_f64_lossy(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    const EPS: Self = f32::EPSILON;

    fn to_f64_lossy(self) -> f64 {
        f64::from(self)
    }
}

/// Neumaier-compensated sum, order independent up to rounding of the
/// compensation term.
pub fn compensated_sum<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp = comp + ((sum - t) + v);
        } else {
            comp = comp + ((v - t) + sum);
        }
        sum = t;
    }
    sum + comp
}
