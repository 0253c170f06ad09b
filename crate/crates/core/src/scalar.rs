//! Scalar abstraction shared by every numerical routine in the crate.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
///
/// Built on [`RealField`] so that dense linear algebra from `nalgebra`
/// (Cholesky, QR, SVD, symmetric eigen) is available generically.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {
    /// Machine epsilon of the underlying representation.
    const EPSILON: Self;

    /// Converts an `f64` literal. Lossy for `f32`.
    fn lit(value: f64) -> Self;

    /// Lossless (for `f64`) conversion used for reporting.
    fn as_f64(self) -> f64;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            const EPSILON: Self = <$t>::EPSILON;

            #[inline]
            fn lit(value: f64) -> Self {
                value as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Convenience for `T::lit(usize as f64)`.
#[inline]
pub(crate) fn from_usize<T: Real>(n: usize) -> T {
    T::lit(n as f64)
}

/// Shortest round-trip text for CSV output, in exponent form for very small
/// or very large magnitudes.
pub(crate) fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Comma-joined [`fmt_f64`] values.
pub(crate) fn csv_row(values: &[f64]) -> String {
    values.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")
}
