use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type the numeric routines are generic over.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lossless for integers up to 2^24 (`f32`) or 2^53 (`f64`).
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as float")
    }

    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("f64 representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Neumaier-compensated sum.
pub fn compensated_sum<T: Scalar, I: IntoIterator<Item = T>>(values: I) -> T {
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

/// Fixed nine-digit rendering used by every file writer.
pub fn fmt9<T: Scalar>(x: T) -> String {
    let v = x.as_f64();
    let s = format!("{v:.9}");
    // normalize "-0.000000000"
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let v = [1e16_f64, 1.0, -1e16];
        assert_eq!(compensated_sum(v), 1.0);
        assert_eq!(compensated_sum(Vec::<f32>::new()), 0.0);
    }

    #[test]
    fn fmt9_is_fixed_width() {
        assert_eq!(fmt9(1.0_f64), "1.000000000");
        assert_eq!(fmt9(-0.0_f64), "0.000000000");
        assert_eq!(fmt9(-1e-12_f64), "0.000000000");
        assert_eq!(fmt9(1.0_f32 / 3.0), "0.333333343");
    }
}
