//! Scalar abstraction: every numeric routine in this crate is generic over a
//! floating-point type so the same pipeline runs in f32 or f64.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating-point scalar usable for embeddings, network weights and scores.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + FromStr
    + Display
    + Debug
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from f64, used when feeding f64-domain randomness or
    /// time arithmetic into a generic computation.
    fn from_f64_lossy(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 converts to any scalar")
    }

    /// Lossy conversion to f64 for reporting and thresholds.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Elementwise mean of a set of equal-length vectors.
pub fn mean_vector<F: Scalar>(vectors: &[&[F]]) -> Vec<F> {
    assert!(!vectors.is_empty(), "mean of zero vectors");
    let dim = vectors[0].len();
    let mut out = vec![F::zero(); dim];
    for v in vectors {
        assert_eq!(v.len(), dim);
        for (acc, &x) in out.iter_mut().zip(v.iter()) {
            *acc += x;
        }
    }
    let n = F::from_f64_lossy(vectors.len() as f64);
    for acc in &mut out {
        *acc = *acc / n;
    }
    out
}

/// Squared Euclidean distance.
pub fn squared_distance<F: Scalar>(a: &[F], b: &[F]) -> F {
    assert_eq!(a.len(), b.len());
    let mut acc = F::zero();
    for (&x, &y) in a.iter().zip(b.iter()) {
        let d = x - y;
        acc += d * d;
    }
    acc
}
