use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the linear-algebra core is generic over.
///
/// The tolerances are per-precision; the `f64` values are the ones every
/// higher-level module is calibrated against.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Default + Sum + Send + Sync + 'static
{
    /// Entrywise Hermiticity tolerance.
    fn hermitian_tol() -> Self;
    /// Tolerance for unit norms and orthonormality.
    fn orthonormal_tol() -> Self;
    /// Eigen-residual tolerance.
    fn eig_tol() -> Self;

    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite constant")
    }
}

impl Real for f64 {
    fn hermitian_tol() -> Self {
        1e-10
    }
    fn orthonormal_tol() -> Self {
        1e-12
    }
    fn eig_tol() -> Self {
        1e-8
    }
}

impl Real for f32 {
    fn hermitian_tol() -> Self {
        1e-4
    }
    fn orthonormal_tol() -> Self {
        1e-5
    }
    fn eig_tol() -> Self {
        1e-3
    }
}
