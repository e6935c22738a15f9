//! Floating-point scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar type the linear algebra is generic over: `f32` or `f64`.
///
/// The tolerance hooks scale the structural checks (Hermiticity, unit trace,
/// positivity) to the precision of the type. The `f64` values are the ones the
/// library documents; `f32` gets correspondingly looser bounds.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Tolerance for Hermiticity and unit trace.
    fn structural_tol() -> Self;
    /// Most negative eigenvalue still accepted as positive semidefinite.
    fn psd_tol() -> Self;
    /// Magnitude below which an eigenvalue counts as zero.
    fn zero_eig_tol() -> Self;
    /// Tolerance on the squared norm of a pure state.
    fn unit_norm_tol() -> Self;

    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    #[inline]
    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("usize is representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Scalar for f64 {
    fn structural_tol() -> Self {
        1e-10
    }
    fn psd_tol() -> Self {
        1e-9
    }
    fn zero_eig_tol() -> Self {
        1e-10
    }
    fn unit_norm_tol() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn structural_tol() -> Self {
        1e-4
    }
    fn psd_tol() -> Self {
        1e-4
    }
    fn zero_eig_tol() -> Self {
        1e-5
    }
    fn unit_norm_tol() -> Self {
        1e-5
    }
}
