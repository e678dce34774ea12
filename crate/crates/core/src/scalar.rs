//! Scalar abstraction shared by the plain `f64` simulation path and the
//! taped reverse-mode path.
//!
//! All dynamics code is written once against [`Scalar`]. Running it with
//! `f64` gives the ordinary simulator; running it with
//! [`crate::adjoint::Var`] records every arithmetic operation on a tape.
//! Because both instantiations execute the identical sequence of IEEE
//! operations, the recorded trajectory is bit-identical to the plain one.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    /// Lift a constant. Constants carry no derivative.
    fn cst(v: f64) -> Self;

    /// Primal value, used for branching and diagnostics.
    fn value(self) -> f64;

    fn sqrt(self) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn one() -> Self {
        Self::cst(1.0)
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }

    #[inline]
    fn value(self) -> f64 {
        self
    }

    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
}
