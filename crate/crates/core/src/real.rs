//! Scalar abstraction shared by the double-precision and multiprecision paths.
//!
//! The certified orbit is hyperbolic: along one direction round-off grows by
//! the unstable eigenvalue (about 11.4 per cycle for the optimal racket), so a
//! double-precision orbit leaves its ladder after roughly ten cycles. Every
//! routine that iterates the map over long horizons is therefore generic over
//! [`Real`] and can run on [`Mp`], an MPFR float with a compile-time precision.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use rug::float::Constant;
use rug::Float;

/// Real scalar used by the map, the linearization and the manifold solver.
///
/// Arithmetic is by value; clone where an operand is reused.
pub trait Real:
    Clone
    + fmt::Debug
    + fmt::Display
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// Significand width in bits.
    const MANTISSA_BITS: u32;

    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;

    /// `num / den` rounded once at full precision.
    fn ratio(num: i64, den: i64) -> Self {
        Self::from_f64(num as f64) / (den as f64)
    }

    fn pi() -> Self;
    fn sqrt(&self) -> Self;
    fn abs(&self) -> Self;
    fn sin_cos(&self) -> (Self, Self);
    fn floor(&self) -> Self;
    fn round(&self) -> Self;
    fn is_finite(&self) -> bool;

    /// Unit round-off, `2^(1 - MANTISSA_BITS)`.
    fn epsilon() -> Self {
        Self::from_f64(2f64.powi(1 - Self::MANTISSA_BITS as i32))
    }

    /// Default Newton tolerance for the impact solvers at this precision.
    fn default_newton_tol() -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn square(&self) -> Self {
        self.clone() * self.clone()
    }
}

impl Real for f64 {
    const MANTISSA_BITS: u32 = f64::MANTISSA_DIGITS;

    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn pi() -> Self {
        std::f64::consts::PI
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn sin_cos(&self) -> (Self, Self) {
        f64::sin_cos(*self)
    }
    fn floor(&self) -> Self {
        f64::floor(*self)
    }
    fn round(&self) -> Self {
        f64::round(*self)
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn epsilon() -> Self {
        f64::EPSILON
    }
    fn default_newton_tol() -> Self {
        1e-12
    }
}

/// MPFR float with `BITS` bits of significand.
#[derive(Clone, PartialEq, PartialOrd)]
pub struct Mp<const BITS: u32>(pub Float);

/// Working precision used for long-horizon orbit and manifold runs.
pub type Precise = Mp<512>;

impl<const BITS: u32> Mp<BITS> {
    pub fn inner(&self) -> &Float {
        &self.0
    }
}

impl<const BITS: u32> fmt::Debug for Mp<BITS> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mp<{}>({})", BITS, self.0.to_string_radix(10, Some(40)))
    }
}

impl<const BITS: u32> fmt::Display for Mp<BITS> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

macro_rules! mp_binop {
    ($tr:ident, $method:ident) => {
        impl<const BITS: u32> $tr for Mp<BITS> {
            type Output = Self;
            #[inline]
            fn $method(self, rhs: Self) -> Self {
                Mp($tr::$method(self.0, rhs.0))
            }
        }
        impl<const BITS: u32> $tr<f64> for Mp<BITS> {
            type Output = Self;
            #[inline]
            fn $method(self, rhs: f64) -> Self {
                Mp($tr::$method(self.0, rhs))
            }
        }
    };
}

mp_binop!(Add, add);
mp_binop!(Sub, sub);
mp_binop!(Mul, mul);
mp_binop!(Div, div);

impl<const BITS: u32> Neg for Mp<BITS> {
    type Output = Self;
    fn neg(self) -> Self {
        Mp(-self.0)
    }
}

impl<const BITS: u32> Real for Mp<BITS> {
    const MANTISSA_BITS: u32 = BITS;

    fn from_f64(x: f64) -> Self {
        Mp(Float::with_val(BITS, x))
    }
    fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }
    fn ratio(num: i64, den: i64) -> Self {
        Mp(Float::with_val(BITS, num) / den)
    }
    fn pi() -> Self {
        Mp(Float::with_val(BITS, Constant::Pi))
    }
    fn sqrt(&self) -> Self {
        Mp(self.0.clone().sqrt())
    }
    fn abs(&self) -> Self {
        Mp(self.0.clone().abs())
    }
    fn sin_cos(&self) -> (Self, Self) {
        let (s, c) = self.0.clone().sin_cos(Float::new(BITS));
        (Mp(s), Mp(c))
    }
    fn floor(&self) -> Self {
        Mp(self.0.clone().floor())
    }
    fn round(&self) -> Self {
        Mp(self.0.clone().round())
    }
    fn is_finite(&self) -> bool {
        self.0.is_finite()
    }
    fn epsilon() -> Self {
        Mp(Float::with_val(BITS, Float::u_exp(1, 1 - BITS as i32)))
    }
    fn default_newton_tol() -> Self {
        Mp(Float::with_val(BITS, Float::u_exp(1, 24 - BITS as i32)))
    }
}
