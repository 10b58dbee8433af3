//! Two arithmetic backends behind one trait: complex doubles and exact complex rationals.

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub type C64 = Complex<f64>;
/// Exact Gaussian rationals.
pub type CQ = Complex<BigRational>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Float,
    Exact,
}

/// Field operations plus the handful of constructors the formulas need.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + for<'a> Add<&'a Self, Output = Self>
    + for<'a> Mul<&'a Self, Output = Self>
    + 'static
{
    const EXACT: bool;

    fn from_i64(v: i64) -> Self;

    fn from_frac(num: i64, den: i64) -> Self;

    fn from_gaussian(re: i64, im: i64) -> Self;

    /// Nearest representable value. Exact backends only accept finite dyadic doubles.
    fn from_c64(v: C64) -> Self;

    /// The imaginary unit.
    fn imag_unit() -> Self {
        Self::from_gaussian(0, 1)
    }

    fn to_c64(&self) -> C64;

    /// Exact textual form, `None` for the float backend.
    fn exact_repr(&self) -> Option<String>;

    fn conj(&self) -> Self;

    /// `i^k` for any integer `k`.
    fn i_pow(k: i64) -> Self {
        match k.rem_euclid(4) {
            0 => Self::one(),
            1 => Self::imag_unit(),
            2 => -Self::one(),
            _ => -Self::imag_unit(),
        }
    }

    fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..k {
            acc = acc * self;
        }
        acc
    }

    fn scale_i64(&self, k: i64) -> Self {
        self.clone() * Self::from_i64(k)
    }
}

impl Scalar for C64 {
    const EXACT: bool = false;

    fn from_i64(v: i64) -> Self {
        Complex::new(v as f64, 0.0)
    }

    fn from_frac(num: i64, den: i64) -> Self {
        Complex::new(num as f64 / den as f64, 0.0)
    }

    fn from_gaussian(re: i64, im: i64) -> Self {
        Complex::new(re as f64, im as f64)
    }

    fn from_c64(v: C64) -> Self {
        v
    }

    fn to_c64(&self) -> C64 {
        *self
    }

    fn exact_repr(&self) -> Option<String> {
        None
    }

    fn conj(&self) -> Self {
        Complex::conj(self)
    }
}

impl Scalar for CQ {
    const EXACT: bool = true;

    fn from_i64(v: i64) -> Self {
        Complex::new(BigRational::from_integer(BigInt::from(v)), BigRational::zero())
    }

    fn from_frac(num: i64, den: i64) -> Self {
        Complex::new(BigRational::new(BigInt::from(num), BigInt::from(den)), BigRational::zero())
    }

    fn from_gaussian(re: i64, im: i64) -> Self {
        Complex::new(
            BigRational::from_integer(BigInt::from(re)),
            BigRational::from_integer(BigInt::from(im)),
        )
    }

    fn from_c64(v: C64) -> Self {
        let re = BigRational::from_float(v.re).unwrap_or_else(BigRational::zero);
        let im = BigRational::from_float(v.im).unwrap_or_else(BigRational::zero);
        Complex::new(re, im)
    }

    fn to_c64(&self) -> C64 {
        Complex::new(self.re.to_f64().unwrap_or(f64::NAN), self.im.to_f64().unwrap_or(f64::NAN))
    }

    fn exact_repr(&self) -> Option<String> {
        Some(if self.im.is_zero() {
            self.re.to_string()
        } else if self.re.is_zero() {
            format!("{}i", self.im)
        } else if self.im.is_negative() {
            format!("{}-{}i", self.re, -self.im.clone())
        } else {
            format!("{}+{}i", self.re, self.im)
        })
    }

    fn conj(&self) -> Self {
        Complex::new(self.re.clone(), -self.im.clone())
    }
}

/// `|a - b| / max(|a|, |b|)`, or the absolute difference when both are tiny.
pub fn rel_err(a: C64, b: C64) -> f64 {
    let diff = (a - b).norm();
    let scale = a.norm().max(b.norm());
    if scale < 1e-300 {
        diff
    } else {
        diff / scale
    }
}

/// Same as [`rel_err`] but falls back to the absolute error below `floor`.
pub fn mixed_err(a: C64, b: C64, floor: f64) -> f64 {
    let diff = (a - b).norm();
    let scale = a.norm().max(b.norm());
    if scale < floor {
        diff
    } else {
        diff / scale
    }
}
