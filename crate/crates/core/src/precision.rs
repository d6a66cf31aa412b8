//! Scalar fields for the flows and amplitude formulas: plain double-precision
//! complex numbers and an arbitrary-precision complex type.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use dashu_base::SquareRoot;
use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use num_complex::Complex64;

/// Binary floating-point number with a configurable significand width.
pub type BigFloat = FBig<HalfEven, 2>;

/// Complex arithmetic shared by the double and extended-precision paths.
pub trait Field:
    Clone
    + fmt::Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    /// Converts `v` into a value carrying the same working precision as `self`.
    fn lift_like(&self, v: Complex64) -> Self;
    fn to_c64(&self) -> Complex64;
    fn is_zero(&self) -> bool;
    fn conj(&self) -> Self;

    fn norm_f64(&self) -> f64 {
        self.to_c64().norm()
    }

    fn is_finite(&self) -> bool {
        let c = self.to_c64();
        c.re.is_finite() && c.im.is_finite()
    }

    fn real_like(&self, x: f64) -> Self {
        self.lift_like(Complex64::new(x, 0.0))
    }
}

impl Field for Complex64 {
    #[inline]
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    #[inline]
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    #[inline]
    fn lift_like(&self, v: Complex64) -> Self {
        v
    }
    #[inline]
    fn to_c64(&self) -> Complex64 {
        *self
    }
    #[inline]
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    #[inline]
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    #[inline]
    fn norm_f64(&self) -> f64 {
        self.norm()
    }
}

fn big_from_f64(x: f64, bits: usize) -> BigFloat {
    let v = BigFloat::try_from(x).expect("finite value required for extended precision");
    v.with_precision(bits).value()
}

/// Complex number with [`BigFloat`] parts.
#[derive(Clone, PartialEq)]
pub struct BigComplex {
    pub re: BigFloat,
    pub im: BigFloat,
}

impl BigComplex {
    /// Lifts a double-precision value to `bits` significand bits. Panics on
    /// non-finite input.
    pub fn from_c64(v: Complex64, bits: usize) -> Self {
        Self { re: big_from_f64(v.re, bits), im: big_from_f64(v.im, bits) }
    }

    pub fn precision(&self) -> usize {
        self.re.precision().max(self.im.precision())
    }

    pub fn norm_sqr(&self) -> BigFloat {
        &self.re * &self.re + &self.im * &self.im
    }
}

impl fmt::Debug for BigComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BigComplex({} + {}i)", self.re, self.im)
    }
}

impl Add for BigComplex {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self { re: self.re + rhs.re, im: self.im + rhs.im }
    }
}

impl Sub for BigComplex {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self { re: self.re - rhs.re, im: self.im - rhs.im }
    }
}

impl Mul for BigComplex {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self {
            re: &self.re * &rhs.re - &self.im * &rhs.im,
            im: &self.re * &rhs.im + &self.im * &rhs.re,
        }
    }
}

impl Div for BigComplex {
    type Output = Self;
    /// Panics when `rhs` is exactly zero; callers check denominators first.
    fn div(self, rhs: Self) -> Self {
        let d = rhs.norm_sqr();
        Self {
            re: (&self.re * &rhs.re + &self.im * &rhs.im) / &d,
            im: (&self.im * &rhs.re - &self.re * &rhs.im) / &d,
        }
    }
}

impl Neg for BigComplex {
    type Output = Self;
    fn neg(self) -> Self {
        Self { re: -self.re, im: -self.im }
    }
}

impl Field for BigComplex {
    fn zero() -> Self {
        Self { re: BigFloat::ZERO, im: BigFloat::ZERO }
    }
    fn one() -> Self {
        Self { re: BigFloat::ONE, im: BigFloat::ZERO }
    }
    fn lift_like(&self, v: Complex64) -> Self {
        Self::from_c64(v, self.precision().max(53))
    }
    fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64().value(), self.im.to_f64().value())
    }
    fn is_zero(&self) -> bool {
        self.re.repr().is_zero() && self.im.repr().is_zero()
    }
    fn conj(&self) -> Self {
        Self { re: self.re.clone(), im: -self.im.clone() }
    }
}

/// The `m` points `e^{iπ(2j+1)/m}`, `j = 0..m`, computed to `bits` bits.
/// `m` must be a power of two no smaller than 4.
pub fn half_offset_roots_of_unity(m: usize, bits: usize) -> Vec<BigComplex> {
    assert!(m >= 4 && m.is_power_of_two(), "node count must be a power of two ≥ 4");
    let half = big_from_f64(0.5, bits);
    // e^{iπ/2} halved down to e^{iπ/m}
    let (mut c, mut s) = (big_from_f64(0.0, bits), big_from_f64(1.0, bits));
    let mut angle_den = 2usize;
    while angle_den < m {
        let c_half = ((BigFloat::ONE + &c) * &half).sqrt();
        s = s / (&c_half * big_from_f64(2.0, bits));
        c = c_half;
        angle_den *= 2;
    }
    let first = BigComplex { re: c, im: s };
    let step = first.clone() * first.clone();
    let mut out = Vec::with_capacity(m);
    let mut cur = first;
    for _ in 0..m {
        out.push(cur.clone());
        cur = cur * step.clone();
    }
    out
}
