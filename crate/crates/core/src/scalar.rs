//! Coefficient fields for the truncated free algebra.
//!
//! Symbolic work runs over exact rationals ([`Rational`]) or Gaussian
//! rationals ([`GaussRational`]). The numerical search reuses the same
//! generic code over `f64` and [`Complex64`].

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision rational, always in lowest terms with positive denominator.
pub type Rational = BigRational;

/// Gaussian rational `a + b i` with exact rational parts.
pub type GaussRational = Complex<BigRational>;

/// A field element usable as a polynomial coefficient.
pub trait Scalar:
    Clone
    + PartialEq
    + Debug
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    /// Short name of the scalar kind, used in diagnostics.
    const KIND: &'static str;

    fn from_rational(r: &Rational) -> Self;

    /// Human-readable rendering (`3/4`, `1/2+1/6i`, `0.25`).
    fn render(&self) -> String;

    fn from_i64(n: i64) -> Self {
        Self::from_rational(&Rational::from_integer(BigInt::from(n)))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_rational(&Rational::new(BigInt::from(num), BigInt::from(den)))
    }
}

/// Scalars with decidable exact equality (no rounding anywhere).
pub trait ExactScalar: Scalar + Eq + std::hash::Hash {
    fn from_gauss(z: &GaussRational) -> Option<Self>;
    fn to_gauss(&self) -> GaussRational;
}

impl Scalar for Rational {
    const KIND: &'static str = "rational";
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn render(&self) -> String {
        format_rational(self)
    }
}

impl ExactScalar for Rational {
    fn from_gauss(z: &GaussRational) -> Option<Self> {
        z.im.is_zero().then(|| z.re.clone())
    }
    fn to_gauss(&self) -> GaussRational {
        Complex::new(self.clone(), Rational::zero())
    }
}

impl Scalar for GaussRational {
    const KIND: &'static str = "gaussian-rational";
    fn from_rational(r: &Rational) -> Self {
        Complex::new(r.clone(), Rational::zero())
    }
    fn render(&self) -> String {
        format_gauss(self)
    }
}

impl ExactScalar for GaussRational {
    fn from_gauss(z: &GaussRational) -> Option<Self> {
        Some(z.clone())
    }
    fn to_gauss(&self) -> GaussRational {
        self.clone()
    }
}

impl Scalar for f64 {
    const KIND: &'static str = "f64";
    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r)
    }
    fn render(&self) -> String {
        format!("{self:e}")
    }
}

impl Scalar for Complex64 {
    const KIND: &'static str = "complex64";
    fn from_rational(r: &Rational) -> Self {
        Complex64::new(rational_to_f64(r), 0.0)
    }
    fn render(&self) -> String {
        format!("({:e}{:+e}i)", self.re, self.im)
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // huge numerator/denominator: divide in floating point after scaling
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

pub fn gauss_to_c64(z: &GaussRational) -> Complex64 {
    Complex64::new(rational_to_f64(&z.re), rational_to_f64(&z.im))
}

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Formats `3/4`, `-2`, `0`.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Formats a Gaussian rational as `a`, `bi`, `a+bi` or `a-bi`.
pub fn format_gauss(z: &GaussRational) -> String {
    if z.im.is_zero() {
        return format_rational(&z.re);
    }
    let im = if z.im.abs().is_one() {
        String::new()
    } else {
        format_rational(&z.im.abs())
    };
    let sign = if z.im.is_negative() { "-" } else { "+" };
    if z.re.is_zero() {
        let lead = if z.im.is_negative() { "-" } else { "" };
        format!("{lead}{im}i")
    } else {
        format!("{}{sign}{im}i", format_rational(&z.re))
    }
}

/// Parses `7`, `-3/4`, `0.125` (finite decimals are exact).
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse {
        line: 0,
        column: 0,
        message: format!("invalid rational `{s}`"),
    };
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((ip, fp)) = s.split_once('.') {
        let neg = ip.trim_start().starts_with('-');
        let ip = ip.trim_start_matches(['-', '+']);
        if !fp.chars().all(|c| c.is_ascii_digit()) || fp.is_empty() {
            return Err(bad());
        }
        let ip: BigInt = if ip.is_empty() {
            BigInt::zero()
        } else {
            ip.parse().map_err(|_| bad())?
        };
        let fv: BigInt = fp.parse().map_err(|_| bad())?;
        let scale = num_traits::pow(BigInt::from(10), fp.len());
        let v = Rational::new(ip * &scale + fv, scale);
        return Ok(if neg { -v } else { v });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(n))
}

/// Parses `1/2`, `1/6i`, `1/2+1/6i`, `-i`, `3-2i`.
pub fn parse_gauss(s: &str) -> Result<GaussRational> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if !t.ends_with('i') {
        return Ok(Complex::new(parse_rational(&t)?, Rational::zero()));
    }
    let body = &t[..t.len() - 1];
    // the imaginary part starts at the last sign that is not leading
    let split = body
        .char_indices()
        .filter(|&(i, c)| i > 0 && (c == '+' || c == '-'))
        .map(|(i, _)| i)
        .last();
    let (re, im) = match split {
        Some(i) => (&body[..i], &body[i..]),
        None => ("", body),
    };
    let im = match im {
        "" | "+" => Rational::one(),
        "-" => -Rational::one(),
        x => parse_rational(x)?,
    };
    let re = if re.is_empty() {
        Rational::zero()
    } else {
        parse_rational(re)?
    };
    Ok(Complex::new(re, im))
}

/// Modulus bound `|re| + |im|`, used for the control norm.
pub fn gauss_abs1(z: &GaussRational) -> Rational {
    z.re.abs() + z.im.abs()
}
