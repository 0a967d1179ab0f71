//! Dense univariate polynomials, used for piecewise-polynomial trajectories.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct UPoly<S> {
    coeffs: Vec<S>,
}

impl<S: Scalar> UPoly<S> {
    pub fn zero() -> Self {
        UPoly { coeffs: Vec::new() }
    }

    pub fn constant(c: S) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `c t^k`.
    pub fn monomial(c: S, k: usize) -> Self {
        let mut v = vec![S::zero(); k + 1];
        v[k] = c;
        Self::new(v)
    }

    pub fn new(mut coeffs: Vec<S>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        UPoly { coeffs }
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, t: &S) -> S {
        self.coeffs
            .iter()
            .rev()
            .fold(S::zero(), |acc, c| acc * t.clone() + c.clone())
    }

    pub fn scale(&self, c: &S) -> Self {
        Self::new(self.coeffs.iter().map(|x| x.clone() * c.clone()).collect())
    }

    /// Antiderivative vanishing at 0.
    pub fn integral(&self) -> Self {
        let mut v = Vec::with_capacity(self.coeffs.len() + 1);
        v.push(S::zero());
        for (k, c) in self.coeffs.iter().enumerate() {
            v.push(c.clone() / S::from_i64(k as i64 + 1));
        }
        Self::new(v)
    }

    /// `∫_a^b p`.
    pub fn integrate(&self, a: &S, b: &S) -> S {
        let f = self.integral();
        f.eval(b) - f.eval(a)
    }

    pub fn pow(&self, k: usize) -> Self {
        (0..k).fold(Self::constant(S::one()), |acc, _| &acc * self)
    }

    /// `p(a t + b)`.
    pub fn compose_affine(&self, a: &S, b: &S) -> Self {
        let lin = Self::new(vec![b.clone(), a.clone()]);
        self.coeffs
            .iter()
            .rev()
            .fold(Self::zero(), |acc, c| &(&acc * &lin) + &Self::constant(c.clone()))
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> UPoly<T> {
        UPoly::new(self.coeffs.iter().map(f).collect())
    }
}

impl<S: Scalar> fmt::Display for UPoly<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{}", c.render())?,
                1 => write!(f, "({}) t", c.render())?,
                _ => write!(f, "({}) t^{k}", c.render())?,
            }
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

impl<S: Scalar> Add for &UPoly<S> {
    type Output = UPoly<S>;
    fn add(self, rhs: Self) -> UPoly<S> {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let get = |v: &[S], i: usize| v.get(i).cloned().unwrap_or_else(S::zero);
        UPoly::new((0..n).map(|i| get(&self.coeffs, i) + get(&rhs.coeffs, i)).collect())
    }
}

impl<S: Scalar> Sub for &UPoly<S> {
    type Output = UPoly<S>;
    fn sub(self, rhs: Self) -> UPoly<S> {
        self + &(-rhs)
    }
}

impl<S: Scalar> Neg for &UPoly<S> {
    type Output = UPoly<S>;
    fn neg(self) -> UPoly<S> {
        UPoly::new(self.coeffs.iter().map(|c| -c.clone()).collect())
    }
}

impl<S: Scalar> Mul for &UPoly<S> {
    type Output = UPoly<S>;
    fn mul(self, rhs: Self) -> UPoly<S> {
        if self.is_zero() || rhs.is_zero() {
            return UPoly::zero();
        }
        let mut v = vec![S::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                v[i + j] = v[i + j].clone() + a.clone() * b.clone();
            }
        }
        UPoly::new(v)
    }
}
