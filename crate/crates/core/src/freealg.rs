//! Truncated free associative algebra `A^N(X)` over `X = {X0, ..., Xm}`.
//!
//! A [`Polynomial`] keeps one hash map per degree, so products only visit
//! degree pairs `(i, j)` with `i + j <= N`. Zero coefficients are purged after
//! every operation, which makes equality structural.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A noncommutative monomial: a sequence of generator indices.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn new(letters: Vec<u8>) -> Self {
        Word(letters)
    }

    pub fn letter(i: u8) -> Self {
        Word(vec![i])
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = Vec::with_capacity(self.0.len() + other.0.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn reversed(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    /// Number of occurrences of generator `j`.
    pub fn count(&self, j: u8) -> usize {
        self.0.iter().filter(|&&l| l == j).count()
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        let wide = self.0.iter().any(|&l| l > 9);
        for (k, l) in self.0.iter().enumerate() {
            if wide && k > 0 {
                f.write_str(".")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Word {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "1" || s.is_empty() {
            return Ok(Word::empty());
        }
        let letters: Result<Vec<u8>> = if s.contains('.') {
            s.split('.')
                .map(|t| t.parse().map_err(|_| Error::Domain(format!("bad word `{s}`"))))
                .collect()
        } else {
            s.chars()
                .map(|c| {
                    c.to_digit(10)
                        .map(|d| d as u8)
                        .ok_or_else(|| Error::Domain(format!("bad word `{s}`")))
                })
                .collect()
        };
        Ok(Word(letters?))
    }
}

/// Element of `A^N(X)`: a finite map `Word -> S` with every word of degree at most `N`.
#[derive(Clone, PartialEq)]
pub struct Polynomial<S> {
    generators: usize,
    truncation: usize,
    buckets: Vec<HashMap<Word, S>>,
}

impl<S: Scalar> Polynomial<S> {
    pub fn zero(generators: usize, truncation: usize) -> Self {
        assert!(generators >= 1 && generators <= 256, "generator count out of range");
        Polynomial {
            generators,
            truncation,
            buckets: vec![HashMap::new(); truncation + 1],
        }
    }

    pub fn constant(c: S, generators: usize, truncation: usize) -> Self {
        let mut p = Self::zero(generators, truncation);
        p.add_term(Word::empty(), c);
        p
    }

    pub fn one(generators: usize, truncation: usize) -> Self {
        Self::constant(S::one(), generators, truncation)
    }

    /// The generator `X_i` (zero when `N = 0`).
    pub fn letter(i: usize, generators: usize, truncation: usize) -> Self {
        assert!(i < generators, "letter X{i} out of range");
        let mut p = Self::zero(generators, truncation);
        p.add_term(Word::letter(i as u8), S::one());
        p
    }

    /// Builds `π_N(Σ c·w)`; words longer than `N` are discarded.
    pub fn from_terms<I>(generators: usize, truncation: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Word, S)>,
    {
        let mut p = Self::zero(generators, truncation);
        for (w, c) in terms {
            if let Some(&l) = w.letters().iter().find(|&&l| l as usize >= generators) {
                return Err(Error::Domain(format!(
                    "letter {l} out of range for {generators} generators"
                )));
            }
            p.add_term(w, c);
        }
        Ok(p)
    }

    pub fn generators(&self) -> usize {
        self.generators
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn is_zero(&self) -> bool {
        self.buckets.iter().all(HashMap::is_empty)
    }

    pub fn len(&self) -> usize {
        self.buckets.iter().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    pub fn coeff(&self, w: &Word) -> S {
        self.buckets
            .get(w.degree())
            .and_then(|b| b.get(w))
            .cloned()
            .unwrap_or_else(S::zero)
    }

    pub fn constant_term(&self) -> S {
        self.coeff(&Word::empty())
    }

    /// Terms of degree `n` (unordered).
    pub fn bucket(&self, n: usize) -> impl Iterator<Item = (&Word, &S)> {
        self.buckets.get(n).into_iter().flat_map(|b| b.iter())
    }

    /// All terms sorted by degree then word.
    pub fn terms(&self) -> Vec<(&Word, &S)> {
        let mut out = Vec::with_capacity(self.len());
        for b in &self.buckets {
            let mut v: Vec<_> = b.iter().collect();
            v.sort_by(|a, b| a.0.cmp(b.0));
            out.extend(v);
        }
        out
    }

    /// Lowest degree carrying a nonzero coefficient.
    pub fn valuation(&self) -> Option<usize> {
        self.buckets.iter().position(|b| !b.is_empty())
    }

    pub fn is_homogeneous_of(&self, n: usize) -> bool {
        self.buckets
            .iter()
            .enumerate()
            .all(|(d, b)| d == n || b.is_empty())
    }

    fn add_term(&mut self, w: Word, c: S) {
        let d = w.degree();
        if d > self.truncation {
            return;
        }
        let bucket = &mut self.buckets[d];
        match bucket.get_mut(&w) {
            Some(v) => {
                let nv = v.clone() + c;
                if nv.is_zero() {
                    bucket.remove(&w);
                } else {
                    *v = nv;
                }
            }
            None => {
                if !c.is_zero() {
                    bucket.insert(w, c);
                }
            }
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.truncation != other.truncation {
            return Err(Error::Contract(format!(
                "truncation degrees differ ({} vs {})",
                self.truncation, other.truncation
            )));
        }
        if self.generators != other.generators {
            return Err(Error::Contract(format!(
                "generator counts differ ({} vs {})",
                self.generators, other.generators
            )));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for b in &other.buckets {
            for (w, c) in b {
                out.add_term(w.clone(), c.clone());
            }
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.checked_add(&other.neg_ref())
    }

    /// `π_N(a b)`.
    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let n = self.truncation;
        let mut out = Self::zero(self.generators, n);
        for (i, bi) in self.buckets.iter().enumerate() {
            if bi.is_empty() {
                continue;
            }
            for (j, bj) in other.buckets.iter().enumerate().take(n - i + 1) {
                for (wa, ca) in bi {
                    for (wb, cb) in bj {
                        let _ = j;
                        out.add_term(wa.concat(wb), ca.clone() * cb.clone());
                    }
                }
            }
        }
        Ok(out)
    }

    /// `[a, b] = ab - ba`, truncated.
    pub fn bracket(&self, other: &Self) -> Result<Self> {
        self.checked_mul(other)?.checked_sub(&other.checked_mul(self)?)
    }

    pub fn scale(&self, c: &S) -> Self {
        if c.is_zero() {
            return Self::zero(self.generators, self.truncation);
        }
        let mut out = self.clone();
        for b in &mut out.buckets {
            for v in b.values_mut() {
                *v = v.clone() * c.clone();
            }
            b.retain(|_, v| !v.is_zero());
        }
        out
    }

    fn neg_ref(&self) -> Self {
        let mut out = self.clone();
        for b in &mut out.buckets {
            for v in b.values_mut() {
                *v = -v.clone();
            }
        }
        out
    }

    /// `exp_N(s)`; `s` must have zero constant term.
    pub fn exp(&self) -> Result<Self> {
        if !self.constant_term().is_zero() {
            return Err(Error::Domain(
                "exp_N requires a zero constant term".to_string(),
            ));
        }
        let mut result = Self::one(self.generators, self.truncation);
        let mut term = result.clone();
        for k in 1..=self.truncation {
            term = term.checked_mul(self)?.scale(&(S::one() / S::from_i64(k as i64)));
            if term.is_zero() {
                break;
            }
            result = result.checked_add(&term)?;
        }
        Ok(result)
    }

    /// `log_N(p)`; `p` must have constant term 1.
    pub fn log(&self) -> Result<Self> {
        if self.constant_term() != S::one() {
            return Err(Error::Domain(
                "log_N requires constant term 1".to_string(),
            ));
        }
        let x = self.checked_sub(&Self::one(self.generators, self.truncation))?;
        let mut result = Self::zero(self.generators, self.truncation);
        let mut power = x.clone();
        for k in 1..=self.truncation {
            if power.is_zero() {
                break;
            }
            let c = S::from_ratio(if k % 2 == 1 { 1 } else { -1 }, k as i64);
            result = result.checked_add(&power.scale(&c))?;
            power = power.checked_mul(&x)?;
        }
        Ok(result)
    }

    /// Homogeneous component of degree `n`.
    pub fn grade(&self, n: usize) -> Result<Self> {
        if n > self.truncation {
            return Err(Error::Domain(format!(
                "degree {n} exceeds truncation {}",
                self.truncation
            )));
        }
        let mut out = Self::zero(self.generators, self.truncation);
        out.buckets[n] = self.buckets[n].clone();
        Ok(out)
    }

    /// Re-embeds into `A^M(X)`: drops degrees above `M` when shrinking.
    pub fn with_truncation(&self, m: usize) -> Self {
        let mut out = Self::zero(self.generators, m);
        for (d, b) in self.buckets.iter().enumerate().take(m + 1) {
            out.buckets[d] = b.clone();
        }
        out
    }

    /// Image under the word-reversal antiautomorphism `w ↦ reverse(w)`.
    pub fn reversed(&self) -> Self {
        let mut out = Self::zero(self.generators, self.truncation);
        for b in &self.buckets {
            for (w, c) in b {
                out.add_term(w.reversed(), c.clone());
            }
        }
        out
    }

    pub fn map_coeffs<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Polynomial<T> {
        let mut out = Polynomial::<T>::zero(self.generators, self.truncation);
        for b in &self.buckets {
            for (w, c) in b {
                out.add_term(w.clone(), f(c));
            }
        }
        out
    }
}

/// `π_N(a b)`; errors on mismatched truncation or generator count.
pub fn mul_truncated<S: Scalar>(a: &Polynomial<S>, b: &Polynomial<S>) -> Result<Polynomial<S>> {
    a.checked_mul(b)
}

pub fn bracket<S: Scalar>(a: &Polynomial<S>, b: &Polynomial<S>) -> Result<Polynomial<S>> {
    a.bracket(b)
}

pub fn exp_truncated<S: Scalar>(s: &Polynomial<S>) -> Result<Polynomial<S>> {
    s.exp()
}

pub fn log_truncated<S: Scalar>(p: &Polynomial<S>) -> Result<Polynomial<S>> {
    p.log()
}

pub fn grade<S: Scalar>(p: &Polynomial<S>, n: usize) -> Result<Polynomial<S>> {
    p.grade(n)
}

// Operator forms panic on incompatible operands, like shape mismatches in
// array libraries; use the `checked_*` methods to get a `Result`.

impl<S: Scalar> Add for &Polynomial<S> {
    type Output = Polynomial<S>;
    fn add(self, rhs: Self) -> Polynomial<S> {
        self.checked_add(rhs).expect("polynomial addition")
    }
}

impl<S: Scalar> Sub for &Polynomial<S> {
    type Output = Polynomial<S>;
    fn sub(self, rhs: Self) -> Polynomial<S> {
        self.checked_sub(rhs).expect("polynomial subtraction")
    }
}

impl<S: Scalar> Mul for &Polynomial<S> {
    type Output = Polynomial<S>;
    fn mul(self, rhs: Self) -> Polynomial<S> {
        self.checked_mul(rhs).expect("polynomial product")
    }
}

impl<S: Scalar> Neg for &Polynomial<S> {
    type Output = Polynomial<S>;
    fn neg(self) -> Polynomial<S> {
        self.neg_ref()
    }
}

impl<S: Scalar> fmt::Display for Polynomial<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self.terms();
        if terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (w, c)) in terms.into_iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            if w.degree() == 0 {
                write!(f, "{}", c.render())?;
            } else if c.is_one() {
                write!(f, "\"{w}\"")?;
            } else {
                write!(f, "({})\"{w}\"", c.render())?;
            }
        }
        Ok(())
    }
}

impl<S: Scalar> fmt::Debug for Polynomial<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial[N={}]({self})", self.truncation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, Rational};
    use proptest::prelude::*;

    type P = Polynomial<Rational>;

    fn x(i: usize, n: usize) -> P {
        P::letter(i, 2, n)
    }

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn product_truncates() {
        let one = P::one(2, 1);
        let a = &one + &x(0, 1);
        let b = &one + &x(1, 1);
        let expected = &(&one + &x(0, 1)) + &x(1, 1);
        assert_eq!(&a * &b, expected);
    }

    #[test]
    fn monomial_concatenation() {
        let p = &x(0, 2) * &x(1, 2);
        assert_eq!(p.len(), 1);
        assert_eq!(p.coeff(&w("01")), rat(1, 1));
    }

    #[test]
    fn exp_product_cross_term() {
        // (1 + A + A²/2)(1 + B + B²/2) has AB coefficient 1
        let ea = x(0, 3).exp().unwrap();
        let eb = x(1, 3).exp().unwrap();
        assert_eq!((&ea * &eb).coeff(&w("01")), rat(1, 1));
        assert_eq!((&ea * &eb).coeff(&w("10")), rat(0, 1));
    }

    #[test]
    fn bracket_examples() {
        assert!(x(0, 2).bracket(&x(0, 2)).unwrap().is_zero());
        let b = x(1, 2).bracket(&x(0, 2)).unwrap();
        assert_eq!(b.coeff(&w("10")), rat(1, 1));
        assert_eq!(b.coeff(&w("01")), rat(-1, 1));
        assert_eq!(b.len(), 2);

        let bb = x(1, 3).bracket(&x(0, 3)).unwrap().bracket(&x(0, 3)).unwrap();
        let expected = P::from_terms(
            2,
            3,
            [(w("100"), rat(1, 1)), (w("010"), rat(-2, 1)), (w("001"), rat(1, 1))],
        )
        .unwrap();
        assert_eq!(bb, expected);
    }

    #[test]
    fn exp_examples() {
        assert_eq!(P::zero(2, 4).exp().unwrap(), P::one(2, 4));
        let e = x(0, 2).exp().unwrap();
        let expected = P::from_terms(
            2,
            2,
            [(Word::empty(), rat(1, 1)), (w("0"), rat(1, 1)), (w("00"), rat(1, 2))],
        )
        .unwrap();
        assert_eq!(e, expected);
    }

    #[test]
    fn log_examples() {
        assert!(P::one(2, 5).log().unwrap().is_zero());
        for n in 1..=6 {
            let p = &P::one(2, n) + &x(1, n);
            assert_eq!(p.log().unwrap().exp().unwrap(), p);
        }
    }

    #[test]
    fn bch_degree_three() {
        let n = 3;
        let a = x(0, n);
        let b = x(1, n);
        let z = (&a.exp().unwrap() * &b.exp().unwrap()).log().unwrap();
        let ab = a.bracket(&b).unwrap();
        let aab = a.bracket(&ab).unwrap();
        let bba = b.bracket(&b.bracket(&a).unwrap()).unwrap();
        let expected = &(&(&(&a + &b) + &ab.scale(&rat(1, 2))) + &aab.scale(&rat(1, 12)))
            + &bba.scale(&rat(1, 12));
        assert_eq!(z, expected);
    }

    #[test]
    fn domain_errors() {
        let p = P::one(2, 3);
        assert!(matches!(p.exp(), Err(Error::Domain(_))));
        assert!(matches!(x(0, 3).log(), Err(Error::Domain(_))));
        assert!(matches!(p.grade(4), Err(Error::Domain(_))));
        assert!(matches!(
            P::one(2, 3).checked_mul(&P::one(2, 4)),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            P::one(2, 3).checked_mul(&P::one(3, 3)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn grading() {
        let one = P::one(2, 3);
        let p = &(&one + &x(0, 3)) + &(&x(0, 3) * &x(1, 3));
        assert_eq!(p.grade(2).unwrap(), &x(0, 3) * &x(1, 3));
        assert_eq!(p.grade(0).unwrap(), one);
        let sum = (0..=3).fold(P::zero(2, 3), |acc, n| &acc + &p.grade(n).unwrap());
        assert_eq!(sum, p);
    }

    fn arb_poly(n: usize, zero_constant: bool) -> impl Strategy<Value = P> {
        let words: Vec<Word> = (0..=n)
            .flat_map(|d| {
                (0..(1usize << d)).map(move |k| {
                    Word::new((0..d).map(|i| ((k >> (d - 1 - i)) & 1) as u8).collect())
                })
            })
            .collect();
        let len = words.len();
        proptest::collection::vec((-3i64..=3, 1i64..=3), len).prop_map(move |cs| {
            let terms = words.iter().cloned().zip(cs).filter_map(|(w, (a, b))| {
                // keep the polynomials sparse so products stay cheap
                if (a + b) % 2 == 0 || (zero_constant && w.degree() == 0) {
                    None
                } else {
                    Some((w, rat(a, b)))
                }
            });
            P::from_terms(2, n, terms).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn associativity(a in arb_poly(4, false), b in arb_poly(4, false), c in arb_poly(4, false)) {
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        }

        #[test]
        fn truncation_is_a_morphism(a in arb_poly(5, false), b in arb_poly(5, false)) {
            let lo = 3;
            prop_assert_eq!((&a * &b).with_truncation(lo), &a.with_truncation(lo) * &b.with_truncation(lo));
        }

        #[test]
        fn exp_log_inverse(s in arb_poly(5, true)) {
            prop_assert_eq!(s.exp().unwrap().log().unwrap(), s.clone());
            let p = &P::one(2, 5) + &s;
            prop_assert_eq!(p.log().unwrap().exp().unwrap(), p);
        }

        #[test]
        fn jacobi(a in arb_poly(3, false), b in arb_poly(3, false), c in arb_poly(3, false)) {
            let t1 = a.bracket(&b.bracket(&c).unwrap()).unwrap();
            let t2 = c.bracket(&a.bracket(&b).unwrap()).unwrap();
            let t3 = b.bracket(&c.bracket(&a).unwrap()).unwrap();
            prop_assert!((&(&t1 + &t2) + &t3).is_zero());
        }

        #[test]
        fn bracket_antisymmetric(a in arb_poly(4, false), b in arb_poly(4, false)) {
            prop_assert_eq!(a.bracket(&b).unwrap(), -&b.bracket(&a).unwrap());
        }
    }
}
