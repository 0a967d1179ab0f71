//! Dense truncated series over two letters with complex float coefficients.
//!
//! Word `a_1 ... a_d` lives at `2^d - 1 + bits(a_1 ... a_d)`, first letter most
//! significant. This is the hot path of the numerical search.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::freealg::{Polynomial, Word};
use crate::hall::HallBasis;
use crate::scalar::{rational_to_f64, Rational};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn offset(d: usize) -> usize {
    (1 << d) - 1
}

pub fn word_index(w: &Word) -> usize {
    let bits = w.letters().iter().fold(0usize, |acc, &l| (acc << 1) | l as usize);
    offset(w.degree()) + bits
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseSeries {
    n: usize,
    data: Vec<Complex64>,
}

impl DenseSeries {
    pub fn zero(n: usize) -> Self {
        DenseSeries {
            n,
            data: vec![ZERO; offset(n + 1)],
        }
    }

    pub fn one(n: usize) -> Self {
        let mut s = Self::zero(n);
        s.data[0] = Complex64::new(1.0, 0.0);
        s
    }

    pub fn truncation(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn coeff(&self, w: &Word) -> Complex64 {
        if w.degree() > self.n {
            return ZERO;
        }
        self.data[word_index(w)]
    }

    pub fn from_rational(p: &Polynomial<Rational>, n: usize) -> Result<Self> {
        if p.generators() != 2 {
            return Err(Error::Contract("dense series are two-letter only".into()));
        }
        let mut s = Self::zero(n);
        for (w, c) in p.terms() {
            if w.degree() <= n {
                s.data[word_index(w)] = Complex64::new(rational_to_f64(c), 0.0);
            }
        }
        Ok(s)
    }

    fn block_nonzero(&self, d: usize) -> bool {
        self.data[offset(d)..offset(d + 1)].iter().any(|z| *z != ZERO)
    }

    pub fn add_scaled(&mut self, other: &DenseSeries, s: Complex64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn scaled(&self, s: Complex64) -> DenseSeries {
        DenseSeries {
            n: self.n,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn mul(&self, other: &DenseSeries) -> DenseSeries {
        let n = self.n;
        let mut out = Self::zero(n);
        let la: Vec<bool> = (0..=n).map(|d| self.block_nonzero(d)).collect();
        let lb: Vec<bool> = (0..=n).map(|d| other.block_nonzero(d)).collect();
        for da in 0..=n {
            if !la[da] {
                continue;
            }
            let a = &self.data[offset(da)..offset(da + 1)];
            for db in 0..=(n - da) {
                if !lb[db] {
                    continue;
                }
                let b = &other.data[offset(db)..offset(db + 1)];
                let base = offset(da + db);
                for (i, x) in a.iter().enumerate() {
                    if *x == ZERO {
                        continue;
                    }
                    let row = base + (i << db);
                    for (j, y) in b.iter().enumerate() {
                        out.data[row + j] += x * y;
                    }
                }
            }
        }
        out
    }

    /// Truncated logarithm, defined when the constant term is 1.
    pub fn log(&self) -> DenseSeries {
        let mut y = self.clone();
        y.data[0] -= Complex64::new(1.0, 0.0);
        let mut out = Self::zero(self.n);
        let mut pow = y.clone();
        for k in 1..=self.n {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            out.add_scaled(&pow, Complex64::new(sign / k as f64, 0.0));
            pow = pow.mul(&y);
        }
        out
    }
}

/// Powers `E^k / k!` of a nilpotent element, for fast `exp(c E)`.
#[derive(Clone, Debug)]
pub struct ExpTable {
    powers: Vec<DenseSeries>,
}

impl ExpTable {
    pub fn new(e: &DenseSeries) -> Self {
        let n = e.truncation();
        let mut powers = vec![DenseSeries::one(n)];
        let mut p = DenseSeries::one(n);
        for k in 1..=n {
            p = p.mul(e).scaled(Complex64::new(1.0 / k as f64, 0.0));
            if p.data.iter().all(|z| *z == ZERO) {
                break;
            }
            powers.push(p.clone());
        }
        ExpTable { powers }
    }

    /// `(exp(c E), d/dc exp(c E))`.
    pub fn exp_with_derivative(&self, c: Complex64) -> (DenseSeries, DenseSeries) {
        let n = self.powers[0].truncation();
        let mut v = DenseSeries::zero(n);
        let mut dv = DenseSeries::zero(n);
        let mut ck = Complex64::new(1.0, 0.0);
        for (k, p) in self.powers.iter().enumerate() {
            v.add_scaled(p, ck);
            if k + 1 < self.powers.len() {
                dv.add_scaled(&self.powers[k + 1], ck * (k as f64 + 1.0));
            }
            ck *= c;
        }
        (v, dv)
    }
}

/// `log(F_1 ⋯ F_m)` and its derivatives along each factor parameter.
pub fn log_product_with_tangents(factors: &[(DenseSeries, DenseSeries)]) -> (DenseSeries, Vec<DenseSeries>) {
    let m = factors.len();
    let n = factors[0].0.truncation();
    let mut prefix = vec![DenseSeries::one(n)];
    for (f, _) in factors {
        let next = prefix.last().expect("nonempty").mul(f);
        prefix.push(next);
    }
    let mut suffix = vec![DenseSeries::one(n); m + 1];
    for i in (0..m).rev() {
        suffix[i] = factors[i].0.mul(&suffix[i + 1]);
    }
    let s = &prefix[m];
    let mut y = s.clone();
    y.data[0] -= Complex64::new(1.0, 0.0);
    let mut ypow = vec![DenseSeries::one(n)];
    for _ in 1..n {
        let next = ypow.last().expect("nonempty").mul(&y);
        ypow.push(next);
    }
    let log = s.log();
    let tangents = (0..m)
        .map(|i| {
            let t = prefix[i].mul(&factors[i].1).mul(&suffix[i + 1]);
            // d log[T] = Σ_k (-1)^{k+1}/k Σ_{j<k} Y^j T Y^{k-1-j}
            let mut out = DenseSeries::zero(n);
            let left: Vec<DenseSeries> = ypow.iter().map(|p| p.mul(&t)).collect();
            for k in 1..=n {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                for j in 0..k {
                    let term = left[j].mul(&ypow[k - 1 - j]);
                    out.add_scaled(&term, Complex64::new(sign / k as f64, 0.0));
                }
            }
            out
        })
        .collect();
    (log, tangents)
}

/// Linear map from a dense Lie series to its Hall coordinates.
#[derive(Clone, Debug)]
pub struct CoordinateExtractor {
    basis: Arc<HallBasis>,
    /// Per degree: (basis positions, pivot indices, inverse rows).
    blocks: Vec<(Vec<usize>, Vec<usize>, Vec<Vec<f64>>)>,
    n: usize,
}

impl CoordinateExtractor {
    pub fn new(basis: Arc<HallBasis>, n: usize) -> Result<Self> {
        if basis.generators() != 2 || basis.max_degree() < n {
            return Err(Error::Contract(format!(
                "extractor needs a two-letter basis through degree {n}"
            )));
        }
        let blocks = basis.solvers()?[..n]
            .iter()
            .map(|s| {
                let k = s.elements.len();
                let inv = (0..k)
                    .map(|r| (0..k).map(|c| rational_to_f64(&s.inverse[(r, c)])).collect())
                    .collect();
                (s.elements.clone(), s.pivots.iter().map(word_index).collect(), inv)
            })
            .collect();
        Ok(CoordinateExtractor { basis, blocks, n })
    }

    pub fn basis(&self) -> &Arc<HallBasis> {
        &self.basis
    }

    /// Coordinates indexed by basis position (entries above the truncation stay 0).
    pub fn coordinates(&self, s: &DenseSeries) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.basis.len()];
        for (elements, pivots, inv) in &self.blocks {
            for (c, &pos) in elements.iter().enumerate() {
                out[pos] = pivots
                    .iter()
                    .zip(inv)
                    .map(|(&p, row)| s.data[p] * row[c])
                    .sum();
            }
        }
        out
    }

    pub fn truncation(&self) -> usize {
        self.n
    }
}
