//! Concrete vector-field pairs `(f0, f1)` with flows for every bracket channel.
//!
//! Linear pairs use matrix exponentials. Polynomial pairs are strictly lower
//! triangular (component `i` depends only on earlier coordinates), a class
//! closed under brackets whose flows integrate exactly in closed form.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hall::BracketTree;
use crate::upoly::UPoly;

pub type State = Vec<Complex64>;

/// A pair of vector fields with exact flows for `f0`, `f1` and their brackets.
pub trait TestSystem: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    /// `x ↦ e^{t f_b} x`, with complex time allowed.
    fn flow(&self, b: &BracketTree, t: Complex64, x: &[Complex64]) -> Result<State>;
    /// `f_b(x)`.
    fn field(&self, b: &BracketTree, x: &[Complex64]) -> Result<State>;
    /// `e^{t (f0 + f1)} x`.
    fn reference(&self, t: f64, x: &[Complex64]) -> State;
    fn default_point(&self) -> State;
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn check_letters(b: &BracketTree) -> Result<()> {
    if b.max_letter() > 1 {
        return Err(Error::Unsupported(format!("channel {b} uses letters beyond X0, X1")));
    }
    Ok(())
}

/// `f0 = A x`, `f1 = B x`.
pub struct LinearPair {
    name: String,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl LinearPair {
    pub fn new(name: &str, a: DMatrix<f64>, b: DMatrix<f64>) -> Self {
        assert!(a.is_square() && a.shape() == b.shape(), "square matrices of equal size");
        LinearPair {
            name: name.to_string(),
            a,
            b,
        }
    }

    /// The default non-commuting 4×4 pair.
    pub fn standard() -> Self {
        #[rustfmt::skip]
        let a = DMatrix::from_row_slice(4, 4, &[
            0.0, 1.0, 0.0, 0.0,
            -1.0, 0.0, 0.5, 0.0,
            0.0, 0.0, 0.0, 1.0,
            0.3, 0.0, -2.0, 0.0,
        ]);
        #[rustfmt::skip]
        let b = DMatrix::from_row_slice(4, 4, &[
            0.5, 0.0, 0.0, 0.2,
            0.0, -0.3, 1.0, 0.0,
            0.1, 0.0, 0.0, 0.0,
            0.0, 0.4, 0.0, 0.2,
        ]);
        Self::new("linearpair", a, b)
    }

    /// A second, unrelated 4×4 pair.
    pub fn alternate() -> Self {
        #[rustfmt::skip]
        let a = DMatrix::from_row_slice(4, 4, &[
            -0.2, 0.7, 0.0, 0.1,
            0.0, 0.1, -0.9, 0.0,
            0.6, 0.0, 0.0, 0.3,
            0.0, -0.5, 0.2, -0.1,
        ]);
        #[rustfmt::skip]
        let b = DMatrix::from_row_slice(4, 4, &[
            0.0, 0.0, 0.8, 0.0,
            0.3, 0.0, 0.0, -0.4,
            0.0, 0.6, 0.1, 0.0,
            -0.7, 0.0, 0.0, 0.5,
        ]);
        Self::new("linearpair2", a, b)
    }

    /// Matrix of `f_b`; `[Ax, Bx] = (BA - AB) x` under `[f, g] = Dg f - Df g`.
    pub fn matrix(&self, b: &BracketTree) -> Result<DMatrix<f64>> {
        check_letters(b)?;
        Ok(match b {
            BracketTree::Leaf(0) => self.a.clone(),
            BracketTree::Leaf(_) => self.b.clone(),
            BracketTree::Node(l, r) => {
                let ml = self.matrix(l)?;
                let mr = self.matrix(r)?;
                &mr * &ml - &ml * &mr
            }
        })
    }

    fn cmatrix(&self, m: &DMatrix<f64>) -> DMatrix<Complex64> {
        m.map(c)
    }
}

impl TestSystem for LinearPair {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn flow(&self, b: &BracketTree, t: Complex64, x: &[Complex64]) -> Result<State> {
        let m = self.cmatrix(&self.matrix(b)?) * t;
        Ok((m.exp() * DVector::from_column_slice(x)).as_slice().to_vec())
    }

    fn field(&self, b: &BracketTree, x: &[Complex64]) -> Result<State> {
        let m = self.cmatrix(&self.matrix(b)?);
        Ok((m * DVector::from_column_slice(x)).as_slice().to_vec())
    }

    fn reference(&self, t: f64, x: &[Complex64]) -> State {
        let m = self.cmatrix(&(&self.a + &self.b)) * c(t);
        (m.exp() * DVector::from_column_slice(x)).as_slice().to_vec()
    }

    fn default_point(&self) -> State {
        vec![c(1.0), c(-0.5), c(0.25), c(0.75)]
    }
}

/// Polynomial in `d` variables with real coefficients, keyed by exponent vectors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MPoly {
    terms: BTreeMap<Vec<u32>, f64>,
}

impl MPoly {
    pub fn zero() -> Self {
        MPoly::default()
    }

    pub fn constant(d: usize, v: f64) -> Self {
        Self::monomial(vec![0; d], v)
    }

    pub fn var(d: usize, i: usize) -> Self {
        let mut e = vec![0; d];
        e[i] = 1;
        Self::monomial(e, 1.0)
    }

    pub fn monomial(exps: Vec<u32>, v: f64) -> Self {
        let mut p = MPoly::zero();
        if v != 0.0 {
            p.terms.insert(exps, v);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|e| e.iter().all(|&k| k == 0))
    }

    /// Largest variable index the polynomial depends on.
    pub fn max_var(&self) -> Option<usize> {
        self.terms
            .keys()
            .filter_map(|e| e.iter().rposition(|&k| k > 0))
            .max()
    }

    fn insert(&mut self, e: Vec<u32>, v: f64) {
        let slot = self.terms.entry(e.clone()).or_insert(0.0);
        *slot += v;
        if *slot == 0.0 {
            self.terms.remove(&e);
        }
    }

    pub fn add(&self, o: &MPoly) -> MPoly {
        let mut p = self.clone();
        for (e, v) in &o.terms {
            p.insert(e.clone(), *v);
        }
        p
    }

    pub fn scale(&self, s: f64) -> MPoly {
        let mut p = MPoly::zero();
        for (e, v) in &self.terms {
            p.insert(e.clone(), v * s);
        }
        p
    }

    pub fn mul(&self, o: &MPoly) -> MPoly {
        let mut p = MPoly::zero();
        for (e1, v1) in &self.terms {
            for (e2, v2) in &o.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                p.insert(e, v1 * v2);
            }
        }
        p
    }

    pub fn derivative(&self, i: usize) -> MPoly {
        let mut p = MPoly::zero();
        for (e, v) in &self.terms {
            if e[i] > 0 {
                let mut e2 = e.clone();
                e2[i] -= 1;
                p.insert(e2, v * e[i] as f64);
            }
        }
        p
    }

    pub fn eval(&self, x: &[Complex64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(e, v)| {
                e.iter()
                    .zip(x)
                    .fold(c(*v), |acc, (&k, xi)| acc * xi.powu(k))
            })
            .sum()
    }

    /// Substitutes univariate polynomials for the variables.
    pub fn eval_upoly(&self, x: &[UPoly<Complex64>]) -> UPoly<Complex64> {
        let mut out = UPoly::zero();
        for (e, v) in &self.terms {
            let mut term = UPoly::constant(c(*v));
            for (k, xi) in e.iter().zip(x) {
                if *k > 0 {
                    term = &term * &xi.pow(*k as usize);
                }
            }
            out = &out + &term;
        }
        out
    }
}

impl fmt::Display for MPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(e, v)| {
                let mono: Vec<String> = e
                    .iter()
                    .enumerate()
                    .filter(|(_, k)| **k > 0)
                    .map(|(i, k)| if *k == 1 { format!("x{}", i + 1) } else { format!("x{}^{k}", i + 1) })
                    .collect();
                if mono.is_empty() {
                    format!("{v}")
                } else {
                    format!("{v}*{}", mono.join("*"))
                }
            })
            .collect();
        f.write_str(&parts.join(" + "))
    }
}

/// A polynomial vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyField {
    pub comps: Vec<MPoly>,
}

impl PolyField {
    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(MPoly::is_zero)
    }

    /// `[f, g] = Dg·f - Df·g`.
    pub fn bracket(&self, g: &PolyField) -> PolyField {
        let d = self.dim();
        let comps = (0..d)
            .map(|i| {
                let mut acc = MPoly::zero();
                for j in 0..d {
                    acc = acc.add(&g.comps[i].derivative(j).mul(&self.comps[j]));
                    acc = acc.add(&self.comps[i].derivative(j).mul(&g.comps[j]).scale(-1.0));
                }
                acc
            })
            .collect();
        PolyField { comps }
    }

    pub fn add(&self, g: &PolyField) -> PolyField {
        PolyField {
            comps: self.comps.iter().zip(&g.comps).map(|(a, b)| a.add(b)).collect(),
        }
    }

    /// Component `i` depends on coordinates `< i` only.
    pub fn is_triangular(&self) -> bool {
        self.comps
            .iter()
            .enumerate()
            .all(|(i, p)| p.max_var().is_none_or(|v| v < i))
    }

    pub fn eval(&self, x: &[Complex64]) -> State {
        self.comps.iter().map(|p| p.eval(x)).collect()
    }

    /// Exact flow of a triangular field: each coordinate is a polynomial in time.
    pub fn triangular_flow(&self, t: Complex64, x: &[Complex64]) -> State {
        let mut traj: Vec<UPoly<Complex64>> = Vec::with_capacity(self.dim());
        for (i, p) in self.comps.iter().enumerate() {
            let rate = p.eval_upoly(&traj);
            let xi = &UPoly::constant(x[i]) + &rate.integral();
            traj.push(xi);
        }
        traj.iter().map(|p| p.eval(&t)).collect()
    }
}

/// Classical RK4 along the straight path from `0` to `t`.
pub fn rk4(f: impl Fn(&[Complex64]) -> State, t: Complex64, x: &[Complex64], steps: usize) -> State {
    let h = t / steps as f64;
    let mut y = x.to_vec();
    let axpy = |y: &[Complex64], k: &[Complex64], s: Complex64| -> State {
        y.iter().zip(k).map(|(a, b)| a + b * s).collect()
    };
    for _ in 0..steps {
        let k1 = f(&y);
        let k2 = f(&axpy(&y, &k1, h / 2.0));
        let k3 = f(&axpy(&y, &k2, h / 2.0));
        let k4 = f(&axpy(&y, &k3, h));
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

/// Polynomial pair; bracket fields are computed symbolically.
pub struct PolySystem {
    name: String,
    f0: PolyField,
    f1: PolyField,
    point: State,
}

impl PolySystem {
    pub fn new(name: &str, f0: PolyField, f1: PolyField, point: State) -> Self {
        PolySystem {
            name: name.to_string(),
            f0,
            f1,
            point,
        }
    }

    /// `x1' = u`, `x2' = x1^2`: `f0 = (0, x1^2)`, `f1 = (1, 0)`.
    pub fn quadratic() -> Self {
        let f0 = PolyField {
            comps: vec![MPoly::zero(), MPoly::monomial(vec![2, 0], 1.0)],
        };
        let f1 = PolyField {
            comps: vec![MPoly::constant(2, 1.0), MPoly::zero()],
        };
        Self::new("quadratic", f0, f1, vec![c(0.5), c(-0.25)])
    }

    /// `f0 = (0, x1^2, x2)`, `f1 = (1, 0, 0)`: `f_{W1} = (0, 2, 0)` and `f_{M2} = (0, 0, 2 x1)`.
    pub fn quadratic_full() -> Self {
        let f0 = PolyField {
            comps: vec![
                MPoly::zero(),
                MPoly::monomial(vec![2, 0, 0], 1.0),
                MPoly::var(3, 1),
            ],
        };
        let f1 = PolyField {
            comps: vec![MPoly::constant(3, 1.0), MPoly::zero(), MPoly::zero()],
        };
        Self::new("quadraticfull", f0, f1, vec![c(0.5), c(-0.25), c(0.125)])
    }

    pub fn vector_field(&self, b: &BracketTree) -> Result<PolyField> {
        check_letters(b)?;
        Ok(match b {
            BracketTree::Leaf(0) => self.f0.clone(),
            BracketTree::Leaf(_) => self.f1.clone(),
            BracketTree::Node(l, r) => self.vector_field(l)?.bracket(&self.vector_field(r)?),
        })
    }

    fn integrate(field: &PolyField, t: Complex64, x: &[Complex64]) -> State {
        if field.is_triangular() {
            field.triangular_flow(t, x)
        } else {
            rk4(|y| field.eval(y), t, x, 4096)
        }
    }
}

impl TestSystem for PolySystem {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.f0.dim()
    }

    fn flow(&self, b: &BracketTree, t: Complex64, x: &[Complex64]) -> Result<State> {
        Ok(Self::integrate(&self.vector_field(b)?, t, x))
    }

    fn field(&self, b: &BracketTree, x: &[Complex64]) -> Result<State> {
        Ok(self.vector_field(b)?.eval(x))
    }

    fn reference(&self, t: f64, x: &[Complex64]) -> State {
        Self::integrate(&self.f0.add(&self.f1), c(t), x)
    }

    fn default_point(&self) -> State {
        self.point.clone()
    }
}

pub const SYSTEM_NAMES: [&str; 4] = ["linearpair", "linearpair2", "quadratic", "quadraticfull"];

pub fn builtin_systems() -> Vec<Arc<dyn TestSystem>> {
    vec![
        Arc::new(LinearPair::standard()),
        Arc::new(LinearPair::alternate()),
        Arc::new(PolySystem::quadratic()),
        Arc::new(PolySystem::quadratic_full()),
    ]
}

pub fn system_by_name(name: &str) -> Result<Arc<dyn TestSystem>> {
    let key = name.to_ascii_lowercase().replace(['-', '_'], "");
    builtin_systems()
        .into_iter()
        .find(|s| s.name() == key)
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown system '{name}' (known: {})",
                SYSTEM_NAMES.join(", ")
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hall::{build_m, build_w};

    fn dist(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    fn channels() -> Vec<BracketTree> {
        vec![
            BracketTree::x0(),
            BracketTree::x1(),
            build_m(1),
            build_m(2),
            build_w(1),
            build_w(2),
        ]
    }

    #[test]
    fn quadratic_fields_and_flows() {
        let q = PolySystem::quadratic();
        let o = [c(0.0), c(0.0)];
        assert_eq!(q.field(&BracketTree::x1(), &o).unwrap(), vec![c(1.0), c(0.0)]);
        assert_eq!(q.field(&build_w(1), &o).unwrap(), vec![c(0.0), c(2.0)]);
        assert!(q.vector_field(&build_m(2)).unwrap().is_zero());
        let x = [c(0.7), c(-0.2)];
        let y = q.flow(&BracketTree::x0(), c(0.3), &x).unwrap();
        assert!(dist(&y, &[c(0.7), c(-0.2 + 0.3 * 0.49)]) < 1e-15);
        let r = q.reference(0.5, &x);
        let expect = -0.2 + (1.2f64.powi(3) - 0.7f64.powi(3)) / 3.0;
        assert!(dist(&r, &[c(1.2), c(expect)]) < 1e-14);
    }

    #[test]
    fn quadratic_full_closed_forms() {
        let q = PolySystem::quadratic_full();
        let x = [c(0.4), c(0.3), c(-0.1)];
        assert_eq!(q.field(&build_m(2), &x).unwrap(), vec![c(0.0), c(0.0), c(0.8)]);
        assert_eq!(q.field(&build_w(1), &x).unwrap(), vec![c(0.0), c(2.0), c(0.0)]);
        let t = 0.6;
        let y = q.flow(&BracketTree::x0(), c(t), &x).unwrap();
        let expect = [c(0.4), c(0.3 + t * 0.16), c(-0.1 + 0.3 * t + 0.16 * t * t / 2.0)];
        assert!(dist(&y, &expect) < 1e-15);
        let r = q.reference(t, &x);
        let (a, b) = (0.4f64, 0.4 + t);
        let x3 = -0.1 + 0.3 * t + (b.powi(4) - a.powi(4)) / 12.0 - a.powi(3) * t / 3.0;
        assert!(dist(&r, &[c(b), c(0.3 + (b.powi(3) - a.powi(3)) / 3.0), c(x3)]) < 1e-14);
    }

    #[test]
    fn group_law_and_rk4_agreement() {
        for sys in builtin_systems() {
            let x = sys.default_point();
            for b in channels() {
                let (s, t) = (c(0.3), Complex64::new(0.2, -0.1));
                let two = sys.flow(&b, t, &sys.flow(&b, s, &x).unwrap()).unwrap();
                let one = sys.flow(&b, s + t, &x).unwrap();
                assert!(dist(&one, &two) < 1e-14, "{} {b}", sys.name());
                let exact = sys.flow(&b, s + t, &x).unwrap();
                let rk = rk4(|y| sys.field(&b, y).unwrap(), s + t, &x, 2000);
                assert!(dist(&exact, &rk) < 1e-12, "{} {b}", sys.name());
            }
        }
    }

    #[test]
    fn linear_bracket_matches_field_bracket() {
        // f_{[a,b]}(x) = Df_b f_a - Df_a f_b = (M_b M_a - M_a M_b) x
        let lp = LinearPair::standard();
        let a = &lp.a;
        let b = &lp.b;
        let m1 = lp.matrix(&build_m(1)).unwrap();
        assert!((&m1 - (a * b - b * a)).norm() < 1e-15);
        let w1 = lp.matrix(&build_w(1)).unwrap();
        assert!(w1.norm() > 1e-3);
    }

    #[test]
    fn lookup() {
        assert_eq!(system_by_name("Linear-Pair").unwrap().name(), "linearpair");
        assert!(matches!(system_by_name("nope"), Err(Error::Config(_))));
    }
}
