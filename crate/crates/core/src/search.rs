//! Multi-start Levenberg–Marquardt search for schemes meeting order conditions.
//!
//! A candidate with `k` impulse stages is the product
//! `e^{α_1 X0} e^{β_1 b_1} ⋯ e^{α_k X0} e^{β_k b_k} e^{α_{k+1} X0}` with
//! `Σ α_i = 1`. The residual is `ζ_b - ζ_b(exp(X0 + X1))` over every basis
//! element of degree `<= N` other than `X0`, and its Jacobian is exact
//! (forward-mode through the dense truncated algebra).

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dense::{log_product_with_tangents, CoordinateExtractor, DenseSeries, ExpTable};
use crate::error::{Error, Result};
use crate::freealg::Polynomial;
use crate::hall::{bstar_basis, evaluate, witt_number, BracketTree};
use crate::numverify::{default_grid, geometric_grid, empirical_order, verification_systems, ConvergenceReport, Mode};
use crate::scalar::Rational;
use crate::scheme::{order_of_scheme, tokens, AlphaDomain, BetaDomain, NumScheme, NumStage, OrderReport, Scheme, Stage};

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Slack allowed below the target order when verifying by slope.
pub const SLOPE_SLACK: f64 = 0.3;

#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpec {
    pub target_order: usize,
    /// Channels available to the impulse stages.
    pub flows: Vec<BracketTree>,
    /// Number of impulse stages; defaults to the Lie dimension through the target order.
    pub stages: Option<usize>,
    /// Explicit channel per stage; defaults to cycling through `flows`.
    pub layout: Option<Vec<BracketTree>>,
    pub alpha_domain: AlphaDomain,
    pub beta_domain: BetaDomain,
    pub restarts: usize,
    pub tolerance: f64,
    /// Fixed seed; otherwise derived from the spec text.
    pub seed: Option<u64>,
    pub max_iterations: usize,
    /// Restrict to palindromic schemes, which satisfy every even-degree condition for free.
    pub symmetric: bool,
}

impl SearchSpec {
    pub fn new(target_order: usize, flows: Vec<BracketTree>, alpha_domain: AlphaDomain, beta_domain: BetaDomain) -> Self {
        SearchSpec {
            target_order,
            flows,
            stages: None,
            layout: None,
            alpha_domain,
            beta_domain,
            restarts: 32,
            tolerance: 1e-12,
            seed: None,
            max_iterations: 400,
            symmetric: false,
        }
    }

    pub fn with_stages(mut self, k: usize) -> Self {
        self.stages = Some(k);
        self
    }

    pub fn with_restarts(mut self, r: usize) -> Self {
        self.restarts = r;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_symmetric(mut self, symmetric: bool) -> Self {
        self.symmetric = symmetric;
        self
    }

    pub fn with_layout(mut self, layout: Vec<BracketTree>) -> Self {
        self.stages = Some(layout.len());
        self.layout = Some(layout);
        self
    }

    pub fn stage_count(&self) -> usize {
        if let Some(l) = &self.layout {
            return l.len();
        }
        self.stages
            .unwrap_or_else(|| (1..=self.target_order).map(|d| witt_number(2, d)).sum())
    }

    pub fn layout(&self) -> Vec<BracketTree> {
        match &self.layout {
            Some(l) => l.clone(),
            None => {
                let k = self.stage_count();
                (0..k)
                    .map(|i| {
                        let j = if self.symmetric { i.min(k - 1 - i) } else { i };
                        self.flows[j % self.flows.len()].clone()
                    })
                    .collect()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=8).contains(&self.target_order) {
            return Err(Error::Config(format!(
                "target order {} outside 1..=8",
                self.target_order
            )));
        }
        if self.flows.is_empty() {
            return Err(Error::Config("at least one flow is required".into()));
        }
        for f in self.flows.iter().chain(self.layout.iter().flatten()) {
            if *f == BracketTree::x0() || f.max_letter() > 1 {
                return Err(Error::Config(format!("{f} cannot be an impulse channel")));
            }
        }
        if let Some(l) = &self.layout {
            if let Some(bad) = l.iter().find(|b| !self.flows.contains(b)) {
                return Err(Error::Config(format!("layout uses {bad}, which is not among the flows")));
            }
        }
        if self.symmetric && self.layout().iter().ne(self.layout().iter().rev()) {
            return Err(Error::Config("a symmetric search needs a palindromic layout".into()));
        }
        if self.stage_count() == 0 {
            return Err(Error::Config("at least one stage is required".into()));
        }
        if self.restarts == 0 || self.max_iterations == 0 {
            return Err(Error::Config("restarts and max-iterations must be positive".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Seed in use: the explicit one, or a hash of the spec text.
    pub fn effective_seed(&self) -> u64 {
        self.seed.unwrap_or_else(|| {
            let mut s = self.clone();
            s.seed = None;
            // FNV-1a: stable across platforms and compiler versions
            s.to_text()
                .bytes()
                .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
        })
    }

    pub fn to_text(&self) -> String {
        let join = |v: &[BracketTree]| v.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" ");
        let mut out = format!("target-order {}\nflows {}\n", self.target_order, join(&self.flows));
        if let Some(l) = &self.layout {
            out.push_str(&format!("layout {}\n", join(l)));
        } else if let Some(k) = self.stages {
            out.push_str(&format!("stages {k}\n"));
        }
        out.push_str(&format!(
            "alpha-domain {}\nbeta-domain {}\nrestarts {}\ntolerance {:e}\nmax-iterations {}\n",
            self.alpha_domain, self.beta_domain, self.restarts, self.tolerance, self.max_iterations
        ));
        if self.symmetric {
            out.push_str("symmetric true\n");
        }
        if let Some(s) = self.seed {
            out.push_str(&format!("seed {s}\n"));
        }
        out
    }

    /// Parses `key value...` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = SearchSpec::new(0, Vec::new(), AlphaDomain::Positive, BetaDomain::Real);
        let mut seen_target = false;
        for (ln, raw) in text.lines().enumerate() {
            let line_no = ln + 1;
            let line = raw.split('#').next().unwrap_or("");
            let toks = tokens(line);
            let Some(&(c0, key)) = toks.first() else {
                continue;
            };
            let err = |col: usize, message: String| Error::Parse {
                line: line_no,
                column: col,
                message,
            };
            let single = || -> Result<(usize, &str)> {
                match toks.as_slice() {
                    [_, v] => Ok(*v),
                    _ => Err(err(c0, format!("`{key}` takes exactly one value"))),
                }
            };
            let trees = || -> Result<Vec<BracketTree>> {
                if toks.len() < 2 {
                    return Err(err(c0, format!("`{key}` needs at least one bracket")));
                }
                toks[1..]
                    .iter()
                    .map(|(c, t)| t.parse::<BracketTree>().map_err(|e| e.at(line_no, *c)))
                    .collect()
            };
            match key {
                "target-order" => {
                    let (c, v) = single()?;
                    spec.target_order = v.parse().map_err(|_| err(c, format!("invalid order `{v}`")))?;
                    seen_target = true;
                }
                "flows" => spec.flows = trees()?,
                "layout" => spec.layout = Some(trees()?),
                "stages" => {
                    let (c, v) = single()?;
                    spec.stages = Some(v.parse().map_err(|_| err(c, format!("invalid stage count `{v}`")))?);
                }
                "alpha-domain" => {
                    let (c, v) = single()?;
                    spec.alpha_domain = v.parse().map_err(|e: Error| e.at(line_no, c))?;
                }
                "beta-domain" => {
                    let (c, v) = single()?;
                    spec.beta_domain = v.parse().map_err(|e: Error| e.at(line_no, c))?;
                }
                "restarts" => {
                    let (c, v) = single()?;
                    spec.restarts = v.parse().map_err(|_| err(c, format!("invalid count `{v}`")))?;
                }
                "max-iterations" => {
                    let (c, v) = single()?;
                    spec.max_iterations = v.parse().map_err(|_| err(c, format!("invalid count `{v}`")))?;
                }
                "tolerance" => {
                    let (c, v) = single()?;
                    spec.tolerance = v.parse().map_err(|_| err(c, format!("invalid tolerance `{v}`")))?;
                }
                "seed" => {
                    let (c, v) = single()?;
                    spec.seed = Some(v.parse().map_err(|_| err(c, format!("invalid seed `{v}`")))?);
                }
                "symmetric" => {
                    let (c, v) = single()?;
                    spec.symmetric = v.parse().map_err(|_| err(c, format!("expected true or false, got `{v}`")))?;
                }
                other => return Err(err(c0, format!("unknown key `{other}`"))),
            }
        }
        if !seen_target {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: "missing `target-order`".into(),
            });
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for SearchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// The residual map of a spec, with everything that does not depend on the
/// coefficients precomputed.
pub struct Problem {
    spec: SearchSpec,
    layout: Vec<BracketTree>,
    n: usize,
    drift: ExpTable,
    kicks: Vec<ExpTable>,
    extractor: CoordinateExtractor,
    rows: Vec<usize>,
    x1: usize,
}

fn lie_series(b: &BracketTree, n: usize) -> Result<DenseSeries> {
    if b.len() > n {
        return Ok(DenseSeries::zero(n));
    }
    DenseSeries::from_rational(&evaluate::<Rational>(b, 2, n)?, n)
}

fn extractor_for(n: usize) -> Result<(CoordinateExtractor, Vec<usize>, usize)> {
    let basis = bstar_basis(n)?;
    let rows = (0..basis.len())
        .filter(|&k| basis.elements()[k] != BracketTree::x0())
        .collect();
    let x1 = basis.position(&BracketTree::x1()).expect("X1 is in every basis");
    Ok((CoordinateExtractor::new(basis, n)?, rows, x1))
}

impl Problem {
    pub fn new(spec: &SearchSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.target_order;
        let layout = spec.layout();
        let drift = ExpTable::new(&lie_series(&BracketTree::x0(), n)?);
        let kicks = layout
            .iter()
            .map(|b| Ok(ExpTable::new(&lie_series(b, n)?)))
            .collect::<Result<Vec<_>>>()?;
        let (extractor, rows, x1) = extractor_for(n)?;
        Ok(Problem {
            spec: spec.clone(),
            layout,
            n,
            drift,
            kicks,
            extractor,
            rows,
            x1,
        })
    }

    pub fn spec(&self) -> &SearchSpec {
        &self.spec
    }

    fn stages(&self) -> usize {
        self.layout.len()
    }

    /// Drift slot per drift factor (`k + 1` of them) and the multiplicity of each slot.
    fn drift_slots(&self) -> (Vec<usize>, Vec<f64>) {
        slots(self.stages() + 1, self.spec.symmetric)
    }

    fn kick_slots(&self) -> (Vec<usize>, Vec<f64>) {
        slots(self.stages(), self.spec.symmetric)
    }

    fn alpha_params(&self) -> usize {
        let n = self.drift_slots().1.len();
        match self.spec.alpha_domain {
            AlphaDomain::Positive => n,
            _ => n - 1,
        }
    }

    pub fn parameter_count(&self) -> usize {
        let per_beta = if self.spec.beta_domain.is_complex() { 2 } else { 1 };
        self.alpha_params() + per_beta * self.kick_slots().1.len()
    }

    pub fn residual_dimension(&self) -> usize {
        let per = if self.spec.beta_domain.is_complex() { 2 } else { 1 };
        per * self.rows.len()
    }

    /// Factor scalars in product order and their sparse gradients.
    fn decode(&self, theta: &[f64]) -> (Vec<Complex64>, Vec<Vec<(usize, Complex64)>>) {
        let k = self.stages();
        let na = self.alpha_params();
        let (dslot, dmult) = self.drift_slots();
        let ns = dmult.len();
        let mut slot_alpha = vec![0.0; ns];
        let mut slot_dalpha: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); ns];
        match self.spec.alpha_domain {
            AlphaDomain::Positive => {
                // normalized squares reach the boundary alpha = 0 at finite parameters
                let q: f64 = (0..ns).map(|j| dmult[j] * theta[j] * theta[j]).sum::<f64>().max(1e-300);
                for i in 0..ns {
                    slot_alpha[i] = theta[i] * theta[i] / q;
                }
                for i in 0..ns {
                    slot_dalpha[i] = (0..ns)
                        .map(|j| {
                            let delta = if i == j { 1.0 } else { 0.0 };
                            let d = 2.0 * theta[j] / q * (delta - dmult[j] * slot_alpha[i]);
                            (j, Complex64::new(d, 0.0))
                        })
                        .collect();
                }
            }
            _ => {
                let last = ns - 1;
                let mut rest = 1.0;
                for j in 0..last {
                    slot_alpha[j] = theta[j];
                    slot_dalpha[j] = vec![(j, ONE)];
                    rest -= dmult[j] * theta[j];
                }
                slot_alpha[last] = rest / dmult[last];
                slot_dalpha[last] = (0..last)
                    .map(|j| (j, Complex64::new(-dmult[j] / dmult[last], 0.0)))
                    .collect();
            }
        }
        let alpha: Vec<Complex64> = dslot.iter().map(|&j| Complex64::new(slot_alpha[j], 0.0)).collect();
        let dalpha: Vec<Vec<(usize, Complex64)>> = dslot.iter().map(|&j| slot_dalpha[j].clone()).collect();
        let (kslot, _) = self.kick_slots();
        let mut beta = Vec::with_capacity(k);
        let mut dbeta = Vec::with_capacity(k);
        for &i in &kslot {
            match self.spec.beta_domain {
                BetaDomain::Real => {
                    let p = na + i;
                    beta.push(Complex64::new(theta[p], 0.0));
                    dbeta.push(vec![(p, ONE)]);
                }
                BetaDomain::Positive => {
                    let p = na + i;
                    let v = theta[p].exp();
                    beta.push(Complex64::new(v, 0.0));
                    dbeta.push(vec![(p, Complex64::new(v, 0.0))]);
                }
                BetaDomain::Complex => {
                    let (p, q) = (na + 2 * i, na + 2 * i + 1);
                    beta.push(Complex64::new(theta[p], theta[q]));
                    dbeta.push(vec![(p, ONE), (q, I)]);
                }
                BetaDomain::ComplexPositive => {
                    let (p, q) = (na + 2 * i, na + 2 * i + 1);
                    let re = theta[p].exp();
                    beta.push(Complex64::new(re, theta[q]));
                    dbeta.push(vec![(p, Complex64::new(re, 0.0)), (q, I)]);
                }
            }
        }
        let mut scalars = Vec::with_capacity(2 * k + 1);
        let mut grads = Vec::with_capacity(2 * k + 1);
        for i in 0..k {
            scalars.push(alpha[i]);
            grads.push(dalpha[i].clone());
            scalars.push(beta[i]);
            grads.push(dbeta[i].clone());
        }
        scalars.push(alpha[k]);
        grads.push(dalpha[k].clone());
        (scalars, grads)
    }

    pub fn scheme(&self, theta: &[f64]) -> NumScheme {
        let (sc, _) = self.decode(theta);
        let k = self.stages();
        let mut stages: Vec<NumStage> = (0..k)
            .map(|i| NumStage {
                alpha: sc[2 * i].re,
                flow: self.layout[i].clone(),
                beta: sc[2 * i + 1],
            })
            .collect();
        stages.push(NumStage {
            alpha: sc[2 * k].re,
            flow: BracketTree::x1(),
            beta: Complex64::new(0.0, 0.0),
        });
        NumScheme { stages }
    }

    fn factors(&self, scalars: &[Complex64]) -> Vec<(DenseSeries, DenseSeries)> {
        scalars
            .iter()
            .enumerate()
            .map(|(f, c)| {
                let table = if f % 2 == 0 { &self.drift } else { &self.kicks[f / 2] };
                table.exp_with_derivative(*c)
            })
            .collect()
    }

    fn target(&self, pos: usize) -> Complex64 {
        if pos == self.x1 {
            ONE
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    fn split(&self, v: &[Complex64], with_target: bool) -> Vec<f64> {
        let complex = self.spec.beta_domain.is_complex();
        let mut out = Vec::with_capacity(self.residual_dimension());
        for &pos in &self.rows {
            let z = if with_target { v[pos] - self.target(pos) } else { v[pos] };
            out.push(z.re);
            if complex {
                out.push(z.im);
            }
        }
        out
    }

    /// `ζ_b - ζ_b(exp(X0 + X1))` per coordinate.
    pub fn coordinate_residuals(&self, theta: &[f64]) -> Vec<(BracketTree, Complex64)> {
        let (sc, _) = self.decode(theta);
        let f = self.factors(&sc);
        let log = f
            .iter()
            .fold(DenseSeries::one(self.n), |acc, (x, _)| acc.mul(x))
            .log();
        let z = self.extractor.coordinates(&log);
        let basis = self.extractor.basis();
        self.rows
            .iter()
            .map(|&p| (basis.elements()[p].clone(), z[p] - self.target(p)))
            .collect()
    }

    pub fn residuals(&self, theta: &[f64]) -> Vec<f64> {
        let c: Vec<Complex64> = {
            let mut v = vec![Complex64::new(0.0, 0.0); self.extractor.basis().len()];
            for ((_, r), &p) in self.coordinate_residuals(theta).iter().zip(&self.rows) {
                v[p] = *r + self.target(p);
            }
            v
        };
        self.split(&c, true)
    }

    pub fn residuals_and_jacobian(&self, theta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let (sc, grads) = self.decode(theta);
        let (log, tangents) = log_product_with_tangents(&self.factors(&sc));
        let r = self.split(&self.extractor.coordinates(&log), true);
        let mut jac = DMatrix::<f64>::zeros(r.len(), self.parameter_count());
        for (f, t) in tangents.iter().enumerate() {
            let dz = self.extractor.coordinates(t);
            for &(p, dc) in &grads[f] {
                let col = self.split(&dz.iter().map(|z| z * dc).collect::<Vec<_>>(), false);
                for (row, v) in col.iter().enumerate() {
                    jac[(row, p)] += v;
                }
            }
        }
        (r, jac)
    }

    pub fn initial_guess(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let k = self.stages();
        let mut theta = Vec::with_capacity(self.parameter_count());
        match self.spec.alpha_domain {
            AlphaDomain::Positive => {
                for _ in 0..self.alpha_params() {
                    theta.push(rng.random_range(0.3..1.3));
                }
            }
            _ => {
                for _ in 0..self.alpha_params() {
                    theta.push(1.0 / (k + 1) as f64 + rng.random_range(-1.0..1.0) * 0.6);
                }
            }
        }
        let (kslot, kmult) = self.kick_slots();
        for slot in 0..kmult.len() {
            let b = &self.layout[kslot.iter().position(|&s| s == slot).expect("slot in use")];
            let scale = 0.1f64.powi(b.len() as i32 - 1);
            match self.spec.beta_domain {
                BetaDomain::Real => theta.push(rng.random_range(-1.5..1.5) * scale),
                BetaDomain::Positive => theta.push(rng.random_range(-2.0..0.5)),
                BetaDomain::Complex => {
                    theta.push(rng.random_range(-1.5..1.5) * scale);
                    theta.push(rng.random_range(-0.6..0.6) * scale);
                }
                BetaDomain::ComplexPositive => {
                    theta.push(rng.random_range(-2.0..0.5));
                    theta.push(rng.random_range(-0.6..0.6) * scale);
                }
            }
        }
        theta
    }
}

/// Parameter slot of each of `count` positions; mirrored positions share a slot when symmetric.
fn slots(count: usize, symmetric: bool) -> (Vec<usize>, Vec<f64>) {
    let slot: Vec<usize> = (0..count)
        .map(|i| if symmetric { i.min(count - 1 - i) } else { i })
        .collect();
    let n = slot.iter().max().map_or(0, |m| m + 1);
    let mut mult = vec![0.0; n];
    for &s in &slot {
        mult[s] += 1.0;
    }
    (slot, mult)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Gauss–Newton with Marquardt scaling; returns the final point and residual norm.
pub fn levenberg_marquardt(p: &Problem, theta0: Vec<f64>, tol: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let mut theta = theta0;
    let (mut r, mut jac) = p.residuals_and_jacobian(&theta);
    let mut cost = norm(&r);
    let mut lambda = 1e-3;
    let mut stall = 0;
    for _ in 0..max_iter {
        if cost < tol || !cost.is_finite() {
            break;
        }
        let jt = jac.transpose();
        let a = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        let dmax = a.diagonal().max().max(1e-300);
        let mut accepted = false;
        while lambda < 1e14 {
            let mut m = a.clone();
            for i in 0..m.nrows() {
                m[(i, i)] += lambda * (a[(i, i)] + 1e-9 * dmax);
            }
            let Some(ch) = m.cholesky() else {
                lambda *= 4.0;
                continue;
            };
            let step = ch.solve(&(-&g));
            let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
            let rc = p.residuals(&cand);
            let c = norm(&rc);
            if c.is_finite() && c < cost {
                stall = if c > cost * (1.0 - 1e-6) { stall + 1 } else { 0 };
                theta = cand;
                (r, jac) = p.residuals_and_jacobian(&theta);
                cost = norm(&r);
                lambda = (lambda / 3.0).max(1e-15);
                accepted = true;
                break;
            }
            lambda *= 4.0;
        }
        if !accepted || stall > 25 {
            break;
        }
    }
    (theta, cost)
}

/// Best rational approximation with denominator at most `max_den`, if within `tol`.
pub fn snap(x: f64, max_den: u64, tol: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    let (mut p0, mut q0, mut p1, mut q1) = (0i128, 1i128, 1i128, 0i128);
    let mut v = x;
    for _ in 0..64 {
        let a = v.floor();
        if a.abs() > 1e15 {
            break;
        }
        let a = a as i128;
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        if q2 > max_den as i128 {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        if (x - p1 as f64 / q1 as f64).abs() <= tol {
            return Some(Rational::new(BigInt::from(p1), BigInt::from(q1)));
        }
        let frac = v - a as f64;
        if frac.abs() < 1e-300 {
            break;
        }
        v = 1.0 / frac;
    }
    None
}

/// Snaps every coefficient to a small-denominator rational, if possible.
pub fn snap_scheme(s: &NumScheme, alpha_domain: AlphaDomain, beta_domain: BetaDomain) -> Option<Scheme> {
    const DEN: u64 = 4096;
    const TOL: f64 = 1e-10;
    let stages = s
        .stages
        .iter()
        .map(|st| {
            Some(Stage {
                alpha: snap(st.alpha, DEN, TOL)?,
                flow: st.flow.clone(),
                beta: Complex::new(snap(st.beta.re, DEN, TOL)?, snap(st.beta.im, DEN, TOL)?),
            })
        })
        .collect::<Option<Vec<_>>>()?;
    Scheme::new(stages, alpha_domain, beta_domain).ok()
}

/// How a candidate was accepted or why it was not.
#[derive(Clone, Debug, PartialEq)]
pub enum Verification {
    Exact(OrderReport),
    Empirical(Vec<ConvergenceReport>),
    Rejected(String),
}

impl Verification {
    pub fn is_verified(&self) -> bool {
        !matches!(self, Verification::Rejected(_))
    }
}

impl fmt::Display for Verification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verification::Exact(r) => write!(f, "verified exactly ({r})"),
            Verification::Empirical(reps) => {
                let parts: Vec<String> = reps.iter().map(|r| r.summary()).collect();
                write!(f, "verified empirically ({})", parts.join("; "))
            }
            Verification::Rejected(why) => write!(f, "rejected: {why}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub spec: SearchSpec,
    pub scheme: NumScheme,
    pub parameters: Vec<f64>,
    pub residual_norm: f64,
    pub residuals: Vec<(BracketTree, Complex64)>,
    /// Exact scheme from a small-denominator snap that passed the order checker.
    pub certificate: Option<Scheme>,
    pub verification: Verification,
    pub restart: usize,
}

impl SearchResult {
    pub fn recompute_residual_norm(&self) -> Result<f64> {
        Ok(norm(&Problem::new(&self.spec)?.residuals(&self.parameters)))
    }

    /// Scheme file text: the exact certificate when present, else float coefficients.
    pub fn scheme_text(&self) -> String {
        match &self.certificate {
            Some(c) => c.to_text(),
            None => self.scheme.to_text(self.spec.alpha_domain, self.spec.beta_domain),
        }
    }

    pub fn summary(&self) -> String {
        format!(
            "residual {:.3e} after restart {}; {}",
            self.residual_norm, self.restart, self.verification
        )
    }
}

#[derive(Clone, Debug)]
pub struct SearchFailure {
    pub best_residual: f64,
    pub best_scheme: Option<NumScheme>,
    pub restarts: usize,
    /// Converged candidates turned down by verification.
    pub rejected: usize,
    /// Why the best converged candidate was turned down.
    pub rejection: Option<String>,
}

impl fmt::Display for SearchFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "no verified scheme after {} restarts; best residual {:.3e}",
            self.restarts, self.best_residual
        )?;
        if self.rejected > 0 {
            write!(f, " ({} converged candidates rejected", self.rejected)?;
            if let Some(why) = &self.rejection {
                write!(f, "; best: {why}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum SearchOutcome {
    Found(Box<SearchResult>),
    Failed(SearchFailure),
}

impl SearchOutcome {
    pub fn found(&self) -> Option<&SearchResult> {
        match self {
            SearchOutcome::Found(r) => Some(r),
            SearchOutcome::Failed(_) => None,
        }
    }
}

/// Residual vector of a spec at raw parameters `theta`.
pub fn residuals(theta: &[f64], spec: &SearchSpec) -> Result<Vec<f64>> {
    let p = Problem::new(spec)?;
    if theta.len() != p.parameter_count() {
        return Err(Error::Contract(format!(
            "expected {} parameters, got {}",
            p.parameter_count(),
            theta.len()
        )));
    }
    Ok(p.residuals(theta))
}

/// Float first-kind coordinates of any scheme minus those of `exp(X0 + X1)`.
pub fn scheme_residuals(s: &NumScheme, n: usize) -> Result<Vec<(BracketTree, Complex64)>> {
    let (extractor, rows, x1) = extractor_for(n)?;
    let drift = lie_series(&BracketTree::x0(), n)?;
    let mut prod = DenseSeries::one(n);
    for st in &s.stages {
        let d = ExpTable::new(&drift).exp_with_derivative(Complex64::new(st.alpha, 0.0)).0;
        prod = prod.mul(&d);
        let k = ExpTable::new(&lie_series(&st.flow, n)?).exp_with_derivative(st.beta).0;
        prod = prod.mul(&k);
    }
    let z = extractor.coordinates(&prod.log());
    let basis = extractor.basis();
    Ok(rows
        .iter()
        .map(|&p| {
            let t = if p == x1 { ONE } else { Complex64::new(0.0, 0.0) };
            (basis.elements()[p].clone(), z[p] - t)
        })
        .collect())
}

/// Step sizes for slope verification; high orders start coarser so that enough
/// errors stay above the noise floor.
pub fn verification_grid(target_order: usize) -> Vec<f64> {
    if target_order >= 5 {
        geometric_grid(1, 10)
    } else {
        default_grid()
    }
}

/// Accepts a candidate by exact order (after snapping) or by convergence slope.
pub fn verify_candidate(scheme: &NumScheme, certificate: Option<&Scheme>, spec: &SearchSpec) -> Verification {
    let target = spec.target_order;
    if let Some(c) = certificate {
        if let Ok(r) = order_of_scheme(c, target) {
            if r.order >= target {
                return Verification::Exact(r);
            }
        }
    }
    let mut reports = Vec::new();
    for sys in verification_systems() {
        let rep = match empirical_order(scheme, sys.as_ref(), &verification_grid(target), &sys.default_point(), Mode::OneStep) {
            Ok(r) => r,
            Err(e) => return Verification::Rejected(format!("{}: {e}", sys.name())),
        };
        if !rep.exact {
            let Some(order) = rep.order_estimate() else {
                return Verification::Rejected(format!("{}: no measurable slope", sys.name()));
            };
            if rep.fitted.len() < 3 {
                return Verification::Rejected(format!(
                    "{}: only {} points above the noise floor",
                    sys.name(),
                    rep.fitted.len()
                ));
            }
            if order < target as f64 - SLOPE_SLACK {
                return Verification::Rejected(format!(
                    "{}: measured order {order:.2} below {target}",
                    sys.name()
                ));
            }
        }
        reports.push(rep);
    }
    Verification::Empirical(reports)
}

/// Runs all restarts (in parallel) and returns the best verified candidate.
pub fn solve(spec: &SearchSpec) -> Result<SearchOutcome> {
    let problem = Arc::new(Problem::new(spec)?);
    let seed = spec.effective_seed();
    let mut runs: Vec<(usize, Vec<f64>, f64)> = (0..spec.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let theta0 = problem.initial_guess(&mut rng);
            let (theta, cost) = levenberg_marquardt(&problem, theta0, spec.tolerance, spec.max_iterations);
            (r, theta, if cost.is_finite() { cost } else { f64::INFINITY })
        })
        .collect();
    runs.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
    let mut rejected = 0;
    let mut rejection = None;
    for (restart, theta, cost) in runs.iter().filter(|r| r.2 < spec.tolerance) {
        let scheme = problem.scheme(theta);
        let certificate = snap_scheme(&scheme, spec.alpha_domain, spec.beta_domain)
            .filter(|c| order_of_scheme(c, spec.target_order).is_ok_and(|r| r.order >= spec.target_order));
        let verification = verify_candidate(&scheme, certificate.as_ref(), spec);
        if let Verification::Rejected(why) = &verification {
            rejected += 1;
            rejection.get_or_insert_with(|| why.clone());
            continue;
        }
        return Ok(SearchOutcome::Found(Box::new(SearchResult {
            spec: spec.clone(),
            residuals: problem.coordinate_residuals(theta),
            scheme,
            parameters: theta.clone(),
            residual_norm: *cost,
            certificate,
            verification,
            restart: *restart,
        })));
    }
    let best = runs.first();
    Ok(SearchOutcome::Failed(SearchFailure {
        best_residual: best.map_or(f64::INFINITY, |b| b.2),
        best_scheme: best.map(|b| problem.scheme(&b.1)),
        restarts: spec.restarts,
        rejected,
        rejection,
    }))
}

/// Exact residual check of a certificate's series against `exp(X0 + X1)`.
pub fn certificate_matches(c: &Scheme, n: usize) -> Result<bool> {
    let target = &Polynomial::<Rational>::letter(0, 2, n) + &Polynomial::<Rational>::letter(1, 2, n);
    if !c.is_real() {
        return Ok(order_of_scheme(c, n)?.order >= n);
    }
    Ok(c.series::<Rational>(n)?.log()? == target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hall::{build_m, build_w};
    use crate::scalar::{rational_to_f64, rat};
    use crate::scheme::zeta_coordinates;

    fn x1_spec(n: usize, ad: AlphaDomain) -> SearchSpec {
        SearchSpec::new(n, vec![BracketTree::x1()], ad, BetaDomain::Real)
    }

    #[test]
    fn strang_residuals() {
        let s = Scheme::strang().to_numeric();
        let r = scheme_residuals(&s, 2).unwrap();
        assert!(r.iter().all(|(_, z)| z.norm() < 1e-15));
        let r3 = scheme_residuals(&s, 3).unwrap();
        let nonzero: Vec<&BracketTree> = r3.iter().filter(|(_, z)| z.norm() > 1e-12).map(|(b, _)| b).collect();
        assert!(nonzero.iter().all(|b| b.len() == 3));
        assert!(!nonzero.is_empty());
    }

    #[test]
    fn residual_dimension_at_order_four() {
        let p = Problem::new(&x1_spec(4, AlphaDomain::Positive).with_stages(3)).unwrap();
        assert_eq!(p.residual_dimension(), 7);
        let c = Problem::new(&SearchSpec::new(4, vec![BracketTree::x1()], AlphaDomain::Positive, BetaDomain::Complex).with_stages(3))
            .unwrap();
        assert_eq!(c.residual_dimension(), 14);
    }

    #[test]
    fn float_path_agrees_with_exact_path() {
        let s = Scheme::quadratic_exact();
        let basis = bstar_basis(5).unwrap();
        let c = crate::scheme::scheme_to_control::<Rational>(&s).unwrap();
        let z = zeta_coordinates(&c, &basis, 5).unwrap();
        let f = scheme_residuals(&s.to_numeric(), 5).unwrap();
        for (b, v) in &f {
            let mut exact = rational_to_f64(&z.value(b));
            if *b == BracketTree::x1() {
                exact -= 1.0;
            }
            assert!((v.re - exact).abs() <= 1e-13 * exact.abs().max(1.0), "{b}");
            assert_eq!(v.im, 0.0);
        }
        assert!((f.iter().find(|(b, _)| *b == build_m(2)).unwrap().1.re - 1.0 / 48.0).abs() < 1e-15);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for bd in [BetaDomain::Real, BetaDomain::ComplexPositive] {
            let spec = SearchSpec::new(4, vec![BracketTree::x1(), build_w(1)], AlphaDomain::Positive, bd).with_stages(4);
            let p = Problem::new(&spec).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let theta = p.initial_guess(&mut rng);
            let (r, j) = p.residuals_and_jacobian(&theta);
            let h = 1e-7;
            for col in 0..theta.len() {
                let mut t = theta.clone();
                t[col] += h;
                let rp = p.residuals(&t);
                for row in 0..r.len() {
                    let fd = (rp[row] - r[row]) / h;
                    assert!((fd - j[(row, col)]).abs() < 1e-5, "{bd} {row} {col}");
                }
            }
        }
    }

    #[test]
    fn symmetric_schemes_kill_even_degrees() {
        let spec = SearchSpec::new(4, vec![BracketTree::x1(), build_w(1)], AlphaDomain::Positive, BetaDomain::Real)
            .with_stages(5)
            .with_symmetric(true);
        let p = Problem::new(&spec).unwrap();
        assert_eq!(p.parameter_count(), 3 + 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let theta = p.initial_guess(&mut rng);
        let s = p.scheme(&theta);
        let n = s.stages.len();
        for i in 0..n - 1 {
            assert_eq!(s.stages[i].flow, s.stages[n - 2 - i].flow);
            assert_eq!(s.stages[i].beta, s.stages[n - 2 - i].beta);
        }
        for (b, z) in p.coordinate_residuals(&theta) {
            if b.len() % 2 == 0 {
                assert!(z.norm() < 1e-14, "{b} {z}");
            }
        }
        let (_, j) = p.residuals_and_jacobian(&theta);
        let h = 1e-7;
        for col in 0..theta.len() {
            let mut t = theta.clone();
            t[col] += h;
            let (rp, r) = (p.residuals(&t), p.residuals(&theta));
            for row in 0..r.len() {
                assert!(((rp[row] - r[row]) / h - j[(row, col)]).abs() < 1e-5);
            }
        }
        let bad = spec.clone().with_layout(vec![BracketTree::x1(), build_w(1)]);
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn real_domain_alpha_sums_to_one() {
        let p = Problem::new(&x1_spec(2, AlphaDomain::Real).with_stages(2)).unwrap();
        let s = p.scheme(&[0.3, -0.1, 0.5, 0.5]);
        let total: f64 = s.stages.iter().map(|x| x.alpha).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn snapping() {
        assert_eq!(snap(0.75, 100, 1e-12), Some(rat(3, 4)));
        assert_eq!(snap(-1.0 / 3.0, 100, 1e-12), Some(rat(-1, 3)));
        assert_eq!(snap(std::f64::consts::PI, 100, 1e-10), None);
        let s = snap_scheme(&Scheme::strang().to_numeric(), AlphaDomain::Positive, BetaDomain::Real).unwrap();
        assert_eq!(s, Scheme::strang());
    }

    #[test]
    fn verify_accepts_strang_and_rejects_noise() {
        let strang = Scheme::strang();
        let spec = x1_spec(2, AlphaDomain::Positive);
        let v = verify_candidate(&strang.to_numeric(), Some(&strang), &spec);
        assert!(matches!(v, Verification::Exact(ref r) if r.order == 2));
        let v = verify_candidate(&strang.to_numeric(), None, &spec);
        assert!(matches!(v, Verification::Empirical(_)), "{v}");
        let noise = Scheme::from_pairs(&[(rat(3, 10), rat(7, 10)), (rat(7, 10), rat(1, 5))], AlphaDomain::Positive)
            .unwrap()
            .to_numeric();
        assert!(!verify_candidate(&noise, None, &spec).is_verified());
    }

    #[test]
    fn order_two_found_order_three_blocked() {
        let spec = x1_spec(2, AlphaDomain::Positive).with_stages(2).with_restarts(8).with_seed(1);
        let out = solve(&spec).unwrap();
        let r = out.found().expect("order 2 is reachable");
        assert!(r.residual_norm < 1e-12);
        assert!((r.recompute_residual_norm().unwrap() - r.residual_norm).abs() < 1e-15);
        let spec = x1_spec(3, AlphaDomain::Positive).with_stages(4).with_restarts(8).with_seed(1);
        match solve(&spec).unwrap() {
            SearchOutcome::Failed(f) => assert!(f.best_residual > 1e-4, "{f}"),
            SearchOutcome::Found(r) => panic!("order 3 with positive drift: {}", r.summary()),
        }
    }

    #[test]
    fn spec_round_trip_and_errors() {
        let text = "target-order 4\nflows X1 W1\nstages 6\nalpha-domain R+\nbeta-domain R\nrestarts 16\nseed 9\n";
        let s = SearchSpec::parse(text).unwrap();
        assert_eq!(s.flows, vec![BracketTree::x1(), build_w(1)]);
        assert_eq!(SearchSpec::parse(&s.to_text()).unwrap(), s);
        assert_eq!(s.effective_seed(), 9);
        let unseeded = SearchSpec { seed: None, ..s.clone() };
        assert_eq!(unseeded.effective_seed(), unseeded.clone().effective_seed());
        let e = SearchSpec::parse("target-order 4\nflows X1 Y2\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, column: 10, .. }), "{e}");
        assert!(SearchSpec::parse("flows X1\n").is_err());
        assert!(matches!(SearchSpec::parse("target-order 3\nflows X0\n"), Err(Error::Config(_))));
        let _ = build_m(1);
    }
}
