//! Empirical order by integrating concrete vector fields.
//!
//! One-step mode compares a single step of size `T` against the exact flow;
//! the error behaves like `T^{order+1}`, so the fitted slope is `order + 1`.
//! Multi-step mode integrates to `t = 1` with `n` steps; its slope is the order.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::freealg::Polynomial;
use crate::hall::{build_m, build_w, BracketTree};
use crate::scheme::NumScheme;
use crate::systems::{LinearPair, State, TestSystem};

/// Errors below this are treated as roundoff and left out of the fit.
pub const NOISE_FLOOR: f64 = 1e-13;
/// Every error at or below this counts as reproducing the flow exactly.
pub const EXACT_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    OneStep,
    MultiStep,
}

/// Geometric grid `2^{-from}, ..., 2^{-to}`.
pub fn geometric_grid(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 2f64.powi(-k)).collect()
}

pub fn default_grid() -> Vec<f64> {
    geometric_grid(3, 12)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub system: String,
    pub mode: Mode,
    /// Step sizes, decreasing.
    pub grid: Vec<f64>,
    pub errors: Vec<f64>,
    /// Indices of the grid points used in the fit.
    pub fitted: Vec<usize>,
    pub slope: Option<f64>,
    /// Slopes between consecutive grid points.
    pub local_slopes: Vec<f64>,
    pub exact: bool,
}

impl ConvergenceReport {
    /// The order implied by the slope and the mode.
    pub fn order_estimate(&self) -> Option<f64> {
        self.slope.map(|s| match self.mode {
            Mode::OneStep => s - 1.0,
            Mode::MultiStep => s,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("T,error\n");
        for (t, e) in self.grid.iter().zip(&self.errors) {
            let _ = writeln!(out, "{t:e},{e:e}");
        }
        out
    }

    pub fn summary(&self) -> String {
        if self.exact {
            return format!("{}: exact (error at reference precision)", self.system);
        }
        match self.slope {
            Some(s) => format!(
                "{}: slope {s:.3} over {} points (order ~ {:.3})",
                self.system,
                self.fitted.len(),
                self.order_estimate().unwrap_or(f64::NAN)
            ),
            None => format!("{}: no slope (fewer than 2 points above the noise floor)", self.system),
        }
    }
}

/// Applies one step of size `h` from `x`.
pub fn apply_scheme(s: &NumScheme, sys: &dyn TestSystem, h: f64, x: &[Complex64]) -> Result<State> {
    let mut y = x.to_vec();
    for st in &s.stages {
        if st.alpha != 0.0 {
            y = sys.flow(&BracketTree::x0(), Complex64::new(st.alpha * h, 0.0), &y)?;
        }
        if st.beta != Complex64::new(0.0, 0.0) {
            let amp = st.beta * h.powi(st.flow.len() as i32);
            y = sys.flow(&st.flow, amp, &y)?;
        }
    }
    Ok(y)
}

fn distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

fn fit(grid: &[f64], errors: &[f64]) -> (Vec<usize>, Option<f64>, Vec<f64>) {
    let logs: Vec<(f64, f64)> = grid.iter().zip(errors).map(|(t, e)| (t.ln(), e.ln())).collect();
    let local: Vec<f64> = logs
        .windows(2)
        .map(|w| (w[0].1 - w[1].1) / (w[0].0 - w[1].0))
        .collect();
    let mut idx: Vec<usize> = (0..grid.len())
        .filter(|&i| errors[i] > NOISE_FLOOR && errors[i].is_finite())
        .collect();
    if idx.len() < 2 {
        return (idx, None, local);
    }
    let slope_of = |ix: &[usize]| least_squares_slope(&ix.iter().map(|&i| logs[i]).collect::<Vec<_>>());
    // drop pre-asymptotic leading points that disagree with the rest
    while idx.len() > 3 {
        let rest = slope_of(&idx[1..]);
        let first = (logs[idx[0]].1 - logs[idx[1]].1) / (logs[idx[0]].0 - logs[idx[1]].0);
        if (first - rest).abs() > 0.25 {
            idx.remove(0);
        } else {
            break;
        }
    }
    let s = slope_of(&idx);
    (idx, Some(s), local)
}

/// Error of the scheme against the exact flow over a grid of step sizes.
pub fn empirical_order(
    s: &NumScheme,
    sys: &dyn TestSystem,
    grid: &[f64],
    x0: &[Complex64],
    mode: Mode,
) -> Result<ConvergenceReport> {
    if x0.len() != sys.dim() {
        return Err(Error::Contract(format!(
            "initial point has dimension {}, system {} has {}",
            x0.len(),
            sys.name(),
            sys.dim()
        )));
    }
    let errors = grid
        .par_iter()
        .map(|&t| -> Result<f64> {
            match mode {
                Mode::OneStep => {
                    let y = apply_scheme(s, sys, t, x0)?;
                    Ok(distance(&y, &sys.reference(t, x0)))
                }
                Mode::MultiStep => {
                    let n = (1.0 / t).round().max(1.0) as usize;
                    let h = 1.0 / n as f64;
                    let mut y = x0.to_vec();
                    for _ in 0..n {
                        y = apply_scheme(s, sys, h, &y)?;
                    }
                    Ok(distance(&y, &sys.reference(1.0, x0)))
                }
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let exact = errors.iter().all(|e| *e <= EXACT_THRESHOLD);
    let (fitted, slope, local_slopes) = fit(grid, &errors);
    Ok(ConvergenceReport {
        system: sys.name().to_string(),
        mode,
        grid: grid.to_vec(),
        errors,
        fitted,
        slope: if exact { None } else { slope },
        local_slopes,
        exact,
    })
}

/// Pointwise verdict on whether two bracket fields are parallel.
#[derive(Clone, Debug, PartialEq)]
pub struct DependenceReport {
    pub first: BracketTree,
    pub second: BracketTree,
    /// Largest `|f_a ∧ f_b| / (|f_a| |f_b|)` over the sample points (0 if a field vanishes).
    pub max_sine: f64,
    pub dependent: bool,
}

/// Degree 3 tests `(M2, W1)`, degree 5 tests `(M4, W2)`, at `samples` points.
pub fn dependence_test(sys: &dyn TestSystem, degree: usize, samples: &[State]) -> Result<DependenceReport> {
    let (first, second) = match degree {
        3 => (build_m(2), build_w(1)),
        5 => (build_m(4), build_w(2)),
        _ => return Err(Error::Domain(format!("no dependence test at degree {degree}"))),
    };
    let mut max_sine: f64 = 0.0;
    for x in samples {
        let a = sys.field(&first, x)?;
        let b = sys.field(&second, x)?;
        let na: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if na < 1e-14 || nb < 1e-14 {
            continue;
        }
        // |a ∧ b|^2 = Σ_{i<j} |a_i b_j - a_j b_i|^2
        let mut wedge = 0.0;
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                wedge += (a[i] * b[j] - a[j] * b[i]).norm_sqr();
            }
        }
        max_sine = max_sine.max(wedge.sqrt() / (na * nb));
    }
    Ok(DependenceReport {
        first,
        second,
        max_sine,
        dependent: max_sine < 1e-10,
    })
}

/// Deterministic sample points spread around the system's default point.
pub fn sample_points(sys: &dyn TestSystem, count: usize) -> Vec<State> {
    let base = sys.default_point();
    (0..count)
        .map(|k| {
            base.iter()
                .enumerate()
                .map(|(i, z)| z + Complex64::new(((k * 7 + i * 3) % 11) as f64 / 5.0 - 1.0, 0.0))
                .collect()
        })
        .collect()
}

/// `Σ_w c_w T^{|w|} M(w) x`, a truncated series acting on a linear pair.
///
/// A word `a_1 ... a_n` acts as the matrix product `M_{a_n} ... M_{a_1}`.
pub fn series_action(p: &Polynomial<Complex64>, sys: &LinearPair, t: f64, x: &[Complex64]) -> Result<State> {
    let a = sys.matrix(&BracketTree::x0())?.map(|v| Complex64::new(v, 0.0));
    let b = sys.matrix(&BracketTree::x1())?.map(|v| Complex64::new(v, 0.0));
    let x = nalgebra::DVector::from_column_slice(x);
    let mut out = nalgebra::DVector::<Complex64>::zeros(x.len());
    for (w, coeff) in p.terms() {
        let mut y = x.clone();
        for &l in w.letters() {
            y = if l == 0 { &a * y } else { &b * y };
        }
        out += y * (*coeff * t.powi(w.degree() as i32));
    }
    Ok(out.as_slice().to_vec())
}

/// Systems able to carry every channel of the scheme.
pub fn verification_systems() -> Vec<Arc<dyn TestSystem>> {
    vec![Arc::new(LinearPair::standard()), Arc::new(LinearPair::alternate())]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::Scheme;
    use crate::systems::PolySystem;

    fn run(s: &Scheme, sys: &dyn TestSystem, mode: Mode) -> ConvergenceReport {
        empirical_order(&s.to_numeric(), sys, &default_grid(), &sys.default_point(), mode).unwrap()
    }

    #[test]
    fn classical_slopes() {
        let lp = LinearPair::standard();
        let strang = run(&Scheme::strang(), &lp, Mode::OneStep);
        assert!((strang.slope.unwrap() - 3.0).abs() < 0.2, "{strang:?}");
        let lt = run(&Scheme::lie_trotter(), &lp, Mode::OneStep);
        assert!((lt.slope.unwrap() - 2.0).abs() < 0.2, "{lt:?}");
        let multi = run(&Scheme::strang(), &lp, Mode::MultiStep);
        assert!((multi.order_estimate().unwrap() - 2.0).abs() < 0.2, "{multi:?}");
    }

    #[test]
    fn strang_order_on_every_system() {
        for sys in crate::systems::builtin_systems() {
            let r = run(&Scheme::strang(), sys.as_ref(), Mode::OneStep);
            assert!(
                r.exact || (r.order_estimate().unwrap() - 2.0).abs() < 0.3,
                "{}",
                r.summary()
            );
        }
    }

    #[test]
    fn quadratic_exact_scheme() {
        let q = PolySystem::quadratic();
        let r = run(&Scheme::quadratic_exact(), &q, Mode::OneStep);
        assert!(r.exact, "{r:?}");
        assert!(r.summary().contains("exact"));
        let full = PolySystem::quadratic_full();
        let r = run(&Scheme::quadratic_exact(), &full, Mode::OneStep);
        assert!(!r.exact);
        assert!((r.slope.unwrap() - 3.0).abs() < 0.2, "{r:?}");
    }

    #[test]
    fn dependence() {
        let q = PolySystem::quadratic();
        let d = dependence_test(&q, 3, &sample_points(&q, 6)).unwrap();
        assert!(d.dependent);
        let full = PolySystem::quadratic_full();
        let d = dependence_test(&full, 3, &sample_points(&full, 6)).unwrap();
        assert!(!d.dependent, "{d:?}");
        let lp = LinearPair::standard();
        assert!(!dependence_test(&lp, 3, &sample_points(&lp, 4)).unwrap().dependent);
        assert!(!dependence_test(&lp, 5, &sample_points(&lp, 4)).unwrap().dependent);
        assert!(dependence_test(&lp, 4, &[]).is_err());
    }

    #[test]
    fn csv_shape() {
        let r = run(&Scheme::strang(), &LinearPair::standard(), Mode::OneStep);
        let csv = r.to_csv();
        assert!(csv.starts_with("T,error\n"));
        assert_eq!(csv.lines().count(), default_grid().len() + 1);
        assert!(!csv.contains('\r'));
    }
}
