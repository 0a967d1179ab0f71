//! Coordinates of the second kind by Lazard elimination.
//!
//! For a Hall basis `b_1 < ... < b_R` truncated at `N`, the solution of
//! `S' = S Y_0` factors as
//!
//! ```text
//! π_N S(t) = exp(ξ_{b_R}(t) b_R) ... exp(ξ_{b_1}(t) b_1).
//! ```
//!
//! Peeling factors off from the right, `S_j = S_{j-1} exp(-ξ_{b_j} b_j)`
//! satisfies `S_j' = S_j Y_j` with
//!
//! ```text
//! ξ_{b_j}' = <Y_{j-1}, b_j>,   Y_j = exp(ξ_{b_j} ad_{b_j}) P_{>b_j} Y_{j-1}.
//! ```
//!
//! On each drift piece `Y_0` is constant, so every `ξ_b` is a polynomial in
//! the local time. An impulse `a δ_τ` on channel `c` is the limit of a pulse
//! `a/ε` on `[τ, τ+ε]`; rescaled to unit length its generator is `a c + ε X0`,
//! and the limit drops the `ε X0` term.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::freealg::Polynomial;
use crate::hall::{lie_coordinates_arc, BracketTree, HallBasis, LieCoordinates};
use crate::scalar::{ExactScalar, Rational};
use crate::scheme::{CoordinateKind, CoordinateVector, DiracControl, Segment};
use crate::upoly::UPoly;

/// `ξ` along one segment, as polynomials in the local time `σ ∈ [0, 1]`.
#[derive(Clone, Debug)]
pub struct XiPiece<S> {
    pub start: Rational,
    /// Zero for impulses.
    pub duration: Rational,
    /// Indexed by basis position.
    pub xi: Vec<UPoly<S>>,
}

#[derive(Clone, Debug)]
pub struct XiTrajectory<S> {
    pub basis: Arc<HallBasis>,
    pub truncation: usize,
    pub pieces: Vec<XiPiece<S>>,
    pub end: Vec<S>,
}

impl<S: ExactScalar> XiTrajectory<S> {
    /// `ξ_b` as a polynomial in `t` on each drift interval `[start, start + duration]`.
    pub fn piecewise(&self, b: &BracketTree) -> Result<Vec<(Rational, Rational, UPoly<S>)>> {
        let k = self
            .basis
            .position(b)
            .ok_or_else(|| Error::Domain(format!("{b} is not in the basis")))?;
        Ok(self
            .pieces
            .iter()
            .filter(|p| p.duration > Rational::from_integer(0.into()))
            .map(|p| {
                let inv = S::from_rational(&(Rational::from_integer(1.into()) / &p.duration));
                let shift = S::from_rational(&(-&p.start / &p.duration));
                (
                    p.start.clone(),
                    &p.start + &p.duration,
                    p.xi[k].compose_affine(&inv, &shift),
                )
            })
            .collect())
    }

    pub fn coordinates(&self) -> CoordinateVector<S> {
        CoordinateVector {
            kind: CoordinateKind::Second,
            coords: LieCoordinates {
                basis: self.basis.clone(),
                values: self.end.clone(),
                truncation: self.truncation,
            },
        }
    }
}

struct Engine<'a> {
    basis: &'a Arc<HallBasis>,
    n: usize,
    order: Vec<usize>,
}

impl<'a> Engine<'a> {
    fn new(basis: &'a Arc<HallBasis>, n: usize) -> Result<Self> {
        if n > basis.max_degree() {
            return Err(Error::Domain(format!(
                "truncation {n} exceeds the basis degree {}",
                basis.max_degree()
            )));
        }
        if basis.generators() != 2 || basis.elements().last() != Some(&BracketTree::x0()) {
            return Err(Error::Domain(
                "second-kind coordinates need a two-letter basis with X0 maximal".into(),
            ));
        }
        Ok(Engine {
            basis,
            n,
            order: basis.positions_upto(n),
        })
    }

    /// `ad_{b_j}(v)` with `v` dense over basis positions.
    fn ad<S: ExactScalar>(&self, j: usize, v: &[UPoly<S>]) -> Result<Vec<UPoly<S>>> {
        let mut out = vec![UPoly::zero(); v.len()];
        let bj = self.basis.elements()[j].len();
        for (i, vi) in v.iter().enumerate() {
            if vi.is_zero() || bj + self.basis.elements()[i].len() > self.n {
                continue;
            }
            for (k, c) in self.basis.bracket_coordinates(j, i)?.iter() {
                if self.basis.elements()[*k].len() > self.n {
                    continue;
                }
                out[*k] = &out[*k] + &vi.scale(&S::from_rational(c));
            }
        }
        Ok(out)
    }

    /// Runs one segment with constant generator `y0`, updating `xi` in place.
    fn segment<S: ExactScalar>(&self, xi: &mut [S], y0: Vec<UPoly<S>>) -> Result<Vec<UPoly<S>>> {
        let mut y = y0;
        let mut polys = vec![UPoly::zero(); xi.len()];
        for (step, &j) in self.order.iter().enumerate() {
            if let Some(&bad) = self.order[..step].iter().find(|&&i| !y[i].is_zero()) {
                return Err(Error::Contract(format!(
                    "elimination left a component on {} before {}",
                    self.basis.elements()[bad],
                    self.basis.elements()[j]
                )));
            }
            let p = &UPoly::constant(xi[j].clone()) + &y[j].integral();
            y[j] = UPoly::zero();
            if !p.is_zero() {
                let mut term = y.clone();
                let mut k = 1i64;
                loop {
                    let next = self.ad(j, &term)?;
                    if next.iter().all(UPoly::is_zero) {
                        break;
                    }
                    let f = p.scale(&(S::one() / S::from_i64(k)));
                    term = next.iter().map(|t| t * &f).collect();
                    for (yi, ti) in y.iter_mut().zip(&term) {
                        *yi = &*yi + ti;
                    }
                    k += 1;
                }
            }
            xi[j] = p.eval(&S::one());
            polys[j] = p;
        }
        Ok(polys)
    }

    fn generator<S: ExactScalar>(&self, parts: &[(&BracketTree, S)]) -> Result<Vec<UPoly<S>>> {
        let mut y = vec![UPoly::zero(); self.basis.len()];
        for (b, a) in parts {
            let k = self
                .basis
                .position(b)
                .ok_or_else(|| Error::Domain(format!("channel {b} is not a basis element")))?;
            if b.len() <= self.n {
                y[k] = &y[k] + &UPoly::constant(a.clone());
            }
        }
        Ok(y)
    }
}

/// Second-kind coordinates along the whole control.
pub fn xi_trajectory<S: ExactScalar>(
    c: &DiracControl<S>,
    basis: &Arc<HallBasis>,
    n: usize,
) -> Result<XiTrajectory<S>> {
    let eng = Engine::new(basis, n)?;
    let x0 = BracketTree::x0();
    let mut xi = vec![S::zero(); basis.len()];
    let mut pieces = Vec::new();
    for seg in c.segments() {
        let (start, duration, y0) = match &seg {
            Segment::Drift { start, duration } => (
                start.clone(),
                duration.clone(),
                eng.generator(&[(&x0, S::from_rational(duration))])?,
            ),
            Segment::Kick(imp) => (
                imp.time.clone(),
                Rational::from_integer(0.into()),
                eng.generator(&[(&imp.channel, imp.amplitude.clone())])?,
            ),
        };
        let polys = eng.segment(&mut xi, y0)?;
        pieces.push(XiPiece {
            start,
            duration,
            xi: polys,
        });
    }
    Ok(XiTrajectory {
        basis: basis.clone(),
        truncation: n,
        pieces,
        end: xi,
    })
}

/// `ξ_b(T, u)` for every `b` with `|b| <= n`.
pub fn xi_coordinates<S: ExactScalar>(
    c: &DiracControl<S>,
    basis: &Arc<HallBasis>,
    n: usize,
) -> Result<CoordinateVector<S>> {
    Ok(xi_trajectory(c, basis, n)?.coordinates())
}

/// The same recursion with each impulse spread over a pulse of length `eps`.
///
/// Differs from [`xi_coordinates`] by `O(eps)`; used to check the impulse limit.
pub fn xi_coordinates_regularized<S: ExactScalar>(
    c: &DiracControl<S>,
    basis: &Arc<HallBasis>,
    n: usize,
    eps: &Rational,
) -> Result<CoordinateVector<S>> {
    let eng = Engine::new(basis, n)?;
    let x0 = BracketTree::x0();
    let mut xi = vec![S::zero(); basis.len()];
    // a pulse eats the first eps of the following drift when there is one
    let mut owed = Rational::from_integer(0.into());
    for seg in c.segments() {
        match seg {
            Segment::Drift { duration, .. } => {
                let d = &duration - &owed;
                if d < Rational::from_integer(0.into()) {
                    return Err(Error::Domain("impulses closer than the pulse width".into()));
                }
                owed = Rational::from_integer(0.into());
                let y0 = eng.generator(&[(&x0, S::from_rational(&d))])?;
                eng.segment(&mut xi, y0)?;
            }
            Segment::Kick(imp) => {
                let y0 = eng.generator(&[(&imp.channel, imp.amplitude.clone()), (&x0, S::from_rational(eps))])?;
                eng.segment(&mut xi, y0)?;
                owed = &owed + eps;
            }
        }
    }
    Ok(CoordinateVector {
        kind: CoordinateKind::Second,
        coords: LieCoordinates {
            basis: basis.clone(),
            values: xi,
            truncation: n,
        },
    })
}

/// `Π exp(ξ_b b)` over `|b| <= n`, largest element leftmost.
pub fn product_formula<S: ExactScalar>(xi: &CoordinateVector<S>) -> Result<Polynomial<S>> {
    let basis = xi.basis();
    let n = xi.truncation();
    let mut p = Polynomial::<S>::one(2, n);
    for k in basis.positions_upto(n).into_iter().rev() {
        let v = &xi.coords.values[k];
        if v.is_zero() {
            continue;
        }
        let e = basis.evaluation(k).with_truncation(n).map_coeffs(S::from_rational).scale(v);
        p = p.checked_mul(&e.exp()?)?;
    }
    Ok(p)
}

fn require_kind<S>(v: &CoordinateVector<S>, kind: CoordinateKind) -> Result<()> {
    if v.kind != kind {
        return Err(Error::Domain(format!("expected {kind:?}-kind coordinates, got {:?}", v.kind)));
    }
    if v.coords.values.len() != v.coords.basis.len() {
        return Err(Error::Domain("incomplete coordinate vector".into()));
    }
    Ok(())
}

/// `ζ = Φ(ξ)`: coordinates of the logarithm of the product formula.
pub fn xi_to_zeta<S: ExactScalar>(xi: &CoordinateVector<S>) -> Result<CoordinateVector<S>> {
    require_kind(xi, CoordinateKind::Second)?;
    let z = product_formula(xi)?.log()?;
    Ok(CoordinateVector {
        kind: CoordinateKind::First,
        coords: lie_coordinates_arc(&z, xi.basis())?,
    })
}

/// Inverse of [`xi_to_zeta`], solved degree by degree: `ξ_b = ζ_b - Φ(ξ_{<|b|}, 0)_b`.
pub fn zeta_to_xi<S: ExactScalar>(zeta: &CoordinateVector<S>) -> Result<CoordinateVector<S>> {
    require_kind(zeta, CoordinateKind::First)?;
    let basis = zeta.basis().clone();
    let n = zeta.truncation();
    let mut xi: CoordinateVector<S> = CoordinateVector {
        kind: CoordinateKind::Second,
        coords: LieCoordinates::zero(basis.clone(), n),
    };
    for d in 1..=n {
        let partial = xi_to_zeta(&xi)?;
        for (k, b) in basis.elements().iter().enumerate() {
            if b.len() == d {
                xi.coords.values[k] = zeta.coords.values[k].clone() - partial.coords.values[k].clone();
            }
        }
    }
    Ok(xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hall::{build_m, build_w, generate_hall, OrderPolicy};
    use crate::scalar::{int, rat, rational_to_f64};
    use crate::scheme::{formal_series, scheme_to_control, zeta_coordinates, Impulse, Scheme};
    use proptest::prelude::*;

    fn bstar(n: usize) -> Arc<HallBasis> {
        Arc::new(generate_hall(2, n, OrderPolicy::BstarCompatible).unwrap())
    }

    fn worked_control() -> DiracControl<Rational> {
        scheme_to_control(&Scheme::quadratic_exact()).unwrap()
    }

    #[test]
    fn worked_example_values() {
        let b = bstar(5);
        let xi = xi_coordinates(&worked_control(), &b, 5).unwrap();
        assert_eq!(xi.value(&BracketTree::x1()), int(1));
        assert_eq!(xi.value(&build_m(1)), rat(1, 2));
        assert_eq!(xi.value(&build_w(1)), rat(1, 6));
        assert_eq!(xi.value(&build_m(2)), rat(3, 16));
        assert_eq!(xi.value(&BracketTree::x0()), int(1));
    }

    #[test]
    fn x1_coordinate_is_the_primitive() {
        let b = bstar(3);
        let c = DiracControl::on_x1(int(2), &[(rat(1, 3), rat(2, 5)), (rat(3, 2), rat(-1, 7))]).unwrap();
        let tr = xi_trajectory(&c, &b, 3).unwrap();
        for (s, e, p) in tr.piecewise(&BracketTree::x1()).unwrap() {
            let mid = (&s + &e) / int(2);
            assert_eq!(p.eval(&mid), c.primitive(&mid));
        }
    }

    #[test]
    fn product_formula_recovers_series() {
        let b = bstar(5);
        let c = worked_control();
        let xi = xi_coordinates(&c, &b, 5).unwrap();
        assert_eq!(product_formula(&xi).unwrap(), formal_series(&c, 5).unwrap());
    }

    #[test]
    fn low_degree_formulas() {
        let b = bstar(3);
        let c = DiracControl::on_x1(rat(3, 2), &[(rat(1, 5), rat(2, 3)), (rat(1, 1), rat(-3, 4))]).unwrap();
        let xi = xi_coordinates(&c, &b, 3).unwrap();
        let z = xi_to_zeta(&xi).unwrap();
        let x = |t: &BracketTree| xi.value(t);
        let (x0, x1, m1, m2, w1) = (
            x(&BracketTree::x0()),
            x(&BracketTree::x1()),
            x(&build_m(1)),
            x(&build_m(2)),
            x(&build_w(1)),
        );
        assert_eq!(z.value(&build_m(1)), &m1 - rat(1, 2) * &x0 * &x1);
        assert_eq!(z.value(&build_m(2)), &m2 - rat(1, 2) * &x0 * &m1 + rat(1, 12) * &x0 * &x0 * &x1);
        assert_eq!(z.value(&build_w(1)), &w1 - rat(1, 2) * &m1 * &x1 + rat(1, 12) * &x1 * &x1 * &x0);
    }

    #[test]
    fn regularization_converges() {
        let b = bstar(4);
        let c = DiracControl::new(
            int(1),
            vec![
                Impulse { time: rat(1, 4), channel: BracketTree::x1(), amplitude: rat(1, 2) },
                Impulse { time: rat(1, 2), channel: build_w(1), amplitude: rat(-2, 3) },
                Impulse { time: rat(3, 4), channel: BracketTree::x1(), amplitude: rat(1, 2) },
            ],
        )
        .unwrap();
        let exact = xi_coordinates(&c, &b, 4).unwrap();
        let mut prev = f64::INFINITY;
        for k in [100, 1000, 10000] {
            let reg = xi_coordinates_regularized(&c, &b, 4, &rat(1, k)).unwrap();
            let gap = exact
                .coords
                .values
                .iter()
                .zip(&reg.coords.values)
                .map(|(a, r)| rational_to_f64(&(a - r)).abs())
                .fold(0.0, f64::max);
            assert!(gap < 10.0 / k as f64, "eps=1/{k}: gap {gap}");
            assert!(gap < prev);
            prev = gap;
        }
    }

    #[test]
    fn kinds_are_checked() {
        let b = bstar(3);
        let z: CoordinateVector<Rational> = zeta_coordinates(&worked_control(), &b, 3).unwrap();
        assert!(xi_to_zeta(&z).is_err());
        let xi = xi_coordinates(&worked_control(), &b, 3).unwrap();
        assert!(zeta_to_xi(&xi).is_err());
    }

    fn arb_control() -> impl Strategy<Value = DiracControl<Rational>> {
        proptest::collection::vec((1i64..=4, -5i64..=5, 1i64..=4, 0usize..3), 0..4).prop_map(|v| {
            let channels = [BracketTree::x1(), build_m(1), build_w(1)];
            let mut t = Rational::from_integer(0.into());
            let mut imps = Vec::new();
            for (dt, a, d, ch) in v {
                t += rat(dt, 4);
                imps.push(Impulse { time: t.clone(), channel: channels[ch].clone(), amplitude: rat(a, d) });
            }
            DiracControl::new(&t + rat(1, 3), imps).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn xi_and_zeta_agree(c in arb_control()) {
            let b = bstar(5);
            let xi = xi_coordinates(&c, &b, 5).unwrap();
            let z = zeta_coordinates(&c, &b, 5).unwrap();
            prop_assert_eq!(product_formula(&xi).unwrap(), formal_series(&c, 5).unwrap());
            prop_assert_eq!(xi_to_zeta(&xi).unwrap(), z.clone());
            prop_assert_eq!(zeta_to_xi(&z).unwrap(), xi);
        }
    }
}
