//! Coercive functionals behind the order barriers of positive-drift schemes.
//!
//! For a control `u` on `[0, 1]` whose first coordinates match the exact flow
//! `exp(X0 + X1)`, the coordinate of the bad bracket `W_N` is a squared
//! negative Sobolev norm of `u - 1`:
//!
//! ```text
//! ζ_{W_1} + ζ_{M_2} = ½ ∫ (U(t) - t)^2 dt
//! ζ_{W_2} - ζ_{M_4} = ½ ∫ (ξ_{M_1}(t) - t^2/2)^2 dt
//! ζ_{W_N}           = ½ ∫ (ξ_{M_{N-1}}(t) - t^N/N!)^2 dt
//! ```
//!
//! A sum of Dirac masses never has `U ≡ t`, so the right-hand sides are
//! strictly positive.

use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::hall::{bstar_basis, build_m, build_w, BracketTree, HallBasis};
use crate::linalg::Matrix;
use crate::scalar::{format_rational, int, rat, rational_to_f64, Rational};
use crate::scheme::{reference_zeta, zeta_coordinates, CoordinateVector, DiracControl, Impulse};
use crate::upoly::UPoly;
use crate::xi::xi_trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Obstructed,
    HypothesesNotMet,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Obstructed => "obstructed",
            Verdict::HypothesesNotMet => "hypotheses-not-met",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObstructionReport {
    pub bracket: BracketTree,
    /// `½ ∫ defect^2`, always `>= 0`.
    pub functional_value: Rational,
    /// `ζ_b(u) - ζ_b(reference)` for each matching hypothesis.
    pub constraint_residuals: Vec<(BracketTree, Rational)>,
    pub verdict: Verdict,
    /// The coordinate side of the identity: `ζ_{W_N}`, corrected by `±ζ_{M_{2N}}` when unconstrained.
    pub coordinate_value: Rational,
    /// Whether the identity held; `None` when the hypotheses fail.
    pub identity_holds: Option<bool>,
}

impl fmt::Display for ObstructionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "bracket: {}", self.bracket.label())?;
        writeln!(
            f,
            "functional: {} ({:.6e})",
            format_rational(&self.functional_value),
            rational_to_f64(&self.functional_value)
        )?;
        for (b, r) in &self.constraint_residuals {
            writeln!(f, "residual {}: {}", b.label(), format_rational(r))?;
        }
        writeln!(f, "verdict: {}", self.verdict)?;
        match self.identity_holds {
            Some(true) => writeln!(f, "identity: holds"),
            Some(false) => writeln!(f, "identity: FAILS"),
            None => writeln!(f, "identity: not asserted"),
        }
    }
}

fn factorial(n: usize) -> Rational {
    (1..=n as i64).fold(Rational::one(), |acc, k| acc * int(k))
}

fn require_unit_horizon(c: &DiracControl<Rational>) -> Result<()> {
    if !c.horizon.is_one() {
        return Err(Error::Domain(format!(
            "horizon {} must be normalized to 1",
            format_rational(&c.horizon)
        )));
    }
    Ok(())
}

/// `½ ∫_0^1 (ξ_{M_{k}}(t) - t^{k+1}/(k+1)!)^2 dt` from the exact trajectory.
fn sobolev_defect(c: &DiracControl<Rational>, basis: &Arc<HallBasis>, k: usize) -> Result<Rational> {
    let tr = xi_trajectory(c, basis, basis.max_degree())?;
    let reference = UPoly::monomial(Rational::one() / factorial(k + 1), k + 1);
    let mut total = Rational::zero();
    for (a, b, p) in tr.piecewise(&build_m(k))? {
        let d = &p - &reference;
        total += (&d * &d).integrate(&a, &b);
    }
    Ok(total / int(2))
}

struct Family {
    bracket: BracketTree,
    hypotheses: Vec<BracketTree>,
    /// Unconstrained partner and the sign it enters with.
    partner: Option<(BracketTree, i64)>,
    level: usize,
}

fn run(c: &DiracControl<Rational>, fam: Family) -> Result<ObstructionReport> {
    require_unit_horizon(c)?;
    let degree = 2 * fam.level + 1;
    let basis = bstar_basis(degree)?;
    let zeta = zeta_coordinates(c, &basis, degree)?;
    let reference: CoordinateVector<Rational> = reference_zeta(&basis, degree)?;
    let residuals: Vec<(BracketTree, Rational)> = fam
        .hypotheses
        .iter()
        .map(|b| (b.clone(), zeta.value(b) - reference.value(b)))
        .collect();
    let met = residuals.iter().all(|(_, r)| r.is_zero());
    let functional_value = sobolev_defect(c, &basis, fam.level - 1)?;
    let mut coordinate_value = zeta.value(&fam.bracket);
    if let Some((p, sign)) = &fam.partner {
        coordinate_value += zeta.value(p) * int(*sign);
    }
    Ok(ObstructionReport {
        bracket: fam.bracket,
        identity_holds: met.then(|| coordinate_value == functional_value),
        functional_value,
        constraint_residuals: residuals,
        verdict: if met {
            Verdict::Obstructed
        } else {
            Verdict::HypothesesNotMet
        },
        coordinate_value,
    })
}

/// First obstruction: single channel `X1`, hypotheses on `ζ_{X1}` and `ζ_{M1}`.
pub fn w1_obstruction(c: &DiracControl<Rational>) -> Result<ObstructionReport> {
    if let Some(bad) = c.channels().into_iter().find(|ch| *ch != BracketTree::x1()) {
        return Err(Error::Domain(format!("the first obstruction needs channel X1 only, got {bad}")));
    }
    run(
        c,
        Family {
            bracket: build_w(1),
            hypotheses: vec![BracketTree::x1(), build_m(1)],
            partner: Some((build_m(2), 1)),
            level: 1,
        },
    )
}

/// Second obstruction: channels within `{X1, W1}`, hypotheses on `ζ_{M_0..M_3}`.
pub fn w2_obstruction(c: &DiracControl<Rational>) -> Result<ObstructionReport> {
    let allowed = [BracketTree::x1(), build_w(1)];
    if let Some(bad) = c.channels().into_iter().find(|ch| !allowed.contains(ch)) {
        return Err(Error::Domain(format!("the second obstruction allows X1 and W1 only, got {bad}")));
    }
    run(
        c,
        Family {
            bracket: build_w(2),
            hypotheses: (0..=3).map(build_m).collect(),
            partner: Some((build_m(4), -1)),
            level: 2,
        },
    )
}

/// The brackets a flow set must avoid for the level-`n` obstruction.
pub fn forbidden_flows(n: usize) -> Vec<BracketTree> {
    let mut v: Vec<BracketTree> = (n..=2 * n).map(build_m).collect();
    v.push(build_w(n));
    v
}

/// General obstruction at level `n`: hypotheses on `X1, M_1, ..., M_{2n}`.
pub fn wn_obstruction(c: &DiracControl<Rational>, n: usize, flows: &[BracketTree]) -> Result<ObstructionReport> {
    if n == 0 {
        return Err(Error::Domain("the obstruction level starts at 1".into()));
    }
    let forbidden = forbidden_flows(n);
    if let Some(bad) = flows.iter().find(|f| forbidden.contains(f)) {
        return Err(Error::Domain(format!(
            "flow {} is excluded at level {n}",
            bad.label()
        )));
    }
    if let Some(bad) = c.channels().into_iter().find(|ch| !flows.contains(ch)) {
        return Err(Error::Domain(format!("control uses {bad} outside the declared flows")));
    }
    run(
        c,
        Family {
            bracket: build_w(n),
            hypotheses: (0..=2 * n).map(build_m).collect(),
            partner: None,
            level: n,
        },
    )
}

/// Order bound `2N` for the smallest admissible level `N <= limit`, if any.
pub fn max_order_bound(flows: &[BracketTree], limit: usize) -> Option<usize> {
    (1..=limit)
        .find(|&n| {
            let forbidden = forbidden_flows(n);
            !flows
                .iter()
                .filter(|f| **f != BracketTree::x0())
                .any(|f| forbidden.contains(f))
        })
        .map(|n| 2 * n)
}

/// Linear dependence forced on the vector fields by a high-order relative scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct DegeneracyWitness {
    pub first: BracketTree,
    pub second: BracketTree,
    /// `(ζ_first, ζ_second)`; `ζ_first f_first + ζ_second f_second = 0`.
    pub coefficients: (Rational, Rational),
    /// `ζ_first + ζ_second > 0`, which rules out both vanishing.
    pub coercive: bool,
}

/// Degree 3 gives `(M2, W1)`; degree 5 gives `(M4, W2)` and needs `f_{W1} = 0`.
pub fn degeneracy_witness(
    zeta: &CoordinateVector<Rational>,
    degree: usize,
    w1_vanishes: bool,
) -> Result<DegeneracyWitness> {
    let (first, second, needed) = match degree {
        3 => (build_m(2), build_w(1), vec![BracketTree::x1(), build_m(1)]),
        5 => {
            if !w1_vanishes {
                return Err(Error::Domain("the degree-5 witness assumes f_W1 = 0".into()));
            }
            (build_m(4), build_w(2), (0..=3).map(build_m).collect())
        }
        _ => return Err(Error::Domain(format!("no witness at degree {degree}"))),
    };
    if zeta.truncation() < degree {
        return Err(Error::Domain(format!("coordinates truncated below {degree}")));
    }
    if zeta.value(&BracketTree::x0()) != int(1) {
        return Err(Error::Domain("zeta_X0 must equal 1".into()));
    }
    for b in &needed {
        let target = if *b == BracketTree::x1() { int(1) } else { int(0) };
        if zeta.value(b) != target {
            return Err(Error::Domain(format!("matching condition on {} fails", b.label())));
        }
    }
    let a = zeta.value(&first);
    let b = zeta.value(&second);
    let coercive = (&a + &b).is_positive();
    Ok(DegeneracyWitness {
        first,
        second,
        coefficients: (a, b),
        coercive,
    })
}

/// Random control on `[0, 1]` meeting `ξ_{M_ν}(1) = 1/(ν+1)!` for `ν < matched`.
///
/// `free` impulses on `X1` get random amplitudes and `matched` more are solved
/// for; `w1` impulses on `W1` are added at times distinct from the others.
pub fn sample_matching_control<R: Rng + ?Sized>(
    rng: &mut R,
    matched: usize,
    free: usize,
    w1: usize,
) -> DiracControl<Rational> {
    const GRID: i64 = 96;
    let total = matched + free + w1;
    assert!(total as i64 <= GRID, "too many impulses for the time grid");
    loop {
        let mut ticks: Vec<i64> = Vec::with_capacity(total);
        while ticks.len() < total {
            let t = rng.random_range(0..=GRID);
            if !ticks.contains(&t) {
                ticks.push(t);
            }
        }
        let (x1_ticks, w1_ticks) = ticks.split_at(matched + free);
        let mut x1_ticks = x1_ticks.to_vec();
        x1_ticks.sort_unstable();
        // solved amplitudes go on a random subset of the X1 impulses
        let mut order: Vec<usize> = (0..x1_ticks.len()).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let solved = &order[..matched];
        let mut amps: Vec<Rational> = (0..x1_ticks.len())
            .map(|_| rat(rng.random_range(-6..=6), rng.random_range(1..=4)))
            .collect();
        let weight = |tick: i64, nu: usize| {
            let s = Rational::one() - rat(tick, GRID);
            (0..nu).fold(Rational::one(), |acc, _| acc * &s) / factorial(nu)
        };
        let mut m = Matrix::<Rational>::zeros(matched, matched);
        let mut rhs = Vec::with_capacity(matched);
        for nu in 0..matched {
            let mut r = Rational::one() / factorial(nu + 1);
            for (i, &tick) in x1_ticks.iter().enumerate() {
                if !solved.contains(&i) {
                    r -= &amps[i] * weight(tick, nu);
                }
            }
            for (col, &i) in solved.iter().enumerate() {
                m[(nu, col)] = weight(x1_ticks[i], nu);
            }
            rhs.push(r);
        }
        let Some(sol) = m.solve(&rhs) else {
            continue;
        };
        for (col, &i) in solved.iter().enumerate() {
            amps[i] = sol[col].clone();
        }
        let mut impulses: Vec<Impulse<Rational>> = x1_ticks
            .iter()
            .zip(amps)
            .filter(|(_, a)| !a.is_zero())
            .map(|(&t, a)| Impulse {
                time: rat(t, GRID),
                channel: BracketTree::x1(),
                amplitude: a,
            })
            .collect();
        for &t in w1_ticks {
            let a = rat(rng.random_range(1..=6), rng.random_range(1..=4));
            let a = if rng.random_bool(0.5) { a } else { -a };
            impulses.push(Impulse {
                time: rat(t, GRID),
                channel: build_w(1),
                amplitude: a,
            });
        }
        impulses.sort_by(|a, b| a.time.cmp(&b.time));
        return DiracControl::new(int(1), impulses).expect("times lie in [0, 1]");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::{scheme_to_control, Scheme};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn worked_control_w1() {
        let c = scheme_to_control(&Scheme::quadratic_exact()).unwrap();
        let r = w1_obstruction(&c).unwrap();
        assert_eq!(r.verdict, Verdict::Obstructed);
        assert_eq!(r.functional_value, rat(1, 48));
        assert_eq!(r.identity_holds, Some(true));
        assert!(r.functional_value.is_positive());
    }

    #[test]
    fn guard_on_hypotheses() {
        let c = scheme_to_control(&Scheme::lie_trotter()).unwrap();
        let r = w1_obstruction(&c).unwrap();
        assert_eq!(r.verdict, Verdict::HypothesesNotMet);
        assert_eq!(r.identity_holds, None);
        let off = DiracControl::on_x1(int(1), &[(rat(1, 2), rat(1, 2))]).unwrap();
        assert_eq!(w1_obstruction(&off).unwrap().verdict, Verdict::HypothesesNotMet);
    }

    #[test]
    fn domain_errors() {
        let c = DiracControl::new(
            int(1),
            vec![Impulse { time: rat(1, 2), channel: build_w(1), amplitude: int(1) }],
        )
        .unwrap();
        assert!(matches!(w1_obstruction(&c), Err(Error::Domain(_))));
        let long = DiracControl::on_x1(int(2), &[(int(1), int(2))]).unwrap();
        assert!(matches!(w1_obstruction(&long), Err(Error::Domain(_))));
        let e = wn_obstruction(&long, 1, &[BracketTree::x1(), build_m(2)]).unwrap_err();
        assert!(e.to_string().contains("M2"));
    }

    #[test]
    fn reference_trajectory_values() {
        // exp(X0 + X1) has ξ_{M1}(t) = t^2/2 and ξ_{W2}(t) = t^5/40; check at t = 1
        let basis = bstar_basis(5).unwrap();
        let reference = reference_zeta::<Rational>(&basis, 5).unwrap();
        let xi = crate::xi::zeta_to_xi(&reference).unwrap();
        assert_eq!(xi.value(&build_m(1)), rat(1, 2));
        assert_eq!(xi.value(&build_m(2)), rat(1, 6));
        assert_eq!(xi.value(&build_w(2)), rat(1, 40));
    }

    #[test]
    fn random_identities_first_and_second() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let c = sample_matching_control(&mut rng, 2, 3, 0);
            let r = w1_obstruction(&c).unwrap();
            assert_eq!(r.verdict, Verdict::Obstructed);
            assert_eq!(r.identity_holds, Some(true));
            assert!(r.functional_value.is_positive());
            let n = wn_obstruction(&c, 1, &[BracketTree::x1()]).unwrap();
            assert_eq!(n.functional_value, r.functional_value);
        }
        for _ in 0..10 {
            let c = sample_matching_control(&mut rng, 4, 2, 2);
            let r = w2_obstruction(&c).unwrap();
            assert_eq!(r.verdict, Verdict::Obstructed, "{r}");
            assert_eq!(r.identity_holds, Some(true), "{r}");
            assert!(r.functional_value.is_positive());
        }
    }

    #[test]
    fn general_level_matches_second() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let flows = [BracketTree::x1(), build_w(1)];
        for _ in 0..5 {
            let c = sample_matching_control(&mut rng, 5, 2, 1);
            let a = wn_obstruction(&c, 2, &flows).unwrap();
            let b = w2_obstruction(&c).unwrap();
            assert_eq!(a.functional_value, b.functional_value);
            assert_eq!(a.verdict, Verdict::Obstructed);
            assert_eq!(a.identity_holds, Some(true), "{a}");
        }
    }

    #[test]
    fn order_bounds() {
        let x1 = BracketTree::x1();
        assert_eq!(max_order_bound(&[x1.clone()], 6), Some(2));
        assert_eq!(max_order_bound(&[x1.clone(), build_w(1)], 6), Some(4));
        assert_eq!(max_order_bound(&[x1.clone(), build_w(1), build_w(2)], 6), Some(6));
        let everything: Vec<BracketTree> = (0..=12).map(build_m).collect();
        assert_eq!(max_order_bound(&everything, 4), None);
    }

    #[test]
    fn witnesses() {
        let basis = bstar_basis(5).unwrap();
        let c = scheme_to_control(&Scheme::quadratic_exact()).unwrap();
        let z = zeta_coordinates(&c, &basis, 5).unwrap();
        let w = degeneracy_witness(&z, 3, false).unwrap();
        assert_eq!((w.first.clone(), w.second.clone()), (build_m(2), build_w(1)));
        assert_eq!(w.coefficients, (rat(1, 48), int(0)));
        assert!(w.coercive);
        assert!(degeneracy_witness(&z, 5, false).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = sample_matching_control(&mut rng, 4, 2, 0);
        let z = zeta_coordinates(&c, &basis, 5).unwrap();
        let w = degeneracy_witness(&z, 5, true).unwrap();
        assert_eq!(w.first, build_m(4));
        assert!(w.coercive);
    }
}
