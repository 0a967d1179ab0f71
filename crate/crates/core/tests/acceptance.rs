//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N: PASS|FAIL ...` line; criterion 8 is reported, not asserted.

use std::fs;
use std::time::{Duration, Instant};

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use splitctl::freealg::Polynomial;
use splitctl::hall::{bstar_basis, build_m, build_w, generate_hall, BracketTree, OrderPolicy};
use splitctl::numverify::{default_grid, empirical_order, geometric_grid, Mode, EXACT_THRESHOLD};
use splitctl::obstruction::{sample_matching_control, w1_obstruction, w2_obstruction, Verdict};
use splitctl::scalar::{int, rat, Rational};
use splitctl::scheme::{
    order_of_scheme, scheme_to_control, zeta_coordinates, AlphaDomain, BetaDomain, DiracControl, Impulse, NumScheme,
    Scheme,
};
use splitctl::search::{solve, SearchOutcome, SearchResult, SearchSpec};
use splitctl::systems::{LinearPair, PolySystem, TestSystem};
use splitctl::upoly::UPoly;
use splitctl::xi::{xi_coordinates, xi_to_zeta};

fn report(n: usize, ok: bool, detail: &str) {
    println!("criterion {n}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
}

fn within(t: Instant, limit: Duration) -> bool {
    t.elapsed() < limit
}

fn data(rel: &str) -> String {
    let path = format!("{}/../../data/{rel}", env!("CARGO_MANIFEST_DIR"));
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

#[test]
fn criterion_01_bch_degree_three() {
    let t = Instant::now();
    let n = 3;
    let a = Polynomial::<Rational>::letter(0, 2, n);
    let b = Polynomial::<Rational>::letter(1, 2, n);
    let z = (&a.exp().unwrap() * &b.exp().unwrap()).log().unwrap();
    let ab = a.bracket(&b).unwrap();
    let expected = &(&(&(&a + &b) + &ab.scale(&rat(1, 2))) + &a.bracket(&ab).unwrap().scale(&rat(1, 12)))
        + &b.bracket(&b.bracket(&a).unwrap()).unwrap().scale(&rat(1, 12));
    let exact = z == expected;
    let fast = within(t, Duration::from_secs(1));
    report(1, exact && fast, &format!("coefficient-exact {exact}, {:?}", t.elapsed()));
    assert!(exact && fast);
}

#[test]
fn criterion_02_hall_witt_counts() {
    let t = Instant::now();
    let per_degree = [2, 1, 2, 3, 6, 9, 18, 30];
    let mut ok = true;
    let mut detail = String::new();
    for policy in [OrderPolicy::BstarCompatible, OrderPolicy::Lyndon] {
        let basis = generate_hall(2, 8, policy).unwrap();
        let counts: Vec<usize> = (1..=8).map(|d| basis.count_in_degree(d)).collect();
        let cumulative = |n: usize| counts[..n].iter().sum::<usize>();
        let good = counts == per_degree && cumulative(5) == 14 && cumulative(6) == 23 && cumulative(8) == 71;
        ok &= good;
        detail.push_str(&format!("{policy}: {counts:?} cumulative {}/{}/{}; ", cumulative(5), cumulative(6), cumulative(8)));
    }
    let fast = within(t, Duration::from_secs(5));
    report(2, ok && fast, &format!("{detail}{:?}", t.elapsed()));
    assert!(ok && fast);
}

#[test]
fn criterion_03_classical_orders() {
    let t = Instant::now();
    let lt = order_of_scheme(&Scheme::lie_trotter(), 4).unwrap();
    let st = order_of_scheme(&Scheme::strang(), 4).unwrap();
    let ok = lt.order == 1 && !lt.saturated && st.order == 2 && !st.saturated;
    let fast = within(t, Duration::from_secs(1));
    report(3, ok && fast, &format!("Lie-Trotter {}, Strang {}, {:?}", lt.order, st.order, t.elapsed()));
    assert!(ok && fast);
}

#[test]
fn criterion_04_worked_example() {
    let control = DiracControl::on_x1(int(1), &[(int(0), rat(1, 3)), (rat(3, 4), rat(2, 3))]).unwrap();
    let basis = bstar_basis(3).unwrap();
    let xi = xi_coordinates(&control, &basis, 3).unwrap();
    let values = [
        (BracketTree::x1(), int(1)),
        (build_m(1), rat(1, 2)),
        (build_w(1), rat(1, 6)),
        (build_m(2), rat(3, 16)),
    ];
    let coords_ok = values.iter().all(|(b, v)| xi.value(b) == *v);

    let quadratic_exact = Scheme::parse(&data("schemes/quadratic-exact.scheme")).unwrap();
    let same_control = scheme_to_control::<Rational>(&quadratic_exact).unwrap() == control;
    let sys = PolySystem::quadratic();
    let grid = geometric_grid(3, 10);
    let rep = empirical_order(&quadratic_exact.to_numeric(), &sys, &grid, &sys.default_point(), Mode::OneStep).unwrap();
    let worst = rep.errors.iter().cloned().fold(0.0, f64::max);
    let exact = rep.exact && worst <= 1e-12;
    let ok = coords_ok && same_control && exact;
    report(
        4,
        ok,
        &format!("U(1)=1, int U=1/2, 1/2 int U^2=1/6, int int U=3/16: {coords_ok}; quadratic-exact worst one-step error {worst:.2e}"),
    );
    assert!(ok);
}

/// `½ ∫_0^1 (U(t) - t)^2`, with `U` the running sum of the `X1` amplitudes.
fn w1_functional(c: &DiracControl<Rational>) -> Rational {
    let mut total = Rational::zero();
    let mut u = Rational::zero();
    let mut t = Rational::zero();
    for imp in c.impulses.iter().chain(std::iter::once(&Impulse {
        time: int(1),
        channel: BracketTree::x1(),
        amplitude: int(0),
    })) {
        // ∫_t^s (u - r)^2 dr
        let s = &imp.time;
        let cube = |x: Rational| &x * &x * &x;
        total += (cube(s - &u) - cube(&t - &u)) / int(3);
        if imp.channel == BracketTree::x1() {
            u += &imp.amplitude;
        }
        t = s.clone();
    }
    total / int(2)
}

/// `½ ∫_0^1 (∫_0^t U - t^2/2)^2`.
fn w2_functional(c: &DiracControl<Rational>) -> Rational {
    let mut total = Rational::zero();
    let mut u = Rational::zero();
    let mut prim = Rational::zero();
    let mut t = Rational::zero();
    let half_sq = UPoly::monomial(rat(1, 2), 2);
    let end = Impulse {
        time: int(1),
        channel: BracketTree::x1(),
        amplitude: int(0),
    };
    for imp in c.impulses.iter().chain(std::iter::once(&end)) {
        let s = &imp.time;
        // on [t, s]: ∫_0^r U = prim + u (r - t)
        let p = UPoly::new(vec![&prim - &u * &t, u.clone()]);
        let d = &p - &half_sq;
        total += (&d * &d).integrate(&t, s);
        prim = &prim + &u * (s - &t);
        if imp.channel == BracketTree::x1() {
            u += &imp.amplitude;
        }
        t = s.clone();
    }
    total / int(2)
}

#[test]
fn criterion_05_coercivity_identities() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let samples = 200;
    let basis = bstar_basis(5).unwrap();

    let mut first_ok = 0;
    let mut first_positive = true;
    for _ in 0..samples {
        let free = rng.random_range(1..=4);
        let c = sample_matching_control(&mut rng, 2, free, 0);
        let r = w1_obstruction(&c).unwrap();
        let z = zeta_coordinates(&c, &basis, 3).unwrap();
        let rhs = w1_functional(&c);
        let lhs = z.value(&build_w(1)) + z.value(&build_m(2));
        if r.verdict == Verdict::Obstructed && lhs == rhs && rhs == r.functional_value {
            first_ok += 1;
        }
        first_positive &= rhs.is_positive();
    }

    let mut plus_ok = 0;
    let mut minus_ok = 0;
    let mut second_positive = true;
    for _ in 0..samples {
        let free = rng.random_range(1..=3);
        let w1 = rng.random_range(0..=2);
        let c = sample_matching_control(&mut rng, 4, free, w1);
        let r = w2_obstruction(&c).unwrap();
        assert_eq!(r.verdict, Verdict::Obstructed);
        let z = zeta_coordinates(&c, &basis, 5).unwrap();
        let rhs = w2_functional(&c);
        assert_eq!(rhs, r.functional_value);
        let (w2, m4) = (z.value(&build_w(2)), z.value(&build_m(4)));
        if &w2 + &m4 == rhs {
            plus_ok += 1;
        }
        if &w2 - &m4 == rhs {
            minus_ok += 1;
        }
        second_positive &= rhs.is_positive();
    }
    let fast = within(t, Duration::from_secs(60));
    let ok = first_ok == samples && plus_ok == samples && first_positive && second_positive && fast;
    report(
        5,
        ok,
        &format!(
            "zeta_W1 + zeta_M2 = 1/2 int (U-t)^2 on {first_ok}/{samples}; \
             zeta_W2 + zeta_M4 = 1/2 int (xi_M1 - t^2/2)^2 on {plus_ok}/{samples}; \
             with zeta_W2 - zeta_M4 instead: {minus_ok}/{samples}; positive {}; {:?}",
            first_positive && second_positive,
            t.elapsed()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_06_order_barrier() {
    let t = Instant::now();
    let restarts = 50;
    let x1 = vec![BracketTree::x1()];
    let mut min_best = f64::INFINITY;
    let mut any_found = false;
    for k in 1..=8 {
        let spec = SearchSpec::new(3, x1.clone(), AlphaDomain::Positive, BetaDomain::Real)
            .with_stages(k)
            .with_restarts(restarts)
            .with_seed(k as u64);
        match solve(&spec).unwrap() {
            SearchOutcome::Found(_) => any_found = true,
            SearchOutcome::Failed(f) => min_best = min_best.min(f.best_residual),
        }
    }
    let order2 = SearchSpec::new(2, x1, AlphaDomain::Positive, BetaDomain::Real)
        .with_stages(2)
        .with_restarts(restarts)
        .with_seed(1);
    let two = solve(&order2).unwrap().found().is_some();
    let fast = within(t, Duration::from_secs(300));
    let ok = !any_found && min_best >= 1e-4 && two && fast;
    report(
        6,
        ok,
        &format!(
            "order 3, k = 1..8, {restarts} restarts each: smallest residual {min_best:.3e}; order 2 found {two}; {:?}",
            t.elapsed()
        ),
    );
    assert!(ok);
}

fn linear_pair_slope(s: &NumScheme, grid: &[f64]) -> (bool, Option<f64>) {
    let sys = LinearPair::standard();
    let rep = empirical_order(s, &sys, grid, &sys.default_point(), Mode::OneStep).unwrap();
    (rep.exact, rep.slope)
}

fn exact_order(r: &SearchResult) -> Option<usize> {
    r.certificate.as_ref().map(|c| order_of_scheme(c, r.spec.target_order + 1).unwrap().order)
}

#[test]
fn criterion_07_commutator_order_four() {
    let t = Instant::now();
    let spec = SearchSpec::parse(&data("specs/order4-w1.spec")).unwrap();
    assert_eq!(spec.flows, vec![BracketTree::x1(), build_w(1)]);
    assert_eq!((spec.alpha_domain, spec.beta_domain), (AlphaDomain::Positive, BetaDomain::Real));
    let out = solve(&spec).unwrap();
    let (ok, detail) = match out.found() {
        Some(r) => {
            let exact = exact_order(r);
            let (_, slope) = linear_pair_slope(&r.scheme, &default_grid());
            let slope_ok = slope.is_some_and(|s| (s - 5.0).abs() <= 0.3);
            (
                exact == Some(4) || slope_ok,
                format!("exact order {exact:?}, LinearPair slope {slope:?}"),
            )
        }
        None => (false, "search failed".to_string()),
    };
    let fast = within(t, Duration::from_secs(600));
    report(7, ok && fast, &format!("{detail}; {:?}", t.elapsed()));
    assert!(ok && fast);
}

#[test]
fn criterion_08_commutator_order_six_soft() {
    let t = Instant::now();
    let spec = SearchSpec::parse(&data("specs/order6-w1w2.spec")).unwrap();
    let detail = match solve(&spec).unwrap() {
        SearchOutcome::Found(r) => {
            let (_, slope) = linear_pair_slope(&r.scheme, &geometric_grid(1, 10));
            let ok = slope.is_some_and(|s| (s - 7.0).abs() <= 0.5);
            (ok, format!("LinearPair slope {slope:?}, residual {:.2e}", r.residual_norm))
        }
        SearchOutcome::Failed(f) => (false, f.to_string()),
    };
    let ok = detail.0 && within(t, Duration::from_secs(1800));
    report(8, ok, &format!("soft, not asserted; {}; {:?}", detail.1, t.elapsed()));
}

#[test]
fn criterion_09_complex_order_three() {
    let t = Instant::now();
    let spec = SearchSpec::parse(&data("specs/complex-order3.spec")).unwrap();
    assert_eq!(spec.alpha_domain, AlphaDomain::Positive);
    assert_eq!(spec.beta_domain, BetaDomain::Complex);
    let (ok, detail) = match solve(&spec).unwrap().found() {
        Some(r) => {
            let stages = r.scheme.stages.iter().filter(|s| s.beta.norm() > 0.0).count();
            let exact = exact_order(r);
            let (_, slope) = linear_pair_slope(&r.scheme, &default_grid());
            let slope_ok = slope.is_some_and(|s| (s - 4.0).abs() <= 0.3);
            (
                stages <= 6 && (exact == Some(3) || slope_ok),
                format!("{stages} stages, exact order {exact:?}, LinearPair slope {slope:?}"),
            )
        }
        None => (false, "search failed".to_string()),
    };
    let fast = within(t, Duration::from_secs(600));
    report(9, ok && fast, &format!("{detail}; {:?}", t.elapsed()));
    assert!(ok && fast);
}

fn random_control(rng: &mut ChaCha8Rng, with_w1: bool) -> DiracControl<Rational> {
    let horizon = rat(rng.random_range(1..=8), 4);
    let n = rng.random_range(1..=5);
    let mut ticks: Vec<i64> = (0..n).map(|_| rng.random_range(0..=24)).collect();
    ticks.sort_unstable();
    let impulses = ticks
        .into_iter()
        .map(|k| Impulse {
            time: &horizon * rat(k, 24),
            channel: if with_w1 && rng.random_bool(0.3) {
                build_w(1)
            } else {
                BracketTree::x1()
            },
            amplitude: rat(rng.random_range(-6..=6), rng.random_range(1..=5)),
        })
        .collect();
    DiracControl::new(horizon, impulses).unwrap()
}

#[test]
fn criterion_10_xi_zeta_diffeomorphism() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let b3 = bstar_basis(3).unwrap();
    let b5 = bstar_basis(5).unwrap();
    let mut low_ok = 0;
    let mut full_ok = 0;
    let samples = 100;
    for i in 0..samples {
        let c = random_control(&mut rng, false);
        let xi = xi_coordinates(&c, &b3, 3).unwrap();
        let z = zeta_coordinates(&c, &b3, 3).unwrap();
        let x = |b: &BracketTree| xi.value(b);
        let (x0, x1, m1, m2, w1) = (
            x(&BracketTree::x0()),
            x(&BracketTree::x1()),
            x(&build_m(1)),
            x(&build_m(2)),
            x(&build_w(1)),
        );
        let half = rat(1, 2);
        let twelfth = rat(1, 12);
        let good = z.value(&BracketTree::x0()) == x0
            && z.value(&BracketTree::x1()) == x1
            && z.value(&build_m(1)) == &m1 - &half * &x0 * &x1
            && z.value(&build_m(2)) == &m2 - &half * &x0 * &m1 + &twelfth * &x0 * &x0 * &x1
            && z.value(&build_w(1)) == &w1 - &half * &m1 * &x1 + &twelfth * &x1 * &x1 * &x0;
        low_ok += good as usize;

        let c5 = random_control(&mut rng, i % 2 == 1);
        let direct = zeta_coordinates(&c5, &b5, 5).unwrap();
        let via = xi_to_zeta(&xi_coordinates(&c5, &b5, 5).unwrap()).unwrap();
        full_ok += b5.elements().iter().all(|b| direct.value(b) == via.value(b)) as usize;
    }
    let fast = within(t, Duration::from_secs(60));
    let ok = low_ok == samples && full_ok == samples && fast;
    report(
        10,
        ok,
        &format!("degree-3 identities {low_ok}/{samples}, xi_to_zeta at N=5 {full_ok}/{samples}, {:?}", t.elapsed()),
    );
    assert!(ok);
}

#[test]
fn exact_threshold_is_the_criterion_four_tolerance() {
    assert!(EXACT_THRESHOLD <= 1e-12);
}
