//! Second-kind coordinates along u = 1/3 δ_0 + 2/3 δ_{3/4} and the change of coordinates to the first kind.

use splitctl::hall::{bstar_basis, build_m, build_w, BracketTree};
use splitctl::scalar::{format_rational, rational_to_f64, Rational};
use splitctl::scheme::{scheme_to_control, zeta_coordinates, Scheme};
use splitctl::xi::{xi_coordinates, xi_to_zeta, xi_trajectory};

fn main() -> splitctl::Result<()> {
    let c = scheme_to_control::<Rational>(&Scheme::quadratic_exact())?;
    let basis = bstar_basis(5)?;
    let xi = xi_coordinates(&c, &basis, 5)?;
    let rows = [
        ("U(1)", BracketTree::x1()),
        ("int U", build_m(1)),
        ("1/2 int U^2", build_w(1)),
        ("int int U", build_m(2)),
    ];
    for (what, b) in &rows {
        let v = xi.value(b);
        println!("xi_{:<3} = {what:<12} = {} ({})", b.label(), format_rational(&v), rational_to_f64(&v));
    }

    println!("\nxi_M1 along the control:");
    for (a, b, p) in xi_trajectory(&c, &basis, 5)?.piecewise(&build_m(1))? {
        println!("  [{}, {}]: {p}", format_rational(&a), format_rational(&b));
    }

    let direct = zeta_coordinates(&c, &basis, 5)?;
    let via_xi = xi_to_zeta(&xi)?;
    let agree = basis.elements().iter().all(|b| direct.value(b) == via_xi.value(b));
    println!("\nzeta from the series equals zeta from xi on all {} elements: {agree}", basis.len());
    for b in basis.elements().iter().take(6) {
        println!("  zeta_{:<28} = {}", b.label(), format_rational(&direct.value(b)));
    }
    Ok(())
}
