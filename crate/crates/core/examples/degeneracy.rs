//! A scheme beating the positive-drift barrier on a given system forces f_W1 and f_M2 to be parallel.

use splitctl::hall::bstar_basis;
use splitctl::numverify::{dependence_test, sample_points};
use splitctl::obstruction::degeneracy_witness;
use splitctl::scalar::format_rational;
use splitctl::scheme::{scheme_to_control, zeta_coordinates, Scheme};
use splitctl::systems::builtin_systems;

fn main() -> splitctl::Result<()> {
    let s = Scheme::quadratic_exact();
    let basis = bstar_basis(3)?;
    let zeta = zeta_coordinates(&scheme_to_control(&s)?, &basis, 3)?;
    let w = degeneracy_witness(&zeta, 3, false)?;
    println!(
        "relation {} f_{} + {} f_{} = 0 is forced on systems where the scheme has order 3 (coercive: {})",
        format_rational(&w.coefficients.0),
        w.first.label(),
        format_rational(&w.coefficients.1),
        w.second.label(),
        w.coercive
    );
    for sys in builtin_systems() {
        let pts = sample_points(sys.as_ref(), 16);
        for degree in [3, 5] {
            let r = dependence_test(sys.as_ref(), degree, &pts)?;
            println!(
                "  {:>14} f_{} vs f_{}: max sine {:.2e} -> {}",
                sys.name(),
                r.first.label(),
                r.second.label(),
                r.max_sine,
                if r.dependent { "dependent" } else { "independent" }
            );
        }
    }
    Ok(())
}
