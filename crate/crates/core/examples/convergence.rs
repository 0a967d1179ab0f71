//! One-step and multi-step error tables for the classical schemes on the test systems.

use splitctl::numverify::{default_grid, empirical_order, geometric_grid, Mode};
use splitctl::scheme::Scheme;
use splitctl::systems::builtin_systems;

fn main() -> splitctl::Result<()> {
    let schemes = [
        ("trotter", Scheme::lie_trotter()),
        ("strang", Scheme::strang()),
        ("quadratic-exact", Scheme::quadratic_exact()),
    ];
    for (name, s) in &schemes {
        for sys in builtin_systems() {
            let rep = empirical_order(&s.to_numeric(), sys.as_ref(), &default_grid(), &sys.default_point(), Mode::OneStep)?;
            println!("{name:>16} one-step  {}", rep.summary());
        }
    }
    let sys = &builtin_systems()[0];
    let rep = empirical_order(
        &Scheme::strang().to_numeric(),
        sys.as_ref(),
        &geometric_grid(2, 8),
        &sys.default_point(),
        Mode::MultiStep,
    )?;
    println!("\nstrang multi-step on {} (final time 1):", sys.name());
    print!("{}", rep.to_csv());
    println!("{}", rep.summary());
    Ok(())
}
