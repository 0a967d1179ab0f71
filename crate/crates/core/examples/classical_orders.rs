//! Exact orders of Lie–Trotter, Strang and the quadratic-exact scheme, with their leading defects.

use splitctl::scalar::{format_gauss, gauss_to_c64};
use splitctl::scheme::{order_of_scheme, Scheme};

fn main() -> splitctl::Result<()> {
    let cases = [
        ("Lie-Trotter", Scheme::lie_trotter()),
        ("Strang", Scheme::strang()),
        ("quadratic-exact", Scheme::quadratic_exact()),
    ];
    for (name, s) in cases {
        let r = order_of_scheme(&s, 5)?;
        println!("{name}: {r}");
        for d in &r.defects {
            println!(
                "    zeta_{} = {} ({:.6}), exact flow has {}",
                d.bracket.label(),
                format_gauss(&d.value),
                gauss_to_c64(&d.value).re,
                format_gauss(&d.target)
            );
        }
        print!("{}", s.to_text().lines().map(|l| format!("    | {l}\n")).collect::<String>());
    }
    Ok(())
}
