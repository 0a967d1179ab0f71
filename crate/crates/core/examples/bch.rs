//! Baker–Campbell–Hausdorff series from truncated exp/log, in words and in Hall coordinates.

use splitctl::freealg::Polynomial;
use splitctl::hall::{bstar_basis, lie_coordinates};
use splitctl::scalar::{format_rational, rat, Rational};

fn main() -> splitctl::Result<()> {
    for n in [3, 4] {
        let a = Polynomial::<Rational>::letter(0, 2, n);
        let b = Polynomial::<Rational>::letter(1, 2, n);
        let z = (&a.exp()? * &b.exp()?).log()?;
        println!("log(e^A e^B) through degree {n}, A = X0, B = X1:");
        println!("  {z}");
        let basis = bstar_basis(n)?;
        let coords = lie_coordinates(&z, &basis)?;
        for (bracket, c) in coords.iter() {
            if !c.eq(&rat(0, 1)) {
                println!("  {:>28}  {}", bracket.to_string(), format_rational(c));
            }
        }
    }
    let n = 3;
    let a = Polynomial::<Rational>::letter(0, 2, n);
    let b = Polynomial::<Rational>::letter(1, 2, n);
    let ab = a.bracket(&b)?;
    let expected = &(&(&(&a + &b) + &ab.scale(&rat(1, 2))) + &a.bracket(&ab)?.scale(&rat(1, 12)))
        + &b.bracket(&b.bracket(&a)?)?.scale(&rat(1, 12));
    let z = (&a.exp()? * &b.exp()?).log()?;
    println!("A + B + [A,B]/2 + [A,[A,B]]/12 + [B,[B,A]]/12 matches: {}", z == expected);
    Ok(())
}
