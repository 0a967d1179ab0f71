//! Coercivity identities on random controls that match the exact flow at low degree.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use splitctl::cli::dual;
use splitctl::obstruction::{sample_matching_control, w1_obstruction, w2_obstruction, wn_obstruction};
use splitctl::hall::{build_w, BracketTree};

fn main() -> splitctl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    println!("zeta_W1 + zeta_M2 = 1/2 int (U - t)^2 on X1-only controls:");
    for _ in 0..4 {
        let c = sample_matching_control(&mut rng, 2, 3, 0);
        let r = w1_obstruction(&c)?;
        println!("  {} impulses: {}  identity {:?}", c.impulses.len(), dual(&r.functional_value), r.identity_holds);
    }

    println!("\nzeta_W2 - zeta_M4 = 1/2 int (xi_M1 - t^2/2)^2 with W1 impulses allowed:");
    for _ in 0..4 {
        let c = sample_matching_control(&mut rng, 4, 2, 2);
        let r = w2_obstruction(&c)?;
        println!("  {} impulses: {}  identity {:?}", c.impulses.len(), dual(&r.functional_value), r.identity_holds);
    }

    println!("\nlevel 3 with flows X1, W1, W2 (hypotheses on M0..M6):");
    let flows = [BracketTree::x1(), build_w(1), build_w(2)];
    let c = sample_matching_control(&mut rng, 7, 1, 0);
    let r = wn_obstruction(&c, 3, &flows)?;
    print!("{r}");
    Ok(())
}
