//! Positive-drift schemes with the single flow X1: order 2 is found, order 3 never is.

use splitctl::hall::BracketTree;
use splitctl::obstruction::max_order_bound;
use splitctl::scheme::{AlphaDomain, BetaDomain};
use splitctl::search::{solve, SearchOutcome, SearchSpec};

fn main() -> splitctl::Result<()> {
    let flows = vec![BracketTree::x1()];
    println!("order bound from the obstructions: {:?}", max_order_bound(&flows, 4));
    for (target, k) in [(2, 2), (3, 3), (3, 6)] {
        let spec = SearchSpec::new(target, flows.clone(), AlphaDomain::Positive, BetaDomain::Real)
            .with_stages(k)
            .with_restarts(24)
            .with_seed(3);
        match solve(&spec)? {
            SearchOutcome::Found(r) => {
                println!("order {target}, {k} stages: found; {}", r.summary());
                print!("{}", r.scheme_text());
            }
            SearchOutcome::Failed(f) => println!("order {target}, {k} stages: {f}"),
        }
    }
    Ok(())
}
