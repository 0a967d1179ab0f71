//! Complex impulse amplitudes lift the positive-drift barrier: order 3 with four stages.

use splitctl::hall::BracketTree;
use splitctl::scheme::{AlphaDomain, BetaDomain};
use splitctl::search::{solve, SearchOutcome, SearchSpec};

fn main() -> splitctl::Result<()> {
    for beta in [BetaDomain::Real, BetaDomain::Complex] {
        let spec = SearchSpec::new(3, vec![BracketTree::x1()], AlphaDomain::Positive, beta)
            .with_stages(4)
            .with_restarts(32)
            .with_seed(1);
        match solve(&spec)? {
            SearchOutcome::Found(r) => {
                println!("beta in {beta}: {}", r.summary());
                print!("{}", r.scheme_text());
            }
            SearchOutcome::Failed(f) => println!("beta in {beta}: {f}"),
        }
    }
    Ok(())
}
