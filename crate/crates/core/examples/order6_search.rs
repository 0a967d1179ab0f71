//! Order 6 with positive drifts and the flows X1, W1, W2, searched over palindromic schemes.
//!
//! Takes about a minute on one core in release mode.

use splitctl::hall::{build_w, BracketTree};
use splitctl::scheme::{AlphaDomain, BetaDomain};
use splitctl::search::{solve, SearchOutcome, SearchSpec};

fn main() -> splitctl::Result<()> {
    let mut spec = SearchSpec::new(
        6,
        vec![BracketTree::x1(), build_w(1), build_w(2)],
        AlphaDomain::Positive,
        BetaDomain::Real,
    )
    .with_stages(17)
    .with_symmetric(true)
    .with_restarts(16)
    .with_seed(1);
    spec.max_iterations = 3000;
    match solve(&spec)? {
        SearchOutcome::Found(r) => {
            println!("{}", r.summary());
            print!("{}", r.scheme_text());
        }
        SearchOutcome::Failed(f) => println!("{f}"),
    }
    Ok(())
}
