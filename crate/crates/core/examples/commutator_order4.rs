//! Order 4 with positive drifts becomes reachable once the bracket flow W1 is available.

use splitctl::hall::{build_w, BracketTree};
use splitctl::numverify::{default_grid, empirical_order, Mode};
use splitctl::obstruction::max_order_bound;
use splitctl::scheme::{AlphaDomain, BetaDomain};
use splitctl::search::{scheme_residuals, solve, SearchOutcome, SearchSpec};
use splitctl::systems::{LinearPair, TestSystem};

fn main() -> splitctl::Result<()> {
    let flows = vec![BracketTree::x1(), build_w(1)];
    println!("order bound for {{X1, W1}}: {:?}", max_order_bound(&flows, 4));
    let spec = SearchSpec::new(4, flows, AlphaDomain::Positive, BetaDomain::Real)
        .with_stages(3)
        .with_restarts(32)
        .with_seed(1);
    let SearchOutcome::Found(r) = solve(&spec)? else {
        println!("no scheme found");
        return Ok(());
    };
    println!("{}", r.summary());
    print!("{}", r.scheme_text());

    let worst = scheme_residuals(&r.scheme, 5)?
        .into_iter()
        .filter(|(b, _)| b.len() == 5)
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max);
    println!("largest degree-5 defect: {worst:.3e}");

    let sys = LinearPair::standard();
    let rep = empirical_order(&r.scheme, &sys, &default_grid(), &sys.default_point(), Mode::OneStep)?;
    print!("{}", rep.to_csv());
    println!("{}", rep.summary());
    Ok(())
}
