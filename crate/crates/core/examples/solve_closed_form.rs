//! Closed-form MMV solution for a one-asset market with shorting forbidden.
//!
//! `cargo run --example solve_closed_form`

use mmv::closed_form;
use mmv::{ConstraintSet, Market, Preference};

fn main() -> mmv::Result<()> {
    let market = Market::from_rows(0.03, &[0.08], &[&[0.2]], 1.0)?;
    let preference = Preference::new(1.0, 1.0)?;
    let sol = closed_form::solve(&market, &preference, &ConstraintSet::NonnegativeOrthant { n: 1 })?;

    println!("{}", serde_json::to_string_pretty(&sol.summary()).expect("summary serialises"));

    // MV and MMV feedback maps agree on the whole state space.
    for (t, x) in [(0.0, 1.0), (0.5, 0.7), (0.9, 2.5)] {
        let mmv = sol.mmv_strategy(t, x, 0.0)?;
        let mv = sol.mv_strategy(t, x)?;
        println!("t={t:.1} x={x:.1}  mmv={:.6}  mv={:.6}", mmv[0], mv[0]);
    }
    println!("threshold at T: {:.6}", sol.threshold().value(sol.horizon()));
    Ok(())
}
