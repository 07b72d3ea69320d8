//! Sampled saddle-point certificate for the HJBI operator at the candidate value function.
//!
//! `cargo run --example verify_saddle`

use mmv::closed_form;
use mmv::verification::{self, SaddleCheckConfig};
use mmv::{ConstraintSet, Market, Preference};

fn main() -> mmv::Result<()> {
    let market = Market::from_rows(
        0.01,
        &[0.06, 0.04, 0.03],
        &[&[0.18, 0.02, 0.0, 0.0], &[0.03, 0.12, 0.05, 0.0], &[0.0, 0.04, 0.1, 0.08]],
        2.0,
    )?;
    let constraint = ConstraintSet::CoordinateSubspace { free_mask: vec![true, true, false] };
    let sol = closed_form::solve(&market, &Preference::new(0.5, 1.0)?, &constraint)?;

    let report = verification::saddle_check(&sol, &SaddleCheckConfig::default())?;
    for check in &report.checks {
        println!(
            "{:<24} residual {:.2e}  tolerance {:.2e}  {}",
            check.name,
            check.residual,
            check.tolerance,
            if check.passed { "ok" } else { "FAILED" }
        );
    }
    println!("saddle certified: {}", report.passed);
    report.into_result().map(|_| ())
}
