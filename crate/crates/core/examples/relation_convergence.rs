//! Grid refinement of the pathwise wealth-density relation under the Euler scheme.
//!
//! `cargo run --release --example relation_convergence`

use mmv::closed_form;
use mmv::simulation::SimConfig;
use mmv::verification;
use mmv::{ConstraintSet, Market, Preference};

fn main() -> mmv::Result<()> {
    let market = Market::from_rows(0.03, &[0.08], &[&[0.2]], 1.0)?;
    let sol = closed_form::solve(&market, &Preference::new(1.0, 1.0)?, &ConstraintSet::NonnegativeOrthant { n: 1 })?;
    let study = verification::relation_study(&sol, &SimConfig::new(2_000, 64, 11), 4)?;
    println!("{:>8} {:>14} {:>14} {:>14}", "steps", "residual", "exact-density", "rms gap");
    for i in 0..study.n_steps.len() {
        println!(
            "{:>8} {:>14.3e} {:>14.3e} {:>14.3e}",
            study.n_steps[i],
            study.median_residual[i],
            study.median_exact_density_residual[i],
            study.rms_terminal_gap[i]
        );
    }
    println!(
        "order {:.3}; against the exact density {:.3}; strong order {:.3}",
        study.order, study.exact_density_order, study.strong_order
    );
    Ok(())
}
