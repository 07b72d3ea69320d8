//! Monte Carlo MV and MMV objectives of the optimum and of perturbed strategies.
//!
//! `cargo run --release --example objectives`

use mmv::closed_form;
use mmv::simulation::{self, SimConfig, Strategy};
use mmv::verification::{self, Pairing};
use mmv::{ConstraintSet, Market, Preference};

fn main() -> mmv::Result<()> {
    let market = Market::from_rows(0.03, &[0.08], &[&[0.2]], 1.0)?;
    let sol = closed_form::solve(&market, &Preference::new(1.0, 1.0)?, &ConstraintSet::NonnegativeOrthant { n: 1 })?;
    let target = sol.value_function(0.0, sol.x0(), 1.0)?;
    let cfg = SimConfig::new(50_000, 128, 7).with_antithetic(true);
    println!("closed-form value {target:.6}");
    for strategy in [Strategy::Mmv, Strategy::Zero, Strategy::Scaled(-0.5), Strategy::Scaled(0.5)] {
        let sample = simulation::simulate_terminal(&sol, &cfg, strategy, None)?;
        let mv = verification::estimate_mv_objective_with(&sample.wealth, sol.theta(), Pairing::Antithetic)?;
        let mmv = verification::estimate_mmv_objective_with(
            &sample.wealth,
            &sample.density,
            sol.theta(),
            Pairing::Antithetic,
        )?;
        println!(
            "{:<12} MV {:.5} ± {:.5} (z {:+.2})   MMV at η* {:.5} ± {:.5}",
            strategy.to_string(),
            mv.value,
            mv.std_error,
            mv.z_score(target),
            mmv.value,
            mmv.std_error
        );
    }
    Ok(())
}
