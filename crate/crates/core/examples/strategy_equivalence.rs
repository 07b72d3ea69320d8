//! Certificate that MMV and MV optimal strategies coincide on cones.
//!
//! `cargo run --example strategy_equivalence`

use mmv::closed_form;
use mmv::simulation::SimConfig;
use mmv::verification::{self, EquivalenceConfig};
use mmv::{ConstraintSet, Market, Preference};

fn main() -> mmv::Result<()> {
    let market = Market::from_rows(0.02, &[0.09, 0.05], &[&[0.25, 0.0], &[0.08, 0.2]], 1.5)?;
    let cone = ConstraintSet::from_generators(&[vec![1.0, 0.0], vec![1.0, 1.0]])?;
    let sol = closed_form::solve(&market, &Preference::new(1.0, 1.0)?, &cone)?;

    let comparison = sol.factor_comparison(0.0)?;
    println!("psi = {:.15}  psi_tilde = {:.15}", comparison.psi, comparison.psi_tilde);

    let report =
        verification::equivalence_certificate(&sol, &EquivalenceConfig::default(), &SimConfig::new(200, 64, 1))?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
    report.into_result().map(|_| ())
}
