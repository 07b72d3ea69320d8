//! A box constraint is not a cone: orthogonality and the saddle certificate both fail.
//!
//! `cargo run --example box_counterexample`

use mmv::closed_form::ClosedFormSolution;
use mmv::cone;
use mmv::verification::{self, SaddleCheckConfig};
use mmv::{closed_form, ConstraintSet, Market, Preference};

fn main() -> mmv::Result<()> {
    let market = Market::from_rows(0.03, &[0.08], &[&[0.2]], 1.0)?;
    let preference = Preference::new(1.0, 1.0)?;
    let bounded = ConstraintSet::Box { lower: vec![0.0], upper: vec![1.0] };

    match closed_form::solve(&market, &preference, &bounded) {
        Err(e) => println!("solve refuses the box: {e}"),
        Ok(_) => unreachable!("boxes are not conic"),
    }

    let proj = cone::project_market_price_any(&market, &bounded)?;
    println!("xi = {:.4}  clipped xi_c = {:.4}", proj.xi[0], proj.xi_c[0]);
    println!("orthogonality residual = {:.4}", cone::orthogonality_check(&proj.xi, &proj.xi_c));

    let sol = ClosedFormSolution::from_projection(&market, &preference, &bounded, proj.xi_c)?;
    let report = verification::saddle_check(&sol, &SaddleCheckConfig::default())?;
    println!(
        "saddle certified: {} (worst residual {:.3e} at {:?})",
        report.passed, report.worst_residual, report.location
    );
    Ok(())
}
