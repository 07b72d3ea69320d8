//! Projection of the market price of risk onto the image `σᵀΠ` of several cones.
//!
//! `cargo run --example cone_projection`

use mmv::cone::{self, orthogonality_check};
use mmv::{ConstraintSet, Market};
use nalgebra::DVector;

fn show(v: &DVector<f64>) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:+.5}")).collect();
    format!("[{}]", parts.join(", "))
}

fn main() -> mmv::Result<()> {
    // Three assets on three factors; asset 2 has a negative excess return.
    let market = Market::from_rows(
        0.02,
        &[0.07, 0.01, 0.05],
        &[&[0.20, 0.00, 0.00], &[0.05, 0.15, 0.00], &[0.04, 0.03, 0.25]],
        1.0,
    )?;
    let constraints = [
        ConstraintSet::FullSpace { n: 3 },
        ConstraintSet::NonnegativeOrthant { n: 3 },
        ConstraintSet::CoordinateSubspace { free_mask: vec![true, false, true] },
        // Long asset 0, or long-short spreads of 2 against 1.
        ConstraintSet::from_generators(&[vec![1.0, 0.0, 0.0], vec![0.0, -1.0, 1.0]])?,
    ];
    println!("xi = {}", show(market.market_price_vector()));
    for c in &constraints {
        let proj = cone::project_market_price(&market, c)?;
        let direction = cone::recover_portfolio_direction(&market, c, &proj.xi_c)?;
        println!(
            "{:<22} xi_c = {}  direction = {}  orthogonality = {:.1e}",
            format!("{:?}", c.kind()),
            show(&proj.xi_c),
            show(&direction),
            orthogonality_check(&proj.xi, &proj.xi_c),
        );
    }
    Ok(())
}
