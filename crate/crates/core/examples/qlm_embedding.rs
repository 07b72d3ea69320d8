//! Quadratic-loss embedding: the fixed point `β*` and recovery of MV wealth.
//!
//! `cargo run --example qlm_embedding`

use mmv::closed_form;
use mmv::simulation::{self, SimConfig, Strategy};
use mmv::{ConstraintSet, Market, Preference};

fn main() -> mmv::Result<()> {
    let market = Market::from_rows(0.03, &[0.08], &[&[0.2]], 1.0)?;
    let sol = closed_form::solve(&market, &Preference::new(1.0, 1.0)?, &ConstraintSet::NonnegativeOrthant { n: 1 })?;
    let beta = sol.beta_star();
    println!("beta* = {beta:.8}  fixed-point residual = {:.1e}", sol.beta_fixed_point_residual());

    let cfg = SimConfig::new(5_000, 512, 3);
    let aux = simulation::simulate_qlm(&sol, &cfg, beta)?;
    let mv = simulation::simulate_wealth(&sol, &cfg, Strategy::Mv)?;
    let terminal_aux: Vec<f64> = aux.iter().map(|p| *p.last().unwrap()).collect();
    let mean_aux = terminal_aux.iter().sum::<f64>() / terminal_aux.len() as f64;
    println!("E[aux X(T)] = {mean_aux:.5} (target {:.5})", -1.0 / sol.theta());

    let gap = aux
        .iter()
        .zip(&mv.wealth)
        .map(|(a, w)| (a.last().unwrap() + beta - w.last().unwrap()).abs())
        .fold(0.0, f64::max);
    println!("max |aux X(T) + beta* - MV X(T)| over paths = {gap:.2e} at dt = {:.1e}", cfg.dt(sol.horizon()));
    Ok(())
}
