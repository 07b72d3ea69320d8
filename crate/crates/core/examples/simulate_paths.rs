//! Euler simulation of optimal wealth and the density process, written to CSV.
//!
//! `cargo run --example simulate_paths -- [OUT.csv]`

use std::fs::File;
use std::io::BufWriter;

use mmv::closed_form;
use mmv::simulation::{self, SimConfig, Strategy};
use mmv::{ConstraintSet, Market, Preference};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let market = Market::from_rows(0.03, &[0.08, 0.06], &[&[0.2, 0.0], &[0.1, 0.15]], 1.0)?;
    let sol = closed_form::solve(&market, &Preference::new(2.0, 1.0)?, &ConstraintSet::NonnegativeOrthant { n: 2 })?;
    let cfg = SimConfig::new(2_000, 128, 42).with_antithetic(true);

    let paths = simulation::simulate_wealth(&sol, &cfg, Strategy::Mmv)?;
    let summary = simulation::summarize(&sol, &cfg, Strategy::Mmv, &paths)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    println!("closed-form E[X(T)] = {:.6}", sol.expected_terminal_wealth());

    let out =
        std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("mmv_paths.csv").display().to_string());
    paths.write_csv(BufWriter::new(File::create(&out)?))?;
    println!("paths written to {out}");
    Ok(())
}
