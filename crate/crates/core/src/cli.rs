//! The `mmv` command line: `solve`, `project`, `simulate`, `verify` and `evaluate`.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration or I/O
//! error, 3 domain error (the error variant name is printed on stderr).
//! JSON goes to stdout, and also to `PREFIX.json` when `--out PREFIX` is set.
//! `simulate` writes `PREFIX.csv` and `PREFIX.json`, or the CSV to stdout.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::closed_form::{self, ClosedFormSolution};
use crate::cone;
use crate::config::{Resolved, RunConfig};
use crate::simulation::{self, SimConfig, Strategy};
use crate::verification::{self, EquivalenceConfig, Estimate, Pairing, SaddleCheckConfig, VerificationReport};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mmv", version, about = "Cone-constrained MMV/MV strategies: solve, simulate, verify")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output prefix for written artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form solution: ξ, ξ_c, f(0), β*, direction, η*, threshold.
    Solve,
    /// Projection of the market price of risk; also accepts boxes.
    Project,
    /// Simulate wealth and density paths.
    Simulate(SimArgs),
    /// Run verification suites.
    Verify(VerifyArgs),
    /// Monte Carlo estimates of the MV and MMV objectives for a strategy.
    Evaluate(SimArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// mmv, mv, zero or scaled:EPS for (1+EPS) times the optimum.
    #[arg(long, default_value = "mmv")]
    pub strategy: Strategy,
    #[arg(long)]
    pub antithetic: bool,
    #[arg(long)]
    pub exact_relation: bool,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Orthogonality,
    Saddle,
    Relation,
    Monotone,
    Equivalence,
    Beta,
    All,
}

impl Suite {
    fn expand(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![
                Suite::Orthogonality,
                Suite::Saddle,
                Suite::Relation,
                Suite::Monotone,
                Suite::Equivalence,
                Suite::Beta,
            ],
            s => vec![s],
        }
    }

    fn name(self) -> &'static str {
        match self {
            Suite::Orthogonality => "orthogonality",
            Suite::Saddle => "saddle",
            Suite::Relation => "relation",
            Suite::Monotone => "monotone",
            Suite::Equivalence => "equivalence",
            Suite::Beta => "beta",
            Suite::All => "all",
        }
    }
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Domain(Error),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_CONFIG;
            }
            let _ = write!(stdout, "{}", e.render());
            return EXIT_OK;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(Failure::Verification) => EXIT_VERIFICATION_FAILED,
        Err(Failure::Config(msg)) => {
            let _ = writeln!(stderr, "config error: {msg}");
            EXIT_CONFIG
        }
        Err(Failure::Domain(e)) => {
            let _ = writeln!(stderr, "{}: {e}", e.name());
            EXIT_DOMAIN
        }
    }
}

fn load(cli: &Cli) -> Result<(RunConfig, Resolved), Failure> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::Config("--config PATH is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let cfg = RunConfig::from_json(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let resolved = cfg.resolve()?;
    Ok((cfg, resolved))
}

fn solve(resolved: &Resolved) -> Result<ClosedFormSolution, Failure> {
    Ok(closed_form::solve(&resolved.market, &resolved.preference, &resolved.constraint)?)
}

fn with_extension(prefix: &Path, ext: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(".");
    name.push(ext);
    PathBuf::from(name)
}

fn emit<T: Serialize>(cli: &Cli, value: &T, stdout: &mut dyn Write) -> Result<(), Failure> {
    let Format::Json = cli.format;
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Config(e.to_string()))?;
    text.push('\n');
    stdout.write_all(text.as_bytes())?;
    if let Some(prefix) = &cli.out {
        fs::write(with_extension(prefix, "json"), &text)?;
    }
    Ok(())
}

fn sim_config(cfg: &RunConfig, paths: Option<usize>, steps: Option<usize>, seed: Option<u64>) -> SimConfig {
    let base = cfg.simulation.clone().unwrap_or_else(|| SimConfig::new(10_000, 256, 0));
    SimConfig {
        n_paths: paths.unwrap_or(base.n_paths),
        n_steps: steps.unwrap_or(base.n_steps),
        seed: seed.unwrap_or(base.seed),
        ..base
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<(), Failure> {
    let (cfg, resolved) = load(cli)?;
    match &cli.command {
        Command::Solve => {
            let sol = solve(&resolved)?;
            emit(cli, &sol.summary(), stdout)
        }
        Command::Project => {
            let proj = cone::project_market_price_any(&resolved.market, &resolved.constraint)?;
            let direction = if proj.conic {
                let d = cone::recover_portfolio_direction(&resolved.market, &resolved.constraint, &proj.xi_c)?;
                Some(d.iter().copied().collect::<Vec<_>>())
            } else {
                None
            };
            let value = json!({
                "constraint_kind": resolved.constraint.kind(),
                "conic": proj.conic,
                "xi": proj.xi.iter().collect::<Vec<_>>(),
                "xi_c": proj.xi_c.iter().collect::<Vec<_>>(),
                "coefficients": proj.coefficients.as_ref().map(|c| c.iter().copied().collect::<Vec<_>>()),
                "orthogonality_residual": cone::orthogonality_check(&proj.xi, &proj.xi_c),
                "direction": direction,
            });
            emit(cli, &value, stdout)
        }
        Command::Simulate(args) => {
            let sol = solve(&resolved)?;
            let sim = SimConfig {
                antithetic: args.antithetic || cfg.simulation.as_ref().is_some_and(|s| s.antithetic),
                scheme: if args.exact_relation {
                    simulation::Scheme::ExactRelation
                } else {
                    cfg.simulation.as_ref().map(|s| s.scheme).unwrap_or_default()
                },
                ..sim_config(&cfg, args.paths, args.steps, args.seed)
            };
            let paths = simulation::simulate_wealth(&sol, &sim, args.strategy)?;
            let summary = simulation::summarize(&sol, &sim, args.strategy, &paths)?;
            match &cli.out {
                Some(prefix) => {
                    let file = fs::File::create(with_extension(prefix, "csv"))?;
                    paths.write_csv(io::BufWriter::new(file))?;
                    let mut text =
                        serde_json::to_string_pretty(&summary).map_err(|e| Failure::Config(e.to_string()))?;
                    text.push('\n');
                    fs::write(with_extension(prefix, "json"), text)?;
                    Ok(())
                }
                None => Ok(paths.write_csv(stdout)?),
            }
        }
        Command::Verify(args) => {
            let sim = sim_config(&cfg, args.paths.or(Some(2_000)), args.steps, args.seed);
            let saddle = cfg.verification.clone().unwrap_or_default();
            let reports = run_suites(&resolved, args.suite, &sim, &saddle)?;
            let passed = reports.iter().all(|r| r.passed);
            emit(cli, &json!({ "passed": passed, "reports": reports }), stdout)?;
            if passed {
                Ok(())
            } else {
                Err(Failure::Verification)
            }
        }
        Command::Evaluate(args) => {
            let sol = solve(&resolved)?;
            let sim = SimConfig { antithetic: args.antithetic, ..sim_config(&cfg, args.paths, args.steps, args.seed) };
            if args.exact_relation {
                return Err(Failure::Config("evaluate always uses the Euler scheme".into()));
            }
            let sample = simulation::simulate_terminal(&sol, &sim, args.strategy, None)?;
            let pairing = if sim.antithetic { Pairing::Antithetic } else { Pairing::Independent };
            let theta = sol.theta();
            let mv = verification::estimate_mv_objective_with(&sample.wealth, theta, pairing)?;
            let mmv = verification::estimate_mmv_objective_with(&sample.wealth, &sample.density, theta, pairing)?;
            let target = sol.value_function(0.0, sol.x0(), 1.0)?;
            emit(cli, &evaluation_json(args.strategy, &sim, target, &mv, &mmv), stdout)
        }
    }
}

fn evaluation_json(
    strategy: Strategy,
    sim: &SimConfig,
    target: f64,
    mv: &Estimate,
    mmv: &Estimate,
) -> serde_json::Value {
    json!({
        "strategy": strategy.to_string(),
        "objective": "mv",
        "value": mv.value,
        "stderr": mv.std_error,
        "n_paths": mv.n_paths,
        "n_steps": sim.n_steps,
        "seed": sim.seed,
        "target": target,
        "z_score": mv.z_score(target),
        "mmv": {
            "value": mmv.value,
            "stderr": mmv.std_error,
            "z_score": mmv.z_score(target),
        },
    })
}

fn run_suites(
    resolved: &Resolved,
    suite: Suite,
    sim: &SimConfig,
    saddle: &SaddleCheckConfig,
) -> Result<Vec<VerificationReport>, Failure> {
    let conic = resolved.constraint.is_conic();
    let sol = if conic {
        solve(resolved)?
    } else {
        let proj = cone::project_market_price_any(&resolved.market, &resolved.constraint)?;
        ClosedFormSolution::from_projection(&resolved.market, &resolved.preference, &resolved.constraint, proj.xi_c)?
    };
    let mut reports = Vec::new();
    for s in suite.expand() {
        let report = match s {
            Suite::Orthogonality => verification::orthogonality_suite(&resolved.market, &resolved.constraint)?,
            Suite::Saddle => verification::saddle_check(&sol, saddle)?,
            _ if !conic => VerificationReport::not_applicable(s.name(), "constraint set is not a cone; out of scope"),
            Suite::Relation => verification::relation_suite(&sol, sim)?,
            Suite::Monotone => verification::monotone_suite(&sol, sim)?,
            Suite::Equivalence => {
                let eq_sim = SimConfig { n_paths: sim.n_paths.min(200), ..sim.clone() };
                verification::equivalence_certificate(&sol, &EquivalenceConfig::default(), &eq_sim)?
            }
            Suite::Beta => verification::beta_suite(&sol, sim)?,
            Suite::All => unreachable!("expanded above"),
        };
        reports.push(report);
    }
    Ok(reports)
}
