//! Monte Carlo simulation of the controlled wealth, the optimal density
//! process and the auxiliary quadratic-loss process on a uniform grid.
//!
//! Every path owns a ChaCha8 stream selected by `(seed, path index)`; the
//! `k`-th normal drawn from it drives step `k / d`, factor `k mod d`. Output is
//! therefore bit-identical for any number of worker threads. With antithetic
//! pairing, path `2j+1` replays the stream of path `2j` with flipped signs.
//!
//! Wealth follows Euler–Maruyama,
//! `X_{i+1} = X_i + (rX_i + π_iᵀB)Δt + π_iᵀσΔW_i`.
//! The density `Λ*(t) = exp(−ξ_cᵀW(t) − ½‖ξ_c‖²t)` is always sampled exactly.
//!
//! The pathwise relation `θ(h(s)X*(s) − h(0)x₀) + f(s)Λ*(s) − f(0) = 0` is
//! checked against the density integrated by the same scheme as the wealth:
//! for Euler paths that is the product `∏(1 − ξ_cᵀΔW_i)`, for exact-relation
//! paths the exact exponential. The first residual is `O(Δt)`. Pairing Euler
//! wealth with the exact exponential mixes the schemes and only gives
//! `O(Δt^{1/2})`; that quantity is available as [`exact_density_residual`].

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::ClosedFormSolution;
use crate::cone::MEMBERSHIP_TOLERANCE;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Euler–Maruyama for the wealth.
    #[default]
    Euler,
    /// Wealth reconstructed algebraically from the exact density through the
    /// pathwise relation. Only valid for the optimal strategies.
    ExactRelation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub antithetic: bool,
}

impl SimConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Self {
        SimConfig { n_paths, n_steps, seed, scheme: Scheme::Euler, antithetic: false }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_antithetic(mut self, antithetic: bool) -> Self {
        self.antithetic = antithetic;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || self.n_steps == 0 {
            return Err(Error::InvalidParameter("n_paths and n_steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn dt(&self, horizon: f64) -> f64 {
        horizon / self.n_steps as f64
    }

    /// Uniform grid `t_i = T·i/n`, with `t_n = T` exactly.
    pub fn times(&self, horizon: f64) -> Vec<f64> {
        (0..=self.n_steps).map(|i| horizon * (i as f64 / self.n_steps as f64)).collect()
    }
}

/// Built-in feedback strategies, all proportional to `Σ⁻¹σξ_c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    /// Optimal MMV strategy with `G(0,t) = 0`.
    Mmv,
    /// Optimal MV strategy.
    Mv,
    Zero,
    /// `(1 + ε)` times the optimal MV strategy.
    Scaled(f64),
}

impl Strategy {
    pub fn is_optimal(&self) -> bool {
        matches!(self, Strategy::Mmv | Strategy::Mv)
    }

    /// Scalar `c` with `π(t,x) = c·Σ⁻¹σξ_c`.
    pub fn exposure(&self, sol: &ClosedFormSolution, t: f64, x: f64) -> Result<f64> {
        match *self {
            Strategy::Mmv => sol.mmv_exposure(t, x, 0.0),
            Strategy::Mv => sol.mv_exposure(t, x),
            Strategy::Zero => Ok(0.0),
            Strategy::Scaled(eps) => Ok((1.0 + eps) * sol.mv_exposure(t, x)?),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Mmv => write!(f, "mmv"),
            Strategy::Mv => write!(f, "mv"),
            Strategy::Zero => write!(f, "zero"),
            Strategy::Scaled(eps) => write!(f, "scaled:{eps}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "mmv" => Ok(Strategy::Mmv),
            "mv" => Ok(Strategy::Mv),
            "zero" => Ok(Strategy::Zero),
            _ => {
                let eps = s
                    .strip_prefix("scaled:")
                    .ok_or_else(|| format!("unknown strategy '{s}' (expected mmv, mv, zero or scaled:EPS)"))?;
                let eps: f64 = eps.parse().map_err(|_| format!("bad scaling in '{s}'"))?;
                if !eps.is_finite() {
                    return Err(format!("bad scaling in '{s}'"));
                }
                Ok(Strategy::Scaled(eps))
            }
        }
    }
}

/// A general feedback map `(t, x) ↦ π ∈ ℝⁿ`, simulated with the Euler scheme.
pub trait Feedback: Sync {
    fn position(&self, t: f64, x: f64, out: &mut DVector<f64>) -> Result<()>;
}

impl<F> Feedback for F
where
    F: Fn(f64, f64) -> DVector<f64> + Sync,
{
    fn position(&self, t: f64, x: f64, out: &mut DVector<f64>) -> Result<()> {
        out.copy_from(&self(t, x));
        Ok(())
    }
}

enum Control<'a> {
    Builtin(Strategy),
    Custom(&'a dyn Feedback),
}

/// Per-path Brownian increments, flat `n_steps × d` (step-major).
#[derive(Debug, Clone, Copy)]
pub struct BrownianSource {
    seed: u64,
    n_steps: usize,
    dim: usize,
    sqrt_dt: f64,
    antithetic: bool,
}

impl BrownianSource {
    pub fn new(cfg: &SimConfig, dim: usize, horizon: f64) -> Self {
        BrownianSource {
            seed: cfg.seed,
            n_steps: cfg.n_steps,
            dim,
            sqrt_dt: cfg.dt(horizon).sqrt(),
            antithetic: cfg.antithetic,
        }
    }

    pub fn increments(&self, path: usize) -> Vec<f64> {
        let (stream, sign) = if self.antithetic {
            ((path / 2) as u64, if path % 2 == 1 { -1.0 } else { 1.0 })
        } else {
            (path as u64, 1.0)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        let scale = sign * self.sqrt_dt;
        (0..self.n_steps * self.dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            })
            .collect()
    }
}

/// Full-grid simulation output.
#[derive(Debug, Clone)]
pub struct PathBundle {
    pub times: Vec<f64>,
    pub dim: usize,
    pub scheme: Scheme,
    /// Per path, flat `n_steps × d` increments.
    pub brownian: Vec<Vec<f64>>,
    pub wealth: Vec<Vec<f64>>,
    /// Exact `Λ*(t_i)`.
    pub density: Vec<Vec<f64>>,
    pub relation_residual: Vec<Vec<f64>>,
}

impl PathBundle {
    pub fn n_paths(&self) -> usize {
        self.wealth.len()
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn terminal_wealth(&self) -> Vec<f64> {
        self.wealth.iter().map(|w| *w.last().unwrap()).collect()
    }

    pub fn terminal_density(&self) -> Vec<f64> {
        self.density.iter().map(|l| *l.last().unwrap()).collect()
    }

    /// `W(t_i)` on path `p` at grid index `i`.
    pub fn brownian_position(&self, p: usize, i: usize) -> DVector<f64> {
        let mut w = DVector::zeros(self.dim);
        for step in 0..i {
            for j in 0..self.dim {
                w[j] += self.brownian[p][step * self.dim + j];
            }
        }
        w
    }

    /// CSV with header `time,path_id,wealth,density,residual`, LF line endings.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        writer.write_record(["time", "path_id", "wealth", "density", "residual"])?;
        for p in 0..self.n_paths() {
            for (i, t) in self.times.iter().enumerate() {
                writer.serialize((t, p, self.wealth[p][i], self.density[p][i], self.relation_residual[p][i]))?;
            }
        }
        writer.flush()
    }
}

/// Terminal values only; used for large Monte Carlo runs.
#[derive(Debug, Clone)]
pub struct TerminalSample {
    pub wealth: Vec<f64>,
    pub density: Vec<f64>,
    /// Per path maximum of the scheme-consistent relation residual.
    pub max_relation_residual: Vec<f64>,
    /// Per path maximum of the relation residual against the exact density.
    pub max_exact_density_residual: Vec<f64>,
}

/// `θ(h(t)x − h(0)x₀) + f(t)λ − f(0)`; `G(0,t) = 0` on cones.
fn relation_term(sol: &ClosedFormSolution, h_t: f64, f_t: f64, x: f64, lambda: f64) -> f64 {
    sol.theta() * (h_t * x - sol.h(0.0) * sol.x0()) + (f_t * lambda - sol.f0())
}

struct Engine<'a> {
    sol: &'a ClosedFormSolution,
    control: Control<'a>,
    scheme: Scheme,
    source: BrownianSource,
    times: Vec<f64>,
    h: Vec<f64>,
    f: Vec<f64>,
    dt: f64,
    eta: DVector<f64>,
    eta_sq: f64,
    dir_excess: f64,
    dir_sigma: DVector<f64>,
    neg_dir_residual: f64,
}

struct PathResult {
    increments: Vec<f64>,
    wealth: Vec<f64>,
    density: Vec<f64>,
    residual: Vec<f64>,
    max_residual: f64,
    max_exact_residual: f64,
}

impl<'a> Engine<'a> {
    fn new(
        sol: &'a ClosedFormSolution,
        cfg: &SimConfig,
        control: Control<'a>,
        eta: Option<&DVector<f64>>,
    ) -> Result<Self> {
        cfg.validate()?;
        if !sol.is_conic() {
            return Err(Error::NonConicSet);
        }
        let optimal = matches!(control, Control::Builtin(s) if s.is_optimal());
        if cfg.scheme == Scheme::ExactRelation && !optimal {
            return Err(Error::UnsupportedScheme { scheme: "exact_relation" });
        }
        let market = sol.market();
        let d = market.n_factors();
        let eta = eta.cloned().unwrap_or_else(|| sol.eta_star().clone());
        if eta.len() != d {
            return Err(Error::DimensionMismatch("distortion must have length d".into()));
        }
        let horizon = sol.horizon();
        let times = cfg.times(horizon);
        let h = times.iter().map(|&t| sol.h(t)).collect();
        let f = times.iter().map(|&t| sol.f(t)).collect();
        let dir = sol.direction();
        let neg_dir_residual = sol.constraint().membership_residual(&(-dir))?;
        Ok(Engine {
            sol,
            control,
            scheme: cfg.scheme,
            source: BrownianSource::new(cfg, d, horizon),
            h,
            f,
            dt: cfg.dt(horizon),
            eta_sq: eta.norm_squared(),
            eta,
            dir_excess: dir.dot(market.excess_return()),
            dir_sigma: market.sigma().tr_mul(dir),
            neg_dir_residual,
            times,
        })
    }

    fn run(&self, path: usize, record: bool) -> Result<PathResult> {
        let sol = self.sol;
        let market = sol.market();
        let r = market.r();
        let d = self.source.dim;
        let n_steps = self.times.len() - 1;
        let increments = self.source.increments(path);
        let capacity = if record { n_steps + 1 } else { 1 };
        let mut wealth = Vec::with_capacity(capacity);
        let mut density = Vec::with_capacity(capacity);
        let mut residual = Vec::with_capacity(capacity);

        let mut x = sol.x0();
        let mut w = DVector::<f64>::zeros(d);
        let mut lambda_exact = 1.0;
        let mut lambda_euler = 1.0;
        let mut max_residual = 0.0_f64;
        let mut max_exact_residual = 0.0_f64;
        let mut pi = DVector::<f64>::zeros(market.n_assets());
        if record {
            wealth.push(x);
            density.push(1.0);
            residual.push(relation_term(sol, self.h[0], self.f[0], x, 1.0).abs());
        }

        for i in 0..n_steps {
            let t = self.times[i];
            let dw = &increments[i * d..(i + 1) * d];
            let eta_dw: f64 = self.eta.iter().zip(dw).map(|(e, z)| e * z).sum();

            if self.scheme == Scheme::Euler {
                let (drift, noise) = match &self.control {
                    Control::Builtin(strategy) => {
                        let c = strategy.exposure(sol, t, x)?;
                        if cfg!(debug_assertions) && c < 0.0 {
                            let res = -c * self.neg_dir_residual;
                            if res > MEMBERSHIP_TOLERANCE * (1.0 + (-c) * self.dir_sigma.norm()) {
                                return Err(Error::ConstraintViolation { t, residual: res });
                            }
                        }
                        let noise: f64 = self.dir_sigma.iter().zip(dw).map(|(s, z)| s * z).sum();
                        (c * self.dir_excess, c * noise)
                    }
                    Control::Custom(feedback) => {
                        feedback.position(t, x, &mut pi)?;
                        if cfg!(debug_assertions) {
                            let res = sol.constraint().membership_residual(&pi)?;
                            if res > MEMBERSHIP_TOLERANCE * (1.0 + pi.norm()) {
                                return Err(Error::ConstraintViolation { t, residual: res });
                            }
                        }
                        let sigma_pi = market.sigma().tr_mul(&pi);
                        let noise: f64 = sigma_pi.iter().zip(dw).map(|(s, z)| s * z).sum();
                        (pi.dot(market.excess_return()), noise)
                    }
                };
                x += (r * x + drift) * self.dt + noise;
                lambda_euler *= 1.0 + eta_dw;
            }

            for (wj, z) in w.iter_mut().zip(dw) {
                *wj += z;
            }
            let t_next = self.times[i + 1];
            lambda_exact = (self.eta.dot(&w) - 0.5 * self.eta_sq * t_next).exp();

            let consistent_lambda = match self.scheme {
                Scheme::Euler => lambda_euler,
                Scheme::ExactRelation => {
                    x = (sol.h(0.0) * sol.x0() - (self.f[i + 1] * lambda_exact - sol.f0()) / sol.theta())
                        / self.h[i + 1];
                    lambda_exact
                }
            };
            let res = relation_term(sol, self.h[i + 1], self.f[i + 1], x, consistent_lambda).abs();
            max_residual = max_residual.max(res);
            let exact_res = relation_term(sol, self.h[i + 1], self.f[i + 1], x, lambda_exact).abs();
            max_exact_residual = max_exact_residual.max(exact_res);
            if record {
                wealth.push(x);
                density.push(lambda_exact);
                residual.push(res);
            }
        }
        if !record {
            wealth.push(x);
            density.push(lambda_exact);
        }
        Ok(PathResult {
            increments: if record { increments } else { Vec::new() },
            wealth,
            density,
            residual,
            max_residual,
            max_exact_residual,
        })
    }

    fn bundle(&self, n_paths: usize) -> Result<PathBundle> {
        let results: Vec<PathResult> =
            (0..n_paths).into_par_iter().map(|p| self.run(p, true)).collect::<Result<_>>()?;
        let mut bundle = PathBundle {
            times: self.times.clone(),
            dim: self.source.dim,
            scheme: self.scheme,
            brownian: Vec::with_capacity(n_paths),
            wealth: Vec::with_capacity(n_paths),
            density: Vec::with_capacity(n_paths),
            relation_residual: Vec::with_capacity(n_paths),
        };
        for res in results {
            bundle.brownian.push(res.increments);
            bundle.wealth.push(res.wealth);
            bundle.density.push(res.density);
            bundle.relation_residual.push(res.residual);
        }
        Ok(bundle)
    }

    fn terminal(&self, n_paths: usize) -> Result<TerminalSample> {
        let results: Vec<PathResult> =
            (0..n_paths).into_par_iter().map(|p| self.run(p, false)).collect::<Result<_>>()?;
        Ok(TerminalSample {
            wealth: results.iter().map(|r| r.wealth[0]).collect(),
            density: results.iter().map(|r| r.density[0]).collect(),
            max_relation_residual: results.iter().map(|r| r.max_residual).collect(),
            max_exact_density_residual: results.iter().map(|r| r.max_exact_residual).collect(),
        })
    }
}

/// Simulates a built-in strategy on the full grid.
pub fn simulate_wealth(sol: &ClosedFormSolution, cfg: &SimConfig, strategy: Strategy) -> Result<PathBundle> {
    Engine::new(sol, cfg, Control::Builtin(strategy), None)?.bundle(cfg.n_paths)
}

/// Simulates an arbitrary feedback map (Euler scheme only).
pub fn simulate_feedback(sol: &ClosedFormSolution, cfg: &SimConfig, feedback: &dyn Feedback) -> Result<PathBundle> {
    Engine::new(sol, cfg, Control::Custom(feedback), None)?.bundle(cfg.n_paths)
}

/// Terminal wealth and density for a built-in strategy. `eta` replaces the
/// optimal distortion `−ξ_c` in the density when given.
pub fn simulate_terminal(
    sol: &ClosedFormSolution,
    cfg: &SimConfig,
    strategy: Strategy,
    eta: Option<&DVector<f64>>,
) -> Result<TerminalSample> {
    Engine::new(sol, cfg, Control::Builtin(strategy), eta)?.terminal(cfg.n_paths)
}

/// Exact density paths `Λ^η(t_i) = exp(ηᵀW(t_i) − ½‖η‖²t_i)` for `η = −ξ_c`.
pub fn simulate_density(sol: &ClosedFormSolution, cfg: &SimConfig) -> Result<Vec<Vec<f64>>> {
    simulate_density_with(sol, cfg, sol.eta_star())
}

pub fn simulate_density_with(sol: &ClosedFormSolution, cfg: &SimConfig, eta: &DVector<f64>) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let d = sol.market().n_factors();
    if eta.len() != d {
        return Err(Error::DimensionMismatch("distortion must have length d".into()));
    }
    let times = cfg.times(sol.horizon());
    let source = BrownianSource::new(cfg, d, sol.horizon());
    let eta_sq = eta.norm_squared();
    Ok((0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let inc = source.increments(p);
            let mut eta_w = 0.0;
            let mut out = Vec::with_capacity(times.len());
            out.push(1.0);
            for (i, t) in times.iter().enumerate().skip(1) {
                eta_w += eta.iter().zip(&inc[(i - 1) * d..i * d]).map(|(e, z)| e * z).sum::<f64>();
                out.push((eta_w - 0.5 * eta_sq * t).exp());
            }
            out
        })
        .collect())
}

/// Per-path, per-time relation residual recomputed from a bundle, against the
/// density integrated by the bundle's own scheme.
pub fn relation_residual(sol: &ClosedFormSolution, paths: &PathBundle) -> Vec<Vec<f64>> {
    let d = paths.dim;
    let eta = sol.eta_star();
    (0..paths.n_paths())
        .map(|p| {
            let mut lambda = 1.0;
            paths
                .times
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    if i > 0 {
                        lambda = match paths.scheme {
                            Scheme::Euler => {
                                let dw = &paths.brownian[p][(i - 1) * d..i * d];
                                lambda * (1.0 + eta.iter().zip(dw).map(|(e, z)| e * z).sum::<f64>())
                            }
                            Scheme::ExactRelation => paths.density[p][i],
                        };
                    }
                    relation_term(sol, sol.h(t), sol.f(t), paths.wealth[p][i], lambda).abs()
                })
                .collect()
        })
        .collect()
}

/// Relation residual against the exact density, regardless of scheme.
pub fn exact_density_residual(sol: &ClosedFormSolution, paths: &PathBundle) -> Vec<Vec<f64>> {
    (0..paths.n_paths())
        .map(|p| {
            paths
                .times
                .iter()
                .enumerate()
                .map(|(i, &t)| relation_term(sol, sol.h(t), sol.f(t), paths.wealth[p][i], paths.density[p][i]).abs())
                .collect()
        })
        .collect()
}

/// Per-path maximum over the grid.
pub fn path_maxima(residuals: &[Vec<f64>]) -> Vec<f64> {
    residuals.iter().map(|r| r.iter().cloned().fold(0.0, f64::max)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotoneRegionReport {
    /// Fraction of paths with `X(T) − mean > 1/θ`.
    pub fraction_above: f64,
    /// `|X(T) − mean − (1 − Λ*(T))/θ|` statistics.
    pub max_identity_residual: f64,
    pub median_identity_residual: f64,
}

pub fn monotone_region_check(
    sol: &ClosedFormSolution,
    terminal_wealth: &[f64],
    terminal_density: &[f64],
) -> Result<MonotoneRegionReport> {
    if terminal_wealth.len() != terminal_density.len() {
        return Err(Error::DimensionMismatch("wealth and density sample sizes differ".into()));
    }
    if terminal_wealth.is_empty() {
        return Err(Error::InsufficientPaths(0));
    }
    let theta = sol.theta();
    let mean = terminal_wealth.iter().sum::<f64>() / terminal_wealth.len() as f64;
    let above = terminal_wealth.iter().filter(|&&x| x - mean > 1.0 / theta).count();
    let mut identity: Vec<f64> =
        terminal_wealth.iter().zip(terminal_density).map(|(x, l)| (x - mean - (1.0 - l) / theta).abs()).collect();
    let max = identity.iter().cloned().fold(0.0, f64::max);
    Ok(MonotoneRegionReport {
        fraction_above: above as f64 / terminal_wealth.len() as f64,
        max_identity_residual: max,
        median_identity_residual: median(&mut identity),
    })
}

/// Exact auxiliary paths
/// `X̃*_β(t) = (x₀ − βe^{−rT}) exp((r − ξᵀξ_c − ½‖ξ_c‖²)t − ξ_cᵀW(t))`
/// on the shared Brownian increments.
pub fn simulate_qlm(sol: &ClosedFormSolution, cfg: &SimConfig, beta: f64) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let d = sol.market().n_factors();
    let r = sol.market().r();
    let horizon = sol.horizon();
    let times = cfg.times(horizon);
    let source = BrownianSource::new(cfg, d, horizon);
    let start = sol.x0() - beta * (-r * horizon).exp();
    let rate = r - sol.xi_dot_xi_c() - 0.5 * sol.xi_c_norm_sq();
    let xi_c = sol.xi_c();
    Ok((0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let inc = source.increments(p);
            let mut xc_w = 0.0;
            let mut out = Vec::with_capacity(times.len());
            out.push(start);
            for (i, t) in times.iter().enumerate().skip(1) {
                xc_w += xi_c.iter().zip(&inc[(i - 1) * d..i * d]).map(|(e, z)| e * z).sum::<f64>();
                out.push(start * (rate * t - xc_w).exp());
            }
            out
        })
        .collect())
}

/// Summary statistics written next to a paths CSV.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub strategy: String,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub terminal_wealth_mean: f64,
    pub terminal_wealth_variance: f64,
    pub terminal_density_mean: f64,
    pub terminal_density_second_moment: f64,
    pub relation_residual_median: f64,
    pub relation_residual_p90: f64,
    pub relation_residual_max: f64,
    pub monotone: MonotoneRegionReport,
}

pub fn summarize(
    sol: &ClosedFormSolution,
    cfg: &SimConfig,
    strategy: Strategy,
    paths: &PathBundle,
) -> Result<SimulationSummary> {
    let wealth = paths.terminal_wealth();
    let density = paths.terminal_density();
    let n = wealth.len() as f64;
    let mean = wealth.iter().sum::<f64>() / n;
    let var = if wealth.len() > 1 { wealth.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    let mut maxima = path_maxima(&paths.relation_residual);
    maxima.sort_by(f64::total_cmp);
    Ok(SimulationSummary {
        strategy: strategy.to_string(),
        n_paths: cfg.n_paths,
        n_steps: cfg.n_steps,
        seed: cfg.seed,
        scheme: cfg.scheme,
        terminal_wealth_mean: mean,
        terminal_wealth_variance: var,
        terminal_density_mean: density.iter().sum::<f64>() / n,
        terminal_density_second_moment: density.iter().map(|l| l * l).sum::<f64>() / n,
        relation_residual_median: quantile_sorted(&maxima, 0.5),
        relation_residual_p90: quantile_sorted(&maxima, 0.9),
        relation_residual_max: *maxima.last().unwrap(),
        monotone: monotone_region_check(sol, &wealth, &density)?,
    })
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    quantile_sorted(values, 0.5)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `σᵀ` applied to a path of positions; small helper for diagnostics.
pub fn sigma_transpose_times(sigma: &DMatrix<f64>, pi: &DVector<f64>) -> DVector<f64> {
    sigma.tr_mul(pi)
}
