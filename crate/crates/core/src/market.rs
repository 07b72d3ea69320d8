//! Constant-coefficient GBM market and investor preferences.
//!
//! `n` risky assets are driven by a `d`-dimensional Brownian motion with
//! `d ≥ n`. The volatility matrix `σ` is `n × d` and the covariance
//! `Σ = σσᵀ` must be positive definite. Entries of `σ` may have any sign;
//! no downstream formula needs them to be positive.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Pivots of the covariance factorisation must exceed this fraction of the
/// largest diagonal entry.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Raw market constants as they appear in a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    /// Risk-free rate (1/year).
    pub r: f64,
    /// Expected returns, length `n` (1/year).
    pub mu: Vec<f64>,
    /// Volatility matrix given row by row: `n` rows of length `d` (1/√year).
    pub sigma: Vec<Vec<f64>>,
    /// Investment horizon in years.
    #[serde(rename = "horizon_T")]
    pub horizon: f64,
}

impl MarketParams {
    pub fn validate(&self) -> Result<Market> {
        Market::new(self.clone())
    }
}

/// Risk aversion and initial wealth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preference {
    pub theta: f64,
    pub x0: f64,
}

impl Preference {
    pub fn new(theta: f64, x0: f64) -> Result<Self> {
        let pref = Preference { theta, x0 };
        pref.validate()?;
        Ok(pref)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "risk aversion theta must be positive and finite, got {}",
                self.theta
            )));
        }
        if !self.x0.is_finite() {
            return Err(Error::InvalidParameter("initial wealth x0 must be finite".into()));
        }
        Ok(())
    }
}

/// A validated market with cached covariance factorisation, excess return
/// `B = μ − r·1` and market price of risk `ξ = σᵀΣ⁻¹B`.
///
/// Immutable after construction and `Send + Sync`.
#[derive(Debug, Clone)]
pub struct Market {
    params: MarketParams,
    sigma: DMatrix<f64>,
    cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    excess: DVector<f64>,
    xi: DVector<f64>,
}

impl Market {
    pub fn new(params: MarketParams) -> Result<Self> {
        let n = params.mu.len();
        if n == 0 {
            return Err(Error::DimensionMismatch("market needs at least one risky asset".into()));
        }
        if params.sigma.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "sigma has {} rows but mu has {} entries",
                params.sigma.len(),
                n
            )));
        }
        let d = params.sigma[0].len();
        if params.sigma.iter().any(|row| row.len() != d) {
            return Err(Error::DimensionMismatch("sigma rows have unequal lengths".into()));
        }
        if d < n {
            return Err(Error::DimensionMismatch(format!("need d >= n, got n = {n}, d = {d}")));
        }
        let finite = params.r.is_finite()
            && params.horizon.is_finite()
            && params.mu.iter().all(|v| v.is_finite())
            && params.sigma.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("market parameters must be finite".into()));
        }
        if params.horizon <= 0.0 {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {}", params.horizon)));
        }

        let sigma = DMatrix::from_fn(n, d, |i, j| params.sigma[i][j]);
        let cov = &sigma * sigma.transpose();
        let chol = factorize(&cov)?;
        let excess = DVector::from_iterator(n, params.mu.iter().map(|m| m - params.r));
        let xi = sigma.transpose() * chol.solve(&excess);

        Ok(Market { params, sigma, cov, chol, excess, xi })
    }

    /// Convenience constructor for tests and examples; `sigma` is row-major `n × d`.
    pub fn from_rows(r: f64, mu: &[f64], sigma: &[&[f64]], horizon: f64) -> Result<Self> {
        Market::new(MarketParams { r, mu: mu.to_vec(), sigma: sigma.iter().map(|row| row.to_vec()).collect(), horizon })
    }

    pub fn params(&self) -> &MarketParams {
        &self.params
    }

    pub fn n_assets(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn n_factors(&self) -> usize {
        self.sigma.ncols()
    }

    pub fn r(&self) -> f64 {
        self.params.r
    }

    pub fn horizon(&self) -> f64 {
        self.params.horizon
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn excess_return(&self) -> &DVector<f64> {
        &self.excess
    }

    /// Market price of risk `ξ = σᵀΣ⁻¹B ∈ ℝᵈ`.
    pub fn market_price_vector(&self) -> &DVector<f64> {
        &self.xi
    }

    /// `Σ⁻¹v` through the Cholesky factor.
    pub fn solve_covariance(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(v)
    }

    /// Explicit `Σ⁻¹`, for reporting only.
    pub fn covariance_inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

/// Cholesky factorisation with an explicit relative pivot threshold.
fn factorize(cov: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let n = cov.nrows();
    let max_diag = cov.diagonal().iter().cloned().fold(0.0_f64, f64::max);
    let threshold = PIVOT_TOLERANCE * max_diag;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut pivot = cov[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > threshold) {
            return Err(Error::SingularCovariance { pivot, threshold });
        }
        let diag = pivot.sqrt();
        l[(j, j)] = diag;
        for i in (j + 1)..n {
            let mut s = cov[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / diag;
        }
    }
    Ok(Cholesky::pack_dirty(l))
}
