//! Closed-form objects of the constrained MMV and MV problems.
//!
//! With `a = ξᵀξ_c` and `b = ‖ξ_c‖²`:
//!
//! ```text
//! V(t,x,λ)      = x h(t) + (λ f(t) − 1)/(2θ)
//! h(t)          = e^{r(T−t)}
//! f(t)          = e^{(2a − b)(T−t)}
//! f̃(t)          = e^{(2r − 2a + b)(T−t)}
//! π*(t)         = −(X − x₀e^{rt} − e^{−r(T−t)}(f(0) + G(0,t))/θ) Σ⁻¹σξ_c
//! π̃*(t)         = −(X − x₀e^{rt} − e^{−r(T−t) + aT}/θ) Σ⁻¹σξ_c
//! η*            = −ξ_c
//! β*            = x₀e^{rT} + e^{aT}/θ
//! ```
//!
//! For a convex cone `a = b`, so `f(0) = e^{aT}`, `g ≡ 0` and the two
//! strategies coincide. [`ClosedFormSolution::from_projection`] also accepts
//! non-conic projections so the failure of that identity can be studied.

use nalgebra::DVector;
use serde::Serialize;

use crate::cone::{self, ConeKind, ConstraintSet};
use crate::market::{Market, Preference};
use crate::{Error, Result};

/// Largest admissible magnitude of any exponent evaluated here.
pub const EXPONENT_GUARD: f64 = 700.0;

#[derive(Debug, Clone)]
pub struct ClosedFormSolution {
    market: Market,
    pref: Preference,
    constraint: ConstraintSet,
    xi: DVector<f64>,
    xi_c: DVector<f64>,
    xi_dot_xi_c: f64,
    xi_c_norm_sq: f64,
    f_rate: f64,
    f_tilde_rate: f64,
    f0: f64,
    psi_tilde: f64,
    beta_star: f64,
    direction: DVector<f64>,
    eta_star: DVector<f64>,
}

/// `Ψ(t) = f(0) + G(0,t)` against `Ψ̃ = e^{ξᵀξ_c T}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FactorComparison {
    pub psi: f64,
    pub psi_tilde: f64,
    pub difference: f64,
}

/// `χ(t) = x₀e^{rt} + e^{−r(T−t)}·factor/θ`. Grows at the risk-free rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdProcess {
    pub x0: f64,
    pub r: f64,
    pub horizon: f64,
    pub theta: f64,
    pub factor: f64,
}

impl ThresholdProcess {
    pub fn value(&self, t: f64) -> f64 {
        self.x0 * (self.r * t).exp() + (-self.r * (self.horizon - t)).exp() * self.factor / self.theta
    }

    /// `χ(T)`, the bliss point of the optimal terminal wealth.
    pub fn bliss_point(&self) -> f64 {
        self.value(self.horizon)
    }
}

/// Serializable digest of a solution.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionSummary {
    pub constraint_kind: ConeKind,
    pub xi: Vec<f64>,
    pub xi_c: Vec<f64>,
    pub orthogonality_residual: f64,
    pub h_rate: f64,
    pub f_rate: f64,
    pub f_tilde_rate: f64,
    pub f0: f64,
    pub psi_tilde: f64,
    pub beta_star: f64,
    pub direction: Vec<f64>,
    pub eta_star: Vec<f64>,
    pub chi_c_0: f64,
    #[serde(rename = "chi_c_T")]
    pub chi_c_horizon: f64,
    pub value_at_origin: f64,
}

fn guard(exponent: f64) -> Result<f64> {
    if exponent.abs() > EXPONENT_GUARD || !exponent.is_finite() {
        return Err(Error::ParameterOverflow { exponent });
    }
    Ok(exponent)
}

/// Closed-form solution for a conic constraint.
pub fn solve(market: &Market, pref: &Preference, constraint: &ConstraintSet) -> Result<ClosedFormSolution> {
    if !constraint.is_conic() {
        return Err(Error::NonConicSet);
    }
    let proj = cone::project_market_price(market, constraint)?;
    ClosedFormSolution::from_projection(market, pref, constraint, proj.xi_c)
}

impl ClosedFormSolution {
    /// Builds every closed-form quantity from a given `ξ_c`, without assuming
    /// the orthogonality identity. Used directly for box counterexamples.
    pub fn from_projection(
        market: &Market,
        pref: &Preference,
        constraint: &ConstraintSet,
        xi_c: DVector<f64>,
    ) -> Result<Self> {
        pref.validate()?;
        constraint.validate(market.n_assets())?;
        let xi = market.market_price_vector().clone();
        if xi_c.len() != xi.len() {
            return Err(Error::DimensionMismatch("xi_c must have length d".into()));
        }
        let horizon = market.horizon();
        let r = market.r();
        let a = xi.dot(&xi_c);
        let b = xi_c.norm_squared();
        let f_rate = 2.0 * a - b;
        let f_tilde_rate = 2.0 * r - 2.0 * a + b;
        guard(r * horizon)?;
        let f0 = guard(f_rate * horizon)?.exp();
        guard(f_tilde_rate * horizon)?;
        let psi_tilde = guard(a * horizon)?.exp();
        let beta_star = pref.x0 * (r * horizon).exp() + psi_tilde / pref.theta;
        let direction = cone::recover_portfolio_direction(market, constraint, &xi_c)?;
        let eta_star = -&xi_c;
        Ok(ClosedFormSolution {
            market: market.clone(),
            pref: *pref,
            constraint: constraint.clone(),
            xi,
            xi_c,
            xi_dot_xi_c: a,
            xi_c_norm_sq: b,
            f_rate,
            f_tilde_rate,
            f0,
            psi_tilde,
            beta_star,
            direction,
            eta_star,
        })
    }

    pub fn market(&self) -> &Market {
        &self.market
    }

    pub fn preference(&self) -> &Preference {
        &self.pref
    }

    pub fn constraint(&self) -> &ConstraintSet {
        &self.constraint
    }

    pub fn is_conic(&self) -> bool {
        self.constraint.is_conic()
    }

    pub fn xi(&self) -> &DVector<f64> {
        &self.xi
    }

    pub fn xi_c(&self) -> &DVector<f64> {
        &self.xi_c
    }

    /// `ξᵀξ_c`.
    pub fn xi_dot_xi_c(&self) -> f64 {
        self.xi_dot_xi_c
    }

    /// `‖ξ_c‖²`.
    pub fn xi_c_norm_sq(&self) -> f64 {
        self.xi_c_norm_sq
    }

    pub fn h_rate(&self) -> f64 {
        self.market.r()
    }

    pub fn f_rate(&self) -> f64 {
        self.f_rate
    }

    pub fn f_tilde_rate(&self) -> f64 {
        self.f_tilde_rate
    }

    pub fn beta_star(&self) -> f64 {
        self.beta_star
    }

    /// `Σ⁻¹σξ_c ∈ Π`.
    pub fn direction(&self) -> &DVector<f64> {
        &self.direction
    }

    pub fn eta_star(&self) -> &DVector<f64> {
        &self.eta_star
    }

    pub fn psi_tilde(&self) -> f64 {
        self.psi_tilde
    }

    pub fn horizon(&self) -> f64 {
        self.market.horizon()
    }

    pub fn theta(&self) -> f64 {
        self.pref.theta
    }

    pub fn x0(&self) -> f64 {
        self.pref.x0
    }

    pub fn orthogonality_residual(&self) -> f64 {
        cone::orthogonality_check(&self.xi, &self.xi_c)
    }

    fn check_time(&self, t: f64) -> Result<f64> {
        let horizon = self.horizon();
        let slack = 1e-12 * horizon;
        if !(t >= -slack && t <= horizon + slack) {
            return Err(Error::TimeOutOfRange { t, horizon });
        }
        Ok(t.clamp(0.0, horizon))
    }

    pub fn h(&self, t: f64) -> f64 {
        (self.market.r() * (self.horizon() - t)).exp()
    }

    pub fn f(&self, t: f64) -> f64 {
        (self.f_rate * (self.horizon() - t)).exp()
    }

    pub fn f_tilde(&self, t: f64) -> f64 {
        (self.f_tilde_rate * (self.horizon() - t)).exp()
    }

    pub fn h_prime(&self, t: f64) -> f64 {
        -self.market.r() * self.h(t)
    }

    pub fn f_prime(&self, t: f64) -> f64 {
        -self.f_rate * self.f(t)
    }

    /// `f(0)`.
    pub fn f0(&self) -> f64 {
        self.f0
    }

    /// Threshold of the MV strategy (`factor = Ψ̃`). For cones this is also the
    /// MMV threshold with `G ≡ 0`.
    pub fn threshold(&self) -> ThresholdProcess {
        ThresholdProcess {
            x0: self.pref.x0,
            r: self.market.r(),
            horizon: self.horizon(),
            theta: self.pref.theta,
            factor: self.psi_tilde,
        }
    }

    /// Threshold of the MMV strategy with a given `G(0,t)`.
    pub fn mmv_threshold(&self, g_integral: f64) -> ThresholdProcess {
        ThresholdProcess { factor: self.f0 + g_integral, ..self.threshold() }
    }

    /// Scalar `c` with `π*(t) = c·Σ⁻¹σξ_c`.
    pub fn mmv_exposure(&self, t: f64, x: f64, g_integral: f64) -> Result<f64> {
        let t = self.check_time(t)?;
        let r = self.market.r();
        let target =
            self.pref.x0 * (r * t).exp() + (-r * (self.horizon() - t)).exp() * (self.f0 + g_integral) / self.pref.theta;
        Ok(-(x - target))
    }

    /// Scalar `c` with `π̃*(t) = c·Σ⁻¹σξ_c`.
    pub fn mv_exposure(&self, t: f64, x: f64) -> Result<f64> {
        let t = self.check_time(t)?;
        let r = self.market.r();
        let target =
            self.pref.x0 * (r * t).exp() + (-r * (self.horizon() - t)).exp() * self.psi_tilde / self.pref.theta;
        Ok(-(x - target))
    }

    pub fn mmv_strategy(&self, t: f64, x: f64, g_integral: f64) -> Result<DVector<f64>> {
        Ok(&self.direction * self.mmv_exposure(t, x, g_integral)?)
    }

    pub fn mv_strategy(&self, t: f64, x: f64) -> Result<DVector<f64>> {
        Ok(&self.direction * self.mv_exposure(t, x)?)
    }

    /// Markov candidate `π*(t,λ) = λf(t)/(θh(t)) Σ⁻¹σξ_c` from the HJBI first-order conditions.
    pub fn candidate_strategy(&self, t: f64, lambda: f64) -> Result<DVector<f64>> {
        let t = self.check_time(t)?;
        if !(lambda > 0.0) {
            return Err(Error::NonpositiveDensity(lambda));
        }
        Ok(&self.direction * (lambda * self.f(t) / (self.pref.theta * self.h(t))))
    }

    pub fn value_function(&self, t: f64, x: f64, lambda: f64) -> Result<f64> {
        let t = self.check_time(t)?;
        if !(lambda > 0.0) {
            return Err(Error::NonpositiveDensity(lambda));
        }
        Ok(x * self.h(t) + (lambda * self.f(t) - 1.0) / (2.0 * self.pref.theta))
    }

    pub fn qlm_value(&self, t: f64, x: f64) -> Result<f64> {
        let t = self.check_time(t)?;
        Ok(x * x * self.f_tilde(t))
    }

    /// `g(t) = f(t)Λ*(t)(‖ξ_c‖² − ξᵀξ_c)`.
    pub fn g_process(&self, f_t: f64, lambda_t: f64) -> f64 {
        f_t * lambda_t * (self.xi_c_norm_sq - self.xi_dot_xi_c)
    }

    pub fn factor_comparison(&self, t: f64) -> Result<FactorComparison> {
        if !self.is_conic() {
            return Err(Error::NonConicSet);
        }
        self.check_time(t)?;
        // G(0,t) = 0 on cones.
        let psi = self.f0 + 0.0;
        Ok(FactorComparison { psi, psi_tilde: self.psi_tilde, difference: psi - self.psi_tilde })
    }

    /// `E[X*(T)] = χ_c(T) − 1/θ`.
    pub fn expected_terminal_wealth(&self) -> f64 {
        self.threshold().bliss_point() - 1.0 / self.pref.theta
    }

    /// Closed-form mean of `X̃*_β(T)` for the auxiliary quadratic-loss problem.
    pub fn qlm_terminal_mean(&self, beta: f64) -> f64 {
        let r = self.market.r();
        let horizon = self.horizon();
        (self.pref.x0 - beta * (-r * horizon).exp()) * ((r - self.xi_dot_xi_c) * horizon).exp()
    }

    /// Residual of the moment equation fixing `β*`: `E[X̃*_{β*}(T)] + 1/θ`.
    pub fn beta_fixed_point_residual(&self) -> f64 {
        self.qlm_terminal_mean(self.beta_star) + 1.0 / self.pref.theta
    }

    pub fn summary(&self) -> SolutionSummary {
        let chi = self.threshold();
        SolutionSummary {
            constraint_kind: self.constraint.kind(),
            xi: self.xi.iter().copied().collect(),
            xi_c: self.xi_c.iter().copied().collect(),
            orthogonality_residual: self.orthogonality_residual(),
            h_rate: self.h_rate(),
            f_rate: self.f_rate,
            f_tilde_rate: self.f_tilde_rate,
            f0: self.f0,
            psi_tilde: self.psi_tilde,
            beta_star: self.beta_star,
            direction: self.direction.iter().copied().collect(),
            eta_star: self.eta_star.iter().copied().collect(),
            chi_c_0: chi.value(0.0),
            chi_c_horizon: chi.bliss_point(),
            value_at_origin: self.pref.x0 * self.h(0.0) + (self.f0 - 1.0) / (2.0 * self.pref.theta),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk() -> ClosedFormSolution {
        let m = Market::from_rows(0.03, &[0.08], &[&[0.2]], 1.0).unwrap();
        solve(&m, &Preference::new(1.0, 1.0).unwrap(), &ConstraintSet::NonnegativeOrthant { n: 1 }).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn desk_instance_values() {
        let sol = desk();
        assert!(rel(sol.xi_c()[0], 0.25) < 1e-14);
        // f(0) = e^{0.0625}, β* = e^{0.03} + e^{0.0625}
        assert!(rel(sol.f0(), 0.0625_f64.exp()) < 1e-14);
        assert!((sol.f0() - 1.064494).abs() < 5e-7);
        assert!(rel(sol.beta_star(), 0.03_f64.exp() + 0.0625_f64.exp()) < 1e-14);
        assert!((sol.beta_star() - 2.094949).abs() < 5e-7);
        let v = sol.value_function(0.0, 1.0, 1.0).unwrap();
        assert!((v - 1.062702).abs() < 5e-7);
        assert!(rel(v, 0.03_f64.exp() + (0.0625_f64.exp() - 1.0) / 2.0) < 1e-14);
    }

    #[test]
    fn boundary_values() {
        let sol = desk();
        let t = sol.horizon();
        assert_eq!(sol.h(t), 1.0);
        assert_eq!(sol.f(t), 1.0);
        assert_eq!(sol.f_tilde(t), 1.0);
        let v = sol.value_function(t, 3.0, 2.5).unwrap();
        assert!((v - (3.0 + 1.5 / 2.0)).abs() < 1e-15);
        assert_eq!(sol.qlm_value(t, 1.7).unwrap(), 1.7 * 1.7);
        assert_eq!(sol.qlm_value(0.3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn zero_excess_return_degenerates() {
        let m = Market::from_rows(0.03, &[0.03], &[&[0.2]], 2.0).unwrap();
        let pref = Preference::new(2.0, 1.5).unwrap();
        let sol = solve(&m, &pref, &ConstraintSet::FullSpace { n: 1 }).unwrap();
        assert_eq!(sol.xi_c()[0], 0.0);
        assert_eq!(sol.f(0.0), 1.0);
        assert!(rel(sol.beta_star(), 1.5 * 0.06_f64.exp() + 0.5) < 1e-15);
        assert_eq!(sol.mv_strategy(0.7, 4.0).unwrap()[0], 0.0);
        let v = sol.value_function(0.5, 2.0, 1.0).unwrap();
        assert!(rel(v, 2.0 * (0.03_f64 * 1.5).exp()) < 1e-15);
        let fc = sol.factor_comparison(1.0).unwrap();
        assert_eq!((fc.psi, fc.psi_tilde), (1.0, 1.0));
    }

    #[test]
    fn full_space_rate_is_b_sigma_inv_b() {
        let m = Market::from_rows(0.01, &[0.06, 0.04], &[&[0.2, 0.05, 0.0], &[0.02, 0.15, 0.1]], 1.0).unwrap();
        let sol = solve(&m, &Preference::new(1.0, 1.0).unwrap(), &ConstraintSet::FullSpace { n: 2 }).unwrap();
        let b = m.excess_return();
        let quad = b.dot(&m.solve_covariance(b));
        assert!(rel(sol.f_rate(), quad) < 1e-12);
        // unconstrained direction is Σ⁻¹B
        assert!((sol.direction() - m.solve_covariance(b)).norm() < 1e-12);
    }

    #[test]
    fn strategies_vanish_at_threshold() {
        let sol = desk();
        let chi = sol.threshold();
        for &t in &[0.0, 0.25, 0.9, 1.0] {
            let pi = sol.mv_strategy(t, chi.value(t)).unwrap();
            assert!(pi[0].abs() < 1e-14);
        }
    }

    #[test]
    fn mv_strategy_at_origin() {
        let sol = desk();
        let pi = sol.mv_strategy(0.0, 1.0).unwrap();
        let expected = (-0.03_f64 + 0.0625).exp() * 1.25;
        assert!(rel(pi[0], expected) < 1e-13);
    }

    #[test]
    fn shorting_ban_with_negative_premium_holds_nothing() {
        let m = Market::from_rows(0.03, &[0.01], &[&[0.2]], 1.0).unwrap();
        let sol = solve(&m, &Preference::new(1.0, 1.0).unwrap(), &ConstraintSet::NonnegativeOrthant { n: 1 }).unwrap();
        for &(t, x) in &[(0.0, 1.0), (0.5, -3.0), (1.0, 10.0)] {
            assert_eq!(sol.mmv_strategy(t, x, 0.0).unwrap()[0], 0.0);
            assert_eq!(sol.mv_strategy(t, x).unwrap()[0], 0.0);
        }
    }

    #[test]
    fn g_process_examples() {
        let sol = desk();
        assert!(sol.g_process(sol.f(0.3), 0.8).abs() < 1e-16);
        let m = Market::from_rows(0.0, &[2.0], &[&[1.0]], 1.0).unwrap();
        let bx = ConstraintSet::Box { lower: vec![0.0], upper: vec![1.0] };
        let counter = ClosedFormSolution::from_projection(
            &m,
            &Preference::new(1.0, 1.0).unwrap(),
            &bx,
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        assert_eq!(counter.g_process(1.0, 1.0), -1.0);
        assert!(matches!(counter.factor_comparison(0.0), Err(Error::NonConicSet)));
    }

    #[test]
    fn errors() {
        let sol = desk();
        assert!(matches!(sol.value_function(0.1, 1.0, 0.0), Err(Error::NonpositiveDensity(_))));
        assert!(matches!(sol.mv_strategy(1.5, 1.0), Err(Error::TimeOutOfRange { .. })));
        assert!(matches!(sol.qlm_value(-0.1, 1.0), Err(Error::TimeOutOfRange { .. })));
        let m = Market::from_rows(0.0, &[0.1], &[&[0.2]], 1.0).unwrap();
        let bx = ConstraintSet::Box { lower: vec![0.0], upper: vec![1.0] };
        assert_eq!(solve(&m, &Preference::new(1.0, 1.0).unwrap(), &bx).unwrap_err(), Error::NonConicSet);
        let wild = Market::from_rows(0.0, &[100.0], &[&[0.1]], 1.0).unwrap();
        let err = solve(&wild, &Preference::new(1.0, 1.0).unwrap(), &ConstraintSet::FullSpace { n: 1 }).unwrap_err();
        assert!(matches!(err, Error::ParameterOverflow { .. }));
    }

    #[test]
    fn ode_residuals_by_central_differences() {
        let m = Market::from_rows(0.02, &[0.07, 0.01], &[&[0.25, 0.1], &[0.05, 0.3]], 2.0).unwrap();
        let sol = solve(&m, &Preference::new(1.5, 1.0).unwrap(), &ConstraintSet::NonnegativeOrthant { n: 2 }).unwrap();
        let step = 1e-5;
        for i in 1..20 {
            let t = 2.0 * i as f64 / 20.0;
            let d = |g: &dyn Fn(f64) -> f64| (g(t + step) - g(t - step)) / (2.0 * step);
            let h_res = d(&|s| sol.h(s)) + sol.h_rate() * sol.h(t);
            let f_res = d(&|s| sol.f(s)) + sol.f_rate() * sol.f(t);
            let ft_res = d(&|s| sol.f_tilde(s)) + sol.f_tilde_rate() * sol.f_tilde(t);
            assert!(h_res.abs() < 1e-6 && f_res.abs() < 1e-6 && ft_res.abs() < 1e-6);
        }
    }

    #[test]
    fn threshold_grows_at_risk_free_rate() {
        let sol = desk();
        let chi = sol.threshold();
        assert!(chi.value(0.0) > sol.x0());
        let t = 0.4;
        let mut prev = f64::INFINITY;
        for k in 1..6 {
            let delta = 10f64.powi(-k);
            let err = ((chi.value(t + delta) - chi.value(t)) / delta - 0.03 * chi.value(t)).abs();
            assert!(err < prev);
            assert!(err < 0.03 * 0.03 * chi.value(t) * delta);
            prev = err;
        }
        assert!(rel(chi.bliss_point(), sol.expected_terminal_wealth() + 1.0) < 1e-15);
    }

    #[test]
    fn beta_star_solves_moment_equation() {
        let sol = desk();
        assert!(sol.beta_fixed_point_residual().abs() < 1e-12);
    }

    #[test]
    fn qlm_exponent_simplifies_on_cones() {
        let sol = desk();
        let a = sol.xi_dot_xi_c();
        assert!((sol.f_tilde_rate() - (2.0 * 0.03 - a)).abs() < 1e-15);
    }
}
