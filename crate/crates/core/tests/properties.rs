//! Property tests for the geometric and closed-form invariants.

use mmv::closed_form;
use mmv::cone::{self, nnls, to_projected_cone};
use mmv::config::RunConfig;
use mmv::simulation::SimConfig;
use mmv::verification;
use mmv::{ConstraintSet, Market, Preference};
use nalgebra::{DMatrix, DVector};
use proptest::collection::vec;
use proptest::prelude::*;

fn market_and_constraint() -> impl Strategy<Value = (Market, ConstraintSet)> {
    (1usize..=4).prop_flat_map(|n| (Just(n), n..=6usize)).prop_flat_map(|(n, d)| {
        let market = (0.0..0.05f64, vec(-0.2..0.3f64, n), vec(-0.6..0.6f64, n * d), 0.1..3.0f64).prop_filter_map(
            "singular covariance",
            move |(r, excess, s, horizon)| {
                let mu: Vec<f64> = excess.iter().map(|e| r + e).collect();
                let rows: Vec<&[f64]> = s.chunks(d).collect();
                Market::from_rows(r, &mu, &rows, horizon)
                    .ok()
                    .filter(|m| m.market_price_vector().norm_squared() * horizon < 50.0)
            },
        );
        let constraint = prop_oneof![
            Just(ConstraintSet::FullSpace { n }),
            Just(ConstraintSet::NonnegativeOrthant { n }),
            vec(any::<bool>(), n).prop_map(|free_mask| ConstraintSet::CoordinateSubspace { free_mask }),
            (1usize..=6)
                .prop_flat_map(move |k| vec(vec(-1.0..1.0f64, n), k))
                .prop_filter("zero generator", |g| g.iter().all(|c| c.iter().any(|v| v.abs() > 1e-6)))
                .prop_map(|g| ConstraintSet::from_generators(&g).unwrap()),
        ];
        (market, constraint)
    })
}

fn dvec(v: &[f64], len: usize) -> DVector<f64> {
    DVector::from_iterator(len, v.iter().copied().cycle().take(len))
}

fn close(a: &DVector<f64>, b: &DVector<f64>, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn market_price_lies_in_row_space((market, _c) in market_and_constraint(), p in vec(-2.0..2.0f64, 4)) {
        let xi = market.market_price_vector();
        let sigma = market.sigma();
        let back = sigma.transpose() * market.solve_covariance(&(sigma * xi));
        prop_assert!(close(&back, xi, 1e-9));
        // πᵀσξ = πᵀB for every π.
        let pi = dvec(&p, market.n_assets());
        let lhs = pi.dot(&(sigma * xi));
        let rhs = pi.dot(market.excess_return());
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + pi.norm() * market.excess_return().norm()));
    }

    #[test]
    fn projection_is_homogeneous_and_idempotent(
        (market, constraint) in market_and_constraint(),
        v in vec(-2.0..2.0f64, 6),
        c in 0.0..20.0f64,
    ) {
        let cone = to_projected_cone(&constraint, &market).unwrap();
        let v = dvec(&v, market.n_factors());
        let p = cone.project(&v).unwrap();
        prop_assert!(close(&cone.project(&(&v * c)).unwrap(), &(&p * c), 1e-9));
        prop_assert!(close(&cone.project(&p).unwrap(), &p, 1e-9));
        prop_assert!(cone.membership_residual(&p).unwrap() <= 1e-9 * (1.0 + p.norm()));
    }

    #[test]
    fn projection_is_nonexpansive(
        (market, constraint) in market_and_constraint(),
        u in vec(-2.0..2.0f64, 6),
        v in vec(-2.0..2.0f64, 6),
    ) {
        let cone = to_projected_cone(&constraint, &market).unwrap();
        let d = market.n_factors();
        let (u, v) = (dvec(&u, d), dvec(&v, d));
        let gap = (cone.project(&u).unwrap() - cone.project(&v).unwrap()).norm();
        prop_assert!(gap <= (&u - &v).norm() * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn second_projection_theorem_and_orthogonality(
        (market, constraint) in market_and_constraint(),
        v in vec(-2.0..2.0f64, 6),
        w in vec(0.0..1.0f64, 12),
    ) {
        let cone = to_projected_cone(&constraint, &market).unwrap();
        let v = dvec(&v, market.n_factors());
        let p = cone.project(&v).unwrap();
        let normal = &v - &p;
        let scale = 1e-9 * (1.0 + v.norm_squared());
        prop_assert!(normal.dot(&p).abs() <= scale);
        // Any member z of the image cone: (v − P v)ᵀ(z − P v) ≤ 0.
        let generators = cone.generator_matrix_sigma();
        if generators.ncols() > 0 {
            let weights = dvec(&w, generators.ncols());
            let z = generators * weights;
            prop_assert!(normal.dot(&(&z - &p)) <= scale * (1.0 + z.norm()));
        }
    }

    #[test]
    fn recovered_direction_is_admissible((market, constraint) in market_and_constraint()) {
        let xi_c = cone::constrained_market_price(&market, &constraint).unwrap();
        let dir = cone::recover_portfolio_direction(&market, &constraint, &xi_c).unwrap();
        prop_assert!(constraint.membership_residual(&dir).unwrap() <= 1e-9 * (1.0 + dir.norm()));
        // σᵀ maps the direction back onto ξ_c.
        prop_assert!(close(&market.sigma().tr_mul(&dir), &xi_c, 1e-9));
    }

    #[test]
    fn mmv_and_mv_strategies_coincide(
        (market, constraint) in market_and_constraint(),
        theta in 0.1..5.0f64,
        x0 in -2.0..5.0f64,
        s in 0.0..1.0f64,
        x in -10.0..10.0f64,
    ) {
        let sol = closed_form::solve(&market, &Preference::new(theta, x0).unwrap(), &constraint).unwrap();
        let t = s * sol.horizon();
        prop_assert!(verification::strategy_deviation(&sol, t, x).unwrap() <= 1e-12);
        prop_assert!((sol.factor_comparison(t).unwrap().difference).abs() <= 1e-12 * sol.psi_tilde());
    }

    #[test]
    fn threshold_grows_at_riskfree_rate(
        (market, constraint) in market_and_constraint(),
        s in 0.0..1.0f64,
        u in 0.0..1.0f64,
    ) {
        let sol = closed_form::solve(&market, &Preference::new(1.0, 1.0).unwrap(), &constraint).unwrap();
        let chi = sol.threshold();
        let (t, tau) = (s * sol.horizon(), u * sol.horizon());
        let lhs = chi.value(tau);
        let rhs = chi.value(t) * (market.r() * (tau - t)).exp();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        // The strategies vanish on the threshold.
        prop_assert!(sol.mv_strategy(t, chi.value(t)).unwrap().norm() <= 1e-12 * (1.0 + chi.value(t).abs()) * sol.direction().norm());
    }

    #[test]
    fn nnls_satisfies_kkt(a in vec(-1.0..1.0f64, 24), b in vec(-1.0..1.0f64, 4), k in 1usize..=6) {
        let a = DMatrix::from_iterator(4, k, a.iter().copied().take(4 * k));
        let b = DVector::from_vec(b);
        let sol = nnls(&a, &b, 10 * (4 + k)).unwrap();
        let g = sol.coefficients.clone();
        let w = a.tr_mul(&(&b - &a * &g));
        let tol = 1e-9 * (1.0 + a.norm() * b.norm());
        for j in 0..k {
            prop_assert!(g[j] >= 0.0);
            prop_assert!(w[j] <= tol);
            if g[j] > 0.0 {
                prop_assert!(w[j].abs() <= tol);
            }
        }
    }

    #[test]
    fn config_round_trip(
        (market, constraint) in market_and_constraint(),
        theta in 0.1..5.0f64,
        seed in any::<u64>(),
        paths in 1usize..100_000,
    ) {
        let mut cfg = RunConfig::from_parts(&market, Preference::new(theta, 1.0).unwrap(), &constraint);
        cfg.simulation = Some(SimConfig::new(paths, 64, seed));
        let text = cfg.to_json();
        let again = RunConfig::from_json(&text).unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(again.to_json(), text);
        prop_assert_eq!(again.resolve().unwrap().constraint, constraint);
    }
}
