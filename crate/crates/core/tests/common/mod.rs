#![allow(dead_code)]

use mmv::closed_form::{self, ClosedFormSolution};
use mmv::{ConstraintSet, Market, Preference};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// `r = 0.03, μ = 0.08, σ = 0.2, T = 1`, no shorting, `θ = 1, x₀ = 1`.
pub fn desk_market() -> Market {
    Market::from_rows(0.03, &[0.08], &[&[0.2]], 1.0).unwrap()
}

pub fn desk_preference() -> Preference {
    Preference::new(1.0, 1.0).unwrap()
}

pub fn desk() -> ClosedFormSolution {
    closed_form::solve(&desk_market(), &desk_preference(), &ConstraintSet::NonnegativeOrthant { n: 1 }).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Random well-conditioned market with `n` assets and `d` factors.
pub fn random_market(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Market {
    loop {
        let r = 0.05 * rng.random::<f64>();
        let mu: Vec<f64> = (0..n).map(|_| r + 0.1 * normal(rng)).collect();
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| 0.3 * normal(rng)).collect()).collect();
        let horizon = 0.25 + 2.0 * rng.random::<f64>();
        let params = mmv::MarketParams { r, mu, sigma: rows, horizon };
        if let Ok(m) = params.validate() {
            return m;
        }
    }
}

pub fn random_generators(rng: &mut ChaCha8Rng, n: usize, k: usize) -> ConstraintSet {
    let gens: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| normal(rng)).collect()).collect();
    ConstraintSet::from_generators(&gens).unwrap()
}

pub fn random_mask(rng: &mut ChaCha8Rng, n: usize) -> ConstraintSet {
    ConstraintSet::CoordinateSubspace { free_mask: (0..n).map(|_| rng.random::<bool>()).collect() }
}

/// One constraint of each conic kind for `n` assets.
pub fn conic_constraints(rng: &mut ChaCha8Rng, n: usize) -> Vec<ConstraintSet> {
    let k = rng.random_range(1..=2 * n + 1);
    vec![
        ConstraintSet::FullSpace { n },
        ConstraintSet::NonnegativeOrthant { n },
        random_mask(rng, n),
        random_generators(rng, n, k),
    ]
}

pub fn random_preference(rng: &mut ChaCha8Rng) -> Preference {
    Preference::new(0.2 + 3.0 * rng.random::<f64>(), 0.5 + 2.0 * rng.random::<f64>()).unwrap()
}

/// Random conic instance with `n ∈ 1..=4`, `d ∈ n..=6`.
pub fn random_instance(rng: &mut ChaCha8Rng) -> ClosedFormSolution {
    let n = rng.random_range(1..=4);
    let d = rng.random_range(n..=6);
    let market = random_market(rng, n, d);
    let constraints = conic_constraints(rng, n);
    let constraint = &constraints[rng.random_range(0..constraints.len())];
    closed_form::solve(&market, &random_preference(rng), constraint).unwrap()
}
