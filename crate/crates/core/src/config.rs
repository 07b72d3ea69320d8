//! Strict JSON run configuration.
//!
//! ```json
//! {
//!   "market": {"r": 0.03, "mu": [0.08], "sigma": [[0.2]], "horizon_T": 1.0},
//!   "preference": {"theta": 1.0, "x0": 1.0},
//!   "constraint": {"kind": "orthant"},
//!   "simulation": {"n_paths": 1000, "n_steps": 256, "seed": 42},
//!   "verification": {"n_state_samples": 1000, "n_control_samples": 100, "tolerance": 1e-9}
//! }
//! ```
//!
//! Unknown keys are rejected at every level. Constraint kinds are `full`,
//! `orthant`, `subspace` (with `free_mask`), `generators` (a list of generator
//! vectors of length `n`) and `box` (with `lower` and `upper`).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cone::ConstraintSet;
use crate::market::{Market, MarketParams, Preference};
use crate::simulation::SimConfig;
use crate::verification::SaddleCheckConfig;
#[cfg(test)]
use crate::Error;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintSpec {
    Full {},
    Orthant {},
    Subspace { free_mask: Vec<bool> },
    Generators { generators: Vec<Vec<f64>> },
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl ConstraintSpec {
    /// Builds and validates the constraint for `n` assets.
    pub fn build(&self, n: usize) -> Result<ConstraintSet> {
        let set = match self {
            ConstraintSpec::Full {} => ConstraintSet::FullSpace { n },
            ConstraintSpec::Orthant {} => ConstraintSet::NonnegativeOrthant { n },
            ConstraintSpec::Subspace { free_mask } => {
                ConstraintSet::CoordinateSubspace { free_mask: free_mask.clone() }
            }
            ConstraintSpec::Generators { generators } => ConstraintSet::from_generators(generators)?,
            ConstraintSpec::Box { lower, upper } => ConstraintSet::Box { lower: lower.clone(), upper: upper.clone() },
        };
        set.validate(n)?;
        Ok(set)
    }
}

impl From<&ConstraintSet> for ConstraintSpec {
    fn from(set: &ConstraintSet) -> Self {
        match set {
            ConstraintSet::FullSpace { .. } => ConstraintSpec::Full {},
            ConstraintSet::NonnegativeOrthant { .. } => ConstraintSpec::Orthant {},
            ConstraintSet::CoordinateSubspace { free_mask } => {
                ConstraintSpec::Subspace { free_mask: free_mask.clone() }
            }
            ConstraintSet::FinitelyGeneratedCone { generators } => {
                ConstraintSpec::Generators { generators: generator_columns(generators) }
            }
            ConstraintSet::Box { lower, upper } => ConstraintSpec::Box { lower: lower.clone(), upper: upper.clone() },
        }
    }
}

fn generator_columns(g: &DMatrix<f64>) -> Vec<Vec<f64>> {
    g.column_iter().map(|c| c.iter().copied().collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub market: MarketParams,
    pub preference: Preference,
    pub constraint: ConstraintSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<SaddleCheckConfig>,
}

/// A configuration checked against the domain: validated market, preference
/// and a constraint of matching dimension.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub market: Market,
    pub preference: Preference,
    pub constraint: ConstraintSet,
}

impl RunConfig {
    /// Strict parse; no comments, no unknown keys.
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serialises")
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let market = self.market.validate()?;
        self.preference.validate()?;
        let constraint = self.constraint.build(market.n_assets())?;
        if let Some(sim) = &self.simulation {
            sim.validate()?;
        }
        if let Some(v) = &self.verification {
            v.validate()?;
        }
        Ok(Resolved { market, preference: self.preference, constraint })
    }

    pub fn from_parts(market: &Market, preference: Preference, constraint: &ConstraintSet) -> Self {
        RunConfig {
            market: market.params().clone(),
            preference,
            constraint: constraint.into(),
            simulation: None,
            verification: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DESK: &str = r#"{
        "market": {"r": 0.03, "mu": [0.08], "sigma": [[0.2]], "horizon_T": 1.0},
        "preference": {"theta": 1.0, "x0": 1.0},
        "constraint": {"kind": "orthant"}
    }"#;

    #[test]
    fn parses_desk_instance() {
        let cfg = RunConfig::from_json(DESK).unwrap();
        let res = cfg.resolve().unwrap();
        assert_eq!(res.market.n_assets(), 1);
        assert_eq!(res.constraint, ConstraintSet::NonnegativeOrthant { n: 1 });
        assert!(cfg.simulation.is_none());
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = DESK.replace("\"x0\": 1.0", "\"x0\": 1.0, \"gamma\": 2");
        assert!(RunConfig::from_json(&bad).is_err());
        let bad = DESK.replace("\"kind\": \"orthant\"", "\"kind\": \"orthant\", \"lower\": [0]");
        assert!(RunConfig::from_json(&bad).is_err());
        let bad = DESK.replace("\"horizon_T\"", "\"horizon\"");
        assert!(RunConfig::from_json(&bad).is_err());
        let bad = DESK.replace("\"orthant\"", "\"simplex\"");
        assert!(RunConfig::from_json(&bad).is_err());
    }

    #[test]
    fn comments_rejected() {
        let bad = DESK.replacen('{', "{ // desk\n", 1);
        assert!(RunConfig::from_json(&bad).is_err());
    }

    #[test]
    fn generator_block_is_list_of_vectors() {
        let text =
            DESK.replace("{\"kind\": \"orthant\"}", "{\"kind\": \"generators\", \"generators\": [[1.0], [2.0]]}");
        let res = RunConfig::from_json(&text).unwrap().resolve().unwrap();
        match res.constraint {
            ConstraintSet::FinitelyGeneratedCone { generators } => {
                assert_eq!(generators.shape(), (1, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_a_domain_error() {
        let text = DESK.replace("{\"kind\": \"orthant\"}", "{\"kind\": \"subspace\", \"free_mask\": [true, false]}");
        let err = RunConfig::from_json(&text).unwrap().resolve().unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn round_trip_is_idempotent() {
        let full = DESK.replace(
            "\"constraint\": {\"kind\": \"orthant\"}",
            "\"constraint\": {\"kind\": \"box\", \"lower\": [0.0], \"upper\": [1.0]},
             \"simulation\": {\"n_paths\": 10, \"n_steps\": 8, \"seed\": 3, \"scheme\": \"exact_relation\"},
             \"verification\": {\"tolerance\": 1e-8}",
        );
        let cfg = RunConfig::from_json(&full).unwrap();
        let again = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(again.to_json(), cfg.to_json());
    }

    #[test]
    fn from_parts_round_trips_constraint() {
        let m = Market::from_rows(0.0, &[0.1, 0.2], &[&[0.2, 0.0], &[0.0, 0.3]], 1.0).unwrap();
        let g = ConstraintSet::from_generators(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let cfg = RunConfig::from_parts(&m, Preference::new(1.0, 1.0).unwrap(), &g);
        assert_eq!(cfg.resolve().unwrap().constraint, g);
    }
}
