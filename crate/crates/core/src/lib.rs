//! Closed-form strategies, Monte Carlo simulation and numerical certification
//! for cone-constrained monotone mean-variance (MMV) and mean-variance (MV)
//! portfolio selection in a multi-asset geometric Brownian motion market.
//!
//! The crate is organised bottom-up:
//!
//! - [`market`]: validated market parameters, covariance factorisation and the
//!   market price of risk `ξ = σᵀΣ⁻¹B`.
//! - [`cone`]: portfolio constraint sets, their image under `σᵀ`, Euclidean
//!   projection (nonnegative least squares for finitely generated cones) and the
//!   constrained market price of risk `ξ_c`.
//! - [`closed_form`]: value functions, optimal MMV/MV feedback strategies,
//!   the optimal distortion, `β*` and the dynamic threshold.
//! - [`simulation`]: reproducible parallel path simulation of wealth, density
//!   and the auxiliary quadratic-loss process.
//! - [`verification`]: HJBI saddle-point probes, objective estimators and the
//!   MMV/MV equivalence certificate.
//! - [`config`] and [`cli`]: the JSON run configuration and the `mmv` binary.

pub mod cli;
pub mod closed_form;
pub mod cone;
pub mod config;
mod error;
pub mod market;
pub mod simulation;
pub mod verification;

pub use closed_form::{ClosedFormSolution, FactorComparison, ThresholdProcess};
pub use cone::{ConeKind, ConstraintSet, ProjectedCone};
pub use error::{Error, Result};
pub use market::{Market, MarketParams, Preference};
pub use simulation::{PathBundle, Scheme, SimConfig, Strategy};
pub use verification::{SaddleCheckConfig, VerificationReport};
