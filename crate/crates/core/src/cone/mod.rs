//! Portfolio constraint sets and Euclidean projection onto their image
//! `Π_σ = {σᵀπ : π ∈ Π} ⊂ ℝᵈ`.
//!
//! The no-shorting orthant `ℝⁿ₊` does **not** map to the orthant of `ℝᵈ`:
//! its image is the cone generated by the columns of `σᵀ` (the rows of `σ`).
//! Clipping `ξ` componentwise is wrong whenever `σ` is not diagonal.
//!
//! Finitely generated cones are projected by nonnegative least squares,
//! `min_{γ≥0} ‖Gγ − v‖²` with projection `Gγ*`. Only `Gγ*` is unique; the
//! coefficients may not be when generators are collinear. Subspaces (the full
//! space and coordinate subspaces) use an orthonormal basis from a QR
//! factorisation.

mod nnls;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::market::Market;
use crate::{Error, Result};

pub use nnls::{nnls, NnlsSolution};

/// Tolerance on membership residuals of recovered portfolios, relative to `1 + ‖π‖`.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConeKind {
    FullSpace,
    NonnegativeOrthant,
    CoordinateSubspace,
    FinitelyGeneratedCone,
    Box,
}

/// Constraint set `Π ⊂ ℝⁿ` on the risky-asset amounts.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintSet {
    FullSpace {
        n: usize,
    },
    NonnegativeOrthant {
        n: usize,
    },
    /// `free_mask[i] == true` marks a tradable asset; the others are held at zero.
    CoordinateSubspace {
        free_mask: Vec<bool>,
    },
    /// Columns of the `n × k` matrix generate the cone.
    FinitelyGeneratedCone {
        generators: DMatrix<f64>,
    },
    /// Componentwise bounds. Not a cone; only used to exhibit how the
    /// orthogonality identity breaks for general convex sets.
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
}

impl ConstraintSet {
    pub fn kind(&self) -> ConeKind {
        match self {
            ConstraintSet::FullSpace { .. } => ConeKind::FullSpace,
            ConstraintSet::NonnegativeOrthant { .. } => ConeKind::NonnegativeOrthant,
            ConstraintSet::CoordinateSubspace { .. } => ConeKind::CoordinateSubspace,
            ConstraintSet::FinitelyGeneratedCone { .. } => ConeKind::FinitelyGeneratedCone,
            ConstraintSet::Box { .. } => ConeKind::Box,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConstraintSet::FullSpace { n } | ConstraintSet::NonnegativeOrthant { n } => *n,
            ConstraintSet::CoordinateSubspace { free_mask } => free_mask.len(),
            ConstraintSet::FinitelyGeneratedCone { generators } => generators.nrows(),
            ConstraintSet::Box { lower, .. } => lower.len(),
        }
    }

    pub fn is_conic(&self) -> bool {
        !matches!(self, ConstraintSet::Box { .. })
    }

    /// Generated cone from a list of generator vectors, each of length `n`.
    pub fn from_generators(generators: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = generators.first() else {
            return Err(Error::DimensionMismatch("a generated cone needs at least one generator".into()));
        };
        let n = first.len();
        if generators.iter().any(|g| g.len() != n) {
            return Err(Error::DimensionMismatch("generators have unequal lengths".into()));
        }
        let set = ConstraintSet::FinitelyGeneratedCone {
            generators: DMatrix::from_fn(n, generators.len(), |i, j| generators[j][i]),
        };
        set.validate(n)?;
        Ok(set)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "constraint has dimension {} but the market has {} assets",
                self.dim(),
                n
            )));
        }
        match self {
            ConstraintSet::FinitelyGeneratedCone { generators } => {
                if generators.ncols() == 0 {
                    return Err(Error::DimensionMismatch("a generated cone needs at least one generator".into()));
                }
                if generators.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("generators must be finite".into()));
                }
                if generators.column_iter().any(|c| c.norm() == 0.0) {
                    return Err(Error::InvalidParameter("generator columns must be nonzero".into()));
                }
            }
            ConstraintSet::Box { lower, upper } => {
                if upper.len() != lower.len() {
                    return Err(Error::DimensionMismatch("box bounds have unequal lengths".into()));
                }
                if lower.iter().zip(upper).any(|(l, u)| l.is_nan() || u.is_nan() || l > u) {
                    return Err(Error::InvalidParameter("box needs lower <= upper".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Distance-like violation of `π ∈ Π` (zero for members).
    pub fn membership_residual(&self, pi: &DVector<f64>) -> Result<f64> {
        if pi.len() != self.dim() {
            return Err(Error::DimensionMismatch("portfolio dimension".into()));
        }
        Ok(match self {
            ConstraintSet::FullSpace { .. } => 0.0,
            ConstraintSet::NonnegativeOrthant { .. } => pi.iter().fold(0.0, |m, &v| m.max(-v)),
            ConstraintSet::CoordinateSubspace { free_mask } => {
                pi.iter().zip(free_mask).filter(|(_, &free)| !free).fold(0.0, |m, (v, _)| m.max(v.abs()))
            }
            ConstraintSet::FinitelyGeneratedCone { generators } => {
                let cap = 10 * (generators.ncols() + generators.nrows());
                let sol = nnls(generators, pi, cap)?;
                (pi - generators * sol.coefficients).norm()
            }
            ConstraintSet::Box { lower, upper } => pi
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(&v, (&l, &u))| (l - v).max(v - u).max(0.0))
                .fold(0.0, f64::max),
        })
    }

    pub fn contains(&self, pi: &DVector<f64>) -> Result<bool> {
        Ok(self.membership_residual(pi)? <= MEMBERSHIP_TOLERANCE * (1.0 + pi.norm()))
    }
}

#[derive(Debug, Clone)]
enum Repr {
    /// Orthonormal basis (`d × m`, possibly `m = 0`).
    Subspace { basis: DMatrix<f64> },
    /// `generators = σᵀ · lift`, column for column.
    Generated { generators: DMatrix<f64>, lift: DMatrix<f64> },
}

/// The image cone `Π_σ ⊂ ℝᵈ`.
#[derive(Debug, Clone)]
pub struct ProjectedCone {
    kind: ConeKind,
    ambient_dim: usize,
    repr: Repr,
}

/// Projection of a vector together with the NNLS coefficients, when the cone
/// is finitely generated.
#[derive(Debug, Clone)]
pub struct ConeProjection {
    pub point: DVector<f64>,
    pub coefficients: Option<DVector<f64>>,
    pub iterations: usize,
}

impl ProjectedCone {
    pub fn kind(&self) -> ConeKind {
        self.kind
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Generators `σᵀG` of a generated cone, or the orthonormal subspace basis.
    pub fn generator_matrix_sigma(&self) -> &DMatrix<f64> {
        match &self.repr {
            Repr::Subspace { basis } => basis,
            Repr::Generated { generators, .. } => generators,
        }
    }

    /// The `π`-space generators matching [`Self::generator_matrix_sigma`] for generated cones.
    pub fn lift(&self) -> Option<&DMatrix<f64>> {
        match &self.repr {
            Repr::Generated { lift, .. } => Some(lift),
            Repr::Subspace { .. } => None,
        }
    }

    pub fn is_subspace(&self) -> bool {
        matches!(self.repr, Repr::Subspace { .. })
    }

    pub fn project(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.project_detailed(v)?.point)
    }

    pub fn project_detailed(&self, v: &DVector<f64>) -> Result<ConeProjection> {
        if v.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch(format!(
                "vector has length {} but the cone lives in R^{}",
                v.len(),
                self.ambient_dim
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("cannot project a non-finite vector".into()));
        }
        match &self.repr {
            Repr::Subspace { basis } => {
                Ok(ConeProjection { point: basis * basis.tr_mul(v), coefficients: None, iterations: 0 })
            }
            Repr::Generated { generators, .. } => {
                let cap = 10 * (generators.ncols() + self.ambient_dim);
                let sol = nnls(generators, v, cap)?;
                Ok(ConeProjection {
                    point: generators * &sol.coefficients,
                    coefficients: Some(sol.coefficients),
                    iterations: sol.iterations,
                })
            }
        }
    }

    /// Distance from `z` to the cone, measured through its own projection.
    pub fn membership_residual(&self, z: &DVector<f64>) -> Result<f64> {
        Ok((z - self.project(z)?).norm())
    }
}

pub fn to_projected_cone(constraint: &ConstraintSet, market: &Market) -> Result<ProjectedCone> {
    let n = market.n_assets();
    constraint.validate(n)?;
    let sigma_t = market.sigma().transpose();
    let d = sigma_t.nrows();
    let repr = match constraint {
        ConstraintSet::FullSpace { .. } => Repr::Subspace { basis: orthonormal_basis(sigma_t) },
        ConstraintSet::CoordinateSubspace { free_mask } => {
            let free: Vec<usize> = (0..n).filter(|&i| free_mask[i]).collect();
            let basis =
                if free.is_empty() { DMatrix::zeros(d, 0) } else { orthonormal_basis(sigma_t.select_columns(&free)) };
            Repr::Subspace { basis }
        }
        ConstraintSet::NonnegativeOrthant { .. } => {
            Repr::Generated { generators: sigma_t, lift: DMatrix::identity(n, n) }
        }
        ConstraintSet::FinitelyGeneratedCone { generators } => {
            Repr::Generated { generators: &sigma_t * generators, lift: generators.clone() }
        }
        ConstraintSet::Box { .. } => return Err(Error::NonConicSet),
    };
    Ok(ProjectedCone { kind: constraint.kind(), ambient_dim: d, repr })
}

fn orthonormal_basis(columns: DMatrix<f64>) -> DMatrix<f64> {
    // Columns are linearly independent: they are rows of σ and Σ ≻ 0.
    columns.qr().q()
}

/// `ξ`, its projection `ξ_c` and the NNLS coefficients when available.
#[derive(Debug, Clone)]
pub struct MarketPriceProjection {
    pub xi: DVector<f64>,
    pub xi_c: DVector<f64>,
    pub coefficients: Option<DVector<f64>>,
    pub conic: bool,
}

/// `ξ_c = Proj_{Π_σ}[ξ]` for conic constraints.
pub fn constrained_market_price(market: &Market, constraint: &ConstraintSet) -> Result<DVector<f64>> {
    Ok(project_market_price(market, constraint)?.xi_c)
}

pub fn project_market_price(market: &Market, constraint: &ConstraintSet) -> Result<MarketPriceProjection> {
    let xi = market.market_price_vector().clone();
    if let ConstraintSet::FullSpace { n } = constraint {
        if *n != market.n_assets() {
            return Err(Error::DimensionMismatch("constraint dimension".into()));
        }
        // ξ already lies in range(σᵀ).
        return Ok(MarketPriceProjection { xi_c: xi.clone(), xi, coefficients: None, conic: true });
    }
    let cone = to_projected_cone(constraint, market)?;
    let proj = cone.project_detailed(&xi)?;
    Ok(MarketPriceProjection { xi, xi_c: proj.point, coefficients: proj.coefficients, conic: true })
}

/// Projection of `ξ` onto `Π_σ` for any constraint, including the non-conic
/// box (counterexample mode).
pub fn project_market_price_any(market: &Market, constraint: &ConstraintSet) -> Result<MarketPriceProjection> {
    match constraint {
        ConstraintSet::Box { lower, upper } => {
            constraint.validate(market.n_assets())?;
            let xi = market.market_price_vector().clone();
            let pi = project_box_image(market, lower, upper, &xi)?;
            let xi_c = market.sigma().tr_mul(&pi);
            Ok(MarketPriceProjection { xi, xi_c, coefficients: Some(pi), conic: false })
        }
        _ => project_market_price(market, constraint),
    }
}

/// Minimiser `π` of `‖σᵀπ − v‖²` over `lower ≤ π ≤ upper`, by cyclic
/// coordinate descent (the objective is strictly convex in `π` since `Σ ≻ 0`).
pub fn project_box_image(market: &Market, lower: &[f64], upper: &[f64], v: &DVector<f64>) -> Result<DVector<f64>> {
    const MAX_SWEEPS: usize = 100_000;
    let a = market.sigma().transpose();
    let n = a.ncols();
    let col_sq: Vec<f64> = (0..n).map(|i| a.column(i).norm_squared()).collect();
    let mut pi = DVector::from_fn(n, |i, _| 0.0_f64.clamp(lower[i], upper[i]));
    let mut resid = v - &a * &pi;
    let tol = 1e-15 * (1.0 + v.norm());
    for _ in 0..MAX_SWEEPS {
        let mut moved = 0.0_f64;
        for i in 0..n {
            let step = a.column(i).dot(&resid) / col_sq[i];
            let next = (pi[i] + step).clamp(lower[i], upper[i]);
            let delta = next - pi[i];
            if delta != 0.0 {
                resid.axpy(-delta, &a.column(i), 1.0);
                pi[i] = next;
                moved = moved.max(delta.abs() * col_sq[i].sqrt());
            }
        }
        if moved <= tol {
            return Ok(pi);
        }
    }
    Err(Error::SolverNonconvergence { iterations: MAX_SWEEPS })
}

/// `ξᵀξ_c − ‖ξ_c‖²`, evaluated as `(ξ − ξ_c)ᵀξ_c`. Zero for every convex cone.
pub fn orthogonality_check(xi: &DVector<f64>, xi_c: &DVector<f64>) -> f64 {
    (xi - xi_c).dot(xi_c)
}

/// `Σ⁻¹σξ_c`, checked for membership in `Π`.
pub fn recover_portfolio_direction(
    market: &Market,
    constraint: &ConstraintSet,
    xi_c: &DVector<f64>,
) -> Result<DVector<f64>> {
    if xi_c.len() != market.n_factors() {
        return Err(Error::DimensionMismatch("xi_c must have length d".into()));
    }
    let direction = market.solve_covariance(&(market.sigma() * xi_c));
    let residual = constraint.membership_residual(&direction)?;
    if residual > MEMBERSHIP_TOLERANCE * (1.0 + direction.norm()) {
        return Err(Error::MembershipViolation { residual });
    }
    Ok(direction)
}
