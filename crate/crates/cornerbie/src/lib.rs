//! Boundary integral equation solver for Laplace boundary value problems on
//! simple polygons.
//!
//! The library discretizes the Dirichlet boundary integral equations with a
//! Nystrom method whose corner panels carry a universal singular basis
//! (orthonormal functions spanning `x^mu` for `mu` in `{0} ∪ [1/2, 50]`).
//! Neumann problems are solved "weakly" through the transpose of the
//! corresponding Dirichlet system: the resulting density is accurate under
//! inner products with smooth functions, and pointwise values near corners
//! are recovered afterwards by a ladder of small local re-solves
//! ([`corner_resolve`]).
//!
//! Modules follow the pipeline:
//!
//! * [`geometry`] — polygons, arclength parametrization, panel meshes
//! * [`kernels`] — Laplace kernels and jump relations
//! * [`quadrature`] — Gauss-Legendre rules and adaptive integration
//! * [`corner_basis`] — the singular corner basis and its interpolation rule
//! * [`singular`] — certified corner quadrature weight tables
//! * [`assembly`] — dense Nystrom system matrices for the four BIEs
//! * [`solve`] — direct and adjoint (transpose) solves, weak inner products
//! * [`corner_resolve`] — local re-solve ladder near corners
//! * [`evaluate`] — potential evaluation and the polarization tensor
//! * [`reference`] — brute-force graded-mesh reference solver
//! * [`boundary_data`] — boundary data generators (charges, harmonics, ...)

pub mod assembly;
pub mod boundary_data;
pub mod corner_basis;
pub mod corner_resolve;
pub mod evaluate;
pub mod geometry;
pub mod kernels;
pub mod linalg;
pub mod quadrature;
pub mod reference;
pub mod singular;
pub mod solve;

pub use geometry::{build_mesh, build_polygon, Discretization, MeshParams, Panel, PanelKind, Polygon};
pub use solve::DensityVector;

/// Errors shared by the whole pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("polygon has self-intersecting edges")]
    SelfIntersecting,
    #[error("degenerate corner angle at vertex {vertex}: alpha = {alpha}")]
    DegenerateAngle { vertex: usize, alpha: f64 },
    #[error("mesh infeasible: {0}")]
    MeshInfeasible(String),
    #[error("parameter {0} lies exactly at a corner")]
    AtCorner(f64),
    #[error("kernel evaluated at coincident points")]
    CoincidentPoints,
    #[error("unsupported quadrature order {0}")]
    UnsupportedOrder(usize),
    #[error("adaptive integration exceeded maximum depth {0}")]
    MaxDepthExceeded(usize),
    #[error("power family is numerically rank deficient")]
    RankDeficient,
    #[error("interpolation matrix ill-conditioned: cond(U) = {0:.3e}")]
    IllConditioned(f64),
    #[error("singular quadrature certification failed: residual {resid:.3e} exceeds {tol:.3e}")]
    ResidualTooLarge { resid: f64, tol: f64 },
    #[error("no singular quadrature table for corner angle alpha = {0}")]
    MissingTable(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("system matrix is numerically singular")]
    SingularMatrix,
    #[error("incompatible interior Neumann data: mean {0:.3e} is not zero")]
    IncompatibleData(f64),
    #[error("corner-panel interpolation matrix U is ill-conditioned: {0:.3e}")]
    IllConditionedU(f64),
    #[error("corner re-solve exceeded maximum level count {0}")]
    MaxLevels(usize),
    #[error("target near corner {corner} needs a resolve ladder down to radius {required_radius:.3e} ({required_levels} levels)")]
    UnresolvedCorner {
        corner: usize,
        required_radius: f64,
        required_levels: usize,
    },
    #[error("problem size {n} exceeds configured cap {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
