//! Discretized hypersurfaces in conformally flat ambient charts.

mod ambient;
mod forms;
mod grid;
pub mod presets;
mod surface;

pub use ambient::{constant_curvature_traces, AmbientCurvature, AmbientSpec, ConformalJet};
pub(crate) use forms::{christoffel_symbols, laplacian_from_partials};
pub use forms::{
    euler_characteristic, fundamental_forms, intrinsic_scalar, surface_integrate, tangential_gradient_norm2,
    tangential_laplacian, EulerCharacteristic, HypersurfaceData, NodeGeometry, Orientation,
};
pub use grid::{fejer_weights, GridLayout, Parity, Topology};
pub use surface::{build_surface, DerivativeSource, NodeFrame, SurfaceGrid};

use crate::expr::ExprError;

/// Smallest admissible number of nodes along a grid direction.
pub const MIN_GRID: usize = 16;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("expression error: {0}")]
    Expr(#[from] ExprError),
    #[error("immersion is rank deficient at node {node} (parameters {params:?})")]
    RankDeficient { node: usize, params: [f64; 2] },
    #[error("normal orientation flips between nodes {a} and {b}; surface is not orientable on this grid")]
    NonOrientable { a: usize, b: usize },
    #[error("grid too small: {0} nodes in a direction, need at least {MIN_GRID}")]
    GridTooSmall(usize),
    #[error("sphere-like grids need an even azimuthal count, got {0}")]
    OddAzimuth(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("outside ambient chart: {0}")]
    OutsideChart(String),
    #[error("Gauss-Bonnet residual {residual:.3e} exceeds 0.01; grid is under-resolved")]
    UnderResolved { residual: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
}
