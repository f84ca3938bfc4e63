//! Formal asymptotics of the singular Yamabe problem for hypersurfaces.
//!
//! The crate computes, for a hypersurface `Σ` in a conformally flat
//! background, the local expansion of the defining function `u` whose
//! conformal metric `u^{−2}ḡ` has scalar curvature `−n(n+1)`, the
//! obstruction density `𝓛`, the volume coefficients `v^(k)`, the energy
//! `𝓔` and, for surfaces, the conformal anomaly of the renormalized volume.

pub mod anomaly;
pub mod collar;
pub mod expr;
pub mod geom;
pub mod pipeline;
pub mod renvol;
pub mod series;
pub mod variation;
pub mod volprobe;
pub mod yamabe;

pub use anomaly::{AnomalyError, ConformalJets, OmegaJet};
pub use collar::{CollarError, CollarJets, CollarKind, CollarRecord};
pub use expr::{parse_expr, ExprAst, ExprError};
pub use geom::{AmbientSpec, GeomError, GridLayout, HypersurfaceData, Orientation, SurfaceGrid, Topology};
pub use pipeline::{CollarMethod, PipelineError, PipelineOutput};
pub use renvol::{RenvolError, VolumeData};
pub use series::{LogSeries, MatrixSeries, SeriesError};
pub use variation::{VariationError, VariationEstimate, VariationSpec};
pub use volprobe::{ExpansionFit, ProbeError, ProbeModel};
pub use yamabe::{SolveMode, YamabeError, YamabeExpansion};
