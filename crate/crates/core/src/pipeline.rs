//! End-to-end runs: geometry, collar, expansion and volume coefficients.

use serde::{Deserialize, Serialize};

use crate::anomaly::AnomalyError;
use crate::collar::{
    euclidean_collar, numeric_collar, spaceform_collar, CollarError, CollarJets, NumericCollarOptions,
};
use crate::geom::{fundamental_forms, AmbientSpec, GeomError, HypersurfaceData, Orientation, SurfaceGrid};
use crate::renvol::{volume_coefficients, RenvolError, VolumeData};
use crate::yamabe::{solve_yamabe, SolveMode, YamabeError, YamabeExpansion};

/// Any failure along the pipeline.
#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("geometry: {0}")]
    Geom(#[from] GeomError),
    #[error("collar: {0}")]
    Collar(#[from] CollarError),
    #[error("yamabe: {0}")]
    Yamabe(#[from] YamabeError),
    #[error("renvol: {0}")]
    Renvol(#[from] RenvolError),
    #[error("anomaly: {0}")]
    Anomaly(#[from] AnomalyError),
}

/// Collar construction to use for an ambient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollarMethod {
    /// Closed form where the ambient allows it, numeric otherwise.
    #[default]
    Auto,
    Numeric,
}

/// Everything one run produces.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub data: HypersurfaceData,
    pub jets: CollarJets,
    pub expansion: YamabeExpansion,
    pub volume: VolumeData,
}

pub fn collar_for(
    ambient: &AmbientSpec,
    surface: Option<&SurfaceGrid>,
    data: &HypersurfaceData,
    method: CollarMethod,
) -> Result<CollarJets, PipelineError> {
    let order = data.n() + 1;
    let jets = match (ambient, method) {
        (AmbientSpec::Euclidean { .. }, CollarMethod::Auto) => euclidean_collar(data, order)?,
        (AmbientSpec::SpaceForm { curvature, .. }, CollarMethod::Auto) => spaceform_collar(data, *curvature, order)?,
        _ => {
            let surface =
                surface.ok_or_else(|| GeomError::Unsupported("numeric collars need a sampled hypersurface".into()))?;
            numeric_collar(ambient, surface, data, order, NumericCollarOptions::default())?
        }
    };
    Ok(jets)
}

/// Run a sampled hypersurface through the grid solver.
pub fn run_grid(
    surface: &SurfaceGrid,
    ambient: &AmbientSpec,
    method: CollarMethod,
) -> Result<PipelineOutput, PipelineError> {
    let data = fundamental_forms(surface, ambient, Orientation::Inward)?;
    let jets = collar_for(ambient, Some(surface), &data, method)?;
    finish(data, jets, SolveMode::Grid)
}

/// Run an already-built hypersurface description in the given mode.
pub fn run_data(data: HypersurfaceData, jets: CollarJets, mode: SolveMode) -> Result<PipelineOutput, PipelineError> {
    finish(data, jets, mode)
}

/// Geodesic sphere of polar radius `rho` in a space form, homogeneous mode.
pub fn run_homogeneous_sphere(n: usize, curvature: f64, rho: f64) -> Result<PipelineOutput, PipelineError> {
    let data = HypersurfaceData::homogeneous_sphere(n, curvature, rho)?;
    let jets = spaceform_collar(&data, curvature, n + 1)?;
    finish(data, jets, SolveMode::Homogeneous)
}

fn finish(data: HypersurfaceData, jets: CollarJets, mode: SolveMode) -> Result<PipelineOutput, PipelineError> {
    let expansion = solve_yamabe(&jets, &data, mode)?;
    let volume = volume_coefficients(&expansion, &jets, &data)?;
    Ok(PipelineOutput {
        data,
        jets,
        expansion,
        volume,
    })
}
