//! Finite-difference check of the first variation of the energy.

use rayon::prelude::*;
use serde::Serialize;

use crate::expr::ExprAst;
use crate::geom::{surface_integrate, tangential_laplacian, AmbientSpec, GeomError, HypersurfaceData, SurfaceGrid};
use crate::pipeline::{run_grid, CollarMethod, PipelineError};
use crate::yamabe::YamabeExpansion;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum VariationError {
    #[error("offset t·max|f| = {reach:.3e} exceeds 0.1 × minimum curvature radius {radius:.3e}")]
    OffsetTooLarge { reach: f64, radius: f64 },
    #[error("variation harness needs a Euclidean ambient of dimension 3")]
    Ambient,
    #[error("{0}")]
    Mismatch(String),
    #[error("pipeline failed at offset t = {t:.3e}: {source}")]
    Offset { t: f64, source: PipelineError },
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Step control of the finite-difference estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct VariationSpec {
    /// Largest offset `t₀`; `None` uses `1e−3 ×` the minimum curvature radius.
    pub t0: Option<f64>,
}

/// Richardson-extrapolated central difference of the energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariationEstimate {
    pub estimate: f64,
    /// `|D(t₀/2) − D(t₀)|` of the two central differences.
    pub error: f64,
    pub t0: f64,
    /// Energies at `−t₀, −t₀/2, t₀/2, t₀`.
    pub energies: [f64; 4],
}

/// `1 / max √|L|²` over nodes, a lower bound for the curvature radius.
pub fn min_curvature_radius(data: &HypersurfaceData) -> f64 {
    let k = data.nodes().iter().map(|g| g.l_norm2.sqrt()).fold(0.0, f64::max);
    if k > 0.0 {
        1.0 / k
    } else {
        f64::INFINITY
    }
}

/// Evaluate an ambient-coordinate expression at every node.
pub fn field_from_expr(expr: &ExprAst, surface: &SurfaceGrid) -> Result<Vec<f64>, GeomError> {
    let dim = expr.variables().len();
    surface
        .frames()
        .iter()
        .map(|f| {
            let p: Vec<f64> = f.pos.iter().take(dim).copied().collect();
            Ok(expr.eval(&p)?)
        })
        .collect()
}

/// Move every node by `t·f` along the unit normal of `data`.
pub fn offset_surface(
    surface: &SurfaceGrid,
    data: &HypersurfaceData,
    f: &[f64],
    t: f64,
) -> Result<SurfaceGrid, VariationError> {
    if f.len() != surface.len() || data.len() != surface.len() {
        return Err(VariationError::Mismatch(format!(
            "{} speeds for {} nodes",
            f.len(),
            surface.len()
        )));
    }
    let reach = t.abs() * f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let radius = min_curvature_radius(data);
    if reach >= 0.1 * radius {
        return Err(VariationError::OffsetTooLarge { reach, radius });
    }
    let positions = surface
        .frames()
        .iter()
        .zip(data.nodes())
        .zip(f)
        .map(|((fr, g), s)| fr.pos + g.normal * (t * s))
        .collect();
    Ok(SurfaceGrid::from_positions(surface.layout().clone(), positions)?)
}

/// Estimate `d/dt 𝓔(Σ_t)` at `t = 0` from the full pipeline on four offsets.
pub fn energy_variation_fd(
    surface: &SurfaceGrid,
    data: &HypersurfaceData,
    ambient: &AmbientSpec,
    f: &[f64],
    spec: VariationSpec,
) -> Result<VariationEstimate, VariationError> {
    if !matches!(ambient, AmbientSpec::Euclidean { dim: 3 }) {
        return Err(VariationError::Ambient);
    }
    let t0 = spec.t0.unwrap_or(1e-3 * min_curvature_radius(data));
    let steps = [-t0, -0.5 * t0, 0.5 * t0, t0];
    let energies = steps
        .par_iter()
        .map(|&t| {
            let s = offset_surface(surface, data, f, t)?;
            run_grid(&s, ambient, CollarMethod::Auto)
                .map(|o| o.volume.energy)
                .map_err(|source| VariationError::Offset { t, source })
        })
        .collect::<Result<Vec<f64>, VariationError>>()?;
    let coarse = (energies[3] - energies[0]) / (2.0 * t0);
    let fine = (energies[2] - energies[1]) / t0;
    Ok(VariationEstimate {
        estimate: (4.0 * fine - coarse) / 3.0,
        error: (fine - coarse).abs(),
        t0,
        energies: [energies[0], energies[1], energies[2], energies[3]],
    })
}

/// `(n+2)(n−1)∫ f 𝓛`.
pub fn variation_rhs(f: &[f64], exp: &YamabeExpansion, data: &HypersurfaceData) -> f64 {
    let n = exp.n as f64;
    let integrand: Vec<f64> = f.iter().zip(&exp.nodes).map(|(v, e)| v * e.obstruction).collect();
    (n + 2.0) * (n - 1.0) * surface_integrate(&integrand, data)
}

/// Ratio of the obstruction to `ΔH + 2H(H²/4 − K)` on a surface.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WillmoreRatio {
    /// Median ratio over nodes where the Willmore operator is not small.
    pub ratio: f64,
    /// Largest relative deviation from `ratio` over those nodes.
    pub spread: f64,
    pub nodes_used: usize,
}

/// Classical Willmore operator `ΔH + 2H(H²/4 − K)` with `K = R/2`.
pub fn willmore_operator(data: &HypersurfaceData) -> Result<Vec<f64>, GeomError> {
    let h = data.field(|g| g.mean);
    let lap = tangential_laplacian(&h, data)?;
    Ok(data
        .nodes()
        .iter()
        .zip(&lap)
        .map(|(g, l)| l + 2.0 * g.mean * (0.25 * g.mean * g.mean - 0.5 * g.scalar))
        .collect())
}

pub fn willmore_ratio(exp: &YamabeExpansion, data: &HypersurfaceData) -> Result<WillmoreRatio, VariationError> {
    if data.n() != 2 {
        return Err(VariationError::Mismatch("Willmore operator needs n = 2".into()));
    }
    let w = willmore_operator(data)?;
    let wmax = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut ratios: Vec<f64> = w
        .iter()
        .zip(&exp.nodes)
        .filter(|(v, _)| v.abs() > 0.1 * wmax)
        .map(|(v, e)| e.obstruction / v)
        .collect();
    if ratios.is_empty() {
        return Err(VariationError::Mismatch(
            "Willmore operator vanishes identically".into(),
        ));
    }
    ratios.sort_by(f64::total_cmp);
    let ratio = ratios[ratios.len() / 2];
    let spread = ratios.iter().map(|r| ((r - ratio) / ratio).abs()).fold(0.0, f64::max);
    Ok(WillmoreRatio {
        ratio,
        spread,
        nodes_used: ratios.len(),
    })
}
