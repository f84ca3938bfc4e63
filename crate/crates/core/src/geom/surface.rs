use nalgebra::Vector3;
use rayon::prelude::*;

use super::grid::{GridLayout, Parity};
use super::{AmbientSpec, GeomError};
use crate::expr::ExprAst;

/// How the tangent frame and its derivatives were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeSource {
    /// Forward-mode jets of the embedding expressions.
    Exact,
    /// Fourth-order finite differences of node positions.
    FiniteDifference,
}

/// Chart position of a node with its first and second parameter derivatives.
/// `d2` holds `[X_uu, X_uv, X_vv]`; unused slots are zero for curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeFrame {
    pub pos: Vector3<f64>,
    pub d1: [Vector3<f64>; 2],
    pub d2: [Vector3<f64>; 3],
}

/// A parametric curve or surface sampled on a structured grid.
#[derive(Debug, Clone)]
pub struct SurfaceGrid {
    layout: GridLayout,
    frames: Vec<NodeFrame>,
    source: DerivativeSource,
}

impl SurfaceGrid {
    /// Build a surface from node positions, differentiating them on the grid.
    pub fn from_positions(layout: GridLayout, positions: Vec<Vector3<f64>>) -> Result<Self, GeomError> {
        if positions.len() != layout.len() {
            return Err(GeomError::Dimension(format!(
                "{} positions for a grid of {} nodes",
                positions.len(),
                layout.len()
            )));
        }
        let comps: Vec<Vec<f64>> = (0..3).map(|a| positions.iter().map(|p| p[a]).collect()).collect();
        let parts: Vec<_> = comps.iter().map(|c| layout.partials(c, Parity::Even)).collect();
        let frames = (0..layout.len())
            .map(|k| {
                let comp = |slot: usize| Vector3::new(parts[0][k][slot], parts[1][k][slot], parts[2][k][slot]);
                NodeFrame {
                    pos: positions[k],
                    d1: [comp(0), comp(1)],
                    d2: [comp(2), comp(3), comp(4)],
                }
            })
            .collect();
        let surface = Self {
            layout,
            frames,
            source: DerivativeSource::FiniteDifference,
        };
        surface.check_rank()?;
        Ok(surface)
    }

    pub fn n(&self) -> usize {
        self.layout.n()
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    pub fn frames(&self) -> &[NodeFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn source(&self) -> DerivativeSource {
        self.source
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.frames.iter().map(|f| f.pos).collect()
    }

    pub fn params(&self, idx: usize) -> [f64; 2] {
        self.layout.params(idx)
    }

    fn check_rank(&self) -> Result<(), GeomError> {
        for (node, f) in self.frames.iter().enumerate() {
            let ok = if self.n() == 1 {
                f.d1[0].norm() > 1e-10
            } else {
                let (a, b) = (f.d1[0].norm(), f.d1[1].norm());
                a > 1e-12 && b > 1e-12 && f.d1[0].cross(&f.d1[1]).norm() > 1e-10 * a * b
            };
            let finite = f.pos.iter().chain(f.d1.iter().flatten()).all(|x| x.is_finite());
            if !ok || !finite {
                return Err(GeomError::RankDeficient {
                    node,
                    params: self.params(node),
                });
            }
        }
        Ok(())
    }
}

/// Sample an embedding given by `n + 1` expressions in the parameters
/// (`u` for curves, `u, v` for surfaces) and verify that it is an immersion
/// lying inside the ambient chart.
pub fn build_surface(
    ambient: &AmbientSpec,
    embedding: &[ExprAst],
    layout: GridLayout,
) -> Result<SurfaceGrid, GeomError> {
    let n = layout.n();
    if embedding.len() != n + 1 || ambient.dim() != n + 1 {
        return Err(GeomError::Dimension(format!(
            "a {n}-dimensional grid needs {} embedding components in a {}-dimensional ambient; got {} components and ambient dimension {}",
            n + 1,
            n + 1,
            embedding.len(),
            ambient.dim()
        )));
    }
    for e in embedding {
        if e.variables().len() != n {
            return Err(GeomError::Dimension(format!(
                "embedding component `{e}` declares {} parameters, expected {n}",
                e.variables().len()
            )));
        }
    }
    let frames = (0..layout.len())
        .into_par_iter()
        .map(|k| {
            let p = layout.params(k);
            let mut frame = NodeFrame {
                pos: Vector3::zeros(),
                d1: [Vector3::zeros(); 2],
                d2: [Vector3::zeros(); 3],
            };
            for (a, e) in embedding.iter().enumerate() {
                let j = e.eval_jet(&p[..n])?;
                frame.pos[a] = j.value();
                frame.d1[0][a] = j.d(0);
                frame.d2[0][a] = j.d2(0, 0);
                if n == 2 {
                    frame.d1[1][a] = j.d(1);
                    frame.d2[1][a] = j.d2(0, 1);
                    frame.d2[2][a] = j.d2(1, 1);
                }
            }
            ambient.conformal_jet(&frame.pos)?;
            Ok(frame)
        })
        .collect::<Result<Vec<_>, GeomError>>()?;
    let surface = SurfaceGrid {
        layout,
        frames,
        source: DerivativeSource::Exact,
    };
    surface.check_rank()?;
    Ok(surface)
}
