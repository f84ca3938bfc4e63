//! Conformal anomaly of the renormalized volume for surfaces.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::Serialize;

use crate::expr::ExprAst;
use crate::geom::{surface_integrate, AmbientSpec, GeomError, HypersurfaceData, SurfaceGrid};
use crate::renvol::{min_area_density, VolumeData};
use crate::series::{LogSeries, SeriesError};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum AnomalyError {
    #[error("anomaly formulas need n = 2, got n = {0}")]
    NeedsSurface(usize),
    #[error("conformal factor expression must use {expected} variables, found {found}")]
    Variables { expected: usize, found: usize },
    #[error("{0}")]
    Mismatch(String),
    #[error("series coefficient of {which} is {derived:.15e} but the stated form gives {stated:.15e}")]
    Coefficient {
        which: &'static str,
        derived: f64,
        stated: f64,
    },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Jets of the conformal exponent at one boundary node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmegaJet {
    pub omega: f64,
    pub omega_r: f64,
    pub omega_rr: f64,
    /// Tangential derivatives `ω_i`; unused slots are zero for curves.
    pub grad: [f64; 2],
    /// `h^{ij}ω_iω_j`.
    pub grad_norm2: f64,
}

impl OmegaJet {
    /// Jets of the distance exponent `Υ` with `r̂ = e^Υ r`.
    pub fn upsilon(&self) -> [f64; 3] {
        [
            self.omega,
            0.5 * self.omega_r,
            (self.omega_rr + 0.25 * self.omega_r * self.omega_r - self.grad_norm2) / 3.0,
        ]
    }

    /// Coefficients of `r = r̂ b(x, r̂)` through `r̂²`.
    pub fn b_coefficients(&self) -> [f64; 3] {
        let e = (-self.omega).exp();
        [
            e,
            -0.5 * self.omega_r * e * e,
            (self.omega_r * self.omega_r / 3.0 + self.grad_norm2 / 6.0 - self.omega_rr / 6.0) * e * e * e,
        ]
    }

    fn scaled(&self, s: f64) -> Self {
        Self {
            omega: s * self.omega,
            omega_r: s * self.omega_r,
            omega_rr: s * self.omega_rr,
            grad: [s * self.grad[0], s * self.grad[1]],
            grad_norm2: s * s * self.grad_norm2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConformalJets {
    pub nodes: Vec<OmegaJet>,
}

impl ConformalJets {
    pub fn constant(len: usize, k: f64) -> Self {
        Self {
            nodes: vec![
                OmegaJet {
                    omega: k,
                    omega_r: 0.0,
                    omega_rr: 0.0,
                    grad: [0.0; 2],
                    grad_norm2: 0.0,
                };
                len
            ],
        }
    }

    /// Jets of `s·ω`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            nodes: self.nodes.iter().map(|j| j.scaled(s)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn grad_norm2(data: &HypersurfaceData, node: usize, grad: [f64; 2]) -> f64 {
    let h_inv = &data.nodes()[node].h_inv;
    let n = data.n();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += h_inv[(i, j)] * grad[i] * grad[j];
        }
    }
    acc
}

/// Jets of `ω` given in collar coordinates: the surface parameters
/// followed by the distance `r`.
pub fn conformal_jets_collar(
    omega: &ExprAst,
    surface: &SurfaceGrid,
    data: &HypersurfaceData,
) -> Result<ConformalJets, AnomalyError> {
    let n = data.n();
    if omega.variables().len() != n + 1 {
        return Err(AnomalyError::Variables {
            expected: n + 1,
            found: omega.variables().len(),
        });
    }
    if surface.len() != data.len() {
        return Err(AnomalyError::Mismatch("surface and data node counts differ".into()));
    }
    let nodes = (0..data.len())
        .into_par_iter()
        .map(|k| {
            let p = surface.params(k);
            let mut point = p[..n].to_vec();
            point.push(0.0);
            let jet = omega.eval_jet(&point).map_err(GeomError::from)?;
            let mut grad = [0.0; 2];
            for (i, g) in grad.iter_mut().enumerate().take(n) {
                *g = jet.d(i);
            }
            Ok(OmegaJet {
                omega: jet.value(),
                omega_r: jet.d(n),
                omega_rr: jet.d2(n, n),
                grad,
                grad_norm2: grad_norm2(data, k, grad),
            })
        })
        .collect::<Result<Vec<_>, AnomalyError>>()?;
    Ok(ConformalJets { nodes })
}

/// Jets of `ω` given in ambient chart coordinates. Normal derivatives follow
/// the unit-speed ambient geodesic leaving each node along the selected normal.
pub fn conformal_jets_ambient(
    omega: &ExprAst,
    surface: &SurfaceGrid,
    data: &HypersurfaceData,
    ambient: &AmbientSpec,
) -> Result<ConformalJets, AnomalyError> {
    let n = data.n();
    if omega.variables().len() != n + 1 {
        return Err(AnomalyError::Variables {
            expected: n + 1,
            found: omega.variables().len(),
        });
    }
    if surface.len() != data.len() {
        return Err(AnomalyError::Mismatch("surface and data node counts differ".into()));
    }
    let nodes = (0..data.len())
        .into_par_iter()
        .map(|k| {
            let f = &surface.frames()[k];
            let g = &data.nodes()[k];
            let cj = ambient.conformal_jet(&f.pos)?;
            let point: Vec<f64> = f.pos.iter().take(n + 1).copied().collect();
            let jet = omega.eval_jet(&point).map_err(GeomError::from)?;
            let mut grad_w = Vector3::zeros();
            let mut hess = nalgebra::Matrix3::zeros();
            for a in 0..=n {
                grad_w[a] = jet.d(a);
                for b in 0..=n {
                    hess[(a, b)] = jet.d2(a, b);
                }
            }
            let nu = g.normal * (-cj.sigma).exp();
            let accel = nu * (-2.0 * cj.grad.dot(&nu)) + cj.grad * nu.norm_squared();
            let mut grad = [0.0; 2];
            for (i, t) in grad.iter_mut().enumerate().take(n) {
                *t = grad_w.dot(&f.d1[i]);
            }
            Ok(OmegaJet {
                omega: jet.value(),
                omega_r: grad_w.dot(&nu),
                omega_rr: nu.dot(&(hess * nu)) + grad_w.dot(&accel),
                grad,
                grad_norm2: grad_norm2(data, k, grad),
            })
        })
        .collect::<Result<Vec<_>, AnomalyError>>()?;
    Ok(ConformalJets { nodes })
}

/// `ε`-coefficient of `b^{−1}` and `ε²`-coefficient of `b^{−2}` by series
/// inversion, checked against `½ω_r` and `1/12 ω_r² − ⅓ω_iω^i + ⅓ω_rr`.
pub fn inverse_b_coefficients(jet: &OmegaJet) -> Result<(f64, f64), AnomalyError> {
    let b = LogSeries::from_coeffs(2, &jet.b_coefficients());
    let first = b.try_powf(-1.0)?.a(1);
    let second = b.try_powf(-2.0)?.a(2);
    let stated_first = 0.5 * jet.omega_r;
    let stated_second = jet.omega_r * jet.omega_r / 12.0 - jet.grad_norm2 / 3.0 + jet.omega_rr / 3.0;
    let scale = 1.0 + jet.omega_r.abs().powi(2) + jet.omega_rr.abs() + jet.grad_norm2;
    if (first - stated_first).abs() > 1e-12 * scale {
        return Err(AnomalyError::Coefficient {
            which: "b^-1",
            derived: first,
            stated: stated_first,
        });
    }
    if (second - stated_second).abs() > 1e-12 * scale {
        return Err(AnomalyError::Coefficient {
            which: "b^-2",
            derived: second,
            stated: stated_second,
        });
    }
    Ok((first, second))
}

fn check_surface(cj: &ConformalJets, data: &HypersurfaceData) -> Result<(), AnomalyError> {
    if data.n() != 2 {
        return Err(AnomalyError::NeedsSurface(data.n()));
    }
    if cj.len() != data.len() {
        return Err(AnomalyError::Mismatch(format!(
            "{} conformal jets for {} nodes",
            cj.len(),
            data.len()
        )));
    }
    Ok(())
}

/// Constant term of `∫[−½ε^{−2}b^{−2} − ε^{−1}v^(1)b^{−1} + v^(2) log b]`.
pub fn anomaly_route_b(cj: &ConformalJets, vd: &VolumeData, data: &HypersurfaceData) -> Result<f64, AnomalyError> {
    check_surface(cj, data)?;
    if vd.n != 2 || vd.v[0].len() != data.len() {
        return Err(AnomalyError::Mismatch("volume data does not match the surface".into()));
    }
    let integrand = cj
        .nodes
        .par_iter()
        .enumerate()
        .map(|(k, j)| {
            let (b1, b2) = inverse_b_coefficients(j)?;
            Ok(-0.5 * b2 - vd.v[1][k] * b1 - vd.v[2][k] * j.omega)
        })
        .collect::<Result<Vec<f64>, AnomalyError>>()?;
    Ok(surface_integrate(&integrand, data))
}

/// `−⅛∫[2(|L̊|²−R)ω − Hω_r + ⅓(4ω_rr − 4ω_iω^i + ω_r²)]`.
pub fn anomaly_route_closed(cj: &ConformalJets, data: &HypersurfaceData) -> Result<f64, AnomalyError> {
    check_surface(cj, data)?;
    let integrand: Vec<f64> = cj
        .nodes
        .iter()
        .zip(data.nodes())
        .map(|(j, g)| {
            -0.125
                * (2.0 * (g.tracefree_norm2 - g.scalar) * j.omega - g.mean * j.omega_r
                    + (4.0 * j.omega_rr - 4.0 * j.grad_norm2 + j.omega_r * j.omega_r) / 3.0)
        })
        .collect();
    Ok(surface_integrate(&integrand, data))
}

/// Quadratic part `−⅛∫⅓(ω_r² − 4ω_iω^i)` of the anomaly.
pub fn anomaly_quadratic_part(cj: &ConformalJets, data: &HypersurfaceData) -> Result<f64, AnomalyError> {
    check_surface(cj, data)?;
    let integrand: Vec<f64> = cj
        .nodes
        .iter()
        .map(|j| -0.125 * (j.omega_r * j.omega_r - 4.0 * j.grad_norm2) / 3.0)
        .collect();
    Ok(surface_integrate(&integrand, data))
}

/// Integrand `⅛[(H² + 4h^{ij}P̄_ij)ω − 2Hω_r + 2ω_iω^i]` of the anomaly of
/// the renormalized minimal area, and its integral.
pub fn min_area_anomaly(cj: &ConformalJets, data: &HypersurfaceData) -> Result<(Vec<f64>, f64), AnomalyError> {
    check_surface(cj, data)?;
    let density = min_area_density(data);
    let integrand: Vec<f64> = cj
        .nodes
        .iter()
        .zip(data.nodes())
        .zip(&density)
        .map(|((j, g), d)| 0.125 * (d * j.omega - 2.0 * g.mean * j.omega_r + 2.0 * j.grad_norm2))
        .collect();
    let total = surface_integrate(&integrand, data);
    Ok((integrand, total))
}
