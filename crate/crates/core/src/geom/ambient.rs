use nalgebra::{Matrix3, Vector3};

use super::GeomError;
use crate::expr::ExprAst;

/// Background metric on the ambient chart.
///
/// Every supported background is conformally flat in its chart,
/// `ḡ = e^{2σ} δ`:
/// - `Euclidean`: `σ = 0`;
/// - `SpaceForm`: `σ = −log(1 + c|x|²/4)`, the stereographic chart for
///   `c > 0` and the Poincaré ball of radius `2/√(−c)` for `c < 0`; at
///   `c = 0` it is the Euclidean metric;
/// - `ConformalFlat`: `σ = ω(x)` for a user expression in `x, y[, z]`.
#[derive(Debug, Clone)]
pub enum AmbientSpec {
    Euclidean { dim: usize },
    SpaceForm { dim: usize, curvature: f64 },
    ConformalFlat { dim: usize, omega: ExprAst },
}

/// Conformal exponent `σ` with its chart gradient and Hessian at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConformalJet {
    pub sigma: f64,
    pub grad: Vector3<f64>,
    pub hess: Matrix3<f64>,
}

/// Ambient curvature traces at a hypersurface point, taken with the
/// induced metric `h` and the unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AmbientCurvature {
    /// Ambient scalar curvature `R̄`.
    pub scalar: f64,
    /// `h^{ij} R̄_{0i0j}`.
    pub normal_trace: f64,
    /// `h^{ij} h^{kl} R̄_{ikjl}`.
    pub tangential_double_trace: f64,
    /// `h^{ij} P̄_{ij}` with `P̄` the ambient Schouten tensor.
    pub schouten_trace: f64,
}

impl AmbientSpec {
    pub fn dim(&self) -> usize {
        match self {
            AmbientSpec::Euclidean { dim }
            | AmbientSpec::SpaceForm { dim, .. }
            | AmbientSpec::ConformalFlat { dim, .. } => *dim,
        }
    }

    /// Sectional curvature for constant-curvature backgrounds
    /// (`Some(0.0)` for Euclidean space).
    pub fn constant_curvature(&self) -> Option<f64> {
        match self {
            AmbientSpec::Euclidean { .. } => Some(0.0),
            AmbientSpec::SpaceForm { curvature, .. } => Some(*curvature),
            AmbientSpec::ConformalFlat { .. } => None,
        }
    }

    pub fn is_euclidean(&self) -> bool {
        self.constant_curvature() == Some(0.0)
    }

    /// `σ`, `∇σ`, `∇²σ` at chart point `x` (unused trailing components zero).
    pub fn conformal_jet(&self, x: &Vector3<f64>) -> Result<ConformalJet, GeomError> {
        match self {
            AmbientSpec::Euclidean { .. } => Ok(space_form_jet(0.0, x)),
            AmbientSpec::SpaceForm { curvature, .. } => {
                let q = 1.0 + 0.25 * curvature * x.norm_squared();
                if q <= 0.0 {
                    return Err(GeomError::OutsideChart(format!(
                        "point {:?} lies outside the Poincaré ball for curvature {curvature}",
                        x.as_slice()
                    )));
                }
                Ok(space_form_jet(*curvature, x))
            }
            AmbientSpec::ConformalFlat { dim, omega } => {
                let j = omega.eval_jet(&x.as_slice()[..*dim])?;
                let mut grad = Vector3::zeros();
                let mut hess = Matrix3::zeros();
                for a in 0..*dim {
                    grad[a] = j.d(a);
                    for b in 0..*dim {
                        hess[(a, b)] = j.d2(a, b);
                    }
                }
                Ok(ConformalJet {
                    sigma: j.value(),
                    grad,
                    hess,
                })
            }
        }
    }

    /// Curvature traces at a point with Euclidean unit normal `normal`.
    /// Constant-curvature backgrounds use their closed forms
    /// (`R̄ = n(n+1)c`, `R̄_{0i0j} = c h_{ij}`, `P̄ = (c/2) ḡ`).
    pub fn curvature_at(&self, jet: &ConformalJet, normal: &Vector3<f64>) -> AmbientCurvature {
        let n = (self.dim() - 1) as f64;
        if let Some(c) = self.constant_curvature() {
            return constant_curvature_traces(self.dim() - 1, c);
        }
        let t = schouten_like(jet, self.dim());
        let tr = t.trace();
        let t_nn = normal.dot(&(t * normal));
        let tan = tr - t_nn;
        let w = (-2.0 * jet.sigma).exp();
        AmbientCurvature {
            scalar: -2.0 * n * w * tr,
            normal_trace: -w * (n * t_nn + tan),
            tangential_double_trace: -2.0 * (n - 1.0) * w * tan,
            schouten_trace: -w * tan,
        }
    }

    /// Ambient scalar curvature `R̄` at a chart point.
    pub fn scalar_curvature_at(&self, jet: &ConformalJet) -> f64 {
        let n = (self.dim() - 1) as f64;
        if let Some(c) = self.constant_curvature() {
            return n * (n + 1.0) * c;
        }
        let t = schouten_like(jet, self.dim());
        -2.0 * n * (-2.0 * jet.sigma).exp() * t.trace()
    }
}

/// Curvature traces of a space form of sectional curvature `c` seen from a
/// hypersurface of dimension `n`.
pub fn constant_curvature_traces(n: usize, c: f64) -> AmbientCurvature {
    let n = n as f64;
    AmbientCurvature {
        scalar: n * (n + 1.0) * c,
        normal_trace: n * c,
        tangential_double_trace: n * (n - 1.0) * c,
        schouten_trace: 0.5 * n * c,
    }
}

fn space_form_jet(c: f64, x: &Vector3<f64>) -> ConformalJet {
    let q = 1.0 + 0.25 * c * x.norm_squared();
    ConformalJet {
        sigma: -q.ln(),
        grad: x * (-0.5 * c / q),
        hess: Matrix3::identity() * (-0.5 * c / q) + (x * x.transpose()) * (0.25 * c * c / (q * q)),
    }
}

/// `T = ∇²σ − dσ⊗dσ + ½|dσ|² δ`, restricted to the chart dimension. For
/// `ḡ = e^{2σ}δ` the sectional curvature of a plane spanned by δ-orthonormal
/// `a, b` is `−e^{−2σ}(T(a,a) + T(b,b))` and the Schouten tensor is `−T`.
pub(crate) fn schouten_like(jet: &ConformalJet, dim: usize) -> Matrix3<f64> {
    let mut t = jet.hess - jet.grad * jet.grad.transpose() + Matrix3::identity() * (0.5 * jet.grad.norm_squared());
    for a in dim..3 {
        for b in 0..3 {
            t[(a, b)] = 0.0;
            t[(b, a)] = 0.0;
        }
    }
    t
}
