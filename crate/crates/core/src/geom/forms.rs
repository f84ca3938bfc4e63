use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector3};
use rayon::prelude::*;

use super::ambient::{constant_curvature_traces, schouten_like};
use super::grid::{GridLayout, Parity};
use super::{AmbientCurvature, AmbientSpec, GeomError, SurfaceGrid};

/// Which unit normal the second fundamental form is taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    /// Normal pointing into the region the hypersurface bounds in the chart.
    #[default]
    Inward,
    Outward,
    /// `X_u × X_v` (or the left normal of a curve), whatever side that is.
    AsParametrized,
}

/// Pointwise geometry of the hypersurface at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGeometry {
    /// Induced metric `h_ij`.
    pub h: DMatrix<f64>,
    pub h_inv: DMatrix<f64>,
    /// Second fundamental form `L_ij` with respect to the selected unit normal.
    pub l: DMatrix<f64>,
    /// `H = h^{ij} L_ij`.
    pub mean: f64,
    /// `|L|²`.
    pub l_norm2: f64,
    /// `|L̊|² = |L|² − H²/n`.
    pub tracefree_norm2: f64,
    /// Intrinsic scalar curvature from the Gauss equation.
    pub scalar: f64,
    pub ambient: AmbientCurvature,
    /// `R̄_{0i0j}` as an `n × n` matrix.
    pub normal_curvature: DMatrix<f64>,
    /// Selected unit normal in chart coordinates, normalized for `δ`.
    pub normal: Vector3<f64>,
    /// Conformal exponent `σ` of the ambient metric at the node.
    pub sigma: f64,
    /// `∂_k h_ij`, indexed `[k][i + j]`.
    pub dmetric: [[f64; 3]; 2],
    /// Christoffel symbols `Γ^m_ij`, indexed `[m][i + j]`.
    pub christoffel: [[f64; 3]; 2],
    /// Quadrature weight including `√det h`.
    pub area: f64,
}

/// Fundamental forms and curvature of a hypersurface, either on a grid or
/// as a single representative node of a homogeneous hypersurface (whose
/// `area` weight is then the total volume).
#[derive(Debug, Clone)]
pub struct HypersurfaceData {
    n: usize,
    nodes: Vec<NodeGeometry>,
    layout: Option<GridLayout>,
}

impl HypersurfaceData {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> &[NodeGeometry] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn layout(&self) -> Option<&GridLayout> {
        self.layout.as_ref()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.layout.is_none()
    }

    /// Collect one scalar per node.
    pub fn field(&self, f: impl Fn(&NodeGeometry) -> f64) -> Vec<f64> {
        self.nodes.iter().map(f).collect()
    }

    /// Geodesic sphere of polar radius `rho` in the `(n+1)`-dimensional
    /// space form of curvature `c` (a round sphere of radius `rho` when
    /// `c = 0`), with the normal pointing toward its centre.
    pub fn homogeneous_sphere(n: usize, curvature: f64, rho: f64) -> Result<Self, GeomError> {
        if n == 0 {
            return Err(GeomError::Dimension("hypersurface dimension must be at least 1".into()));
        }
        let s = sn(curvature, rho);
        let k = cn(curvature, rho) / s;
        if s.is_nan() || s <= 0.0 || !k.is_finite() || (curvature > 0.0 && rho * curvature.sqrt() >= PI) {
            return Err(GeomError::OutsideChart(format!(
                "polar radius {rho} does not give an embedded geodesic sphere for curvature {curvature}"
            )));
        }
        let h = DMatrix::identity(n, n);
        let l = DMatrix::identity(n, n) * k;
        let nf = n as f64;
        let ambient = constant_curvature_traces(n, curvature);
        let mean = nf * k;
        let l_norm2 = nf * k * k;
        let node = NodeGeometry {
            h_inv: h.clone(),
            normal_curvature: &h * curvature,
            h,
            l,
            mean,
            l_norm2,
            tracefree_norm2: 0.0,
            scalar: gauss_scalar(ambient.tangential_double_trace, l_norm2, mean),
            ambient,
            normal: Vector3::zeros(),
            sigma: 0.0,
            dmetric: [[0.0; 3]; 2],
            christoffel: [[0.0; 3]; 2],
            area: sphere_volume(n, s),
        };
        Ok(Self {
            n,
            nodes: vec![node],
            layout: None,
        })
    }
}

/// `sin(√c t)/√c`, with its hyperbolic and Euclidean analogues.
pub(crate) fn sn(c: f64, t: f64) -> f64 {
    if c > 0.0 {
        (c.sqrt() * t).sin() / c.sqrt()
    } else if c < 0.0 {
        ((-c).sqrt() * t).sinh() / (-c).sqrt()
    } else {
        t
    }
}

/// `cos(√c t)`, with its hyperbolic and Euclidean analogues.
pub(crate) fn cn(c: f64, t: f64) -> f64 {
    if c > 0.0 {
        (c.sqrt() * t).cos()
    } else if c < 0.0 {
        ((-c).sqrt() * t).cosh()
    } else {
        1.0
    }
}

/// Volume of the round `n`-sphere of radius `s`.
pub(crate) fn sphere_volume(n: usize, s: f64) -> f64 {
    let mut omega = if n.is_multiple_of(2) { 2.0 } else { 2.0 * PI };
    let mut k = if n.is_multiple_of(2) { 0 } else { 1 };
    while k < n {
        k += 2;
        omega *= 2.0 * PI / (k as f64 - 1.0);
    }
    omega * s.powi(n as i32)
}

fn gauss_scalar(double_trace: f64, l_norm2: f64, mean: f64) -> f64 {
    double_trace - l_norm2 + mean * mean
}

fn raw_normal(n: usize, d1: &[Vector3<f64>; 2]) -> Vector3<f64> {
    if n == 1 {
        Vector3::new(-d1[0].y, d1[0].x, 0.0).normalize()
    } else {
        d1[0].cross(&d1[1]).normalize()
    }
}

/// First and second fundamental forms, ambient curvature traces and
/// quadrature weights at every node.
pub fn fundamental_forms(
    surface: &SurfaceGrid,
    ambient: &AmbientSpec,
    orientation: Orientation,
) -> Result<HypersurfaceData, GeomError> {
    let n = surface.n();
    if ambient.dim() != n + 1 {
        return Err(GeomError::Dimension(format!(
            "surface of dimension {n} in ambient of dimension {}",
            ambient.dim()
        )));
    }
    let layout = surface.layout().clone();
    let frames = surface.frames();
    let raw: Vec<Vector3<f64>> = frames.iter().map(|f| raw_normal(n, &f.d1)).collect();
    for (a, b) in layout.neighbour_pairs() {
        if raw[a].dot(&raw[b]) <= 0.0 {
            return Err(GeomError::NonOrientable { a, b });
        }
    }
    let weights = layout.weights();
    let sign = match orientation {
        Orientation::AsParametrized => 1.0,
        Orientation::Inward | Orientation::Outward => {
            let enclosed: f64 = frames
                .iter()
                .zip(&raw)
                .zip(&weights)
                .map(|((f, nr), w)| {
                    let jac = if n == 1 {
                        f.d1[0].norm()
                    } else {
                        f.d1[0].cross(&f.d1[1]).norm()
                    };
                    f.pos.dot(nr) * jac * w
                })
                .sum();
            let inward = if enclosed > 0.0 { -1.0 } else { 1.0 };
            if orientation == Orientation::Inward {
                inward
            } else {
                -inward
            }
        }
    };

    let nodes = (0..surface.len())
        .into_par_iter()
        .map(|k| {
            let f = &frames[k];
            let normal = raw[k] * sign;
            let jet = ambient.conformal_jet(&f.pos)?;
            let e2s = (2.0 * jet.sigma).exp();
            let es = jet.sigma.exp();
            let dsig_n = jet.grad.dot(&normal);
            let ge = DMatrix::from_fn(n, n, |i, j| f.d1[i].dot(&f.d1[j]));
            let le = DMatrix::from_fn(n, n, |i, j| f.d2[i + j].dot(&normal));
            let h = &ge * e2s;
            let l = (&le - &ge * dsig_n) * es;
            let h_inv = h.clone().try_inverse().ok_or(GeomError::RankDeficient {
                node: k,
                params: layout.params(k),
            })?;
            let s = &h_inv * &l;
            let mean = s.trace();
            let l_norm2 = (&s * &s).trace();
            let nf = n as f64;
            let amb = ambient.curvature_at(&jet, &normal);
            let normal_curvature = match ambient.constant_curvature() {
                Some(c) => &h * c,
                None => {
                    let t = schouten_like(&jet, ambient.dim());
                    let t_nn = normal.dot(&(t * normal));
                    DMatrix::from_fn(n, n, |i, j| -(t_nn * ge[(i, j)] + f.d1[i].dot(&(t * f.d1[j]))))
                }
            };
            let mut dmetric = [[0.0; 3]; 2];
            for (kk, row) in dmetric.iter_mut().enumerate().take(n) {
                let dsk = 2.0 * jet.grad.dot(&f.d1[kk]);
                for i in 0..n {
                    for j in i..n {
                        row[i + j] = e2s * (dsk * ge[(i, j)] + f.d2[i + kk].dot(&f.d1[j]) + f.d1[i].dot(&f.d2[j + kk]));
                    }
                }
            }
            let christoffel = christoffel_symbols(n, &h_inv, &dmetric);
            Ok(NodeGeometry {
                area: h.determinant().sqrt() * weights[k],
                scalar: gauss_scalar(amb.tangential_double_trace, l_norm2, mean),
                tracefree_norm2: l_norm2 - mean * mean / nf,
                h,
                h_inv,
                l,
                mean,
                l_norm2,
                ambient: amb,
                normal_curvature,
                normal,
                sigma: jet.sigma,
                dmetric,
                christoffel,
            })
        })
        .collect::<Result<Vec<_>, GeomError>>()?;
    Ok(HypersurfaceData {
        n,
        nodes,
        layout: Some(layout),
    })
}

pub(crate) fn christoffel_symbols(n: usize, h_inv: &DMatrix<f64>, dh: &[[f64; 3]; 2]) -> [[f64; 3]; 2] {
    // dh[k][i + j] = ∂_k h_ij
    let mut gamma = [[0.0; 3]; 2];
    for m in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += h_inv[(m, l)] * (dh[i][j + l] + dh[j][i + l] - dh[l][i + j]);
                }
                gamma[m][i + j] = 0.5 * acc;
            }
        }
    }
    gamma
}

/// Intrinsic scalar curvature from the Gauss equation,
/// `R = h^{ij}h^{kl}R̄_{ikjl} − |L|² + H²`.
pub fn intrinsic_scalar(data: &HypersurfaceData, ambient: &AmbientSpec) -> Vec<f64> {
    let nf = data.n as f64;
    data.nodes
        .iter()
        .map(|g| {
            let dbl = match ambient.constant_curvature() {
                Some(c) => c * nf * (nf - 1.0),
                None => g.ambient.tangential_double_trace,
            };
            gauss_scalar(dbl, g.l_norm2, g.mean)
        })
        .collect()
}

/// `∫ field dA` with the node quadrature weights, summed in node order.
pub fn surface_integrate(field: &[f64], data: &HypersurfaceData) -> f64 {
    assert_eq!(field.len(), data.nodes.len(), "field length must match node count");
    field.iter().zip(&data.nodes).fold(0.0, |acc, (f, g)| acc + f * g.area)
}

fn require_layout(data: &HypersurfaceData) -> Result<&GridLayout, GeomError> {
    data.layout
        .as_ref()
        .ok_or_else(|| GeomError::Unsupported("tangential derivatives need a grid".into()))
}

/// Laplace–Beltrami operator `h^{ij}(∂_i∂_j f − Γ^k_ij ∂_k f)` with
/// fourth-order differences of `field`.
pub fn tangential_laplacian(field: &[f64], data: &HypersurfaceData) -> Result<Vec<f64>, GeomError> {
    let layout = require_layout(data)?;
    let n = data.n;
    let parts = layout.partials(field, Parity::Even);
    Ok(data
        .nodes
        .iter()
        .zip(&parts)
        .map(|(g, p)| laplacian_from_partials(n, &g.h_inv, &g.christoffel, p))
        .collect())
}

pub(crate) fn laplacian_from_partials(n: usize, h_inv: &DMatrix<f64>, gamma: &[[f64; 3]; 2], p: &[f64; 5]) -> f64 {
    let first = [p[0], p[1]];
    let second = [p[2], p[3], p[4]];
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut t = second[i + j];
            for k in 0..n {
                t -= gamma[k][i + j] * first[k];
            }
            acc += h_inv[(i, j)] * t;
        }
    }
    acc
}

/// `|∇f|²_h = h^{ij} ∂_i f ∂_j f`.
pub fn tangential_gradient_norm2(field: &[f64], data: &HypersurfaceData) -> Result<Vec<f64>, GeomError> {
    let layout = require_layout(data)?;
    let n = data.n;
    Ok(data
        .nodes
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let p = layout.partials_at(field, k, Parity::Even);
            let d = [p[0], p[1]];
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += g.h_inv[(i, j)] * d[i] * d[j];
                }
            }
            acc
        })
        .collect())
}

/// Euler characteristic from Gauss–Bonnet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerCharacteristic {
    pub chi: i64,
    /// `∫R dA / (4π)` before rounding.
    pub raw: f64,
    /// `|raw − chi|`.
    pub residual: f64,
}

pub fn euler_characteristic(data: &HypersurfaceData) -> Result<EulerCharacteristic, GeomError> {
    if data.n != 2 {
        return Err(GeomError::Unsupported("Euler characteristic needs n = 2".into()));
    }
    let raw = surface_integrate(&data.field(|g| g.scalar), data) / (4.0 * PI);
    let chi = raw.round();
    let residual = (raw - chi).abs();
    if residual > 0.01 {
        return Err(GeomError::UnderResolved { residual });
    }
    Ok(EulerCharacteristic {
        chi: chi as i64,
        raw,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::presets;

    #[test]
    fn sphere_volumes() {
        assert!((sphere_volume(1, 1.0) - 2.0 * PI).abs() < 1e-15);
        assert!((sphere_volume(2, 2.0) - 16.0 * PI).abs() < 1e-13);
        assert!((sphere_volume(3, 1.0) - 2.0 * PI * PI).abs() < 1e-14);
        assert!((sphere_volume(4, 1.0) - 8.0 * PI * PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn homogeneous_sphere_matches_round_sphere() {
        let d = HypersurfaceData::homogeneous_sphere(3, 0.0, 1.0).unwrap();
        let g = &d.nodes()[0];
        assert_eq!(g.mean, 3.0);
        assert!((g.scalar - 6.0).abs() < 1e-15);
        let eq = HypersurfaceData::homogeneous_sphere(2, 1.0, PI / 2.0).unwrap();
        assert!(eq.nodes()[0].mean.abs() < 1e-15);
        assert!((eq.nodes()[0].scalar - 2.0).abs() < 1e-15);
        assert!(HypersurfaceData::homogeneous_sphere(2, 1.0, 4.0).is_err());
    }

    #[test]
    fn unit_sphere_forms() {
        let amb = AmbientSpec::Euclidean { dim: 3 };
        let s = presets::sphere(&amb, 1.0, 64, 32).unwrap();
        let d = fundamental_forms(&s, &amb, Orientation::Inward).unwrap();
        for g in d.nodes() {
            assert!((g.mean - 2.0).abs() < 1e-13);
            assert!(g.tracefree_norm2.abs() < 1e-12);
            assert!((g.scalar - 2.0).abs() < 1e-12);
            assert!((&g.l - &g.h).norm() < 1e-13);
        }
        let area = surface_integrate(&vec![1.0; d.len()], &d);
        assert!((area - 4.0 * PI).abs() < 1e-10, "{area}");
        let out = fundamental_forms(&s, &amb, Orientation::Outward).unwrap();
        assert!((out.nodes()[0].mean + 2.0).abs() < 1e-13);
    }

    #[test]
    fn circle_mean_curvature() {
        let amb = AmbientSpec::Euclidean { dim: 2 };
        for a in [0.5, 1.0, 2.0] {
            let c = presets::circle(&amb, a, 32).unwrap();
            let d = fundamental_forms(&c, &amb, Orientation::Inward).unwrap();
            for g in d.nodes() {
                assert!((g.mean - 1.0 / a).abs() < 1e-13);
                assert!(g.scalar.abs() < 1e-13);
            }
            let length = surface_integrate(&vec![1.0; d.len()], &d);
            assert!((length - 2.0 * PI * a).abs() < 1e-12);
        }
    }

    #[test]
    fn torus_principal_curvatures() {
        let amb = AmbientSpec::Euclidean { dim: 3 };
        let s = presets::torus(&amb, 2.0, 1.0, 64, 64).unwrap();
        let d = fundamental_forms(&s, &amb, Orientation::Inward).unwrap();
        for (k, g) in d.nodes().iter().enumerate() {
            let v = s.params(k)[1];
            let exact = 1.0 + v.cos() / (2.0 + v.cos());
            assert!((g.mean - exact).abs() < 1e-13);
        }
        let area = surface_integrate(&vec![1.0; d.len()], &d);
        assert!((area - 8.0 * PI * PI).abs() < 1e-10);
        let odd: Vec<f64> = (0..d.len()).map(|k| s.params(k)[0].sin()).collect();
        assert!(surface_integrate(&odd, &d).abs() < 1e-12);
    }

    #[test]
    fn space_form_equator_is_totally_geodesic() {
        // the unit sphere in the stereographic chart of S³ is a great sphere
        let amb = AmbientSpec::SpaceForm { dim: 3, curvature: 1.0 };
        let s = presets::sphere(&amb, 2.0, 32, 16).unwrap();
        let d = fundamental_forms(&s, &amb, Orientation::Inward).unwrap();
        for g in d.nodes() {
            assert!(g.mean.abs() < 1e-13);
            assert!((g.scalar - 2.0).abs() < 1e-13);
        }
        let r = intrinsic_scalar(&d, &amb);
        assert!(r.iter().all(|x| (x - 2.0).abs() < 1e-13));
    }

    #[test]
    fn zero_curvature_space_form_equals_euclidean() {
        let e = AmbientSpec::Euclidean { dim: 3 };
        let z = AmbientSpec::SpaceForm { dim: 3, curvature: 0.0 };
        let se = presets::ellipsoid(&e, [1.0, 1.3, 0.7], 32, 16).unwrap();
        let sz = presets::ellipsoid(&z, [1.0, 1.3, 0.7], 32, 16).unwrap();
        let de = fundamental_forms(&se, &e, Orientation::Inward).unwrap();
        let dz = fundamental_forms(&sz, &z, Orientation::Inward).unwrap();
        assert_eq!(de.nodes(), dz.nodes());
    }

    #[test]
    fn sphere_laplacian_of_height() {
        let amb = AmbientSpec::Euclidean { dim: 3 };
        let s = presets::sphere(&amb, 1.0, 64, 32).unwrap();
        let d = fundamental_forms(&s, &amb, Orientation::Inward).unwrap();
        let z: Vec<f64> = s.frames().iter().map(|f| f.pos.z).collect();
        let lap = tangential_laplacian(&z, &d).unwrap();
        let worst = lap.iter().zip(&z).map(|(l, z)| (l + 2.0 * z).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-5, "{worst}");
        let c = tangential_laplacian(&vec![3.0; d.len()], &d).unwrap();
        assert!(c.iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn torus_laplacian_of_sin_u() {
        let amb = AmbientSpec::Euclidean { dim: 3 };
        let s = presets::torus(&amb, 2.0, 1.0, 64, 64).unwrap();
        let d = fundamental_forms(&s, &amb, Orientation::Inward).unwrap();
        let f: Vec<f64> = (0..d.len()).map(|k| s.params(k)[0].sin()).collect();
        let lap = tangential_laplacian(&f, &d).unwrap();
        for (k, l) in lap.iter().enumerate() {
            let [u, v] = s.params(k);
            let exact = -u.sin() / (2.0 + v.cos()).powi(2);
            assert!((l - exact).abs() < 1e-5);
        }
    }

    #[test]
    fn gauss_bonnet() {
        let amb = AmbientSpec::Euclidean { dim: 3 };
        let cases = [
            (presets::sphere(&amb, 1.0, 64, 32).unwrap(), 2, 1e-8),
            (presets::torus(&amb, 2.0, 1.0, 64, 64).unwrap(), 0, 1e-8),
            (presets::ellipsoid(&amb, [1.0, 1.3, 0.7], 64, 32).unwrap(), 2, 1e-6),
        ];
        for (s, chi, tol) in cases {
            let d = fundamental_forms(&s, &amb, Orientation::Inward).unwrap();
            let e = euler_characteristic(&d).unwrap();
            assert_eq!(e.chi, chi);
            assert!(e.residual < tol, "{}", e.residual);
        }
    }
}
