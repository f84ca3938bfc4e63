//! Normal-exponential collars `ḡ = dr² + h_r` and their `r`-jets.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::{AmbientSpec, ConformalJet, GeomError, HypersurfaceData, SurfaceGrid};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum CollarError {
    #[error("geodesic from node {node} left the ambient domain: {message}")]
    Domain { node: usize, message: String },
    #[error("jet fit at node {node} is ill-conditioned (Richardson disagreement {residual:.3e})")]
    Conditioning { node: usize, residual: f64 },
    #[error("collar order {requested} not supported (allowed {min}..={max})")]
    Order { requested: usize, min: usize, max: usize },
    #[error("collar data mismatch: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Whether the jets come from a closed formula or from numerical integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollarKind {
    Exact,
    Numeric,
}

impl CollarKind {
    /// Tolerance class for the first- and second-derivative identities.
    pub fn tolerance(self) -> f64 {
        match self {
            CollarKind::Exact => 1e-13,
            CollarKind::Numeric => 1e-9,
        }
    }
}

/// Collar jets at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct CollarNode {
    /// `∂_r^m h_r |_{r=0}` for `m = 0..=order`.
    pub h: Vec<DMatrix<f64>>,
    /// `∂_r^m R̄ |_{r=0}` along the normal geodesic, `m = 0..n`.
    pub rbar: Vec<f64>,
    /// `h^{ij} R̄_{0i0j}` at `r = 0`.
    pub normal_trace: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollarJets {
    n: usize,
    order: usize,
    kind: CollarKind,
    nodes: Vec<CollarNode>,
}

impl CollarJets {
    pub fn new(n: usize, order: usize, kind: CollarKind, nodes: Vec<CollarNode>) -> Result<Self, CollarError> {
        for (k, node) in nodes.iter().enumerate() {
            if node.h.len() != order + 1 || node.h.iter().any(|m| m.nrows() != n || m.ncols() != n) {
                return Err(CollarError::Mismatch(format!(
                    "node {k}: expected {} jets of size {n}x{n}",
                    order + 1
                )));
            }
            if node.rbar.is_empty() {
                return Err(CollarError::Mismatch(format!(
                    "node {k}: missing ambient scalar curvature"
                )));
            }
            if node.h[0].clone().cholesky().is_none() {
                return Err(CollarError::Mismatch(format!("node {k}: h is not positive definite")));
            }
        }
        Ok(Self { n, order, kind, nodes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn kind(&self) -> CollarKind {
        self.kind
    }

    pub fn nodes(&self) -> &[CollarNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn to_record(&self) -> CollarRecord {
        CollarRecord {
            n: self.n,
            order: self.order,
            kind: self.kind,
            nodes: self
                .nodes
                .iter()
                .map(|c| CollarNodeRecord {
                    h: c.h
                        .iter()
                        .map(|m| m.row_iter().map(|r| r.iter().copied().collect()).collect())
                        .collect(),
                    rbar: c.rbar.clone(),
                    normal_trace: c.normal_trace,
                })
                .collect(),
        }
    }

    pub fn from_record(record: &CollarRecord) -> Result<Self, CollarError> {
        let n = record.n;
        let nodes = record
            .nodes
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let h =
                    c.h.iter()
                        .map(|rows| {
                            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                                return Err(CollarError::Mismatch(format!("node {k}: jet is not {n}x{n}")));
                            }
                            Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                Ok(CollarNode {
                    h,
                    rbar: c.rbar.clone(),
                    normal_trace: c.normal_trace,
                })
            })
            .collect::<Result<Vec<_>, CollarError>>()?;
        Self::new(n, record.order, record.kind, nodes)
    }
}

/// Serializable form of [`CollarJets`] for import and export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollarRecord {
    pub n: usize,
    pub order: usize,
    pub kind: CollarKind,
    pub nodes: Vec<CollarNodeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollarNodeRecord {
    /// `h[m][i][j]`.
    pub h: Vec<Vec<Vec<f64>>>,
    pub rbar: Vec<f64>,
    pub normal_trace: f64,
}

fn check_order(order: usize, max: usize) -> Result<(), CollarError> {
    if !(2..=max).contains(&order) {
        return Err(CollarError::Order {
            requested: order,
            min: 2,
            max,
        });
    }
    Ok(())
}

fn rbar_jets(n: usize, value: f64) -> Vec<f64> {
    let mut v = vec![0.0; n.max(1)];
    v[0] = value;
    v
}

/// Collar of a hypersurface in Euclidean space. The normal map `X + rν`
/// pulls back to `h − 2rL + r² L h⁻¹ L` exactly, so jets above order two vanish.
pub fn euclidean_collar(data: &HypersurfaceData, order: usize) -> Result<CollarJets, CollarError> {
    check_order(order, usize::MAX)?;
    let n = data.n();
    let nodes = data
        .nodes()
        .iter()
        .map(|g| {
            let mut h = vec![DMatrix::zeros(n, n); order + 1];
            h[0] = g.h.clone();
            h[1] = &g.l * -2.0;
            h[2] = &g.l * &g.h_inv * &g.l * 2.0;
            CollarNode {
                h,
                rbar: rbar_jets(n, 0.0),
                normal_trace: 0.0,
            }
        })
        .collect();
    CollarJets::new(n, order, CollarKind::Exact, nodes)
}

/// Taylor coefficients of `cos(√c r)` and `sin(√c r)/√c` through `r^order`.
fn trig_series(c: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut cs = vec![0.0; order + 1];
    let mut sn = vec![0.0; order + 1];
    let mut fact = 1.0;
    let mut pow = 1.0;
    for m in 0..=order {
        if m > 0 {
            fact *= m as f64;
        }
        if m % 2 == 0 {
            cs[m] = pow / fact;
        } else {
            sn[m] = pow / fact;
            pow *= -c;
        }
    }
    (cs, sn)
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for i in 0..a.len() {
        for j in 0..a.len() - i {
            out[i + j] += a[i] * b[j];
        }
    }
    out
}

/// Tube-formula collar in a space form of curvature `c`:
/// `h_r = h((C − S·A)·, (C − S·A)·)` with `A = h⁻¹L`.
pub fn spaceform_collar(data: &HypersurfaceData, c: f64, order: usize) -> Result<CollarJets, CollarError> {
    check_order(order, usize::MAX)?;
    let n = data.n();
    let nf = n as f64;
    let (cs, sn) = trig_series(c, order);
    let cc = convolve(&cs, &cs);
    let csn = convolve(&cs, &sn);
    let ss = convolve(&sn, &sn);
    let nodes = data
        .nodes()
        .iter()
        .map(|g| {
            let llh = &g.l * &g.h_inv * &g.l;
            let mut fact = 1.0;
            let h = (0..=order)
                .map(|m| {
                    if m > 0 {
                        fact *= m as f64;
                    }
                    (&g.h * cc[m] - &g.l * (2.0 * csn[m]) + &llh * ss[m]) * fact
                })
                .collect();
            CollarNode {
                h,
                rbar: rbar_jets(n, nf * (nf + 1.0) * c),
                normal_trace: nf * c,
            }
        })
        .collect();
    CollarJets::new(n, order, CollarKind::Exact, nodes)
}

/// Options for [`numeric_collar`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericCollarOptions {
    /// Stencil spacing in `r`; `None` picks `1e−2 ×` the smallest curvature radius.
    pub delta: Option<f64>,
    /// Relative tolerance of the step-doubling control of the integrator.
    pub ode_tol: f64,
}

impl Default for NumericCollarOptions {
    fn default() -> Self {
        Self {
            delta: None,
            ode_tol: 1e-13,
        }
    }
}

/// Geodesic state with its first variation across the hypersurface.
#[derive(Debug, Clone, Copy)]
struct State {
    p: Vector3<f64>,
    v: Vector3<f64>,
    j: [Vector3<f64>; 2],
    w: [Vector3<f64>; 2],
}

impl State {
    fn axpy(&self, s: f64, d: &State) -> State {
        State {
            p: self.p + d.p * s,
            v: self.v + d.v * s,
            j: [self.j[0] + d.j[0] * s, self.j[1] + d.j[1] * s],
            w: [self.w[0] + d.w[0] * s, self.w[1] + d.w[1] * s],
        }
    }

    fn distance(&self, o: &State) -> f64 {
        let mut d = (self.p - o.p).amax().max((self.v - o.v).amax());
        for i in 0..2 {
            d = d.max((self.j[i] - o.j[i]).amax()).max((self.w[i] - o.w[i]).amax());
        }
        d
    }
}

/// Geodesic acceleration in `e^{2σ}δ`.
fn accel(jet: &ConformalJet, v: &Vector3<f64>) -> Vector3<f64> {
    v * (-2.0 * jet.grad.dot(v)) + jet.grad * v.norm_squared()
}

struct Flow<'a> {
    ambient: &'a AmbientSpec,
    n: usize,
}

impl Flow<'_> {
    fn jet(&self, p: &Vector3<f64>) -> Result<ConformalJet, GeomError> {
        self.ambient.conformal_jet(p)
    }

    fn rhs(&self, s: &State) -> Result<State, GeomError> {
        let jet = self.jet(&s.p)?;
        let g = &jet.grad;
        let hs: &Matrix3<f64> = &jet.hess;
        let v = &s.v;
        let mut d = State {
            p: *v,
            v: accel(&jet, v),
            j: s.w,
            w: [Vector3::zeros(); 2],
        };
        for i in 0..self.n {
            let (ji, wi) = (&s.j[i], &s.w[i]);
            d.w[i] = v * (-2.0 * (hs * ji).dot(v)) - v * (2.0 * g.dot(wi)) - wi * (2.0 * g.dot(v))
                + g * (2.0 * v.dot(wi))
                + (hs * ji) * v.norm_squared();
        }
        Ok(d)
    }

    fn rk4(&self, s: &State, r: f64, steps: usize) -> Result<State, GeomError> {
        let dt = r / steps as f64;
        let mut y = *s;
        for _ in 0..steps {
            let k1 = self.rhs(&y)?;
            let k2 = self.rhs(&y.axpy(0.5 * dt, &k1))?;
            let k3 = self.rhs(&y.axpy(0.5 * dt, &k2))?;
            let k4 = self.rhs(&y.axpy(dt, &k3))?;
            y = y
                .axpy(dt / 6.0, &k1)
                .axpy(dt / 3.0, &k2)
                .axpy(dt / 3.0, &k3)
                .axpy(dt / 6.0, &k4);
        }
        Ok(y)
    }

    /// Integrate to `r`, doubling the step count until two successive
    /// results agree to `tol`.
    fn integrate(&self, s: &State, r: f64, tol: f64) -> Result<State, GeomError> {
        let mut steps = 4;
        let mut prev = self.rk4(s, r, steps)?;
        loop {
            steps *= 2;
            let next = self.rk4(s, r, steps)?;
            let scale = 1.0 + next.p.amax().max(next.v.amax());
            if next.distance(&prev) <= tol * scale || steps >= 1 << 14 {
                return Ok(next);
            }
            prev = next;
        }
    }

    /// `h_r`, `∂_r h_r`, `∂_r² h_r` and `R̄` from the state at parameter `r`.
    fn metric_jets(&self, s: &State) -> Result<([DMatrix<f64>; 3], f64), GeomError> {
        let n = self.n;
        let jet = self.jet(&s.p)?;
        let e2 = (2.0 * jet.sigma).exp();
        let a = accel(&jet, &s.v);
        let d = self.rhs(s)?;
        let e1 = 2.0 * jet.grad.dot(&s.v);
        let e2c = e1 * e1 + 2.0 * (s.v.dot(&(jet.hess * s.v)) + jet.grad.dot(&a));
        let h0 = DMatrix::from_fn(n, n, |i, j| e2 * s.j[i].dot(&s.j[j]));
        let cross = DMatrix::from_fn(n, n, |i, j| s.w[i].dot(&s.j[j]) + s.j[i].dot(&s.w[j]));
        let h1 = &h0 * e1 + &cross * e2;
        let h2 = DMatrix::from_fn(n, n, |i, j| {
            e2 * (e2c * s.j[i].dot(&s.j[j])
                + 2.0 * e1 * cross[(i, j)]
                + d.w[i].dot(&s.j[j])
                + 2.0 * s.w[i].dot(&s.w[j])
                + s.j[i].dot(&d.w[j]))
        });
        Ok(([h0, h1, h2], self.ambient.scalar_curvature_at(&jet)))
    }
}

/// Collar of a hypersurface in a conformally flat chart obtained by
/// integrating normal geodesics together with their first variation.
///
/// Orders 0–2 come from the integrated state at `r = 0`; orders 3 and 4
/// and the normal derivative of `R̄` are Richardson-extrapolated central
/// differences over the stencil `r ∈ {±δ/2, ±δ}`.
pub fn numeric_collar(
    ambient: &AmbientSpec,
    surface: &SurfaceGrid,
    data: &HypersurfaceData,
    order: usize,
    options: NumericCollarOptions,
) -> Result<CollarJets, CollarError> {
    check_order(order, 4)?;
    let n = data.n();
    if surface.len() != data.len() || surface.n() != n {
        return Err(CollarError::Mismatch("surface and hypersurface data disagree".into()));
    }
    let delta = match options.delta {
        Some(d) => d,
        None => {
            let kmax = data.nodes().iter().map(|g| g.l_norm2.sqrt()).fold(0.0, f64::max);
            1e-2 / kmax.max(1.0)
        }
    };
    let flow = Flow { ambient, n };
    let nodes = (0..data.len())
        .into_par_iter()
        .map(|k| {
            let domain = |e: GeomError| CollarError::Domain {
                node: k,
                message: e.to_string(),
            };
            let f = &surface.frames()[k];
            let g = &data.nodes()[k];
            let jet0 = flow.jet(&f.pos).map_err(domain)?;
            let nrm = g.normal;
            let es = (-jet0.sigma).exp();
            let ge = DMatrix::from_fn(n, n, |i, j| f.d1[i].dot(&f.d1[j]));
            let ge_inv = ge
                .try_inverse()
                .ok_or(CollarError::Mismatch(format!("node {k}: degenerate frame")))?;
            let le = DMatrix::from_fn(n, n, |i, j| f.d2[i + j].dot(&nrm));
            let shape = &ge_inv * &le;
            let mut start = State {
                p: f.pos,
                v: nrm * es,
                j: [f.d1[0], f.d1[1]],
                w: [Vector3::zeros(); 2],
            };
            for i in 0..n {
                let mut dn = Vector3::zeros();
                for m in 0..n {
                    dn -= f.d1[m] * shape[(m, i)];
                }
                start.w[i] = (dn - nrm * jet0.grad.dot(&f.d1[i])) * es;
            }
            if n == 1 {
                start.j[1] = Vector3::zeros();
            }
            let ([h0, h1, h2], rb0) = flow.metric_jets(&start).map_err(domain)?;
            let mut samples = Vec::with_capacity(4);
            for r in [0.5 * delta, delta, -0.5 * delta, -delta] {
                let s = flow.integrate(&start, r, options.ode_tol).map_err(domain)?;
                samples.push(flow.metric_jets(&s).map_err(domain)?);
            }
            let (hp1, rp1) = (&samples[0].0[2], samples[0].1);
            let (hp2, rp2) = (&samples[1].0[2], samples[1].1);
            let (hm1, rm1) = (&samples[2].0[2], samples[2].1);
            let (hm2, rm2) = (&samples[3].0[2], samples[3].1);
            let half = 0.5 * delta;
            let d3_fine = (hp1 - hm1) / (2.0 * half);
            let d3_coarse = (hp2 - hm2) / (2.0 * delta);
            let h3 = (&d3_fine * 4.0 - &d3_coarse) / 3.0;
            let d4_fine = (hp1 - &h2 * 2.0 + hm1) / (half * half);
            let d4_coarse = (hp2 - &h2 * 2.0 + hm2) / (delta * delta);
            let h4 = (&d4_fine * 4.0 - &d4_coarse) / 3.0;
            let scale = 1.0 + h2.amax();
            let disagreement = (&d3_fine - &d3_coarse).amax() / scale;
            if !disagreement.is_finite() || disagreement > 1e-2 {
                return Err(CollarError::Conditioning {
                    node: k,
                    residual: disagreement,
                });
            }
            let r1 = (4.0 * (rp1 - rm1) / (2.0 * half) - (rp2 - rm2) / (2.0 * delta)) / 3.0;
            let r2 = (4.0 * (rp1 - 2.0 * rb0 + rm1) / (half * half) - (rp2 - 2.0 * rb0 + rm2) / (delta * delta)) / 3.0;
            let mut h = vec![h0, h1, h2, h3, h4];
            h.truncate(order + 1);
            let mut rbar = vec![rb0, r1, r2];
            rbar.truncate(n.max(1));
            Ok(CollarNode {
                h,
                rbar,
                normal_trace: g.ambient.normal_trace,
            })
        })
        .collect::<Result<Vec<_>, CollarError>>()?;
    CollarJets::new(n, order, CollarKind::Numeric, nodes)
}

/// Residuals of `h′ = −2L` and `h″ = −2R̄_{0i0j} + 2L h⁻¹ L` at `r = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub first_order: f64,
    pub second_order: f64,
    pub worst_node: usize,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn collar_consistency_check(
    jets: &CollarJets,
    data: &HypersurfaceData,
    ambient: &AmbientSpec,
) -> ConsistencyReport {
    let mut first: f64 = 0.0;
    let mut second: f64 = 0.0;
    let mut worst_node = 0;
    let mut worst = -1.0;
    for (k, (c, g)) in jets.nodes().iter().zip(data.nodes()).enumerate() {
        let scale = 1.0 + g.l.amax() + g.h.amax();
        let r1 = (&c.h[1] + &g.l * 2.0).amax() / scale;
        let rbar0i0j = match ambient.constant_curvature() {
            Some(cv) => &g.h * cv,
            None => g.normal_curvature.clone(),
        };
        let expected = &rbar0i0j * -2.0 + &g.l * &g.h_inv * &g.l * 2.0;
        let r2 = (&c.h[2] - expected).amax() / (scale * scale);
        first = first.max(r1);
        second = second.max(r2);
        if r1.max(r2) > worst {
            worst = r1.max(r2);
            worst_node = k;
        }
    }
    let tolerance = jets.kind().tolerance();
    ConsistencyReport {
        first_order: first,
        second_order: second,
        worst_node,
        tolerance,
        pass: first <= tolerance && second <= tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::geom::{fundamental_forms, presets, Orientation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn euclid() -> AmbientSpec {
        AmbientSpec::Euclidean { dim: 3 }
    }

    #[test]
    fn unit_sphere_euclidean_collar() {
        let amb = euclid();
        let s = presets::sphere(&amb, 1.0, 32, 16).unwrap();
        let d = fundamental_forms(&s, &amb, Orientation::Inward).unwrap();
        let c = euclidean_collar(&d, 4).unwrap();
        for (node, g) in c.nodes().iter().zip(d.nodes()) {
            assert!((&node.h[1] + &g.h * 2.0).amax() < 1e-13);
            assert!((&node.h[2] - &g.h * 2.0).amax() < 1e-13);
            assert!(node.h[3].amax() == 0.0 && node.h[4].amax() == 0.0);
        }
        assert!(collar_consistency_check(&c, &d, &amb).pass);
    }

    #[test]
    fn circle_collar() {
        let amb = AmbientSpec::Euclidean { dim: 2 };
        let a = 2.0;
        let s = presets::circle(&amb, a, 32).unwrap();
        let d = fundamental_forms(&s, &amb, Orientation::Inward).unwrap();
        let c = euclidean_collar(&d, 3).unwrap();
        for (node, g) in c.nodes().iter().zip(d.nodes()) {
            let h0 = g.h[(0, 0)];
            assert!((node.h[1][(0, 0)] + 2.0 * h0 / a).abs() < 1e-13);
            assert!((node.h[2][(0, 0)] - 2.0 * h0 / (a * a)).abs() < 1e-13);
        }
    }

    #[test]
    fn spaceform_equator_and_zero_curvature() {
        let amb = AmbientSpec::SpaceForm { dim: 3, curvature: 1.0 };
        let s = presets::sphere(&amb, 2.0, 32, 16).unwrap();
        let d = fundamental_forms(&s, &amb, Orientation::Inward).unwrap();
        let c = spaceform_collar(&d, 1.0, 4).unwrap();
        for (node, g) in c.nodes().iter().zip(d.nodes()) {
            assert!(node.h[1].amax() < 1e-13);
            assert!((&node.h[2] + &g.h * 2.0).amax() < 1e-13);
        }
        let report = collar_consistency_check(&c, &d, &amb);
        assert!(report.pass, "{report:?}");

        let e = euclid();
        let t = presets::torus(&e, 2.0, 1.0, 32, 32).unwrap();
        let dt = fundamental_forms(&t, &e, Orientation::Inward).unwrap();
        let a = euclidean_collar(&dt, 4).unwrap();
        let b = spaceform_collar(&dt, 0.0, 4).unwrap();
        assert_eq!(a.nodes(), b.nodes());
        assert!(collar_consistency_check(&a, &dt, &e).pass);
    }

    #[test]
    fn geodesic_sphere_in_s3_matches_analytic_jets() {
        // h_r = sin²(ρ − r)/sin²ρ · h₀
        let rho = 0.9_f64;
        let d = HypersurfaceData::homogeneous_sphere(2, 1.0, rho).unwrap();
        let c = spaceform_collar(&d, 1.0, 4).unwrap();
        let f = |r: f64| ((rho - r).sin() / rho.sin()).powi(2);
        // derivatives of sin²(ρ−r) = (1 − cos(2ρ − 2r))/2
        let s2 = rho.sin().powi(2);
        let exact = [
            1.0,
            -(2.0 * rho).sin() / s2,
            2.0 * (2.0 * rho).cos() / s2,
            4.0 * (2.0 * rho).sin() / s2,
            -8.0 * (2.0 * rho).cos() / s2,
        ];
        assert!((f(0.0) - 1.0).abs() < 1e-15);
        for (m, e) in exact.iter().enumerate() {
            assert!((c.nodes()[0].h[m][(0, 0)] - e).abs() < 1e-13, "order {m}");
        }
    }

    #[test]
    fn spaceform_jets_satisfy_identities_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.random_range(1..=4);
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let h = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
            let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let l = (&b + b.transpose()) * 0.5;
            let c = rng.random_range(-2.0..2.0);
            let (cs, sn) = trig_series(c, 2);
            let cc = convolve(&cs, &cs);
            let csn = convolve(&cs, &sn);
            let ss = convolve(&sn, &sn);
            let h_inv = h.clone().try_inverse().unwrap();
            let llh = &l * &h_inv * &l;
            let h1 = (&h * cc[1] - &l * (2.0 * csn[1]) + &llh * ss[1]) * 1.0;
            let h2 = (&h * cc[2] - &l * (2.0 * csn[2]) + &llh * ss[2]) * 2.0;
            assert!((&h1 + &l * 2.0).amax() < 1e-14);
            assert!((&h2 - (&h * (-2.0 * c) + &llh * 2.0)).amax() < 1e-13);
        }
    }

    #[test]
    fn numeric_collar_flat_matches_euclidean() {
        let amb = AmbientSpec::ConformalFlat {
            dim: 3,
            omega: parse_expr("0*x", &["x", "y", "z"]).unwrap(),
        };
        let s = presets::sphere(&amb, 1.0, 16, 16).unwrap();
        let d = fundamental_forms(&s, &amb, Orientation::Inward).unwrap();
        let num = numeric_collar(&amb, &s, &d, 4, NumericCollarOptions::default()).unwrap();
        let ex = euclidean_collar(&d, 4).unwrap();
        for (a, b) in num.nodes().iter().zip(ex.nodes()) {
            for m in 0..=4 {
                assert!(
                    (&a.h[m] - &b.h[m]).amax() < 1e-9,
                    "order {m}: {}",
                    (&a.h[m] - &b.h[m]).amax()
                );
            }
        }
    }

    #[test]
    fn numeric_collar_constant_factor_scales() {
        let k = 0.3_f64;
        let amb = AmbientSpec::ConformalFlat {
            dim: 3,
            omega: parse_expr("0.3 + 0*x", &["x", "y", "z"]).unwrap(),
        };
        let s = presets::ellipsoid(&amb, [1.0, 1.3, 0.7], 16, 16).unwrap();
        let d = fundamental_forms(&s, &amb, Orientation::Inward).unwrap();
        let e = euclid();
        let de = fundamental_forms(
            &presets::ellipsoid(&e, [1.0, 1.3, 0.7], 16, 16).unwrap(),
            &e,
            Orientation::Inward,
        )
        .unwrap();
        let num = numeric_collar(&amb, &s, &d, 3, NumericCollarOptions::default()).unwrap();
        for ((c, g), ge) in num.nodes().iter().zip(d.nodes()).zip(de.nodes()) {
            assert!((&c.h[0] - &ge.h * (2.0 * k).exp()).amax() < 1e-12);
            assert!((&c.h[1] + &ge.l * (2.0 * k.exp())).amax() < 1e-9);
            assert!((g.mean - (-k).exp() * ge.mean).abs() < 1e-12);
        }
    }

    #[test]
    fn numeric_collar_passes_identities_for_tilted_factor() {
        let amb = AmbientSpec::ConformalFlat {
            dim: 3,
            omega: parse_expr("0.05*z", &["x", "y", "z"]).unwrap(),
        };
        let s = presets::sphere(&amb, 1.0, 16, 16).unwrap();
        let d = fundamental_forms(&s, &amb, Orientation::Inward).unwrap();
        let num = numeric_collar(&amb, &s, &d, 4, NumericCollarOptions::default()).unwrap();
        let report = collar_consistency_check(&num, &d, &amb);
        assert!(report.pass && report.second_order < 1e-7, "{report:?}");
    }

    #[test]
    fn numeric_collar_agrees_with_stereographic_space_form() {
        let flat = AmbientSpec::ConformalFlat {
            dim: 3,
            omega: parse_expr("-log(1+(x^2+y^2+z^2)/4)", &["x", "y", "z"]).unwrap(),
        };
        let sf = AmbientSpec::SpaceForm { dim: 3, curvature: 1.0 };
        let s = presets::ellipsoid(&flat, [0.8, 1.0, 0.6], 16, 16).unwrap();
        let d_flat = fundamental_forms(&s, &flat, Orientation::Inward).unwrap();
        let d_sf = fundamental_forms(&s, &sf, Orientation::Inward).unwrap();
        let num = numeric_collar(&flat, &s, &d_flat, 4, NumericCollarOptions::default()).unwrap();
        let exact = spaceform_collar(&d_sf, 1.0, 4).unwrap();
        let mut worst: f64 = 0.0;
        for (a, b) in num.nodes().iter().zip(exact.nodes()) {
            for m in 0..=4 {
                worst = worst.max((&a.h[m] - &b.h[m]).amax());
            }
            worst = worst.max((a.rbar[0] - b.rbar[0]).abs()).max(a.rbar[1].abs());
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn record_round_trip() {
        let amb = euclid();
        let s = presets::torus(&amb, 2.0, 1.0, 16, 16).unwrap();
        let d = fundamental_forms(&s, &amb, Orientation::Inward).unwrap();
        let c = euclidean_collar(&d, 3).unwrap();
        let json = serde_json::to_string(&c.to_record()).unwrap();
        let back: CollarRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(CollarJets::from_record(&back).unwrap(), c);
    }
}
