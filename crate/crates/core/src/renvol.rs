//! Volume-form coefficients, divergent coefficients and the energy.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::collar::CollarJets;
use crate::geom::{euler_characteristic, surface_integrate, AmbientSpec, GeomError, HypersurfaceData};
use crate::series::{sqrt_det_ratio, LogSeries, MatrixSeries, SeriesError};
use crate::yamabe::YamabeExpansion;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum RenvolError {
    #[error("volume form has a log term {value:.3e} at order {order} on node {node}")]
    LogSlot { node: usize, order: usize, value: f64 },
    #[error("v^(2) closed form needs n ≥ 2")]
    SecondOrderUndefined,
    #[error("operation needs n = 2, got n = {0}")]
    NeedsSurface(usize),
    #[error("{0}")]
    Mismatch(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// `v^(k)` per node together with `c_k` and the energy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeData {
    pub n: usize,
    /// `v[k][node]` for `k = 0..=n`.
    pub v: Vec<Vec<f64>>,
    /// `c_0, …, c_{n−1}`.
    pub c: Vec<f64>,
    pub energy: f64,
}

impl VolumeData {
    /// Recompute `c_k` and the energy from stored fields.
    pub fn recompute(&self, data: &HypersurfaceData) -> (Vec<f64>, f64) {
        let n = self.n;
        let c = (0..n)
            .map(|k| surface_integrate(&self.v[k], data) / (n - k) as f64)
            .collect();
        (c, surface_integrate(&self.v[n], data))
    }
}

/// Expand `(1 + rφ)^{−n−1} √(det h_r / det h_0)` at every node and integrate.
pub fn volume_coefficients(
    exp: &YamabeExpansion,
    jets: &CollarJets,
    data: &HypersurfaceData,
) -> Result<VolumeData, RenvolError> {
    let n = exp.n;
    if jets.len() != exp.nodes.len() || data.len() != exp.nodes.len() || jets.order() < n {
        return Err(RenvolError::Mismatch(format!(
            "expansion has {} nodes, collar {} (order {}), data {}",
            exp.nodes.len(),
            jets.len(),
            jets.order(),
            data.len()
        )));
    }
    let per_node = jets
        .nodes()
        .par_iter()
        .enumerate()
        .map(|(node, c)| {
            let phi = exp.phi_series(node);
            let base = LogSeries::constant(n, 1.0).try_add(&phi.shift(1))?;
            let factor = base.try_powf(-(n as f64) - 1.0)?;
            let ratio = sqrt_det_ratio(&MatrixSeries::from_derivatives(&c.h[..=n]))?;
            let form = factor.try_mul(&ratio)?;
            for k in 0..=n {
                if form.b(k) != 0.0 {
                    return Err(RenvolError::LogSlot {
                        node,
                        order: k,
                        value: form.b(k),
                    });
                }
            }
            Ok((0..=n).map(|k| form.a(k)).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>, RenvolError>>()?;
    let v: Vec<Vec<f64>> = (0..=n).map(|k| per_node.iter().map(|p| p[k]).collect()).collect();
    let mut out = VolumeData {
        n,
        v,
        c: Vec::new(),
        energy: 0.0,
    };
    let (c, energy) = out.recompute(data);
    out.c = c;
    out.energy = energy;
    Ok(out)
}

/// `v^(1) = (1−n)H/(2n)` and, for `n ≥ 2`,
/// `v^(2) = (n−5)/(12(n−1))·(R − |L̊|²) + (n−2)/(24n²)·((n−3)H² − 2nR̄)`.
pub fn closed_form_v12(data: &HypersurfaceData, ambient: &AmbientSpec) -> Result<Vec<(f64, f64)>, RenvolError> {
    let n = data.n();
    if n < 2 {
        return Err(RenvolError::SecondOrderUndefined);
    }
    let nf = n as f64;
    Ok(data
        .nodes()
        .iter()
        .map(|g| {
            let rbar = match ambient.constant_curvature() {
                Some(c) => nf * (nf + 1.0) * c,
                None => g.ambient.scalar,
            };
            let v1 = (1.0 - nf) * g.mean / (2.0 * nf);
            let v2 = (nf - 5.0) / (12.0 * (nf - 1.0)) * (g.scalar - g.tracefree_norm2)
                + (nf - 2.0) / (24.0 * nf * nf) * ((nf - 3.0) * g.mean * g.mean - 2.0 * nf * rbar);
            (v1, v2)
        })
        .collect())
}

/// `v^(1)` alone, defined for every `n`.
pub fn closed_form_v1(data: &HypersurfaceData) -> Vec<f64> {
    let nf = data.n() as f64;
    data.field(|g| (1.0 - nf) * g.mean / (2.0 * nf))
}

/// Energy of a surface split into its Willmore and topological parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergySplit {
    /// `¼∫(|L̊|² − R)`.
    pub energy: f64,
    /// `¼∫|L̊|²`.
    pub willmore: f64,
    /// `−πχ`.
    pub topological: f64,
    pub chi: i64,
    /// `|energy − willmore − topological|`.
    pub residual: f64,
}

pub fn energy_n2_split(data: &HypersurfaceData) -> Result<EnergySplit, RenvolError> {
    if data.n() != 2 {
        return Err(RenvolError::NeedsSurface(data.n()));
    }
    let energy = 0.25 * surface_integrate(&data.field(|g| g.tracefree_norm2 - g.scalar), data);
    let willmore = 0.25 * surface_integrate(&data.field(|g| g.tracefree_norm2), data);
    let chi = if data.is_homogeneous() {
        let raw = surface_integrate(&data.field(|g| g.scalar), data) / (4.0 * PI);
        raw.round() as i64
    } else {
        euler_characteristic(data)?.chi
    };
    let topological = -PI * chi as f64;
    Ok(EnergySplit {
        energy,
        willmore,
        topological,
        chi,
        residual: (energy - willmore - topological).abs(),
    })
}

/// Comparison with the energy of the renormalized minimal-area problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimalAreaComparison {
    /// `−⅛∫(H² + 4h^{ij}P̄_ij)`.
    pub energy_min_area: f64,
    /// Largest `|H² + 4h^{ij}P̄_ij − 2(|L̊|² + R)|` over nodes.
    pub pointwise_residual: f64,
    /// `|energy_min_area + energy + 2πχ|`.
    pub global_residual: f64,
    pub chi: i64,
}

/// `H² + 4h^{ij}P̄_ij` at every node.
pub fn min_area_density(data: &HypersurfaceData) -> Vec<f64> {
    data.field(|g| g.mean * g.mean + 4.0 * g.ambient.schouten_trace)
}

pub fn minimal_area_compare(data: &HypersurfaceData, energy: f64) -> Result<MinimalAreaComparison, RenvolError> {
    let split = energy_n2_split(data)?;
    let density = min_area_density(data);
    let pointwise_residual = density
        .iter()
        .zip(data.nodes())
        .map(|(d, g)| (d - 2.0 * (g.tracefree_norm2 + g.scalar)).abs())
        .fold(0.0, f64::max);
    let energy_min_area = -0.125 * surface_integrate(&density, data);
    let global_residual = (energy_min_area + energy + 2.0 * PI * split.chi as f64).abs();
    Ok(MinimalAreaComparison {
        energy_min_area,
        pointwise_residual,
        global_residual,
        chi: split.chi,
    })
}

/// Energy `π² t² / (2√(t² − 1))` of the round torus with radius ratio `t = R/a > 1`.
pub fn torus_energy(ratio: f64) -> f64 {
    PI * PI * ratio * ratio / (2.0 * (ratio * ratio - 1.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collar::{euclidean_collar, spaceform_collar};
    use crate::geom::{fundamental_forms, presets, Orientation};
    use crate::yamabe::{solve_yamabe, SolveMode};

    fn homogeneous(n: usize, c: f64, rho: f64) -> (HypersurfaceData, VolumeData) {
        let d = HypersurfaceData::homogeneous_sphere(n, c, rho).unwrap();
        let j = spaceform_collar(&d, c, n + 1).unwrap();
        let e = solve_yamabe(&j, &d, SolveMode::Homogeneous).unwrap();
        let v = volume_coefficients(&e, &j, &d).unwrap();
        (d, v)
    }

    #[test]
    fn unit_sphere_coefficients() {
        let (_, v) = homogeneous(2, 0.0, 1.0);
        assert_eq!(v.v[0][0], 1.0);
        assert!((v.v[1][0] + 0.5).abs() < 1e-14);
        assert!((v.v[2][0] + 0.5).abs() < 1e-14);
        assert!((v.energy + 2.0 * PI).abs() < 1e-13);
        assert!((v.c[0] - 2.0 * PI).abs() < 1e-13);
        assert!((v.c[1] + 2.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn circle_and_equator() {
        for a in [0.5, 1.0, 2.0] {
            let (_, v) = homogeneous(1, 0.0, a);
            assert!(v.v[1][0].abs() < 1e-15);
            assert!(v.energy.abs() < 1e-15);
        }
        let (_, v) = homogeneous(2, 1.0, std::f64::consts::FRAC_PI_2);
        assert!(v.v[1][0].abs() < 1e-15);
        assert!((v.v[2][0] + 0.5).abs() < 1e-14);
        assert!((v.energy + 2.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn three_sphere_in_four_space() {
        let (d, v) = homogeneous(3, 0.0, 1.0);
        assert!((v.v[1][0] + 1.0).abs() < 1e-14);
        assert!((v.v[2][0] + 0.5).abs() < 1e-14);
        let cf = closed_form_v12(&d, &AmbientSpec::Euclidean { dim: 4 }).unwrap();
        assert!((cf[0].0 + 1.0).abs() < 1e-15 && (cf[0].1 + 0.5).abs() < 1e-15);
    }

    #[test]
    fn closed_forms_hold_for_homogeneous_spheres() {
        for n in 2..=6 {
            for &(c, rho) in &[(0.0, 1.3), (1.0, 0.9), (-1.0, 0.6)] {
                let (d, v) = homogeneous(n, c, rho);
                let amb = AmbientSpec::SpaceForm {
                    dim: n + 1,
                    curvature: c,
                };
                let (v1, v2) = closed_form_v12(&d, &amb).unwrap()[0];
                assert!((v.v[1][0] - v1).abs() < 1e-11, "n={n} c={c}");
                assert!((v.v[2][0] - v2).abs() < 1e-11, "n={n} c={c}");
            }
        }
        let d = HypersurfaceData::homogeneous_sphere(1, 0.0, 1.0).unwrap();
        assert_eq!(
            closed_form_v12(&d, &AmbientSpec::Euclidean { dim: 2 }),
            Err(RenvolError::SecondOrderUndefined)
        );
    }

    #[test]
    fn ellipsoid_energy_split_and_min_area() {
        let amb = AmbientSpec::Euclidean { dim: 3 };
        let s = presets::ellipsoid(&amb, [1.0, 1.3, 0.7], 64, 32).unwrap();
        let d = fundamental_forms(&s, &amb, Orientation::Inward).unwrap();
        let j = euclidean_collar(&d, 3).unwrap();
        let e = solve_yamabe(&j, &d, SolveMode::Grid).unwrap();
        let v = volume_coefficients(&e, &j, &d).unwrap();
        let split = energy_n2_split(&d).unwrap();
        assert_eq!(split.chi, 2);
        assert!((v.energy - split.energy).abs() < 1e-11);
        assert!((v.energy - (split.willmore - 2.0 * PI)).abs() < 1e-6);
        let m = minimal_area_compare(&d, v.energy).unwrap();
        assert!(m.pointwise_residual < 1e-10);
        assert!(m.global_residual < 1e-6);
        for (k, (v1, v2)) in closed_form_v12(&d, &amb).unwrap().into_iter().enumerate() {
            assert!((v.v[1][k] - v1).abs() < 1e-11);
            assert!((v.v[2][k] - v2).abs() < 1e-11);
        }
    }

    #[test]
    fn scale_covariance() {
        let lam: f64 = 1.7;
        let amb = AmbientSpec::Euclidean { dim: 3 };
        let run = |axes: [f64; 3]| {
            let s = presets::ellipsoid(&amb, axes, 32, 16).unwrap();
            let d = fundamental_forms(&s, &amb, Orientation::Inward).unwrap();
            let j = euclidean_collar(&d, 3).unwrap();
            let e = solve_yamabe(&j, &d, SolveMode::Grid).unwrap();
            let v = volume_coefficients(&e, &j, &d).unwrap();
            (d, v)
        };
        let (da, a) = run([1.0, 1.3, 0.7]);
        let (_, b) = run([lam, 1.3 * lam, 0.7 * lam]);
        for node in 0..a.v[0].len() {
            assert!((b.v[1][node] * lam - a.v[1][node]).abs() < 1e-10);
            assert!((b.v[2][node] * lam * lam - a.v[2][node]).abs() < 1e-10);
        }
        assert!((a.energy - b.energy).abs() < 1e-10);
        let (c, energy) = a.recompute(&da);
        assert_eq!(c, a.c);
        assert_eq!(energy, a.energy);
    }

    #[test]
    fn torus_energy_matches_profile_quadrature() {
        // ⅛∫(κ₁ − κ₂)² dA with κ₁ = 1/a, κ₂ = cos v / (R + a cos v), a = 1
        for t in [1.1, 1.5, 2.0, 3.0] {
            let m = 4000;
            let mut acc = 0.0;
            for k in 0..m {
                let v = 2.0 * PI * k as f64 / m as f64;
                let w = t + v.cos();
                let diff = 1.0 - v.cos() / w;
                acc += diff * diff * w;
            }
            let oracle = 0.125 * 2.0 * PI * acc * 2.0 * PI / m as f64;
            assert!((oracle - torus_energy(t)).abs() < 1e-10, "{t}");
        }
        assert!((torus_energy(2f64.sqrt()) - PI * PI).abs() < 1e-14);
    }
}
