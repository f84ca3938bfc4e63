//! Benchmark fixtures shared by the criterion targets.

use yamabe_core::geom::presets;
use yamabe_core::{AmbientSpec, SurfaceGrid};

pub const EUCLIDEAN_3: AmbientSpec = AmbientSpec::Euclidean { dim: 3 };

/// The `(1, 1.3, 0.7)` ellipsoid on an `nu × nv` grid.
pub fn ellipsoid(nu: usize, nv: usize) -> SurfaceGrid {
    presets::ellipsoid(&EUCLIDEAN_3, [1.0, 1.3, 0.7], nu, nv).expect("valid ellipsoid")
}

/// Geodesic sphere of polar radius `rho` in the unit three-sphere.
pub fn geodesic_sphere(rho: f64, nu: usize, nv: usize) -> (AmbientSpec, SurfaceGrid) {
    let ambient = AmbientSpec::SpaceForm { dim: 3, curvature: 1.0 };
    let s = presets::sphere(&ambient, presets::geodesic_chart_radius(1.0, rho), nu, nv).expect("valid sphere");
    (ambient, s)
}
