//! Standard test surfaces as embedding expressions.

use super::{build_surface, AmbientSpec, GeomError, GridLayout, SurfaceGrid, Topology};
use crate::expr::{parse_expr, ExprAst};

/// Parse embedding components over the parameters `u` (curves) or `u, v`.
pub fn embedding(components: &[&str]) -> Result<Vec<ExprAst>, GeomError> {
    let params: &[&str] = if components.len() == 2 { &["u"] } else { &["u", "v"] };
    components
        .iter()
        .map(|c| parse_expr(c, params).map_err(GeomError::from))
        .collect()
}

pub fn sphere_components(radius: f64) -> Vec<String> {
    vec![
        format!("{radius}*cos(u)*sin(v)"),
        format!("{radius}*sin(u)*sin(v)"),
        format!("{radius}*cos(v)"),
    ]
}

pub fn ellipsoid_components(axes: [f64; 3]) -> Vec<String> {
    let [a, b, c] = axes;
    vec![
        format!("{a}*cos(u)*sin(v)"),
        format!("{b}*sin(u)*sin(v)"),
        format!("{c}*cos(v)"),
    ]
}

pub fn torus_components(major: f64, minor: f64) -> Vec<String> {
    vec![
        format!("({major}+{minor}*cos(v))*cos(u)"),
        format!("({major}+{minor}*cos(v))*sin(u)"),
        format!("{minor}*sin(v)"),
    ]
}

pub fn circle_components(radius: f64) -> Vec<String> {
    vec![format!("{radius}*cos(u)"), format!("{radius}*sin(u)")]
}

fn build(ambient: &AmbientSpec, comps: Vec<String>, layout: GridLayout) -> Result<SurfaceGrid, GeomError> {
    let refs: Vec<&str> = comps.iter().map(String::as_str).collect();
    build_surface(ambient, &embedding(&refs)?, layout)
}

/// Round sphere of chart radius `radius` centred at the origin.
pub fn sphere(ambient: &AmbientSpec, radius: f64, nu: usize, nv: usize) -> Result<SurfaceGrid, GeomError> {
    build(
        ambient,
        sphere_components(radius),
        GridLayout::new(2, nu, nv, Topology::Polar)?,
    )
}

pub fn ellipsoid(ambient: &AmbientSpec, axes: [f64; 3], nu: usize, nv: usize) -> Result<SurfaceGrid, GeomError> {
    build(
        ambient,
        ellipsoid_components(axes),
        GridLayout::new(2, nu, nv, Topology::Polar)?,
    )
}

pub fn torus(ambient: &AmbientSpec, major: f64, minor: f64, nu: usize, nv: usize) -> Result<SurfaceGrid, GeomError> {
    build(
        ambient,
        torus_components(major, minor),
        GridLayout::new(2, nu, nv, Topology::Periodic)?,
    )
}

pub fn circle(ambient: &AmbientSpec, radius: f64, nu: usize) -> Result<SurfaceGrid, GeomError> {
    build(
        ambient,
        circle_components(radius),
        GridLayout::new(1, nu, 1, Topology::Periodic)?,
    )
}

/// Chart radius of the geodesic sphere of polar radius `rho` about the
/// chart origin in a space form of curvature `c`.
pub fn geodesic_chart_radius(c: f64, rho: f64) -> f64 {
    if c > 0.0 {
        2.0 / c.sqrt() * (0.5 * c.sqrt() * rho).tan()
    } else if c < 0.0 {
        2.0 / (-c).sqrt() * (0.5 * (-c).sqrt() * rho).tanh()
    } else {
        rho
    }
}
