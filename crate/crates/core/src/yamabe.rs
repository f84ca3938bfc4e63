//! Formal solution of the singular Yamabe equation near the boundary.
//!
//! Writing the defining function as `u = r + r²φ`, the scalar-curvature
//! equation becomes a nonlinear equation for `φ` whose `r^k` coefficient
//! is linear in `φ_k` with factor `(k+2)(k−n)`. The coefficients
//! `φ_0..φ_{n−1}` are solved order by order; at `k = n` the factor vanishes
//! and the remainder is absorbed by a term `𝓛 r^n log r` in `φ`, whose
//! non-log output under the same operator is `(n+2) r^n`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::collar::{CollarJets, CollarNode};
use crate::geom::{tangential_laplacian, AmbientSpec, GeomError, GridLayout, HypersurfaceData, Parity};
use crate::series::{LogSeries, MatrixSeries, SeriesError};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum YamabeError {
    #[error("homogeneous mode needs node-wise constant data; node {node} differs by {deviation:.3e}")]
    NonConstant { node: usize, deviation: f64 },
    #[error("collar order {have} is too low; need at least {need}")]
    OrderTooLow { have: usize, need: usize },
    #[error("grid mode supports n = 1 or 2 on a grid; got n = {0}")]
    GridDimension(usize),
    #[error("{0}")]
    Mismatch(String),
    #[error("the r-derivative of φ at r = 0 is not determined when n = 1")]
    FirstOrderUndetermined,
    #[error("indicial self-test failed for n = {n}, k = {k}: expected {expected}, found {found}")]
    Indicial {
        n: usize,
        k: usize,
        expected: f64,
        found: f64,
    },
    #[error("residual fit is ill-conditioned: {0}")]
    IllConditioned(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// All tangential derivatives vanish; data must be constant on Σ.
    Homogeneous,
    /// Tangential operators on the grid.
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeExpansion {
    /// `φ_0, …, φ_{n−1}`.
    pub phi: Vec<f64>,
    /// Coefficient of `r^{n+2} log r` in `u`.
    pub obstruction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YamabeExpansion {
    pub n: usize,
    pub mode: SolveMode,
    pub nodes: Vec<NodeExpansion>,
}

impl YamabeExpansion {
    /// `φ` at one node as a log series of order `n`, with the obstruction
    /// in the `r^n log r` slot.
    pub fn phi_series(&self, node: usize) -> LogSeries {
        let e = &self.nodes[node];
        let mut s = LogSeries::from_coeffs(self.n, &e.phi);
        s.set_b(self.n, e.obstruction);
        s
    }

    /// `u^{(k)} = φ_{k−2}` for `k = 2..=n+1`.
    pub fn u_coefficients(&self, node: usize) -> Vec<f64> {
        self.nodes[node].phi.clone()
    }

    pub fn phi_field(&self, k: usize) -> Vec<f64> {
        self.nodes.iter().map(|e| e.phi[k]).collect()
    }

    pub fn obstruction_field(&self) -> Vec<f64> {
        self.nodes.iter().map(|e| e.obstruction).collect()
    }
}

/// Per-node series entering the equation: `tr(h⁻¹h′)` and `R̄` along the normal.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSeries {
    pub trace_log_derivative: LogSeries,
    pub rbar: LogSeries,
}

impl NodeSeries {
    pub fn from_collar(node: &CollarNode, n: usize) -> Result<Self, YamabeError> {
        let have = node.h.len() - 1;
        if have < n + 1 {
            return Err(YamabeError::OrderTooLow { have, need: n + 1 });
        }
        let h = MatrixSeries::from_derivatives(&node.h[..=n + 1]);
        let h_inv = h.with_order(n).inverse()?;
        let trace_log_derivative = h_inv.mul(&h.derivative()).trace();
        let mut fact = 1.0;
        let coeffs: Vec<f64> = node
            .rbar
            .iter()
            .enumerate()
            .map(|(m, v)| {
                if m > 0 {
                    fact *= m as f64;
                }
                v / fact
            })
            .collect();
        Ok(Self {
            trace_log_derivative,
            rbar: LogSeries::from_coeffs(n, &coeffs),
        })
    }

    /// Data of a totally geodesic hypersurface in flat space.
    pub fn flat(n: usize) -> Self {
        Self {
            trace_log_derivative: LogSeries::zeros(n),
            rbar: LogSeries::zeros(n),
        }
    }
}

/// Tangential contributions `r²Δ_{h_r}φ` and `r³|dφ|²_{h_r}` as series.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentialTerms {
    pub laplacian: LogSeries,
    pub gradient: LogSeries,
}

impl TangentialTerms {
    pub fn zero(order: usize) -> Self {
        Self {
            laplacian: LogSeries::zeros(order),
            gradient: LogSeries::zeros(order),
        }
    }
}

/// Left-hand side of the equation for `φ`, truncated at the order of `phi`.
pub fn equation_residual(
    phi: &LogSeries,
    data: &NodeSeries,
    tangential: &TangentialTerms,
    n: usize,
) -> Result<LogSeries, YamabeError> {
    let order = phi.order();
    let one = LogSeries::constant(order, 1.0);
    let rphi = phi.shift(1);
    let dphi = phi.euler();
    let d2phi = dphi.euler().try_add(&dphi.scale(-1.0))?;
    let trh = data.trace_log_derivative.with_order(order);
    let geometric = one.try_add(&rphi.scale(2.0))?.try_add(&dphi.shift(1))?;
    let inner = d2phi
        .try_add(&dphi.scale(4.0))?
        .try_add(&phi.scale(2.0))?
        .try_add(&trh.try_mul(&geometric)?.scale(0.5))?
        .try_add(&tangential.laplacian.with_order(order))?;
    let one_rphi = one.try_add(&rphi)?;
    let first = one_rphi.try_mul(&inner)?;
    let q = dphi.try_add(&phi.scale(2.0))?;
    let second = q
        .scale(2.0)
        .try_add(&q.try_mul(&q)?.shift(1))?
        .try_add(&tangential.gradient.with_order(order))?
        .scale(0.5 * (n as f64 + 1.0));
    let third = one_rphi
        .try_mul(&one_rphi)?
        .try_mul(&data.rbar.with_order(order))?
        .shift(1)
        .scale(0.5 / n as f64);
    Ok(first.try_add(&second.scale(-1.0))?.try_add(&third)?)
}

fn indicial(k: usize, n: usize) -> f64 {
    (k as f64 + 2.0) * (k as f64 - n as f64)
}

/// Solve for `φ_k`, `k` in `range`, leaving other coefficients untouched.
fn solve_orders(
    phi: &mut LogSeries,
    series: &NodeSeries,
    tangential: &TangentialTerms,
    n: usize,
    range: std::ops::Range<usize>,
) -> Result<(), YamabeError> {
    for k in range {
        phi.set_a(k, 0.0);
        let res = equation_residual(phi, series, tangential, n)?;
        phi.set_a(k, -res.a(k) / indicial(k, n));
    }
    Ok(())
}

/// Set the log coefficient so that the `r^n` residual vanishes.
fn solve_obstruction(
    phi: &mut LogSeries,
    series: &NodeSeries,
    tangential: &TangentialTerms,
    n: usize,
) -> Result<(), YamabeError> {
    phi.set_b(n, 0.0);
    let res = equation_residual(phi, series, tangential, n)?;
    phi.set_b(n, -res.a(n) / (n as f64 + 2.0));
    Ok(())
}

fn expansion_of(phi: &LogSeries, n: usize) -> NodeExpansion {
    NodeExpansion {
        phi: (0..n).map(|k| phi.a(k)).collect(),
        obstruction: phi.b(n),
    }
}

fn check_constant(jets: &CollarJets) -> Result<(), YamabeError> {
    let first = &jets.nodes()[0];
    for (node, c) in jets.nodes().iter().enumerate().skip(1) {
        let mut dev: f64 = 0.0;
        for (a, b) in c.h.iter().zip(&first.h) {
            dev = dev.max((a - b).amax());
        }
        for (a, b) in c.rbar.iter().zip(&first.rbar) {
            dev = dev.max((a - b).abs());
        }
        if dev > 1e-10 {
            return Err(YamabeError::NonConstant { node, deviation: dev });
        }
    }
    Ok(())
}

/// Solve the equation for `φ_0..φ_{n−1}` and the obstruction at every node.
pub fn solve_yamabe(
    jets: &CollarJets,
    data: &HypersurfaceData,
    mode: SolveMode,
) -> Result<YamabeExpansion, YamabeError> {
    let n = data.n();
    if jets.n() != n || jets.len() != data.len() {
        return Err(YamabeError::Mismatch(format!(
            "collar has {} nodes of dimension {}, data has {} nodes of dimension {n}",
            jets.len(),
            jets.n(),
            data.len()
        )));
    }
    if jets.order() < n + 1 {
        return Err(YamabeError::OrderTooLow {
            have: jets.order(),
            need: n + 1,
        });
    }
    let series = jets
        .nodes()
        .par_iter()
        .map(|c| NodeSeries::from_collar(c, n))
        .collect::<Result<Vec<_>, _>>()?;
    let flat = TangentialTerms::zero(n);
    match mode {
        SolveMode::Homogeneous => {
            check_constant(jets)?;
            let nodes = series
                .par_iter()
                .map(|s| {
                    let mut phi = LogSeries::zeros(n);
                    solve_orders(&mut phi, s, &flat, n, 0..n)?;
                    solve_obstruction(&mut phi, s, &flat, n)?;
                    Ok(expansion_of(&phi, n))
                })
                .collect::<Result<Vec<_>, YamabeError>>()?;
            Ok(YamabeExpansion { n, mode, nodes })
        }
        SolveMode::Grid => {
            if n > 2 || data.layout().is_none() {
                return Err(YamabeError::GridDimension(n));
            }
            let mut phis = series
                .par_iter()
                .map(|s| {
                    let mut phi = LogSeries::zeros(n);
                    solve_orders(&mut phi, s, &flat, n, 0..n)?;
                    Ok(phi)
                })
                .collect::<Result<Vec<_>, YamabeError>>()?;
            // r²Δφ_0 reaches the residual at order 2, which only matters for n = 2
            let lap0 = if n >= 2 {
                let phi0: Vec<f64> = phis.iter().map(|p| p.a(0)).collect();
                tangential_laplacian(&phi0, data)?
            } else {
                vec![0.0; data.len()]
            };
            phis.par_iter_mut()
                .zip(&series)
                .zip(&lap0)
                .try_for_each(|((phi, s), lap)| {
                    let t = TangentialTerms {
                        laplacian: LogSeries::monomial(n, 2, *lap),
                        gradient: LogSeries::zeros(n),
                    };
                    solve_obstruction(phi, s, &t, n)
                })?;
            let nodes = phis.iter().map(|p| expansion_of(p, n)).collect();
            Ok(YamabeExpansion { n, mode, nodes })
        }
    }
}

/// Closed-form `φ_0` and, for `n ≥ 2`, `φ_1` by two equivalent routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormPhis {
    /// `−H/(2n)`.
    pub phi0: f64,
    /// From `3(n−1)φ_1 = ((1−n)/(2n))(R̄ + H²) + ½(R − |L̊|²)`.
    pub phi1: Option<f64>,
    /// From `3(n−1)φ_1 = H²/n − |L|² − h^{ij}R̄_{0i0j} + R̄/(2n)` with the
    /// normal trace eliminated through the Gauss equation.
    pub phi1_via_normal_trace: Option<f64>,
}

pub fn closed_form_phis(data: &HypersurfaceData, ambient: &AmbientSpec) -> Vec<ClosedFormPhis> {
    let n = data.n();
    let nf = n as f64;
    data.nodes()
        .iter()
        .map(|g| {
            let rbar = match ambient.constant_curvature() {
                Some(c) => nf * (nf + 1.0) * c,
                None => g.ambient.scalar,
            };
            let h2 = g.mean * g.mean;
            let phi0 = -g.mean / (2.0 * nf);
            if n < 2 {
                return ClosedFormPhis {
                    phi0,
                    phi1: None,
                    phi1_via_normal_trace: None,
                };
            }
            let denom = 3.0 * (nf - 1.0);
            let final_form = ((1.0 - nf) / (2.0 * nf) * (rbar + h2) + 0.5 * (g.scalar - g.tracefree_norm2)) / denom;
            let normal_trace = 0.5 * (rbar - g.scalar - g.l_norm2 + h2);
            let intermediate = (h2 / nf - g.l_norm2 - normal_trace + rbar / (2.0 * nf)) / denom;
            ClosedFormPhis {
                phi0,
                phi1: Some(final_form),
                phi1_via_normal_trace: Some(intermediate),
            }
        })
        .collect()
}

/// `φ_1` from the closed form; undefined for curves.
pub fn closed_form_phi1(data: &HypersurfaceData, ambient: &AmbientSpec) -> Result<Vec<f64>, YamabeError> {
    if data.n() < 2 {
        return Err(YamabeError::FirstOrderUndetermined);
    }
    Ok(closed_form_phis(data, ambient)
        .into_iter()
        .map(|c| c.phi1.unwrap_or(f64::NAN))
        .collect())
}

/// Verified linearization constants of the equation for one `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicialReport {
    pub n: usize,
    /// `(k, found, expected)` for `φ = r^k`, `k = 0..=n`.
    pub powers: Vec<(usize, f64, f64)>,
    /// Non-log and log outputs at order `n` for `φ = r^n log r`.
    pub log_term: (f64, f64),
}

/// Apply the equation to `φ = r^k` and `φ = r^n log r` on flat data and
/// confirm the constants the solver divides by.
pub fn indicial_self_test(n: usize) -> Result<IndicialReport, YamabeError> {
    let flat = NodeSeries::flat(n);
    let t = TangentialTerms::zero(n);
    let mut powers = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let phi = LogSeries::monomial(n, k, 1.0);
        let found = equation_residual(&phi, &flat, &t, n)?.a(k);
        let expected = indicial(k, n);
        if (found - expected).abs() > 1e-12 {
            return Err(YamabeError::Indicial { n, k, expected, found });
        }
        powers.push((k, found, expected));
    }
    let res = equation_residual(&LogSeries::log_monomial(n, n, 1.0), &flat, &t, n)?;
    let log_term = (res.a(n), res.b(n));
    let expected = n as f64 + 2.0;
    if (log_term.0 - expected).abs() > 1e-12 || log_term.1.abs() > 1e-12 {
        return Err(YamabeError::Indicial {
            n,
            k: n,
            expected,
            found: log_term.0,
        });
    }
    Ok(IndicialReport { n, powers, log_term })
}

/// Change of the `r^n` residual coefficient when the free coefficient
/// `φ_n` is perturbed by `delta` at every node.
pub fn gauge_sensitivity(jets: &CollarJets, exp: &YamabeExpansion, delta: f64) -> Result<f64, YamabeError> {
    let n = exp.n;
    let mut worst: f64 = 0.0;
    for (k, c) in jets.nodes().iter().enumerate() {
        let s = NodeSeries::from_collar(c, n)?;
        let t = TangentialTerms::zero(n);
        let phi = exp.phi_series(k);
        let base = equation_residual(&phi, &s, &t, n)?.a(n);
        let mut moved = phi.clone();
        moved.set_a(n, delta);
        let shifted = equation_residual(&moved, &s, &t, n)?.a(n);
        worst = worst.max((shifted - base).abs());
    }
    Ok(worst)
}

/// Decay of `|R_g + n(n+1)|` along the collar.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualScan {
    /// `(r, max over nodes of |R_g + n(n+1)|)`.
    pub samples: Vec<(f64, f64)>,
    /// Fitted `p` in `|R_g + n(n+1)| ≈ C r^p |log r|`; `None` when every
    /// sample is at roundoff level.
    pub exponent: Option<f64>,
    pub max_residual: f64,
}

/// `n + 1` values `M(r), M′(r)` of a matrix polynomial given by its derivatives at 0.
fn poly_eval(derivs: &[DMatrix<f64>], r: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let dim = derivs[0].nrows();
    let mut m = DMatrix::zeros(dim, dim);
    let mut dm = DMatrix::zeros(dim, dim);
    let mut fact = 1.0;
    for (k, d) in derivs.iter().enumerate() {
        if k > 0 {
            fact *= k as f64;
        }
        m += d * (r.powi(k as i32) / fact);
        if k > 0 {
            dm += d * (r.powi(k as i32 - 1) * k as f64 / fact);
        }
    }
    (m, dm)
}

/// Evaluate `φ`, `φ_r`, `φ_rr` of an order-`n` log series at `r`.
fn phi_derivatives(phi: &LogSeries, r: f64) -> [f64; 3] {
    let d = phi.euler();
    let dd = d.euler();
    let v = phi.eval(r);
    let rv = d.eval(r);
    let rrv = dd.eval(r) - rv;
    [v, rv / r, rrv / (r * r)]
}

/// Evaluate the scalar curvature of `u^{−2}ḡ` from the truncated `u` and
/// collar at each `r` in `samples` and fit the decay exponent.
pub fn residual_scan(
    exp: &YamabeExpansion,
    jets: &CollarJets,
    data: &HypersurfaceData,
    samples: &[f64],
) -> Result<ResidualScan, YamabeError> {
    let n = exp.n;
    let nf = n as f64;
    let grid = match exp.mode {
        SolveMode::Grid => Some(
            data.layout()
                .ok_or_else(|| YamabeError::Mismatch("grid expansion without a grid".into()))?,
        ),
        SolveMode::Homogeneous => None,
    };
    let phis: Vec<LogSeries> = (0..exp.nodes.len()).map(|k| exp.phi_series(k)).collect();
    let mut out = Vec::with_capacity(samples.len());
    for &r in samples {
        let phi_r: Vec<[f64; 3]> = phis.iter().map(|p| phi_derivatives(p, r)).collect();
        let metrics: Vec<(DMatrix<f64>, DMatrix<f64>)> = jets.nodes().iter().map(|c| poly_eval(&c.h, r)).collect();
        let (lap, grad2) = match grid {
            Some(layout) => {
                let field: Vec<f64> = phi_r.iter().map(|p| p[0]).collect();
                collar_tangential(layout, data, jets, &metrics, &field, r)?
            }
            None => (vec![0.0; phis.len()], vec![0.0; phis.len()]),
        };
        let mut worst: f64 = 0.0;
        for (k, c) in jets.nodes().iter().enumerate() {
            let [p, pr, prr] = phi_r[k];
            let u = r + r * r * p;
            let ur = 1.0 + 2.0 * r * p + r * r * pr;
            let urr = 2.0 * p + 4.0 * r * pr + r * r * prr;
            let (h, dh) = &metrics[k];
            let h_inv = h
                .clone()
                .try_inverse()
                .ok_or_else(|| YamabeError::Mismatch(format!("collar metric singular at node {k}, r = {r}")))?;
            let tr = (&h_inv * dh).trace();
            let mut rbar = 0.0;
            let mut fact = 1.0;
            for (m, v) in c.rbar.iter().enumerate() {
                if m > 0 {
                    fact *= m as f64;
                }
                rbar += v * r.powi(m as i32) / fact;
            }
            let du2 = ur * ur + r.powi(4) * grad2[k];
            let lap_u = urr + 0.5 * tr * ur + r * r * lap[k];
            let scalar = -nf * (nf + 1.0) * du2 + 2.0 * nf * u * lap_u + u * u * rbar;
            worst = worst.max((scalar + nf * (nf + 1.0)).abs());
        }
        out.push((r, worst));
    }
    let max_residual = out.iter().map(|s| s.1).fold(0.0, f64::max);
    let usable: Vec<(f64, f64)> = out.iter().copied().filter(|s| s.1 > 1e-13).collect();
    let exponent = if usable.len() < 3 {
        None
    } else {
        let pts: Vec<(f64, f64)> = usable.iter().map(|(r, v)| (r.ln(), (v / r.ln().abs()).ln())).collect();
        let m = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let det = m * sxx - sx * sx;
        if det.abs() < 1e-12 {
            return Err(YamabeError::IllConditioned(format!(
                "sample abscissae degenerate (det {det:.3e})"
            )));
        }
        Some((m * sxy - sx * sy) / det)
    };
    Ok(ResidualScan {
        samples: out,
        exponent,
        max_residual,
    })
}

/// `Δ_{h_r} f` and `|df|²_{h_r}` on the grid. Metric derivatives are the
/// exact `∂h_0` plus differences of `h_r − h_0`.
fn collar_tangential(
    layout: &GridLayout,
    data: &HypersurfaceData,
    jets: &CollarJets,
    metrics: &[(DMatrix<f64>, DMatrix<f64>)],
    field: &[f64],
    _r: f64,
) -> Result<(Vec<f64>, Vec<f64>), YamabeError> {
    let n = data.n();
    let len = data.len();
    let mut dh: Vec<[[f64; 3]; 2]> = data.nodes().iter().map(|g| g.dmetric).collect();
    for i in 0..n {
        for j in i..n {
            let comp: Vec<f64> = (0..len)
                .map(|k| metrics[k].0[(i, j)] - jets.nodes()[k].h[0][(i, j)])
                .collect();
            let parity = if i == j { Parity::Even } else { Parity::Odd };
            let parts = layout.partials(&comp, parity);
            for k in 0..len {
                dh[k][0][i + j] += parts[k][0];
                if n == 2 {
                    dh[k][1][i + j] += parts[k][1];
                }
            }
        }
    }
    let fparts = layout.partials(field, Parity::Even);
    let mut lap = Vec::with_capacity(len);
    let mut grad = Vec::with_capacity(len);
    for k in 0..len {
        let h_inv = metrics[k]
            .0
            .clone()
            .try_inverse()
            .ok_or_else(|| YamabeError::Mismatch(format!("collar metric singular at node {k}")))?;
        let gamma = crate::geom::christoffel_symbols(n, &h_inv, &dh[k]);
        lap.push(crate::geom::laplacian_from_partials(n, &h_inv, &gamma, &fparts[k]));
        let d = [fparts[k][0], fparts[k][1]];
        let mut g2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                g2 += h_inv[(i, j)] * d[i] * d[j];
            }
        }
        grad.push(g2);
    }
    Ok((lap, grad))
}
