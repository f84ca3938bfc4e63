//! Volume probes on models with an exact singular Yamabe solution.
//!
//! The models are rotationally symmetric, so `Vol({r > ε})` reduces to a
//! radial integral that is evaluated directly and fitted against the
//! divergent expansion in `ε`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::expr::{parse_expr, ExprAst, ExprError};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ProbeError {
    #[error("ε = {0} outside (0, 1]")]
    Epsilon(f64),
    #[error("quadrature did not reach relative error 1e-10 (estimate {0:.3e})")]
    Quadrature(f64),
    #[error("fit needs at least {need} samples, got {have}")]
    TooFewSamples { have: usize, need: usize },
    #[error("fit is ill-conditioned (condition estimate {0:.3e})")]
    IllConditioned(f64),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeModel {
    /// Unit ball in ℝ³ with `u = (1 − |x|²)/2`.
    HyperbolicBall,
    /// Unit disc in ℝ² with `u = (1 − |x|²)/2`.
    HyperbolicDisc,
}

impl ProbeModel {
    /// Boundary dimension `n`.
    pub fn n(self) -> usize {
        match self {
            ProbeModel::HyperbolicBall => 2,
            ProbeModel::HyperbolicDisc => 1,
        }
    }

    pub fn variables(self) -> &'static [&'static str] {
        match self {
            ProbeModel::HyperbolicBall => &["x", "y", "z"],
            ProbeModel::HyperbolicDisc => &["x", "y"],
        }
    }

    pub fn defining_function(self) -> Result<ExprAst, ExprError> {
        match self {
            ProbeModel::HyperbolicBall => parse_expr("(1 - x*x - y*y - z*z)/2", self.variables()),
            ProbeModel::HyperbolicDisc => parse_expr("(1 - x*x - y*y)/2", self.variables()),
        }
    }

    /// Known `(c_0, …, c_{n−1}, 𝓔, V)` of the model.
    pub fn expected(self) -> Vec<f64> {
        match self {
            ProbeModel::HyperbolicBall => vec![2.0 * PI, -2.0 * PI, -2.0 * PI, 0.5 * PI - 2.0 * PI * 2f64.ln()],
            ProbeModel::HyperbolicDisc => vec![2.0 * PI, 0.0, -3.0 * PI],
        }
    }

    /// Area of the unit boundary sphere.
    fn boundary_area(self) -> f64 {
        match self {
            ProbeModel::HyperbolicBall => 4.0 * PI,
            ProbeModel::HyperbolicDisc => 2.0 * PI,
        }
    }
}

/// Largest `|R + n(n+1)|` of `u^{−2}δ` at `count` random interior points.
pub fn curvature_check<R: Rng>(model: ProbeModel, count: usize, rng: &mut R) -> Result<f64, ProbeError> {
    let u = model.defining_function()?;
    let dim = model.n() + 1;
    let nf = model.n() as f64;
    let mut worst: f64 = 0.0;
    let mut found = 0;
    while found < count {
        let p: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if p.iter().map(|x| x * x).sum::<f64>() >= 0.999 {
            continue;
        }
        found += 1;
        let j = u.eval_jet(&p)?;
        let grad2: f64 = (0..dim).map(|i| j.d(i) * j.d(i)).sum();
        let lap: f64 = (0..dim).map(|i| j.d2(i, i)).sum();
        let scalar = -nf * (nf + 1.0) * grad2 + 2.0 * nf * j.value() * lap;
        worst = worst.max((scalar + nf * (nf + 1.0)).abs());
    }
    Ok(worst)
}

/// `Vol({r > ε})` for the model, where `r = 1 − |x|`.
pub fn probe_volume(model: ProbeModel, eps: f64) -> Result<f64, ProbeError> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(ProbeError::Epsilon(eps));
    }
    let n = model.n() as i32;
    let area = model.boundary_area();
    // in t = 1 − |x| the volume element is area·(1−t)^n dt and u = t(2−t)/2
    let integrand = |t: f64| area * (1.0 - t).powi(n) * (2.0 / (t * (2.0 - t))).powi(n + 1);
    let mut total = 0.0;
    let mut err = 0.0;
    let mut a = eps;
    while a < 1.0 {
        let b = (2.0 * a).min(1.0);
        let piece = quadrature::double_exponential::integrate(integrand, a, b, 1e-14 * integrand(a) * (b - a));
        total += piece.integral;
        err += piece.error_estimate;
        a = b;
    }
    if total > 0.0 && err > 1e-10 * total {
        return Err(ProbeError::Quadrature(err / total));
    }
    Ok(total)
}

/// `(ε, volume)` rows for a list of cut-offs.
pub fn probe_table(model: ProbeModel, eps: &[f64]) -> Result<Vec<(f64, f64)>, ProbeError> {
    eps.iter().map(|&e| Ok((e, probe_volume(model, e)?))).collect()
}

/// `count` cut-offs spaced geometrically between `lo` and `hi`.
pub fn geometric_ladder(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| lo * (hi / lo).powf(k as f64 / (count - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionFit {
    /// `c_0, …, c_{n−1}`.
    pub divergent: Vec<f64>,
    /// Coefficient of `log(1/ε)`.
    pub energy: f64,
    /// Constant term.
    pub constant: f64,
    /// Coefficients of `ε, ε², …`.
    pub corrections: Vec<f64>,
    /// Root-mean-square relative misfit.
    pub residual: f64,
    pub condition: f64,
}

/// Least-squares fit of `Σ c_k ε^{k−n} + 𝓔 log(1/ε) + V + Σ_{j≥1} a_j ε^j`.
pub fn fit_expansion(n: usize, table: &[(f64, f64)], corrections: usize) -> Result<ExpansionFit, ProbeError> {
    let cols = n + 2 + corrections;
    let need = cols.max(12);
    if table.len() < need {
        return Err(ProbeError::TooFewSamples {
            have: table.len(),
            need,
        });
    }
    let mid = (table.iter().map(|r| r.0.ln()).sum::<f64>() / table.len() as f64).exp();
    let powers: Vec<i32> = (0..n as i32)
        .map(|k| k - n as i32)
        .chain(1..=corrections as i32)
        .collect();
    let basis = |e: f64| -> Vec<f64> {
        let x = e / mid;
        let mut row: Vec<f64> = powers[..n].iter().map(|&p| x.powi(p)).collect();
        row.push((1.0 / e).ln());
        row.push(1.0);
        row.extend(powers[n..].iter().map(|&p| x.powi(p)));
        row
    };
    let weights: Vec<f64> = table.iter().map(|r| 1.0 / r.1.abs()).collect();
    let a = DMatrix::from_fn(table.len(), cols, |i, j| basis(table[i].0)[j] * weights[i]);
    let b = DVector::from_iterator(table.len(), table.iter().zip(&weights).map(|(r, w)| r.1 * w));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = smax / smin;
    if !condition.is_finite() || condition > 1e13 {
        return Err(ProbeError::IllConditioned(condition));
    }
    let x = svd.solve(&b, 0.0).map_err(|_| ProbeError::IllConditioned(condition))?;
    let fitted = &a * &x - &b;
    let residual = (fitted.norm_squared() / table.len() as f64).sqrt();
    let divergent = (0..n).map(|k| x[k] * mid.powi(-powers[k])).collect();
    let corrections = (0..corrections)
        .map(|j| x[n + 2 + j] * mid.powi(-powers[n + j]))
        .collect();
    Ok(ExpansionFit {
        divergent,
        energy: x[n],
        constant: x[n + 1],
        corrections,
        residual,
        condition,
    })
}
