//! Truncated power series in the collar distance `r`.
//!
//! [`LogSeries`] carries a single `log r` slot per order, representing
//! `Σ (a_k + b_k log r) r^k` for `k = 0..=K`. Products of two log-carrying
//! terms would produce `(log r)^2`, which the type cannot hold; instead of
//! dropping such a term silently, multiplication reports it. [`MatrixSeries`]
//! holds smooth symmetric-matrix series such as the collar metrics `h_r`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("(log r)^2 term would appear at order {order} (within truncation)")]
    LogSquared { order: usize },
    #[error("truncation orders differ: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("cannot raise a series with constant term {0} to a non-integer power")]
    BadPowerBase(f64),
    #[error("series has a log r term at order 0")]
    LogAtOrderZero,
    #[error("leading matrix is singular")]
    SingularLeading,
    #[error("leading matrix is not positive definite")]
    NotPositiveDefinite,
}

/// `Σ_{k=0}^{K} (a_k + b_k log r) r^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogSeries {
    coeffs: Vec<[f64; 2]>,
}

impl LogSeries {
    pub fn zeros(order: usize) -> Self {
        Self {
            coeffs: vec![[0.0; 2]; order + 1],
        }
    }

    pub fn constant(order: usize, c: f64) -> Self {
        let mut s = Self::zeros(order);
        s.coeffs[0][0] = c;
        s
    }

    /// `a r^k` (zero if `k` exceeds the truncation order).
    pub fn monomial(order: usize, k: usize, a: f64) -> Self {
        let mut s = Self::zeros(order);
        if k <= order {
            s.coeffs[k][0] = a;
        }
        s
    }

    /// `b r^k log r`.
    pub fn log_monomial(order: usize, k: usize, b: f64) -> Self {
        let mut s = Self::zeros(order);
        if k <= order {
            s.coeffs[k][1] = b;
        }
        s
    }

    /// Smooth series from coefficients `a_0, a_1, ...`; missing orders are zero.
    pub fn from_coeffs(order: usize, a: &[f64]) -> Self {
        let mut s = Self::zeros(order);
        for (k, v) in a.iter().enumerate().take(order + 1) {
            s.coeffs[k][0] = *v;
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn a(&self, k: usize) -> f64 {
        self.coeffs.get(k).map_or(0.0, |c| c[0])
    }

    pub fn b(&self, k: usize) -> f64 {
        self.coeffs.get(k).map_or(0.0, |c| c[1])
    }

    pub fn set_a(&mut self, k: usize, v: f64) {
        self.coeffs[k][0] = v;
    }

    pub fn set_b(&mut self, k: usize, v: f64) {
        self.coeffs[k][1] = v;
    }

    pub fn has_log(&self) -> bool {
        self.coeffs.iter().any(|c| c[1] != 0.0)
    }

    /// Same series, truncated or zero-padded to `order`.
    pub fn with_order(&self, order: usize) -> Self {
        let mut s = Self::zeros(order);
        for k in 0..=order.min(self.order()) {
            s.coeffs[k] = self.coeffs[k];
        }
        s
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| [c[0] * s, c[1] * s]).collect(),
        }
    }

    /// Multiply by `r^m`, truncating.
    pub fn shift(&self, m: usize) -> Self {
        let mut s = Self::zeros(self.order());
        for k in 0..=self.order() {
            if k + m <= self.order() {
                s.coeffs[k + m] = self.coeffs[k];
            }
        }
        s
    }

    /// Euler operator `r d/dr`, which preserves every order:
    /// `r d/dr [(a + b log r) r^k] = (k a + b) r^k + k b r^k log r`.
    pub fn euler(&self) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let k = k as f64;
                    [k * c[0] + c[1], k * c[1]]
                })
                .collect(),
        }
    }

    fn check_order(&self, other: &Self) -> Result<(), SeriesError> {
        if self.order() != other.order() {
            return Err(SeriesError::OrderMismatch(self.order(), other.order()));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_order(other)?;
        Ok(Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(x, y)| [x[0] + y[0], x[1] + y[1]])
                .collect(),
        })
    }

    /// Truncated product. Fails if two log-carrying terms meet at an order
    /// within the truncation.
    pub fn try_mul(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_order(other)?;
        let order = self.order();
        let mut out = Self::zeros(order);
        for i in 0..=order {
            let x = self.coeffs[i];
            if x == [0.0, 0.0] {
                continue;
            }
            for j in 0..=(order - i) {
                let y = other.coeffs[j];
                if x[1] != 0.0 && y[1] != 0.0 {
                    return Err(SeriesError::LogSquared { order: i + j });
                }
                out.coeffs[i + j][0] += x[0] * y[0];
                out.coeffs[i + j][1] += x[0] * y[1] + x[1] * y[0];
            }
        }
        Ok(out)
    }

    /// `(1 + s)^p` for a series `s` without constant term, any real `p`,
    /// by the truncated binomial sum. A series with nonzero constant `c`
    /// is handled as `c^p (1 + (self - c)/c)^p`.
    pub fn try_powf(&self, p: f64) -> Result<Self, SeriesError> {
        if self.b(0) != 0.0 {
            return Err(SeriesError::LogAtOrderZero);
        }
        let c = self.a(0);
        let integral = p.fract() == 0.0;
        if c == 0.0 || (c < 0.0 && !integral) {
            return Err(SeriesError::BadPowerBase(c));
        }
        let mut s = self.scale(1.0 / c);
        s.coeffs[0][0] = 0.0;
        let order = self.order();
        let mut out = Self::constant(order, 1.0);
        let mut power = Self::constant(order, 1.0);
        let mut binom = 1.0;
        for m in 1..=order {
            power = power.try_mul(&s)?;
            binom *= (p - (m as f64 - 1.0)) / m as f64;
            out = out.try_add(&power.scale(binom))?;
        }
        Ok(out.scale(c.powf(p)))
    }

    /// `exp(s)` for a series with no constant term.
    pub fn try_exp_zero_constant(&self) -> Result<Self, SeriesError> {
        if self.b(0) != 0.0 {
            return Err(SeriesError::LogAtOrderZero);
        }
        let mut s = self.clone();
        let c = s.coeffs[0][0];
        s.coeffs[0][0] = 0.0;
        let order = self.order();
        let mut out = Self::constant(order, 1.0);
        let mut power = Self::constant(order, 1.0);
        let mut fact = 1.0;
        for m in 1..=order {
            power = power.try_mul(&s)?;
            fact *= m as f64;
            out = out.try_add(&power.scale(1.0 / fact))?;
        }
        Ok(out.scale(c.exp()))
    }

    /// Evaluate the truncated series at `r > 0`.
    pub fn eval(&self, r: f64) -> f64 {
        let lr = r.ln();
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            let term = c[0] + if c[1] != 0.0 { c[1] * lr } else { 0.0 };
            acc = acc * r + term;
        }
        acc
    }
}

impl Add for &LogSeries {
    type Output = LogSeries;
    fn add(self, rhs: &LogSeries) -> LogSeries {
        self.try_add(rhs).expect("series order mismatch")
    }
}

impl Sub for &LogSeries {
    type Output = LogSeries;
    fn sub(self, rhs: &LogSeries) -> LogSeries {
        self.try_add(&rhs.scale(-1.0)).expect("series order mismatch")
    }
}

impl Neg for &LogSeries {
    type Output = LogSeries;
    fn neg(self) -> LogSeries {
        self.scale(-1.0)
    }
}

/// Panics on a `(log r)^2` term within truncation; use
/// [`LogSeries::try_mul`] to get the error instead.
impl Mul for &LogSeries {
    type Output = LogSeries;
    fn mul(self, rhs: &LogSeries) -> LogSeries {
        self.try_mul(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl Mul<f64> for &LogSeries {
    type Output = LogSeries;
    fn mul(self, rhs: f64) -> LogSeries {
        self.scale(rhs)
    }
}

/// Series of square matrices, stored as Taylor coefficients `M_k` with
/// `M(r) = Σ M_k r^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSeries {
    coeffs: Vec<DMatrix<f64>>,
}

impl MatrixSeries {
    pub fn from_taylor(coeffs: Vec<DMatrix<f64>>) -> Self {
        assert!(!coeffs.is_empty(), "matrix series needs at least one coefficient");
        Self { coeffs }
    }

    /// Build from derivatives `M^{(m)}(0)`, `m = 0..=K`.
    pub fn from_derivatives(derivs: &[DMatrix<f64>]) -> Self {
        let mut fact = 1.0;
        let coeffs = derivs
            .iter()
            .enumerate()
            .map(|(m, d)| {
                if m > 0 {
                    fact *= m as f64;
                }
                d / fact
            })
            .collect();
        Self::from_taylor(coeffs)
    }

    pub fn identity(dim: usize, order: usize) -> Self {
        let mut coeffs = vec![DMatrix::zeros(dim, dim); order + 1];
        coeffs[0] = DMatrix::identity(dim, dim);
        Self { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn coeff(&self, k: usize) -> &DMatrix<f64> {
        &self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    /// `M^{(m)}(0) = m! M_m`.
    pub fn derivative_at_zero(&self, m: usize) -> DMatrix<f64> {
        let fact: f64 = (1..=m).map(|k| k as f64).product();
        &self.coeffs[m] * fact
    }

    pub fn with_order(&self, order: usize) -> Self {
        let dim = self.dim();
        let coeffs = (0..=order)
            .map(|k| self.coeffs.get(k).cloned().unwrap_or_else(|| DMatrix::zeros(dim, dim)))
            .collect();
        Self { coeffs }
    }

    /// `d/dr`, one order shorter.
    pub fn derivative(&self) -> Self {
        if self.order() == 0 {
            return Self::from_taylor(vec![DMatrix::zeros(self.dim(), self.dim())]);
        }
        let coeffs = (1..=self.order()).map(|k| &self.coeffs[k] * k as f64).collect();
        Self { coeffs }
    }

    /// Truncated product at the smaller of the two orders.
    pub fn mul(&self, other: &Self) -> Self {
        let order = self.order().min(other.order());
        let coeffs = (0..=order)
            .map(|k| {
                (0..=k).fold(DMatrix::zeros(self.dim(), other.coeffs[0].ncols()), |acc, j| {
                    acc + &self.coeffs[j] * &other.coeffs[k - j]
                })
            })
            .collect();
        Self { coeffs }
    }

    /// Inverse series by the Neumann recursion
    /// `X_0 = M_0^{-1}`, `X_k = -M_0^{-1} Σ_{j=1}^{k} M_j X_{k-j}`.
    pub fn inverse(&self) -> Result<Self, SeriesError> {
        let m0_inv = self.coeffs[0]
            .clone()
            .try_inverse()
            .ok_or(SeriesError::SingularLeading)?;
        let mut out: Vec<DMatrix<f64>> = vec![m0_inv.clone()];
        for k in 1..=self.order() {
            let mut acc = DMatrix::zeros(self.dim(), self.dim());
            for j in 1..=k {
                acc += &self.coeffs[j] * &out[k - j];
            }
            out.push(-(&m0_inv * acc));
        }
        Ok(Self { coeffs: out })
    }

    pub fn trace(&self) -> LogSeries {
        let a: Vec<f64> = self.coeffs.iter().map(|m| m.trace()).collect();
        LogSeries::from_coeffs(self.order(), &a)
    }
}

/// `√(det M(r) / det M(0))` as a series, via `exp(½ tr log(M_0^{-1} M(r)))`.
pub fn sqrt_det_ratio(m: &MatrixSeries) -> Result<LogSeries, SeriesError> {
    let m0 = m.coeff(0);
    if m0.clone().cholesky().is_none() {
        return Err(SeriesError::NotPositiveDefinite);
    }
    let m0_inv = m0.clone().try_inverse().ok_or(SeriesError::SingularLeading)?;
    let order = m.order();
    let dim = m.dim();
    // B(r) = M_0^{-1} M(r) - I has no constant term
    let mut b_coeffs = vec![DMatrix::zeros(dim, dim)];
    for k in 1..=order {
        b_coeffs.push(&m0_inv * m.coeff(k));
    }
    let b = MatrixSeries::from_taylor(b_coeffs);
    let mut log = MatrixSeries::from_taylor(vec![DMatrix::zeros(dim, dim); order + 1]);
    let mut power = MatrixSeries::identity(dim, order);
    for p in 1..=order {
        power = power.mul(&b);
        let sign = if p % 2 == 1 { 1.0 } else { -1.0 };
        let coeffs = log
            .coeffs
            .iter()
            .zip(power.coeffs())
            .map(|(l, q)| l + q * (sign / p as f64))
            .collect();
        log = MatrixSeries::from_taylor(coeffs);
    }
    log.trace().scale(0.5).try_exp_zero_constant()
}
