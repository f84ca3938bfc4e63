/// Largest number of declared variables an expression may have.
pub const MAX_VARS: usize = 4;
const HESS_LEN: usize = MAX_VARS * (MAX_VARS + 1) / 2;

#[inline]
fn packed(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * MAX_VARS - i * i.saturating_sub(1) / 2 + (j - i)
}

/// Second-order jet: value, gradient and symmetric Hessian. Mixed partials
/// are stored once in packed upper-triangular form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetValue {
    nvars: usize,
    value: f64,
    grad: [f64; MAX_VARS],
    hess: [f64; HESS_LEN],
}

impl JetValue {
    pub fn constant(nvars: usize, value: f64) -> Self {
        Self {
            nvars,
            value,
            grad: [0.0; MAX_VARS],
            hess: [0.0; HESS_LEN],
        }
    }

    pub fn variable(nvars: usize, index: usize, value: f64) -> Self {
        let mut j = Self::constant(nvars, value);
        j.grad[index] = 1.0;
        j
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// First partial with respect to variable `i`.
    pub fn d(&self, i: usize) -> f64 {
        self.grad[i]
    }

    /// Second partial with respect to variables `i` and `j`.
    pub fn d2(&self, i: usize, j: usize) -> f64 {
        self.hess[packed(i, j)]
    }

    pub fn gradient(&self) -> &[f64] {
        &self.grad[..self.nvars]
    }

    pub(crate) fn is_constant(&self) -> bool {
        self.grad.iter().all(|g| *g == 0.0) && self.hess.iter().all(|h| *h == 0.0)
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.value.is_finite() && self.grad.iter().all(|g| g.is_finite()) && self.hess.iter().all(|h| h.is_finite())
    }

    pub(crate) fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        out.value *= s;
        out.grad.iter_mut().for_each(|g| *g *= s);
        out.hess.iter_mut().for_each(|h| *h *= s);
        out
    }

    pub(crate) fn add(&self, other: &Self) -> Self {
        let mut out = *self;
        out.value += other.value;
        for k in 0..MAX_VARS {
            out.grad[k] += other.grad[k];
        }
        for k in 0..HESS_LEN {
            out.hess[k] += other.hess[k];
        }
        out
    }

    pub(crate) fn mul(&self, other: &Self) -> Self {
        let (a, b) = (self.value, other.value);
        let mut out = Self::constant(self.nvars, a * b);
        for k in 0..self.nvars {
            out.grad[k] = a * other.grad[k] + b * self.grad[k];
        }
        for i in 0..self.nvars {
            for j in i..self.nvars {
                let p = packed(i, j);
                out.hess[p] =
                    a * other.hess[p] + b * self.hess[p] + self.grad[i] * other.grad[j] + self.grad[j] * other.grad[i];
            }
        }
        out
    }

    pub(crate) fn recip(&self) -> Self {
        let a = self.value;
        self.compose(1.0 / a, -1.0 / (a * a), 2.0 / (a * a * a))
    }

    /// Apply a scalar function given its value and first two derivatives at
    /// the current value.
    pub(crate) fn compose(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let mut out = Self::constant(self.nvars, f0);
        for k in 0..self.nvars {
            out.grad[k] = f1 * self.grad[k];
        }
        for i in 0..self.nvars {
            for j in i..self.nvars {
                let p = packed(i, j);
                out.hess[p] = f1 * self.hess[p] + f2 * self.grad[i] * self.grad[j];
            }
        }
        out
    }
}
