use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{GeomError, MIN_GRID};

/// Global shape of the parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Every direction periodic with period 2π (closed curves, tori).
    Periodic,
    /// `u` periodic azimuth, `v ∈ (0, π)` polar angle on a staggered grid.
    Polar,
}

/// Behaviour of a field under the doubled-grid reflection across a pole.
/// Scalars and the `uu`, `vv` components of tensors are `Even`; mixed
/// `uv` components are `Odd`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Index arithmetic, finite differences and quadrature weights on a
/// structured parameter grid. Nodes are stored row-major in `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLayout {
    n: usize,
    nu: usize,
    nv: usize,
    topology: Topology,
}

/// First and second partials of a grid field at one node, ordered
/// `[∂u, ∂v, ∂uu, ∂uv, ∂vv]`.
pub type Partials = [f64; 5];

impl GridLayout {
    pub fn new(n: usize, nu: usize, nv: usize, topology: Topology) -> Result<Self, GeomError> {
        match n {
            1 => {
                if topology != Topology::Periodic {
                    return Err(GeomError::Unsupported("curves must use a periodic grid".into()));
                }
                if nu < MIN_GRID {
                    return Err(GeomError::GridTooSmall(nu));
                }
                Ok(Self { n, nu, nv: 1, topology })
            }
            2 => {
                for d in [nu, nv] {
                    if d < MIN_GRID {
                        return Err(GeomError::GridTooSmall(d));
                    }
                }
                if topology == Topology::Polar && !nu.is_multiple_of(2) {
                    return Err(GeomError::OddAzimuth(nu));
                }
                Ok(Self { n, nu, nv, topology })
            }
            _ => Err(GeomError::Unsupported(format!(
                "grids exist only for n = 1 or 2, got n = {n}"
            ))),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn nv(&self) -> usize {
        self.nv
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn len(&self) -> usize {
        self.nu * self.nv
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nu + i
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nu, idx / self.nu)
    }

    pub fn hu(&self) -> f64 {
        2.0 * PI / self.nu as f64
    }

    pub fn hv(&self) -> f64 {
        match self.topology {
            Topology::Periodic => 2.0 * PI / self.nv as f64,
            Topology::Polar => PI / self.nv as f64,
        }
    }

    pub fn params(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.coords(idx);
        let u = i as f64 * self.hu();
        let v = match (self.n, self.topology) {
            (1, _) => 0.0,
            (_, Topology::Periodic) => j as f64 * self.hv(),
            (_, Topology::Polar) => (j as f64 + 0.5) * self.hv(),
        };
        [u, v]
    }

    /// Value of `field` at the node offset by `(di, dj)` from `(i, j)`,
    /// applying periodic wrap and, across a pole, the azimuth shift by π
    /// together with the parity sign.
    pub fn fetch(&self, field: &[f64], i: usize, j: usize, di: isize, dj: isize, parity: Parity) -> f64 {
        let nu = self.nu as isize;
        let nv = self.nv as isize;
        let mut ii = i as isize + di;
        let mut jj = j as isize + dj;
        let mut sign = 1.0;
        if self.topology == Topology::Polar && (jj < 0 || jj >= nv) {
            jj = if jj < 0 { -jj - 1 } else { 2 * nv - 1 - jj };
            ii += nu / 2;
            if parity == Parity::Odd {
                sign = -1.0;
            }
        } else {
            jj = jj.rem_euclid(nv);
        }
        ii = ii.rem_euclid(nu);
        sign * field[jj as usize * self.nu + ii as usize]
    }

    /// Fourth-order centered partials of `field` at node `idx`.
    pub fn partials_at(&self, field: &[f64], idx: usize, parity: Parity) -> Partials {
        const D1: [(isize, f64); 4] = [(-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)];
        const D2: [(isize, f64); 5] = [(-2, -1.0), (-1, 16.0), (0, -30.0), (1, 16.0), (2, -1.0)];
        let (i, j) = self.coords(idx);
        let hu = self.hu();
        let f = |di: isize, dj: isize| self.fetch(field, i, j, di, dj, parity);
        let du = D1.iter().map(|&(k, w)| w * f(k, 0)).sum::<f64>() / (12.0 * hu);
        let duu = D2.iter().map(|&(k, w)| w * f(k, 0)).sum::<f64>() / (12.0 * hu * hu);
        if self.n == 1 {
            return [du, 0.0, duu, 0.0, 0.0];
        }
        let hv = self.hv();
        let dv = D1.iter().map(|&(k, w)| w * f(0, k)).sum::<f64>() / (12.0 * hv);
        let dvv = D2.iter().map(|&(k, w)| w * f(0, k)).sum::<f64>() / (12.0 * hv * hv);
        let mut duv = 0.0;
        for &(a, wa) in &D1 {
            for &(b, wb) in &D1 {
                duv += wa * wb * f(a, b);
            }
        }
        duv /= 144.0 * hu * hv;
        [du, dv, duu, duv, dvv]
    }

    /// Partials of `field` at every node.
    pub fn partials(&self, field: &[f64], parity: Parity) -> Vec<Partials> {
        (0..self.len())
            .map(|idx| self.partials_at(field, idx, parity))
            .collect()
    }

    /// Parameter-space quadrature weight of each node: trapezoid in periodic
    /// directions, Fejér's first rule in `cos v` for the polar direction
    /// (divided by `sin v` so that it integrates `dv`).
    pub fn weights(&self) -> Vec<f64> {
        let wu = self.hu();
        let wv: Vec<f64> = match (self.n, self.topology) {
            (1, _) => vec![1.0],
            (_, Topology::Periodic) => vec![self.hv(); self.nv],
            (_, Topology::Polar) => fejer_weights(self.nv)
                .into_iter()
                .enumerate()
                .map(|(j, w)| w / ((j as f64 + 0.5) * self.hv()).sin())
                .collect(),
        };
        (0..self.len()).map(|idx| wu * wv[idx / self.nu]).collect()
    }

    /// Pairs of adjacent nodes that do not cross a pole.
    pub(crate) fn neighbour_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(2 * self.len());
        for j in 0..self.nv {
            for i in 0..self.nu {
                let a = self.index(i, j);
                out.push((a, self.index((i + 1) % self.nu, j)));
                if self.n == 2 {
                    match self.topology {
                        Topology::Periodic => out.push((a, self.index(i, (j + 1) % self.nv))),
                        Topology::Polar if j + 1 < self.nv => out.push((a, self.index(i, j + 1))),
                        Topology::Polar => {}
                    }
                }
            }
        }
        out
    }
}

/// Weights of Fejér's first rule on `[−1, 1]` at the Chebyshev nodes
/// `cos((2j+1)π/(2N))`, `j = 0..N`.
pub fn fejer_weights(count: usize) -> Vec<f64> {
    let nf = count as f64;
    (0..count)
        .map(|j| {
            let theta = (2 * j + 1) as f64 * PI / (2.0 * nf);
            let tail: f64 = (1..=count / 2)
                .map(|k| {
                    let k = k as f64;
                    (2.0 * k * theta).cos() / (4.0 * k * k - 1.0)
                })
                .sum();
            2.0 / nf * (1.0 - 2.0 * tail)
        })
        .collect()
}
