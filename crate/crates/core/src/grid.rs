//! Uniform 1-D grids.
//!
//! A grid carries two step sizes: `h`, the physical node spacing
//! `(b - a) / (n - 1)`, and `dx_int`, the weight used by every quadrature
//! sum. By default `dx_int = h`; setting it larger deliberately rescales
//! the integrals (it acts as a weighting knob on the smoothing term, not
//! as a resampling of the data).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    a: f64,
    b: f64,
    n: usize,
    h: f64,
    dx_int: f64,
}

impl Grid {
    /// Uniform grid of `n` nodes on `[a, b]` with `dx_int = h`.
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidGrid(format!("need a < b, got [{a}, {b}]")));
        }
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 nodes, got {n}")));
        }
        let h = (b - a) / (n - 1) as f64;
        Ok(Grid { a, b, n, h, dx_int: h })
    }

    /// Same grid with a different integration weight.
    pub fn with_dx_int(mut self, dx_int: f64) -> Result<Self> {
        if !(dx_int > 0.0) || !dx_int.is_finite() {
            return Err(Error::InvalidGrid(format!("dx_int must be positive, got {dx_int}")));
        }
        self.dx_int = dx_int;
        Ok(self)
    }

    /// Artificial grid for flattened 2-D data: `[0, len * dx_int]` with
    /// `len` nodes. Used when 1-D smoothing is applied to image-shaped
    /// vectors.
    pub fn artificial(len: usize, dx_int: f64) -> Result<Self> {
        if len < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 nodes, got {len}")));
        }
        Grid::new(0.0, len as f64 * dx_int, len)?.with_dx_int(dx_int)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dx_int(&self) -> f64 {
        self.dx_int
    }

    /// Coordinate of node `k`. The last node is pinned to `b` exactly.
    pub fn node(&self, k: usize) -> f64 {
        debug_assert!(k < self.n);
        if k + 1 == self.n {
            self.b
        } else {
            self.a + k as f64 * self.h
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.node(k)).collect()
    }

    /// Quadrature weight of node `i` under the left-Riemann rule: every
    /// node carries `dx_int` except the right domain endpoint, which
    /// carries none.
    pub fn weight(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        if i + 1 == self.n {
            0.0
        } else {
            self.dx_int
        }
    }

    /// Total discrete measure, `sum of all weights`. Equals `b - a` when
    /// `dx_int = h`.
    pub fn total_weight(&self) -> f64 {
        (self.n - 1) as f64 * self.dx_int
    }

    /// Sample a function at every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n).map(|k| f(self.node(k))).collect()
    }

    pub(crate) fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() == self.n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.n, actual: v.len() })
        }
    }
}
