//! The objective `G(psi) = |T psi - g|^2 + |u_psi' - u_delta'|^2` and the
//! pieces descent needs: its L2 gradient, its (constant) second Gateaux
//! quadratic form, and the quadratic-model initial step.
//!
//! All norms and pairings here are discrete integrals: plain dot products
//! scaled by the data grid's `dx_int`. With that one convention the
//! calculus closes exactly: `G'(psi)[h] = wdot(grad_l2(psi), h)` and
//! `G''[h, k] = second_form(h, k)` hold at rounding level, which the
//! line search and the conjugate directions rely on.

use crate::error::{Error, Result};
use crate::linalg::{dot, sub};
use crate::operator::LinearOperator;
use crate::smoothing::{field_dot, neg_lap_inv, u_prime_of, SmoothedData};

/// Which terms of the objective are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// `G1 = |T psi - g|^2` only.
    DataOnly,
    /// `G2 = |u_psi' - u_delta'|^2` only.
    SmoothOnly,
    /// `G = G1 + G2`.
    Full,
}

/// Feasible-set constraint handled by the descent loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    None,
    NonNegative,
}

/// Immutable problem bundle: operator, smoothed data, active terms.
#[derive(Debug, Clone)]
pub struct Objective {
    pub op: LinearOperator,
    pub data: SmoothedData,
    pub mode: Mode,
    pub constraint: Constraint,
}

impl Objective {
    pub fn new(
        op: LinearOperator,
        data: SmoothedData,
        mode: Mode,
        constraint: Constraint,
    ) -> Result<Self> {
        if data.grid.n() != op.rows() {
            return Err(Error::DimensionMismatch { expected: op.rows(), actual: data.grid.n() });
        }
        Ok(Objective { op, data, mode, constraint })
    }

    /// Integral pairing `dx_int * <a, b>`; the weight under every norm
    /// and duality bracket in this module.
    pub fn wdot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.data.grid.dx_int() * dot(a, b)
    }

    /// Objective value at `psi`.
    pub fn eval(&self, psi: &[f64]) -> Result<f64> {
        let t_psi = self.op.apply(psi)?;
        let dx = self.data.grid.dx_int();
        let mut value = 0.0;
        if self.mode != Mode::SmoothOnly {
            let r = sub(&t_psi, &self.data.g);
            value += dx * dot(&r, &r);
        }
        if self.mode != Mode::DataOnly {
            let du = sub(&u_prime_of(&t_psi, &self.data.grid)?, &self.data.u_prime);
            value += dx * field_dot(&du, &du, &self.data.grid);
        }
        Ok(value)
    }

    /// L2 gradient `-2 T*((g - T psi) + (u_delta - u_psi))`, with the
    /// residual term dropped in SmoothOnly mode and the smoothed term
    /// dropped in DataOnly mode.
    pub fn grad_l2(&self, psi: &[f64]) -> Result<Vec<f64>> {
        let t_psi = self.op.apply(psi)?;
        let n = t_psi.len();
        let mut carrier = vec![0.0; n];
        if self.mode != Mode::SmoothOnly {
            for i in 0..n {
                carrier[i] += self.data.g[i] - t_psi[i];
            }
        }
        if self.mode != Mode::DataOnly {
            let u_psi = neg_lap_inv(&t_psi, &self.data.grid)?;
            for i in 0..n {
                carrier[i] += self.data.u[i] - u_psi[i];
            }
        }
        let mut grad = self.op.apply_adjoint(&carrier)?;
        for v in &mut grad {
            *v *= -2.0;
        }
        Ok(grad)
    }

    /// Second Gateaux form `G''[h, k]`; `psi` is ignored because the
    /// functional is quadratic, the argument stays for interface
    /// uniformity.
    pub fn second_form(&self, _psi: &[f64], h: &[f64], k: &[f64]) -> Result<f64> {
        let th = self.op.apply(h)?;
        let tk = self.op.apply(k)?;
        let mut pairing = vec![0.0; th.len()];
        if self.mode != Mode::SmoothOnly {
            for i in 0..th.len() {
                pairing[i] += th[i];
            }
        }
        if self.mode != Mode::DataOnly {
            let u_th = neg_lap_inv(&th, &self.data.grid)?;
            for i in 0..th.len() {
                pairing[i] += u_th[i];
            }
        }
        Ok(2.0 * self.wdot(&pairing, &tk))
    }

    /// Exact minimizer of the quadratic `gamma -> G(psi - gamma dir)`:
    /// `gamma0 = G'(psi)[dir] / G''[dir, dir]`.
    pub fn initial_step(&self, psi: &[f64], dir: &[f64]) -> Result<f64> {
        let curvature = self.second_form(psi, dir, dir)?;
        if curvature <= 1e-30 {
            return Err(Error::DegenerateDirection { value: curvature });
        }
        Ok(self.wdot(&self.grad_l2(psi)?, dir) / curvature)
    }
}
