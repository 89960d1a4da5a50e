//! The descent loop: direction selection, step bracketing, Brent
//! minimization along the ray, constraint projection, discrepancy
//! stopping, and history recording.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::{Constraint, Objective};
use crate::gradient::{descent_direction, DirectionMemory, GradientKind};
use crate::linalg::{norm, rel_error, sub};

pub const DEFAULT_TAU: f64 = 1.0;
pub const DEFAULT_MAX_ITER: usize = 5000;

/// Morozov stopping data: iterate until `|T psi - g_delta| <= tau * delta`
/// or the iteration budget runs out.
#[derive(Debug, Clone, Copy)]
pub struct StoppingRule {
    pub delta: f64,
    pub tau: f64,
    pub max_iter: usize,
}

impl StoppingRule {
    pub fn new(delta: f64, tau: f64, max_iter: usize) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("noise level delta = {delta}")));
        }
        if !(tau >= 1.0) {
            return Err(Error::InvalidParameter(format!("tau = {tau}, need tau >= 1")));
        }
        if max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        Ok(StoppingRule { delta, tau, max_iter })
    }

    fn threshold(&self) -> f64 {
        self.tau * self.delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StoppingReason {
    /// Residual fell to `tau * delta`.
    Discrepancy,
    /// Iteration budget exhausted.
    MaxIter,
    /// The line search could not produce a strictly decreasing step
    /// (rounding floor, or projection undoing the update).
    StalledStep,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub g_value: f64,
    pub residual_norm: f64,
    pub rel_error: Option<f64>,
    pub step: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub reason: StoppingReason,
    pub iterations: usize,
    pub final_g: f64,
    pub final_residual: f64,
    pub final_rel_error: Option<f64>,
    pub history: Vec<IterationRecord>,
}

/// Componentwise `max(psi, 0)`.
pub fn project_nonneg(psi: &[f64]) -> Vec<f64> {
    psi.iter().map(|v| v.max(0.0)).collect()
}

const GOLD_SECTION: f64 = 0.381_966_011_250_105_1;

/// Brent's golden-section/parabolic hybrid on `[a, b]`.
fn brent_min<F: FnMut(f64) -> f64>(f: &mut F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut x = a + GOLD_SECTION * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..100 {
        let xm = 0.5 * (a + b);
        let tol1 = tol.max(f64::EPSILON * x.abs());
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut take_golden = true;
        if e.abs() > tol1 {
            // Parabola through (x, w, v); accept the step only if it
            // stays inside the bracket and shrinks fast enough.
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm > x { tol1 } else { -tol1 };
                }
                take_golden = false;
            }
        }
        if take_golden {
            e = if x < xm { b - x } else { a - x };
            d = GOLD_SECTION * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            (v, fv, w, fw, x, fx) = (w, fw, x, fx, u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv, w, fw) = (w, fw, u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    x
}

/// Step length for the update `psi - gamma * dir`: quadratic-model step
/// first, then bracketing plus Brent refinement around it.
pub fn line_search(obj: &Objective, psi: &[f64], dir: &[f64]) -> Result<f64> {
    let gamma0 = obj.initial_step(psi, dir)?;
    let mut f = |gamma: f64| {
        let p: Vec<f64> = psi.iter().zip(dir).map(|(a, b)| a - gamma * b).collect();
        obj.eval(&p).unwrap_or(f64::INFINITY)
    };
    let f0 = f(0.0);
    let tol = 1e-10 * gamma0.abs() + 1e-18;
    if f(gamma0) >= f0 {
        return Ok(brent_min(&mut f, 0.0, gamma0, tol));
    }
    let mut gamma1 = gamma0;
    let mut gamma2 = gamma1 + gamma0;
    let mut f1 = f(gamma1);
    for _ in 0..100 {
        let f2 = f(gamma2);
        if f2 >= f1 {
            return Ok(brent_min(&mut f, gamma1, gamma2, tol));
        }
        gamma1 = gamma2;
        f1 = f2;
        gamma2 = gamma1 + gamma0;
    }
    Ok(gamma1)
}

/// Algorithm: from `psi0`, repeat direction / line search / projection
/// until the discrepancy criterion, a stalled step, or the iteration
/// budget stops it. `truth` enables the rel_error column of the history.
pub fn run_descent(
    obj: &Objective,
    kind: GradientKind,
    stop: &StoppingRule,
    psi0: &[f64],
    truth: Option<&[f64]>,
) -> Result<(Vec<f64>, RunReport)> {
    if kind.needs_line_grid() && obj.op.cols() != obj.data.grid.n() {
        return Err(Error::InvalidParameter(
            "H1 gradient kinds need a one-dimensional recovery grid".into(),
        ));
    }
    let mut psi = psi0.to_vec();
    let mut g_value = obj.eval(&psi)?;
    let mut residual = norm(&sub(&obj.op.apply(&psi)?, &obj.data.g));
    let mut memory: Option<DirectionMemory> = None;
    let mut prev_clamped: Option<Vec<bool>> = None;
    let mut history = Vec::new();
    let mut reason = StoppingReason::MaxIter;

    for iter in 1..=stop.max_iter {
        if residual <= stop.threshold() {
            reason = StoppingReason::Discrepancy;
            break;
        }
        let grad = obj.grad_l2(&psi)?;
        let dir = descent_direction(kind, &grad, &obj.data.grid, &mut memory)?;
        let step = match line_search(obj, &psi, &dir) {
            Ok(step) => step,
            // Numerically zero direction: the iteration hit its floor.
            Err(Error::DegenerateDirection { .. }) => {
                reason = StoppingReason::StalledStep;
                break;
            }
            Err(e) => return Err(e),
        };
        let mut next: Vec<f64> = psi.iter().zip(&dir).map(|(p, d)| p - step * d).collect();
        if obj.constraint == Constraint::NonNegative {
            let clamped: Vec<bool> = next.iter().map(|v| *v < 0.0).collect();
            if let Some(prev) = &prev_clamped {
                let changed = clamped.iter().zip(prev).filter(|(a, b)| a != b).count();
                // Conjugacy assumptions break when the active set moves.
                if 10 * changed > clamped.len() {
                    memory = None;
                }
            }
            prev_clamped = Some(clamped);
            next = project_nonneg(&next);
        }
        let g_next = obj.eval(&next)?;
        if !g_next.is_finite() {
            return Err(Error::NonFinite { iter });
        }
        if g_next >= g_value {
            reason = StoppingReason::StalledStep;
            break;
        }
        psi = next;
        g_value = g_next;
        residual = norm(&sub(&obj.op.apply(&psi)?, &obj.data.g));
        history.push(IterationRecord {
            iter,
            g_value,
            residual_norm: residual,
            rel_error: truth.map(|t| rel_error(&psi, t)),
            step,
        });
    }
    if reason == StoppingReason::MaxIter && residual <= stop.threshold() {
        // Budget and discrepancy met on the very last step.
        reason = StoppingReason::Discrepancy;
    }
    let report = RunReport {
        reason,
        iterations: history.len(),
        final_g: g_value,
        final_residual: residual,
        final_rel_error: truth.map(|t| rel_error(&psi, t)),
        history,
    };
    Ok((psi, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::Mode;
    use crate::grid::Grid;
    use crate::operator::{make_volterra, LinearOperator};
    use crate::smoothing::smooth_data;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity(n: usize) -> LinearOperator {
        let rows: Vec<Vec<f64>> =
            (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        LinearOperator::dense_from_rows(&rows).unwrap()
    }

    /// Volterra problem with multiplicative white noise at a fixed seed.
    fn noisy_volterra(seed: u64) -> (Objective, Vec<f64>, f64) {
        let grid = Grid::new(-1.0, 1.0, 200).unwrap();
        let op = make_volterra(&grid);
        let phi = grid.sample(|x| x * x - 1.0);
        let g = op.apply(&phi).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e: Vec<f64> =
            (0..200).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let scale = 0.10 * norm(&g) / norm(&e);
        for v in &mut e {
            *v *= scale;
        }
        let delta = norm(&e);
        let g_noisy: Vec<f64> = g.iter().zip(&e).map(|(a, b)| a + b).collect();
        let data = smooth_data(&g_noisy, &grid).unwrap();
        let obj = Objective::new(op, data, Mode::Full, Constraint::None).unwrap();
        (obj, phi, delta)
    }

    #[test]
    fn projection_clamps_negative_entries() {
        assert_eq!(project_nonneg(&[-1.0, 2.0, -3.0]), vec![0.0, 2.0, 0.0]);
        assert_eq!(project_nonneg(&[1.0, 0.5]), vec![1.0, 0.5]);
    }

    #[test]
    fn identity_problem_converges_in_a_step_or_two() {
        let grid = Grid::new(0.0, 1.0, 20).unwrap();
        let g: Vec<f64> = (0..20).map(|k| ((k as f64) * 0.4).sin() + 2.0).collect();
        let data = smooth_data(&g, &grid).unwrap();
        let obj = Objective::new(identity(20), data, Mode::DataOnly, Constraint::None).unwrap();
        let stop = StoppingRule::new(1e-12, 1.0, 50).unwrap();
        let (psi, report) = run_descent(&obj, GradientKind::L2, &stop, &vec![0.0; 20], None).unwrap();
        assert_eq!(report.reason, StoppingReason::Discrepancy);
        assert!(report.iterations <= 2, "{} iterations", report.iterations);
        assert!(rel_error(&psi, &g) <= 1e-10);
    }

    #[test]
    fn line_search_returns_the_exact_quadratic_step() {
        let grid = Grid::new(0.0, 1.0, 15).unwrap();
        let g: Vec<f64> = (0..15).map(|k| k as f64 / 7.0 - 1.0).collect();
        let data = smooth_data(&g, &grid).unwrap();
        let obj = Objective::new(identity(15), data, Mode::DataOnly, Constraint::None).unwrap();
        let psi = vec![1.0; 15];
        let dir = obj.grad_l2(&psi).unwrap();
        let gamma0 = obj.initial_step(&psi, &dir).unwrap();
        let gamma = line_search(&obj, &psi, &dir).unwrap();
        assert!((gamma - gamma0).abs() <= 1e-9, "{gamma} vs {gamma0}");
    }

    #[test]
    fn zero_direction_is_rejected() {
        let (obj, _, _) = noisy_volterra(4);
        let err = line_search(&obj, &vec![0.0; 200], &vec![0.0; 200]).unwrap_err();
        assert!(matches!(err, Error::DegenerateDirection { .. }));
    }

    #[test]
    fn first_step_strictly_decreases_the_objective() {
        let (obj, _, _) = noisy_volterra(6);
        let psi0 = vec![0.0; 200];
        let g0 = obj.eval(&psi0).unwrap();
        let grad = obj.grad_l2(&psi0).unwrap();
        let gamma = line_search(&obj, &psi0, &grad).unwrap();
        let psi1: Vec<f64> = psi0.iter().zip(&grad).map(|(p, d)| p - gamma * d).collect();
        assert!(obj.eval(&psi1).unwrap() < g0);
    }

    #[test]
    fn discrepancy_stop_with_monotone_history() {
        let (obj, phi, delta) = noisy_volterra(8);
        let stop = StoppingRule::new(delta, 1.0, 5000).unwrap();
        let (_, report) =
            run_descent(&obj, GradientKind::ConjugateL2L2, &stop, &vec![0.0; 200], Some(&phi))
                .unwrap();
        assert_eq!(report.reason, StoppingReason::Discrepancy);
        assert!(report.final_residual <= delta);
        let h = &report.history;
        assert_eq!(h.len(), report.iterations);
        for w in h.windows(2) {
            assert!(w[1].g_value < w[0].g_value);
        }
        // The iterate before the stop was still above the threshold.
        assert!(h[h.len() - 2].residual_norm > delta);
    }

    #[test]
    fn numerical_differentiation_error_matches_the_reference_range() {
        let (obj, phi, delta) = noisy_volterra(12);
        let stop = StoppingRule::new(delta, 1.0, 5000).unwrap();
        let (_, report) =
            run_descent(&obj, GradientKind::ConjugateL2L2, &stop, &vec![0.0; 200], Some(&phi))
                .unwrap();
        let err = report.final_rel_error.unwrap();
        assert!((0.04..=0.16).contains(&err), "rel_error {err}");
    }

    #[test]
    fn exact_data_run_converges_on_a_well_conditioned_problem() {
        let n = 50;
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                rows[i][j] = rng.gen_range(-1.0..1.0) / n as f64;
            }
            rows[i][i] += 1.0;
        }
        let op = LinearOperator::dense_from_rows(&rows).unwrap();
        let grid = Grid::new(0.0, 1.0, n).unwrap();
        let phi: Vec<f64> = (0..n).map(|k| (k as f64 * 0.2).cos()).collect();
        let g = op.apply(&phi).unwrap();
        let data = smooth_data(&g, &grid).unwrap();
        let obj = Objective::new(op, data, Mode::Full, Constraint::None).unwrap();
        let stop = StoppingRule::new(0.0, 1.0, 200).unwrap();
        let (_, report) =
            run_descent(&obj, GradientKind::ConjugateL2L2, &stop, &vec![0.0; n], Some(&phi))
                .unwrap();
        let best = report
            .history
            .iter()
            .map(|r| r.rel_error.unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(best < 1e-2, "best rel_error {best}");
        for w in report.history.windows(2) {
            assert!(w[1].g_value < w[0].g_value);
        }
    }

    #[test]
    fn constrained_run_stays_nonnegative_and_stalls_at_the_boundary() {
        let grid = Grid::new(0.0, 1.0, 2).unwrap();
        let data = smooth_data(&[-1.0, 1.0], &grid).unwrap();
        let obj =
            Objective::new(identity(2), data, Mode::DataOnly, Constraint::NonNegative).unwrap();
        let stop = StoppingRule::new(0.0, 1.0, 50).unwrap();
        let (psi, report) =
            run_descent(&obj, GradientKind::L2, &stop, &[0.0, 0.0], None).unwrap();
        assert_eq!(psi[0], 0.0);
        assert!((psi[1] - 1.0).abs() <= 1e-9);
        assert_eq!(report.reason, StoppingReason::StalledStep);
    }

    #[test]
    fn h1_kind_requires_a_line_grid() {
        let grid = Grid::artificial(9, 0.1).unwrap();
        let op = LinearOperator::dense_from_rows(&vec![vec![1.0, 0.0, 0.0, 0.0]; 9]).unwrap();
        let data = smooth_data(&vec![0.5; 9], &grid).unwrap();
        let obj = Objective::new(op, data, Mode::Full, Constraint::None).unwrap();
        let stop = StoppingRule::new(0.0, 1.0, 5).unwrap();
        let err = run_descent(
            &obj,
            GradientKind::H1(crate::gradient::Bc::Neumann),
            &stop,
            &vec![0.0; 4],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn stopping_rule_validation() {
        assert!(StoppingRule::new(-0.1, 1.0, 10).is_err());
        assert!(StoppingRule::new(0.1, 0.5, 10).is_err());
        assert!(StoppingRule::new(0.1, 1.0, 0).is_err());
        assert!(StoppingRule::new(0.0, 1.5, 1).is_ok());
    }
}
