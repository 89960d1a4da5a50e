//! Reference regularization methods for the comparison tables:
//! Landweber, CGLS, and Tikhonov with identity penalty and
//! discrepancy-based lambda selection.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::descent::{IterationRecord, RunReport, StoppingReason, StoppingRule};
use crate::error::{Error, Result};
use crate::linalg::{norm, rel_error, sub};
use crate::operator::LinearOperator;

/// Largest eigenvalue of `T* T`, estimated by 50 power iterations from a
/// fixed seeded start vector (deterministic step sizes downstream).
pub fn operator_norm_sq(op: &LinearOperator) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x413);
    let mut v: Vec<f64> = (0..op.cols()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut lambda = 0.0;
    for _ in 0..50 {
        let w = op.apply_adjoint(&op.apply(&v).unwrap()).unwrap();
        lambda = norm(&w);
        if lambda == 0.0 {
            return 0.0;
        }
        v = w.iter().map(|x| x / lambda).collect();
    }
    lambda
}

fn record(
    history: &mut Vec<IterationRecord>,
    iter: usize,
    residual: f64,
    psi: &[f64],
    truth: Option<&[f64]>,
    step: f64,
) {
    history.push(IterationRecord {
        iter,
        g_value: residual * residual,
        residual_norm: residual,
        rel_error: truth.map(|t| rel_error(psi, t)),
        step,
    });
}

fn finish(
    psi: Vec<f64>,
    reason: StoppingReason,
    residual: f64,
    truth: Option<&[f64]>,
    history: Vec<IterationRecord>,
) -> (Vec<f64>, RunReport) {
    let report = RunReport {
        reason,
        iterations: history.len(),
        final_g: residual * residual,
        final_residual: residual,
        final_rel_error: truth.map(|t| rel_error(&psi, t)),
        history,
    };
    (psi, report)
}

/// Fixed-step gradient iteration `psi += tau T*(g - T psi)` from zero.
/// The default relaxation is `1/|T*T|`; a supplied one must lie in the
/// stability interval `(0, 2/|T*T|)`.
pub fn landweber(
    op: &LinearOperator,
    g_noisy: &[f64],
    stop: &StoppingRule,
    tau_step: Option<f64>,
    truth: Option<&[f64]>,
) -> Result<(Vec<f64>, RunReport)> {
    let norm_sq = operator_norm_sq(op);
    if norm_sq <= 0.0 {
        return Err(Error::InvalidOperator("zero operator in landweber".into()));
    }
    let tau = tau_step.unwrap_or(1.0 / norm_sq);
    if tau <= 0.0 || tau >= 2.0 / norm_sq {
        return Err(Error::InvalidParameter(format!(
            "landweber step {tau} outside (0, {})",
            2.0 / norm_sq
        )));
    }
    let mut psi = vec![0.0; op.cols()];
    let mut residual_vec = sub(&op.apply(&psi)?, g_noisy);
    let mut residual = norm(&residual_vec);
    let mut history = Vec::new();
    let mut reason = StoppingReason::MaxIter;
    for iter in 1..=stop.max_iter {
        if residual <= stop.tau * stop.delta {
            reason = StoppingReason::Discrepancy;
            break;
        }
        let update = op.apply_adjoint(&residual_vec)?;
        for (p, u) in psi.iter_mut().zip(&update) {
            *p -= tau * u;
        }
        residual_vec = sub(&op.apply(&psi)?, g_noisy);
        residual = norm(&residual_vec);
        if !residual.is_finite() {
            return Err(Error::NonFinite { iter });
        }
        record(&mut history, iter, residual, &psi, truth, tau);
    }
    if reason == StoppingReason::MaxIter && residual <= stop.tau * stop.delta {
        reason = StoppingReason::Discrepancy;
    }
    Ok(finish(psi, reason, residual, truth, history))
}

/// Conjugate gradients on the normal equations `T*T psi = T*g`, stopped
/// by the discrepancy of the true residual.
pub fn cgls(
    op: &LinearOperator,
    g_noisy: &[f64],
    stop: &StoppingRule,
    truth: Option<&[f64]>,
) -> Result<(Vec<f64>, RunReport)> {
    let mut psi = vec![0.0; op.cols()];
    let mut r = g_noisy.to_vec();
    let mut s = op.apply_adjoint(&r)?;
    let mut p = s.clone();
    let mut s_sq = crate::linalg::dot(&s, &s);
    let mut residual = norm(&r);
    let mut history = Vec::new();
    let mut reason = StoppingReason::MaxIter;
    for iter in 1..=stop.max_iter {
        if residual <= stop.tau * stop.delta {
            reason = StoppingReason::Discrepancy;
            break;
        }
        let q = op.apply(&p)?;
        let q_sq = crate::linalg::dot(&q, &q);
        if q_sq == 0.0 || s_sq == 0.0 {
            reason = StoppingReason::StalledStep;
            break;
        }
        let alpha = s_sq / q_sq;
        for i in 0..psi.len() {
            psi[i] += alpha * p[i];
        }
        for i in 0..r.len() {
            r[i] -= alpha * q[i];
        }
        s = op.apply_adjoint(&r)?;
        let s_sq_next = crate::linalg::dot(&s, &s);
        let beta = s_sq_next / s_sq;
        for i in 0..p.len() {
            p[i] = s[i] + beta * p[i];
        }
        s_sq = s_sq_next;
        residual = norm(&sub(&op.apply(&psi)?, g_noisy));
        if !residual.is_finite() {
            return Err(Error::NonFinite { iter });
        }
        record(&mut history, iter, residual, &psi, truth, alpha);
    }
    if reason == StoppingReason::MaxIter && residual <= stop.tau * stop.delta {
        reason = StoppingReason::Discrepancy;
    }
    Ok(finish(psi, reason, residual, truth, history))
}

/// Tikhonov regularization with identity penalty: solves
/// `(T*T + lambda I) psi = T* g` by Cholesky factorization and picks
/// `lambda` by bisection on the monotone map `lambda -> |T psi - g|`
/// against the discrepancy target `tau * delta`. Returns the solution,
/// the probe history (step column holds lambda), and the chosen lambda.
/// A target below the attainable residual range yields the smallest-
/// lambda solution with a StalledStep flag.
pub fn tikhonov_identity(
    op: &LinearOperator,
    g_noisy: &[f64],
    stop: &StoppingRule,
    lambda_grid: Option<(f64, f64, f64)>,
    truth: Option<&[f64]>,
) -> Result<(Vec<f64>, RunReport, f64)> {
    if g_noisy.len() != op.rows() {
        return Err(Error::DimensionMismatch { expected: op.rows(), actual: g_noisy.len() });
    }
    let scale = operator_norm_sq(op).max(f64::MIN_POSITIVE);
    let (lo, hi, tol) = lambda_grid.unwrap_or((1e-12 * scale, 1e4 * scale, 1e-3));
    if !(lo > 0.0 && hi > lo && tol > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda grid ({lo}, {hi}, {tol})")));
    }
    let n = op.cols();
    let a: DMatrix<f64> = op.to_dense();
    let ata = a.tr_mul(&a);
    let atg = a.tr_mul(&DVector::from_column_slice(g_noisy));

    let solve = |lambda: f64| -> Result<Vec<f64>> {
        let mut m = ata.clone();
        for i in 0..n {
            m[(i, i)] += lambda;
        }
        let chol = Cholesky::new(m)
            .ok_or_else(|| Error::InvalidOperator("indefinite normal equations".into()))?;
        Ok(chol.solve(&atg).iter().copied().collect())
    };
    let target = stop.tau * stop.delta;
    let mut history = Vec::new();
    let probe = |lambda: f64, hist: &mut Vec<IterationRecord>| -> Result<(Vec<f64>, f64)> {
        let psi = solve(lambda)?;
        let r = norm(&sub(&op.apply(&psi)?, g_noisy));
        record(hist, hist.len() + 1, r, &psi, truth, lambda);
        Ok((psi, r))
    };

    let (psi_lo, r_lo) = probe(lo, &mut history)?;
    if r_lo > target {
        let (psi, report) = finish(psi_lo, StoppingReason::StalledStep, r_lo, truth, history);
        return Ok((psi, report, lo));
    }
    let (psi_hi, r_hi) = probe(hi, &mut history)?;
    if r_hi <= target {
        // Even the heavily damped solution meets the target.
        let (psi, report) = finish(psi_hi, StoppingReason::Discrepancy, r_hi, truth, history);
        return Ok((psi, report, hi));
    }
    let (mut lo, mut hi) = (lo, hi);
    let mut best = (psi_lo, r_lo, lo);
    for _ in 0..200 {
        let lambda = (lo * hi).sqrt();
        let (psi, r) = probe(lambda, &mut history)?;
        if r <= target {
            best = (psi, r, lambda);
            lo = lambda;
        } else {
            hi = lambda;
        }
        if (target - best.1).abs() <= tol * target || hi / lo - 1.0 < 1e-12 {
            break;
        }
    }
    let (psi, r, lambda) = best;
    let (psi, report) = finish(psi, StoppingReason::Discrepancy, r, truth, history);
    Ok((psi, report, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_numdiff_problem, NumdiffCase};

    fn identity(n: usize) -> LinearOperator {
        let rows: Vec<Vec<f64>> =
            (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        LinearOperator::dense_from_rows(&rows).unwrap()
    }

    #[test]
    fn power_iteration_matches_known_spectrum() {
        let op = LinearOperator::dense_from_rows(&[vec![2.0, 0.0], vec![0.0, 0.5]]).unwrap();
        let est = operator_norm_sq(&op);
        assert!((est - 4.0).abs() < 1e-8, "estimate {est}");
    }

    #[test]
    fn landweber_residual_halves_on_schedule() {
        let op = identity(12);
        let g: Vec<f64> = (0..12).map(|k| 1.0 + (k as f64 * 0.7).sin()).collect();
        let stop = StoppingRule::new(0.0, 1.0, 40).unwrap();
        let (_, report) = landweber(&op, &g, &stop, Some(0.3), None).unwrap();
        let res: Vec<f64> = report.history.iter().map(|r| r.residual_norm).collect();
        let period = (1.0f64 / 0.3).ceil() as usize;
        for m in 0..res.len() - period {
            if res[m] > 1e-13 {
                assert!(res[m + period] <= 0.5 * res[m]);
            }
        }
    }

    #[test]
    fn landweber_reaches_the_scaled_component_slowly() {
        let op = LinearOperator::dense_from_rows(&[vec![1.0, 0.0], vec![0.0, 0.1]]).unwrap();
        let stop = StoppingRule::new(0.0, 1.0, 10_000).unwrap();
        let (psi, report) = landweber(&op, &[1.0, 1.0], &stop, None, None).unwrap();
        assert_eq!(report.reason, StoppingReason::MaxIter);
        assert!((psi[0] - 1.0).abs() < 1e-3);
        assert!((psi[1] - 10.0).abs() < 1e-3);
    }

    #[test]
    fn landweber_rejects_unstable_steps() {
        let op = identity(4);
        let stop = StoppingRule::new(0.0, 1.0, 10).unwrap();
        assert!(landweber(&op, &[1.0; 4], &stop, Some(2.5), None).is_err());
        assert!(landweber(&op, &[1.0; 4], &stop, Some(0.0), None).is_err());
    }

    #[test]
    fn landweber_stays_bounded_inside_the_stability_interval() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let rows: Vec<Vec<f64>> = (0..8)
                .map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let op = LinearOperator::dense_from_rows(&rows).unwrap();
            let g: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let tau = 1.9 / operator_norm_sq(&op);
            let stop = StoppingRule::new(0.0, 1.0, 300).unwrap();
            let (psi, _) = landweber(&op, &g, &stop, Some(tau), None).unwrap();
            assert!(psi.iter().all(|v| v.is_finite()));
            assert!(norm(&psi) < 1e6);
        }
    }

    #[test]
    fn landweber_is_no_better_than_conjugate_methods_on_noisy_data() {
        let inst = make_numdiff_problem(NumdiffCase::G1, 200, 0.1, 5).unwrap();
        let stop = StoppingRule::new(inst.delta, 1.0, 50_000).unwrap();
        let (_, report) =
            landweber(&inst.op, &inst.g_noisy, &stop, None, Some(&inst.phi_true)).unwrap();
        assert_eq!(report.reason, StoppingReason::Discrepancy);
        let err = report.final_rel_error.unwrap();
        assert!(err.is_finite() && err < 1.0, "rel_error {err}");
    }

    #[test]
    fn cgls_terminates_finitely_on_a_small_spd_problem() {
        use rand::{Rng, SeedableRng};
        let n = 10;
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let v = rng.gen_range(-1.0..1.0) / n as f64;
                rows[i][j] += v;
                rows[j][i] += v;
            }
            rows[i][i] += 2.0;
        }
        let op = LinearOperator::dense_from_rows(&rows).unwrap();
        let target: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = op.apply(&target).unwrap();
        let stop = StoppingRule::new(1e-10, 1.0, 10).unwrap();
        let (_, report) = cgls(&op, &g, &stop, None).unwrap();
        assert!(report.final_residual < 1e-10, "residual {}", report.final_residual);
    }

    #[test]
    fn cgls_residuals_never_increase() {
        let inst = make_numdiff_problem(NumdiffCase::G1, 200, 0.1, 7).unwrap();
        let stop = StoppingRule::new(inst.delta, 1.0, 5000).unwrap();
        let (_, report) = cgls(&inst.op, &inst.g_noisy, &stop, Some(&inst.phi_true)).unwrap();
        for w in report.history.windows(2) {
            assert!(w[1].residual_norm <= w[0].residual_norm * (1.0 + 1e-12));
        }
        assert_eq!(report.reason, StoppingReason::Discrepancy);
    }

    #[test]
    fn cgls_matches_the_reference_error_ranges() {
        let g1 = make_numdiff_problem(NumdiffCase::G1, 200, 0.1, 11).unwrap();
        let stop = StoppingRule::new(g1.delta, 1.0, 5000).unwrap();
        let (_, report) = cgls(&g1.op, &g1.g_noisy, &stop, Some(&g1.phi_true)).unwrap();
        let err = report.final_rel_error.unwrap();
        assert!((0.04..=0.16).contains(&err), "g1 rel_error {err}");

        let g2 = make_numdiff_problem(NumdiffCase::G2, 200, 0.1, 11).unwrap();
        let stop = StoppingRule::new(g2.delta, 1.0, 5000).unwrap();
        let (_, report) = cgls(&g2.op, &g2.g_noisy, &stop, Some(&g2.phi_true)).unwrap();
        let err = report.final_rel_error.unwrap();
        assert!((0.15..=0.40).contains(&err), "g2 rel_error {err}");
    }

    #[test]
    fn tikhonov_limit_behavior() {
        let inst = make_numdiff_problem(NumdiffCase::G1, 60, 0.1, 3).unwrap();
        // Huge lambda damps the solution to zero and the residual to |g|.
        let stop = StoppingRule::new(norm(&inst.g_noisy) * 2.0, 1.0, 10).unwrap();
        let (psi, report, lambda) =
            tikhonov_identity(&inst.op, &inst.g_noisy, &stop, Some((1e9, 1e10, 1e-3)), None)
                .unwrap();
        assert!(norm(&psi) < 1e-6);
        assert!((report.final_residual - norm(&inst.g_noisy)).abs() < 1e-6);
        assert!(lambda >= 1e9);

        // Tiny lambda on a well-conditioned operator recovers least squares.
        let op = identity(5);
        let g = vec![1.0, -2.0, 3.0, 0.5, 0.0];
        let stop = StoppingRule::new(0.0, 1.0, 10).unwrap();
        let (psi, report, _) =
            tikhonov_identity(&op, &g, &stop, Some((1e-13, 1.0, 1e-3)), None).unwrap();
        assert_eq!(report.reason, StoppingReason::StalledStep);
        for (a, b) in psi.iter().zip(&g) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn tikhonov_residual_is_monotone_in_lambda() {
        let inst = make_numdiff_problem(NumdiffCase::G1, 80, 0.1, 9).unwrap();
        let stop = StoppingRule::new(inst.delta, 1.0, 10).unwrap();
        let mut last = 0.0;
        for lambda in [1e-8, 1e-6, 1e-4, 1e-2, 1.0, 1e2] {
            let (_, report, _) = tikhonov_identity(
                &inst.op,
                &inst.g_noisy,
                &stop,
                Some((lambda, lambda * (1.0 + 1e-9), 1e3)),
                None,
            )
            .unwrap();
            let r = report.history[0].residual_norm;
            assert!(r >= last, "residual {r} dropped below {last} at lambda {lambda}");
            last = r;
        }
    }

    #[test]
    fn tikhonov_discrepancy_selection_lands_in_the_reference_range() {
        let inst = make_numdiff_problem(NumdiffCase::G1, 200, 0.1, 11).unwrap();
        let stop = StoppingRule::new(inst.delta, 1.0, 10).unwrap();
        let (_, report, lambda) =
            tikhonov_identity(&inst.op, &inst.g_noisy, &stop, None, Some(&inst.phi_true)).unwrap();
        assert_eq!(report.reason, StoppingReason::Discrepancy);
        assert!(lambda > 0.0);
        assert!(report.final_residual <= inst.delta * (1.0 + 1e-9));
        let err = report.final_rel_error.unwrap();
        assert!((0.06..=0.24).contains(&err), "rel_error {err}");
    }
}
