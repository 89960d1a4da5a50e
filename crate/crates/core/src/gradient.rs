//! Descent directions: the plain L2 gradient, the H1 (Neuberger)
//! gradient obtained from `-phi'' + phi = rho` under four boundary
//! conditions, and Polak-Ribiere conjugation of either.
//!
//! The H1 solve acts as a preconditioner on the recovery grid, so it
//! uses the physical spacing `h`, never the `dx_int` weighting knob.

use crate::error::Result;
use crate::grid::Grid;
use crate::linalg::dot;

/// Boundary conditions of the Neuberger solve. The mixed variants name
/// the end that carries the Dirichlet (pinned) condition; the other end
/// gets the zero-slope condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bc {
    Dirichlet,
    Neumann,
    MixedLeft,
    MixedRight,
}

/// Direction recipe used by the descent loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientKind {
    L2,
    H1(Bc),
    ConjugateL2L2,
    ConjugateL2H1(Bc),
}

impl GradientKind {
    pub fn is_conjugate(&self) -> bool {
        matches!(self, GradientKind::ConjugateL2L2 | GradientKind::ConjugateL2H1(_))
    }

    /// The H1 variants need a 1-D recovery grid to discretize the solve.
    pub fn needs_line_grid(&self) -> bool {
        matches!(self, GradientKind::H1(_) | GradientKind::ConjugateL2H1(_))
    }
}

/// Solve a tridiagonal system by the Thomas algorithm. The Neuberger
/// matrices are strictly diagonally dominant, so elimination without
/// pivoting is stable; positive pivots are asserted.
fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    assert!(pivot > 0.0, "nonpositive pivot in tridiagonal solve");
    c[0] = sup[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - sub[i] * c[i - 1];
        assert!(pivot > 0.0, "nonpositive pivot in tridiagonal solve");
        if i + 1 < n {
            c[i] = sup[i] / pivot;
        }
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    d
}

/// H1 representation of an L2 gradient: second-order central finite
/// differences for `-phi'' + phi = rho` with the requested boundary
/// conditions. Zero-slope ends use ghost-node elimination, which keeps
/// the stencil second order.
pub fn h1_gradient(l2grad: &[f64], grid: &Grid, bc: Bc) -> Result<Vec<f64>> {
    grid.check_len(l2grad)?;
    let n = grid.n();
    let ih2 = 1.0 / (grid.h() * grid.h());
    let mut sub = vec![-ih2; n];
    let mut diag = vec![1.0 + 2.0 * ih2; n];
    let mut sup = vec![-ih2; n];
    let mut rhs = l2grad.to_vec();

    let dirichlet_left = matches!(bc, Bc::Dirichlet | Bc::MixedLeft);
    let dirichlet_right = matches!(bc, Bc::Dirichlet | Bc::MixedRight);
    if dirichlet_left {
        diag[0] = 1.0;
        sup[0] = 0.0;
        rhs[0] = 0.0;
    } else {
        sup[0] = -2.0 * ih2;
    }
    if dirichlet_right {
        diag[n - 1] = 1.0;
        sub[n - 1] = 0.0;
        rhs[n - 1] = 0.0;
    } else {
        sub[n - 1] = -2.0 * ih2;
    }
    Ok(thomas(&sub, &diag, &sup, &rhs))
}

/// Conjugate history carried between iterations of one descent run.
#[derive(Debug, Clone)]
pub struct DirectionMemory {
    pub phi: Vec<f64>,
    pub grad: Vec<f64>,
    pub dir: Vec<f64>,
}

/// Polak-Ribiere update `phi_new + gamma * dir_old` with
/// `gamma = <phi_new - phi_old, grad_new> / <phi_old, grad_old>`.
/// A nonpositive or undefined gamma restarts: the result is exactly
/// `phi_new`.
pub fn pr_conjugate(
    phi_new: &[f64],
    phi_old: &[f64],
    grad_new: &[f64],
    grad_old: &[f64],
    dir_old: &[f64],
) -> Vec<f64> {
    let denom = dot(phi_old, grad_old);
    if denom == 0.0 {
        return phi_new.to_vec();
    }
    let mut gamma = 0.0;
    for i in 0..phi_new.len() {
        gamma += (phi_new[i] - phi_old[i]) * grad_new[i];
    }
    gamma /= denom;
    if gamma <= 0.0 {
        return phi_new.to_vec();
    }
    phi_new.iter().zip(dir_old).map(|(p, d)| p + gamma * d).collect()
}

/// Direction for the next step `psi - gamma * d`, dispatching on the
/// gradient kind. Conjugate kinds read and update `memory`; the returned
/// direction always satisfies the descent condition `<l2grad, d> > 0`
/// (conjugation falls back to the plain direction when it would not).
pub fn descent_direction(
    kind: GradientKind,
    l2grad: &[f64],
    grid: &Grid,
    memory: &mut Option<DirectionMemory>,
) -> Result<Vec<f64>> {
    let phi = match kind {
        GradientKind::L2 | GradientKind::ConjugateL2L2 => l2grad.to_vec(),
        GradientKind::H1(bc) | GradientKind::ConjugateL2H1(bc) => h1_gradient(l2grad, grid, bc)?,
    };
    if !kind.is_conjugate() {
        return Ok(phi);
    }
    let dir = match memory {
        None => phi.clone(),
        Some(m) => {
            let candidate = pr_conjugate(&phi, &m.phi, l2grad, &m.grad, &m.dir);
            if dot(l2grad, &candidate) > 0.0 {
                candidate
            } else {
                phi.clone()
            }
        }
    };
    *memory = Some(DirectionMemory { phi, grad: l2grad.to_vec(), dir: dir.clone() });
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::{Constraint, Mode, Objective};
    use crate::linalg::{norm, sub as vsub};
    use crate::operator::{make_volterra, LinearOperator};
    use crate::smoothing::smooth_data;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ALL_BCS: [Bc; 4] = [Bc::Dirichlet, Bc::Neumann, Bc::MixedLeft, Bc::MixedRight];

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let grid = Grid::new(0.0, 1.0, 50).unwrap();
        for bc in ALL_BCS {
            let phi = h1_gradient(&vec![0.0; 50], &grid, bc).unwrap();
            assert!(norm(&phi) == 0.0);
        }
    }

    #[test]
    fn dirichlet_sine_oracle() {
        let pi = std::f64::consts::PI;
        let grid = Grid::new(0.0, 1.0, 401).unwrap();
        let rhs = grid.sample(|x| (1.0 + pi * pi) * (pi * x).sin());
        let phi = h1_gradient(&rhs, &grid, Bc::Dirichlet).unwrap();
        let mut worst = 0.0f64;
        for k in 0..401 {
            worst = worst.max((phi[k] - (pi * grid.node(k)).sin()).abs());
        }
        assert!(worst <= 1e-3, "max error {worst}");
    }

    #[test]
    fn neumann_reproduces_constants_exactly() {
        let grid = Grid::new(-2.0, 5.0, 123).unwrap();
        let phi = h1_gradient(&vec![3.25; 123], &grid, Bc::Neumann).unwrap();
        for v in &phi {
            assert!((v - 3.25).abs() <= 1e-10);
        }
    }

    #[test]
    fn solve_round_trips_the_discrete_operator() {
        let grid = Grid::new(0.0, 1.0, 201).unwrap();
        let h = grid.h();
        // Interior-supported bump; all four boundary conditions agree on it.
        let v = grid.sample(|x| {
            let t = (x - 0.5) / 0.15;
            if t.abs() < 1.0 {
                (1.0 - t * t).powi(2)
            } else {
                0.0
            }
        });
        let mut rhs = vec![0.0; 201];
        for i in 1..200 {
            rhs[i] = -(v[i - 1] - 2.0 * v[i] + v[i + 1]) / (h * h) + v[i];
        }
        for bc in ALL_BCS {
            let phi = h1_gradient(&rhs, &grid, bc).unwrap();
            let mut worst = 0.0f64;
            for k in 0..201 {
                worst = worst.max((phi[k] - v[k]).abs());
            }
            assert!(worst <= 1e-8, "{bc:?}: max error {worst}");
        }
    }

    #[test]
    fn white_noise_loses_high_frequency_energy() {
        let grid = Grid::new(0.0, 1.0, 200).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let e: Vec<f64> = (0..200).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean_second_diff = |f: &[f64]| {
            let mut s = 0.0;
            for i in 1..f.len() - 1 {
                s += (f[i - 1] - 2.0 * f[i] + f[i + 1]).abs();
            }
            s / (f.len() - 2) as f64
        };
        let phi = h1_gradient(&e, &grid, Bc::Dirichlet).unwrap();
        let ratio = mean_second_diff(&phi) / mean_second_diff(&e);
        assert!(ratio < 0.2, "ratio {ratio}");
    }

    #[test]
    fn first_iteration_returns_the_transformed_gradient() {
        let grid = Grid::new(0.0, 1.0, 30).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut memory = None;
        let d = descent_direction(GradientKind::ConjugateL2L2, &g, &grid, &mut memory).unwrap();
        assert_eq!(d, g);
        assert!(memory.is_some());
    }

    #[test]
    fn stationary_gradient_gives_zero_coefficient() {
        let phi = vec![1.0, -2.0, 0.5];
        let d = pr_conjugate(&phi, &phi, &phi, &phi, &[9.0, 9.0, 9.0]);
        assert_eq!(d, phi);
    }

    #[test]
    fn zero_denominator_restarts() {
        let phi_new = vec![1.0, 1.0];
        let d = pr_conjugate(&phi_new, &[1.0, -1.0], &[1.0, 0.0], &[1.0, 1.0], &[5.0, 5.0]);
        assert_eq!(d, phi_new);
    }

    #[test]
    fn ascent_candidate_falls_back_to_the_plain_direction() {
        let grid = Grid::new(0.0, 1.0, 3).unwrap();
        let e1 = vec![1.0, 0.0, 0.0];
        let phi_new = vec![0.5, 1.0, 0.0];
        let mut memory =
            Some(DirectionMemory { phi: e1.clone(), grad: e1, dir: vec![-10.0, 0.0, 0.0] });
        let d =
            descent_direction(GradientKind::ConjugateL2L2, &phi_new, &grid, &mut memory).unwrap();
        assert_eq!(d, phi_new);
        assert_eq!(memory.unwrap().dir, phi_new);
    }

    #[test]
    fn l2_kind_passes_the_gradient_through() {
        let grid = Grid::new(0.0, 1.0, 10).unwrap();
        let g: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let mut memory = None;
        let d = descent_direction(GradientKind::L2, &g, &grid, &mut memory).unwrap();
        assert_eq!(d, g);
        assert!(memory.is_none());
    }

    #[test]
    fn neumann_direction_unpins_the_right_endpoint() {
        // The Volterra adjoint zeroes the L2 gradient at b; the Neumann
        // solve spreads mass back to the boundary.
        let grid = Grid::new(0.0, 1.0, 64).unwrap();
        let op = make_volterra(&grid);
        let phi = grid.sample(|x| x * x);
        let g = op.apply(&phi).unwrap();
        let data = smooth_data(&g, &grid).unwrap();
        let obj = Objective::new(op, data, Mode::Full, Constraint::None).unwrap();
        let l2 = obj.grad_l2(&vec![0.0; 64]).unwrap();
        assert_eq!(l2[63], 0.0);
        let d = h1_gradient(&l2, &grid, Bc::Neumann).unwrap();
        assert!(d[63].abs() > 1e-6, "endpoint stayed pinned: {}", d[63]);
    }

    #[test]
    fn conjugate_descent_terminates_finitely_on_a_quadratic() {
        // DataOnly mode with exact line search is conjugate gradients on
        // the normal equations: at most n steps to rounding level.
        let n = 10;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
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
        let grid = Grid::new(0.0, 1.0, n).unwrap();
        let target: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = op.apply(&target).unwrap();
        let data = smooth_data(&g, &grid).unwrap();
        let obj = Objective::new(op.clone(), data, Mode::DataOnly, Constraint::None).unwrap();

        let mut psi = vec![0.0; n];
        let mut memory = None;
        let mut residual = f64::INFINITY;
        for _ in 0..n {
            let grad = obj.grad_l2(&psi).unwrap();
            let d = descent_direction(GradientKind::ConjugateL2L2, &grad, &grid, &mut memory)
                .unwrap();
            let gamma = obj.initial_step(&psi, &d).unwrap();
            for i in 0..n {
                psi[i] -= gamma * d[i];
            }
            residual = norm(&vsub(&op.apply(&psi).unwrap(), &g));
            if residual < 1e-10 {
                break;
            }
        }
        assert!(residual < 1e-10, "residual {residual}");
    }
}
