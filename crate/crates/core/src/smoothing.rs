//! Smoothing transform: inverse negative Laplacian with homogeneous
//! Dirichlet conditions, realized by quadrature.
//!
//! For data `f` on `[a, b]` the smoothed field solves `-u'' = f`,
//! `u(a) = u(b) = 0`, which the closed form
//!
//! ```text
//! u(x) = int_x^b int_a^eta f  -  ((b - x)/(b - a)) int_a^b int_a^eta f
//! ```
//!
//! turns into two cumulative quadrature passes. Discretely we factor the
//! map as `u = L^T D (L f)`, where `(L f)(x) = -int_a^x f + const` is the
//! derivative field `u'` (the constant makes its weighted mean vanish)
//! and `D` holds the left-Riemann weights of the outer integral, which
//! drop the right endpoint exactly like every other quadrature sum in
//! this crate. Writing `u` through `L^T D L` keeps three things exact for
//! every mesh weight `dx_int`: the endpoint values `u(a) = u(b) = 0`, the
//! symmetry and positivity of the map, and the summation-by-parts
//! identity `<L f, L g>_D = <f, u_g>` that the objective's gradient
//! relies on.

use crate::error::Result;
use crate::grid::Grid;
use crate::linalg::dot;

/// Cumulative quadrature: node `k` holds `sum_{i<=k} w_i f_i`.
fn cumulative(f: &[f64], grid: &Grid) -> Vec<f64> {
    let mut acc = 0.0;
    (0..grid.n())
        .map(|k| {
            acc += grid.weight(k) * f[k];
            acc
        })
        .collect()
}

/// Derivative of the smoothed field: `u'(x) = -int_a^x f + c` with the
/// constant `c` chosen so that the weighted mean of `u'` vanishes, which
/// is what makes `u(b) = 0` hold after the second integration.
pub fn u_prime_of(f: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    grid.check_len(f)?;
    let mut c = cumulative(f, grid);
    let mut s = 0.0;
    for k in 0..grid.n() {
        s += grid.weight(k) * c[k];
    }
    let mean = s / grid.total_weight();
    for v in &mut c {
        *v = mean - *v;
    }
    Ok(c)
}

/// Dot product under the outer-integral weights: the right endpoint is
/// excluded, all other nodes count with weight one. Scale by `dx_int`
/// to obtain the discrete integral of `a * b`.
pub(crate) fn field_dot(a: &[f64], b: &[f64], grid: &Grid) -> f64 {
    debug_assert_eq!(a.len(), grid.n());
    debug_assert_eq!(b.len(), grid.n());
    let m = grid.n() - 1;
    dot(&a[..m], &b[..m])
}

/// Adjoint pass `L^T D v`: reversed accumulation against the same
/// quadrature weights, plus the rank-one mean correction.
fn adjoint_pass(v: &[f64], grid: &Grid) -> Vec<f64> {
    let n = grid.n();
    let total_w = grid.total_weight();
    let mut total_v = 0.0;
    for k in 0..n - 1 {
        total_v += v[k];
    }
    let mean_scale = total_v / total_w;
    let mut out = vec![0.0; n];
    let mut tail_v = 0.0;
    let mut tail_w = 0.0;
    for k in (0..n).rev() {
        if k + 1 < n {
            tail_v += v[k];
        }
        tail_w += grid.weight(k);
        out[k] = grid.weight(k) * (tail_w * mean_scale - tail_v);
    }
    // Rows a and b of the exact operator vanish identically; pin the
    // rounding residue.
    out[0] = 0.0;
    out[n - 1] = 0.0;
    out
}

/// Smoothed field `u` with `-u'' = f`, `u(a) = u(b) = 0`, computed as the
/// double cumulative quadrature `L^T D (L f)`. The first and last entries
/// are exactly zero by construction.
pub fn neg_lap_inv(f: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    let v = u_prime_of(f, grid)?;
    Ok(adjoint_pass(&v, grid))
}

/// Data bundle used by the objective: the right-hand side together with
/// its smoothed field and the field's derivative.
#[derive(Debug, Clone)]
pub struct SmoothedData {
    pub g: Vec<f64>,
    pub u: Vec<f64>,
    pub u_prime: Vec<f64>,
    pub grid: Grid,
}

/// Precompute `u` and `u'` for a data vector.
pub fn smooth_data(g: &[f64], grid: &Grid) -> Result<SmoothedData> {
    let u = neg_lap_inv(g, grid)?;
    let u_prime = u_prime_of(g, grid)?;
    Ok(SmoothedData { g: g.to_vec(), u, u_prime, grid: grid.clone() })
}

/// Quadratic form `<f, neg_lap_inv(f)> = |L f|_D^2`, nonnegative by
/// construction.
pub fn smoothing_energy(f: &[f64], grid: &Grid) -> Result<f64> {
    let v = u_prime_of(f, grid)?;
    Ok(field_dot(&v, &v, grid))
}
