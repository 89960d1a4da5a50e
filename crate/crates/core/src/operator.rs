//! Forward operators `T` and their adjoints.
//!
//! Four kinds are provided: an arbitrary dense matrix, the Volterra
//! integration operator (cumulative quadrature sum), a separable 2-D
//! Gaussian blur acting on flattened square images, and a parallel-beam
//! tomography matrix built by ray tracing. All adjoints are exact matrix
//! transposes with respect to the unweighted Euclidean inner product, so
//! `<Tx, y> = <x, T*y>` holds to rounding error for every kind.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Compressed sparse row matrix for the tomography kind.
#[derive(Debug, Clone)]
struct Csr {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    fn from_rows(rows: Vec<Vec<(usize, f64)>>, cols: usize) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in &rows {
            for &(j, v) in row {
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Csr { rows: rows.len(), cols, indptr, indices, values }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        for r in 0..self.rows {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            y[r] = acc;
        }
        y
    }

    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.cols];
        for r in 0..self.rows {
            let yr = y[r];
            if yr == 0.0 {
                continue;
            }
            for k in self.indptr[r]..self.indptr[r + 1] {
                x[self.indices[k]] += self.values[k] * yr;
            }
        }
        x
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Dense(DMatrix<f64>),
    Volterra { grid: Grid },
    Blur { side: usize, kernel: Vec<f64>, band: usize },
    Tomography(Csr),
}

#[derive(Debug, Clone)]
pub struct LinearOperator {
    kind: Kind,
    rows: usize,
    cols: usize,
}

impl LinearOperator {
    /// Wrap a dense matrix.
    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        LinearOperator { kind: Kind::Dense(m), rows, cols }
    }

    /// Dense operator from row-major data. Rows must be non-empty and of
    /// equal length.
    pub fn dense_from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::InvalidOperator("empty matrix".into()));
        }
        let cols = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::InvalidOperator(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
        }
        let m = DMatrix::from_row_iterator(rows.len(), cols, rows.iter().flatten().copied());
        Ok(Self::from_matrix(m))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            Kind::Dense(_) => "dense",
            Kind::Volterra { .. } => "volterra",
            Kind::Blur { .. } => "gaussian_blur_2d",
            Kind::Tomography(_) => "tomography",
        }
    }

    /// Forward map `y = T x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, actual: x.len() });
        }
        Ok(match &self.kind {
            Kind::Dense(m) => {
                let v = m * nalgebra::DVectorView::from_slice(x, x.len());
                v.as_slice().to_vec()
            }
            Kind::Volterra { grid } => {
                let mut acc = 0.0;
                (0..grid.n())
                    .map(|k| {
                        acc += grid.weight(k) * x[k];
                        acc
                    })
                    .collect()
            }
            Kind::Blur { side, kernel, band } => blur_apply(x, *side, kernel, *band),
            Kind::Tomography(csr) => csr.apply(x),
        })
    }

    /// Adjoint map `x = T* y` (exact transpose).
    pub fn apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(Error::DimensionMismatch { expected: self.rows, actual: y.len() });
        }
        Ok(match &self.kind {
            Kind::Dense(m) => {
                let v = m.tr_mul(&nalgebra::DVectorView::from_slice(y, y.len()));
                v.as_slice().to_vec()
            }
            Kind::Volterra { grid } => {
                // Reversed cumulative sum scaled by the node weight; the
                // right endpoint has weight zero, so the output always
                // ends in an exact 0.
                let mut acc = 0.0;
                let mut out = vec![0.0; grid.n()];
                for k in (0..grid.n()).rev() {
                    acc += y[k];
                    out[k] = grid.weight(k) * acc;
                }
                out
            }
            // The truncated Gaussian kernel is even, so the blur matrix is
            // symmetric.
            Kind::Blur { side, kernel, band } => blur_apply(y, *side, kernel, *band),
            Kind::Tomography(csr) => csr.apply_transpose(y),
        })
    }

    /// Materialize as a dense matrix (column by column). Intended for
    /// small problems, tests and export.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        let mut e = vec![0.0; self.cols];
        for j in 0..self.cols {
            e[j] = 1.0;
            let col = self.apply(&e).expect("basis vector has the right length");
            for i in 0..self.rows {
                m[(i, j)] = col[i];
            }
            e[j] = 0.0;
        }
        m
    }

    /// Sparse triplets `(row, col, value)` for the tomography kind.
    pub fn coo_triplets(&self) -> Option<Vec<(usize, usize, f64)>> {
        match &self.kind {
            Kind::Tomography(csr) => {
                let mut out = Vec::with_capacity(csr.values.len());
                for r in 0..csr.rows {
                    for k in csr.indptr[r]..csr.indptr[r + 1] {
                        out.push((r, csr.indices[k], csr.values[k]));
                    }
                }
                Some(out)
            }
            _ => None,
        }
    }
}

/// Volterra operator on `grid`: node `k` of `T x` is the quadrature sum
/// `dx_int * sum of x_i for i <= k` (the right domain endpoint carries
/// no weight).
pub fn make_volterra(grid: &Grid) -> LinearOperator {
    let n = grid.n();
    LinearOperator { kind: Kind::Volterra { grid: grid.clone() }, rows: n, cols: n }
}

/// Separable 2-D Gaussian blur on flattened `side x side` images.
///
/// The 1-D kernel is `exp(-j^2 / (2 sigma^2))` for `|j| <= band`,
/// normalized so that the full 2-D kernel sums to one. `band` defaults to
/// `ceil(4 sigma)` and is clamped to `side - 1`. Near the image boundary
/// the kernel is truncated, so those matrix rows sum to less than one.
pub fn make_gaussian_blur(side: usize, sigma: f64, band: Option<usize>) -> Result<LinearOperator> {
    if side == 0 {
        return Err(Error::InvalidOperator("side must be positive".into()));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let mut band = band.unwrap_or((4.0 * sigma).ceil() as usize);
    if band >= side {
        band = side - 1;
    }
    let mut kernel: Vec<f64> = (-(band as i64)..=band as i64)
        .map(|j| (-(j as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    for w in &mut kernel {
        *w /= total;
    }
    let n = side * side;
    Ok(LinearOperator { kind: Kind::Blur { side, kernel, band }, rows: n, cols: n })
}

/// Convolve each column then each row of the column-major image with the
/// symmetric 1-D kernel.
fn blur_apply(x: &[f64], side: usize, kernel: &[f64], band: usize) -> Vec<f64> {
    let b = band as i64;
    let s = side as i64;
    let mut tmp = vec![0.0; x.len()];
    // Along columns: pixels (i, j) and (i + d, j) are `side`-strided
    // neighbours in column-major layout... index = i + j * side.
    for j in 0..s {
        for i in 0..s {
            let mut acc = 0.0;
            let lo = (-b).max(-i);
            let hi = b.min(s - 1 - i);
            for d in lo..=hi {
                acc += kernel[(d + b) as usize] * x[((i + d) + j * s) as usize];
            }
            tmp[(i + j * s) as usize] = acc;
        }
    }
    let mut out = vec![0.0; x.len()];
    for i in 0..s {
        for j in 0..s {
            let mut acc = 0.0;
            let lo = (-b).max(-j);
            let hi = b.min(s - 1 - j);
            for d in lo..=hi {
                acc += kernel[(d + b) as usize] * tmp[(i + (j + d) * s) as usize];
            }
            out[(i + j * s) as usize] = acc;
        }
    }
    out
}

/// Intersection lengths of one ray with the unit pixels of a `side x side`
/// square centered at the origin. `point` is any point on the ray and
/// `dir` its direction (need not be normalized; lengths are geometric).
/// Returns `(flat column-major pixel index, chord length)` pairs.
pub fn ray_pixel_intersections(
    side: usize,
    point: (f64, f64),
    dir: (f64, f64),
) -> Vec<(usize, f64)> {
    let half = side as f64 / 2.0;
    let norm = (dir.0 * dir.0 + dir.1 * dir.1).sqrt();
    if norm == 0.0 {
        return Vec::new();
    }
    let d = (dir.0 / norm, dir.1 / norm);
    let p = point;

    // Clip the ray to the image square.
    let mut tmin = f64::NEG_INFINITY;
    let mut tmax = f64::INFINITY;
    for (pc, dc) in [(p.0, d.0), (p.1, d.1)] {
        if dc.abs() < 1e-14 {
            if pc <= -half || pc >= half {
                return Vec::new();
            }
        } else {
            let t0 = (-half - pc) / dc;
            let t1 = (half - pc) / dc;
            tmin = tmin.max(t0.min(t1));
            tmax = tmax.min(t0.max(t1));
        }
    }
    if tmax - tmin < 1e-14 {
        return Vec::new();
    }

    // Parameters of every gridline crossing inside the clip window.
    let mut ts = vec![tmin, tmax];
    for (pc, dc) in [(p.0, d.0), (p.1, d.1)] {
        if dc.abs() < 1e-14 {
            continue;
        }
        for k in 1..side {
            let c = -half + k as f64;
            let t = (c - pc) / dc;
            if t > tmin && t < tmax {
                ts.push(t);
            }
        }
    }
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut out: Vec<(usize, f64)> = Vec::new();
    for w in ts.windows(2) {
        let len = w[1] - w[0];
        if len < 1e-12 {
            continue;
        }
        let tm = 0.5 * (w[0] + w[1]);
        let x = p.0 + tm * d.0;
        let y = p.1 + tm * d.1;
        let col = ((x + half).floor() as i64).clamp(0, side as i64 - 1) as usize;
        let row = ((half - y).floor() as i64).clamp(0, side as i64 - 1) as usize;
        let idx = row + col * side;
        match out.last_mut() {
            Some(last) if last.0 == idx => last.1 += len,
            _ => out.push((idx, len)),
        }
    }
    out
}

/// Parallel-beam tomography matrix plus a piecewise-constant phantom.
///
/// Angles are equally spaced over `[0, 180)` degrees; for each angle,
/// `n_detectors` parallel rays span the image diagonal. Row `a * n_detectors + i`
/// holds the pixel intersection lengths of detector `i` at angle `a`.
/// The phantom is an ellipse arrangement with values in `[0, 1]`; `seed`
/// jitters the ellipse geometry reproducibly.
pub fn make_tomography(
    side: usize,
    n_angles: usize,
    n_detectors: usize,
    seed: u64,
) -> Result<(LinearOperator, Vec<f64>)> {
    if side == 0 || n_angles == 0 || n_detectors == 0 {
        return Err(Error::InvalidOperator(
            "side, n_angles and n_detectors must all be positive".into(),
        ));
    }
    let diag = side as f64 * std::f64::consts::SQRT_2;
    let spacing = diag / n_detectors as f64;
    let mut rows = Vec::with_capacity(n_angles * n_detectors);
    for a in 0..n_angles {
        let theta = a as f64 * std::f64::consts::PI / n_angles as f64;
        let dir = (theta.cos(), theta.sin());
        let normal = (-theta.sin(), theta.cos());
        for i in 0..n_detectors {
            let t = (i as f64 + 0.5) * spacing - diag / 2.0;
            let point = (t * normal.0, t * normal.1);
            rows.push(ray_pixel_intersections(side, point, dir));
        }
    }
    let csr = Csr::from_rows(rows, side * side);
    let op = LinearOperator {
        rows: n_angles * n_detectors,
        cols: side * side,
        kind: Kind::Tomography(csr),
    };
    Ok((op, make_phantom(side, seed)))
}

/// Default detector count: one detector per pixel width along the
/// diagonal, `round(side * sqrt(2))`.
pub fn default_detector_count(side: usize) -> usize {
    (side as f64 * std::f64::consts::SQRT_2).round() as usize
}

struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    angle: f64,
    value: f64,
}

/// Head-phantom style ellipse arrangement on the normalized square
/// `[-1, 1]^2`, rasterized at pixel centers, clamped to `[0, 1]`.
fn make_phantom(side: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x70_6861_6e74_6f6d);
    let mut jit = |scale: f64| rng.gen_range(-scale..=scale);
    let ellipses = [
        Ellipse { cx: 0.0, cy: 0.0, a: 0.85, b: 0.92, angle: 0.0, value: 1.0 },
        Ellipse { cx: 0.0, cy: -0.02, a: 0.66, b: 0.76, angle: 0.0, value: -0.6 },
        Ellipse { cx: -0.25, cy: 0.18, a: 0.16, b: 0.32, angle: 0.3, value: 0.3 },
        Ellipse { cx: 0.26, cy: 0.16, a: 0.14, b: 0.30, angle: -0.3, value: 0.25 },
        Ellipse { cx: 0.0, cy: -0.42, a: 0.10, b: 0.10, angle: 0.0, value: 0.4 },
    ];
    let jittered: Vec<Ellipse> = ellipses
        .iter()
        .map(|e| Ellipse {
            cx: e.cx + jit(0.03),
            cy: e.cy + jit(0.03),
            a: e.a * (1.0 + jit(0.05)),
            b: e.b * (1.0 + jit(0.05)),
            angle: e.angle + jit(0.05),
            value: e.value,
        })
        .collect();

    let half = side as f64 / 2.0;
    let mut img = vec![0.0; side * side];
    for col in 0..side {
        for row in 0..side {
            let x = (col as f64 + 0.5 - half) / half;
            let y = (half - (row as f64 + 0.5)) / half;
            let mut v = 0.0;
            for e in &jittered {
                let (s, c) = e.angle.sin_cos();
                let xr = c * (x - e.cx) + s * (y - e.cy);
                let yr = -s * (x - e.cx) + c * (y - e.cy);
                if (xr / e.a).powi(2) + (yr / e.b).powi(2) <= 1.0 {
                    v += e.value;
                }
            }
            img[row + col * side] = v.clamp(0.0, 1.0);
        }
    }
    img
}
