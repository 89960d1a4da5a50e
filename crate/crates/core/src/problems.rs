//! Benchmark problem generators: numerical differentiation of noisy
//! data, image deblurring, and a small parallel-beam tomography setup.
//! All randomness is seeded; instances are reproducible byte-for-byte.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::norm;
use crate::operator::{make_gaussian_blur, make_tomography, make_volterra, LinearOperator};

/// Artificial integration step used when flattening 2-D images.
pub const DEFAULT_IMAGE_DX: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumdiffCase {
    G1,
    G2,
}

#[derive(Debug, Clone)]
pub enum ImageSource {
    Builtin,
    FromFile(PathBuf),
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemMeta {
    pub name: String,
    pub seed: u64,
    pub noise_level: f64,
}

/// A generated inverse problem: operator, data grid, ground truth, exact
/// and noisy right-hand sides, and the exact noise norm `delta`.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub op: LinearOperator,
    pub grid: Grid,
    pub phi_true: Vec<f64>,
    pub g_exact: Vec<f64>,
    pub g_noisy: Vec<f64>,
    pub delta: f64,
    pub meta: ProblemMeta,
}

/// Adds zero-mean Gaussian noise rescaled so the relative error level is
/// hit exactly; returns the noisy vector and `delta = rel_level * |g|`.
pub fn add_noise(g: &[f64], rel_level: f64, seed: u64) -> Result<(Vec<f64>, f64)> {
    if !(rel_level >= 0.0 && rel_level.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise level {rel_level}")));
    }
    if rel_level == 0.0 {
        return Ok((g.to_vec(), 0.0));
    }
    let g_norm = norm(g);
    if g_norm == 0.0 {
        return Err(Error::ZeroData);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e: Vec<f64> = (0..g.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let e_norm = norm(&e);
    if e_norm == 0.0 {
        return Err(Error::InvalidParameter("degenerate noise sample".into()));
    }
    let delta = rel_level * g_norm;
    let scale = delta / e_norm;
    for v in e.iter_mut() {
        *v *= scale;
    }
    let g_noisy: Vec<f64> = g.iter().zip(&e).map(|(a, b)| a + b).collect();
    Ok((g_noisy, delta))
}

/// Differentiation of noisy data on `[-1, 1]`: recover `phi = g'` from
/// cumulative integrals of `g1(x) = x^3/3 - x` or `g2(x) = x^3/3 - x/2`.
/// The right-hand side is sampled analytically as `g(x) - g(-1)`.
pub fn make_numdiff_problem(
    which: NumdiffCase,
    n: usize,
    rel_level: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    if n < 10 {
        return Err(Error::InvalidParameter(format!("numdiff needs n >= 10, got {n}")));
    }
    let grid = Grid::new(-1.0, 1.0, n)?;
    let op = make_volterra(&grid);
    let (phi_true, g_exact, name) = match which {
        NumdiffCase::G1 => (
            grid.sample(|x| x * x - 1.0),
            grid.sample(|x| x * x * x / 3.0 - x - 2.0 / 3.0),
            "numdiff-g1",
        ),
        NumdiffCase::G2 => (
            grid.sample(|x| x * x - 0.5),
            grid.sample(|x| x * x * x / 3.0 - x / 2.0 - 1.0 / 6.0),
            "numdiff-g2",
        ),
    };
    let (g_noisy, delta) = add_noise(&g_exact, rel_level, seed)?;
    Ok(ProblemInstance {
        op,
        grid,
        phi_true,
        g_exact,
        g_noisy,
        delta,
        meta: ProblemMeta { name: name.into(), seed, noise_level: rel_level },
    })
}

/// Piecewise-constant synthetic scene in `[0, 1]`: two blocks, a disk,
/// and a bar, all kept away from the image border so that blur mass
/// stays inside the frame.
pub fn builtin_scene(side: usize) -> Vec<Vec<f64>> {
    let mut img = vec![vec![0.0; side]; side];
    for (r, row) in img.iter_mut().enumerate() {
        let y = (r as f64 + 0.5) / side as f64;
        for (c, px) in row.iter_mut().enumerate() {
            let x = (c as f64 + 0.5) / side as f64;
            if (0.22..=0.44).contains(&x) && (0.25..=0.55).contains(&y) {
                *px = 0.9;
            }
            if (0.52..=0.78).contains(&x) && (0.28..=0.44).contains(&y) {
                *px = 0.5;
            }
            let (dx, dy) = (x - 0.62, y - 0.62);
            if dx * dx + dy * dy <= 0.13 * 0.13 {
                *px = 1.0;
            }
            if (0.24..=0.72).contains(&x) && (0.68..=0.76).contains(&y) {
                *px = 0.35;
            }
        }
    }
    img
}

/// Gaussian deblurring of a square image, flattened column-major. A file
/// image must be square PGM and match the requested side.
pub fn make_deblur_problem(
    side: usize,
    sigma: f64,
    rel_level: f64,
    seed: u64,
    image: &ImageSource,
) -> Result<ProblemInstance> {
    if side < 8 {
        return Err(Error::InvalidParameter(format!("deblur needs side >= 8, got {side}")));
    }
    let img = match image {
        ImageSource::Builtin => builtin_scene(side),
        ImageSource::FromFile(path) => {
            let img = read_pgm(path)?;
            if img.len() != side {
                return Err(Error::DimensionMismatch { expected: side, actual: img.len() });
            }
            img
        }
    };
    let op = make_gaussian_blur(side, sigma, None)?;
    let phi_true = flatten_image(&img)?;
    let g_exact = op.apply(&phi_true)?;
    let (g_noisy, delta) = add_noise(&g_exact, rel_level, seed)?;
    let grid = Grid::artificial(op.rows(), DEFAULT_IMAGE_DX)?;
    Ok(ProblemInstance {
        op,
        grid,
        phi_true,
        g_exact,
        g_noisy,
        delta,
        meta: ProblemMeta { name: "deblur".into(), seed, noise_level: rel_level },
    })
}

/// Parallel-beam tomography of a seeded ellipse phantom.
pub fn make_tomo_problem(
    side: usize,
    n_angles: usize,
    n_detectors: usize,
    rel_level: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    if side < 8 {
        return Err(Error::InvalidParameter(format!("tomo needs side >= 8, got {side}")));
    }
    let (op, phi_true) = make_tomography(side, n_angles, n_detectors, seed)?;
    let g_exact = op.apply(&phi_true)?;
    let (g_noisy, delta) = add_noise(&g_exact, rel_level, seed)?;
    let grid = Grid::artificial(op.rows(), DEFAULT_IMAGE_DX)?;
    Ok(ProblemInstance {
        op,
        grid,
        phi_true,
        g_exact,
        g_noisy,
        delta,
        meta: ProblemMeta { name: "tomo".into(), seed, noise_level: rel_level },
    })
}

/// Column-major flattening of a square image: `out[r + c*side] = img[r][c]`.
pub fn flatten_image(img: &[Vec<f64>]) -> Result<Vec<f64>> {
    let side = img.len();
    for row in img {
        if row.len() != side {
            return Err(Error::DimensionMismatch { expected: side, actual: row.len() });
        }
    }
    let mut out = vec![0.0; side * side];
    for (r, row) in img.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            out[r + c * side] = *v;
        }
    }
    Ok(out)
}

/// Inverse of [`flatten_image`].
pub fn unflatten_image(v: &[f64], side: usize) -> Result<Vec<Vec<f64>>> {
    if v.len() != side * side {
        return Err(Error::DimensionMismatch { expected: side * side, actual: v.len() });
    }
    let mut img = vec![vec![0.0; side]; side];
    for c in 0..side {
        for r in 0..side {
            img[r][c] = v[r + c * side];
        }
    }
    Ok(img)
}

/// Reads a plain (P2) PGM image and scales it to `[0, 1]`. Only square
/// images are accepted.
pub fn read_pgm(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let shown = path.display().to_string();
    let parse_err = |msg: &str| Error::Parse { path: shown.clone(), msg: msg.into() };
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split_whitespace())
        .map(str::to_owned)
        .collect::<Vec<_>>()
        .into_iter();
    if tokens.next().as_deref() != Some("P2") {
        return Err(parse_err("not a plain PGM (P2) file"));
    }
    let mut next_num = |what: &str| -> Result<u64> {
        tokens
            .next()
            .ok_or_else(|| parse_err(&format!("missing {what}")))?
            .parse::<u64>()
            .map_err(|_| parse_err(&format!("bad {what}")))
    };
    let width = next_num("width")? as usize;
    let height = next_num("height")? as usize;
    let maxval = next_num("maxval")?;
    if width != height {
        return Err(parse_err(&format!("image is {width}x{height}, need square")));
    }
    if maxval == 0 {
        return Err(parse_err("maxval is zero"));
    }
    let mut img = vec![vec![0.0; width]; height];
    for row in img.iter_mut() {
        for px in row.iter_mut() {
            *px = next_num("pixel")? as f64 / maxval as f64;
        }
    }
    if tokens.next().is_some() {
        return Err(parse_err("trailing data after pixels"));
    }
    Ok(img)
}

/// Writes an image as plain PGM, clamping values to `[0, 1]` and
/// quantizing to 255 gray levels.
pub fn write_pgm(path: &Path, img: &[Vec<f64>]) -> Result<()> {
    let side = img.len();
    for row in img {
        if row.len() != side {
            return Err(Error::DimensionMismatch { expected: side, actual: row.len() });
        }
    }
    let mut out = String::new();
    out.push_str(&format!("P2\n{side} {side}\n255\n"));
    for row in img {
        let line: Vec<String> = row
            .iter()
            .map(|v| format!("{}", (v.clamp(0.0, 1.0) * 255.0).round() as u32))
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes one value per line in full-precision scientific notation, so
/// the CSV round-trips to identical floats.
pub fn write_vector_csv(path: &Path, v: &[f64]) -> Result<()> {
    let mut out = String::with_capacity(v.len() * 24);
    for x in v {
        out.push_str(&format!("{x:.16e}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_vector_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let shown = path.display().to_string();
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim().parse::<f64>().map_err(|e| Error::Parse {
                path: shown.clone(),
                msg: format!("bad float {l:?}: {e}"),
            })
        })
        .collect()
}

/// Dumps a problem instance into a directory: truth and data vectors as
/// CSV, the operator as dense CSV or sparse COO triplets, and a JSON
/// metadata file.
pub fn dump_problem(inst: &ProblemInstance, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_vector_csv(&dir.join("phi_true.csv"), &inst.phi_true)?;
    write_vector_csv(&dir.join("g_exact.csv"), &inst.g_exact)?;
    write_vector_csv(&dir.join("g_noisy.csv"), &inst.g_noisy)?;
    if let Some(triplets) = inst.op.coo_triplets() {
        let mut f = fs::File::create(dir.join("operator_coo.csv"))?;
        writeln!(f, "row,col,value")?;
        for (r, c, v) in triplets {
            writeln!(f, "{r},{c},{v:.16e}")?;
        }
    } else {
        let dense = inst.op.to_dense();
        let mut out = String::new();
        for i in 0..dense.nrows() {
            let line: Vec<String> = (0..dense.ncols()).map(|j| format!("{:.16e}", dense[(i, j)])).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        fs::write(dir.join("operator_dense.csv"), out)?;
    }
    let meta = serde_json::json!({
        "name": inst.meta.name,
        "seed": inst.meta.seed,
        "noise_level": inst.meta.noise_level,
        "delta": inst.delta,
        "rows": inst.op.rows(),
        "cols": inst.op.cols(),
        "operator": inst.op.kind_name(),
        "grid": {
            "a": inst.grid.a(),
            "b": inst.grid.b(),
            "n": inst.grid.n(),
            "dx_int": inst.grid.dx_int(),
        },
    });
    let text = serde_json::to_string_pretty(&meta).expect("plain json value");
    fs::write(dir.join("meta.json"), text + "\n")?;
    Ok(())
}
