//! Executes configured runs and writes their artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rayon::prelude::*;
use smoothreg::baselines::{cgls, landweber, tikhonov_identity};
use smoothreg::descent::{run_descent, RunReport, StoppingReason, StoppingRule};
use smoothreg::problems::{
    dump_problem, make_deblur_problem, make_numdiff_problem, make_tomo_problem, unflatten_image,
    write_pgm, write_vector_csv, ImageSource, ProblemInstance,
};
use smoothreg::smoothing::smooth_data;
use smoothreg::Objective;

use crate::config::{MethodSpec, ProblemSpec, RunConfig};

pub struct Outcome {
    pub psi: Vec<f64>,
    pub report: RunReport,
    pub delta: f64,
    pub rows: usize,
    pub cols: usize,
    pub side: Option<usize>,
    pub sparsity: Option<usize>,
}

pub fn build_instance(
    spec: ProblemSpec,
    noise: f64,
    seed: u64,
    image: &Option<PathBuf>,
) -> anyhow::Result<ProblemInstance> {
    Ok(match spec {
        ProblemSpec::Numdiff { case, n } => make_numdiff_problem(case, n, noise, seed)?,
        ProblemSpec::Deblur { side, sigma } => {
            let source = match image {
                Some(path) => ImageSource::FromFile(path.clone()),
                None => ImageSource::Builtin,
            };
            make_deblur_problem(side, sigma, noise, seed, &source)?
        }
        ProblemSpec::Tomo { side, angles, detectors } => {
            make_tomo_problem(side, angles, detectors, noise, seed)?
        }
    })
}

/// Runs one configured solve. Constraint, mode and the mesh multiplier
/// apply to the `ours:*` methods; the baselines ignore them.
pub fn execute(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let resolved = cfg.resolve().map_err(anyhow::Error::msg)?;
    let inst = build_instance(resolved.problem, cfg.noise, cfg.seed, &cfg.image)?;
    let delta_stop = if cfg.no_stop { 0.0 } else { inst.delta };
    let stop = StoppingRule::new(delta_stop, cfg.tau, cfg.max_iter)?;
    let truth = Some(inst.phi_true.as_slice());
    let (psi, report) = match resolved.method {
        MethodSpec::Ours(kind) => {
            let grid = if cfg.dx_mult == 1.0 {
                inst.grid.clone()
            } else {
                inst.grid.clone().with_dx_int(inst.grid.dx_int() * cfg.dx_mult)?
            };
            let data = smooth_data(&inst.g_noisy, &grid)?;
            let obj = Objective::new(inst.op.clone(), data, resolved.mode, resolved.constraint)?;
            let psi0 = vec![0.0; inst.op.cols()];
            run_descent(&obj, kind, &stop, &psi0, truth)?
        }
        MethodSpec::Landweber => landweber(&inst.op, &inst.g_noisy, &stop, None, truth)?,
        MethodSpec::Cgls => cgls(&inst.op, &inst.g_noisy, &stop, truth)?,
        MethodSpec::Tikhonov => {
            let (psi, report, _lambda) =
                tikhonov_identity(&inst.op, &inst.g_noisy, &stop, None, truth)?;
            (psi, report)
        }
    };
    let sparsity = (resolved.method.is_ours() && cfg.nonneg)
        .then(|| psi.iter().filter(|v| **v == 0.0).count());
    Ok(Outcome {
        psi,
        report,
        delta: inst.delta,
        rows: inst.op.rows(),
        cols: inst.op.cols(),
        side: resolved.problem.image_side(),
        sparsity,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

pub fn write_history(path: &Path, report: &RunReport) -> anyhow::Result<()> {
    let mut text = String::from("iter,g_value,residual,rel_error,step\n");
    for rec in &report.history {
        text.push_str(&format!(
            "{},{:.16e},{:.16e},{},{:.16e}\n",
            rec.iter,
            rec.g_value,
            rec.residual_norm,
            fmt_opt(rec.rel_error),
            rec.step,
        ));
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_run_artifacts(dir: &Path, cfg: &RunConfig, out: &Outcome) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_history(&dir.join("history.csv"), &out.report)?;
    match out.side {
        Some(side) => write_pgm(&dir.join("solution.pgm"), &unflatten_image(&out.psi, side)?)?,
        None => write_vector_csv(&dir.join("solution.csv"), &out.psi)?,
    }
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(cfg)? + "\n")?;
    let report = serde_json::json!({
        "config": cfg,
        "rows": out.rows,
        "cols": out.cols,
        "delta": out.delta,
        "stopping": out.report.reason,
        "iterations": out.report.iterations,
        "final_g": out.report.final_g,
        "final_residual": out.report.final_residual,
        "final_rel_error": out.report.final_rel_error,
        "sparsity": out.sparsity,
    });
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(())
}

pub fn cmd_run(cfg: &RunConfig) -> anyhow::Result<i32> {
    let out = execute(cfg)?;
    write_run_artifacts(&cfg.out, cfg, &out)?;
    let rel = out
        .report
        .final_rel_error
        .map(|e| format!("{e:.4}"))
        .unwrap_or_else(|| "n/a".into());
    println!(
        "{} | {} | seed {} | {:?} after {} iterations | rel_error {} | artifacts in {}",
        cfg.problem,
        cfg.method,
        cfg.seed,
        out.report.reason,
        out.report.iterations,
        rel,
        cfg.out.display(),
    );
    Ok(match out.report.reason {
        StoppingReason::Discrepancy => 0,
        StoppingReason::MaxIter | StoppingReason::StalledStep => 2,
    })
}

fn stats(values: &[f64]) -> (String, String, String) {
    if values.is_empty() {
        return (String::new(), String::new(), String::new());
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (format!("{mean:.16e}"), format!("{min:.16e}"), format!("{max:.16e}"))
}

/// Cross product of problems and methods, each aggregated over the seeds
/// into one row of `table.csv`. A failing run marks its row `failed` and
/// the remaining rows still execute.
pub fn cmd_compare(
    base: &RunConfig,
    problems: &[String],
    methods: &[String],
    seeds: &[u64],
) -> anyhow::Result<i32> {
    if problems.is_empty() || methods.is_empty() || seeds.is_empty() {
        bail!("need at least one problem, one method and one seed");
    }
    for p in problems {
        p.parse::<ProblemSpec>().map_err(anyhow::Error::msg)?;
    }
    for m in methods {
        m.parse::<MethodSpec>().map_err(anyhow::Error::msg)?;
    }
    let jobs: Vec<(String, String)> = problems
        .iter()
        .flat_map(|p| methods.iter().map(move |m| (p.clone(), m.clone())))
        .collect();
    let rows: Vec<String> = jobs
        .par_iter()
        .map(|(problem, method)| {
            let mut rels = Vec::new();
            let mut zeros = Vec::new();
            for &seed in seeds {
                let cfg = RunConfig {
                    problem: problem.clone(),
                    method: method.clone(),
                    seed,
                    ..base.clone()
                };
                match execute(&cfg) {
                    Ok(out) => {
                        rels.extend(out.report.final_rel_error);
                        zeros.extend(out.sparsity.map(|s| s as f64));
                    }
                    Err(err) => {
                        eprintln!("{problem} | {method} | seed {seed}: {err:#}");
                        return format!("{problem},{method},failed,{},,,,\n", seeds.len());
                    }
                }
            }
            let (mean, min, max) = stats(&rels);
            let (zmean, _, _) = stats(&zeros);
            format!("{problem},{method},ok,{},{mean},{min},{max},{zmean}\n", seeds.len())
        })
        .collect();
    fs::create_dir_all(&base.out).with_context(|| format!("creating {}", base.out.display()))?;
    let header = "problem,method,status,seeds,mean_rel_error,min_rel_error,max_rel_error,mean_sparsity\n";
    let path = base.out.join("table.csv");
    fs::write(&path, header.to_string() + &rows.concat())?;
    println!("wrote {}", path.display());
    Ok(0)
}

/// Reruns one configuration with the smoothing quadrature mesh scaled by
/// each multiplier, keeping everything else (operator, data, noise draw)
/// fixed. Per-multiplier artifacts land in `mult-<m>/`; `summary.csv`
/// collects the error minima so the saturation trend can be plotted.
pub fn cmd_sweep_dx(base: &RunConfig, multipliers: &[f64]) -> anyhow::Result<i32> {
    if multipliers.is_empty() {
        bail!("need at least one multiplier");
    }
    for &m in multipliers {
        if !(m > 0.0 && m.is_finite()) {
            bail!("dx multiplier must be positive and finite, got {m}");
        }
    }
    let method: MethodSpec = base.method.parse().map_err(anyhow::Error::msg)?;
    if !method.is_ours() {
        bail!("sweep-dx varies the smoothing quadrature mesh, which baselines do not use");
    }
    let results: Vec<(f64, Outcome)> = multipliers
        .par_iter()
        .map(|&m| -> anyhow::Result<(f64, Outcome)> {
            let cfg = RunConfig {
                dx_mult: base.dx_mult * m,
                out: base.out.join(format!("mult-{m}")),
                ..base.clone()
            };
            let out = execute(&cfg)?;
            write_run_artifacts(&cfg.out, &cfg, &out)?;
            Ok((m, out))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut text =
        String::from("multiplier,min_rel_error,argmin_iter,final_rel_error,iterations,stopping\n");
    for (m, out) in &results {
        let (min, argmin) = out
            .report
            .history
            .iter()
            .filter_map(|r| r.rel_error.map(|e| (e, r.iter)))
            .fold((f64::INFINITY, 0), |best, (e, i)| if e < best.0 { (e, i) } else { best });
        text.push_str(&format!(
            "{m},{:.16e},{argmin},{},{},{:?}\n",
            min,
            fmt_opt(out.report.final_rel_error),
            out.report.iterations,
            out.report.reason,
        ));
    }
    let path = base.out.join("summary.csv");
    fs::write(&path, text)?;
    println!("wrote {}", path.display());
    Ok(0)
}

pub fn cmd_dump_problem(
    problem: &str,
    noise: f64,
    seed: u64,
    image: &Option<PathBuf>,
    out: &Path,
) -> anyhow::Result<i32> {
    let spec: ProblemSpec = problem.parse().map_err(anyhow::Error::msg)?;
    let inst = build_instance(spec, noise, seed, image)?;
    dump_problem(&inst, out)?;
    println!("wrote problem artifacts to {}", out.display());
    Ok(0)
}
