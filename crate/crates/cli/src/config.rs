//! Problem and method specifications as typed values, plus the
//! serializable run configuration echoed into every output directory.

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use smoothreg::functional::{Constraint, Mode};
use smoothreg::gradient::{Bc, GradientKind};
use smoothreg::operator::default_detector_count;
use smoothreg::problems::NumdiffCase;

pub const METHOD_HELP: &str = "ours:l2, ours:h1[:BC], ours:conj-l2-l2, ours:conj-l2-h1[:BC] \
     with BC one of neumann, dirichlet, mixed-left, mixed-right (default neumann); \
     baseline:landweber, baseline:cgls, baseline:tikhonov";

pub const PROBLEM_HELP: &str =
    "numdiff:g1[:N], numdiff:g2[:N], deblur[:SIDE[:SIGMA]], tomo[:SIDE[:ANGLES[:DETECTORS]]]";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProblemSpec {
    Numdiff { case: NumdiffCase, n: usize },
    Deblur { side: usize, sigma: f64 },
    Tomo { side: usize, angles: usize, detectors: usize },
}

impl ProblemSpec {
    /// Side length for problems whose unknown is a square image.
    pub fn image_side(&self) -> Option<usize> {
        match *self {
            ProblemSpec::Numdiff { .. } => None,
            ProblemSpec::Deblur { side, .. } | ProblemSpec::Tomo { side, .. } => Some(side),
        }
    }
}

fn parse_or<T: FromStr>(tok: Option<&&str>, default: T, what: &str) -> Result<T, String> {
    match tok {
        None => Ok(default),
        Some(t) => t.parse().map_err(|_| format!("cannot parse {what} from {t:?}")),
    }
}

impl FromStr for ProblemSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let (spec, max_parts) = match parts[0] {
            "numdiff" => {
                let case = match parts.get(1).copied() {
                    Some("g1") => NumdiffCase::G1,
                    Some("g2") => NumdiffCase::G2,
                    _ => {
                        return Err(format!(
                            "unknown numdiff case in {s:?}; use numdiff:g1 or numdiff:g2"
                        ))
                    }
                };
                let n = parse_or(parts.get(2), 200, "grid size")?;
                (ProblemSpec::Numdiff { case, n }, 3)
            }
            "deblur" => {
                let side = parse_or(parts.get(1), 32, "side")?;
                let sigma = parse_or(parts.get(2), 3.0, "sigma")?;
                (ProblemSpec::Deblur { side, sigma }, 3)
            }
            "tomo" => {
                let side = parse_or(parts.get(1), 16, "side")?;
                let angles = parse_or(parts.get(2), 18, "angles")?;
                let detectors =
                    parse_or(parts.get(3), default_detector_count(side), "detectors")?;
                (ProblemSpec::Tomo { side, angles, detectors }, 4)
            }
            _ => return Err(format!("unknown problem {s:?}; valid problems: {PROBLEM_HELP}")),
        };
        if parts.len() > max_parts {
            return Err(format!("too many fields in problem spec {s:?}"));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodSpec {
    Ours(GradientKind),
    Landweber,
    Cgls,
    Tikhonov,
}

impl MethodSpec {
    pub fn is_ours(self) -> bool {
        matches!(self, MethodSpec::Ours(_))
    }
}

impl FromStr for MethodSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts[0] {
            "ours" => {
                let bc = match parts.get(2).copied() {
                    None | Some("neumann") => Bc::Neumann,
                    Some("dirichlet") => Bc::Dirichlet,
                    Some("mixed-left") => Bc::MixedLeft,
                    Some("mixed-right") => Bc::MixedRight,
                    Some(other) => {
                        return Err(format!(
                            "unknown boundary condition {other:?}; valid: neumann, dirichlet, \
                             mixed-left, mixed-right"
                        ))
                    }
                };
                let kind = match parts.get(1).copied() {
                    Some("l2") => GradientKind::L2,
                    Some("h1") => GradientKind::H1(bc),
                    Some("conj-l2-l2") => GradientKind::ConjugateL2L2,
                    Some("conj-l2-h1") => GradientKind::ConjugateL2H1(bc),
                    _ => return Err(format!("unknown method {s:?}; valid methods: {METHOD_HELP}")),
                };
                if parts.len() > 2 && !matches!(kind, GradientKind::H1(_) | GradientKind::ConjugateL2H1(_))
                {
                    return Err(format!("{:?} takes no boundary condition", parts[1]));
                }
                if parts.len() > 3 {
                    return Err(format!("too many fields in method spec {s:?}"));
                }
                Ok(MethodSpec::Ours(kind))
            }
            "baseline" => match (parts.get(1).copied(), parts.len()) {
                (Some("landweber"), 2) => Ok(MethodSpec::Landweber),
                (Some("cgls"), 2) => Ok(MethodSpec::Cgls),
                (Some("tikhonov"), 2) => Ok(MethodSpec::Tikhonov),
                _ => Err(format!(
                    "unknown baseline in {s:?}; valid: landweber, cgls, tikhonov"
                )),
            },
            _ => Err(format!("unknown method {s:?}; valid methods: {METHOD_HELP}")),
        }
    }
}

pub fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "full" => Ok(Mode::Full),
        "data-only" => Ok(Mode::DataOnly),
        "smooth-only" => Ok(Mode::SmoothOnly),
        _ => Err(format!("unknown mode {s:?}; valid: full, data-only, smooth-only")),
    }
}

/// One run as configured on the command line. Specs stay in their string
/// form so `config.json` round-trips byte-for-byte; they are parsed and
/// validated by [`RunConfig::resolve`] before any work starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: String,
    pub method: String,
    pub noise: f64,
    pub seed: u64,
    pub tau: f64,
    pub max_iter: usize,
    pub dx_mult: f64,
    pub mode: String,
    pub nonneg: bool,
    pub no_stop: bool,
    pub image: Option<PathBuf>,
    pub out: PathBuf,
}

pub struct Resolved {
    pub problem: ProblemSpec,
    pub method: MethodSpec,
    pub mode: Mode,
    pub constraint: Constraint,
}

impl RunConfig {
    pub fn resolve(&self) -> Result<Resolved, String> {
        let problem: ProblemSpec = self.problem.parse()?;
        let method: MethodSpec = self.method.parse()?;
        let mode = parse_mode(&self.mode)?;
        if !(self.dx_mult > 0.0 && self.dx_mult.is_finite()) {
            return Err(format!("dx multiplier must be positive and finite, got {}", self.dx_mult));
        }
        if self.image.is_some() && !matches!(problem, ProblemSpec::Deblur { .. }) {
            return Err("--image applies only to deblur problems".into());
        }
        let constraint = if self.nonneg { Constraint::NonNegative } else { Constraint::None };
        Ok(Resolved { problem, method, mode, constraint })
    }
}
