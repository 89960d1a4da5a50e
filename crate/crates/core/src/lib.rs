pub mod baselines;
pub mod descent;
pub mod error;
pub mod functional;
pub mod gradient;
pub mod grid;
pub mod linalg;
pub mod operator;
pub mod problems;
pub mod smoothing;

pub use descent::{run_descent, RunReport, StoppingReason, StoppingRule};
pub use error::{Error, Result};
pub use functional::{Constraint, Mode, Objective};
pub use gradient::{Bc, GradientKind};
pub use grid::Grid;
pub use operator::{
    default_detector_count, make_gaussian_blur, make_tomography, make_volterra, LinearOperator,
};
pub use problems::{
    add_noise, make_deblur_problem, make_numdiff_problem, make_tomo_problem, ImageSource,
    NumdiffCase, ProblemInstance,
};
pub use smoothing::{neg_lap_inv, smooth_data, u_prime_of, SmoothedData};
