//! Receding-horizon control on the learned latent dynamics via a condensed
//! box-constrained quadratic program, plus the proportional-feedback
//! comparison controller.

mod qp;
mod runs;

pub use qp::{condense_qp, largest_eigenvalue, solve_box_qp, QpProblem, QpSolution};
pub use runs::{
    correlation, moving_average, mpc_step, run_mpc_loop, run_pcontrol_loop, InputPenalty,
    MpcConfig, MpcRun, MpcStep, PControlConfig, RunError, RunLog, RunLogRow,
};
