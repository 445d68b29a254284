//! Lanczos-type solvers for nonsymmetric linear systems and a switching
//! framework that hands the current iterate from one algorithm to another
//! instead of stopping at a breakdown.

pub mod cli;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod problems;
pub mod solvers;
pub mod switching;

pub use error::{Error, Result};
pub use linalg::{combine, dot, matvec, matvec_t, norm2, CsrMatrix, Scalar, Vector};
pub use problems::{
    direct_solve_oracle, gen_baheux, read_matrix_market, BaheuxSpec, ProblemInstance,
};
pub use solvers::{init, run, AlgoId, Breakdown, SolverConfig, SolverState, StepOutcome};
pub use switching::{
    run_switching, SelectionPolicy, Strategy, SwitchPlan, SwitchResult, SwitchTrace,
};
