//! Parallel extragradient-proximal solver for split equilibrium problems.
//!
//! The problem: find a common equilibrium point of N bifunctions on a set C
//! whose image under a linear operator A is a common equilibrium point of M
//! monotone bifunctions on a set Q. Source-side subproblems are handled by
//! an extragradient double-prox sweep, image-side ones by resolvents, and the
//! two are coupled through an adjoint correction step.

pub mod bifunction;
pub mod config;
pub mod error;
pub mod instances;
pub mod linalg;
pub mod point;
pub mod problem;
pub mod prox;
pub mod sets;
pub mod solver;

pub use bifunction::{Bifunction, BifunctionClass};
pub use config::{validate_config, RSchedule, SolverConfig, ValidationReport};
pub use error::{Error, Result};
pub use instances::{
    brute_force_ep, generate_instance, load_problem, save_problem, verify_certificate,
    AffineVIBifunction, BilinearBifunction, CertificateReport, DifferenceBifunction,
    InstanceBundle,
};
pub use linalg::{operator_norm, Matrix, NormEstimate};
pub use point::Point;
pub use problem::SplitProblem;
pub use prox::{
    check_firmly_nonexpansive, check_resolvent_continuity, prox_step, resolvent, ProxResult,
};
pub use sets::{ConvexSet, Halfspace};
pub use solver::{
    algorithm1_step, algorithm2_step, extragradient_sweep, residual, resolvent_sweep, solve,
    solve_with, Algorithm, HybridState, Solution, SolveOptions, SolveStatus, SolverState, Trace,
    TraceRow,
};
