//! Convex and rank-one solvers for the coefficient design.

pub mod beam;
pub mod cone;
pub mod dense;
pub mod init;
pub mod ipm;
pub mod rank_one;

pub use beam::BeamProgram;
pub use cone::{CMat, ConeVec, Scaling};
pub use ipm::{ConeProgram, IpmSettings, IpmSolution, IpmStatus};
pub use rank_one::{
    compose_ura, eig_step, run, update_penalty, CoefficientSet, ConstraintViolations, EigStep,
    Init, InnerSolution, IterationRecord, PenaltyParams, SolveReport, Termination, UlaProblem,
};
