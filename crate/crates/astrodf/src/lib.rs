//! Derivative-free trust-region optimization for Monte Carlo oracles.
//!
//! This crate implements an ASTRO-DF style solver: a trust-region method that
//! never sees gradients of the objective, only noisy replicates `F_j(x)` with
//! `f(x) = E[F(x)]`. Each iteration builds a stochastic linear or quadratic
//! interpolation model on a poised point set, certifies its geometry, solves
//! the trust-region subproblem with a guaranteed fraction of Cauchy decrease,
//! and accepts or rejects the candidate from a noisy success ratio. All sample
//! sizes are stopping times driven by the rule "replicate until the estimated
//! standard error falls below a multiple of the squared trust-region radius".
//!
//! The crate is `no_std` (with `alloc`); everything that touches files or
//! threads lives in the companion CLI crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod geometry;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod sampling;
pub mod solver;
pub mod subproblem;

pub use geometry::{
    default_poised_set, interpolation_matrix, lagrange_polynomials, poisedness_constant, Ball,
    BasisKind, GeometryError, InterpolationSet, LagrangeSet, PolynomialBasis,
};
pub use model::{error_bound_report, LocalModel, ModelDiagnostics};
pub use oracle::{
    builtin_names, builtin_problem, noisy_quadratic, noisy_rosenbrock, noisy_sphere, NoiseFamily,
    NoiseModel, Oracle, OracleError, Point, ReplicationStats, RngStream, TestProblem,
};
pub use sampling::{
    calibrate_stopping, sample_to_stopping, CalibrationRow, LambdaSchedule, SampleGrowth,
    SamplingOutcome, SamplingRule,
};
pub use solver::{
    run, ConfigError, IterationRecord, RunResult, Solver, SolverConfig, SolverError,
    TerminationReason,
};
pub use subproblem::{cauchy_step, check_cauchy, solve_subproblem, Step};
