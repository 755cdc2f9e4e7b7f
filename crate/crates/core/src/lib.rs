//! Numerical laboratory for the two-phase penalized thin obstacle problem
//! on a half-box: energy minimization, frequency functionals, blow-ups,
//! free-boundary classification and theorem audits.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod audits;
pub mod banded;
pub mod blowup;
pub mod config;
pub mod error;
pub mod expr;
pub mod field;
pub mod freeboundary;
pub mod functionals;
pub mod grid;
pub mod solver;

pub use config::ProblemConfig;
pub use error::{Error, Result};
pub use expr::{parse_expr, BoundaryExpr};
pub use field::{Field, Sampler};
pub use grid::{build_grid, HalfGrid, NodeClass};
pub use solver::{
    discrete_energy, energy_gradient, solve, solve_with_zero_at, Calibrated, InitialGuess, Method,
    SolveOptions, SolveReport,
};
pub use blowup::{fit_blowup, make_basis, rescale, BlowupFit, HomPoly, Normalization, RescaledField};
pub use freeboundary::{c11_probe, classify, trace_zero_set, FreeBoundaryPoint, PointClass};
pub use functionals::{
    frequency_limit, geometric_radii, monneau, radial_profile, weiss, FrequencyEstimate,
    FunctionalProfile, ProfileRow, QuadratureSpec,
};
pub use audits::{run_audit, run_suite, AuditCase, AuditKind, AuditReport, AuditSetup, Instance, SuiteOptions, Tolerances};
