//! Benchmark fixtures shared by the criterion targets.

use thinpen_core::{solve, Field, ProblemConfig, SolveOptions};

/// The singular-point instance at spacing `h`, calibrated so `u(0) = 0`.
pub fn singular_instance(h: f64) -> (ProblemConfig, Field) {
    let cfg = ProblemConfig::new_2d(2.0, 1.0, 1.0, h, "x1^2").unwrap();
    let cal = thinpen_core::solve_with_zero_at(&cfg, &[0.0, 0.0], &SolveOptions::default()).unwrap();
    (cal.config, cal.field)
}

/// The one-sided instance with a regular free-boundary point.
pub fn regular_instance(h: f64) -> ProblemConfig {
    ProblemConfig::new_2d(2.0, 1.0, 0.0, h, "x1 - 0.1").unwrap()
}

pub fn solved(cfg: &ProblemConfig, opts: &SolveOptions) -> Field {
    solve(cfg, opts).unwrap().0
}
