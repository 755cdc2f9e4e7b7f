use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thinpen_core::*;

/// Dirichlet data on the boundary, uniform noise on free nodes.
pub fn random_field(cfg: &ProblemConfig, rng: &mut ChaCha8Rng) -> Field {
    let grid = Arc::new(build_grid(cfg).unwrap());
    let boundary = Field::with_dirichlet(grid.clone(), cfg).unwrap();
    let values = boundary
        .values()
        .iter()
        .enumerate()
        .map(|(k, &g)| {
            if grid.is_free(k) {
                rng.gen_range(-1.5..1.5)
            } else {
                g
            }
        })
        .collect();
    Field::from_values(grid, values).unwrap()
}

/// Relative gap between a central difference of `J` along a random free
/// direction and the analytic directional derivative.
pub fn fd_relative_error(cfg: &ProblemConfig, u: &Field, rng: &mut ChaCha8Rng) -> f64 {
    let grid = u.grid().clone();
    let grad = energy_gradient(u, cfg).unwrap();
    let w: Vec<f64> = (0..grid.len())
        .map(|k| if grid.is_free(k) { rng.gen_range(-1.0..1.0) } else { 0.0 })
        .collect();
    let eps = 1e-6 * u.max_abs();
    let shifted = |s: f64| {
        let v: Vec<f64> = u.values().iter().zip(&w).map(|(a, b)| a + s * b).collect();
        discrete_energy(&Field::from_values(grid.clone(), v).unwrap(), cfg).unwrap()
    };
    let fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
    let exact: f64 = grad.values().iter().zip(&w).map(|(a, b)| a * b).sum();
    (fd - exact).abs() / exact.abs().max(1e-300)
}

/// Max-norm distance to `exp(xn/2) cos(x1/2)` after solving at spacing `h`.
pub fn manufactured_error(h: f64) -> f64 {
    let cfg = ProblemConfig::new_2d(2.0, 0.5, 0.5, h, "exp(0.5*xn)*cos(0.5*x1)").unwrap();
    let (u, rep) = solve(&cfg, &SolveOptions::default()).unwrap();
    assert!(rep.converged);
    let grid = u.grid();
    (0..grid.len())
        .map(|k| {
            let x = grid.point(k);
            (u.values()[k] - (0.5 * x[1]).exp() * (0.5 * x[0]).cos()).abs()
        })
        .fold(0.0, f64::max)
}
