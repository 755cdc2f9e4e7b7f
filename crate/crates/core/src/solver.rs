//! Discrete energy, its exact gradient and generalized Hessian, and the
//! minimization that produces the discrete solution.
//!
//! The energy is
//!
//! ```text
//! J(u) = ½ [ Σ_edges w_e (Δu)² h^{n-2} + Σ_bottom w_γ h^{n-1} (k̃₋ (u⁻)^p + k̃₊ (u⁺)^p) ]
//! ```
//!
//! where `w_e` halves an edge once per box face it lies on and `w_γ` is the
//! trapezoid weight on the bottom face. The scheme is *defined* as the
//! stationarity condition of `J`, so the flux law on the flat boundary needs
//! no separate ghost-node treatment.

use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::banded::SymBanded;
use crate::config::ProblemConfig;
use crate::error::{Error, Result};
use crate::expr::parse_expr;
use crate::field::Field;
use crate::grid::{HalfGrid, NodeClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Semismooth Newton with Armijo backtracking (requires `p >= 2`).
    Newton,
    /// Gradient descent preconditioned by the pure-Laplace operator.
    Descent,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Newton => "newton",
            Method::Descent => "descent",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    /// Dirichlet data on the boundary, zero on free nodes.
    ZeroInterior,
    /// Solution of the problem with `k± = 0`.
    HarmonicLift,
    /// Free values taken from the given field; Dirichlet values are reset.
    User(Field),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub method: Method,
    pub max_iters: usize,
    /// Stopping threshold on the max-norm of the reduced gradient.
    pub grad_tol: f64,
    /// Backtracking factor in `(0, 1)`.
    pub contraction: f64,
    /// Armijo sufficient-decrease constant in `(0, 1)`.
    pub sufficient_decrease: f64,
    pub initial: InitialGuess,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: Method::Newton,
            max_iters: 100,
            grad_tol: 1e-10,
            contraction: 0.5,
            sufficient_decrease: 1e-4,
            initial: InitialGuess::HarmonicLift,
        }
    }
}

impl SolveOptions {
    pub fn descent() -> Self {
        SolveOptions {
            method: Method::Descent,
            max_iters: 20_000,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidConfig("grad_tol must be positive".into()));
        }
        if !(self.contraction > 0.0 && self.contraction < 1.0) {
            return Err(Error::InvalidConfig("contraction must lie in (0, 1)".into()));
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 1.0) {
            return Err(Error::InvalidConfig(
                "sufficient_decrease must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub converged: bool,
    pub wall_time: Duration,
    /// Energy at the start and after every accepted step.
    pub energy_history: Vec<f64>,
}

/// Relative slack below which energy differences are treated as rounding.
pub const ENERGY_ROUNDING: f64 = 1e-13;

/// Precomputed discrete operator for one configuration.
pub(crate) struct Discretization {
    grid: Arc<HalfGrid>,
    /// (a, b, coefficient) with coefficient `w_e h^{n-2}`.
    edges: Vec<(usize, usize, f64)>,
    /// (node, `w_γ h^{n-1}`) over the whole bottom face, rim included.
    bottom: Vec<(usize, f64)>,
    /// Free-node number of each node, `usize::MAX` for Dirichlet nodes.
    free_of: Vec<usize>,
    free_nodes: Vec<usize>,
    bandwidth: usize,
    p: f64,
    k_plus: f64,
    k_minus: f64,
    kt_plus: f64,
    kt_minus: f64,
}

impl Discretization {
    pub(crate) fn new(config: &ProblemConfig) -> Result<Self> {
        let grid = Arc::new(HalfGrid::new(config)?);
        Ok(Self::on_grid(grid, config))
    }

    fn on_grid(grid: Arc<HalfGrid>, config: &ProblemConfig) -> Self {
        let n = grid.dim();
        let h = grid.spacing();
        let edge_scale = h.powi(n as i32 - 2);
        let mut edges = Vec::with_capacity(n * grid.len());
        let mut idx = vec![0; n];
        for a in 0..grid.len() {
            grid.unflatten_into(a, &mut idx);
            for d in 0..n {
                if idx[d] + 1 >= grid.shape()[d] {
                    continue;
                }
                let w = (0..n)
                    .filter(|&e| e != d && grid.on_face(e, idx[e]))
                    .fold(1.0, |w, _| w * 0.5);
                edges.push((a, a + grid.strides()[d], w * edge_scale));
            }
        }
        let face_scale = h.powi(n as i32 - 1);
        let bottom = grid
            .bottom_face()
            .map(|f| (f, grid.bottom_weight(&grid.unflatten(f)) * face_scale))
            .collect();
        let mut free_of = vec![usize::MAX; grid.len()];
        let mut free_nodes = Vec::new();
        for k in 0..grid.len() {
            if grid.is_free(k) {
                free_of[k] = free_nodes.len();
                free_nodes.push(k);
            }
        }
        let bandwidth = edges
            .iter()
            .filter(|(a, b, _)| free_of[*a] != usize::MAX && free_of[*b] != usize::MAX)
            .map(|(a, b, _)| free_of[*b].abs_diff(free_of[*a]))
            .max()
            .unwrap_or(0);
        let (kt_plus, kt_minus) = config.k_tilde();
        Discretization {
            grid,
            edges,
            bottom,
            free_of,
            free_nodes,
            bandwidth,
            p: config.p,
            k_plus: config.k_plus,
            k_minus: config.k_minus,
            kt_plus,
            kt_minus,
        }
    }

    fn check(&self, field: &Field) -> Result<()> {
        let g = field.grid();
        if g.shape() != self.grid.shape()
            || g.dim() != self.grid.dim()
            || (g.spacing() - self.grid.spacing()).abs() > 1e-12 * self.grid.spacing()
            || g.half_width() != self.grid.half_width()
        {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    fn energy(&self, u: &[f64]) -> f64 {
        let mut dirichlet = 0.0;
        for &(a, b, c) in &self.edges {
            let d = u[a] - u[b];
            dirichlet += c * d * d;
        }
        let mut penalty = 0.0;
        for &(k, w) in &self.bottom {
            let v = u[k];
            let term = if v > 0.0 {
                self.kt_plus * v.powf(self.p)
            } else if v < 0.0 {
                self.kt_minus * (-v).powf(self.p)
            } else {
                0.0
            };
            penalty += w * term;
        }
        0.5 * (dirichlet + penalty)
    }

    /// `½ d/du [w F̃(u)] / w = k₊(u⁺)^{p-1} - k₋(u⁻)^{p-1}`.
    fn flux(&self, v: f64) -> f64 {
        if v > 0.0 {
            self.k_plus * v.powf(self.p - 1.0)
        } else if v < 0.0 {
            -self.k_minus * (-v).powf(self.p - 1.0)
        } else {
            0.0
        }
    }

    /// Generalized second derivative of the flux term, with the tie rule
    /// `max(k₊, k₋)` at `u = 0` when `p = 2`.
    fn flux_slope(&self, v: f64) -> f64 {
        let e = self.p - 2.0;
        if v > 0.0 {
            (self.p - 1.0) * self.k_plus * v.powf(e)
        } else if v < 0.0 {
            (self.p - 1.0) * self.k_minus * (-v).powf(e)
        } else if e == 0.0 {
            self.k_plus.max(self.k_minus)
        } else if e < 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }

    /// Full-length gradient; Dirichlet components are zero.
    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(a, b, c) in &self.edges {
            let d = c * (u[a] - u[b]);
            out[a] += d;
            out[b] -= d;
        }
        for &(k, w) in &self.bottom {
            out[k] += w * self.flux(u[k]);
        }
        for (o, &f) in out.iter_mut().zip(&self.free_of) {
            if f == usize::MAX {
                *o = 0.0;
            }
        }
    }

    fn reduced_norm(&self, grad: &[f64]) -> f64 {
        self.free_nodes
            .iter()
            .fold(0.0, |m, &k| m.max(grad[k].abs()))
    }

    /// Dirichlet-form matrix restricted to free nodes.
    fn laplacian(&self) -> SymBanded {
        let mut m = SymBanded::zeros(self.free_nodes.len(), self.bandwidth);
        for &(a, b, c) in &self.edges {
            let (fa, fb) = (self.free_of[a], self.free_of[b]);
            if fa != usize::MAX {
                m.add(fa, fa, c);
            }
            if fb != usize::MAX {
                m.add(fb, fb, c);
            }
            if fa != usize::MAX && fb != usize::MAX {
                m.add(fa, fb, -c);
            }
        }
        m
    }

    fn hessian(&self, lap: &SymBanded, u: &[f64]) -> SymBanded {
        let mut m = lap.clone();
        for &(k, w) in &self.bottom {
            let f = self.free_of[k];
            if f != usize::MAX {
                m.add(f, f, w * self.flux_slope(u[k]));
            }
        }
        m
    }
}

/// Evaluates the discrete energy of `field`.
pub fn discrete_energy(field: &Field, config: &ProblemConfig) -> Result<f64> {
    let disc = Discretization::new(config)?;
    disc.check(field)?;
    Ok(disc.energy(field.values()))
}

/// Exact gradient of [`discrete_energy`] with respect to free nodal values,
/// i.e. the weak residual against nodal hat functions.
pub fn energy_gradient(field: &Field, config: &ProblemConfig) -> Result<Field> {
    let disc = Discretization::new(config)?;
    disc.check(field)?;
    let mut out = vec![0.0; field.values().len()];
    disc.gradient(field.values(), &mut out);
    Field::from_values(field.grid().clone(), out)
}

/// Minimizes the discrete energy subject to the Dirichlet data.
///
/// Non-convergence is not an error: the report carries `converged = false`.
pub fn solve(config: &ProblemConfig, opts: &SolveOptions) -> Result<(Field, SolveReport)> {
    let start = Instant::now();
    config.validate()?;
    opts.validate()?;
    if opts.method == Method::Newton && config.requires_descent() {
        return Err(Error::InvalidMethod {
            method: Method::Newton.name(),
            p: config.p,
        });
    }
    let disc = Discretization::new(config)?;
    let grid = disc.grid.clone();
    let boundary = Field::with_dirichlet(grid.clone(), config)?;
    let lap = disc.laplacian();

    let mut u = match &opts.initial {
        InitialGuess::ZeroInterior => boundary.into_values(),
        InitialGuess::HarmonicLift => {
            let zero_k = ProblemConfig {
                k_plus: 0.0,
                k_minus: 0.0,
                ..config.clone()
            };
            let quad = Discretization::on_grid(grid.clone(), &zero_k);
            let mut u = boundary.into_values();
            let mut grad = vec![0.0; u.len()];
            quad.gradient(&u, &mut grad);
            let mut rhs: Vec<f64> = disc.free_nodes.iter().map(|&k| -grad[k]).collect();
            lap.clone().cholesky()?.solve_in_place(&mut rhs);
            for (&k, d) in disc.free_nodes.iter().zip(&rhs) {
                u[k] += d;
            }
            u
        }
        InitialGuess::User(f) => {
            disc.check(f)?;
            let mut u = f.values().to_vec();
            for (k, v) in u.iter_mut().enumerate() {
                if grid.class(k) == NodeClass::Dirichlet {
                    *v = boundary.values()[k];
                }
            }
            u
        }
    };

    let precond = match opts.method {
        Method::Descent => Some(lap.clone().cholesky()?),
        Method::Newton => None,
    };

    let nfree = disc.free_nodes.len();
    let mut grad = vec![0.0; u.len()];
    let mut trial = u.clone();
    let mut energy = disc.energy(&u);
    let mut history = vec![energy];
    let mut iterations = 0;
    let mut converged = false;
    let mut grad_norm;
    loop {
        disc.gradient(&u, &mut grad);
        grad_norm = disc.reduced_norm(&grad);
        if grad_norm <= opts.grad_tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iters {
            break;
        }
        let mut dir: Vec<f64> = disc.free_nodes.iter().map(|&k| -grad[k]).collect();
        match &precond {
            Some(chol) => chol.solve_in_place(&mut dir),
            None => disc.hessian(&lap, &u).cholesky()?.solve_in_place(&mut dir),
        }
        let slope: f64 = (0..nfree).map(|i| grad[disc.free_nodes[i]] * dir[i]).sum();
        if !(slope < 0.0) {
            break;
        }
        let slack = ENERGY_ROUNDING * energy.abs().max(1.0);
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-14 {
            for (i, &k) in disc.free_nodes.iter().enumerate() {
                trial[k] = u[k] + alpha * dir[i];
            }
            let e = disc.energy(&trial);
            if e <= energy + opts.sufficient_decrease * alpha * slope + slack {
                accepted = Some(e);
                break;
            }
            alpha *= opts.contraction;
        }
        let Some(e) = accepted else { break };
        std::mem::swap(&mut u, &mut trial);
        trial.copy_from_slice(&u);
        energy = e;
        history.push(e);
        iterations += 1;
    }

    let field = Field::from_values(grid, u)?;
    let report = SolveReport {
        iterations,
        energy,
        grad_norm,
        converged,
        wall_time: start.elapsed(),
        energy_history: history,
    };
    Ok((field, report))
}

/// Result of [`solve_with_zero_at`].
#[derive(Debug, Clone)]
pub struct Calibrated {
    /// Constant subtracted from the Dirichlet data.
    pub offset: f64,
    /// Configuration with data `g - offset`.
    pub config: ProblemConfig,
    pub field: Field,
    pub report: SolveReport,
}

/// Solves with data `g - c`, where the constant `c` is chosen by the secant
/// method so that the discrete solution vanishes at `point`. The value at a
/// fixed point is monotone in `c`; for linear flux laws one secant step is
/// exact up to rounding.
pub fn solve_with_zero_at(
    config: &ProblemConfig,
    point: &[f64],
    opts: &SolveOptions,
) -> Result<Calibrated> {
    let shifted = |c: f64| -> Result<ProblemConfig> {
        let g = parse_expr(&format!("({}) - ({:?})", config.g, c))?;
        Ok(config.with_g(g))
    };
    let attempt = |c: f64| -> Result<(ProblemConfig, Field, SolveReport, f64)> {
        let cfg = shifted(c)?;
        let (u, rep) = solve(&cfg, opts)?;
        let v = u.interpolate(point)?;
        Ok((cfg, u, rep, v))
    };
    let (mut c0, mut a0) = (0.0, attempt(0.0)?);
    let scale = a0.1.max_abs_dirichlet().max(1.0);
    let tol = 1e-12 * scale;
    let mut c1 = a0.3;
    let mut a1 = attempt(c1)?;
    for _ in 0..50 {
        if a1.3.abs() <= tol {
            break;
        }
        let denom = a1.3 - a0.3;
        if denom == 0.0 {
            break;
        }
        let c2 = c1 - a1.3 * (c1 - c0) / denom;
        c0 = c1;
        a0 = a1;
        c1 = c2;
        a1 = attempt(c1)?;
    }
    if !(a1.3.abs() <= tol) {
        return Err(Error::InvalidConfig(format!(
            "could not calibrate the data offset: residual {} at {point:?}",
            a1.3
        )));
    }
    Ok(Calibrated {
        offset: c1,
        config: a1.0,
        field: a1.1,
        report: a1.2,
    })
}
