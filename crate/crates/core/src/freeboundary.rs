//! Zero set of the trace on `Γ`, regular/singular classification and the
//! second-difference probe at regular points.

use std::fmt::Write as _;

use crate::config::ProblemConfig;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::functionals::{audit_radii, fmt_float, frequency_limit, radial_profile, QuadratureSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    Unclassified,
    Regular,
    SingularCandidate,
}

impl PointClass {
    pub fn name(self) -> &'static str {
        match self {
            PointClass::Unclassified => "UNCLASSIFIED",
            PointClass::Regular => "REGULAR",
            PointClass::SingularCandidate => "SINGULAR_CANDIDATE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeBoundaryPoint {
    /// Tangential coordinates.
    pub location: Vec<f64>,
    pub class: PointClass,
    /// `|∇_{x'} u|` by centered differences of the trace.
    pub grad_norm: f64,
    pub mu: Option<u32>,
    pub mu_hat: Option<f64>,
    /// Frequency could not be snapped, or the snapped value is below 2.
    pub ambiguous: bool,
    /// Tangential interval that bracketed the zero.
    pub bracket: (f64, f64),
    /// Stratum index; always 0 in the plane.
    pub stratum: Option<usize>,
    pub note: Option<String>,
}

impl FreeBoundaryPoint {
    pub fn x1(&self) -> f64 {
        self.location[0]
    }
}

/// CSV with header `x1,class,grad_norm,mu,ambiguous`.
pub fn points_to_csv(points: &[FreeBoundaryPoint]) -> String {
    let mut s = String::from("x1,class,grad_norm,mu,ambiguous\n");
    for p in points {
        let mu = p.mu.map(|m| m.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_float(p.x1()),
            p.class.name(),
            fmt_float(p.grad_norm),
            mu,
            p.ambiguous
        );
    }
    s
}

/// `1e-8 · max |g|` over the Dirichlet nodes.
pub fn zero_tolerance(field: &Field) -> f64 {
    1e-8 * field.max_abs_dirichlet()
}

fn trace(field: &Field, x: f64) -> Result<f64> {
    field.interpolate(&[x, 0.0])
}

/// Tangential gradient of the trace by centered differences at spacing `h`.
pub fn trace_gradient(field: &Field, x: f64) -> Result<f64> {
    let h = field.grid().spacing();
    Ok(((trace(field, x + h)? - trace(field, x - h)?) / (2.0 * h)).abs())
}

/// Bisection on the piecewise-linear trace, finished with the exact root of
/// the final linear piece.
fn refine(field: &Field, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let mut ua = trace(field, a)?;
    let mut ub = trace(field, b)?;
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        let um = trace(field, m)?;
        if um == 0.0 {
            return Ok(m);
        }
        if (um < 0.0) == (ua < 0.0) {
            a = m;
            ua = um;
        } else {
            b = m;
            ub = um;
        }
    }
    Ok(a + (b - a) * ua / (ua - ub))
}

/// Zeros of the trace at least `2h` from the rim (planar case).
pub fn trace_zero_set(field: &Field, config: &ProblemConfig) -> Result<Vec<FreeBoundaryPoint>> {
    let grid = field.grid();
    if grid.dim() != 2 {
        return Err(Error::UnsupportedDimension(grid.dim()));
    }
    if grid.spacing() != config.h && (grid.spacing() - config.h).abs() > 1e-12 {
        return Err(Error::GridMismatch);
    }
    let h = grid.spacing();
    let eps = zero_tolerance(field);
    let stride = grid.strides()[0];
    let count = grid.shape()[0];
    let limit = grid.half_width() - 2.0 * h + 1e-9 * h;
    let t: Vec<f64> = (0..count).map(|i| field.values()[i * stride]).collect();
    let x: Vec<f64> = (0..count).map(|i| grid.coord(0, i)).collect();
    let inside = |v: f64| v.abs() <= limit;

    let mut raw: Vec<(f64, (f64, f64))> = Vec::new();
    for i in 0..count {
        if t[i].abs() <= eps && inside(x[i]) {
            raw.push((x[i], (x[i], x[i])));
        }
        if i + 1 < count && t[i].abs() > eps && t[i + 1].abs() > eps && t[i] * t[i + 1] < 0.0 {
            let root = refine(field, x[i], x[i + 1], h * 1e-6)?;
            if inside(root) {
                raw.push((root, (x[i], x[i + 1])));
            }
        }
    }
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));

    // merge clusters closer than h, keeping the member with smallest |u|
    let mut points: Vec<FreeBoundaryPoint> = Vec::new();
    let mut best_abs = f64::INFINITY;
    let mut last = f64::NEG_INFINITY;
    for (loc, br) in raw {
        let u = trace(field, loc)?.abs();
        if loc - last < h * (1.0 + 1e-9) && !points.is_empty() {
            let p = points.last_mut().unwrap();
            p.bracket = (p.bracket.0.min(br.0), p.bracket.1.max(br.1));
            if u < best_abs {
                best_abs = u;
                p.location = vec![loc];
            }
        } else {
            best_abs = u;
            points.push(FreeBoundaryPoint {
                location: vec![loc],
                class: PointClass::Unclassified,
                grad_norm: 0.0,
                mu: None,
                mu_hat: None,
                ambiguous: false,
                bracket: br,
                stratum: Some(0),
                note: None,
            });
        }
        last = loc;
    }
    for p in &mut points {
        p.grad_norm = trace_gradient(field, p.x1())?;
    }
    Ok(points)
}

/// Default gradient threshold `h^{1/2}`.
pub fn default_tau(h: f64) -> f64 {
    h.sqrt()
}

/// Tags each point REGULAR when `|∇_{x'} u| > τ`, otherwise
/// SINGULAR_CANDIDATE with the snapped frequency limit at the point.
pub fn classify(
    points: &[FreeBoundaryPoint],
    field: &Field,
    config: &ProblemConfig,
    tau: f64,
    quad: &QuadratureSpec,
) -> Result<Vec<FreeBoundaryPoint>> {
    if !(tau > 0.0) {
        return Err(Error::InvalidConfig(format!("tau_grad = {tau} must be positive")));
    }
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let mut q = p.clone();
        q.grad_norm = trace_gradient(field, p.x1())?;
        q.stratum = Some(0);
        if q.grad_norm > tau {
            q.class = PointClass::Regular;
            q.mu = None;
            q.mu_hat = None;
            q.ambiguous = false;
        } else {
            q.class = PointClass::SingularCandidate;
            let center = [p.x1(), 0.0];
            let radii = audit_radii(config, &center);
            let est = radial_profile(field, config, &center, &radii, quad)
                .and_then(|prof| frequency_limit(&prof, config.h));
            match est {
                Ok(e) => {
                    q.mu = Some(e.mu);
                    q.mu_hat = Some(e.mu_hat);
                    q.ambiguous = e.mu < 2;
                    if q.ambiguous {
                        q.note = Some(format!("regular-like frequency {:.4}", e.mu_hat));
                    }
                }
                Err(Error::AmbiguousFrequency { estimate }) => {
                    q.mu = None;
                    q.mu_hat = Some(estimate);
                    q.ambiguous = true;
                    q.note = Some(format!("ambiguous frequency {estimate:.4}"));
                }
                Err(e) => {
                    q.mu = None;
                    q.mu_hat = None;
                    q.ambiguous = true;
                    q.note = Some(e.to_string());
                }
            }
        }
        out.push(q);
    }
    Ok(out)
}

/// `q(δ) = |u(x₀+δ) - 2u(x₀) + u(x₀-δ)| / δ²` along the trace.
pub fn second_difference(field: &Field, x0: f64, delta: f64) -> Result<f64> {
    let min = 2.0 * field.grid().spacing();
    if delta < min * (1.0 - 1e-12) {
        return Err(Error::Resolution { offset: delta, min });
    }
    let l = field.grid().half_width();
    if (x0.abs() + delta) > l {
        return Err(Error::OutOfDomain(vec![x0 + delta.copysign(x0), 0.0]));
    }
    let q = trace(field, x0 + delta)? - 2.0 * trace(field, x0)? + trace(field, x0 - delta)?;
    Ok(q.abs() / (delta * delta))
}

/// Second-difference quotients at a regular point for each offset.
pub fn c11_probe(
    field: &Field,
    config: &ProblemConfig,
    x0: f64,
    offsets: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if config.p != 2.0 {
        return Err(Error::InvalidConfig(format!(
            "the second-difference probe needs p = 2, got {}",
            config.p
        )));
    }
    if trace_gradient(field, x0)? <= default_tau(field.grid().spacing()) {
        return Err(Error::NotRegular(x0));
    }
    offsets
        .iter()
        .map(|&d| second_difference(field, x0, d).map(|q| (d, q)))
        .collect()
}
