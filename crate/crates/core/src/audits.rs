//! Numerical audits of the monotonicity, growth and regularity properties
//! of solutions, on solved instances and on analytic oracles.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::blowup::{fit_blowup, HomPoly};
use crate::config::ProblemConfig;
use crate::error::{Error, Result};
use crate::field::{Field, Sampler};
use crate::freeboundary::{classify, default_tau, trace_zero_set, PointClass};
use crate::functionals::{
    audit_radii, ball_integral, check_radius, fmt_float, frequency_limit, gamma_integral,
    monneau, radial_profile, sup_on_ball, sup_on_sphere, weiss, FunctionalProfile,
    QuadratureSpec,
};
use crate::grid::{build_grid, NodeClass};
use crate::solver::{solve, solve_with_zero_at, SolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AuditKind {
    NtildeMonotone,
    NLeNtilde,
    PhiGrowth,
    Doubling,
    PointwiseGrowth,
    Nondegeneracy,
    MonneauAlmostMonotone,
    WeissLink,
    Caccioppoli,
    TraceInequality,
    MaxPrinciple,
    SignPreservation,
    HolderHalf,
}

impl AuditKind {
    pub const ALL: [AuditKind; 13] = [
        AuditKind::NtildeMonotone,
        AuditKind::NLeNtilde,
        AuditKind::PhiGrowth,
        AuditKind::Doubling,
        AuditKind::PointwiseGrowth,
        AuditKind::Nondegeneracy,
        AuditKind::MonneauAlmostMonotone,
        AuditKind::WeissLink,
        AuditKind::Caccioppoli,
        AuditKind::TraceInequality,
        AuditKind::MaxPrinciple,
        AuditKind::SignPreservation,
        AuditKind::HolderHalf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AuditKind::NtildeMonotone => "NTILDE_MONOTONE",
            AuditKind::NLeNtilde => "N_LE_NTILDE",
            AuditKind::PhiGrowth => "PHI_GROWTH",
            AuditKind::Doubling => "DOUBLING",
            AuditKind::PointwiseGrowth => "POINTWISE_GROWTH",
            AuditKind::Nondegeneracy => "NONDEGENERACY",
            AuditKind::MonneauAlmostMonotone => "MONNEAU_ALMOST_MONOTONE",
            AuditKind::WeissLink => "WEISS_LINK",
            AuditKind::Caccioppoli => "CACCIOPPOLI",
            AuditKind::TraceInequality => "TRACE_INEQUALITY",
            AuditKind::MaxPrinciple => "MAX_PRINCIPLE",
            AuditKind::SignPreservation => "SIGN_PRESERVATION",
            AuditKind::HolderHalf => "HOLDER_HALF",
        }
    }

    pub fn parse(s: &str) -> Option<AuditKind> {
        AuditKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
    }

    /// Kinds whose statement involves the frequency `μ`.
    pub fn needs_mu(self) -> bool {
        matches!(
            self,
            AuditKind::PhiGrowth
                | AuditKind::Doubling
                | AuditKind::PointwiseGrowth
                | AuditKind::Nondegeneracy
                | AuditKind::MonneauAlmostMonotone
                | AuditKind::WeissLink
        )
    }

    /// Kinds resting on the monotonicity of `Ñ`, proved for `p ≥ 2` only.
    pub fn needs_p_at_least_two(self) -> bool {
        self.needs_mu() || self == AuditKind::NtildeMonotone
    }

    /// Kinds that report a constant fitted over the examined set and pass on
    /// refinement stability.
    pub fn is_fitted(self) -> bool {
        matches!(
            self,
            AuditKind::Doubling
                | AuditKind::PointwiseGrowth
                | AuditKind::Nondegeneracy
                | AuditKind::MonneauAlmostMonotone
                | AuditKind::WeissLink
                | AuditKind::Caccioppoli
                | AuditKind::TraceInequality
                | AuditKind::HolderHalf
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// `tol_mono(h) = mono_factor · h`.
    pub mono_factor: f64,
    pub n_le_ntilde: f64,
    pub max_principle: f64,
    pub sign: f64,
    /// Admitted growth of a fitted constant under one refinement.
    pub growth: f64,
    /// Admitted growth of the Hölder quotient under one refinement.
    pub holder_growth: f64,
    /// Absolute slack when comparing fitted constants.
    pub constant_slack: f64,
    pub holder_radius: f64,
    pub doubling_delta: f64,
    /// Admitted excess of `log φ(R)/φ(r)` over the `p = 2` bound.
    pub doubling_excess: f64,
    /// Blow-up fitting radius for the Monneau reference polynomial.
    pub r_fit: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            mono_factor: 50.0,
            n_le_ntilde: 1e-10,
            max_principle: 1e-8,
            sign: 1e-8,
            growth: 2.0,
            holder_growth: 1.5,
            constant_slack: 1e-8,
            holder_radius: 0.25,
            doubling_delta: 0.1,
            doubling_excess: 1e-8,
            r_fit: 0.2,
        }
    }
}

/// One function under audit: a solved field or an analytic oracle, with
/// the configuration that defines its box and spacing.
#[derive(Clone, Copy)]
pub struct AuditCase<'a> {
    pub label: &'a str,
    pub sampler: &'a dyn Sampler,
    pub config: &'a ProblemConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditSetup {
    pub center: Vec<f64>,
    /// Explicit radii; defaults to the geometric sequence truncated at `8h`.
    pub radii: Option<Vec<f64>>,
    /// Frequency override; otherwise taken from the frequency limit.
    pub mu: Option<u32>,
    /// Monneau reference polynomial; otherwise fitted per case.
    pub poly: Option<HomPoly>,
    pub quad: QuadratureSpec,
    pub tol: Tolerances,
}

impl AuditSetup {
    pub fn at(center: Vec<f64>) -> Self {
        AuditSetup {
            center,
            radii: None,
            mu: None,
            poly: None,
            quad: QuadratureSpec::default(),
            tol: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub config_id: String,
    pub kind: AuditKind,
    pub pass: bool,
    pub skipped: bool,
    pub violation: f64,
    pub fitted_c: Option<f64>,
    pub fitted_c_refined: Option<f64>,
    pub radii: Vec<f64>,
    pub notes: String,
}

impl AuditReport {
    fn new(config_id: &str, kind: AuditKind) -> Self {
        AuditReport {
            config_id: config_id.to_string(),
            kind,
            pass: false,
            skipped: false,
            violation: 0.0,
            fitted_c: None,
            fitted_c_refined: None,
            radii: Vec::new(),
            notes: String::new(),
        }
    }

    fn note(&mut self, s: impl AsRef<str>) {
        if !self.notes.is_empty() {
            self.notes.push_str("; ");
        }
        self.notes.push_str(s.as_ref());
    }
}

/// Value and examined radii of one kind on one case.
struct Measure {
    value: f64,
    radii: Vec<f64>,
    note: Option<String>,
}

fn radii_for(case: &AuditCase, setup: &AuditSetup) -> Vec<f64> {
    match &setup.radii {
        Some(r) => r.clone(),
        None => audit_radii(case.config, &setup.center),
    }
}

fn profile_for(case: &AuditCase, setup: &AuditSetup) -> Result<FunctionalProfile> {
    radial_profile(
        case.sampler,
        case.config,
        &setup.center,
        &radii_for(case, setup),
        &setup.quad,
    )
}

fn nodal(case: &AuditCase) -> Result<Field> {
    let grid = Arc::new(build_grid(case.config)?);
    Field::sample(grid, case.sampler)
}

fn pairwise_min(values: &[f64]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            m = m.min(values[j] - values[i]);
        }
    }
    m
}

fn resolve_mu(case: &AuditCase, setup: &AuditSetup) -> Result<u32> {
    if let Some(mu) = setup.mu {
        return Ok(mu);
    }
    let prof = profile_for(case, setup)?;
    frequency_limit(&prof, case.config.h).map(|e| e.mu)
}

fn reference_poly(case: &AuditCase, setup: &AuditSetup, mu: u32) -> Result<HomPoly> {
    if let Some(p) = &setup.poly {
        return Ok(p.clone());
    }
    let r_fit = setup.tol.r_fit.max(8.0 * case.config.h);
    fit_blowup(case.sampler, case.config, &setup.center, mu, r_fit, &setup.quad).map(|f| f.poly)
}

/// Slopes of `M_μ` between adjacent radii, the Weiss functional at the
/// midpoints, and the midpoints themselves.
fn monneau_weiss(case: &AuditCase, setup: &AuditSetup, mu: u32) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let radii = radii_for(case, setup);
    let poly = reference_poly(case, setup, mu)?;
    let m = monneau(case.sampler, case.config, &setup.center, &poly, &radii, &setup.quad)?;
    let slopes: Vec<f64> = radii
        .windows(2)
        .zip(m.windows(2))
        .map(|(r, m)| (m[1] - m[0]) / (r[1] - r[0]))
        .collect();
    let mids: Vec<f64> = radii.windows(2).map(|r| 0.5 * (r[0] + r[1])).collect();
    let prof = radial_profile(case.sampler, case.config, &setup.center, &mids, &setup.quad)?;
    let w = weiss(&prof, mu as f64);
    Ok((slopes, w, mids))
}

fn measure(kind: AuditKind, case: &AuditCase, setup: &AuditSetup, mu: Option<u32>) -> Result<Measure> {
    let c = &setup.center;
    let q = &setup.quad;
    let cfg = case.config;
    let s = case.sampler;
    let mu_f = mu.unwrap_or(0) as f64;
    let out = match kind {
        AuditKind::NtildeMonotone => {
            let prof = profile_for(case, setup)?;
            Measure {
                value: pairwise_min(&prof.n_tilde()),
                radii: prof.radii(),
                note: None,
            }
        }
        AuditKind::NLeNtilde => {
            let prof = profile_for(case, setup)?;
            let worst = prof
                .rows
                .iter()
                .map(|r| r.n - r.n_tilde)
                .fold(f64::NEG_INFINITY, f64::max);
            Measure {
                value: worst,
                radii: prof.radii(),
                note: None,
            }
        }
        AuditKind::PhiGrowth => {
            // deficit of the growth exponent of r^{-2μ}φ(r), in frequency units
            let prof = profile_for(case, setup)?;
            let deficit = prof
                .rows
                .windows(2)
                .map(|w| {
                    let (a, b) = (&w[0], &w[1]);
                    let slope = (b.phi / a.phi).ln() / (2.0 * (b.r / a.r).ln());
                    mu_f - slope
                })
                .fold(f64::NEG_INFINITY, f64::max);
            Measure {
                value: -deficit,
                radii: prof.radii(),
                note: None,
            }
        }
        AuditKind::Doubling => {
            let prof = profile_for(case, setup)?;
            let delta = setup.tol.doubling_delta;
            let bound = mu_f + delta;
            let kept: Vec<_> = prof
                .rows
                .iter()
                .take_while(|r| r.n_tilde <= bound)
                .collect();
            let mut excess = f64::NEG_INFINITY;
            let mut fitted = 0.0f64;
            let factor = 2.0 * (1.0 - 2.0 / cfg.p) * (bound + 1.0);
            for i in 0..kept.len() {
                for j in i + 1..kept.len() {
                    let (a, b) = (kept[i], kept[j]);
                    let e = (b.phi / a.phi).ln() - 2.0 * bound * (b.r / a.r).ln();
                    excess = excess.max(e);
                    if factor > 0.0 {
                        fitted = fitted.max(e / (factor * (b.r - a.r)));
                    }
                }
            }
            let note = if kept.len() < 2 {
                Some(format!("fewer than two radii with Ntilde <= mu + {delta}"))
            } else {
                None
            };
            Measure {
                value: if factor > 0.0 { fitted } else { excess.max(0.0) },
                radii: kept.iter().map(|r| r.r).collect(),
                note,
            }
        }
        AuditKind::PointwiseGrowth => {
            let radii = radii_for(case, setup);
            check_radius(cfg, c, 0.5)?;
            let big = sup_on_ball(s, c, 0.5, q)?;
            let mut worst = 0.0f64;
            for &r in &radii {
                let sup = sup_on_ball(s, c, r, q)?;
                worst = worst.max(sup / ((0.5 * r).powf(mu_f) * big));
            }
            Measure {
                value: worst,
                radii,
                note: None,
            }
        }
        AuditKind::Nondegeneracy => {
            let radii = radii_for(case, setup);
            let mut worst = f64::INFINITY;
            for &r in &radii {
                worst = worst.min(sup_on_sphere(s, c, r, q)? / r.powf(mu_f));
            }
            Measure {
                value: worst,
                radii,
                note: None,
            }
        }
        AuditKind::MonneauAlmostMonotone => {
            let mu = mu.unwrap_or(0);
            let radii = radii_for(case, setup);
            let poly = reference_poly(case, setup, mu)?;
            let m = monneau(s, cfg, c, &poly, &radii, q)?;
            let slope = radii
                .windows(2)
                .zip(m.windows(2))
                .map(|(r, m)| (m[1] - m[0]) / (r[1] - r[0]))
                .fold(f64::INFINITY, f64::min);
            Measure {
                value: (-slope).max(0.0),
                radii,
                note: None,
            }
        }
        AuditKind::WeissLink => {
            let mu = mu.unwrap_or(0);
            let (slopes, w, mids) = monneau_weiss(case, setup, mu)?;
            let need = slopes
                .iter()
                .zip(w.iter().zip(&mids))
                .map(|(sl, (w, r))| 2.0 / r * w - sl)
                .fold(0.0f64, f64::max);
            Measure {
                value: need,
                radii: radii_for(case, setup),
                note: None,
            }
        }
        AuditKind::Caccioppoli => {
            let radii: Vec<f64> = radii_for(case, setup)
                .into_iter()
                .filter(|&r| check_radius(cfg, c, 2.0 * r).is_ok())
                .collect();
            let mut worst = 0.0f64;
            let mut g = [0.0; 2];
            for &r in &radii {
                let d = ball_integral(c, r, q, |x| {
                    s.gradient_into(x, &mut g)?;
                    Ok(g[0] * g[0] + g[1] * g[1])
                })?;
                let l2 = ball_integral(c, 2.0 * r, q, |x| s.value(x).map(|u| u * u))?;
                if l2 > 0.0 {
                    worst = worst.max(r * r * d / l2);
                }
            }
            Measure {
                value: worst,
                radii,
                note: None,
            }
        }
        AuditKind::TraceInequality => {
            let prof = profile_for(case, setup)?;
            let mut worst = 0.0f64;
            for row in &prof.rows {
                let lhs = gamma_integral(s, c, row.r, q, |u| u * u)?;
                worst = worst.max(lhs / (row.r * row.d + row.h));
            }
            Measure {
                value: worst,
                radii: prof.radii(),
                note: None,
            }
        }
        AuditKind::MaxPrinciple => {
            let u = nodal(case)?;
            Measure {
                value: u.max_abs() - u.max_abs_dirichlet(),
                radii: Vec::new(),
                note: None,
            }
        }
        AuditKind::SignPreservation => {
            let u = nodal(case)?;
            let grid = u.grid();
            let (mut dmin, mut dmax) = (f64::INFINITY, f64::NEG_INFINITY);
            for (v, cl) in u.values().iter().zip(grid.classes()) {
                if *cl == NodeClass::Dirichlet {
                    dmin = dmin.min(*v);
                    dmax = dmax.max(*v);
                }
            }
            let umin = u.values().iter().cloned().fold(f64::INFINITY, f64::min);
            let umax = u.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if dmin >= 0.0 {
                Measure {
                    value: (-umin).max(0.0),
                    radii: Vec::new(),
                    note: None,
                }
            } else if dmax <= 0.0 {
                Measure {
                    value: umax.max(0.0),
                    radii: Vec::new(),
                    note: None,
                }
            } else {
                Measure {
                    value: 0.0,
                    radii: Vec::new(),
                    note: Some("data changes sign; vacuous".into()),
                }
            }
        }
        AuditKind::HolderHalf => {
            let u = nodal(case)?;
            Measure {
                value: holder_quotient(&u, setup.tol.holder_radius),
                radii: vec![setup.tol.holder_radius],
                note: None,
            }
        }
    };
    Ok(out)
}

/// `max |u(x) - u(y)| / |x - y|^{1/2}` over node pairs at distance at most
/// `reach`.
pub fn holder_quotient(u: &Field, reach: f64) -> f64 {
    let grid = u.grid();
    let h = grid.spacing();
    let k = (reach / h + 1e-9).floor() as isize;
    let shape = grid.shape();
    let strides = grid.strides();
    let n = grid.dim();
    let vals = u.values();
    // offsets in a half-space so every unordered pair is visited once
    let side = (2 * k + 1) as usize;
    let mut offsets: Vec<(Vec<isize>, f64)> = Vec::new();
    for code in 0..side.pow(n as u32) {
        let mut rest = code;
        let mut off = vec![0isize; n];
        for o in off.iter_mut().rev() {
            *o = (rest % side) as isize - k;
            rest /= side;
        }
        let dist2: isize = off.iter().map(|o| o * o).sum();
        let positive = matches!(off.iter().find(|&&o| o != 0), Some(&o) if o > 0);
        if positive && dist2 <= k * k {
            offsets.push((off, (dist2 as f64).sqrt() * h));
        }
    }
    let mut best = 0.0f64;
    for flat in 0..grid.len() {
        let idx = grid.unflatten(flat);
        for (o, d) in &offsets {
            let mut other = 0isize;
            let mut ok = true;
            for a in 0..n {
                let j = idx[a] as isize + o[a];
                if j < 0 || j >= shape[a] as isize {
                    ok = false;
                    break;
                }
                other += j * strides[a] as isize;
            }
            if ok {
                let q = (vals[flat] - vals[other as usize]).abs() / d.sqrt();
                best = best.max(q);
            }
        }
    }
    best
}

/// Runs one audit on `coarse`, using `refined` (the same problem on a finer
/// grid) for the refinement-stability test of fitted constants.
pub fn run_audit(
    kind: AuditKind,
    coarse: &AuditCase,
    refined: Option<&AuditCase>,
    setup: &AuditSetup,
) -> Result<AuditReport> {
    let mut rep = AuditReport::new(coarse.label, kind);
    if kind.needs_p_at_least_two() && coarse.config.p < 2.0 {
        rep.pass = true;
        rep.skipped = true;
        rep.note("outside p >= 2 hypothesis; audit skipped");
        return Ok(rep);
    }
    let mu = if kind.needs_mu() {
        match resolve_mu(coarse, setup) {
            Ok(mu) => Some(mu),
            Err(Error::AmbiguousFrequency { estimate }) => {
                rep.violation = f64::INFINITY;
                rep.note(format!("ambiguous frequency {estimate:.6}"));
                return Ok(rep);
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    if let Some(mu) = mu {
        rep.note(format!("mu={mu}"));
    }
    let m = measure(kind, coarse, setup, mu)?;
    rep.radii = m.radii;
    if let Some(n) = m.note {
        rep.note(n);
    }
    let tol = &setup.tol;
    let h = coarse.config.h;
    match kind {
        AuditKind::NtildeMonotone => {
            rep.violation = (-m.value).max(0.0);
            rep.pass = rep.violation <= tol.mono_factor * h;
        }
        AuditKind::PhiGrowth => {
            rep.violation = (-m.value).max(0.0);
            rep.pass = rep.violation <= tol.mono_factor * h;
        }
        AuditKind::NLeNtilde => {
            rep.violation = m.value.max(0.0);
            rep.pass = rep.violation <= tol.n_le_ntilde;
        }
        AuditKind::MaxPrinciple => {
            rep.violation = m.value.max(0.0);
            rep.pass = rep.violation <= tol.max_principle;
        }
        AuditKind::SignPreservation => {
            rep.violation = m.value;
            rep.pass = rep.violation <= tol.sign;
        }
        AuditKind::Doubling if coarse.config.p == 2.0 => {
            // no constant at p = 2: the bound is (R/r)^{2(μ+δ)} exactly
            rep.violation = m.value;
            rep.pass = rep.violation <= tol.doubling_excess;
            rep.fitted_c = Some(0.0);
        }
        _ => {
            rep.fitted_c = Some(m.value);
            if !(m.value.is_finite() && m.value >= 0.0) {
                rep.violation = f64::INFINITY;
                rep.note("fitted constant is not finite");
                return Ok(rep);
            }
            if kind == AuditKind::Nondegeneracy && !(m.value > 0.0) {
                rep.violation = f64::INFINITY;
                rep.note("vanishing lower bound");
                return Ok(rep);
            }
            let Some(fine) = refined else {
                rep.pass = true;
                rep.note("no refined case; constant finite");
                return Ok(rep);
            };
            // compare constants over the same examined radii
            let mut fine_setup = setup.clone();
            if fine_setup.radii.is_none() && !rep.radii.is_empty() && kind != AuditKind::Doubling {
                fine_setup.radii = Some(rep.radii.clone());
            }
            let mf = measure(kind, fine, &fine_setup, mu)?;
            rep.fitted_c_refined = Some(mf.value);
            let limit = if kind == AuditKind::HolderHalf {
                tol.holder_growth
            } else {
                tol.growth
            };
            rep.violation = if kind == AuditKind::Nondegeneracy {
                // a lower bound must not collapse under refinement
                (m.value - limit * mf.value).max(0.0)
            } else {
                (mf.value - limit * m.value).max(0.0)
            };
            if !mf.value.is_finite() {
                rep.violation = f64::INFINITY;
            }
            rep.pass = rep.violation <= tol.constant_slack;
            rep.note(format!("refined C={}", fmt_float(mf.value)));
        }
    }
    Ok(rep)
}

/// One of the shipped problem instances.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: String,
    pub config: ProblemConfig,
    /// When set, the Dirichlet data is shifted by a constant so that the
    /// solution vanishes at this point.
    pub zero_at: Option<Vec<f64>>,
}

impl Instance {
    pub fn with_h(&self, h: f64) -> Instance {
        Instance {
            config: self.config.with_h(h),
            ..self.clone()
        }
    }

    /// Solves the instance, applying the zero calibration if requested.
    /// Returns the effective configuration.
    pub fn solve(&self, opts: &SolveOptions) -> Result<(ProblemConfig, Field, bool)> {
        match &self.zero_at {
            Some(pt) => {
                let cal = solve_with_zero_at(&self.config, pt, opts)?;
                Ok((cal.config, cal.field, cal.report.converged))
            }
            None => {
                let (u, rep) = solve(&self.config, opts)?;
                Ok((self.config.clone(), u, rep.converged))
            }
        }
    }
}

/// The four canonical instances at spacing `h`: (A) Neumann with linear
/// data, (B) manufactured Robin solution, (C) one-sided penalty with a
/// regular free-boundary point, (D) even data with a singular point at 0.
pub fn canonical_instances(h: f64) -> Result<Vec<Instance>> {
    let mk = |id: &str, p: f64, kp: f64, km: f64, g: &str, zero: Option<Vec<f64>>| -> Result<Instance> {
        Ok(Instance {
            id: id.to_string(),
            config: ProblemConfig::new_2d(p, kp, km, h, g)?,
            zero_at: zero,
        })
    };
    Ok(vec![
        mk("A", 2.0, 0.0, 0.0, "x1", None)?,
        mk("B", 2.0, 0.5, 0.5, "exp(0.5*xn)*cos(0.5*x1)", None)?,
        mk("C", 2.0, 1.0, 0.0, "x1 - 0.1", None)?,
        mk("D", 2.0, 1.0, 1.0, "x1^2", Some(vec![0.0, 0.0]))?,
    ])
}

/// Audit center: a singular candidate if present, else the first
/// free-boundary point, else the origin.
pub fn choose_center(field: &Field, config: &ProblemConfig, quad: &QuadratureSpec) -> Result<Vec<f64>> {
    let pts = trace_zero_set(field, config)?;
    let pts = classify(&pts, field, config, default_tau(config.h), quad)?;
    let pick = pts
        .iter()
        .find(|p| p.class == PointClass::SingularCandidate && !p.ambiguous)
        .or_else(|| pts.iter().find(|p| p.class == PointClass::Regular))
        .or_else(|| pts.first());
    Ok(match pick {
        Some(p) => vec![p.x1(), 0.0],
        None => vec![0.0; config.n],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    pub solve: SolveOptions,
    pub quad: QuadratureSpec,
    pub tol: Tolerances,
    /// Solve a second time at `h / refine` for fitted-constant stability.
    pub refine: Option<f64>,
    pub mu: Option<u32>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            solve: SolveOptions::default(),
            quad: QuadratureSpec::default(),
            tol: Tolerances::default(),
            refine: Some(2.0),
            mu: None,
        }
    }
}

/// Solves each instance (and its refinement), runs each kind, and returns
/// the reports in instance-major, kind-minor order.
pub fn run_suite(instances: &[Instance], kinds: &[AuditKind], opts: &SuiteOptions) -> Vec<AuditReport> {
    let mut out = Vec::new();
    if kinds.is_empty() {
        return out;
    }
    for inst in instances {
        let fail_all = |msg: String| -> Vec<AuditReport> {
            kinds
                .iter()
                .map(|&k| {
                    let mut r = AuditReport::new(&inst.id, k);
                    r.violation = f64::INFINITY;
                    r.note(&msg);
                    r
                })
                .collect()
        };
        let coarse = match inst.solve(&opts.solve) {
            Ok((cfg, u, true)) => (cfg, u),
            Ok(_) => {
                out.extend(fail_all("solver did not converge".into()));
                continue;
            }
            Err(e) => {
                out.extend(fail_all(format!("solve failed: {e}")));
                continue;
            }
        };
        let fine = match opts.refine {
            Some(f) => match inst.with_h(inst.config.h / f).solve(&opts.solve) {
                Ok((cfg, u, true)) => Some((cfg, u)),
                Ok(_) => {
                    out.extend(fail_all("refined solve did not converge".into()));
                    continue;
                }
                Err(e) => {
                    out.extend(fail_all(format!("refined solve failed: {e}")));
                    continue;
                }
            },
            None => None,
        };
        let center = match choose_center(&coarse.1, &coarse.0, &opts.quad) {
            Ok(c) => c,
            Err(e) => {
                out.extend(fail_all(format!("free-boundary scan failed: {e}")));
                continue;
            }
        };
        let setup = AuditSetup {
            center,
            radii: None,
            mu: opts.mu,
            poly: None,
            quad: opts.quad,
            tol: opts.tol,
        };
        let c_case = AuditCase {
            label: &inst.id,
            sampler: &coarse.1,
            config: &coarse.0,
        };
        let f_case = fine.as_ref().map(|(cfg, u)| AuditCase {
            label: &inst.id,
            sampler: u,
            config: cfg,
        });
        for &k in kinds {
            let rep = match run_audit(k, &c_case, f_case.as_ref(), &setup) {
                Ok(r) => r,
                Err(e) => {
                    let mut r = AuditReport::new(&inst.id, k);
                    r.violation = f64::INFINITY;
                    r.note(format!("error: {e}"));
                    r
                }
            };
            out.push(rep);
        }
    }
    out
}

fn sanitize(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

/// CSV with header `config_id,kind,pass,violation,fitted_C,notes`.
pub fn reports_to_csv(reports: &[AuditReport]) -> String {
    let mut s = String::from("config_id,kind,pass,violation,fitted_C,notes\n");
    for r in reports {
        let c = r.fitted_c.map(fmt_float).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            sanitize(&r.config_id),
            r.kind.name(),
            r.pass,
            fmt_float(r.violation),
            c,
            sanitize(&r.notes)
        );
    }
    s
}

/// Human-readable summary, one line per report plus totals.
pub fn reports_summary(reports: &[AuditReport]) -> String {
    let mut s = String::new();
    let passed = reports.iter().filter(|r| r.pass).count();
    for r in reports {
        let tag = if r.skipped {
            "SKIP"
        } else if r.pass {
            "PASS"
        } else {
            "FAIL"
        };
        let _ = write!(s, "{:<4} {:<24} {tag}  violation={:.3e}", r.config_id, r.kind.name(), r.violation);
        if let Some(c) = r.fitted_c {
            let _ = write!(s, "  C={c:.4e}");
        }
        if let Some(c) = r.fitted_c_refined {
            let _ = write!(s, "  C_refined={c:.4e}");
        }
        if !r.notes.is_empty() {
            let _ = write!(s, "  [{}]", r.notes);
        }
        s.push('\n');
    }
    let _ = writeln!(s, "{passed}/{} audits passed", reports.len());
    s
}
