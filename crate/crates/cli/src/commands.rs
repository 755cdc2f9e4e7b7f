use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use thinpen_core::audits::{canonical_instances, reports_summary, reports_to_csv};
use thinpen_core::freeboundary::{default_tau, points_to_csv};
use thinpen_core::functionals::{audit_radii, fmt_float};
use thinpen_core::{
    classify, fit_blowup, frequency_limit, radial_profile, solve, solve_with_zero_at, AuditKind, Error, Field,
    ProblemConfig, SolveReport, SuiteOptions, Tolerances,
};

use crate::config::{ConfigError, Format, RadiiPolicy, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Functionals,
    Blowup,
    Freeboundary,
    Verify,
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Io { path: PathBuf, source: std::io::Error },
    /// Core error caused by the inputs (geometry, centers, radii, method).
    Input(Error),
    /// Core error raised by the analysis itself.
    Numerical(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Numerical(_) => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Input(e) => write!(f, "invalid input: {e}"),
            CliError::Numerical(e) => write!(f, "analysis failed: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::DegenerateDenominator { .. }
            | Error::AmbiguousFrequency { .. }
            | Error::DegenerateNormalization { .. }
            | Error::DegenerateNormalMatrix
            | Error::NotRegular(_)
            | Error::NotPositiveDefinite { .. } => CliError::Numerical(e),
            _ => CliError::Input(e),
        }
    }
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Outcome {
    pub success: bool,
    pub files: Vec<PathBuf>,
    pub messages: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        if self.success {
            0
        } else {
            1
        }
    }
}

struct Writer<'a> {
    dir: &'a Path,
    outcome: Outcome,
}

impl<'a> Writer<'a> {
    fn new(dir: &'a Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Writer {
            dir,
            outcome: Outcome {
                success: true,
                ..Default::default()
            },
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.outcome.files.push(path);
        Ok(())
    }

    fn fail(&mut self, msg: impl Into<String>) {
        self.outcome.success = false;
        self.outcome.messages.push(msg.into());
    }

    fn finish(self) -> Outcome {
        self.outcome
    }
}

struct Solved {
    config: ProblemConfig,
    field: Field,
    report: SolveReport,
    offset: Option<f64>,
}

fn solve_run(cfg: &RunConfig) -> Result<Solved, CliError> {
    let problem = cfg.problem_config()?;
    let opts = cfg.solve_options();
    Ok(match &cfg.problem.zero_at {
        Some(pt) => {
            let cal = solve_with_zero_at(&problem, pt, &opts)?;
            Solved {
                config: cal.config,
                field: cal.field,
                report: cal.report,
                offset: Some(cal.offset),
            }
        }
        None => {
            let (field, report) = solve(&problem, &opts)?;
            Solved {
                config: problem,
                field,
                report,
                offset: None,
            }
        }
    })
}

/// Node lattice indices, coordinates and values.
pub fn field_to_csv(u: &Field) -> String {
    let grid = u.grid();
    let n = grid.dim();
    let mut s = String::new();
    let header: Vec<String> = (1..=n)
        .map(|i| format!("i{i}"))
        .chain((1..=n).map(|i| format!("x{i}")))
        .chain(std::iter::once("u".to_string()))
        .collect();
    s.push_str(&header.join(","));
    s.push('\n');
    let mut idx = vec![0; n];
    for (k, v) in u.values().iter().enumerate() {
        grid.unflatten_into(k, &mut idx);
        for i in &idx {
            let _ = write!(s, "{i},");
        }
        for (axis, &i) in idx.iter().enumerate() {
            let _ = write!(s, "{},", fmt_float(grid.coord(axis, i)));
        }
        let _ = writeln!(s, "{}", fmt_float(*v));
    }
    s
}

fn report_text(cfg: &RunConfig, s: &Solved) -> String {
    let r = &s.report;
    let mut t = String::new();
    let _ = writeln!(t, "method = {}", cfg.method().name());
    let _ = writeln!(t, "converged = {}", r.converged);
    let _ = writeln!(t, "iterations = {}", r.iterations);
    let _ = writeln!(t, "energy = {}", fmt_float(r.energy));
    let _ = writeln!(t, "grad_norm = {}", fmt_float(r.grad_norm));
    if let Some(c) = s.offset {
        let _ = writeln!(t, "g_offset = {}", fmt_float(c));
        let _ = writeln!(t, "g_effective = {}", s.config.g);
    }
    t
}

fn solved_or_fail(cfg: &RunConfig, w: &mut Writer) -> Result<Option<Solved>, CliError> {
    let s = solve_run(cfg)?;
    if !s.report.converged {
        w.write("solve_report.txt", &report_text(cfg, &s))?;
        w.fail(format!(
            "solver did not converge in {} iterations (gradient norm {:.3e})",
            s.report.iterations, s.report.grad_norm
        ));
        return Ok(None);
    }
    Ok(Some(s))
}

fn centers(cfg: &RunConfig, s: &Solved) -> Result<Vec<Vec<f64>>, CliError> {
    if !cfg.analysis.centers.is_empty() {
        return Ok(cfg.analysis.centers.clone());
    }
    let pts = thinpen_core::trace_zero_set(&s.field, &s.config)?;
    Ok(pts
        .iter()
        .map(|p| {
            let mut c = p.location.clone();
            c.push(0.0);
            c
        })
        .collect())
}

fn radii(cfg: &RunConfig, s: &Solved, center: &[f64]) -> Vec<f64> {
    match &cfg.analysis.radii {
        RadiiPolicy::Geometric => audit_radii(&s.config, center),
        RadiiPolicy::List(v) => v.clone(),
    }
}

fn fmt_point(c: &[f64]) -> String {
    c.iter().map(|v| fmt_float(*v)).collect::<Vec<_>>().join(" ")
}

fn run_solve(cfg: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let s = solve_run(cfg)?;
    if cfg.output.wants(Format::Csv) {
        w.write("field.csv", &field_to_csv(&s.field))?;
    }
    w.write("solve_report.txt", &report_text(cfg, &s))?;
    if !s.report.converged {
        w.fail(format!(
            "solver did not converge in {} iterations (gradient norm {:.3e})",
            s.report.iterations, s.report.grad_norm
        ));
    }
    Ok(())
}

fn run_functionals(cfg: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let Some(s) = solved_or_fail(cfg, w)? else { return Ok(()) };
    let cs = centers(cfg, &s)?;
    if cs.is_empty() {
        w.fail("no free-boundary points found; set [analysis] centers");
        return Ok(());
    }
    let mut summary = String::from("center,radii,mu_hat,mu\n");
    for (k, c) in cs.iter().enumerate() {
        let mut prof = radial_profile(&s.field, &s.config, c, &radii(cfg, &s, c), &cfg.analysis.quad)?;
        let est = frequency_limit(&prof, s.config.h).ok();
        if let Some(mu) = cfg.analysis.mu.or(est.as_ref().map(|e| e.mu)) {
            prof.attach_weiss(mu as f64);
        }
        if cfg.output.wants(Format::Csv) {
            w.write(&format!("profile_{k}.csv"), &prof.to_csv())?;
        }
        let _ = writeln!(
            summary,
            "{},{},{},{}",
            fmt_point(c),
            prof.rows.len(),
            est.as_ref().map(|e| fmt_float(e.mu_hat)).unwrap_or_default(),
            est.as_ref().map(|e| e.mu.to_string()).unwrap_or_default()
        );
    }
    if cfg.output.wants(Format::Summary) {
        w.write("functionals.csv", &summary)?;
    }
    Ok(())
}

fn run_blowup(cfg: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let Some(s) = solved_or_fail(cfg, w)? else { return Ok(()) };
    let cs = centers(cfg, &s)?;
    if cs.is_empty() {
        w.fail("no free-boundary points found; set [analysis] centers");
        return Ok(());
    }
    let quad = &cfg.analysis.quad;
    let r_fit = cfg.analysis.r_fit;
    let mut csv = String::new();
    let mut notes = String::new();
    for c in &cs {
        let mu = match cfg.analysis.mu {
            Some(m) => m,
            None => {
                let prof = radial_profile(&s.field, &s.config, c, &radii(cfg, &s, c), quad)?;
                match frequency_limit(&prof, s.config.h) {
                    Ok(e) => e.mu,
                    Err(e) => {
                        let _ = writeln!(notes, "center {}: {e}", fmt_point(c));
                        w.fail(format!("center {}: {e}", fmt_point(c)));
                        continue;
                    }
                }
            }
        };
        let mut scales = vec![r_fit];
        if r_fit / 2.0 >= 8.0 * s.config.h {
            scales.push(r_fit / 2.0);
        }
        for r in scales {
            let fit = fit_blowup(&s.field, &s.config, c, mu, r, quad)?;
            if csv.is_empty() {
                csv = format!("center,r_fit,residual,{}\n", fit.poly.csv_header());
            }
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                fmt_point(c),
                fmt_float(r),
                fmt_float(fit.residual),
                fit.poly.csv_row()
            );
        }
    }
    if cfg.output.wants(Format::Csv) && !csv.is_empty() {
        w.write("blowup.csv", &csv)?;
    }
    if cfg.output.wants(Format::Summary) && !notes.is_empty() {
        w.write("blowup_notes.txt", &notes)?;
    }
    Ok(())
}

fn run_freeboundary(cfg: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let Some(s) = solved_or_fail(cfg, w)? else { return Ok(()) };
    let pts = thinpen_core::trace_zero_set(&s.field, &s.config)?;
    let tau = cfg.analysis.tau_grad.unwrap_or_else(|| default_tau(s.config.h));
    let pts = classify(&pts, &s.field, &s.config, tau, &cfg.analysis.quad)?;
    if cfg.output.wants(Format::Csv) {
        w.write("points.csv", &points_to_csv(&pts))?;
    }
    if cfg.output.wants(Format::Summary) {
        let mut t = format!("tau_grad = {}\npoints = {}\n", fmt_float(tau), pts.len());
        for p in &pts {
            let _ = write!(t, "{} {}", fmt_float(p.x1()), p.class.name());
            if let Some(mu) = p.mu {
                let _ = write!(t, " mu={mu}");
            }
            if p.ambiguous {
                t.push_str(" ambiguous");
            }
            if let Some(n) = &p.note {
                let _ = write!(t, " ({n})");
            }
            t.push('\n');
        }
        w.write("freeboundary.txt", &t)?;
    }
    Ok(())
}

fn run_verify(cfg: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let problem = cfg.problem_config()?;
    let instances = canonical_instances(problem.h)?;
    let mut solve = cfg.solve_options();
    solve.method = thinpen_core::Method::Newton;
    let opts = SuiteOptions {
        solve,
        quad: cfg.analysis.quad,
        tol: Tolerances {
            r_fit: cfg.analysis.r_fit,
            ..Tolerances::default()
        },
        refine: cfg.analysis.refine,
        mu: cfg.analysis.mu,
    };
    let reports = thinpen_core::run_suite(&instances, &AuditKind::ALL, &opts);
    w.write("audit_report.csv", &reports_to_csv(&reports))?;
    w.write("audit_summary.txt", &reports_summary(&reports))?;
    let failed = reports.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        w.fail(format!("{failed} of {} audits failed", reports.len()));
    }
    Ok(())
}

/// Runs `cmd`, writing into `out`.
pub fn dispatch(cmd: Command, cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let mut w = Writer::new(out)?;
    match cmd {
        Command::Solve => run_solve(cfg, &mut w)?,
        Command::Functionals => run_functionals(cfg, &mut w)?,
        Command::Blowup => run_blowup(cfg, &mut w)?,
        Command::Freeboundary => run_freeboundary(cfg, &mut w)?,
        Command::Verify => run_verify(cfg, &mut w)?,
    }
    Ok(w.finish())
}
