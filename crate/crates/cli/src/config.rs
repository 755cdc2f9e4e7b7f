//! Sectioned `key = value` run configuration.
//!
//! ```text
//! # comment
//! [problem]
//! p = 2
//! k_plus = 1
//! k_minus = 0
//! h = 0.02
//! g = x1 - 0.1
//! ```

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use thinpen_core::{parse_expr, Method, ProblemConfig, QuadratureSpec, SolveOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, key: Option<&str>, message: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            key: key.map(str::to_string),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.key) {
            (Some(l), Some(k)) => write!(f, "line {l}: `{k}`: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(k)) => write!(f, "`{k}`: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSection {
    pub n: usize,
    pub p: f64,
    pub k_plus: f64,
    pub k_minus: f64,
    pub l: f64,
    pub h: f64,
    pub g: String,
    /// Shift `g` by a constant so the solution vanishes here.
    pub zero_at: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    /// Newton for `p >= 2`, descent otherwise.
    Auto,
    Fixed(Method),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSection {
    pub method: MethodChoice,
    /// `None` keeps the default of the chosen method.
    pub max_iters: Option<usize>,
    pub grad_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RadiiPolicy {
    /// `r_k = (L/2) 2^{-k/2}` down to `8h`, admissible ones only.
    Geometric,
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSection {
    /// Empty means: use the detected free-boundary points.
    pub centers: Vec<Vec<f64>>,
    pub radii: RadiiPolicy,
    pub quad: QuadratureSpec,
    pub mu: Option<u32>,
    pub tau_grad: Option<f64>,
    pub r_fit: f64,
    /// Refinement factor for the audit suite; `None` disables the second solve.
    pub refine: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl OutputSection {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub solver: SolverSection,
    pub analysis: AnalysisSection,
    pub output: OutputSection,
    /// Line of each key that appeared in the file, by `section.key`.
    lines: HashMap<String, usize>,
}

const KEYS: &[(&str, &[&str])] = &[
    ("problem", &["n", "p", "k_plus", "k_minus", "L", "h", "g", "zero_at"]),
    ("solver", &["method", "max_iters", "grad_tol"]),
    (
        "analysis",
        &["centers", "radii", "m_theta", "m_rho", "mu", "tau_grad", "r_fit", "refine"],
    ),
    ("output", &["directory", "formats"]),
];

fn suggest<'a>(word: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    candidates
        .into_iter()
        .map(|c| (strsim::damerau_levenshtein(word, c), c))
        .filter(|&(d, c)| d <= 2.max(c.len() / 3))
        .min_by_key(|&(d, _)| d)
        .map(|(_, c)| c)
}

struct Entry {
    line: usize,
    value: String,
}

/// Raw `section.key -> value` map with unknown names rejected.
fn tokenize(text: &str) -> Result<HashMap<String, Entry>, ConfigError> {
    let mut out: HashMap<String, Entry> = HashMap::new();
    let mut section: Option<&str> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(name) = s.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::at(line, None, "unterminated section header"))?
                .trim();
            match KEYS.iter().find(|(sec, _)| *sec == name) {
                Some((sec, _)) => section = Some(sec),
                None => {
                    let mut msg = format!("unknown section [{name}]");
                    if let Some(s) = suggest(name, KEYS.iter().map(|(s, _)| *s)) {
                        msg.push_str(&format!(", did you mean [{s}]?"));
                    }
                    return Err(ConfigError::at(line, None, msg));
                }
            }
            continue;
        }
        let Some((key, value)) = s.split_once('=') else {
            return Err(ConfigError::at(line, None, format!("expected `key = value`, found `{s}`")));
        };
        let key = key.trim();
        let value = value.trim();
        let Some(sec) = section else {
            return Err(ConfigError::at(line, Some(key), "key appears before any [section] header"));
        };
        let allowed = KEYS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            let mut msg = format!("unknown key in [{sec}]");
            if let Some(s) = suggest(key, allowed.iter().copied()) {
                msg.push_str(&format!(", did you mean `{s}`?"));
            }
            return Err(ConfigError::at(line, Some(key), msg));
        }
        if value.is_empty() {
            return Err(ConfigError::at(line, Some(key), "missing value"));
        }
        let full = format!("{sec}.{key}");
        if let Some(prev) = out.get(&full) {
            return Err(ConfigError::at(
                line,
                Some(key),
                format!("duplicate key (first set on line {})", prev.line),
            ));
        }
        out.insert(
            full,
            Entry {
                line,
                value: value.to_string(),
            },
        );
    }
    Ok(out)
}

struct Reader {
    entries: HashMap<String, Entry>,
}

impl Reader {
    fn raw(&self, full: &str) -> Option<(&str, usize)> {
        self.entries.get(full).map(|e| (e.value.as_str(), e.line))
    }

    fn key(full: &str) -> &str {
        full.split_once('.').map(|(_, k)| k).unwrap_or(full)
    }

    fn parse<T>(&self, full: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, ConfigError> {
        match self.raw(full) {
            None => Ok(None),
            Some((v, line)) => f(v)
                .map(Some)
                .map_err(|m| ConfigError::at(line, Some(Self::key(full)), m)),
        }
    }

    fn required<T>(&self, full: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<T, ConfigError> {
        self.parse(full, f)?.ok_or_else(|| ConfigError {
            line: None,
            key: Some(Self::key(full).to_string()),
            message: format!("required key missing from [{}]", full.split('.').next().unwrap_or("")),
        })
    }
}

fn real(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn nonneg(s: &str) -> Result<f64, String> {
    let v = real(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be >= 0, got {v}"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = real(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be > 0, got {v}"))
    }
}

fn count(s: &str) -> Result<usize, String> {
    s.parse().map_err(|_| format!("`{s}` is not a non-negative integer"))
}

fn point(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|c| real(c.trim())).collect()
}

fn is_auto(s: &str) -> bool {
    s.eq_ignore_ascii_case("auto")
}

impl RunConfig {
    pub fn parse_str(text: &str) -> Result<RunConfig, ConfigError> {
        let r = Reader { entries: tokenize(text)? };

        let n = r.parse("problem.n", count)?.unwrap_or(2);
        let p = r.required("problem.p", |s| {
            let v = real(s)?;
            if v > 1.0 {
                Ok(v)
            } else {
                Err(format!("must exceed 1, got {v}"))
            }
        })?;
        let problem = ProblemSection {
            n,
            p,
            k_plus: r.required("problem.k_plus", nonneg)?,
            k_minus: r.required("problem.k_minus", nonneg)?,
            l: r.parse("problem.L", positive)?.unwrap_or(1.0),
            h: r.required("problem.h", positive)?,
            g: r.required("problem.g", |s| {
                parse_expr(s).map(|_| s.to_string()).map_err(|e| e.to_string())
            })?,
            zero_at: r.parse("problem.zero_at", point)?,
        };

        let solver = SolverSection {
            method: r
                .parse("solver.method", |s| match s {
                    "auto" => Ok(MethodChoice::Auto),
                    "newton" => Ok(MethodChoice::Fixed(Method::Newton)),
                    "descent" => Ok(MethodChoice::Fixed(Method::Descent)),
                    _ => Err(format!("`{s}` is not one of auto, newton, descent")),
                })?
                .unwrap_or(MethodChoice::Auto),
            max_iters: r.parse("solver.max_iters", |s| {
                let v = count(s)?;
                if v == 0 {
                    Err("must be at least 1".into())
                } else {
                    Ok(v)
                }
            })?,
            grad_tol: r.parse("solver.grad_tol", positive)?.unwrap_or(1e-10),
        };

        let default_quad = QuadratureSpec::default();
        let quad_count = |s: &str| {
            let v = count(s)?;
            if v >= 8 && v % 2 == 0 {
                Ok(v)
            } else {
                Err(format!("must be even and at least 8, got {v}"))
            }
        };
        let analysis = AnalysisSection {
            centers: r
                .parse("analysis.centers", |s| {
                    if is_auto(s) {
                        Ok(Vec::new())
                    } else {
                        s.split(';').map(|c| point(c.trim())).collect()
                    }
                })?
                .unwrap_or_default(),
            radii: r
                .parse("analysis.radii", |s| {
                    if s == "geometric" {
                        return Ok(RadiiPolicy::Geometric);
                    }
                    let list: Vec<f64> = s
                        .split(',')
                        .map(|c| positive(c.trim()))
                        .collect::<Result<_, _>>()
                        .map_err(|e| format!("expected `geometric` or a list of radii: {e}"))?;
                    Ok(RadiiPolicy::List(list))
                })?
                .unwrap_or(RadiiPolicy::Geometric),
            quad: QuadratureSpec {
                m_theta: r.parse("analysis.m_theta", quad_count)?.unwrap_or(default_quad.m_theta),
                m_rho: r.parse("analysis.m_rho", quad_count)?.unwrap_or(default_quad.m_rho),
            },
            mu: r
                .parse("analysis.mu", |s| {
                    if is_auto(s) {
                        Ok(None)
                    } else {
                        s.parse::<u32>()
                            .map(Some)
                            .map_err(|_| format!("`{s}` is not `auto` or a non-negative integer"))
                    }
                })?
                .flatten(),
            tau_grad: r
                .parse("analysis.tau_grad", |s| if is_auto(s) { Ok(None) } else { positive(s).map(Some) })?
                .flatten(),
            r_fit: r.parse("analysis.r_fit", positive)?.unwrap_or(0.2),
            refine: r
                .parse("analysis.refine", |s| {
                    if s == "none" {
                        return Ok(None);
                    }
                    let v = real(s)?;
                    if v > 1.0 {
                        Ok(Some(v))
                    } else {
                        Err(format!("must be `none` or a factor above 1, got {v}"))
                    }
                })?
                .unwrap_or(Some(2.0)),
        };

        let output = OutputSection {
            directory: r
                .parse("output.directory", |s| Ok(PathBuf::from(s)))?
                .unwrap_or_else(|| PathBuf::from("out")),
            formats: r
                .parse("output.formats", |s| {
                    let mut v = Vec::new();
                    for f in s.split(',').map(str::trim) {
                        let f = match f {
                            "csv" => Format::Csv,
                            "summary" => Format::Summary,
                            _ => return Err(format!("unknown format `{f}` (expected csv, summary)")),
                        };
                        if !v.contains(&f) {
                            v.push(f);
                        }
                    }
                    Ok(v)
                })?
                .unwrap_or_else(|| vec![Format::Csv, Format::Summary]),
        };

        let lines = r.entries.iter().map(|(k, e)| (k.clone(), e.line)).collect();
        let cfg = RunConfig {
            problem,
            solver,
            analysis,
            output,
            lines,
        };
        cfg.problem_config()?;
        cfg.check_points()?;
        Ok(cfg)
    }

    /// Replaces `h` and re-validates the problem section.
    pub fn with_h(mut self, h: f64) -> Result<RunConfig, ConfigError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(ConfigError {
                line: None,
                key: Some("h".into()),
                message: format!("override must be > 0, got {h}"),
            });
        }
        self.problem.h = h;
        self.lines.remove("problem.h");
        self.problem_config()?;
        Ok(self)
    }

    fn error_for(&self, full: &str, message: String) -> ConfigError {
        ConfigError {
            line: self.lines.get(full).copied(),
            key: Some(full.split_once('.').map(|(_, k)| k).unwrap_or(full).to_string()),
            message,
        }
    }

    fn check_points(&self) -> Result<(), ConfigError> {
        let n = self.problem.n;
        if let Some(z) = &self.problem.zero_at {
            if z.len() != n {
                return Err(self.error_for("problem.zero_at", format!("expected {n} coordinates, got {}", z.len())));
            }
        }
        for c in &self.analysis.centers {
            if c.len() != n {
                return Err(self.error_for("analysis.centers", format!("expected {n} coordinates per center, got {}", c.len())));
            }
        }
        Ok(())
    }

    /// Core problem configuration; geometry errors are attributed to `h`.
    pub fn problem_config(&self) -> Result<ProblemConfig, ConfigError> {
        let pr = &self.problem;
        let cfg = ProblemConfig {
            n: pr.n,
            p: pr.p,
            k_plus: pr.k_plus,
            k_minus: pr.k_minus,
            l: pr.l,
            h: pr.h,
            g: parse_expr(&pr.g).map_err(|e| self.error_for("problem.g", e.to_string()))?,
        };
        cfg.validate().map_err(|e| {
            let key = match e {
                thinpen_core::Error::InvalidConfig(ref m) if m.contains("dimension") => "problem.n",
                thinpen_core::Error::VariableOutOfRange { .. } => "problem.g",
                _ => "problem.h",
            };
            self.error_for(key, e.to_string())
        })?;
        Ok(cfg)
    }

    pub fn method(&self) -> Method {
        match self.solver.method {
            MethodChoice::Fixed(m) => m,
            MethodChoice::Auto if self.problem.p >= 2.0 => Method::Newton,
            MethodChoice::Auto => Method::Descent,
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        let base = match self.method() {
            Method::Newton => SolveOptions::default(),
            Method::Descent => SolveOptions::descent(),
        };
        SolveOptions {
            max_iters: self.solver.max_iters.unwrap_or(base.max_iters),
            grad_tol: self.solver.grad_tol,
            ..base
        }
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        line: None,
        key: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    RunConfig::parse_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[problem]\np = 2\nk_plus = 1\nk_minus = 0\nh = 0.05\ng = x1 - 0.1\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::parse_str(MINIMAL).unwrap();
        assert_eq!(c.problem.n, 2);
        assert_eq!(c.problem.l, 1.0);
        assert_eq!(c.method(), Method::Newton);
        assert_eq!(c.solve_options(), SolveOptions::default());
        assert_eq!(c.analysis.radii, RadiiPolicy::Geometric);
        assert_eq!(c.analysis.quad, QuadratureSpec::default());
        assert_eq!(c.analysis.refine, Some(2.0));
        assert!(c.analysis.centers.is_empty());
        assert_eq!(c.output.formats, vec![Format::Csv, Format::Summary]);
    }

    #[test]
    fn negative_coefficient_names_key_and_line() {
        let text = MINIMAL.replace("k_plus = 1", "k_plus = -1");
        let e = RunConfig::parse_str(&text).unwrap_err();
        assert_eq!(e.key.as_deref(), Some("k_plus"));
        assert_eq!(e.line, Some(3));
        assert!(e.to_string().contains("k_plus"));
    }

    #[test]
    fn typo_gets_suggestion() {
        let text = MINIMAL.replace("k_plus", "kplus");
        let e = RunConfig::parse_str(&text).unwrap_err();
        assert_eq!(e.key.as_deref(), Some("kplus"));
        assert!(e.message.contains("did you mean `k_plus`"), "{e}");
        let e = RunConfig::parse_str("[problm]\n").unwrap_err();
        assert!(e.message.contains("[problem]"), "{e}");
    }

    #[test]
    fn missing_required_key() {
        let text = MINIMAL.replace("h = 0.05\n", "");
        let e = RunConfig::parse_str(&text).unwrap_err();
        assert_eq!(e.key.as_deref(), Some("h"));
    }

    #[test]
    fn indivisible_spacing_is_attributed_to_h() {
        let e = RunConfig::parse_str(&MINIMAL.replace("0.05", "0.3")).unwrap_err();
        assert_eq!(e.key.as_deref(), Some("h"));
        assert_eq!(e.line, Some(5));
        let e = RunConfig::parse_str(MINIMAL).unwrap().with_h(0.3).unwrap_err();
        assert_eq!(e.key.as_deref(), Some("h"));
    }

    #[test]
    fn bad_expression_is_attributed_to_g() {
        let e = RunConfig::parse_str(&MINIMAL.replace("x1 - 0.1", "x1 +")).unwrap_err();
        assert_eq!(e.key.as_deref(), Some("g"));
        assert_eq!(e.line, Some(6));
    }

    #[test]
    fn full_config_round_trip() {
        let text = format!(
            "{MINIMAL}zero_at = 0, 0 # calibrate\n\n[solver]\nmethod = descent\nmax_iters = 7\ngrad_tol = 1e-9\n\
             [analysis]\ncenters = 0.1, 0; -0.2, 0\nradii = 0.4, 0.2, 0.1\nm_theta = 64\nm_rho = 32\nmu = 2\n\
             tau_grad = 0.3\nr_fit = 0.25\nrefine = none\n[output]\ndirectory = results\nformats = csv\n"
        );
        let c = RunConfig::parse_str(&text).unwrap();
        assert_eq!(c.problem.zero_at, Some(vec![0.0, 0.0]));
        assert_eq!(c.method(), Method::Descent);
        assert_eq!(c.solve_options().max_iters, 7);
        assert_eq!(c.analysis.centers, vec![vec![0.1, 0.0], vec![-0.2, 0.0]]);
        assert_eq!(c.analysis.radii, RadiiPolicy::List(vec![0.4, 0.2, 0.1]));
        assert_eq!(c.analysis.quad, QuadratureSpec { m_theta: 64, m_rho: 32 });
        assert_eq!(c.analysis.mu, Some(2));
        assert_eq!(c.analysis.tau_grad, Some(0.3));
        assert_eq!(c.analysis.refine, None);
        assert_eq!(c.output.directory, PathBuf::from("results"));
        assert!(!c.output.wants(Format::Summary));
    }

    #[test]
    fn structural_errors() {
        for (text, needle) in [
            ("p = 2\n", "before any"),
            ("[problem\n", "unterminated"),
            ("[problem]\np 2\n", "key = value"),
            ("[problem]\np =\n", "missing value"),
            ("[problem]\np = 2\np = 3\n", "duplicate"),
        ] {
            let e = RunConfig::parse_str(text).unwrap_err();
            assert!(e.message.contains(needle), "{text:?}: {e}");
        }
    }

    #[test]
    fn auto_method_picks_descent_below_two() {
        let c = RunConfig::parse_str(&MINIMAL.replace("p = 2", "p = 1.5")).unwrap();
        assert_eq!(c.method(), Method::Descent);
        assert_eq!(c.solve_options().max_iters, SolveOptions::descent().max_iters);
    }

    #[test]
    fn wrong_arity_points() {
        let e = RunConfig::parse_str(&format!("{MINIMAL}[analysis]\ncenters = 0.1\n")).unwrap_err();
        assert_eq!(e.key.as_deref(), Some("centers"));
        assert_eq!(e.line, Some(8));
    }
}
