//! Radial functionals around a point of the flat boundary: `H`, `D`, the
//! penalty integral `P`, the surface average `φ`, the frequencies `N` and
//! `Ñ`, and the Weiss and Monneau functionals.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::blowup::HomPoly;
use crate::config::ProblemConfig;
use crate::error::{Error, Result};
use crate::field::Sampler;

/// Node counts of the quadrature rules. Angles use the trapezoid rule on
/// `[0, π]`, radii composite Simpson, and `Γ_r` composite Simpson on the
/// pieces between trace breakpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    pub m_theta: usize,
    pub m_rho: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            m_theta: 256,
            m_rho: 128,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, m) in [("m_theta", self.m_theta), ("m_rho", self.m_rho)] {
            if m < 8 || m % 2 != 0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {m} must be even and at least 8"
                )));
            }
        }
        Ok(())
    }
}

/// One radius of a [`FunctionalProfile`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRow {
    pub r: f64,
    pub h: f64,
    pub d: f64,
    pub penalty: f64,
    pub phi: f64,
    pub n: f64,
    pub n_tilde: f64,
    pub weiss: Option<f64>,
    pub monneau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalProfile {
    pub center: Vec<f64>,
    /// Penalty exponent `p`, needed for `Ñ`.
    pub p: f64,
    /// Rows in ascending order of `r`.
    pub rows: Vec<ProfileRow>,
}

impl FunctionalProfile {
    pub fn radii(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.r).collect()
    }

    pub fn n_tilde(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.n_tilde).collect()
    }

    /// Stores `W_μ` in every row.
    pub fn attach_weiss(&mut self, mu: f64) {
        let w = weiss(self, mu);
        for (row, w) in self.rows.iter_mut().zip(w) {
            row.weiss = Some(w);
        }
    }

    /// Stores precomputed `M_μ` values (same order as the rows).
    pub fn attach_monneau(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.rows.len() {
            return Err(Error::InvalidConfig(format!(
                "{} Monneau values for {} radii",
                values.len(),
                self.rows.len()
            )));
        }
        for (row, &m) in self.rows.iter_mut().zip(values) {
            row.monneau = Some(m);
        }
        Ok(())
    }

    /// CSV with header `r,H,D,P,phi,N,Ntilde[,W][,M]`.
    pub fn to_csv(&self) -> String {
        let has_w = self.rows.iter().any(|r| r.weiss.is_some());
        let has_m = self.rows.iter().any(|r| r.monneau.is_some());
        let mut s = String::from("r,H,D,P,phi,N,Ntilde");
        if has_w {
            s.push_str(",W");
        }
        if has_m {
            s.push_str(",M");
        }
        s.push('\n');
        for row in &self.rows {
            let mut cols = vec![
                row.r,
                row.h,
                row.d,
                row.penalty,
                row.phi,
                row.n,
                row.n_tilde,
            ];
            if has_w {
                cols.push(row.weiss.unwrap_or(f64::NAN));
            }
            if has_m {
                cols.push(row.monneau.unwrap_or(f64::NAN));
            }
            let line: Vec<String> = cols.iter().map(|v| fmt_float(*v)).collect();
            let _ = writeln!(s, "{}", line.join(","));
        }
        s
    }
}

/// Seventeen significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Measure of the unit half-sphere `(∂B_1)⁺`.
pub fn half_sphere_measure(n: usize) -> f64 {
    match n {
        2 => PI,
        3 => 2.0 * PI,
        _ => f64::NAN,
    }
}

/// Checks that `center` lies on `Γ` inside the box.
pub(crate) fn check_center(config: &ProblemConfig, center: &[f64]) -> Result<()> {
    let n = config.n;
    if n != 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    if center.len() != n
        || center[n - 1].abs() > 1e-12
        || center[..n - 1].iter().any(|c| !(c.abs() < config.l))
    {
        return Err(Error::NotOnGamma(center.to_vec()));
    }
    Ok(())
}

/// `B_r(x₀)⁺` must stay one spacing away from the Dirichlet faces and
/// `r ≤ L/2`.
pub(crate) fn check_radius(config: &ProblemConfig, center: &[f64], r: f64) -> Result<()> {
    let slack = 1e-12 * config.l;
    let reach = config.l - config.h + slack;
    let tangential = center[..config.n - 1]
        .iter()
        .fold(0.0f64, |m, c| m.max(c.abs()));
    if !(r > 0.0) || r > 0.5 * config.l + slack || tangential + r > reach || r > reach {
        return Err(Error::RadiusTooLarge {
            radius: r,
            center: center.to_vec(),
        });
    }
    Ok(())
}

fn trapezoid_angles(m: usize) -> impl Iterator<Item = (f64, f64)> {
    let dt = PI / m as f64;
    (0..=m).map(move |j| {
        let w = if j == 0 || j == m { 0.5 * dt } else { dt };
        (j as f64 * dt, w)
    })
}

fn simpson_weight(j: usize, m: usize, step: f64) -> f64 {
    let c = if j == 0 || j == m {
        1.0
    } else if j % 2 == 1 {
        4.0
    } else {
        2.0
    };
    c * step / 3.0
}

/// `∫_{(∂B_r)⁺(x₀)} f dσ` for a planar integrand `f(point)`.
pub fn surface_integral(
    center: &[f64],
    r: f64,
    quad: &QuadratureSpec,
    mut f: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<f64> {
    let mut acc = 0.0;
    let mut x = [0.0; 2];
    for (t, w) in trapezoid_angles(quad.m_theta) {
        x[0] = center[0] + r * t.cos();
        x[1] = r * t.sin();
        acc += w * f(&x)?;
    }
    Ok(r * acc)
}

/// `∫_{B_r⁺(x₀)} f dx` in polar coordinates.
pub fn ball_integral(
    center: &[f64],
    r: f64,
    quad: &QuadratureSpec,
    mut f: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<f64> {
    let m = quad.m_rho;
    let step = r / m as f64;
    let mut acc = 0.0;
    for j in 1..=m {
        let rho = j as f64 * step;
        let ring = surface_integral(center, rho, quad, &mut f)?;
        acc += simpson_weight(j, m, step) * ring;
    }
    Ok(acc)
}

/// `∫_{Γ_r(x₀)} f(u(s, 0)) ds`, split at the trace breakpoints of `s`.
pub fn gamma_integral(
    s: &dyn Sampler,
    center: &[f64],
    r: f64,
    quad: &QuadratureSpec,
    f: impl Fn(f64) -> f64,
) -> Result<f64> {
    let (a, b) = (center[0] - r, center[0] + r);
    let mut knots = vec![a];
    knots.extend(s.trace_breakpoints(a, b));
    knots.push(b);
    let mut acc = 0.0;
    for pair in knots.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let len = hi - lo;
        if len <= 0.0 {
            continue;
        }
        let mut m = ((quad.m_theta as f64) * len / (b - a)).ceil() as usize;
        m = m.max(2);
        m += m % 2;
        let step = len / m as f64;
        for j in 0..=m {
            let x = if j == m { hi } else { lo + j as f64 * step };
            acc += simpson_weight(j, m, step) * f(s.value(&[x, 0.0])?);
        }
    }
    Ok(acc)
}

/// Largest `|u|` over the angular nodes of `(∂B_r)⁺(x₀)`.
pub fn sup_on_sphere(s: &dyn Sampler, center: &[f64], r: f64, quad: &QuadratureSpec) -> Result<f64> {
    let mut best = 0.0f64;
    let mut x = [0.0; 2];
    for (t, _) in trapezoid_angles(quad.m_theta) {
        x[0] = center[0] + r * t.cos();
        x[1] = r * t.sin();
        best = best.max(s.value(&x)?.abs());
    }
    Ok(best)
}

/// Largest `|u|` over the polar nodes of `B_r⁺(x₀)`.
pub fn sup_on_ball(s: &dyn Sampler, center: &[f64], r: f64, quad: &QuadratureSpec) -> Result<f64> {
    let mut best = s.value(center)?.abs();
    for j in 1..=quad.m_rho {
        let rho = r * j as f64 / quad.m_rho as f64;
        best = best.max(sup_on_sphere(s, center, rho, quad)?);
    }
    Ok(best)
}

fn penalty_density(config: &ProblemConfig) -> impl Fn(f64) -> f64 {
    let (kp, km, p) = (config.k_plus, config.k_minus, config.p);
    move |u: f64| {
        if u > 0.0 {
            kp * u.powf(p)
        } else if u < 0.0 {
            km * (-u).powf(p)
        } else {
            0.0
        }
    }
}

/// `H(r)` alone.
pub fn h_of(s: &dyn Sampler, center: &[f64], r: f64, quad: &QuadratureSpec) -> Result<f64> {
    surface_integral(center, r, quad, |x| s.value(x).map(|u| u * u))
}

/// `D(r)` alone.
pub fn d_of(s: &dyn Sampler, center: &[f64], r: f64, quad: &QuadratureSpec) -> Result<f64> {
    let mut g = [0.0; 2];
    ball_integral(center, r, quad, |x| {
        s.gradient_into(x, &mut g)?;
        Ok(g[0] * g[0] + g[1] * g[1])
    })
}

/// `P(r) = ∫_{Γ_r} F(u)`.
pub fn penalty_of(
    s: &dyn Sampler,
    config: &ProblemConfig,
    center: &[f64],
    r: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    gamma_integral(s, center, r, quad, penalty_density(config))
}

/// Evaluates the functional stack at each radius (sorted ascending,
/// duplicates removed).
pub fn radial_profile(
    s: &dyn Sampler,
    config: &ProblemConfig,
    center: &[f64],
    radii: &[f64],
    quad: &QuadratureSpec,
) -> Result<FunctionalProfile> {
    quad.validate()?;
    check_center(config, center)?;
    let mut radii = radii.to_vec();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    for &r in &radii {
        check_radius(config, center, r)?;
    }
    let sphere = half_sphere_measure(config.n);
    let mut rows = Vec::with_capacity(radii.len());
    for &r in &radii {
        let h = h_of(s, center, r, quad)?;
        if !(h > 0.0) {
            return Err(Error::DegenerateDenominator { radius: r });
        }
        let d = d_of(s, center, r, quad)?;
        let penalty = penalty_of(s, config, center, r, quad)?;
        rows.push(ProfileRow {
            r,
            h,
            d,
            penalty,
            phi: h / (sphere * r.powi(config.n as i32 - 1)),
            n: r * d / h,
            n_tilde: r * (d + 2.0 / config.p * penalty) / h,
            weiss: None,
            monneau: None,
        });
    }
    Ok(FunctionalProfile {
        center: center.to_vec(),
        p: config.p,
        rows,
    })
}

/// `W_μ(r) = H(r)/r^{n-1+2μ} (N(r) - μ)` per row.
pub fn weiss(profile: &FunctionalProfile, mu: f64) -> Vec<f64> {
    let n = profile.center.len() as f64;
    profile
        .rows
        .iter()
        .map(|row| row.h / row.r.powf(n - 1.0 + 2.0 * mu) * (row.n - mu))
        .collect()
}

/// `M_μ(r) = r^{-(n-1+2μ)} ∫_{(∂B_r)⁺} (u - p_μ(· - x₀))² dσ` per radius.
pub fn monneau(
    s: &dyn Sampler,
    config: &ProblemConfig,
    center: &[f64],
    poly: &HomPoly,
    radii: &[f64],
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    quad.validate()?;
    check_center(config, center)?;
    let mu = poly.degree() as f64;
    let n = config.n as f64;
    let mut out = Vec::with_capacity(radii.len());
    let mut y = vec![0.0; config.n];
    for &r in radii {
        check_radius(config, center, r)?;
        let integral = surface_integral(center, r, quad, |x| {
            for (yi, (xi, ci)) in y.iter_mut().zip(x.iter().zip(center)) {
                *yi = xi - ci;
            }
            let d = s.value(x)? - poly.eval(&y);
            Ok(d * d)
        })?;
        out.push(integral / r.powf(n - 1.0 + 2.0 * mu));
    }
    Ok(out)
}

/// Outcome of the `Ñ(0+)` extrapolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyEstimate {
    /// Intercept of the least-squares line `Ñ(r) ≈ μ̂ + s r`.
    pub mu_hat: f64,
    pub mu: u32,
    pub slope: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    /// `|μ̂ - μ|`.
    pub margin: f64,
}

pub const SNAP_THRESHOLD: f64 = 0.25;

/// Extrapolates `Ñ` to `r = 0` and snaps to the nearest integer.
pub fn frequency_limit(profile: &FunctionalProfile, h: f64) -> Result<FrequencyEstimate> {
    let rows = &profile.rows;
    if rows.len() < 4 {
        return Err(Error::InsufficientRadii(format!(
            "{} radii, need at least 4",
            rows.len()
        )));
    }
    let rmin = rows.iter().map(|r| r.r).fold(f64::INFINITY, f64::min);
    let rmax = rows.iter().map(|r| r.r).fold(0.0, f64::max);
    if rmax < 2.0 * rmin * (1.0 - 1e-12) {
        return Err(Error::InsufficientRadii(format!(
            "radii span [{rmin}, {rmax}], less than one octave"
        )));
    }
    if rmin < 4.0 * h * (1.0 - 1e-12) {
        return Err(Error::InsufficientRadii(format!(
            "smallest radius {rmin} is below 4h = {}",
            4.0 * h
        )));
    }
    let k = rows.len() as f64;
    let mr = rows.iter().map(|r| r.r).sum::<f64>() / k;
    let mn = rows.iter().map(|r| r.n_tilde).sum::<f64>() / k;
    let sxx: f64 = rows.iter().map(|r| (r.r - mr).powi(2)).sum();
    let sxy: f64 = rows.iter().map(|r| (r.r - mr) * (r.n_tilde - mn)).sum();
    let slope = sxy / sxx;
    let mu_hat = mn - slope * mr;
    let residual = (rows
        .iter()
        .map(|r| (r.n_tilde - mu_hat - slope * r.r).powi(2))
        .sum::<f64>()
        / k)
        .sqrt();
    let snapped = mu_hat.round();
    let margin = (mu_hat - snapped).abs();
    if !mu_hat.is_finite() || margin > SNAP_THRESHOLD || snapped < 0.0 {
        return Err(Error::AmbiguousFrequency { estimate: mu_hat });
    }
    Ok(FrequencyEstimate {
        mu_hat,
        mu: snapped as u32,
        slope,
        residual,
        margin,
    })
}

/// `r_k = (L/2) 2^{-k/2}` for `k = 0, 1, ...` while `r_k ≥ floor`,
/// returned in ascending order.
pub fn geometric_radii(l: f64, floor: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let r = 0.5 * l * 2f64.powf(-0.5 * k as f64);
        if r < floor * (1.0 - 1e-12) || k > 64 {
            break;
        }
        out.push(r);
        k += 1;
    }
    out.reverse();
    out
}

/// Default audit radii around `center`: the geometric sequence truncated at
/// `8h` and restricted to balls that fit in the box.
pub fn audit_radii(config: &ProblemConfig, center: &[f64]) -> Vec<f64> {
    geometric_radii(config.l, 8.0 * config.h)
        .into_iter()
        .filter(|&r| check_radius(config, center, r).is_ok())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{linear, quadratic_saddle, Analytic, Field};
    use crate::grid::build_grid;
    use crate::solver::{solve, SolveOptions};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn analytic_cfg(kp: f64, km: f64) -> ProblemConfig {
        ProblemConfig::new_2d(2.0, kp, km, 0.01, "0").unwrap()
    }

    fn quad() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn linear_field_closed_forms() {
        let cfg = analytic_cfg(0.0, 0.0);
        let u = linear(vec![1.0, 0.0], 0.0);
        let prof = radial_profile(&u, &cfg, &[0.0, 0.0], &[0.1, 0.25, 0.5], &quad()).unwrap();
        let last = prof.rows.last().unwrap();
        assert!((last.h - PI * 0.125 / 2.0).abs() < 1e-4);
        assert!((last.d - PI * 0.25 / 2.0).abs() < 1e-4);
        for row in &prof.rows {
            assert!((row.n - 1.0).abs() < 1e-4);
            assert_eq!(row.penalty, 0.0);
            assert_eq!(row.n, row.n_tilde);
        }
    }

    #[test]
    fn saddle_frequency_and_weiss() {
        let cfg = analytic_cfg(0.0, 0.0);
        let radii = geometric_radii(1.0, 0.08);
        let mut prof = radial_profile(&quadratic_saddle(), &cfg, &[0.0, 0.0], &radii, &quad()).unwrap();
        for row in &prof.rows {
            assert!((row.n - 2.0).abs() < 1e-4, "{row:?}");
        }
        prof.attach_weiss(2.0);
        for row in &prof.rows {
            assert!(row.weiss.unwrap().abs() < 1e-6);
        }
        let est = frequency_limit(&prof, 0.01).unwrap();
        assert_eq!(est.mu, 2);
        assert!((est.mu_hat - 2.0).abs() <= 0.01);
        let lin = radial_profile(&linear(vec![1.0, 0.0], 0.0), &cfg, &[0.0, 0.0], &radii, &quad()).unwrap();
        assert_eq!(frequency_limit(&lin, 0.01).unwrap().mu, 1);
        assert!(weiss(&lin, 2.0).iter().all(|&w| w < 0.0));
    }

    #[test]
    fn weiss_vanishes_where_mu_equals_n() {
        let cfg = analytic_cfg(0.0, 0.0);
        let u = Analytic::new(
            2,
            |x: &[f64]| x[0] + x[0] * x[0] - x[1] * x[1],
            |x: &[f64], g: &mut [f64]| {
                g[0] = 1.0 + 2.0 * x[0];
                g[1] = -2.0 * x[1];
            },
        );
        let prof = radial_profile(&u, &cfg, &[0.0, 0.0], &[0.3], &quad()).unwrap();
        let w = weiss(&prof, prof.rows[0].n);
        assert_eq!(w[0], 0.0);
    }

    #[test]
    fn zero_field_is_degenerate_at_smallest_radius() {
        let cfg = analytic_cfg(1.0, 1.0);
        let zero = linear(vec![0.0, 0.0], 0.0);
        assert_eq!(
            radial_profile(&zero, &cfg, &[0.0, 0.0], &[0.4, 0.2], &quad()),
            Err(Error::DegenerateDenominator { radius: 0.2 })
        );
    }

    #[test]
    fn geometry_errors() {
        let cfg = analytic_cfg(1.0, 1.0);
        let u = linear(vec![1.0, 0.0], 0.0);
        assert!(matches!(
            radial_profile(&u, &cfg, &[0.0, 0.1], &[0.2], &quad()),
            Err(Error::NotOnGamma(_))
        ));
        assert!(matches!(
            radial_profile(&u, &cfg, &[0.0, 0.0], &[0.6], &quad()),
            Err(Error::RadiusTooLarge { .. })
        ));
        assert!(matches!(
            radial_profile(&u, &cfg, &[0.7, 0.0], &[0.4], &quad()),
            Err(Error::RadiusTooLarge { .. })
        ));
        let bad = QuadratureSpec { m_theta: 7, m_rho: 128 };
        assert!(radial_profile(&u, &cfg, &[0.0, 0.0], &[0.2], &bad).is_err());
    }

    #[test]
    fn ambiguous_frequency_from_constructed_profile() {
        let rows = [(0.05, 1.7), (0.1, 1.6), (0.2, 1.5), (0.4, 1.4)]
            .iter()
            .map(|&(r, nt)| ProfileRow {
                r,
                h: 1.0,
                d: 1.0,
                penalty: 0.0,
                phi: 1.0,
                n: nt,
                n_tilde: nt,
                weiss: None,
                monneau: None,
            })
            .collect();
        let prof = FunctionalProfile {
            center: vec![0.0, 0.0],
            p: 2.0,
            rows,
        };
        assert!(matches!(
            frequency_limit(&prof, 0.01),
            Err(Error::AmbiguousFrequency { .. })
        ));
        let mut short = prof.clone();
        short.rows.truncate(3);
        assert!(matches!(
            frequency_limit(&short, 0.01),
            Err(Error::InsufficientRadii(_))
        ));
        assert!(matches!(
            frequency_limit(&prof, 0.02),
            Err(Error::InsufficientRadii(_))
        ));
    }

    #[test]
    fn penalty_of_linear_trace() {
        // u = x1 on Γ_r(0): ∫ k+ (s+)^2 + k- (s-)^2 ds = (k+ + k-) r^3 / 3
        let cfg = analytic_cfg(1.0, 3.0);
        let u = linear(vec![1.0, 0.0], 0.0);
        let p = penalty_of(&u, &cfg, &[0.0, 0.0], 0.3, &quad()).unwrap();
        assert!((p - 4.0 * 0.027 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn monneau_oracles() {
        let cfg = analytic_cfg(0.0, 0.0);
        let p2 = HomPoly::new(2, 2, vec![1.0]).unwrap();
        let radii = [0.1, 0.2, 0.4];
        let same = monneau(&p2, &cfg, &[0.0, 0.0], &p2, &radii, &quad()).unwrap();
        assert!(same.iter().all(|m| m.abs() < 1e-8));
        let twice = Analytic::new(
            2,
            |x: &[f64]| 2.0 * p2_eval(x),
            |_: &[f64], _: &mut [f64]| {},
        );
        let m = monneau(&twice, &cfg, &[0.0, 0.0], &p2, &radii, &quad()).unwrap();
        // (2p - p)^2 = p^2 and ∫_{(∂B_1)⁺} p^2 = 1 for the unit basis element.
        for v in &m {
            assert!((v - 1.0).abs() < 1e-10, "{v}");
        }
        let p1 = HomPoly::new(2, 1, vec![1.0]).unwrap();
        let m1 = monneau(&p2, &cfg, &[0.0, 0.0], &p1, &radii, &quad()).unwrap();
        assert!(m1.iter().all(|v| v.is_finite() && *v > 0.0));
    }

    fn p2_eval(x: &[f64]) -> f64 {
        HomPoly::new(2, 2, vec![1.0]).unwrap().eval(x)
    }

    #[test]
    fn geometric_sequence() {
        let r = geometric_radii(1.0, 0.16);
        assert_eq!(r.len(), 4);
        assert!((r[3] - 0.5).abs() < 1e-15);
        assert!(r.windows(2).all(|w| (w[1] / w[0] - 2f64.sqrt()).abs() < 1e-12));
        assert!(r[0] >= 0.16);
    }

    fn solved_c(h: f64) -> (ProblemConfig, Field) {
        let cfg = ProblemConfig::new_2d(2.0, 1.0, 0.0, h, "x1 - 0.1").unwrap();
        let (u, rep) = solve(&cfg, &SolveOptions::default()).unwrap();
        assert!(rep.converged);
        (cfg, u)
    }

    #[test]
    fn solved_profile_invariants() {
        let (cfg, u) = solved_c(0.02);
        let q = quad();
        let x0 = [0.0, 0.0];
        let radii = audit_radii(&cfg, &x0);
        let prof = radial_profile(&u, &cfg, &x0, &radii, &q).unwrap();
        for row in &prof.rows {
            assert!(row.h >= 0.0 && row.d >= 0.0 && row.penalty >= 0.0 && row.phi >= 0.0);
            assert!(row.n <= row.n_tilde + 1e-10);
        }
        for w in prof.rows.windows(2) {
            assert!(w[1].n_tilde - w[0].n_tilde >= -50.0 * cfg.h);
        }
        // φ'(r)|(∂B_r)⁺|/2 = D(r) + P(r)
        for &r in radii.iter().filter(|&&r| r >= 8.0 * cfg.h) {
            let dr = 1e-3 * r;
            let phi = |r: f64| h_of(&u, &x0, r, &q).unwrap() / (PI * r);
            let lhs = (phi(r + dr) - phi(r - dr)) / (2.0 * dr) * PI * r / 2.0;
            let rhs = d_of(&u, &x0, r, &q).unwrap() + penalty_of(&u, &cfg, &x0, r, &q).unwrap();
            assert!((lhs - rhs).abs() <= 0.05 * rhs, "r={r} lhs={lhs} rhs={rhs}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn frequencies_are_scale_invariant(c in 0.1f64..10.0) {
            let cfg = ProblemConfig::new_2d(2.0, 1.0, 0.5, 0.05, "x1 - 0.1").unwrap();
            let grid = Arc::new(build_grid(&cfg).unwrap());
            let u = Field::from_fn(grid, |x| (x[0] - 0.1) * (1.0 + x[1]) + 0.3 * x[0] * x[0]).unwrap();
            let v = u.scaled(c);
            let radii = [0.2, 0.3, 0.4];
            let a = radial_profile(&u, &cfg, &[0.0, 0.0], &radii, &quad()).unwrap();
            let b = radial_profile(&v, &cfg, &[0.0, 0.0], &radii, &quad()).unwrap();
            // with p = 2 every term is quadratic in u
            for (x, y) in a.rows.iter().zip(&b.rows) {
                prop_assert!((x.n - y.n).abs() <= 1e-12 * x.n.abs().max(1.0));
                prop_assert!((x.n_tilde - y.n_tilde).abs() <= 1e-12 * x.n_tilde.abs().max(1.0));
            }
        }

        #[test]
        fn n_never_exceeds_n_tilde(kp in 0.0f64..3.0, km in 0.0f64..3.0, shift in -0.3f64..0.3) {
            let cfg = ProblemConfig::new_2d(2.5, kp, km, 0.05, "0").unwrap();
            let u = linear(vec![1.0, 0.5], shift);
            let prof = radial_profile(&u, &cfg, &[0.0, 0.0], &[0.1, 0.2, 0.4], &quad()).unwrap();
            for row in &prof.rows {
                prop_assert!(row.n <= row.n_tilde + 1e-10);
            }
        }
    }

    #[test]
    fn csv_layout() {
        let cfg = analytic_cfg(0.0, 0.0);
        let mut prof = radial_profile(&quadratic_saddle(), &cfg, &[0.0, 0.0], &[0.4, 0.2], &quad()).unwrap();
        let csv = prof.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "r,H,D,P,phi,N,Ntilde");
        assert!(lines[1].starts_with("2.0000000000000001e-1,"));
        prof.attach_weiss(2.0);
        assert!(prof.to_csv().starts_with("r,H,D,P,phi,N,Ntilde,W\n"));
    }
}
