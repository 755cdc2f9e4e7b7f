//! Even harmonic homogeneous polynomials, rescalings and blow-up fits.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::config::ProblemConfig;
use crate::error::{Error, Result};
use crate::field::Sampler;
use crate::functionals::{check_center, check_radius, fmt_float, surface_integral, QuadratureSpec};

/// Element of the space of harmonic polynomials homogeneous of degree `μ`
/// and even in `x_n`, as coefficients over a fixed basis.
///
/// In the plane the basis is the single polynomial
/// `Re((x1 + i x2)^μ) / ν_μ`, with `ν_μ` chosen so that the basis element
/// has unit norm in `L²((∂B_1)⁺)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomPoly {
    n: usize,
    degree: u32,
    coeffs: Vec<f64>,
}

fn basis_norm(mu: u32) -> f64 {
    if mu == 0 {
        PI.sqrt()
    } else {
        (0.5 * PI).sqrt()
    }
}

/// `(x + iy)^μ` by repeated multiplication.
fn complex_power(x: f64, y: f64, mu: u32) -> (f64, f64) {
    let (mut re, mut im) = (1.0, 0.0);
    for _ in 0..mu {
        let t = re * x - im * y;
        im = re * y + im * x;
        re = t;
    }
    (re, im)
}

impl HomPoly {
    pub fn new(n: usize, degree: u32, coeffs: Vec<f64>) -> Result<Self> {
        if n != 2 {
            return Err(Error::UnsupportedDimension(n));
        }
        if coeffs.len() != 1 {
            return Err(Error::InvalidConfig(format!(
                "{} coefficients for a basis of size 1",
                coeffs.len()
            )));
        }
        Ok(HomPoly { n, degree, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let (re, _) = complex_power(x[0], x[1], self.degree);
        self.coeffs[0] * re / basis_norm(self.degree)
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        if self.degree == 0 {
            out[0] = 0.0;
            out[1] = 0.0;
            return;
        }
        // d/dz z^μ = μ z^{μ-1}; ∂x = Re, ∂y = -Im.
        let (re, im) = complex_power(x[0], x[1], self.degree - 1);
        let s = self.coeffs[0] * self.degree as f64 / basis_norm(self.degree);
        out[0] = s * re;
        out[1] = -s * im;
    }

    pub fn scaled(&self, c: f64) -> HomPoly {
        HomPoly {
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
            ..self.clone()
        }
    }

    pub fn csv_header(&self) -> String {
        let mut s = String::from("n,mu");
        for i in 0..self.coeffs.len() {
            let _ = write!(s, ",c{i}");
        }
        s
    }

    /// `n,μ,c0[,c1...]`.
    pub fn csv_row(&self) -> String {
        let mut s = format!("{},{}", self.n, self.degree);
        for c in &self.coeffs {
            let _ = write!(s, ",{}", fmt_float(*c));
        }
        s
    }
}

impl Sampler for HomPoly {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval(x))
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.gradient(x, out);
        Ok(())
    }
}

/// Orthonormal basis of degree `μ` in `L²((∂B_1)⁺)`.
pub fn make_basis(mu: u32, n: usize) -> Result<Vec<HomPoly>> {
    if n != 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    Ok(vec![HomPoly::new(2, mu, vec![1.0])?])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// Divide by `φ(r)^{1/2}`.
    Almgren,
    /// Divide by `r^μ`.
    Homogeneous(u32),
}

/// `v(x) = u(r x + x₀) / s` on the unit half-ball.
pub struct RescaledField<'a> {
    source: &'a dyn Sampler,
    center: Vec<f64>,
    scale: f64,
    divisor: f64,
    kind: Normalization,
}

impl RescaledField<'_> {
    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn divisor(&self) -> f64 {
        self.divisor
    }

    pub fn kind(&self) -> Normalization {
        self.kind
    }

    fn map(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.center)
            .map(|(xi, ci)| ci + self.scale * xi)
            .collect()
    }
}

impl Sampler for RescaledField<'_> {
    fn dim(&self) -> usize {
        self.source.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.source.value(&self.map(x))? / self.divisor)
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.source.gradient_into(&self.map(x), out)?;
        let s = self.scale / self.divisor;
        out.iter_mut().for_each(|g| *g *= s);
        Ok(())
    }

    fn trace_breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let c = self.center[0];
        self.source
            .trace_breakpoints(c + self.scale * a, c + self.scale * b)
            .into_iter()
            .map(|t| (t - c) / self.scale)
            .collect()
    }
}

/// Rescaling of `source` around `center` at scale `r`.
pub fn rescale<'a>(
    source: &'a dyn Sampler,
    config: &ProblemConfig,
    center: &[f64],
    r: f64,
    kind: Normalization,
    quad: &QuadratureSpec,
) -> Result<RescaledField<'a>> {
    check_center(config, center)?;
    check_radius(config, center, r)?;
    let divisor = match kind {
        Normalization::Homogeneous(mu) => r.powi(mu as i32),
        Normalization::Almgren => {
            let h = surface_integral(center, r, quad, |x| source.value(x).map(|u| u * u))?;
            let phi = h / (PI * r);
            if !(phi > 0.0) {
                return Err(Error::DegenerateNormalization { radius: r });
            }
            phi.sqrt()
        }
    };
    Ok(RescaledField {
        source,
        center: center.to_vec(),
        scale: r,
        divisor,
        kind,
    })
}

/// Result of projecting `v_r^{(μ)}` onto the degree-`μ` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BlowupFit {
    pub poly: HomPoly,
    /// `‖v - Π v‖ / ‖v‖` in `L²((∂B_1)⁺)`.
    pub residual: f64,
    pub r_fit: f64,
}

/// Least-squares projection of the homogeneous rescaling at `r_fit`.
pub fn fit_blowup(
    source: &dyn Sampler,
    config: &ProblemConfig,
    center: &[f64],
    mu: u32,
    r_fit: f64,
    quad: &QuadratureSpec,
) -> Result<BlowupFit> {
    quad.validate()?;
    let min = 8.0 * config.h;
    if r_fit < min * (1.0 - 1e-12) {
        return Err(Error::Resolution { offset: r_fit, min });
    }
    let v = rescale(source, config, center, r_fit, Normalization::Homogeneous(mu), quad)?;
    let basis = make_basis(mu, config.n)?;
    let k = basis.len();
    let origin = [0.0, 0.0];
    let inner = |f: &dyn Fn(&[f64]) -> Result<f64>| surface_integral(&origin, 1.0, quad, f);
    let mut gram = vec![vec![0.0; k]; k];
    let mut rhs = vec![0.0; k];
    for i in 0..k {
        for j in 0..=i {
            let g = inner(&|x| Ok(basis[i].eval(x) * basis[j].eval(x)))?;
            gram[i][j] = g;
            gram[j][i] = g;
        }
        rhs[i] = inner(&|x| Ok(v.value(x)? * basis[i].eval(x)))?;
    }
    let coeffs = solve_small(gram, rhs)?;
    let norm2 = inner(&|x| v.value(x).map(|u| u * u))?;
    if !(norm2 > 0.0) {
        return Err(Error::DegenerateNormalization { radius: r_fit });
    }
    let fitted: Vec<f64> = coeffs.clone();
    let rem2 = inner(&|x| {
        let p: f64 = basis
            .iter()
            .zip(&fitted)
            .map(|(b, c)| c * b.eval(x))
            .sum();
        v.value(x).map(|u| (u - p) * (u - p))
    })?;
    Ok(BlowupFit {
        poly: HomPoly::new(config.n, mu, coeffs)?,
        residual: (rem2 / norm2).sqrt(),
        r_fit,
    })
}

/// Gaussian elimination with partial pivoting for the (tiny) normal system.
fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let k = b.len();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    for c in 0..k {
        let piv = (c..k)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap_or(c);
        if !(a[piv][c].abs() > 1e-12 * scale) {
            return Err(Error::DegenerateNormalMatrix);
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for i in c + 1..k {
            let f = a[i][c] / a[c][c];
            for j in c..k {
                a[i][j] -= f * a[c][j];
            }
            b[i] -= f * b[c];
        }
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Analytic, Field};
    use crate::functionals::{radial_profile, surface_integral};
    use crate::grid::build_grid;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn quad() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    fn cfg(h: f64) -> ProblemConfig {
        ProblemConfig::new_2d(2.0, 0.0, 0.0, h, "0").unwrap()
    }

    #[test]
    fn basis_shapes() {
        let p2 = &make_basis(2, 2).unwrap()[0];
        let p3 = &make_basis(3, 2).unwrap()[0];
        let nu = (0.5 * PI).sqrt();
        for x in [[0.3, 0.7], [-1.1, 0.2], [0.5, -0.4]] {
            let (a, b) = (x[0], x[1]);
            assert!((p2.eval(&x) - (a * a - b * b) / nu).abs() < 1e-14);
            assert!((p3.eval(&x) - (a * a * a - 3.0 * a * b * b) / nu).abs() < 1e-14);
        }
        assert_eq!(make_basis(2, 3), Err(Error::UnsupportedDimension(3)));
    }

    #[test]
    fn basis_is_unit_on_half_circle() {
        for mu in 0..6 {
            let b = &make_basis(mu, 2).unwrap()[0];
            let n2 = surface_integral(&[0.0, 0.0], 1.0, &quad(), |x| Ok(b.eval(x).powi(2))).unwrap();
            assert!((n2 - 1.0).abs() < 1e-12, "mu={mu} {n2}");
        }
    }

    #[test]
    fn gradient_matches_difference_quotient() {
        let p = HomPoly::new(2, 4, vec![0.7]).unwrap();
        let x = [0.3, 0.45];
        let mut g = [0.0; 2];
        p.gradient(&x, &mut g);
        let e = 1e-6;
        let dx = (p.eval(&[x[0] + e, x[1]]) - p.eval(&[x[0] - e, x[1]])) / (2.0 * e);
        let dy = (p.eval(&[x[0], x[1] + e]) - p.eval(&[x[0], x[1] - e])) / (2.0 * e);
        assert!((g[0] - dx).abs() < 1e-8 && (g[1] - dy).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn homogeneous_and_even(mu in 0u32..7, x in -1.0f64..1.0, y in -1.0f64..1.0, c in -2.0f64..2.0) {
            let p = HomPoly::new(2, mu, vec![c]).unwrap();
            let v = p.eval(&[x, y]);
            for lam in [2.0f64, 3.0] {
                let w = p.eval(&[lam * x, lam * y]);
                prop_assert!((w - lam.powi(mu as i32) * v).abs() <= 1e-10 * w.abs().max(1e-300));
            }
            prop_assert_eq!(p.eval(&[x, -y]), v);
        }
    }

    #[test]
    fn discrete_laplacian_vanishes() {
        let h = 2e-4;
        for mu in 1..6 {
            let p = &make_basis(mu, 2).unwrap()[0];
            for x in [[0.2, 0.3], [-0.5, 0.1], [0.7, 0.6]] {
                let lap = (p.eval(&[x[0] + h, x[1]])
                    + p.eval(&[x[0] - h, x[1]])
                    + p.eval(&[x[0], x[1] + h])
                    + p.eval(&[x[0], x[1] - h])
                    - 4.0 * p.eval(&x))
                    / (h * h);
                assert!(lap.abs() <= 1e-6, "mu={mu} lap={lap}");
            }
        }
    }

    fn sampled(h: f64, f: impl Fn(&[f64]) -> f64) -> Field {
        let grid = Arc::new(build_grid(&cfg(h)).unwrap());
        Field::from_fn(grid, f).unwrap()
    }

    #[test]
    fn homogeneous_rescaling_of_p2() {
        let c = cfg(0.005);
        let u = sampled(0.005, |x| x[0] * x[0] - x[1] * x[1]);
        for r in [0.3, 0.5] {
            let v = rescale(&u, &c, &[0.0, 0.0], r, Normalization::Homogeneous(2), &quad()).unwrap();
            for x in [[0.0, 0.5], [0.6, 0.3], [-0.9, 0.1], [0.0, 0.0]] {
                let want = x[0] * x[0] - x[1] * x[1];
                assert!((v.value(&x).unwrap() - want).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn almgren_rescaling_is_scale_free() {
        let c = cfg(0.01);
        let p2 = &make_basis(2, 2).unwrap()[0];
        // φ(1; p) = 1/π for the unit basis element
        let want = |x: &[f64]| p2.eval(x) * PI.sqrt();
        for r in [0.1, 0.4] {
            let v = rescale(p2, &c, &[0.0, 0.0], r, Normalization::Almgren, &quad()).unwrap();
            for x in [[0.3, 0.2], [-0.8, 0.5]] {
                assert!((v.value(&x).unwrap() - want(&x)).abs() < 1e-9);
            }
        }
        let zero = sampled(0.05, |_| 0.0);
        assert!(matches!(
            rescale(&zero, &c.with_h(0.05), &[0.0, 0.0], 0.2, Normalization::Almgren, &quad()),
            Err(Error::DegenerateNormalization { .. })
        ));
    }

    #[test]
    fn fit_recovers_p2() {
        let c = cfg(0.01);
        let p2 = HomPoly::new(2, 2, vec![1.3]).unwrap();
        let f = fit_blowup(&p2, &c, &[0.0, 0.0], 2, 0.3, &quad()).unwrap();
        assert!((f.poly.coeffs()[0] - 1.3).abs() < 1e-4);
        assert!(f.residual < 1e-4);
        assert!(matches!(
            fit_blowup(&p2, &c, &[0.0, 0.0], 2, 0.05, &quad()),
            Err(Error::Resolution { .. })
        ));
    }

    #[test]
    fn residual_is_linear_in_radius() {
        let c = cfg(0.01);
        let p2 = HomPoly::new(2, 2, vec![1.0]).unwrap();
        let q3 = HomPoly::new(2, 3, vec![0.1]).unwrap();
        let u = Analytic::new(
            2,
            move |x: &[f64]| p2.eval(x) + q3.eval(x),
            |_: &[f64], _: &mut [f64]| {},
        );
        let a = fit_blowup(&u, &c, &[0.0, 0.0], 2, 0.4, &quad()).unwrap();
        let b = fit_blowup(&u, &c, &[0.0, 0.0], 2, 0.2, &quad()).unwrap();
        let ratio = a.residual / b.residual;
        assert!((1.6..=2.4).contains(&ratio), "{ratio}");
    }

    #[test]
    fn fitted_polynomial_has_frequency_mu() {
        let c = cfg(0.01);
        for mu in [1, 2, 3] {
            let p = HomPoly::new(2, mu, vec![0.8]).unwrap();
            let f = fit_blowup(&p, &c, &[0.0, 0.0], mu, 0.2, &quad()).unwrap();
            let prof = radial_profile(&f.poly, &c, &[0.0, 0.0], &[0.25, 0.5], &quad()).unwrap();
            for row in &prof.rows {
                assert!((row.n - mu as f64).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn csv_form() {
        let p = HomPoly::new(2, 3, vec![0.5]).unwrap();
        assert_eq!(p.csv_header(), "n,mu,c0");
        assert_eq!(p.csv_row(), "2,3,5.0000000000000000e-1");
    }
}
