use std::sync::Arc;

use crate::config::ProblemConfig;
use crate::error::{Error, Result};
use crate::grid::{HalfGrid, NodeClass};

/// Pointwise access to a scalar function on the closed half-box.
///
/// Implemented by grid fields (through multilinear interpolation) and by
/// closed-form functions, so that every radial functional can be checked
/// against an analytic oracle.
pub trait Sampler: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()>;

    /// Tangential abscissae in `[a, b]` where the trace may have kinks
    /// (planar case only).
    fn trace_breakpoints(&self, _a: f64, _b: f64) -> Vec<f64> {
        Vec::new()
    }
}

/// Nodal values on a [`HalfGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<HalfGrid>,
    values: Vec<f64>,
}

const SNAP: f64 = 1e-9;

impl Field {
    pub fn zeros(grid: Arc<HalfGrid>) -> Self {
        let values = vec![0.0; grid.len()];
        Field { grid, values }
    }

    pub fn from_values(grid: Arc<HalfGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Field { grid, values })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Arc<HalfGrid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|k| f(&grid.point(k))).collect();
        Self::from_values(grid, values)
    }

    /// Samples a closed-form sampler at every node.
    pub fn sample(grid: Arc<HalfGrid>, s: &dyn Sampler) -> Result<Self> {
        let values = (0..grid.len())
            .map(|k| s.value(&grid.point(k)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_values(grid, values)
    }

    /// Boundary data on DIRICHLET nodes, zero on free nodes.
    pub fn with_dirichlet(grid: Arc<HalfGrid>, config: &ProblemConfig) -> Result<Self> {
        let mut values = vec![0.0; grid.len()];
        for (k, v) in values.iter_mut().enumerate() {
            if grid.class(k) == NodeClass::Dirichlet {
                *v = config.g.eval(&grid.point(k))?;
            }
        }
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &Arc<HalfGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|u|` over DIRICHLET nodes.
    pub fn max_abs_dirichlet(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.classes())
            .filter(|(_, c)| **c == NodeClass::Dirichlet)
            .fold(0.0, |m, (v, _)| m.max(v.abs()))
    }

    /// Locates the cell containing `x`: lower lattice index and local
    /// coordinate in `[0, 1]` per axis.
    fn locate(&self, x: &[f64], idx: &mut [usize], frac: &mut [f64]) -> Result<()> {
        let g = &*self.grid;
        if x.len() != g.dim() {
            return Err(Error::OutOfDomain(x.to_vec()));
        }
        let h = g.spacing();
        for a in 0..g.dim() {
            let mut t = (x[a] - g.origin(a)) / h;
            let cells = (g.shape()[a] - 1) as f64;
            if !(t >= -SNAP && t <= cells + SNAP) {
                return Err(Error::OutOfDomain(x.to_vec()));
            }
            let r = t.round();
            if (t - r).abs() < SNAP {
                t = r;
            }
            let t = t.clamp(0.0, cells);
            let i = (t.floor() as usize).min(g.shape()[a] - 2);
            idx[a] = i;
            frac[a] = t - i as f64;
        }
        Ok(())
    }

    /// Multilinear interpolation from the `2^n` surrounding nodes.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        let n = self.grid.dim();
        let mut idx = vec![0; n];
        let mut frac = vec![0.0; n];
        self.locate(x, &mut idx, &mut frac)?;
        let base = self.grid.flatten(&idx);
        let strides = self.grid.strides();
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut off = 0;
            for a in 0..n {
                if corner >> a & 1 == 1 {
                    w *= frac[a];
                    off += strides[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            if w != 0.0 {
                acc += w * self.values[base + off];
            }
        }
        Ok(acc)
    }

    /// Gradient of the multilinear interpolant. Requires distance at least
    /// one spacing from the Dirichlet faces; near `x_n = 0` the normal
    /// component is the one-sided cell difference.
    pub fn gradient_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.grid.dim()];
        self.gradient_into_checked(x, &mut out)?;
        Ok(out)
    }

    fn gradient_into_checked(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let g = &*self.grid;
        let n = g.dim();
        let lim = g.half_width() - g.spacing() + SNAP * g.spacing();
        let tangential_ok = x[..n.min(x.len()).saturating_sub(1)]
            .iter()
            .all(|c| c.abs() <= lim);
        if x.len() == n && (!tangential_ok || x[n - 1] > lim) {
            return Err(Error::TooCloseToBoundary(x.to_vec()));
        }
        let mut idx = vec![0; n];
        let mut frac = vec![0.0; n];
        self.locate(x, &mut idx, &mut frac)?;
        let base = g.flatten(&idx);
        let strides = g.strides();
        let inv_h = 1.0 / g.spacing();
        out.iter_mut().for_each(|o| *o = 0.0);
        for corner in 0..(1usize << n) {
            let mut off = 0;
            for a in 0..n {
                if corner >> a & 1 == 1 {
                    off += strides[a];
                }
            }
            let v = self.values[base + off];
            for (d, o) in out.iter_mut().enumerate() {
                let mut w = if corner >> d & 1 == 1 { inv_h } else { -inv_h };
                for a in (0..n).filter(|&a| a != d) {
                    w *= if corner >> a & 1 == 1 {
                        frac[a]
                    } else {
                        1.0 - frac[a]
                    };
                }
                *o += w * v;
            }
        }
        Ok(())
    }
}

impl Sampler for Field {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.interpolate(x)
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.gradient_into_checked(x, out)
    }

    fn trace_breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let g = &*self.grid;
        if g.dim() != 2 {
            return Vec::new();
        }
        let h = g.spacing();
        let stride = g.strides()[0];
        let mut out = Vec::new();
        let lo = ((a + g.half_width()) / h).ceil().max(0.0) as usize;
        let hi = (((b + g.half_width()) / h).floor() as usize).min(g.shape()[0] - 1);
        for i in lo..=hi {
            let x = g.coord(0, i);
            if x > a && x < b {
                out.push(x);
            }
        }
        // sign changes of the piecewise-linear trace
        for i in lo.saturating_sub(1)..hi.min(g.shape()[0] - 2) + 1 {
            let u0 = self.values[i * stride];
            let u1 = self.values[(i + 1) * stride];
            if u0 * u1 < 0.0 {
                let x = g.coord(0, i) + h * u0 / (u0 - u1);
                if x > a && x < b {
                    out.push(x);
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }
}

/// A closed-form function with its gradient.
pub struct Analytic<F, G> {
    dim: usize,
    value: F,
    gradient: G,
}

impl<F, G> Analytic<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64], &mut [f64]) + Sync,
{
    pub fn new(dim: usize, value: F, gradient: G) -> Self {
        Analytic {
            dim,
            value,
            gradient,
        }
    }
}

impl<F, G> Sampler for Analytic<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok((self.value)(x))
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (self.gradient)(x, out);
        Ok(())
    }
}

/// `u(x) = Σ c_i x_i + c_0`, harmonic with every multilinear cell exact.
pub fn linear(coeffs: Vec<f64>, offset: f64) -> impl Sampler {
    let c2 = coeffs.clone();
    Analytic::new(
        coeffs.len(),
        move |x: &[f64]| offset + x.iter().zip(&coeffs).map(|(a, b)| a * b).sum::<f64>(),
        move |_x: &[f64], out: &mut [f64]| out.copy_from_slice(&c2),
    )
}

/// `x1^2 - x2^2` in the plane.
pub fn quadratic_saddle() -> impl Sampler {
    Analytic::new(
        2,
        |x: &[f64]| x[0] * x[0] - x[1] * x[1],
        |x: &[f64], out: &mut [f64]| {
            out[0] = 2.0 * x[0];
            out[1] = -2.0 * x[1];
        },
    )
}
