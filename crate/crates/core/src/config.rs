use crate::error::{Error, Result};
use crate::expr::{parse_expr, BoundaryExpr};

/// Physical, penalty and discretization parameters of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub n: usize,
    pub p: f64,
    pub k_plus: f64,
    pub k_minus: f64,
    /// Half-width of the box `[-L, L]^{n-1} x [0, L]`.
    pub l: f64,
    pub h: f64,
    pub g: BoundaryExpr,
}

impl ProblemConfig {
    /// Validated constructor for the planar case.
    pub fn new_2d(p: f64, k_plus: f64, k_minus: f64, h: f64, g: &str) -> Result<Self> {
        let cfg = ProblemConfig {
            n: 2,
            p,
            k_plus,
            k_minus,
            l: 1.0,
            h,
            g: parse_expr(g)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_h(&self, h: f64) -> Self {
        ProblemConfig { h, ..self.clone() }
    }

    pub fn with_g(&self, g: BoundaryExpr) -> Self {
        ProblemConfig { g, ..self.clone() }
    }

    /// `k̃± = 2k±/p`, the coefficients of the boundary term in the energy.
    pub fn k_tilde(&self) -> (f64, f64) {
        (2.0 * self.k_plus / self.p, 2.0 * self.k_minus / self.p)
    }

    /// Number of cells per half-width, `L/h`.
    pub fn cells(&self) -> Result<usize> {
        if !(self.h > 0.0) || !(self.l > 0.0) {
            return Err(Error::InvalidConfig("h and L must be positive".into()));
        }
        if self.h > self.l {
            return Err(Error::SpacingTooLarge {
                h: self.h,
                l: self.l,
            });
        }
        let ratio = self.l / self.h;
        let m = ratio.round();
        if (ratio - m).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::IndivisibleSpacing {
                h: self.h,
                l: self.l,
            });
        }
        Ok(m as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.n) {
            return Err(Error::InvalidConfig(format!(
                "dimension n = {} (supported: 2, 3)",
                self.n
            )));
        }
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::InvalidConfig(format!("p = {} must exceed 1", self.p)));
        }
        for (name, k) in [("k_plus", self.k_plus), ("k_minus", self.k_minus)] {
            if !(k >= 0.0) || !k.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {k} must be finite and non-negative"
                )));
            }
        }
        if let Some(idx) = self.g.max_var_index() {
            if idx > self.n {
                return Err(Error::InvalidConfig(format!(
                    "g uses x{idx} but n = {}",
                    self.n
                )));
            }
        }
        self.cells().map(|_| ())
    }

    /// `p < 2` is admitted only on the descent path.
    pub fn requires_descent(&self) -> bool {
        self.p < 2.0
    }
}
