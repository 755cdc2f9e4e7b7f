//! Symmetric positive definite banded matrices and their Cholesky factor.

use crate::error::{Error, Result};

/// Lower band of a symmetric matrix: row `i` stores columns
/// `i - bw ..= i`, with the diagonal last.
#[derive(Debug, Clone)]
pub struct SymBanded {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, bw: usize) -> Self {
        SymBanded {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (self.bw - (i - j))
    }

    /// Adds `v` to entry `(i, j)` (and implicitly `(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..i {
                let a = self.data[self.slot(i, j)];
                y[i] += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += self.data[self.slot(i, i)] * x[i];
        }
    }

    /// In-place `L Lᵀ` factorization.
    pub fn cholesky(mut self) -> Result<BandedCholesky> {
        let bw = self.bw;
        let w = bw + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                // L[i][j] = (A[i][j] - Σ_k L[i][k] L[j][k]) / L[j][j]
                let kl = lo.max(j.saturating_sub(bw));
                let mut s = self.data[i * w + (bw - (i - j))];
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                for k in kl..j {
                    s -= self.data[ri + k] * self.data[rj + k];
                }
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: s });
                    }
                    self.data[ri + i] = s.sqrt();
                } else {
                    self.data[ri + j] = s / self.data[rj + j];
                }
            }
        }
        Ok(BandedCholesky { factor: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    factor: SymBanded,
}

impl BandedCholesky {
    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let l = &self.factor;
        let w = l.bw + 1;
        for i in 0..l.n {
            let lo = i.saturating_sub(l.bw);
            let ri = i * w + l.bw - i;
            let mut s = b[i];
            for k in lo..i {
                s -= l.data[ri + k] * b[k];
            }
            b[i] = s / l.data[ri + i];
        }
        for i in (0..l.n).rev() {
            let ri = i * w + l.bw - i;
            b[i] /= l.data[ri + i];
            let bi = b[i];
            let lo = i.saturating_sub(l.bw);
            for k in lo..i {
                b[k] -= l.data[ri + k] * bi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solves_random_spd_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (n, bw) = (40, 5);
        let mut a = SymBanded::zeros(n, bw);
        for i in 0..n {
            for j in i.saturating_sub(bw)..i {
                a.add(i, j, rng.gen_range(-1.0..1.0));
            }
            a.add(i, i, 2.0 * bw as f64 + 1.0);
        }
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut b = vec![0.0; n];
        a.mul_vec(&x, &mut b);
        let chol = a.clone().cholesky().unwrap();
        chol.solve_in_place(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = SymBanded::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 0, 2.0);
        a.add(1, 1, 1.0);
        assert!(matches!(
            a.cholesky(),
            Err(Error::NotPositiveDefinite { row: 1, .. })
        ));
    }

    #[test]
    fn get_outside_band_is_zero() {
        let mut a = SymBanded::zeros(4, 1);
        a.add(0, 1, 3.0);
        assert_eq!(a.get(1, 0), 3.0);
        assert_eq!(a.get(3, 0), 0.0);
    }
}
