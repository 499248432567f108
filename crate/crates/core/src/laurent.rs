//! Matrix-valued finite Laurent series Σ_{p=min}^{max} c_p λ^p.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::matrix::*;

#[derive(Clone, Debug, PartialEq)]
pub struct LaurentLoop {
    pub dim: usize,
    /// Power of λ carried by `coeffs[0]`.
    pub min: i32,
    pub coeffs: Vec<ComplexMatrix>,
}

impl LaurentLoop {
    pub fn new(dim: usize, min: i32, coeffs: Vec<ComplexMatrix>) -> Self {
        debug_assert!(coeffs.iter().all(|c| c.shape() == (dim, dim)));
        Self { dim, min, coeffs }
    }

    /// Zero loop on the window [min, max].
    pub fn zero(dim: usize, min: i32, max: i32) -> Self {
        Self::new(dim, min, vec![zeros(dim); (max - min + 1).max(0) as usize])
    }

    pub fn constant(m: ComplexMatrix) -> Self {
        Self::monomial(m, 0)
    }

    pub fn monomial(m: ComplexMatrix, p: i32) -> Self {
        Self::new(m.nrows(), p, vec![m])
    }

    pub fn identity(dim: usize) -> Self {
        Self::constant(identity(dim))
    }

    pub fn max(&self) -> i32 {
        self.min + self.coeffs.len() as i32 - 1
    }

    pub fn coeff(&self, p: i32) -> ComplexMatrix {
        let k = p - self.min;
        if k < 0 || k as usize >= self.coeffs.len() {
            zeros(self.dim)
        } else {
            self.coeffs[k as usize].clone()
        }
    }

    pub fn coeff_ref(&self, p: i32) -> Option<&ComplexMatrix> {
        let k = p - self.min;
        if k < 0 {
            None
        } else {
            self.coeffs.get(k as usize)
        }
    }

    pub fn set_coeff(&mut self, p: i32, m: ComplexMatrix) {
        if self.coeffs.is_empty() {
            self.min = p;
        }
        while p < self.min {
            self.coeffs.insert(0, zeros(self.dim));
            self.min -= 1;
        }
        while p > self.max() {
            self.coeffs.push(zeros(self.dim));
        }
        let k = (p - self.min) as usize;
        self.coeffs[k] = m;
    }

    pub fn eval(&self, lambda: C64) -> ComplexMatrix {
        let mut acc = zeros(self.dim);
        for c in self.coeffs.iter().rev() {
            acc = acc * lambda + c;
        }
        acc * lambda.powi(self.min)
    }

    pub fn add(&self, o: &Self) -> Self {
        let (lo, hi) = (self.min.min(o.min), self.max().max(o.max()));
        Self::new(self.dim, lo, (lo..=hi).map(|p| self.coeff(p) + o.coeff(p)).collect())
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(re(-1.0)))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.dim, self.min, self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let lo = self.min + o.min;
        let len = self.coeffs.len() + o.coeffs.len() - 1;
        let mut out = vec![zeros(self.dim); len];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(self.dim, lo, out)
    }

    pub fn left_mul(&self, m: &ComplexMatrix) -> Self {
        Self::new(self.dim, self.min, self.coeffs.iter().map(|c| m * c).collect())
    }

    pub fn right_mul(&self, m: &ComplexMatrix) -> Self {
        Self::new(self.dim, self.min, self.coeffs.iter().map(|c| c * m).collect())
    }

    pub fn bracket(&self, o: &Self) -> Self {
        self.mul(o).sub(&o.mul(self))
    }

    /// Multiply by λ^k.
    pub fn shift(&self, k: i32) -> Self {
        Self::new(self.dim, self.min + k, self.coeffs.clone())
    }

    pub fn map(&self, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Self {
        Self::new(self.dim, self.min, self.coeffs.iter().map(f).collect())
    }

    /// Restrict to [lo, hi], returning the loop and the Frobenius mass discarded.
    pub fn truncate(&self, lo: i32, hi: i32) -> (Self, f64) {
        let mut lost = 0.0;
        for p in self.min..=self.max() {
            if p < lo || p > hi {
                lost += norm(&self.coeffs[(p - self.min) as usize]);
            }
        }
        (Self::new(self.dim, lo, (lo..=hi).map(|p| self.coeff(p)).collect()), lost)
    }

    /// Total mass of coefficients with power < 0.
    pub fn negative_mass(&self) -> f64 {
        (self.min..0.min(self.max() + 1)).map(|p| norm(&self.coeff(p))).sum()
    }

    /// Total mass of coefficients with power > 0.
    pub fn positive_mass(&self) -> f64 {
        (1.max(self.min)..=self.max()).map(|p| norm(&self.coeff(p))).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(is_finite)
    }

    /// Values at the N-th roots of unity e^{2πim/N}.
    pub fn sample_circle(&self, n: usize) -> Vec<ComplexMatrix> {
        (0..n).map(|m| self.eval(root_of_unity(m, n))).collect()
    }
}

pub fn root_of_unity(m: usize, n: usize) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * m as f64 / n as f64)
}

/// Reusable FFT plan for N samples on the unit circle.
#[derive(Clone)]
pub struct FourierPlan {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FourierPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FourierPlan({})", self.n)
    }
}

impl FourierPlan {
    pub fn new(n: usize) -> Self {
        Self { n, fft: FftPlanner::new().plan_fft_forward(n) }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Window-[−K, K] coefficients of a loop sampled at the N-th roots of unity.
    /// Fails when the mass of the discarded DFT coefficients exceeds `tail_tol`.
    pub fn coeffs(&self, samples: &[ComplexMatrix], k: usize, tail_tol: f64) -> Result<LaurentLoop> {
        let n = self.n;
        if samples.len() != n {
            return Err(Error::Dimension(format!("{} samples for an N = {n} plan", samples.len())));
        }
        if n < 2 * k + 1 {
            return Err(Error::Dimension(format!("N = {n} < 2K+1 = {}", 2 * k + 1)));
        }
        let d = samples[0].nrows();
        let mut spectra = vec![zeros(d); n];
        let mut buf = vec![C64::new(0.0, 0.0); n];
        for i in 0..d {
            for j in 0..d {
                for (m, s) in samples.iter().enumerate() {
                    buf[m] = s[(i, j)];
                }
                self.fft.process(&mut buf);
                for (p, v) in buf.iter().enumerate() {
                    spectra[p][(i, j)] = v / n as f64;
                }
            }
        }
        let kk = k as i32;
        let idx = |p: i32| p.rem_euclid(n as i32) as usize;
        let mut tail = 0.0;
        let half = n as i32 / 2;
        for p in (-(n as i32) + half + 1)..=half {
            if p.abs() > kk {
                tail += norm(&spectra[idx(p)]);
            }
        }
        if tail > tail_tol {
            return Err(Error::Aliasing { tail, tol: tail_tol });
        }
        Ok(LaurentLoop::new(d, -kk, (-kk..=kk).map(|p| spectra[idx(p)].clone()).collect()))
    }
}

/// Discrete Fourier coefficients on the window [−K, K]; see [`FourierPlan::coeffs`].
pub fn fourier_coeffs(samples: &[ComplexMatrix], k: usize, tail_tol: f64) -> Result<LaurentLoop> {
    FourierPlan::new(samples.len()).coeffs(samples, k, tail_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{c, from_real_rows, identity};

    fn sample() -> LaurentLoop {
        let a = from_real_rows(&[&[0.0, 1.0], &[2.0, 0.0]]);
        LaurentLoop::new(2, -1, vec![a.clone(), identity(2), a.transpose()])
    }

    #[test]
    fn fourier_recovers_coefficients() {
        let g = sample();
        let back = fourier_coeffs(&g.sample_circle(16), 3, 1e-12).unwrap();
        for p in -3..=3 {
            assert!(dist(&back.coeff(p), &g.coeff(p)) < 1e-14, "p = {p}");
        }
    }

    #[test]
    fn narrow_window_reports_aliasing() {
        let err = fourier_coeffs(&sample().sample_circle(16), 0, 1e-12).unwrap_err();
        assert!(matches!(err, Error::Aliasing { .. }));
        assert!(fourier_coeffs(&sample().sample_circle(4), 2, 1e-12).is_err());
    }

    #[test]
    fn shift_multiplies_by_lambda() {
        let l = c(0.3, -0.8);
        let g = sample();
        assert!(dist(&g.shift(2).eval(l), &(g.eval(l) * (l * l))) < 1e-14);
    }
}
