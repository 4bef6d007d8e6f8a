//! Periodic functions on `[0, 1)` stored as truncated Fourier series.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// Inverse FFT plan for an `n`-point grid plus a spectral cutoff applied
/// after every operation. Products are exact convolutions of the retained
/// modes, so small high modes keep their relative accuracy.
#[derive(Clone)]
pub(crate) struct Spectral {
    n: usize,
    cutoff: usize,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("n", &self.n).field("cutoff", &self.cutoff).finish()
    }
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        Spectral { n, cutoff: n / 2 - 1, inv: FftPlanner::new().plan_fft_inverse(n) }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn set_cutoff(&mut self, cutoff: usize) {
        self.cutoff = cutoff.min(self.n / 2 - 1);
    }

    /// Signed wavenumber of FFT slot `idx` on an `m`-point grid.
    pub fn wavenumber(idx: usize, m: usize) -> i64 {
        if idx < m.div_ceil(2) {
            idx as i64
        } else {
            idx as i64 - m as i64
        }
    }

    fn slot(&self, k: i64) -> usize {
        if k >= 0 {
            k as usize
        } else {
            (self.n as i64 + k) as usize
        }
    }

    /// Coefficients from a signed array `c[k + K]`, `|k| <= K`.
    pub fn from_signed(&self, c: &[Complex64]) -> Vec<Complex64> {
        let kk = (c.len() / 2) as i64;
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        for (i, v) in c.iter().enumerate() {
            let k = i as i64 - kk;
            if k.unsigned_abs() as usize <= self.cutoff {
                out[self.slot(k)] = *v;
            }
        }
        out
    }

    fn to_signed(&self, c: &[Complex64]) -> Vec<Complex64> {
        let kk = self.cutoff as i64;
        (-kk..=kk).map(|k| c[self.slot(k)]).collect()
    }

    /// Values at the `n` grid points `j / n`.
    pub fn to_samples(&self, c: &[Complex64]) -> Vec<Complex64> {
        let mut buf = c.to_vec();
        self.inv.process(&mut buf);
        buf
    }

    pub fn derivative(&self, c: &[Complex64], order: u32) -> Vec<Complex64> {
        let mut out = c.to_vec();
        for (idx, v) in out.iter_mut().enumerate() {
            let k = Self::wavenumber(idx, self.n);
            if k.unsigned_abs() as usize > self.cutoff {
                *v = Complex64::new(0.0, 0.0);
            } else {
                *v *= Complex64::new(0.0, 2.0 * PI * k as f64).powu(order);
            }
        }
        out
    }

    /// Antiderivative with zero mean.
    pub fn antiderivative(&self, c: &[Complex64]) -> Vec<Complex64> {
        let mut out = c.to_vec();
        for (idx, v) in out.iter_mut().enumerate() {
            let k = Self::wavenumber(idx, self.n);
            if k == 0 || k.unsigned_abs() as usize > self.cutoff {
                *v = Complex64::new(0.0, 0.0);
            } else {
                *v /= Complex64::new(0.0, 2.0 * PI * k as f64);
            }
        }
        out
    }

    /// Product of two series truncated to the cutoff.
    pub fn multiply(&self, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        let (sa, sb) = (self.to_signed(a), self.to_signed(b));
        let kk = self.cutoff as i64;
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        for k in -kk..=kk {
            let lo = (k - kk).max(-kk);
            let hi = (k + kk).min(kk);
            let mut acc = Complex64::new(0.0, 0.0);
            for j in lo..=hi {
                acc += sa[(j + kk) as usize] * sb[(k - j + kk) as usize];
            }
            out[self.slot(k)] = acc;
        }
        out
    }

    /// Mean of the product over one period, `sum_k a_k b_{-k}`.
    pub fn mean_product(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        let kk = self.cutoff as i64;
        (-kk..=kk).map(|k| a[self.slot(k)] * b[self.slot(-k)]).sum()
    }
}
