//! Weierstrass elliptic functions on the lattice `Z + tau Z`.
//!
//! Values are computed from the q-expansion
//!
//! ```text
//! P(z)  = pi^2 [ csc^2(pi z) - E2/3 - 8 sum_k a_k cos(2 pi k z) ],   a_k = k q^k / (1 - q^k)
//! P'(z) = pi^3 [ -2 cos(pi z)/sin^3(pi z) + 16 sum_k k a_k sin(2 pi k z) ]
//! ```
//!
//! with `q = exp(2 pi i tau)`, which converges for `|Im z| < Im tau`. Arguments
//! are first reduced into the fundamental strip `|Im z| <= Im tau / 2`.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// Points closer than this to a lattice point are rejected.
pub const POLE_GUARD: f64 = 1e-8;

const TAIL_TOL: f64 = 1e-18;
const MAX_SERIES_TERMS: usize = 4096;

/// Lattice parameter `tau` together with the precomputed Lambert coefficients
/// of the q-series.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusParam {
    tau: Complex64,
    nome: Complex64,
    /// `k q^k / (1 - q^k)` for `k = 1..=series_terms`.
    lambert: Vec<Complex64>,
    e2_series: Complex64,
}

impl TorusParam {
    pub fn new(tau: Complex64) -> Result<Self> {
        if !tau.re.is_finite() || !tau.im.is_finite() || tau.im <= 0.0 {
            return Err(Error::SeriesDivergence { tau });
        }
        let nome = (Complex64::i() * PI * tau).exp();
        let r = nome.norm();
        if r >= 1.0 {
            return Err(Error::SeriesDivergence { tau });
        }
        let mut terms = 1usize;
        while (terms as f64) * r.powi(terms as i32) >= TAIL_TOL {
            terms += 1;
            if terms > MAX_SERIES_TERMS {
                return Err(Error::SeriesDivergence { tau });
            }
        }
        let q = nome * nome;
        let mut qk = Complex64::new(1.0, 0.0);
        let mut lambert = Vec::with_capacity(terms);
        for k in 1..=terms {
            qk *= q;
            lambert.push(k as f64 * qk / (1.0 - qk));
        }
        let e2_series = 1.0 - 24.0 * lambert.iter().sum::<Complex64>();
        Ok(TorusParam { tau, nome, lambert, e2_series })
    }

    /// Rectangular lattice `tau = i b`.
    pub fn imaginary(b: f64) -> Result<Self> {
        Self::new(Complex64::new(0.0, b))
    }

    pub fn tau(&self) -> Complex64 {
        self.tau
    }

    /// `exp(i pi tau)`.
    pub fn nome(&self) -> Complex64 {
        self.nome
    }

    pub fn series_terms(&self) -> usize {
        self.lambert.len()
    }

    pub fn is_rectangular(&self) -> bool {
        self.tau.re == 0.0
    }

    /// Quasi-period `eta_1 = zeta(1/2) = pi^2 E2(tau) / 6`.
    pub fn eta1(&self) -> Complex64 {
        PI * PI * self.e2_series / 6.0
    }

    /// Translate `z` into `Re z in [-1/2, 1/2]`, `Im z in [-Im tau/2, Im tau/2]`.
    pub fn reduce(&self, z: Complex64) -> Complex64 {
        let n = (z.im / self.tau.im).round();
        let z1 = z - n * self.tau;
        Complex64::new(z1.re - z1.re.round(), z1.im)
    }

    /// Distance from `z` to the nearest lattice point.
    pub fn lattice_distance(&self, z: Complex64) -> f64 {
        let zr = self.reduce(z);
        let mut best = f64::INFINITY;
        for row in -1..=1 {
            let p = zr - row as f64 * self.tau;
            let d = (p - p.re.round()).norm();
            best = best.min(d);
        }
        best
    }

    fn reduce_checked(&self, z: Complex64) -> Result<Complex64> {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite argument {z}")));
        }
        let distance = self.lattice_distance(z);
        if distance < POLE_GUARD {
            return Err(Error::PoleProximity { z, distance });
        }
        Ok(self.reduce(z))
    }
}

/// Weierstrass `P(z; tau)`.
pub fn wp(z: Complex64, torus: &TorusParam) -> Result<Complex64> {
    Ok(wp_and_derivative(z, torus)?.0)
}

/// Derivative `P'(z; tau)`.
pub fn wp_prime(z: Complex64, torus: &TorusParam) -> Result<Complex64> {
    Ok(wp_and_derivative(z, torus)?.1)
}

/// `(P(z), P'(z))` sharing one pass over the series.
pub fn wp_and_derivative(z: Complex64, torus: &TorusParam) -> Result<(Complex64, Complex64)> {
    let zr = torus.reduce_checked(z)?;
    let (s, c) = ((PI * zr).sin(), (PI * zr).cos());
    let s2 = s * s;
    let w = (Complex64::new(0.0, 2.0 * PI) * zr).exp();
    let winv = 1.0 / w;
    let (mut wk, mut wik) = (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
    let mut even = Complex64::new(0.0, 0.0);
    let mut odd = Complex64::new(0.0, 0.0);
    for (k, a) in torus.lambert.iter().enumerate() {
        wk *= w;
        wik *= winv;
        even += a * (wk + wik);
        odd += (k + 1) as f64 * a * (wk - wik);
    }
    let pi2 = PI * PI;
    let value = pi2 * (1.0 / s2 - torus.e2_series / 3.0 - 4.0 * even);
    // 16 sum k a_k sin(2 pi k z) = -8 i sum k a_k (w^k - w^-k)
    let deriv = pi2 * PI * (-2.0 * c / (s2 * s) - Complex64::new(0.0, 8.0) * odd);
    Ok((value, deriv))
}

/// Fourier coefficients of `x -> P(x + zeta)` on `[0, 1)`, for modes
/// `-kmax..=kmax` (index `k + kmax`). `zeta` must not lie on a pole row.
///
/// Each coefficient is computed in closed form, so tiny high modes keep
/// full relative accuracy.
pub fn wp_line_coefficients(
    zeta: Complex64,
    torus: &TorusParam,
    kmax: usize,
) -> Result<Vec<Complex64>> {
    let tau = torus.tau;
    // move zeta into 0 < Im zeta < Im tau
    let shift = (zeta.im / tau.im).floor();
    let z = zeta - shift * tau;
    let gap = z.im.min(tau.im - z.im);
    if gap < POLE_GUARD {
        return Err(Error::PoleProximity { z: zeta, distance: gap });
    }
    let pi2 = PI * PI;
    let q = torus.nome * torus.nome;
    let e = (Complex64::new(0.0, 2.0 * PI) * z).exp();
    let mut out = vec![Complex64::new(0.0, 0.0); 2 * kmax + 1];
    // q / e has modulus below one off the pole rows, so its powers stay finite
    let q_over_e = q / e;
    out[kmax] = -pi2 * torus.e2_series / 3.0;
    let one = Complex64::new(1.0, 0.0);
    let (mut qk, mut ek, mut rk) = (one, one, one);
    for k in 1..=kmax {
        qk *= q;
        ek *= e;
        rk *= q_over_e;
        let kf = k as f64;
        let denom = 1.0 - qk;
        out[kmax + k] = -4.0 * pi2 * (kf + kf * qk / denom) * ek;
        out[kmax - k] = -4.0 * pi2 * kf * rk / denom;
    }
    Ok(out)
}

/// Lattice invariants and half-period values.
#[derive(Debug, Clone, PartialEq)]
pub struct Invariants {
    pub g2: Complex64,
    pub g3: Complex64,
    /// `P(1/2), P(tau/2), P((1+tau)/2)`.
    pub e: [Complex64; 3],
    pub eta1: Complex64,
}

/// Eisenstein-series invariants `g2, g3`, half-period values and `eta_1`.
pub fn invariants(torus: &TorusParam) -> Result<Invariants> {
    let q = torus.nome * torus.nome;
    let mut e4 = Complex64::new(1.0, 0.0);
    let mut e6 = Complex64::new(1.0, 0.0);
    let mut qk = Complex64::new(1.0, 0.0);
    for k in 1..=torus.series_terms() {
        qk *= q;
        let lam = qk / (1.0 - qk);
        let kf = k as f64;
        e4 += 240.0 * kf.powi(3) * lam;
        e6 -= 504.0 * kf.powi(5) * lam;
    }
    let pi4 = PI.powi(4);
    let g2 = 4.0 * pi4 / 3.0 * e4;
    let g3 = 8.0 * pi4 * PI * PI / 27.0 * e6;
    let tau = torus.tau;
    let e = [
        wp(Complex64::new(0.5, 0.0), torus)?,
        wp(tau / 2.0, torus)?,
        wp((1.0 + tau) / 2.0, torus)?,
    ];
    Ok(Invariants { g2, g3, e, eta1: torus.eta1() })
}

#[derive(Serialize)]
struct InvariantsDump {
    g2: [f64; 2],
    g3: [f64; 2],
    e: [[f64; 2]; 3],
    eta1: [f64; 2],
}

impl Invariants {
    /// Debug view `{g2, g3, e:[...], eta1}` with complex numbers as `[re, im]`.
    pub fn to_json_value(&self) -> serde_json::Value {
        let c = |z: Complex64| [z.re, z.im];
        serde_json::to_value(InvariantsDump {
            g2: c(self.g2),
            g3: c(self.g3),
            e: [c(self.e[0]), c(self.e[1]), c(self.e[2])],
            eta1: c(self.eta1),
        })
        .expect("plain floats serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAMMA_QUARTER: f64 = 3.625_609_908_221_908_3;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Direct lattice sum over the square |n|,|m| <= r.
    fn lattice_sum(z: Complex64, tau: Complex64, r: i64) -> Complex64 {
        let mut s = 1.0 / (z * z);
        for n in -r..=r {
            for m in -r..=r {
                if n == 0 && m == 0 {
                    continue;
                }
                let w = n as f64 + m as f64 * tau;
                s += 1.0 / ((z - w) * (z - w)) - 1.0 / (w * w);
            }
        }
        s
    }

    /// Richardson extrapolation of square partial sums (error ~ R^-2 + R^-4).
    fn lattice_oracle(z: Complex64, tau: Complex64) -> Complex64 {
        let a = lattice_sum(z, tau, 50);
        let b = lattice_sum(z, tau, 100);
        let d = lattice_sum(z, tau, 200);
        let ab = (4.0 * b - a) / 3.0;
        let bd = (4.0 * d - b) / 3.0;
        (16.0 * bd - ab) / 15.0
    }

    #[test]
    fn matches_lattice_sum() {
        for &(z, tau) in &[
            (c(0.31, 0.17), c(0.0, 1.0)),
            (c(0.12, -0.4), c(0.0, 1.3)),
            (c(0.4, 0.05), c(0.25, 0.9)),
        ] {
            let torus = TorusParam::new(tau).unwrap();
            let got = wp(z, &torus).unwrap();
            let want = lattice_oracle(z, tau);
            // the extrapolated oracle itself is good to about 1e-9
            assert!((got - want).norm() <= 1e-8 * want.norm().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn square_lattice_half_periods() {
        let torus = TorusParam::imaginary(1.0).unwrap();
        let inv = invariants(&torus).unwrap();
        let e1 = GAMMA_QUARTER.powi(4) / (8.0 * PI);
        assert!((inv.e[0].re - e1).abs() < 1e-12 * e1);
        assert!((inv.e[0].re - 6.875_185_818_020_373).abs() < 1e-11);
        assert!((inv.e[1] + e1).norm() < 1e-11 * e1);
        assert!(inv.e[2].norm() < 1e-11 * e1);
        assert!((inv.g2.re - 4.0 * e1 * e1).abs() < 1e-11 * inv.g2.norm());
        assert!(inv.g3.norm() < 1e-10);
        assert!((inv.eta1.re - PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn invariants_agree_with_half_periods() {
        for tau in [c(0.0, 0.3), c(0.0, 0.6), c(0.0, 2.5), c(0.3, 1.1), c(-0.45, 0.7)] {
            let torus = TorusParam::new(tau).unwrap();
            let inv = invariants(&torus).unwrap();
            let [e1, e2, e3] = inv.e;
            let scale = e1.norm().max(e2.norm()).max(e3.norm());
            assert!((e1 + e2 + e3).norm() < 1e-12 * scale);
            let g2 = 2.0 * (e1 * e1 + e2 * e2 + e3 * e3);
            let g3 = 4.0 * e1 * e2 * e3;
            assert!((g2 - inv.g2).norm() < 1e-12 * inv.g2.norm(), "{tau}");
            assert!((g3 - inv.g3).norm() < 1e-12 * scale.powi(3), "{tau}");
        }
    }

    #[test]
    fn mean_over_real_period_is_minus_two_eta1() {
        for tau in [c(0.0, 1.0), c(0.0, 0.45), c(0.2, 0.8)] {
            let torus = TorusParam::new(tau).unwrap();
            let n = 512;
            let shift = tau * 0.3;
            let mean: Complex64 = (0..n)
                .map(|j| wp(shift + j as f64 / n as f64, &torus).unwrap())
                .sum::<Complex64>()
                / n as f64;
            assert!((mean + 2.0 * torus.eta1()).norm() < 1e-11 * mean.norm().max(1.0));
        }
    }

    #[test]
    fn legendre_relation() {
        for tau in [c(0.0, 1.0), c(0.0, 0.35), c(0.3, 1.2)] {
            let torus = TorusParam::new(tau).unwrap();
            let n = 1024;
            // trapezoid rule is spectrally accurate for the periodic integrand
            let mean: Complex64 = (0..n)
                .map(|j| wp(0.37 + tau * (j as f64 / n as f64), &torus).unwrap())
                .sum::<Complex64>()
                / n as f64;
            let eta2 = -0.5 * tau * mean;
            let lhs = torus.eta1() * tau - eta2;
            assert!((lhs - c(0.0, PI)).norm() < 1e-10, "{tau}: {lhs}");
        }
    }

    #[test]
    fn derivative_matches_finite_difference_and_ode() {
        let torus = TorusParam::new(c(0.1, 0.9)).unwrap();
        let inv = invariants(&torus).unwrap();
        for z in [c(0.2, 0.1), c(-0.35, 0.3), c(0.05, -0.2)] {
            let (p, dp) = wp_and_derivative(z, &torus).unwrap();
            let h = 1e-5;
            let fd = (wp(z + h, &torus).unwrap() - wp(z - h, &torus).unwrap()) / (2.0 * h);
            assert!((fd - dp).norm() < 1e-7 * dp.norm().max(1.0));
            let lhs = dp * dp;
            let rhs = 4.0 * p * p * p - inv.g2 * p - inv.g3;
            assert!((lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0));
        }
    }

    #[test]
    fn rejects_poles_and_bad_tau() {
        let torus = TorusParam::imaginary(1.0).unwrap();
        assert!(matches!(wp(c(1.0, 1.0 + 1e-10), &torus), Err(Error::PoleProximity { .. })));
        assert!(wp(c(1e-6, 0.0), &torus).is_ok());
        assert!(matches!(TorusParam::new(c(0.0, -1.0)), Err(Error::SeriesDivergence { .. })));
        assert!(matches!(TorusParam::new(c(0.3, 0.0)), Err(Error::SeriesDivergence { .. })));
    }

    #[test]
    fn line_coefficients_match_sampled_transform() {
        let torus = TorusParam::new(c(0.15, 0.8)).unwrap();
        let zeta = c(0.1, 0.3);
        let kmax = 40;
        let coef = wp_line_coefficients(zeta, &torus, kmax).unwrap();
        for x in [0.0, 0.137, 0.61] {
            let series: Complex64 = (0..=2 * kmax)
                .map(|i| coef[i] * Complex64::from_polar(1.0, 2.0 * PI * (i as f64 - kmax as f64) * x))
                .sum();
            let direct = wp(zeta + x, &torus).unwrap();
            assert!((series - direct).norm() < 1e-11 * direct.norm(), "{series} vs {direct}");
        }
        // shifting by a lattice period changes nothing
        let again = wp_line_coefficients(zeta + torus.tau() * 2.0 - 1.0, &torus, kmax).unwrap();
        for (a, b) in coef.iter().zip(&again) {
            assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn periodic_and_even() {
        let torus = TorusParam::new(c(0.2, 0.7)).unwrap();
        let z = c(0.13, 0.21);
        let base = wp(z, &torus).unwrap();
        for shift in [c(1.0, 0.0), torus.tau(), 2.0 * torus.tau() - 3.0] {
            assert!((wp(z + shift, &torus).unwrap() - base).norm() < 1e-11 * base.norm());
        }
        assert!((wp(-z, &torus).unwrap() - base).norm() < 1e-12 * base.norm());
        assert!((wp_prime(-z, &torus).unwrap() + wp_prime(z, &torus).unwrap()).norm() < 1e-10);
    }
}
