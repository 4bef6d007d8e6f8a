//! Stationary KdV recursion and the spectral polynomial `Q(E)`.
//!
//! With `y'' = (E - q) y` the product `F` of two solutions obeys
//! `F''' = 4 (E - q) F' - 2 q' F`, and for the finite-gap potentials here a
//! polynomial solution `F(E, z) = sum_l f_{g-l}(z) E^l` exists. The `f_l` are
//! generated by
//!
//! ```text
//! r_l = 1/4 u'''_{l-1} + q u'_{l-1} + 1/2 q' u_{l-1},   u_l = zero-mean antiderivative of r_l,
//! f_l = sum_{j=0}^{l} d_j u_{l-j},                      d_0 = 1, u_0 = 1,
//! ```
//!
//! with the constants `d_j` fixed by the termination condition
//! `sum_j d_j u_{g+1-j} = const`. Then
//! `Q(E) = 1/4 F'^2 - 1/2 F F'' + (E - q) F^2` is independent of `z`.
//!
//! Everything runs on Fourier coefficients. Those of `q` are taken in closed
//! form and products are exact convolutions, so coefficients many orders
//! below the largest keep their relative accuracy; the `d_j` are then fitted
//! with every mode weighted by its own rounding floor.

mod fourier;
pub mod poly;

pub use poly::{Discriminant, SpectralRoot};

use crate::elliptic::{self, TorusParam};
use crate::error::{Error, Result};
use crate::potential::{genus, MultiplicityVector, PotentialKind, PotentialSpec};
use fourier::Spectral;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Largest grid the automatic resolution search will try.
const MAX_GRID: usize = 4096;
/// `-ln` of the neglected tail of `u_{g+1}` relative to its largest mode.
const TAIL_EXPONENT: f64 = 40.0;

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Options of the spectral-polynomial computation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KdvSettings {
    /// Grid size; `None` picks the default and grows it until `q` is resolved.
    pub grid: Option<usize>,
    /// Run the recursion on the specification's own line instead of the line
    /// farthest from the poles.
    pub use_spec_line: bool,
}

/// Default grid: 256 points for `sum n_k <= 8`, 512 above.
pub fn default_grid(n: Option<MultiplicityVector>) -> usize {
    match n {
        Some(n) if n.sum() > 8 => 512,
        _ => 256,
    }
}

/// A periodic function on the integration line as a truncated Fourier series.
#[derive(Debug, Clone)]
pub struct PeriodicFunctionSeries {
    coeffs: Vec<Complex64>,
    spectral: Spectral,
}

impl PeriodicFunctionSeries {
    pub fn grid_size(&self) -> usize {
        self.spectral.len()
    }

    /// Values at `x_j = j / N`.
    pub fn samples(&self) -> Vec<Complex64> {
        self.spectral.to_samples(&self.coeffs)
    }

    pub fn derivative(&self, order: u32) -> Self {
        PeriodicFunctionSeries {
            coeffs: self.spectral.derivative(&self.coeffs, order),
            spectral: self.spectral.clone(),
        }
    }

    pub fn mean(&self) -> Complex64 {
        self.coeffs[0]
    }

    /// Value at an arbitrary `x` by direct summation.
    pub fn eval(&self, x: f64) -> Complex64 {
        let n = self.spectral.len();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                let k = Spectral::wavenumber(idx, n) as f64;
                c * Complex64::from_polar(1.0, 2.0 * PI * k * x)
            })
            .sum()
    }
}

/// The recursion basis `u_0..u_{g+1}` and the solved constants `d_1..d_g`.
#[derive(Debug, Clone)]
pub struct KdVChain {
    spectral: Spectral,
    genus: u32,
    line: Complex64,
    q: Vec<Complex64>,
    basis: Vec<Vec<Complex64>>,
    constants: Vec<Complex64>,
    termination_residual: f64,
}

impl KdVChain {
    pub fn genus(&self) -> u32 {
        self.genus
    }

    pub fn grid_size(&self) -> usize {
        self.spectral.len()
    }

    /// Highest retained Fourier mode.
    pub fn cutoff(&self) -> usize {
        self.spectral.cutoff()
    }

    /// Base point of the line the recursion ran on.
    pub fn line(&self) -> Complex64 {
        self.line
    }

    /// `d_1..d_g`.
    pub fn constants(&self) -> &[Complex64] {
        &self.constants
    }

    /// Largest `|sum_j d_j u_{g+1-j}|` over the nonzero modes, each relative
    /// to the size of the summands that produced it.
    pub fn termination_residual(&self) -> f64 {
        self.termination_residual
    }

    fn series(&self, coeffs: Vec<Complex64>) -> PeriodicFunctionSeries {
        PeriodicFunctionSeries { coeffs, spectral: self.spectral.clone() }
    }

    pub fn basis(&self, l: usize) -> PeriodicFunctionSeries {
        self.series(self.basis[l].clone())
    }

    pub fn potential(&self) -> PeriodicFunctionSeries {
        self.series(self.q.clone())
    }

    /// `f_l = sum_{j=0}^{l} d_j u_{l-j}`.
    pub fn f(&self, l: usize) -> PeriodicFunctionSeries {
        let mut out = self.basis[l].clone();
        for j in 1..=l {
            let d = self.constants[j - 1];
            for (o, u) in out.iter_mut().zip(&self.basis[l - j]) {
                *o += d * u;
            }
        }
        self.series(out)
    }
}

/// Farthest lines from the pole rows keep the fewest modes, but far-away
/// lines make `q` nearly constant and the termination system singular, so
/// the distance to the nearest pole row is capped.
const MAX_POLE_DISTANCE: f64 = 0.5;

fn best_line(spec: &PotentialSpec) -> Complex64 {
    match spec.kind() {
        PotentialKind::Elliptic(n) => {
            let b = spec.tau().im;
            let real_row = n.get(0) > 0 || n.get(1) > 0;
            let half_row = n.get(2) > 0 || n.get(3) > 0;
            let d = MAX_POLE_DISTANCE;
            let y = match (real_row, half_row) {
                (true, false) => (b / 2.0).min(d),
                (false, true) => b / 2.0 - (b / 2.0).min(d),
                _ => b / 4.0,
            };
            Complex64::new(0.0, y)
        }
        PotentialKind::TrigLimit(_) => {
            let y = spec.z0().im;
            Complex64::new(0.0, y.signum() * y.abs().min(MAX_POLE_DISTANCE))
        }
        PotentialKind::Constant(_) => spec.z0(),
    }
}

/// Smallest cutoff `K` at which modes of `u_l ~ k^(2l+1) exp(-alpha k)` have
/// decayed by `exp(-TAIL_EXPONENT)` from their peak, and that tail estimate
/// at `k_max`. Returns `k_max + 1` when no admissible `K <= k_max` exists.
fn required_cutoff(alpha: f64, l: usize, k_max: usize) -> (usize, f64) {
    if !alpha.is_finite() {
        return (4.min(k_max), 0.0);
    }
    let p = (2 * l + 1) as f64;
    let peak = (p / alpha).max(1.0);
    let log_drop = |k: f64| alpha * (k - peak) - p * (k / peak).ln();
    let tail = (-log_drop(k_max as f64)).exp().min(1.0);
    let mut k = peak.ceil().max(4.0) as usize;
    while log_drop(k as f64) < TAIL_EXPONENT {
        k += 1;
        if k > k_max {
            return (k_max + 1, tail);
        }
    }
    (k, tail)
}

/// `u_l` from `u_{l-1}`; with `magnitudes` every intermediate is replaced by
/// its modulus.
fn recursion_step(
    spectral: &Spectral,
    prev: &[Complex64],
    q: &[Complex64],
    dq: &[Complex64],
    magnitudes: bool,
) -> Vec<Complex64> {
    let abs = |v: Vec<Complex64>| {
        if magnitudes {
            v.iter().map(|c| Complex64::new(c.norm(), 0.0)).collect()
        } else {
            v
        }
    };
    let d1 = abs(spectral.derivative(prev, 1));
    let d3 = abs(spectral.derivative(prev, 3));
    let qd = spectral.multiply(q, &d1);
    let dqu = spectral.multiply(dq, prev);
    let r: Vec<Complex64> = (0..prev.len()).map(|i| 0.25 * d3[i] + qd[i] + 0.5 * dqu[i]).collect();
    abs(spectral.antiderivative(&r))
}

/// Build the recursion basis for genus `g` on an `n_grid`-point grid.
pub fn kdv_chain(spec: &PotentialSpec, g: u32, n_grid: usize) -> Result<KdVChain> {
    kdv_chain_on(spec, g, n_grid, &KdvSettings { grid: Some(n_grid), use_spec_line: false })
}

fn kdv_chain_on(spec: &PotentialSpec, g: u32, n_grid: usize, settings: &KdvSettings) -> Result<KdVChain> {
    if n_grid < 16 || !n_grid.is_power_of_two() {
        return Err(Error::InvalidInput(format!("grid size {n_grid} must be a power of two >= 16")));
    }
    let line = if settings.use_spec_line { spec.z0() } else { best_line(spec) };
    let on_line = spec.with_z0(line)?;
    let mut spectral = Spectral::new(n_grid);
    let k_max = n_grid / 2 - 1;
    let alpha = on_line.line_decay_rate();
    let (needed, tail) = required_cutoff(alpha, g as usize + 1, k_max);
    // products lose accuracy within `needed` modes of the cutoff, so the
    // termination rows stop that far below it
    if 2 * needed > k_max {
        return Err(Error::ResolutionError { grid: n_grid, ratio: tail });
    }
    // every representable mode is kept, so refining the grid refines the truncation
    let cutoff = if alpha.is_finite() { k_max } else { needed };
    spectral.set_cutoff(cutoff);
    let (q_signed, q_bound) = on_line.line_coefficients_with_bound(cutoff)?;
    let q = spectral.from_signed(&q_signed);
    let q_abs = spectral.from_signed(&q_bound.iter().map(|&m| Complex64::new(m, 0.0)).collect::<Vec<_>>());
    let dq = spectral.derivative(&q, 1);

    let mut u0 = vec![zero(); n_grid];
    u0[0] = Complex64::new(1.0, 0.0);
    let mut basis = vec![u0.clone()];
    // Majorants: the same recursion on absolute values bounds the summands
    // behind every coefficient, hence its rounding error.
    let dq_abs: Vec<Complex64> =
        spectral.derivative(&q_abs, 1).iter().map(|c| Complex64::new(c.norm(), 0.0)).collect();
    let mut majorant = vec![u0];
    for _ in 1..=g + 1 {
        let next = recursion_step(&spectral, basis.last().unwrap(), &q, &dq, false);
        basis.push(next);
        let next = recursion_step(&spectral, majorant.last().unwrap(), &q_abs, &dq_abs, true);
        majorant.push(next);
    }

    let gi = g as usize;
    let row_limit = if spectral.cutoff() > 2 * needed { spectral.cutoff() - needed } else { spectral.cutoff() };
    let peak: Vec<f64> = majorant.iter().map(|m| m.iter().map(|c| c.re).fold(0.0, f64::max)).collect();
    // rows are divided by their rounding floor, so accurate small modes count
    // as much as large ones and cancelled modes count for nothing
    let mut rows: Vec<(usize, f64)> = Vec::new();
    for idx in 0..n_grid {
        let k = Spectral::wavenumber(idx, n_grid).unsigned_abs() as usize;
        if k == 0 || k > row_limit {
            continue;
        }
        let floor = (1..=gi + 1)
            .filter(|&l| peak[l] > 0.0)
            .map(|l| majorant[l][idx].re / peak[l])
            .fold(0.0, f64::max);
        if floor > 1e-280 {
            rows.push((idx, floor));
        }
    }
    let constants = if gi == 0 {
        Vec::new()
    } else {
        let mut a = DMatrix::<Complex64>::zeros(rows.len(), gi);
        let mut rhs = DVector::<Complex64>::zeros(rows.len());
        for (row, &(idx, floor)) in rows.iter().enumerate() {
            for j in 1..=gi {
                a[(row, j - 1)] = basis[gi + 1 - j][idx] / (peak[gi + 1 - j] * floor);
            }
            rhs[row] = -basis[gi + 1][idx] / (peak[gi + 1] * floor);
        }
        let svd = a.svd(true, true);
        let sv = &svd.singular_values;
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > 1e-13 * smax) {
            return Err(Error::RankDeficiency { ratio: smin / smax });
        }
        let x = svd
            .solve(&rhs, 0.0)
            .map_err(|e| Error::TolFailure(format!("least-squares solve failed: {e}")))?;
        (0..gi).map(|j| x[j] * peak[gi + 1] / peak[gi - j]).collect()
    };

    // componentwise backward error of the termination condition
    let mut termination_residual: f64 = 0.0;
    for &(idx, _) in &rows {
        let mut term = basis[gi + 1][idx];
        let mut bound = majorant[gi + 1][idx].re;
        for j in 1..=gi {
            term += constants[j - 1] * basis[gi + 1 - j][idx];
            bound += constants[j - 1].norm() * majorant[gi + 1 - j][idx].re;
        }
        if bound > 0.0 {
            termination_residual = termination_residual.max(term.norm() / bound);
        }
    }

    Ok(KdVChain { spectral, genus: g, line, q, basis, constants, termination_residual })
}

/// `F(E, z) = sum_{l=0}^{g} f_{g-l}(z) E^l`.
pub fn product_solution(chain: &KdVChain, e: Complex64) -> PeriodicFunctionSeries {
    let g = chain.genus as usize;
    let mut acc = vec![zero(); chain.grid_size()];
    let mut pow = Complex64::new(1.0, 0.0);
    for l in 0..=g {
        let f = chain.f(g - l);
        for (a, c) in acc.iter_mut().zip(&f.coeffs) {
            *a += pow * c;
        }
        pow *= e;
    }
    chain.series(acc)
}

/// Monic spectral polynomial with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPolynomial {
    /// Descending coefficients, leading one equal to 1.
    pub coefficients: Vec<Complex64>,
    pub genus: u32,
    pub n: Option<MultiplicityVector>,
    /// `None` for the trigonometric limit.
    pub tau: Option<Complex64>,
    /// Largest relative spread of `Q(E, z)` over the grid at the sample `E`.
    pub z_constancy_diag: f64,
    pub termination_residual: f64,
    /// Grid used; `None` for closed forms.
    pub grid: Option<usize>,
}

impl SpectralPolynomial {
    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, e: Complex64) -> Complex64 {
        poly::eval(&self.coefficients, e)
    }

    /// Largest imaginary part of a coefficient, weighted like
    /// [`poly::scaled_coefficient_distance`].
    pub fn imaginary_defect(&self, scale: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| c.im.abs() / scale.powi(i as i32))
            .fold(0.0, f64::max)
    }

    /// JSON view `{n, tau_im, degree, coeffs, z_constancy, roots}`.
    pub fn to_json_value(&self, roots: &[SpectralRoot]) -> serde_json::Value {
        serde_json::json!({
            "n": self.n.map(|n| n.as_array()),
            "tau_im": self.tau.map(|t| t.im),
            "degree": self.degree(),
            "coeffs": self.coefficients.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>(),
            "z_constancy": self.z_constancy_diag,
            "roots": roots.iter().map(|r| serde_json::json!({
                "re": r.value.re,
                "im": r.value.im,
                "mult": r.multiplicity,
                "real": r.is_real,
            })).collect::<Vec<_>>(),
        })
    }
}

fn genus_of(spec: &PotentialSpec) -> u32 {
    match spec.kind() {
        PotentialKind::Elliptic(n) => genus(n),
        PotentialKind::TrigLimit(n) => n.get(0).max(n.get(1)),
        PotentialKind::Constant(_) => 0,
    }
}

/// Sample radius `2 (1 + max|e_k| sum n_k(n_k+1))` for the constancy check.
fn sample_radius(spec: &PotentialSpec) -> Result<f64> {
    let weight = spec.multiplicities().map(|n| n.weight()).unwrap_or(0) as f64;
    let emax = match spec.kind() {
        PotentialKind::Elliptic(_) => {
            elliptic::invariants(spec.torus())?.e.iter().map(|e| e.norm()).fold(0.0, f64::max)
        }
        PotentialKind::TrigLimit(_) => PI * PI,
        PotentialKind::Constant(c) => c.norm(),
    };
    Ok(2.0 * (1.0 + emax * weight.max(1.0)))
}

/// Q for the default settings.
pub fn spectral_polynomial(spec: &PotentialSpec) -> Result<SpectralPolynomial> {
    spectral_polynomial_with(spec, &KdvSettings::default())
}

pub fn spectral_polynomial_with(
    spec: &PotentialSpec,
    settings: &KdvSettings,
) -> Result<SpectralPolynomial> {
    let g = genus_of(spec);
    let chain = match settings.grid {
        Some(n) => kdv_chain_on(spec, g, n, settings)?,
        None => {
            let mut n = default_grid(spec.multiplicities());
            loop {
                match kdv_chain_on(spec, g, n, settings) {
                    Err(Error::ResolutionError { .. }) if n < MAX_GRID => n *= 2,
                    other => break other?,
                }
            }
        }
    };
    if !(chain.termination_residual <= 1e-9) {
        return Err(Error::TolFailure(format!(
            "recursion termination residual {:.3e} exceeds 1e-9",
            chain.termination_residual
        )));
    }
    let gi = g as usize;
    let samples = |s: &PeriodicFunctionSeries| s.samples();
    // A_i = f_{g-i}: coefficient of E^i in F
    let a: Vec<PeriodicFunctionSeries> = (0..=gi).map(|i| chain.f(gi - i)).collect();
    let a0: Vec<Vec<Complex64>> = a.iter().map(samples).collect();
    let a1: Vec<Vec<Complex64>> = a.iter().map(|s| s.derivative(1).samples()).collect();
    let a2: Vec<Vec<Complex64>> = a.iter().map(|s| s.derivative(2).samples()).collect();
    let qt: Vec<Complex64> = chain.potential().samples().iter().map(|q| -q).collect();
    let npts = chain.grid_size();
    let deg = 2 * gi + 1;
    // b[k][j]: coefficient of E^k at grid point j
    let mut b = vec![vec![zero(); npts]; deg + 1];
    for i in 0..=gi {
        for j in 0..=gi {
            for p in 0..npts {
                let prod = a0[i][p] * a0[j][p];
                b[i + j][p] += 0.25 * a1[i][p] * a1[j][p] - 0.5 * a0[i][p] * a2[j][p] + qt[p] * prod;
                b[i + j + 1][p] += prod;
            }
        }
    }
    let mean = |v: &[Complex64]| v.iter().sum::<Complex64>() / v.len() as f64;
    // exact period means of the products, mode by mode
    let sp = &chain.spectral;
    let ac: Vec<&[Complex64]> = a.iter().map(|s| s.coeffs.as_slice()).collect();
    let ad1: Vec<Vec<Complex64>> = ac.iter().map(|c| sp.derivative(c, 1)).collect();
    let ad2: Vec<Vec<Complex64>> = ac.iter().map(|c| sp.derivative(c, 2)).collect();
    let qa: Vec<Vec<Complex64>> = ac.iter().map(|c| sp.multiply(&chain.q, c)).collect();
    let mut ascending = vec![zero(); deg + 1];
    for i in 0..=gi {
        for j in 0..=gi {
            ascending[i + j] += 0.25 * sp.mean_product(&ad1[i], &ad1[j])
                - 0.5 * sp.mean_product(ac[i], &ad2[j])
                - sp.mean_product(&qa[i], ac[j]);
            ascending[i + j + 1] += sp.mean_product(ac[i], ac[j]);
        }
    }
    let lead = ascending[deg];
    let mut coefficients: Vec<Complex64> = ascending.iter().rev().map(|c| c / lead).collect();
    coefficients[0] = Complex64::new(1.0, 0.0);

    let radius = sample_radius(spec)?;
    let mut diag: f64 = 0.0;
    for s in 0..deg + 1 {
        let e = Complex64::from_polar(radius, PI * (2 * s + 1) as f64 / (deg + 1) as f64);
        let values: Vec<Complex64> = (0..npts)
            .map(|p| b.iter().rev().fold(zero(), |acc, bk| acc * e + bk[p]))
            .collect();
        let m = mean(&values);
        let var = values.iter().map(|v| (v - m).norm_sqr()).sum::<f64>() / npts as f64;
        diag = diag.max(var.sqrt() / (1.0 + m.norm()));
    }
    if diag > 1e-6 {
        return Err(Error::ConstancyFailure { diag });
    }
    Ok(SpectralPolynomial {
        coefficients,
        genus: g,
        n: spec.multiplicities(),
        tau: match spec.kind() {
            PotentialKind::TrigLimit(_) => None,
            _ => Some(spec.tau()),
        },
        z_constancy_diag: diag,
        termination_residual: chain.termination_residual,
        grid: Some(chain.grid_size()),
    })
}

/// Clustered roots: real ones first in descending order, then complex ones.
pub fn spectral_roots(q: &SpectralPolynomial) -> Result<Vec<SpectralRoot>> {
    poly::clustered_roots(&q.coefficients)
}

/// Closed-form spectral polynomial of the trigonometric limit,
/// `(E - C) prod_{j<=n0-n1} (E - C + j^2 pi^2)^2 prod_{j>n0-n1} (E - C + (2j - n0 + n1)^2 pi^2)^2`.
/// Vectors with `n1 > n0` are handled through the half-period shift that
/// swaps the two entries.
pub fn trig_spectral_polynomial(n: &MultiplicityVector) -> SpectralPolynomial {
    let (a, b) = (n.get(0).max(n.get(1)) as i64, n.get(0).min(n.get(1)) as i64);
    let c = crate::potential::trig_constant(n);
    let pi2 = PI * PI;
    let mut roots = vec![Complex64::new(c, 0.0)];
    for j in 1..=a {
        let k = if j <= a - b { j } else { 2 * j - a + b };
        let r = Complex64::new(c - (k * k) as f64 * pi2, 0.0);
        roots.push(r);
        roots.push(r);
    }
    SpectralPolynomial {
        coefficients: poly::from_roots(&roots),
        genus: a as u32,
        n: Some(*n),
        tau: None,
        z_constancy_diag: 0.0,
        termination_residual: 0.0,
        grid: None,
    }
}

/// Discriminant `(-1)^{d(d-1)/2} Res(Q, Q')`.
pub fn poly_discriminant(q: &SpectralPolynomial) -> Discriminant {
    poly::discriminant(&q.coefficients)
}

/// Lattice used by `Q(.; -1/tau)`.
pub fn modular_partner(torus: &TorusParam) -> Result<TorusParam> {
    TorusParam::new(-1.0 / torus.tau())
}

#[cfg(test)]
mod tests;
