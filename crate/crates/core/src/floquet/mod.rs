//! Monodromy of `y'' + q(z0 + x) y = E y` over one real period and the Floquet
//! discriminant `Delta(E) = tr M(E)`.
//!
//! Two propagators share the DOP853 tableau: an adaptive one that is the
//! reference for every reported number, and [`SampledPropagator`], a
//! fixed-step variant with the potential tabulated at the stage nodes, used
//! for dense scans of the `E` plane.

mod dop853;
mod search;

pub use search::{periodic_eigenvalues_on_interval, EigenvalueHit};

use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use dop853::{Control, State, STAGES};
use num_complex::Complex64;

/// Orders beyond this are reported as `MAX_ORDER` ("3 or more").
pub const MAX_ORDER: u32 = 3;

/// Tolerances of the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Order of the embedded pair; only 8 is implemented.
    pub order: u32,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings { rel_tol: 1e-12, abs_tol: 1e-14, max_steps: 1_000_000, order: 8 }
    }
}

impl IntegratorSettings {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        IntegratorSettings { rel_tol, abs_tol: rel_tol * 1e-2, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol >= 1e-13 && self.rel_tol < 1.0) {
            return Err(Error::InvalidInput(format!(
                "rel_tol {} outside [1e-13, 1)",
                self.rel_tol
            )));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::InvalidInput("abs_tol must be positive".into()));
        }
        if self.max_steps < 1000 {
            return Err(Error::InvalidInput("max_steps must be at least 1000".into()));
        }
        if self.order != 8 {
            return Err(Error::InvalidInput(format!("integrator order {} unsupported", self.order)));
        }
        Ok(())
    }

    fn control(&self) -> Control {
        Control { rel_tol: self.rel_tol, abs_tol: self.abs_tol, max_steps: self.max_steps }
    }
}

/// Transport of the fundamental pair `(c, s)`, `c(0) = s'(0) = 1`,
/// `c'(0) = s(0) = 0`, across one period: `[[c(1), s(1)], [c'(1), s'(1)]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonodromyMatrix(pub [[Complex64; 2]; 2]);

impl MonodromyMatrix {
    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> Complex64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// `M(E)` from the adaptive integrator.
pub fn monodromy(
    spec: &PotentialSpec,
    e: Complex64,
    settings: &IntegratorSettings,
) -> Result<MonodromyMatrix> {
    settings.validate()?;
    let rhs = |_s: usize, x: f64, y: &State<4>| {
        let v = e - spec.along_line(x)?;
        Ok([y[1], v * y[0], y[3], v * y[2]])
    };
    let y0 = [one(), zero(), zero(), one()];
    let (y, _) = dop853::integrate_adaptive(rhs, y0, 0.0, 1.0, &settings.control())?;
    Ok(MonodromyMatrix([[y[0], y[2]], [y[1], y[3]]]))
}

/// `Delta(E) = c(1) + s'(1)`.
pub fn discriminant(
    spec: &PotentialSpec,
    e: Complex64,
    settings: &IntegratorSettings,
) -> Result<Complex64> {
    Ok(monodromy(spec, e, settings)?.trace())
}

/// `(Delta(E), dDelta/dE)` from the variational system
/// `(dy/dE)'' = (E - q) dy/dE + y`.
pub fn discriminant_derivative(
    spec: &PotentialSpec,
    e: Complex64,
    settings: &IntegratorSettings,
) -> Result<(Complex64, Complex64)> {
    settings.validate()?;
    let rhs = |_s: usize, x: f64, y: &State<8>| {
        let v = e - spec.along_line(x)?;
        Ok(variational_rhs(v, y))
    };
    let y0 = [one(), zero(), zero(), one(), zero(), zero(), zero(), zero()];
    let (y, _) = dop853::integrate_adaptive(rhs, y0, 0.0, 1.0, &settings.control())?;
    Ok((y[0] + y[3], y[4] + y[7]))
}

#[inline(always)]
fn variational_rhs(v: Complex64, y: &State<8>) -> State<8> {
    [y[1], v * y[0], y[3], v * y[2], y[5], v * y[4] + y[0], y[7], v * y[6] + y[2]]
}

/// Order of vanishing of `Delta(E)^2 - 4` at `e`, from Cauchy-integral Taylor
/// coefficients on a circle of radius `1e-2`. Orders above two are reported
/// as [`MAX_ORDER`].
pub fn multiplicity_estimate(
    spec: &PotentialSpec,
    e: f64,
    settings: &IntegratorSettings,
) -> Result<u32> {
    let center = discriminant(spec, Complex64::new(e, 0.0), settings)?;
    let residual = (center - 2.0).norm().min((center + 2.0).norm());
    if residual > 1e-4 {
        return Err(Error::NotAnEigenvalue { e, residual });
    }
    taylor_order(spec, e, settings)
}

fn taylor_order(spec: &PotentialSpec, e: f64, settings: &IntegratorSettings) -> Result<u32> {
    const POINTS: usize = 16;
    const RADIUS: f64 = 1e-2;
    let nodes: Vec<Complex64> = (0..POINTS)
        .map(|j| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / POINTS as f64))
        .collect();
    let mut values = Vec::with_capacity(POINTS);
    for w in &nodes {
        let d = discriminant(spec, Complex64::new(e, 0.0) + RADIUS * w, settings)?;
        values.push(d * d - 4.0);
    }
    // |a_k| rho^k for k = 0..POINTS/2
    let scaled: Vec<f64> = (0..=POINTS / 2)
        .map(|k| {
            let s: Complex64 =
                values.iter().zip(&nodes).map(|(v, w)| v * w.powu(k as u32).conj()).sum();
            s.norm() / POINTS as f64
        })
        .collect();
    let peak = scaled.iter().cloned().fold(0.0, f64::max);
    let k = scaled.iter().position(|&a| a >= 1e-4 * peak).unwrap_or(0) as u32;
    Ok(k.clamp(1, MAX_ORDER))
}

/// Fixed-step DOP853 with `q` tabulated at every stage node.
#[derive(Debug, Clone)]
pub struct SampledPropagator {
    steps: usize,
    table: Vec<[Complex64; STAGES]>,
}

impl SampledPropagator {
    pub fn new(spec: &PotentialSpec, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidInput("step count must be positive".into()));
        }
        let h = 1.0 / steps as f64;
        let mut table = Vec::with_capacity(steps);
        for n in 0..steps {
            let mut row = [zero(); STAGES];
            for (s, slot) in row.iter_mut().enumerate() {
                *slot = spec.along_line(n as f64 * h + dop853::C[s] * h)?;
            }
            table.push(row);
        }
        Ok(SampledPropagator { steps, table })
    }

    /// Double the step count until `Delta` at every probe agrees with the
    /// doubled resolution to `tol * (1 + |Delta|)`.
    pub fn calibrated(spec: &PotentialSpec, probes: &[Complex64], tol: f64) -> Result<Self> {
        const MAX_STEPS: usize = 1 << 14;
        let mut steps = 32;
        let mut coarse = Self::new(spec, steps)?;
        loop {
            let fine = Self::new(spec, 2 * steps)?;
            let ok = probes.iter().all(|&e| {
                let (a, b) = (coarse.discriminant(e), fine.discriminant(e));
                (a - b).norm() <= tol * (1.0 + b.norm())
            });
            if ok {
                return Ok(fine);
            }
            steps *= 2;
            if steps > MAX_STEPS {
                return Err(Error::TolFailure(format!(
                    "fixed-step propagator did not converge with {MAX_STEPS} steps"
                )));
            }
            coarse = fine;
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn monodromy(&self, e: Complex64) -> MonodromyMatrix {
        let table = &self.table;
        let y = dop853::integrate_fixed(
            |n, s, y: &State<4>| {
                let v = e - table[n][s];
                [y[1], v * y[0], y[3], v * y[2]]
            },
            [one(), zero(), zero(), one()],
            self.steps,
            1.0 / self.steps as f64,
        );
        MonodromyMatrix([[y[0], y[2]], [y[1], y[3]]])
    }

    pub fn discriminant(&self, e: Complex64) -> Complex64 {
        self.monodromy(e).trace()
    }

    pub fn discriminant_with_derivative(&self, e: Complex64) -> (Complex64, Complex64) {
        let table = &self.table;
        let y = dop853::integrate_fixed(
            |n, s, y: &State<8>| variational_rhs(e - table[n][s], y),
            [one(), zero(), zero(), one(), zero(), zero(), zero(), zero()],
            self.steps,
            1.0 / self.steps as f64,
        );
        (y[0] + y[3], y[4] + y[7])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::TorusParam;
    use crate::potential::MultiplicityVector;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn lame() -> PotentialSpec {
        PotentialSpec::elliptic(MultiplicityVector::lame(1).unwrap(), TorusParam::imaginary(1.0).unwrap())
            .unwrap()
    }

    #[test]
    fn constant_potential_has_closed_form() {
        for (q, e) in [(c(0.0, 0.0), c(10.0, 0.0)), (c(3.0, 0.0), c(-4.0, 0.0)), (c(1.0, 2.0), c(7.0, -3.0))]
        {
            let spec = PotentialSpec::constant(q);
            let got = discriminant(&spec, e, &IntegratorSettings::default()).unwrap();
            let want = 2.0 * (q - e).sqrt().cos();
            assert!((got - want).norm() < 1e-10 * want.norm().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn monodromy_is_unimodular() {
        let spec = lame();
        for e in [c(-20.0, 0.0), c(3.0, 1.0), c(15.0, -2.0)] {
            let m = monodromy(&spec, e, &IntegratorSettings::default()).unwrap();
            let scale = m.0.iter().flatten().map(|v| v.norm()).fold(1.0, f64::max);
            assert!((m.det() - 1.0).norm() < 1e-9 * scale * scale);
        }
    }

    #[test]
    fn lame_band_edges() {
        let spec = lame();
        let e1 = 6.875_185_818_020_373;
        let s = IntegratorSettings::default();
        for (e, want) in [(e1, 2.0), (0.0, -2.0), (-e1, -2.0)] {
            let d = discriminant(&spec, c(e, 0.0), &s).unwrap();
            assert!((d.re - want).abs() < 1e-8 && d.im.abs() < 1e-8, "E={e}: {d}");
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let spec = lame();
        let s = IntegratorSettings::default();
        let e = c(2.5, 0.3);
        let (_, dd) = discriminant_derivative(&spec, e, &s).unwrap();
        let h = 1e-5;
        let fd = (discriminant(&spec, e + h, &s).unwrap() - discriminant(&spec, e - h, &s).unwrap())
            / (2.0 * h);
        assert!((fd - dd).norm() < 1e-6 * dd.norm().max(1.0));
    }

    #[test]
    fn sampled_propagator_agrees_with_adaptive() {
        let spec = lame();
        let probes = [c(-30.0, 0.0), c(30.0, 3.0)];
        let fast = SampledPropagator::calibrated(&spec, &probes, 1e-10).unwrap();
        for e in [c(-10.0, 0.0), c(5.0, 2.0), c(25.0, -1.0)] {
            let a = fast.discriminant(e);
            let b = discriminant(&spec, e, &IntegratorSettings::default()).unwrap();
            assert!((a - b).norm() < 1e-8 * (1.0 + b.norm()), "{a} vs {b}");
            let (_, da) = fast.discriminant_with_derivative(e);
            let (_, db) = discriminant_derivative(&spec, e, &IntegratorSettings::default()).unwrap();
            assert!((da - db).norm() < 1e-7 * (1.0 + db.norm()));
        }
    }

    #[test]
    fn multiplicity_of_simple_and_closed_gap_edges() {
        let spec = lame();
        let s = IntegratorSettings::default();
        assert_eq!(multiplicity_estimate(&spec, 0.0, &s).unwrap(), 1);
        assert!(matches!(
            multiplicity_estimate(&spec, 3.0, &s),
            Err(Error::NotAnEigenvalue { .. })
        ));
        // free operator: E = -(2 pi)^2 is a closed gap, Delta - 2 vanishes to second order
        let free = PotentialSpec::constant(c(0.0, 0.0));
        let e = -4.0 * std::f64::consts::PI.powi(2);
        assert_eq!(multiplicity_estimate(&free, e, &s).unwrap(), 2);
    }

    #[test]
    fn settings_are_validated() {
        let bad = IntegratorSettings { rel_tol: 1e-15, ..Default::default() };
        assert!(discriminant(&lame(), c(0.0, 0.0), &bad).is_err());
    }
}
