//! Darboux-Treibich-Verdier potentials and their classification.
//!
//! `q(z) = -sum_k n_k (n_k + 1) P(z + w_k / 2)` with `w = (0, 1, tau, 1 + tau)`.

use crate::elliptic::{self, TorusParam};
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt;

/// Largest multiplicity accepted when building a potential.
pub const MAX_MULTIPLICITY: u32 = 8;

/// Relative distance (in units of `Im tau`) the integration line must keep
/// from every pole row.
pub const LINE_CLEARANCE: f64 = 1e-3;

/// Non-negative integer multiplicities `(n0, n1, n2, n3)` with `max >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MultiplicityVector([u32; 4]);

impl MultiplicityVector {
    pub fn new(n: [u32; 4]) -> Result<Self> {
        if n.iter().all(|&k| k == 0) {
            return Err(Error::InvalidInput("multiplicity vector must be nonzero".into()));
        }
        Ok(MultiplicityVector(n))
    }

    /// `(n, 0, 0, 0)`: the Lame potential.
    pub fn lame(n: u32) -> Result<Self> {
        Self::new([n, 0, 0, 0])
    }

    pub fn as_array(&self) -> [u32; 4] {
        self.0
    }

    pub fn get(&self, k: usize) -> u32 {
        self.0[k]
    }

    pub fn sum(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `sum n_k (n_k + 1)`.
    pub fn weight(&self) -> u32 {
        self.0.iter().map(|&k| k * (k + 1)).sum()
    }

    pub fn is_normalized(&self) -> bool {
        self.0[0] == *self.0.iter().max().unwrap()
    }

    /// `(n0, n2, n1, n3)`: the vector belonging to the lattice `-1/tau`.
    pub fn swap_middle(&self) -> Self {
        let [a, b, c, d] = self.0;
        MultiplicityVector([a, c, b, d])
    }
}

impl fmt::Display for MultiplicityVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0;
        write!(f, "({a},{b},{c},{d})")
    }
}

/// What the operator's potential is built from.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    /// The elliptic potential itself.
    Elliptic(MultiplicityVector),
    /// The `Im tau -> infinity` limit, a Poschl-Teller potential on the line.
    TrigLimit(MultiplicityVector),
    /// A constant `q = c`, used to validate the integrator.
    Constant(Complex64),
}

/// A potential restricted to the integration line `x -> z0 + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    kind: PotentialKind,
    torus: TorusParam,
    z0: Complex64,
}

impl PotentialSpec {
    /// Elliptic potential on the default line `z0 = tau / 4`.
    pub fn elliptic(n: MultiplicityVector, torus: TorusParam) -> Result<Self> {
        let z0 = torus.tau() / 4.0;
        Self::build(PotentialKind::Elliptic(n), torus, z0)
    }

    /// Trigonometric limit potential on the line `z0 = tau / 4`.
    pub fn trig_limit(n: MultiplicityVector, torus: TorusParam) -> Result<Self> {
        let z0 = torus.tau() / 4.0;
        Self::build(PotentialKind::TrigLimit(n), torus, z0)
    }

    /// Constant potential. The lattice is irrelevant; `tau = i` is stored.
    pub fn constant(c: Complex64) -> Self {
        let torus = TorusParam::imaginary(1.0).expect("tau = i is valid");
        PotentialSpec { kind: PotentialKind::Constant(c), torus, z0: Complex64::new(0.0, 0.25) }
    }

    /// Same potential on a different integration line.
    pub fn with_z0(&self, z0: Complex64) -> Result<Self> {
        Self::build(self.kind.clone(), self.torus.clone(), z0)
    }

    fn build(kind: PotentialKind, torus: TorusParam, z0: Complex64) -> Result<Self> {
        if let PotentialKind::Elliptic(n) | PotentialKind::TrigLimit(n) = &kind {
            if let Some(k) = n.as_array().into_iter().find(|&k| k > MAX_MULTIPLICITY) {
                return Err(Error::InvalidInput(format!(
                    "multiplicity {k} exceeds the supported maximum {MAX_MULTIPLICITY}"
                )));
            }
        }
        let spec = PotentialSpec { kind, torus, z0 };
        spec.check_line()?;
        Ok(spec)
    }

    /// Poles of the potential lie on horizontal rows; the line must avoid them.
    fn check_line(&self) -> Result<()> {
        let b = self.torus.tau().im;
        let rows: Vec<f64> = match &self.kind {
            PotentialKind::Constant(_) => return Ok(()),
            PotentialKind::TrigLimit(_) => vec![0.0],
            PotentialKind::Elliptic(n) => {
                let tau = self.torus.tau();
                let shifts = [0.0, 0.0, -tau.im / 2.0, -tau.im / 2.0];
                (0..4).filter(|&k| n.get(k) > 0).map(|k| shifts[k]).collect()
            }
        };
        for row in rows {
            let mut d = self.z0.im - row;
            if matches!(self.kind, PotentialKind::Elliptic(_)) {
                d -= (d / b).round() * b;
            }
            if d.abs() < LINE_CLEARANCE * b {
                return Err(Error::PoleProximity { z: self.z0, distance: d.abs() });
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn torus(&self) -> &TorusParam {
        &self.torus
    }

    pub fn tau(&self) -> Complex64 {
        self.torus.tau()
    }

    pub fn z0(&self) -> Complex64 {
        self.z0
    }

    pub fn multiplicities(&self) -> Option<MultiplicityVector> {
        match self.kind {
            PotentialKind::Elliptic(n) | PotentialKind::TrigLimit(n) => Some(n),
            PotentialKind::Constant(_) => None,
        }
    }

    /// `q(z)` at an absolute point of the plane.
    pub fn evaluate(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.evaluate_with_derivative(z)?.0)
    }

    /// `(q(z), q'(z))`.
    pub fn evaluate_with_derivative(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        match &self.kind {
            PotentialKind::Constant(c) => Ok((*c, Complex64::new(0.0, 0.0))),
            PotentialKind::Elliptic(n) => {
                let shifts = self.half_period_shifts();
                let mut q = Complex64::new(0.0, 0.0);
                let mut dq = Complex64::new(0.0, 0.0);
                for k in 0..4 {
                    let nk = n.get(k);
                    if nk == 0 {
                        continue;
                    }
                    let w = (nk * (nk + 1)) as f64;
                    let (p, dp) = elliptic::wp_and_derivative(z + shifts[k], &self.torus)?;
                    q -= w * p;
                    dq -= w * dp;
                }
                Ok((q, dq))
            }
            PotentialKind::TrigLimit(n) => trig_potential(n, z),
        }
    }

    /// `q(z0 + x)`.
    pub fn along_line(&self, x: f64) -> Result<Complex64> {
        self.evaluate(self.z0 + x)
    }

    /// Fourier coefficients of `x -> q(z0 + x)` for modes `-kmax..=kmax`
    /// (index `k + kmax`), each in closed form.
    pub fn line_coefficients(&self, kmax: usize) -> Result<Vec<Complex64>> {
        Ok(self.line_coefficients_with_bound(kmax)?.0)
    }

    /// [`Self::line_coefficients`] together with the sum of the moduli of
    /// the terms behind each coefficient, which bounds its rounding error
    /// when terms cancel.
    pub fn line_coefficients_with_bound(&self, kmax: usize) -> Result<(Vec<Complex64>, Vec<f64>)> {
        let zero = Complex64::new(0.0, 0.0);
        let mut out = vec![zero; 2 * kmax + 1];
        let mut bound = vec![0.0; 2 * kmax + 1];
        match &self.kind {
            PotentialKind::Constant(c) => {
                out[kmax] = *c;
                bound[kmax] = c.norm();
            }
            PotentialKind::Elliptic(n) => {
                for (k, shift) in self.half_period_shifts().into_iter().enumerate() {
                    let nk = n.get(k);
                    if nk == 0 {
                        continue;
                    }
                    let w = (nk * (nk + 1)) as f64;
                    let p = elliptic::wp_line_coefficients(self.z0 + shift, &self.torus, kmax)?;
                    for ((o, m), v) in out.iter_mut().zip(bound.iter_mut()).zip(p) {
                        *o -= w * v;
                        *m += w * v.norm();
                    }
                }
            }
            PotentialKind::TrigLimit(n) => {
                let y = self.z0.im;
                if y.abs() < elliptic::POLE_GUARD {
                    return Err(Error::PoleProximity { z: self.z0, distance: y.abs() });
                }
                let (a, b) = ((n.get(0) * (n.get(0) + 1)) as f64, (n.get(1) * (n.get(1) + 1)) as f64);
                out[kmax] = Complex64::new(trig_constant(n), 0.0);
                // 1/sin^2 = -4 sum m w^m on the side of the real axis holding the line
                let sign = if y > 0.0 { 1.0 } else { -1.0 };
                let w = (Complex64::new(0.0, 2.0 * PI * sign) * self.z0).exp();
                let mut wk = Complex64::new(1.0, 0.0);
                for k in 1..=kmax {
                    wk *= w;
                    let parity = if k % 2 == 0 { 1.0 } else { -1.0 };
                    let v = 4.0 * PI * PI * k as f64 * (a + b * parity) * wk;
                    let slot = if y > 0.0 { kmax + k } else { kmax - k };
                    out[slot] = v;
                    bound[slot] = 4.0 * PI * PI * k as f64 * (a + b) * wk.norm();
                }
                bound[kmax] = out[kmax].norm();
            }
        }
        Ok((out, bound))
    }

    /// Exponential decay rate `2 pi d` of the line coefficients, `d` being
    /// the vertical distance from the line to the nearest pole row.
    pub fn line_decay_rate(&self) -> f64 {
        match &self.kind {
            PotentialKind::Constant(_) => f64::INFINITY,
            PotentialKind::TrigLimit(_) => 2.0 * PI * self.z0.im.abs(),
            PotentialKind::Elliptic(n) => {
                let b = self.torus.tau().im;
                let mut d = f64::INFINITY;
                for (k, shift) in self.half_period_shifts().into_iter().enumerate() {
                    if n.get(k) == 0 {
                        continue;
                    }
                    let h = (self.z0.im + shift.im).rem_euclid(b);
                    d = d.min(h.min(b - h));
                }
                2.0 * PI * d
            }
        }
    }

    fn half_period_shifts(&self) -> [Complex64; 4] {
        let tau = self.torus.tau();
        [Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.0), tau / 2.0, (1.0 + tau) / 2.0]
    }
}

fn trig_potential(n: &MultiplicityVector, z: Complex64) -> Result<(Complex64, Complex64)> {
    let (a, b) = ((n.get(0) * (n.get(0) + 1)) as f64, (n.get(1) * (n.get(1) + 1)) as f64);
    let (s, c) = ((PI * z).sin(), (PI * z).cos());
    let near = s.norm().min(c.norm()) / PI;
    if near < elliptic::POLE_GUARD {
        return Err(Error::PoleProximity { z, distance: near });
    }
    let pi2 = PI * PI;
    let q = -a * pi2 / (s * s) - b * pi2 / (c * c) + trig_constant(n);
    let dq = 2.0 * pi2 * PI * (a * c / (s * s * s) - b * s / (c * c * c));
    Ok((q, dq))
}

/// `q(z)` for the given specification at the absolute point `z`.
pub fn evaluate_potential(spec: &PotentialSpec, z: Complex64) -> Result<Complex64> {
    spec.evaluate(z)
}

/// `C_T = (pi^2 / 3) sum n_k (n_k + 1)`.
pub fn trig_constant(n: &MultiplicityVector) -> f64 {
    PI * PI / 3.0 * n.weight() as f64
}

/// Mean of `q` over one real period of the integration line.
pub fn mean_potential(spec: &PotentialSpec) -> Complex64 {
    match spec.kind() {
        PotentialKind::Elliptic(n) => 2.0 * spec.torus().eta1() * n.weight() as f64,
        PotentialKind::TrigLimit(n) => Complex64::new(trig_constant(n), 0.0),
        PotentialKind::Constant(c) => *c,
    }
}

fn signed(n: &MultiplicityVector) -> [i64; 4] {
    n.as_array().map(|k| k as i64)
}

/// Gap-opening conditions `(c1, c2)`:
/// `c1`: `n1 + n2 - n0 - n3 >= 2` with `n1, n2 >= 1`;
/// `c2`: `n0 + n3 - n1 - n2 >= 2` with `n0, n3 >= 1`.
pub fn gap_conditions(n: &MultiplicityVector) -> (bool, bool) {
    let [n0, n1, n2, n3] = signed(n);
    let s = n1 + n2 - n0 - n3;
    (s >= 2 && n1 >= 1 && n2 >= 1, -s >= 2 && n0 >= 1 && n3 >= 1)
}

/// Arithmetic genus of the spectral curve, symmetric in the four entries.
pub fn genus(n: &MultiplicityVector) -> u32 {
    let mut m = n.as_array();
    m.sort_unstable_by(|a, b| b.cmp(a));
    let [m0, m1, m2, m3] = m;
    let total = m0 + m1 + m2 + m3;
    if total % 2 == 0 {
        if m0 + m3 >= m1 + m2 {
            m0
        } else {
            (m0 + m1 + m2 - m3) / 2
        }
    } else if m0 > m1 + m2 + m3 {
        m0
    } else {
        (total + 1) / 2
    }
}

/// Dual multiplicities for odd `sum n_k`.
pub fn takemura_dual(n: &MultiplicityVector) -> Result<MultiplicityVector> {
    if n.sum() % 2 == 0 {
        return Err(Error::ParityError { n: n.as_array() });
    }
    let [n0, n1, n2, n3] = signed(n);
    let l0 = (n0 + n1 + n2 + n3 + 1) / 2;
    let fold = |t: i64| t.max(-t - 1);
    let l1 = fold((n0 + n1 - n2 - n3 - 1) / 2);
    let l2 = fold((n0 - n1 + n2 - n3 - 1) / 2);
    let l3 = fold((n0 - n1 - n2 + n3 - 1) / 2);
    MultiplicityVector::new([l0, l1, l2, l3].map(|v| v as u32))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseLabel {
    A,
    B,
    C,
    #[serde(rename = "none")]
    None,
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseLabel::A => "A",
            CaseLabel::B => "B",
            CaseLabel::C => "C",
            CaseLabel::None => "none",
        };
        f.write_str(s)
    }
}

/// Which gap-opening condition holds, and for the band case the genus,
/// the number `m` of open finite gaps and the trigonometric constant.
#[derive(Debug, Clone, PartialEq)]
pub struct DtvClassification {
    pub n: MultiplicityVector,
    pub c1: bool,
    pub c2: bool,
    pub case: CaseLabel,
    pub g: u32,
    pub m: Option<u32>,
    pub c_t: f64,
    pub dual: Option<MultiplicityVector>,
}

/// Classify a multiplicity vector.
///
/// The gap conditions are symmetric enough to be evaluated for any ordering,
/// so a vector satisfying `c1` or `c2` is classified as-is. The case split
/// A/B/C assumes `n0` is maximal and rejects other vectors.
pub fn classify(n: &MultiplicityVector) -> Result<DtvClassification> {
    let (c1, c2) = gap_conditions(n);
    if !(c1 || c2) && !n.is_normalized() {
        return Err(Error::NotNormalized { n: n.as_array() });
    }
    let [n0, n1, n2, n3] = signed(n);
    let s = n1 + n2 - n0 - n3;
    let (case, m) = if c1 || c2 {
        (CaseLabel::None, None)
    } else if s == 0 || (n3 == 0 && s <= -1) {
        (CaseLabel::A, Some(n0 - n1))
    } else if s == 1 {
        (CaseLabel::B, Some(n2 + n3 + 1))
    } else if s == -1 && n3 >= 1 {
        let m = if n0 > n2 { n2 + n3 + 1 } else { n2 + n3 };
        (CaseLabel::C, Some(m))
    } else {
        unreachable!("conditions c1, c2 and cases A-C are exhaustive for {n}")
    };
    let dual = if n.sum() % 2 == 1 { Some(takemura_dual(n)?) } else { None };
    Ok(DtvClassification {
        n: *n,
        c1,
        c2,
        case,
        g: genus(n),
        m: m.map(|v| v as u32),
        c_t: trig_constant(n),
        dual,
    })
}

impl DtvClassification {
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n.as_array(),
            "c1": self.c1,
            "c2": self.c2,
            "case": self.case,
            "g": self.g,
            "m": self.m,
            "C_T": self.c_t,
            "dual": self.dual.map(|d| d.as_array()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::invariants;

    fn mv(n: [u32; 4]) -> MultiplicityVector {
        MultiplicityVector::new(n).unwrap()
    }

    #[test]
    fn line_coefficients_resum_to_the_potential() {
        let torus = TorusParam::imaginary(0.8).unwrap();
        let specs = [
            PotentialSpec::elliptic(mv([2, 1, 1, 1]), torus.clone()).unwrap(),
            PotentialSpec::trig_limit(mv([2, 1, 0, 0]), torus.clone()).unwrap(),
            PotentialSpec::trig_limit(mv([1, 3, 0, 0]), torus).unwrap().with_z0(Complex64::new(0.3, -0.2)).unwrap(),
            PotentialSpec::constant(Complex64::new(1.5, -0.5)),
        ];
        for spec in &specs {
            let kmax = (60.0 / spec.line_decay_rate().min(1e3)).ceil() as usize + 4;
            let coef = spec.line_coefficients(kmax).unwrap();
            for x in [0.0, 0.21, 0.77] {
                let series: Complex64 = coef
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v * Complex64::from_polar(1.0, 2.0 * PI * (i as f64 - kmax as f64) * x))
                    .sum();
                let direct = spec.along_line(x).unwrap();
                assert!((series - direct).norm() < 1e-10 * (1.0 + direct.norm()), "{series} vs {direct}");
            }
        }
    }

    #[test]
    fn documented_classifications() {
        let b = classify(&mv([2, 2, 1, 0])).unwrap();
        assert_eq!((b.case, b.g, b.m), (CaseLabel::B, 3, Some(2)));
        assert_eq!(b.dual.unwrap().as_array(), [3, 1, 0, 0]);
        let lame = classify(&mv([1, 0, 0, 0])).unwrap();
        assert_eq!((lame.case, lame.g, lame.m), (CaseLabel::A, 1, Some(1)));
        let none = classify(&mv([1, 2, 2, 1])).unwrap();
        assert!(none.c1 && !none.c2 && none.case == CaseLabel::None && none.m.is_none());
        let ones = classify(&mv([1, 1, 1, 1])).unwrap();
        assert_eq!((ones.case, ones.g, ones.m), (CaseLabel::A, 1, Some(0)));
        assert!(matches!(classify(&mv([0, 1, 0, 0])), Err(Error::NotNormalized { .. })));
        assert!(matches!(classify(&mv([1, 2, 0, 0])), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn genus_examples() {
        assert_eq!(genus(&mv([3, 0, 0, 0])), 3);
        assert_eq!(genus(&mv([3, 3, 3, 0])), 5);
        assert_eq!(genus(&mv([3, 3, 3, 2])), 6);
        assert_eq!(genus(&mv([3, 3, 2, 2])), 3);
        assert_eq!(genus(&mv([2, 2, 1, 0])), 3);
    }

    #[test]
    fn large_multiplicities_are_combinatorial_only() {
        let d = takemura_dual(&mv([6, 2, 6, 5])).unwrap();
        assert_eq!(d.get(0), 10);
        assert_eq!(genus(&d), genus(&mv([6, 2, 6, 5])));
        let torus = TorusParam::imaginary(1.0).unwrap();
        assert!(matches!(PotentialSpec::elliptic(d, torus), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn dual_rejects_even_sum() {
        assert!(matches!(takemura_dual(&mv([1, 1, 0, 0])), Err(Error::ParityError { .. })));
    }

    #[test]
    fn square_lattice_potential_values() {
        let torus = TorusParam::imaginary(1.0).unwrap();
        let e1 = invariants(&torus).unwrap().e[0].re;
        let lame = PotentialSpec::elliptic(mv([1, 0, 0, 0]), torus.clone()).unwrap();
        let q = evaluate_potential(&lame, Complex64::new(0.5, 0.0)).unwrap();
        assert!((q.re + 2.0 * e1).abs() < 1e-10 && q.im.abs() < 1e-10);
        let ones = PotentialSpec::elliptic(mv([1, 1, 1, 1]), torus).unwrap();
        let z = Complex64::new(0.25, 0.25);
        let q = evaluate_potential(&ones, z).unwrap();
        let w = |u| crate::elliptic::wp(u, ones.torus()).unwrap();
        let tau = Complex64::i();
        let expect = -2.0 * (w(z) + w(z + 0.5) + w(z + tau / 2.0) + w(z + (1.0 + tau) / 2.0));
        assert!((q - expect).norm() < 1e-12 * q.norm());
    }

    #[test]
    fn line_through_pole_row_is_rejected() {
        let torus = TorusParam::imaginary(1.0).unwrap();
        let spec = PotentialSpec::elliptic(mv([1, 0, 1, 0]), torus).unwrap();
        assert!(matches!(spec.with_z0(Complex64::new(0.1, 0.5)), Err(Error::PoleProximity { .. })));
        assert!(spec.with_z0(Complex64::new(0.1, 1.0 / 3.0)).is_ok());
        let lame = PotentialSpec::elliptic(mv([1, 0, 0, 0]), TorusParam::imaginary(1.0).unwrap())
            .unwrap();
        assert!(lame.with_z0(Complex64::new(0.0, 0.5)).is_ok());
    }

    #[test]
    fn derivative_is_consistent() {
        let torus = TorusParam::new(Complex64::new(0.2, 0.9)).unwrap();
        for kind in [0, 1] {
            let n = mv([2, 1, 1, 1]);
            let spec = if kind == 0 {
                PotentialSpec::elliptic(n, torus.clone()).unwrap()
            } else {
                PotentialSpec::trig_limit(n, torus.clone()).unwrap()
            };
            let z = Complex64::new(0.3, 0.2);
            let (_, dq) = spec.evaluate_with_derivative(z).unwrap();
            let h = 1e-5;
            let fd = (spec.evaluate(z + h).unwrap() - spec.evaluate(z - h).unwrap()) / (2.0 * h);
            assert!((fd - dq).norm() < 1e-6 * dq.norm().max(1.0));
        }
    }

    #[test]
    fn mean_matches_quadrature() {
        let spec = PotentialSpec::elliptic(mv([2, 1, 0, 1]), TorusParam::imaginary(0.8).unwrap())
            .unwrap();
        let n = 1024;
        let mean: Complex64 =
            (0..n).map(|j| spec.along_line(j as f64 / n as f64).unwrap()).sum::<Complex64>()
                / n as f64;
        let want = mean_potential(&spec);
        assert!((mean - want).norm() < 1e-9 * want.norm());
    }
}
