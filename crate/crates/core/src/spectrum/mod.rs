//! The spectral picture assembled from the spectral polynomial and the
//! discriminant: band intervals, complex arc endpoints, the (anti)periodic
//! eigenvalues hidden inside bands, conditional-stability arcs in the complex
//! plane, and a verdict comparing all of it with the classification.

mod arcs;

pub use arcs::{stability_region, ArcSet, Window};

use crate::error::{Error, Result};
use crate::floquet::{
    discriminant, discriminant_derivative, periodic_eigenvalues_on_interval, EigenvalueHit,
    IntegratorSettings,
};
use crate::kdv::{
    self, poly, spectral_polynomial_with, spectral_roots, trig_spectral_polynomial, KdvSettings,
    SpectralPolynomial, SpectralRoot,
};
use crate::potential::{
    classify, gap_conditions, mean_potential, CaseLabel, DtvClassification, MultiplicityVector,
    PotentialKind, PotentialSpec,
};
use crate::elliptic::TorusParam;
use num_complex::Complex64;
use serde_json::{json, Value};

/// Relative size of the band-edge exclusion zone when searching band interiors.
pub const EDGE_EXCLUSION: f64 = 1e-6;
/// Coefficient agreement required of dual vectors.
pub const DUALITY_TOL: f64 = 1e-8;
/// Coefficient agreement required at the trigonometric limit.
pub const TRIG_LIMIT_TOL: f64 = 1e-3;
/// Imaginary period used for the trigonometric-limit comparison.
pub const TRIG_LIMIT_TAU_IM: f64 = 8.0;

/// Numerical settings shared by the spectral computations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpectrumSettings {
    pub integrator: IntegratorSettings,
    pub kdv: KdvSettings,
}

/// Band structure or complex arc endpoints of one operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub q: SpectralPolynomial,
    /// Real roots first, descending: `E_0 > E_1 > ...`.
    pub roots: Vec<SpectralRoot>,
    /// `1 + max |E_j|`.
    pub scale: f64,
    /// No root has an imaginary part above the clustering tolerance.
    pub all_real: bool,
    /// All roots real and no two closer than the clustering tolerance. Gaps
    /// narrower than that cannot be resolved in double precision.
    pub all_real_distinct: bool,
    /// Ascending; `None` as lower end stands for minus infinity.
    pub bands: Vec<(Option<f64>, f64)>,
    /// Real part of the mean of `q`, the asymptote of the spectrum at minus infinity.
    pub ray_asymptote: f64,
    /// Roots with positive imaginary part and their conjugate partners.
    pub complex_pairs: Vec<(Complex64, Complex64)>,
    /// `c1 || c2`, which predicts a non-real spectrum.
    pub predicted_by_conditions: bool,
    /// The prediction agrees with what the roots show.
    pub theorem_consistent: bool,
}

impl SpectrumReport {
    /// Real roots in descending order, clusters repeated by multiplicity.
    pub fn real_edges(&self) -> Vec<f64> {
        self.roots
            .iter()
            .filter(|r| r.is_real)
            .flat_map(|r| std::iter::repeat_n(r.value.re, r.multiplicity as usize))
            .collect()
    }

    pub fn genus(&self) -> u32 {
        self.q.genus
    }

    pub fn to_json_value(&self) -> Value {
        let mut v = self.q.to_json_value(&self.roots);
        let obj = v.as_object_mut().expect("object");
        obj.insert(
            "bands".into(),
            json!(self.bands.iter().map(|(lo, hi)| json!([lo, hi])).collect::<Vec<_>>()),
        );
        obj.insert("ray".into(), json!(self.ray_asymptote));
        obj.insert("all_real".into(), json!(self.all_real));
        obj.insert("all_real_distinct".into(), json!(self.all_real_distinct));
        obj.insert(
            "complex_pairs".into(),
            json!(self
                .complex_pairs
                .iter()
                .map(|(a, b)| json!([[a.re, a.im], [b.re, b.im]]))
                .collect::<Vec<_>>()),
        );
        obj.insert("predicted_by_conditions".into(), json!(self.predicted_by_conditions));
        obj.insert("theorem_consistent".into(), json!(self.theorem_consistent));
        v
    }
}

/// Roots, bands and complex pairs of the operator.
pub fn classify_spectrum(spec: &PotentialSpec) -> Result<SpectrumReport> {
    classify_spectrum_with(spec, &SpectrumSettings::default())
}

pub fn classify_spectrum_with(spec: &PotentialSpec, settings: &SpectrumSettings) -> Result<SpectrumReport> {
    let q = spectral_polynomial_with(spec, &settings.kdv)?;
    let roots = spectral_roots(&q)?;
    Ok(assemble_report(spec, q, roots))
}

fn assemble_report(spec: &PotentialSpec, q: SpectralPolynomial, roots: Vec<SpectralRoot>) -> SpectrumReport {
    let values: Vec<Complex64> = roots.iter().map(|r| r.value).collect();
    let scale = poly::root_scale(&values);
    let all_real = roots.iter().all(|r| r.is_real);
    let all_real_distinct = all_real && roots.iter().all(|r| r.multiplicity == 1);
    let bands = if all_real {
        // a cluster stands for as many coincident edges as its multiplicity
        let edges: Vec<f64> = roots
            .iter()
            .flat_map(|r| std::iter::repeat_n(r.value.re, r.multiplicity as usize))
            .collect();
        let mut bands = vec![(None, *edges.last().expect("degree >= 1"))];
        // [E_{2j-1}, E_{2j-2}] from the bottom up
        for j in (1..=edges.len() / 2).rev() {
            bands.push((Some(edges[2 * j - 1]), edges[2 * j - 2]));
        }
        bands
    } else {
        Vec::new()
    };
    let tol = poly::CLUSTER_TOL * scale;
    let complex: Vec<Complex64> = roots.iter().filter(|r| !r.is_real).map(|r| r.value).collect();
    let complex_pairs = complex
        .iter()
        .filter(|z| z.im > 0.0)
        .map(|z| {
            let partner = complex
                .iter()
                .filter(|w| w.im < 0.0)
                .min_by(|a, b| (*a - z.conj()).norm().total_cmp(&(*b - z.conj()).norm()))
                .copied()
                .filter(|w| (w - z.conj()).norm() <= tol)
                .unwrap_or(z.conj());
            (*z, partner)
        })
        .collect::<Vec<_>>();
    let predicted_by_conditions = match spec.multiplicities() {
        Some(n) if matches!(spec.kind(), PotentialKind::Elliptic(_)) => {
            let (c1, c2) = gap_conditions(&n);
            c1 || c2
        }
        _ => false,
    };
    let theorem_consistent = predicted_by_conditions == !all_real && all_real == complex_pairs.is_empty();
    SpectrumReport {
        q,
        roots,
        scale,
        all_real_distinct,
        bands,
        ray_asymptote: mean_potential(spec).re,
        complex_pairs,
        predicted_by_conditions,
        theorem_consistent,
        all_real,
    }
}

/// `2 (-1)^min(ceil(k/2), m)` for `k >= 1` and `2` for `k = 0`: the values of
/// the discriminant at the band edges `E_k` when the first `m` gaps are open.
pub fn expected_edge_parity(k: usize, m: u32) -> i32 {
    let i = k.div_ceil(2).min(m as usize);
    if i % 2 == 0 {
        2
    } else {
        -2
    }
}

/// Search results inside one band `(E_{2j-1}, E_{2j-2})`.
#[derive(Debug, Clone, PartialEq)]
pub struct GapEntry {
    pub j: usize,
    pub interval: (f64, f64),
    pub interior_hits: Vec<EigenvalueHit>,
    /// Whether `Delta'` changes sign across each hit.
    pub local_extremum: Vec<bool>,
    /// Measured `Delta` at `(E_{2j-1}, E_{2j-2})`.
    pub edge_deltas: (f64, f64),
    pub edge_parities: (i32, i32),
    pub expected_count: usize,
}

/// (Anti)periodic eigenvalues that are not roots of the spectral polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub classification: DtvClassification,
    pub m_used: u32,
    pub genus: u32,
    pub edges: Vec<f64>,
    /// Measured `Delta(E_k)` for every edge.
    pub edge_deltas: Vec<f64>,
    pub gaps: Vec<GapEntry>,
    /// `Delta` touches this value at the hits in bands `j > m`.
    pub expected_interior_parity: i32,
}

fn parity_of(d: f64) -> i32 {
    if d >= 0.0 {
        2
    } else {
        -2
    }
}

impl GapReport {
    pub fn counts(&self) -> Vec<usize> {
        self.gaps.iter().map(|g| g.interior_hits.len()).collect()
    }

    pub fn expected_counts(&self) -> Vec<usize> {
        self.gaps.iter().map(|g| g.expected_count).collect()
    }

    /// Counts as expected, and every interior hit is a tangency of the
    /// expected sign at a local extremum.
    pub fn counts_match(&self) -> bool {
        self.counts() == self.expected_counts()
            && self.gaps.iter().all(|g| {
                g.interior_hits.iter().all(|h| h.parity == self.expected_interior_parity)
                    && g.local_extremum.iter().all(|&x| x)
            })
    }

    pub fn edge_parities(&self) -> Vec<i32> {
        self.edge_deltas.iter().map(|&d| parity_of(d)).collect()
    }

    pub fn expected_edge_parities(&self) -> Vec<i32> {
        (0..self.edges.len()).map(|k| expected_edge_parity(k, self.m_used)).collect()
    }

    pub fn edge_signs_match(&self) -> bool {
        self.edge_parities() == self.expected_edge_parities()
    }

    /// Largest `||Delta(E_k)| - 2|`.
    pub fn edge_defect(&self) -> f64 {
        self.edge_deltas.iter().map(|d| (d.abs() - 2.0).abs()).fold(0.0, f64::max)
    }

    pub fn to_json_value(&self) -> Value {
        json!({
            "n": self.classification.n.as_array(),
            "case": self.classification.case,
            "g": self.genus,
            "m": self.m_used,
            "edges": self.edges,
            "edge_deltas": self.edge_deltas,
            "expected_edge_parities": self.expected_edge_parities(),
            "expected_interior_parity": self.expected_interior_parity,
            "counts": self.counts(),
            "expected_counts": self.expected_counts(),
            "counts_match": self.counts_match(),
            "edge_signs_match": self.edge_signs_match(),
            "gaps": self.gaps.iter().map(|g| json!({
                "j": g.j,
                "interval": [g.interval.0, g.interval.1],
                "hits": g.interior_hits.iter().zip(&g.local_extremum).map(|(h, &x)| json!({
                    "E": h.e,
                    "parity": h.parity,
                    "order": h.order,
                    "delta": h.delta,
                    "local_extremum": x,
                })).collect::<Vec<_>>(),
                "edge_parities": [g.edge_parities.0, g.edge_parities.1],
                "edge_deltas": [g.edge_deltas.0, g.edge_deltas.1],
            })).collect::<Vec<_>>(),
        })
    }
}

/// Search every band `(E_{2j-1}, E_{2j-2})`, `j = 1..g`, for points where the
/// discriminant touches `+-2`, and measure it at the band edges.
pub fn gap_eigenvalue_report(spec: &PotentialSpec) -> Result<GapReport> {
    gap_eigenvalue_report_with(spec, &SpectrumSettings::default())
}

pub fn gap_eigenvalue_report_with(spec: &PotentialSpec, settings: &SpectrumSettings) -> Result<GapReport> {
    let report = classify_spectrum_with(spec, settings)?;
    gap_report_from(spec, &report, settings)
}

/// [`gap_eigenvalue_report_with`] reusing an existing spectrum report.
pub fn gap_report_from(
    spec: &PotentialSpec,
    report: &SpectrumReport,
    settings: &SpectrumSettings,
) -> Result<GapReport> {
    let n = match spec.kind() {
        PotentialKind::Elliptic(n) => *n,
        _ => return Err(Error::BandStructureMissing("only elliptic potentials carry a gap integer".into())),
    };
    let classification = classify(&n)?;
    let m = match (classification.case, classification.m) {
        (CaseLabel::None, _) | (_, None) => {
            return Err(Error::BandStructureMissing(format!(
                "{n} satisfies a gap-opening condition; the spectrum is not a union of real bands"
            )))
        }
        (_, Some(m)) => m,
    };
    if !report.all_real {
        return Err(Error::BandStructureMissing(format!("spectral polynomial of {n} has non-real roots")));
    }
    let edges = report.real_edges();
    let integrator = &settings.integrator;
    let mut edge_deltas = Vec::with_capacity(edges.len());
    for &e in &edges {
        edge_deltas.push(discriminant(spec, Complex64::new(e, 0.0), integrator)?.re);
    }
    let delta = EDGE_EXCLUSION * report.scale;
    let g = report.genus() as usize;
    let mut gaps = Vec::with_capacity(g);
    for j in 1..=g {
        let (lo, hi) = (edges[2 * j - 1], edges[2 * j - 2]);
        let found = if hi - lo > 4.0 * delta {
            periodic_eigenvalues_on_interval(spec, lo + delta, hi - delta, integrator)?
        } else {
            Vec::new()
        };
        // crossings at the band edges themselves are roots of Q, not interior points
        let interior_hits: Vec<EigenvalueHit> = found
            .into_iter()
            .filter(|h| h.e - lo > 10.0 * delta && hi - h.e > 10.0 * delta)
            .collect();
        let mut local_extremum = Vec::with_capacity(interior_hits.len());
        for h in &interior_hits {
            local_extremum.push(is_local_extremum(spec, h.e, report.scale, integrator)?);
        }
        gaps.push(GapEntry {
            j,
            interval: (lo, hi),
            interior_hits,
            local_extremum,
            edge_deltas: (edge_deltas[2 * j - 1], edge_deltas[2 * j - 2]),
            edge_parities: (parity_of(edge_deltas[2 * j - 1]), parity_of(edge_deltas[2 * j - 2])),
            expected_count: usize::from(j as u32 > m),
        });
    }
    Ok(GapReport {
        classification,
        m_used: m,
        genus: g as u32,
        edges,
        edge_deltas,
        gaps,
        expected_interior_parity: if m % 2 == 0 { -2 } else { 2 },
    })
}

fn is_local_extremum(spec: &PotentialSpec, e: f64, scale: f64, settings: &IntegratorSettings) -> Result<bool> {
    let h = 1e-4 * scale;
    let (_, left) = discriminant_derivative(spec, Complex64::new(e - h, 0.0), settings)?;
    let (_, right) = discriminant_derivative(spec, Complex64::new(e + h, 0.0), settings)?;
    Ok(left.re * right.re < 0.0)
}

/// Result of one comparison in [`Verdict`].
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
}

impl Check {
    fn new(measured: f64, tolerance: f64) -> Self {
        Check { passed: measured <= tolerance, measured, tolerance }
    }

    fn to_json_value(&self) -> Value {
        json!({"passed": self.passed, "measured": self.measured, "tolerance": self.tolerance})
    }
}

/// Every applicable consistency check for one operator. `None` marks a check
/// that does not apply.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub classification: DtvClassification,
    pub spectrum: SpectrumReport,
    pub gaps: Option<GapReport>,
    pub thm11_consistent: bool,
    pub thm12_counts_match: Option<bool>,
    pub edge_signs_match: Option<bool>,
    /// `||Delta(E_j)| - 2|` over all roots, real or not.
    pub root_delta: Check,
    pub duality: Option<Check>,
    pub trig_limit: Option<Check>,
}

impl Verdict {
    pub fn all_passed(&self) -> bool {
        self.thm11_consistent
            && self.thm12_counts_match.unwrap_or(true)
            && self.edge_signs_match.unwrap_or(true)
            && self.root_delta.passed
            && self.duality.as_ref().is_none_or(|c| c.passed)
            && self.trig_limit.as_ref().is_none_or(|c| c.passed)
    }

    pub fn to_json_value(&self) -> Value {
        json!({
            "n": self.classification.n.as_array(),
            "tau_im": self.spectrum.q.tau.map(|t| t.im),
            "all_passed": self.all_passed(),
            "thm11_consistent": self.thm11_consistent,
            "thm12_counts_match": self.thm12_counts_match,
            "edge_signs_match": self.edge_signs_match,
            "duality_match": self.duality.as_ref().map(|c| c.passed),
            "trig_limit_match": self.trig_limit.as_ref().map(|c| c.passed),
            "details": {
                "classification": self.classification.to_json_value(),
                "spectrum": self.spectrum.to_json_value(),
                "gaps": self.gaps.as_ref().map(|g| g.to_json_value()),
                "root_delta": self.root_delta.to_json_value(),
                "duality": self.duality.as_ref().map(|c| c.to_json_value()),
                "trig_limit": self.trig_limit.as_ref().map(|c| c.to_json_value()),
            },
        })
    }
}

/// Run classification, spectrum, band-interior search, duality and
/// trigonometric-limit checks. Failed checks are reported, not raised.
pub fn verify_theorems(spec: &PotentialSpec) -> Result<Verdict> {
    verify_theorems_with(spec, &SpectrumSettings::default())
}

pub fn verify_theorems_with(spec: &PotentialSpec, settings: &SpectrumSettings) -> Result<Verdict> {
    let n = match spec.kind() {
        PotentialKind::Elliptic(n) => *n,
        _ => return Err(Error::InvalidInput("verification needs an elliptic potential".into())),
    };
    let classification = classify(&n)?;
    let spectrum = classify_spectrum_with(spec, settings)?;
    let mut root_defect: f64 = 0.0;
    for r in &spectrum.roots {
        let d = discriminant(spec, r.value, &settings.integrator)?;
        root_defect = root_defect.max((d - 2.0).norm().min((d + 2.0).norm()));
    }
    let gaps = if classification.case != CaseLabel::None && spectrum.all_real {
        Some(gap_report_from(spec, &spectrum, settings)?)
    } else {
        None
    };
    let duality = match classification.dual {
        Some(dual) if n.as_array().iter().all(|&k| k <= 3) => {
            let other = spectral_polynomial_with(&PotentialSpec::elliptic(dual, spec.torus().clone())?, &settings.kdv)?;
            Some(Check::new(coefficient_distance(&spectrum.q, &other), DUALITY_TOL))
        }
        _ => None,
    };
    let trig_limit = trig_limit_check(&classification, settings)?;
    Ok(Verdict {
        thm11_consistent: spectrum.theorem_consistent,
        thm12_counts_match: gaps.as_ref().map(|g| g.counts_match()),
        edge_signs_match: gaps.as_ref().map(|g| g.edge_signs_match()),
        root_delta: Check::new(root_defect, 1e-6),
        classification,
        spectrum,
        gaps,
        duality,
        trig_limit,
    })
}

/// Scale-weighted distance between the coefficient lists of `a` and `b`,
/// with the root scale of `a`; infinite for different degrees.
pub fn coefficient_distance(a: &SpectralPolynomial, b: &SpectralPolynomial) -> f64 {
    if a.degree() != b.degree() {
        return f64::INFINITY;
    }
    let scale = poly::roots(&a.coefficients).map(|r| poly::root_scale(&r)).unwrap_or(1.0);
    poly::scaled_coefficient_distance(&a.coefficients, &b.coefficients, scale)
}

/// `Q(.; 8i)` against the closed form of `n` (when `g = n0`) or of its dual
/// (cases B and C).
fn trig_limit_check(cls: &DtvClassification, settings: &SpectrumSettings) -> Result<Option<Check>> {
    let target = match cls.case {
        CaseLabel::B | CaseLabel::C => cls.dual,
        _ if cls.g == cls.n.get(0) => Some(cls.n),
        _ => None,
    };
    let Some(target) = target else { return Ok(None) };
    let torus = TorusParam::imaginary(TRIG_LIMIT_TAU_IM)?;
    let q = spectral_polynomial_with(&PotentialSpec::elliptic(cls.n, torus)?, &settings.kdv)?;
    let t = trig_spectral_polynomial(&target);
    Ok(Some(Check::new(coefficient_distance(&t, &q), TRIG_LIMIT_TOL)))
}

/// One row of a scan over purely imaginary periods.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub tau_im: f64,
    pub roots: Vec<SpectralRoot>,
    pub discriminant: poly::Discriminant,
    pub complex_pairs: usize,
    /// `None` when the band search was skipped or does not apply.
    pub gap_counts: Option<Vec<usize>>,
}

/// Spectral polynomial, its discriminant and (optionally) band-interior
/// counts for each `tau = i b`.
pub fn scan(
    n: MultiplicityVector,
    tau_ims: &[f64],
    with_gaps: bool,
    settings: &SpectrumSettings,
) -> Result<Vec<ScanRow>> {
    use rayon::prelude::*;
    tau_ims
        .par_iter()
        .map(|&b| {
            let spec = PotentialSpec::elliptic(n, TorusParam::imaginary(b)?)?;
            let report = classify_spectrum_with(&spec, settings)?;
            let gap_counts = if with_gaps && report.all_real && classify(&n)?.case != CaseLabel::None {
                Some(gap_report_from(&spec, &report, settings)?.counts())
            } else {
                None
            };
            Ok(ScanRow {
                tau_im: b,
                discriminant: kdv::poly_discriminant(&report.q),
                complex_pairs: report.complex_pairs.len(),
                roots: report.roots,
                gap_counts,
            })
        })
        .collect()
}
