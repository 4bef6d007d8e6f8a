//! Periodic and antiperiodic eigenvalues on a real interval.
//!
//! Solutions of `Delta(E) = +-2` come in two flavours: transversal crossings
//! and tangencies, where `Delta` touches `+-2` at a critical point (a closed
//! gap). Crossings are bracketed by sign changes of `Delta -+ 2`, tangencies by
//! sign changes of `Delta'`. Sampling uses the fixed-step propagator; every
//! reported location is polished with the adaptive integrator.

use super::{discriminant, discriminant_derivative, taylor_order, IntegratorSettings, SampledPropagator};
use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use num_complex::Complex64;

const SAMPLES_PER_UNIT: f64 = 64.0;
const REFINE: usize = 8;
const REFINE_BAND: f64 = 0.2;
/// `|Delta(E_c) -+ 2|` below which a critical point counts as a tangency.
pub const TANGENCY_TOL: f64 = 1e-7;

/// A solution of `Delta(E) = parity` with `parity = +-2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenvalueHit {
    pub e: f64,
    pub parity: i32,
    /// Order of vanishing of `Delta^2 - 4` (3 means three or more).
    pub order: u32,
    /// `Delta(e)` from the adaptive integrator.
    pub delta: f64,
}

#[derive(Clone, Copy)]
struct Sample {
    e: f64,
    d: f64,
    dd: f64,
}

/// All `E` in `[a, b]` with `Delta(E) = +-2`, ascending.
///
/// Requires `Delta` to be real on the interval (rectangular lattice).
pub fn periodic_eigenvalues_on_interval(
    spec: &PotentialSpec,
    a: f64,
    b: f64,
    settings: &IntegratorSettings,
) -> Result<Vec<EigenvalueHit>> {
    settings.validate()?;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidInput(format!("invalid interval [{a}, {b}]")));
    }
    let probes: Vec<Complex64> =
        [a, 0.5 * (a + b), b].iter().map(|&e| Complex64::new(e, 0.0)).collect();
    let fast = SampledPropagator::calibrated(spec, &probes, 1e-9)?;
    let samples = sample(&fast, a, b)?;

    let mut hits = Vec::new();
    for w in samples.windows(2) {
        let (l, r) = (w[0], w[1]);
        for level in [2.0, -2.0] {
            if (l.d - level) * (r.d - level) <= 0.0 && !(l.d == level && l.e != a) {
                hits.push(polish_crossing(spec, l.e, r.e, level, settings)?);
            }
        }
        if l.dd * r.dd < 0.0 {
            critical_point(spec, &l, &r, settings, &mut hits)?;
        }
    }
    hits.sort_by(|x, y| x.e.total_cmp(&y.e));
    let hits = absorb_split_tangencies(spec, hits, settings)?;
    let mut merged: Vec<EigenvalueHit> = Vec::new();
    for h in hits {
        match merged.last_mut() {
            Some(last) if (h.e - last.e).abs() <= 1e-8 * (1.0 + h.e.abs()) && h.parity == last.parity => {
                if h.order > last.order {
                    *last = h;
                }
            }
            _ => merged.push(h),
        }
    }
    for h in merged.iter_mut() {
        let order = taylor_order(spec, h.e, settings)?;
        h.order = h.order.max(order);
    }
    Ok(merged)
}

fn sample(fast: &SampledPropagator, a: f64, b: f64) -> Result<Vec<Sample>> {
    let eval = |e: f64| {
        let (d, dd) = fast.discriminant_with_derivative(Complex64::new(e, 0.0));
        (d, dd)
    };
    let n = ((b - a) * SAMPLES_PER_UNIT).ceil().max(8.0) as usize;
    let mut coarse = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let e = if i == n { b } else { a + (b - a) * i as f64 / n as f64 };
        let (d, dd) = eval(e);
        if d.im.abs() > 1e-6 * (1.0 + d.norm()) {
            return Err(Error::InvalidInput(format!(
                "discriminant is not real at E = {e} (Im = {:.3e}); a rectangular lattice is required",
                d.im
            )));
        }
        coarse.push(Sample { e, d: d.re, dd: dd.re });
    }
    let near = |s: &Sample| (s.d.abs() - 2.0).abs() <= REFINE_BAND;
    let mut out = Vec::with_capacity(coarse.len());
    for w in coarse.windows(2) {
        out.push(w[0]);
        if near(&w[0]) || near(&w[1]) {
            for k in 1..REFINE {
                let e = w[0].e + (w[1].e - w[0].e) * k as f64 / REFINE as f64;
                let (d, dd) = eval(e);
                out.push(Sample { e, d: d.re, dd: dd.re });
            }
        }
    }
    out.push(*coarse.last().unwrap());
    Ok(out)
}

fn polish_crossing(
    spec: &PotentialSpec,
    lo: f64,
    hi: f64,
    level: f64,
    settings: &IntegratorSettings,
) -> Result<EigenvalueHit> {
    let f = |e: f64| -> Result<f64> {
        Ok(discriminant(spec, Complex64::new(e, 0.0), settings)?.re - level)
    };
    let (flo, fhi) = (f(lo)?, f(hi)?);
    let e = if flo * fhi <= 0.0 {
        brent(f, lo, hi, flo, fhi, level.abs() * settings.rel_tol)?
    } else {
        // the fast sampler saw a sign change the adaptive one does not: the
        // root sits at an endpoint to sampling accuracy
        let start = if flo.abs() < fhi.abs() { lo } else { hi };
        newton(spec, start, level, settings)?
    };
    let delta = discriminant(spec, Complex64::new(e, 0.0), settings)?.re;
    Ok(EigenvalueHit { e, parity: level as i32, order: 1, delta })
}

fn newton(spec: &PotentialSpec, start: f64, level: f64, settings: &IntegratorSettings) -> Result<f64> {
    let mut e = start;
    for _ in 0..50 {
        let (d, dd) = discriminant_derivative(spec, Complex64::new(e, 0.0), settings)?;
        let f = d.re - level;
        if f.abs() <= 2.0 * settings.rel_tol {
            return Ok(e);
        }
        if dd.re == 0.0 {
            break;
        }
        let step = f / dd.re;
        e -= step;
        if step.abs() <= 1e-15 * (1.0 + e.abs()) {
            return Ok(e);
        }
    }
    Err(Error::TolFailure(format!("Newton polishing near E = {start} did not converge")))
}

fn critical_point(
    spec: &PotentialSpec,
    l: &Sample,
    r: &Sample,
    settings: &IntegratorSettings,
    hits: &mut Vec<EigenvalueHit>,
) -> Result<()> {
    let g = |e: f64| -> Result<f64> {
        Ok(discriminant_derivative(spec, Complex64::new(e, 0.0), settings)?.1.re)
    };
    let (glo, ghi) = (g(l.e)?, g(r.e)?);
    if glo * ghi > 0.0 {
        return Ok(());
    }
    let ec = brent(g, l.e, r.e, glo, ghi, 0.0)?;
    let dc = discriminant(spec, Complex64::new(ec, 0.0), settings)?.re;
    let level = 2.0f64.copysign(dc);
    if (dc - level).abs() <= TANGENCY_TOL {
        hits.push(EigenvalueHit { e: ec, parity: level as i32, order: 2, delta: dc });
        return Ok(());
    }
    // an extremum beyond +-2 between two samples on the same side
    if dc.abs() > 2.0 && (l.d - level) * (r.d - level) > 0.0 && (l.d - level) * (dc - level) < 0.0 {
        hits.push(polish_crossing(spec, l.e, ec, level, settings)?);
        hits.push(polish_crossing(spec, ec, r.e, level, settings)?);
    }
    Ok(())
}

/// Integration error can push a tangency slightly past `+-2`, producing two
/// crossings a few `1e-6` apart around the critical point. Drop crossings that
/// belong to a reported tangency.
fn absorb_split_tangencies(
    spec: &PotentialSpec,
    hits: Vec<EigenvalueHit>,
    settings: &IntegratorSettings,
) -> Result<Vec<EigenvalueHit>> {
    let tangencies: Vec<EigenvalueHit> = hits.iter().filter(|h| h.order == 2).cloned().collect();
    let mut out = Vec::with_capacity(hits.len());
    'next: for h in hits {
        if h.order == 1 {
            for t in tangencies.iter().filter(|t| t.parity == h.parity) {
                if (t.e - h.e).abs() <= 1e-4 * (1.0 + t.e.abs()) {
                    let mid = 0.5 * (t.e + h.e);
                    let dm = discriminant(spec, Complex64::new(mid, 0.0), settings)?.re;
                    if (dm - t.parity as f64).abs() <= TANGENCY_TOL {
                        continue 'next;
                    }
                }
            }
        }
        out.push(h);
    }
    Ok(out)
}

/// Brent's method on a bracket with `f(lo) f(hi) <= 0`; stops when
/// `|f| <= ftol` or the bracket collapses to machine precision.
fn brent<F>(mut f: F, lo: f64, hi: f64, flo: f64, fhi: f64, ftol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b, mut fa, mut fb) = (lo, hi, flo, fhi);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let (mut c, mut fc) = (a, fa);
    let (mut d, mut e) = (b - a, b - a);
    for _ in 0..200 {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 1e-300;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 || fb.abs() <= ftol {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Err(Error::TolFailure(format!("root bracket [{lo}, {hi}] did not converge")))
}
