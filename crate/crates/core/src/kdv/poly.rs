//! Dense complex polynomials with coefficients in descending order.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Horner evaluation of `p` and `p'`.
pub fn eval_with_derivative(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = zero();
    let mut dp = zero();
    for c in coeffs {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

pub fn eval(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs.iter().fold(zero(), |acc, c| acc * z + c)
}

pub fn derivative(coeffs: &[Complex64]) -> Vec<Complex64> {
    let d = coeffs.len() - 1;
    coeffs[..d].iter().enumerate().map(|(i, c)| c * (d - i) as f64).collect()
}

/// Monic polynomial with the given roots.
pub fn from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut p = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![zero(); p.len() + 1];
        for (i, c) in p.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        p = next;
    }
    p
}

/// Root-magnitude bound (Fujiwara) of a monic polynomial.
pub fn root_bound(monic: &[Complex64]) -> f64 {
    let d = monic.len() - 1;
    let mut b: f64 = 0.0;
    for k in 1..=d {
        let mut t = monic[k].norm();
        if k == d {
            t /= 2.0;
        }
        b = b.max(t.powf(1.0 / k as f64));
    }
    (2.0 * b).max(f64::MIN_POSITIVE)
}

/// `p(S w) / S^d` for a monic `p`.
pub fn rescale(monic: &[Complex64], s: f64) -> Vec<Complex64> {
    let mut out = monic.to_vec();
    let mut f = 1.0;
    for c in out.iter_mut().skip(1) {
        f /= s;
        *c *= f;
    }
    out
}

/// Roots of a monic polynomial (Aberth-Ehrlich iteration on the rescaled
/// polynomial, then Newton polishing on the original).
pub fn roots(monic: &[Complex64]) -> Result<Vec<Complex64>> {
    let d = monic.len() - 1;
    if d == 0 {
        return Ok(Vec::new());
    }
    let s = root_bound(monic);
    let p = rescale(monic, s);
    let dp = derivative(&p);
    let center = -p[1] / d as f64;
    let radius = 0.5 + center.norm();
    let mut z: Vec<Complex64> = (0..d)
        .map(|k| {
            center
                + Complex64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / d as f64 + 0.4)
        })
        .collect();
    // a root is settled once |p(z)| is at the rounding level of the evaluation
    let backward = |z: Complex64| {
        let (mut acc, mut pow) = (0.0, 1.0);
        for c in p.iter().rev() {
            acc += c.norm() * pow;
            pow *= z.norm();
        }
        eval(&p, z).norm() / acc
    };
    let mut settled = vec![false; d];
    for _ in 0..1000 {
        for i in 0..d {
            if settled[i] {
                continue;
            }
            let pv = eval(&p, z[i]);
            let dv = eval(&dp, z[i]);
            if pv == zero() {
                settled[i] = true;
                continue;
            }
            let ratio = pv / dv;
            let mut sum = zero();
            for j in 0..d {
                if j != i {
                    sum += 1.0 / (z[i] - z[j]);
                }
            }
            let step = ratio / (1.0 - ratio * sum);
            if step.re.is_finite() && step.im.is_finite() {
                z[i] -= step;
                if step.norm() <= 4.0 * f64::EPSILON * z[i].norm().max(1e-3) {
                    settled[i] = true;
                }
            }
        }
        if settled.iter().all(|&s| s) {
            break;
        }
    }
    if z.iter().any(|&w| !(backward(w) <= 1e-12)) {
        return Err(Error::TolFailure("polynomial root iteration did not converge".into()));
    }
    let mut out: Vec<Complex64> = z.iter().map(|w| w * s).collect();
    for r in out.iter_mut() {
        for _ in 0..3 {
            let (pv, dv) = eval_with_derivative(monic, *r);
            if dv == zero() {
                break;
            }
            let cand = *r - pv / dv;
            if eval(monic, cand).norm() < pv.norm() {
                *r = cand;
            } else {
                break;
            }
        }
    }
    Ok(out)
}

/// A root after clustering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralRoot {
    pub value: Complex64,
    pub multiplicity: u32,
    pub is_real: bool,
}

/// Relative tolerance for merging roots and for calling a root real.
pub const CLUSTER_TOL: f64 = 1e-6;
/// Largest admissible root condition number.
pub const MAX_CONDITION: f64 = 1e8;

/// `1 + max |root|`.
pub fn root_scale(roots: &[Complex64]) -> f64 {
    1.0 + roots.iter().map(|r| r.norm()).fold(0.0, f64::max)
}

/// Merge roots closer than `CLUSTER_TOL * scale`; real roots first, sorted
/// descending, then complex roots by descending real part and imaginary part.
pub fn cluster(raw: &[Complex64]) -> Vec<SpectralRoot> {
    let scale = root_scale(raw);
    let tol = CLUSTER_TOL * scale;
    let mut group: Vec<usize> = (0..raw.len()).collect();
    fn find(g: &mut Vec<usize>, i: usize) -> usize {
        let mut r = i;
        while g[r] != r {
            r = g[r];
        }
        g[i] = r;
        r
    }
    for i in 0..raw.len() {
        for j in i + 1..raw.len() {
            if (raw[i] - raw[j]).norm() <= tol {
                let (a, b) = (find(&mut group, i), find(&mut group, j));
                group[a.max(b)] = a.min(b);
            }
        }
    }
    let mut out = Vec::new();
    for i in 0..raw.len() {
        if find(&mut group, i) != i {
            continue;
        }
        let members: Vec<Complex64> =
            (0..raw.len()).filter(|&j| find(&mut group, j) == i).map(|j| raw[j]).collect();
        let mean = members.iter().sum::<Complex64>() / members.len() as f64;
        let is_real = mean.im.abs() <= tol;
        let value = if is_real { Complex64::new(mean.re, 0.0) } else { mean };
        out.push(SpectralRoot { value, multiplicity: members.len() as u32, is_real });
    }
    out.sort_by(|a, b| {
        b.is_real
            .cmp(&a.is_real)
            .then(b.value.re.total_cmp(&a.value.re))
            .then(b.value.im.total_cmp(&a.value.im))
    });
    out
}

/// Condition number of a simple root relative to the root scale.
pub fn condition_number(monic: &[Complex64], root: Complex64, scale: f64) -> f64 {
    let d = monic.len() - 1;
    let mut sens = 0.0;
    let mut pow = 1.0;
    for k in 0..=d {
        sens += monic[d - k].norm() * pow;
        pow *= root.norm();
    }
    let (_, dv) = eval_with_derivative(monic, root);
    sens / (dv.norm() * scale)
}

/// Clustered roots, rejecting ill-conditioned simple roots.
pub fn clustered_roots(monic: &[Complex64]) -> Result<Vec<SpectralRoot>> {
    let raw = roots(monic)?;
    let scale = root_scale(&raw);
    let clustered = cluster(&raw);
    for r in clustered.iter().filter(|r| r.multiplicity == 1) {
        let condition = condition_number(monic, r.value, scale);
        if !(condition <= MAX_CONDITION) {
            return Err(Error::IllConditioned { root: r.value, condition });
        }
    }
    Ok(clustered)
}

/// Polynomial discriminant, kept in logarithmic form so that high degrees do
/// not overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discriminant {
    /// `log10 |disc|` (`-inf` when the discriminant vanishes).
    pub log10_abs: f64,
    /// `disc / |disc|`.
    pub phase: Complex64,
    /// False when two roots are closer than `CLUSTER_TOL * scale`; the value
    /// is then below double-precision resolution and its sign is not reliable.
    pub resolved: bool,
}

impl Discriminant {
    /// The value itself (may overflow to infinity).
    pub fn value(&self) -> Complex64 {
        if self.log10_abs == f64::NEG_INFINITY {
            return zero();
        }
        self.phase * 10f64.powf(self.log10_abs)
    }
}

/// `det` of the Sylvester matrix of `f` and `g` (descending coefficients).
pub fn resultant(f: &[Complex64], g: &[Complex64]) -> Complex64 {
    let (m, n) = (f.len() - 1, g.len() - 1);
    let size = m + n;
    let mut s = DMatrix::<Complex64>::zeros(size, size);
    for row in 0..n {
        for (j, c) in f.iter().enumerate() {
            s[(row, row + j)] = *c;
        }
    }
    for row in 0..m {
        for (j, c) in g.iter().enumerate() {
            s[(n + row, row + j)] = *c;
        }
    }
    s.determinant()
}

/// `prod_{i<j} (r_i - r_j)^2` over the polished roots. Narrow gaps make the
/// normalized value tiny, far below what a determinant of the coefficients
/// resolves. Unresolved cases fall back to the resultant, which is at least
/// real for real coefficients.
pub fn discriminant(monic: &[Complex64]) -> Discriminant {
    let d = monic.len() - 1;
    if d <= 1 {
        return Discriminant { log10_abs: 0.0, phase: Complex64::new(1.0, 0.0), resolved: true };
    }
    let Ok(r) = roots(monic) else { return resultant_discriminant(monic) };
    let tol = CLUSTER_TOL * root_scale(&r);
    let separated = (0..d).all(|i| (i + 1..d).all(|j| (r[i] - r[j]).norm() > tol));
    if separated {
        root_product(&r)
    } else {
        resultant_discriminant(monic)
    }
}

fn root_product(r: &[Complex64]) -> Discriminant {
    let (mut log10_abs, mut phase) = (0.0, Complex64::new(1.0, 0.0));
    for i in 0..r.len() {
        for j in i + 1..r.len() {
            let f = (r[i] - r[j]) * (r[i] - r[j]);
            let norm = f.norm();
            if norm == 0.0 {
                return Discriminant { log10_abs: f64::NEG_INFINITY, phase: Complex64::new(1.0, 0.0), resolved: false };
            }
            log10_abs += norm.log10();
            phase *= f / norm;
        }
    }
    Discriminant { log10_abs, phase: phase / phase.norm(), resolved: true }
}

/// `(-1)^{d(d-1)/2} Res(p, p')` for monic `p`, computed on `p(S w)/S^d`
/// with `S` the root bound and scaled back by `S^{d(d-1)}`.
pub fn resultant_discriminant(monic: &[Complex64]) -> Discriminant {
    let d = monic.len() - 1;
    let s = root_bound(monic);
    let p = rescale(monic, s);
    let mut r = resultant(&p, &derivative(&p));
    if (d * (d - 1) / 2) % 2 == 1 {
        r = -r;
    }
    let norm = r.norm();
    if norm == 0.0 {
        return Discriminant { log10_abs: f64::NEG_INFINITY, phase: Complex64::new(1.0, 0.0), resolved: false };
    }
    Discriminant {
        log10_abs: norm.log10() + (d * (d - 1)) as f64 * s.log10(),
        phase: r / norm,
        resolved: false,
    }
}

/// `max_k |a_k - b_k| / S^{d-k}` for the coefficients `a_k` of `E^k`:
/// coefficient distance with each power of `E` weighted by the root scale `S`.
pub fn scaled_coefficient_distance(a: &[Complex64], b: &[Complex64], s: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, y))| (x - y).norm() / s.powi(i as i32))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn product_discriminant(r: &[Complex64]) -> Complex64 {
        let mut p = c(1.0, 0.0);
        for i in 0..r.len() {
            for j in i + 1..r.len() {
                p *= (r[i] - r[j]) * (r[i] - r[j]);
            }
        }
        p
    }

    #[test]
    fn recovers_known_roots() {
        let want = [c(3.0, 0.0), c(-1.5, 2.0), c(-1.5, -2.0), c(40.0, 0.0), c(0.25, 0.0)];
        let p = from_roots(&want);
        let got = clustered_roots(&p).unwrap();
        assert_eq!(got.len(), 5);
        assert_eq!(got[0].value, got[0].value);
        assert!((got[0].value - want[3]).norm() < 1e-12 && got[0].is_real);
        assert!(got.iter().filter(|r| !r.is_real).count() == 2);
        for w in want {
            assert!(got.iter().any(|r| (r.value - w).norm() < 1e-11));
        }
    }

    #[test]
    fn clusters_double_roots() {
        let p = from_roots(&[c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)]);
        let got = clustered_roots(&p).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!((got[0].multiplicity, got[1].multiplicity), (2, 1));
        let d = discriminant(&p);
        assert!(!d.resolved && (d.value().norm() == 0.0 || d.log10_abs < -8.0));
    }

    #[test]
    fn discriminant_matches_root_product() {
        let e1sq = 47.268;
        let cubic = [c(1.0, 0.0), c(0.0, 0.0), c(-e1sq, 0.0), c(0.0, 0.0)];
        let want = 4.0 * e1sq.powi(3);
        let got = discriminant(&cubic).value();
        assert!((got.re - want).abs() < 1e-9 * want && got.im.abs() < 1e-9 * want);
        let r = [c(5.0, 0.0), c(-2.0, 1.0), c(-2.0, -1.0), c(0.5, 0.0), c(9.0, 0.0), c(-7.0, 0.0)];
        let want = product_discriminant(&r);
        let got = discriminant(&from_roots(&r)).value();
        assert!((got - want).norm() < 1e-9 * want.norm());
    }

    #[test]
    fn discriminant_survives_large_degree_and_roots() {
        let r: Vec<Complex64> = (0..15).map(|k| c(-300.0 + 41.0 * k as f64, 0.0)).collect();
        let want_log: f64 = {
            let mut s = 0.0;
            for i in 0..r.len() {
                for j in i + 1..r.len() {
                    s += 2.0 * (r[i] - r[j]).norm().log10();
                }
            }
            s
        };
        let d = discriminant(&from_roots(&r));
        assert!((d.log10_abs - want_log).abs() < 1e-8, "{} vs {want_log}", d.log10_abs);
        assert!(d.phase.re > 0.999);
        let d = resultant_discriminant(&from_roots(&r));
        assert!((d.log10_abs - want_log).abs() < 1e-8 && d.phase.re > 0.999);
    }

    #[test]
    fn discriminant_sign_survives_narrow_gaps() {
        // three gaps of relative width 1e-4, 1e-5 and 5e-6
        let r = [c(-40.0, 0.0), c(-39.996, 0.0), c(-3.0, 0.0), c(-2.9996, 0.0), c(10.0, 0.0), c(10.0002, 0.0), c(30.0, 0.0)];
        let d = discriminant(&from_roots(&r));
        assert!(d.resolved && (d.phase - 1.0).norm() < 1e-12, "{}", d.phase);
        let want = product_discriminant(&r);
        assert!((d.log10_abs - want.norm().log10()).abs() < 1e-4);
    }
}
