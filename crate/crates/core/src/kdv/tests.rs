use super::*;
use crate::floquet::{discriminant, IntegratorSettings};
use crate::potential::{classify, CaseLabel, PotentialSpec};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn mv(n: [u32; 4]) -> MultiplicityVector {
    MultiplicityVector::new(n).unwrap()
}

fn elliptic(n: [u32; 4], b: f64) -> PotentialSpec {
    PotentialSpec::elliptic(mv(n), TorusParam::imaginary(b).unwrap()).unwrap()
}

fn scale_of(q: &SpectralPolynomial) -> f64 {
    poly::root_scale(&poly::roots(&q.coefficients).unwrap())
}

fn distance(a: &SpectralPolynomial, b: &SpectralPolynomial) -> f64 {
    assert_eq!(a.degree(), b.degree());
    poly::scaled_coefficient_distance(&a.coefficients, &b.coefficients, scale_of(a))
}

#[test]
fn lame_polynomial_is_the_weierstrass_cubic() {
    for tau in [c(0.0, 1.0), c(0.0, 1.5), c(0.2, 1.1)] {
        let torus = TorusParam::new(tau).unwrap();
        let e = elliptic::invariants(&torus).unwrap().e;
        let spec = PotentialSpec::elliptic(mv([1, 0, 0, 0]), torus).unwrap();
        let q = spectral_polynomial(&spec).unwrap();
        let want = poly::from_roots(&e);
        let s = poly::root_scale(&e);
        assert!(poly::scaled_coefficient_distance(&q.coefficients, &want, s) < 1e-12, "tau={tau}");
    }
}

#[test]
fn lame_square_lattice_value() {
    let q = spectral_polynomial(&elliptic([1, 0, 0, 0], 1.0)).unwrap();
    // e1 = Gamma(1/4)^4 / (32 pi) on the square lattice
    let e1 = 6.875_185_818_020_373;
    assert!((q.coefficients[2].re + e1 * e1).abs() < 1e-11 * e1 * e1);
    assert!(q.coefficients[1].norm() < 1e-12 && q.coefficients[3].norm() < 1e-10);
}

#[test]
fn trig_mode_recursion_matches_closed_form() {
    let torus = TorusParam::imaginary(1.0).unwrap();
    for n in [[1, 0, 0, 0], [2, 0, 0, 0], [2, 1, 0, 0], [3, 1, 0, 0], [1, 3, 0, 0], [4, 4, 0, 0]] {
        let spec = PotentialSpec::trig_limit(mv(n), torus.clone()).unwrap();
        let q = spectral_polynomial(&spec).unwrap();
        let t = trig_spectral_polynomial(&mv(n));
        assert!(distance(&t, &q) < 1e-10, "{n:?}: {}", distance(&t, &q));
    }
}

#[test]
fn dual_vectors_share_the_spectral_polynomial() {
    for b in [1.0, 0.7, 1.8] {
        for (n, m) in [([2, 1, 1, 1], [3, 0, 0, 0]), ([2, 2, 1, 0], [3, 1, 0, 0])] {
            let a = spectral_polynomial(&elliptic(n, b)).unwrap();
            let d = spectral_polynomial(&elliptic(m, b)).unwrap();
            assert!(distance(&a, &d) < 1e-8, "{n:?} vs {m:?} at b={b}");
        }
    }
}

#[test]
fn modular_transform_rescales_the_roots() {
    // tau -> -1/tau swaps the half periods 1/2 and tau/2
    let b = 1.3;
    let a = spectral_polynomial(&elliptic([2, 1, 0, 1], b)).unwrap();
    let t = spectral_polynomial(&elliptic([2, 0, 1, 1], 1.0 / b)).unwrap();
    let roots: Vec<Complex64> = poly::roots(&a.coefficients).unwrap().iter().map(|r| -b * b * r).collect();
    let want = poly::from_roots(&roots);
    let s = poly::root_scale(&roots);
    assert!(poly::scaled_coefficient_distance(&t.coefficients, &want, s) < 1e-8);
    assert_eq!(modular_partner(&TorusParam::imaginary(b).unwrap()).unwrap().tau(), c(0.0, 1.0 / b));
}

#[test]
fn large_period_approaches_trigonometric_limit() {
    for n in [[1, 0, 0, 0], [3, 1, 0, 0], [2, 2, 1, 0], [3, 1, 1, 0]] {
        let cls = classify(&mv(n)).unwrap();
        let target = match cls.case {
            CaseLabel::B | CaseLabel::C => cls.dual.unwrap(),
            _ => mv(n),
        };
        let q = spectral_polynomial(&elliptic(n, 8.0)).unwrap_or_else(|e| panic!("{n:?} {e}"));
        let t = trig_spectral_polynomial(&target);
        assert!(distance(&t, &q) < 1e-3, "{n:?}");
    }
}

#[test]
fn base_point_does_not_matter() {
    let torus = TorusParam::imaginary(0.9).unwrap();
    let base = PotentialSpec::elliptic(mv([2, 1, 1, 0]), torus).unwrap();
    let reference = spectral_polynomial(&base).unwrap();
    for z0 in [c(0.1, 0.3), c(0.37, 0.12), c(0.0, 0.6)] {
        let spec = base.with_z0(z0).unwrap();
        let q = spectral_polynomial_with(&spec, &KdvSettings { use_spec_line: true, ..Default::default() })
            .unwrap();
        assert!(distance(&reference, &q) < 1e-9, "z0={z0}");
    }
}

#[test]
fn roots_are_periodic_or_antiperiodic_eigenvalues() {
    let spec = elliptic([2, 2, 1, 0], 1.0);
    let q = spectral_polynomial(&spec).unwrap();
    let settings = IntegratorSettings::default();
    for r in poly::roots(&q.coefficients).unwrap() {
        let d = discriminant(&spec, r, &settings).unwrap();
        let off = (d - 2.0).norm().min((d + 2.0).norm());
        assert!(off < 1e-6, "E={r}: Delta={d}");
    }
}

#[test]
fn product_solution_solves_the_third_order_equation() {
    let spec = elliptic([2, 1, 0, 0], 1.0);
    let chain = kdv_chain(&spec, genus(&mv([2, 1, 0, 0])), 256).unwrap();
    let e = c(3.7, 1.0);
    let f = product_solution(&chain, e);
    let (f1, f3) = (f.derivative(1).samples(), f.derivative(3).samples());
    let (f0, q) = (f.samples(), chain.potential().samples());
    let dq = chain.potential().derivative(1).samples();
    let scale = f3.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for p in 0..f0.len() {
        let res = f3[p] - 4.0 * (e - q[p]) * f1[p] + 2.0 * dq[p] * f0[p];
        assert!(res.norm() < 1e-9 * scale, "x_{p}: {res}");
    }
}

#[test]
fn grid_doubling_is_stable() {
    let spec = elliptic([3, 2, 1, 1], 0.8);
    let q = spectral_polynomial(&spec).unwrap();
    let n = q.grid.unwrap();
    let q2 = spectral_polynomial_with(&spec, &KdvSettings { grid: Some(2 * n), ..Default::default() }).unwrap();
    assert!(distance(&q, &q2) < 1e-9);
    assert!(q.z_constancy_diag < 1e-9 && q.termination_residual < 1e-9);
}

#[test]
fn coarse_grid_is_reported() {
    let spec = elliptic([3, 3, 3, 2], 0.3);
    let err = spectral_polynomial_with(&spec, &KdvSettings { grid: Some(64), ..Default::default() });
    assert!(matches!(err, Err(Error::ResolutionError { grid: 64, .. })), "{err:?}");
    // automatic growth succeeds
    let q = spectral_polynomial(&spec).unwrap();
    assert!(q.grid.unwrap() > 512);
}

#[test]
fn constant_potential_has_genus_zero() {
    let q = spectral_polynomial(&PotentialSpec::constant(c(2.0, 0.5))).unwrap();
    assert_eq!(q.degree(), 1);
    assert!((q.coefficients[1] + c(2.0, 0.5)).norm() < 1e-14);
}

#[test]
fn json_view_lists_roots() {
    let q = spectral_polynomial(&elliptic([1, 0, 0, 0], 1.0)).unwrap();
    let roots = spectral_roots(&q).unwrap();
    let v = q.to_json_value(&roots);
    assert_eq!(v["degree"], 3);
    assert_eq!(v["roots"].as_array().unwrap().len(), 3);
    assert_eq!(v["roots"][0]["real"], true);
}


#[test]
fn lame_first_coefficient_is_minus_wp() {
    let spec = elliptic([1, 0, 0, 0], 1.0);
    let chain = kdv_chain(&spec, 1, 256).unwrap();
    // f_1 = u_1 + d_1 = -P, so d_1 = -mean(P) = 2 eta_1 = pi on the square lattice
    assert!((chain.constants()[0] - PI).norm() < 1e-9);
    let f1 = chain.f(1);
    for x in [0.0, 0.3, 0.71] {
        let wp = elliptic::wp(chain.line() + x, spec.torus()).unwrap();
        assert!((f1.eval(x) + wp).norm() < 1e-9 * wp.norm().max(1.0));
    }
    assert!((chain.basis(0).eval(0.4) - 1.0).norm() < 1e-15);
}
