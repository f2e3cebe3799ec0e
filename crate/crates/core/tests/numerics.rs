use mmwave_uplink::numerics::{
    integrate_1d, integrate_semi_infinite, upper_incomplete_gamma, QuadSpec,
};
use mmwave_uplink::Error;

// Γ(a, x) reference values from 30-digit arbitrary precision evaluation.
const GAMMA_REF: &[(f64, f64, f64)] = &[
    (-1.5, 1e-12, 6.6666666666466669e+17),
    (-1.5, 0.001, 21020.937167123548),
    (-1.5, 0.1, 16.807801463135935),
    (-1.5, 1.0, 0.12648781959325442),
    (-1.5, 10.0, 1.1651171685802437e-7),
    (-1.5, 100.0, 3.6301902339618281e-49),
    (-1.5, 700.0, 7.5782944054668364e-312),
    (-1.0, 1e-12, 999999999971.94621),
    (-1.0, 0.001, 992.66896046923882),
    (-1.0, 0.1, 7.2254502219402046),
    (-1.0, 1.0, 0.14849550677592205),
    (-1.0, 10.0, 3.8302404656316088e-7),
    (-1.0, 100.0, 3.6478214338803783e-48),
    (-0.69, 1e-12, 276153723.05277177),
    (-0.69, 0.001, 166.46506950667768),
    (-0.69, 0.1, 4.4709360581874093),
    (-0.69, 1.0, 0.16577183067835491),
    (-0.69, 10.0, 8.016333218666571e-7),
    (-0.69, 100.0, 1.5252576420283205e-47),
    (-0.69, 700.0, 1.5296822217072801e-309),
    (0.5, 1e-12, 1.772451850905516),
    (0.5, 0.001, 1.7092293732301665),
    (0.5, 0.1, 1.1604624847937442),
    (0.5, 1.0, 0.27880558528066198),
    (0.5, 10.0, 1.3726266235449858e-5),
    (0.5, 100.0, 3.7017478604082789e-45),
    (0.5, 700.0, 3.7239512701609022e-306),
    (-0.5, 1e-12, 1999996.4550942982),
    (-0.5, 0.1, 3.4017693366916153),
    (-0.5, 1.0, 0.17814771178156069),
    (-0.5, 100.0, 3.6656231225114085e-47),
    (1.31, 1e-12, 0.89600417674363133),
    (1.31, 1.0, 0.44646347335248934),
    (1.31, 100.0, 1.555560589239268e-43),
    (1.31, 700.0, 7.5168374517480522e-304),
    (-2.0, 1e-12, 4.9999999999900002e+23),
    (-2.0, 0.1, 41.629145790827871),
    (-2.0, 1.0, 0.10969196719776014),
    (-2.0, 100.0, 3.6127271070228845e-50),
];

#[test]
fn incomplete_gamma_matches_reference() {
    for &(a, x, want) in GAMMA_REF {
        let got = upper_incomplete_gamma(a, x).unwrap();
        // subnormal results cannot carry ten digits
        let tol = if want > 1e-300 { 1e-10 } else { 1e-3 };
        let rel = ((got - want) / want).abs();
        assert!(rel < tol, "Γ({a}, {x}) = {got:e}, want {want:e}, rel {rel:e}");
    }
}

#[test]
fn incomplete_gamma_small_x_approaches_complete() {
    let v = upper_incomplete_gamma(0.5, 1e-12).unwrap();
    assert!((v - std::f64::consts::PI.sqrt()).abs() < 3e-6);
}

#[test]
fn incomplete_gamma_recurrence() {
    for a in [-1.5, -1.0, -0.69, 0.5] {
        for x in [0.1, 1.0, 10.0] {
            let lhs = upper_incomplete_gamma(a + 1.0, x).unwrap();
            let rhs = a * upper_incomplete_gamma(a, x).unwrap() + x.powf(a) * (-x).exp();
            assert!(((lhs - rhs) / lhs).abs() < 1e-9, "a={a} x={x}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn incomplete_gamma_against_direct_integral() {
    // composite Simpson on t = x·e^u, independent of the library integrator
    let brute = |a: f64, x: f64| {
        let n = 200_000;
        let umax = (60.0 / x).max(1.0).ln() + 5.0;
        let h = umax / n as f64;
        let g = |u: f64| {
            let t = x * u.exp();
            t.powf(a) * (-t).exp()
        };
        let mut s = g(0.0) + g(umax);
        for i in 1..n {
            s += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    for (a, x) in [(-1.0, 1.0), (-0.69, 0.3), (-1.5, 2.0), (0.5, 0.7)] {
        let want = brute(a, x);
        let got = upper_incomplete_gamma(a, x).unwrap();
        assert!(((got - want) / want).abs() < 1e-9, "a={a} x={x}");
    }
}

#[test]
fn quadrature_examples() {
    let s = QuadSpec::default();
    assert!((integrate_1d(|x| x, 0.0, 1.0, &s).unwrap() - 0.5).abs() < 1e-14);
    assert!((integrate_1d(|x| 3.0 * x * x, 0.0, 1.0, &s).unwrap() - 1.0).abs() < 1e-14);
    // Rayleigh density with σ = 3 on a range holding all but e^{-200} of its mass
    let sig2 = 9.0;
    let ray = |r: f64| r / sig2 * (-r * r / (2.0 * sig2)).exp();
    let v = integrate_1d(ray, 0.0, 60.0, &s).unwrap();
    assert!((v - 1.0).abs() < 1e-8);
}

#[test]
fn semi_infinite_examples() {
    let s = QuadSpec::default();
    let cases: [(&dyn Fn(f64) -> f64, f64); 3] = [
        (&|x: f64| (-x).exp(), 0.0),
        (&|x: f64| x.powi(-2), 1.0),
        (&|x: f64| x * (-x * x / 2.0).exp(), 0.0),
    ];
    for (f, a) in cases {
        let v = integrate_semi_infinite(f, a, &s).unwrap();
        assert!((v - 1.0).abs() < 1e-8, "got {v}");
    }
}

#[test]
fn quadrature_stable_under_tolerance_halving() {
    let s = QuadSpec::default();
    let h = s.tightened(0.5);
    let fs: [&dyn Fn(f64) -> f64; 3] = [
        &|x: f64| (-x).exp() * x.sqrt(),
        &|x: f64| 1.0 / (1.0 + x * x),
        &|x: f64| x.powf(1.5) * (-x * x).exp(),
    ];
    for f in fs {
        let a = integrate_semi_infinite(f, 0.0, &s).unwrap();
        let b = integrate_semi_infinite(f, 0.0, &h).unwrap();
        assert!(((a - b) / b).abs() <= s.rel_tol);
    }
}

#[test]
fn non_convergence_carries_estimate() {
    let s = QuadSpec {
        max_subdivisions: 10,
        ..QuadSpec::default()
    };
    match integrate_1d(|x| (1.0 / x).sin(), 1e-8, 1.0, &s) {
        Err(Error::NoConvergence {
            estimate,
            error_bound,
            ..
        }) => {
            assert!(estimate.is_finite());
            assert!(error_bound > 0.0);
        }
        other => panic!("expected non-convergence, got {other:?}"),
    }
}

#[test]
fn quad_spec_validation() {
    assert!(QuadSpec::default().validate().is_ok());
    let bad = QuadSpec {
        tail_cut_probability: 1e-3,
        ..QuadSpec::default()
    };
    assert!(bad.validate().is_err());
    let bad = QuadSpec {
        max_subdivisions: 4,
        ..QuadSpec::default()
    };
    assert!(bad.validate().is_err());
}
