mod common;

use std::f64::consts::PI;

use common::{grid, single, tier1, two_tier};
use mmwave_uplink::model::units;
use mmwave_uplink::numerics::{integrate_with_breakpoints, QuadSpec};
use mmwave_uplink::power::{
    intensity_density, intensity_measure, power_moment, power_pdf, truncation_outage,
    PowerDistribution, PowerLaw, SingleTierLaw,
};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn measure_at_zero_and_positive() {
    let t = tier1(-60.0);
    assert_eq!(intensity_measure(0.0, &t).unwrap(), 0.0);
    for y in [1e-6, 1.0, 1e4, 1e9] {
        assert!(intensity_measure(y, &t).unwrap() > 0.0);
    }
    assert!(intensity_measure(-1.0, &t).is_err());
}

#[test]
fn measure_blockage_limits() {
    let mut t = tier1(-60.0);
    for y in [1e2f64, 1e4, 1e6] {
        t.blockage = 1e-9;
        let los = PI * t.density * y.powf(2.0 / t.alpha_los);
        assert!(rel(intensity_measure(y, &t).unwrap(), los) < 1e-6);
        t.blockage = 1e3;
        let nlos = PI * t.density * y.powf(2.0 / t.alpha_nlos);
        assert!(rel(intensity_measure(y, &t).unwrap(), nlos) < 1e-6);
    }
}

#[test]
fn density_collapses_for_equal_exponents() {
    let mut t = tier1(-60.0);
    t.alpha_los = 3.0;
    t.alpha_nlos = 3.0;
    let rho = t.cutoff;
    for beta in [1e-4, 0.0071, 0.5] {
        t.blockage = beta;
        for p in [1e-7f64, 1e-3, 0.5] {
            let want = 2.0 * PI * t.density / (3.0 * rho.powf(2.0 / 3.0)) * p.powf(2.0 / 3.0 - 1.0);
            assert!(rel(intensity_density(p, rho, &t).unwrap(), want) < 1e-12);
        }
    }
}

#[test]
fn density_near_origin() {
    // with α_L = 2 the LOS part tends to πλ/ρ_o; the NLOS part behaves like p^{3/α_N − 1}
    let mut t = tier1(-60.0);
    t.alpha_nlos = 2.5;
    let want = 2.0 * PI * t.density / (2.0 * t.cutoff);
    let got = intensity_density(1e-200, t.cutoff, &t).unwrap();
    assert!(rel(got, want) < 1e-9);
    t.alpha_nlos = 4.0;
    let a = intensity_density(1e-40, t.cutoff, &t).unwrap();
    let b = intensity_density(1e-44, t.cutoff, &t).unwrap();
    assert!(rel(b / a, 10.0) < 1e-4);
    assert!(intensity_density(0.0, t.cutoff, &t).is_err());
}

#[test]
fn density_integrates_to_measure() {
    let spec = QuadSpec::default();
    for rho_dbm in [-90.0, -60.0, -30.0] {
        let t = tier1(rho_dbm);
        let rho = t.cutoff;
        // ∫₀^{P_u} in ln p; below e^{-60} the remaining mass is negligible
        let f = |v: f64| {
            let p = v.exp();
            intensity_density(p, rho, &t).unwrap() * p
        };
        let pts: Vec<f64> = grid(-60.0, 0.0, 61);
        let head = intensity_measure((-60f64).exp() / rho, &t).unwrap();
        let v = integrate_with_breakpoints(f, -60.0, 0.0, &pts, &spec).unwrap().value + head;
        let want = intensity_measure(1.0 / rho, &t).unwrap();
        assert!(rel(v, want) < 1e-6, "rho {rho_dbm}: {v} vs {want}");
    }
}

#[test]
fn pdf_normalized() {
    let spec = QuadSpec::default();
    for net in [single(-80.0), single(-40.0), two_tier(-60.0, -70.0)] {
        for j in 0..net.num_tiers() {
            let law = PowerLaw::new(&net, j).unwrap();
            let rule = law.rule(&spec).unwrap();
            let logs: Vec<f64> = rule.edges.iter().map(|p| p.ln()).collect();
            let (a, b) = (logs[0], *logs.last().unwrap());
            let v = integrate_with_breakpoints(
                |v| {
                    let p = v.exp();
                    power_pdf(p, j, &net).unwrap() * p
                },
                a,
                b,
                &logs,
                &spec,
            )
            .unwrap()
            .value;
            assert!((v - 1.0).abs() < 1e-6, "mass {v}");
            // the fixed rule carries the same mass
            let w: f64 = rule.weights.iter().sum();
            assert!((w - 1.0).abs() < 1e-8, "rule mass {w}");
        }
    }
}

#[test]
fn pdf_rejects_out_of_range() {
    let net = single(-60.0);
    assert!(power_pdf(-1e-3, 0, &net).is_err());
    assert!(power_pdf(1.5, 0, &net).is_err());
    // the density is unbounded at the origin when α_N > 3
    assert_eq!(power_pdf(0.0, 0, &net).unwrap(), f64::INFINITY);
    let flat = net.with_tier(0, |t| t.alpha_nlos = 2.0).unwrap();
    let lim = power_pdf(1e-30, 0, &flat).unwrap();
    assert!(rel(power_pdf(0.0, 0, &flat).unwrap(), lim) < 1e-9);
}

#[test]
fn multi_tier_path_reduces_to_single_tier() {
    let spec = QuadSpec::default();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
    for _ in 0..20 {
        let rho = rng.random_range(-100.0..0.0);
        let lam_km = rng.random_range(0.5..200.0);
        let beta = rng.random_range(0.001..0.05);
        let al = rng.random_range(1.8..3.0);
        let an = al + rng.random_range(0.0..2.5);
        let net = single(rho)
            .with_tier(0, |t| {
                t.density = units::per_km2_to_per_m2(lam_km);
                t.blockage = beta;
                t.alpha_los = al;
                t.alpha_nlos = an;
            })
            .unwrap();
        let multi = PowerLaw::new(&net, 0).unwrap();
        let one = SingleTierLaw::new(net.tier(0).unwrap(), net.max_power());
        for e in grid(-12.0, 0.0, 20) {
            let p = 10f64.powf(e);
            let (a, b) = (multi.pdf(p), one.pdf(p));
            assert!(a == b || rel(a, b) < 1e-12, "pdf at {p}: {a} vs {b}");
        }
        let (a, b) = (multi.truncation_outage(), one.truncation_outage());
        assert!(a == b || rel(a, b) < 1e-12);
        let (m1, m2) = (multi.moment(1.0, &spec).unwrap(), one.moment(1.0, &spec).unwrap());
        assert!(rel(m1, m2) < 1e-12);
    }
}

#[test]
fn zeroth_moment_and_support_bound() {
    let spec = QuadSpec::default();
    for rho in grid(-100.0, 0.0, 11) {
        let net = single(rho);
        assert_eq!(power_moment(0.0, 0, &net, &spec).unwrap(), 1.0);
        let m = power_moment(1.0, 0, &net, &spec).unwrap();
        assert!(m > 0.0 && m <= net.max_power());
    }
    assert!(power_moment(-1.0, 0, &single(-60.0), &spec).is_err());
}

#[test]
fn moment_matches_rule_expectation() {
    let spec = QuadSpec::default();
    let net = two_tier(-50.0, -70.0);
    for j in 0..2 {
        let law = PowerLaw::new(&net, j).unwrap();
        let rule = law.rule(&spec).unwrap();
        for delta in [0.5, 1.0, 2.0 / 2.9] {
            let a = law.moment(delta, &spec).unwrap();
            let b = rule.expect(|p| p.powf(delta));
            assert!(rel(a, b) < 1e-8, "delta {delta}: {a} vs {b}");
        }
    }
}

#[test]
fn truncation_limits() {
    let dense_rho = single(-200.0);
    assert!(truncation_outage(0, &dense_rho).unwrap() < 1e-12);
    let empty = single(-60.0).with_tier(0, |t| t.density = 1e-30).unwrap();
    assert!(truncation_outage(0, &empty).unwrap() > 1.0 - 1e-12);
}

#[test]
fn truncation_monotone_in_cutoff() {
    let mut last = 0.0;
    for rho in grid(-100.0, 0.0, 50) {
        let v = truncation_outage(0, &single(rho)).unwrap();
        assert!(v >= last, "rho {rho}");
        last = v;
    }
}

#[test]
fn truncation_monotone_in_blockage() {
    for rho in grid(-100.0, 0.0, 11) {
        let mut last = 0.0;
        for beta in [0.002, 0.0071, 0.02, 0.05] {
            let net = single(rho).with_tier(0, |t| t.blockage = beta).unwrap();
            let v = truncation_outage(0, &net).unwrap();
            assert!(v >= last, "rho {rho} beta {beta}");
            last = v;
        }
    }
}

#[test]
fn truncation_monotone_in_density() {
    for rho in grid(-100.0, 0.0, 11) {
        let mut last = 1.0;
        for lam in grid(0.1, 200.0, 50) {
            let net = single(rho)
                .with_tier(0, |t| t.density = units::per_km2_to_per_m2(lam))
                .unwrap();
            let v = truncation_outage(0, &net).unwrap();
            assert!(v <= last, "rho {rho} lambda {lam}");
            last = v;
        }
    }
}

#[test]
fn serving_cutoff_enters_every_source_tier() {
    // a tier-2 user sees tier 1 through its own cutoff ρ_o^2
    let net = two_tier(-40.0, -70.0);
    let rho2 = net.tier(1).unwrap().cutoff;
    let want: f64 = net
        .tiers()
        .iter()
        .map(|t| intensity_measure(net.max_power() / rho2, t).unwrap())
        .sum();
    let got = truncation_outage(1, &net).unwrap();
    assert!(rel(got, (-want).exp()) < 1e-13);
}

#[test]
fn quantile_inverts_cdf() {
    let law = PowerLaw::new(&two_tier(-60.0, -60.0), 0).unwrap();
    for u in [1e-9, 0.01, 0.5, 0.99, 1.0 - 1e-9] {
        let p = law.quantile(u).unwrap();
        assert!((law.cdf(p) - u).abs() < 1e-10 * u.max(1e-3), "u {u}");
    }
}
