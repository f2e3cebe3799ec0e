mod common;

use std::f64::consts::PI;

use common::{grid, single, tier1, tier2, user};
use mmwave_uplink::dense::{dense_exponents, dense_sir_outage, DenseSpec};
use mmwave_uplink::model::{units, NetworkConfig};
use mmwave_uplink::numerics::QuadSpec;
use mmwave_uplink::power::{dense_power_pdf, power_pdf, DenseLaw, PowerDistribution};
use mmwave_uplink::sinr::SinrQuery;
use mmwave_uplink::Error;

const RB: f64 = 200.0;

fn lam_dense() -> f64 {
    100.0 / (PI * RB * RB)
}

fn dense_single(rho_dbm: f64) -> NetworkConfig {
    single(rho_dbm)
        .with_tier(0, |t| t.density = lam_dense())
        .unwrap()
}

fn dense_two_tier(rho_dbm: f64) -> NetworkConfig {
    let mut t1 = tier1(rho_dbm);
    t1.density = lam_dense();
    t1.bs_main_gain = units::db_to_lin(10.0);
    let mut t2 = tier2(rho_dbm);
    t2.density = 2.0 * lam_dense();
    NetworkConfig::new(vec![t1, t2], user(), 1.0, 1e-14, 3, 1e-3).unwrap()
}

fn outage(net: &NetworkConfig, j: usize, theta_db: f64, l: u32) -> mmwave_uplink::Result<f64> {
    let q = SinrQuery::new(net, j, units::db_to_lin(theta_db)).unwrap();
    let spec = DenseSpec::for_network(net, RB, l).unwrap();
    dense_sir_outage(&q, &spec, net, &QuadSpec::default())
}

#[test]
fn exponents_match_high_precision_reference() {
    // 30-digit quadrature of the exponent integrand, θ = 0 dB, ρ_o = −60 dBm, L = 20
    let reference = [
        (1, 0.22883242221814743021),
        (2, 0.40972911316685846028),
        (3, 0.56640928368193292036),
        (20, 2.2206735914497318166),
    ];
    let net = dense_single(-60.0);
    let q = SinrQuery::new(&net, 0, 1.0).unwrap();
    let spec = DenseSpec::for_network(&net, RB, 20).unwrap();
    let e = dense_exponents(&q, &spec, &net, &QuadSpec::default()).unwrap();
    for (l, want) in reference {
        let got = e[l - 1];
        assert!(((got - want) / want).abs() < 2e-9, "l {l}: {got} vs {want}");
    }
}

#[test]
fn outage_matches_disc_model_monte_carlo() {
    // 2·10⁵ draws of the LOS-disc interference, E[(1 − e^{−ηsI})^L]; ±5σ ≈ 1e-3
    let reference = [(1, 0.97122), (2, 0.97655), (5, 0.97768), (10, 0.97425)];
    let net = dense_single(-60.0);
    for (l, want) in reference {
        let got = outage(&net, 0, 20.0, l).unwrap();
        assert!((got - want).abs() < 1e-3, "L {l}: {got} vs {want}");
    }
}

#[test]
fn vanishes_with_threshold() {
    for net in [dense_single(-60.0), dense_two_tier(-60.0)] {
        for j in 0..net.num_tiers() {
            for l in [1, 2, 5, 10] {
                assert!(outage(&net, j, -60.0, l).unwrap() <= 1e-6);
            }
        }
    }
}

#[test]
fn independent_of_noise() {
    let net = dense_two_tier(-60.0);
    for j in 0..2 {
        let a = outage(&net, j, 10.0, 10).unwrap();
        let b = outage(&net.with_noise_power(1e-3).unwrap(), j, 10.0, 10).unwrap();
        let c = outage(&net.with_noise_power(0.0).unwrap(), j, 10.0, 10).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(a.to_bits(), c.to_bits());
    }
}

#[test]
fn nondecreasing_in_threshold() {
    for net in [dense_single(-60.0), dense_two_tier(-60.0)] {
        for j in 0..net.num_tiers() {
            let mut last = 0.0;
            for th in grid(-10.0, 30.0, 50) {
                let v = outage(&net, j, th, 10).unwrap();
                assert!(v >= last - 1e-9, "tier {j} theta {th}");
                last = v;
            }
        }
    }
}

#[test]
fn dropping_cutoff_ratio_is_identical_for_one_tier() {
    let net = dense_single(-40.0);
    let q = SinrQuery::new(&net, 0, units::db_to_lin(15.0)).unwrap();
    let mut spec = DenseSpec::for_network(&net, RB, 10).unwrap();
    let a = dense_sir_outage(&q, &spec, &net, &QuadSpec::default()).unwrap();
    spec.drop_cutoff_ratio = true;
    let b = dense_sir_outage(&q, &spec, &net, &QuadSpec::default()).unwrap();
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn high_order_sum_reports_lost_precision() {
    // C(64, 32) ≈ 1.8e18 leaves no correct digits in double precision
    let net = dense_single(-60.0);
    match outage(&net, 0, 10.0, 64) {
        Err(Error::Cancellation { .. }) => {}
        other => panic!("expected a cancellation error, got {other:?}"),
    }
    assert!(outage(&net, 0, 10.0, 20).is_ok());
}

#[test]
fn power_pdf_normalized() {
    for net in [dense_single(-60.0), dense_two_tier(-50.0)] {
        for j in 0..net.num_tiers() {
            let law = DenseLaw::new(&net, j).unwrap();
            let rule = law.rule(&QuadSpec::default()).unwrap();
            let m: f64 = rule.weights.iter().sum();
            assert!((m - 1.0).abs() < 1e-8, "{m}");
        }
    }
}

#[test]
fn power_pdf_is_blockage_free_limit() {
    let net = dense_two_tier(-60.0);
    let clear = net.with_all_tiers(|t| t.blockage = 1e-9).unwrap();
    for j in 0..2 {
        let law = DenseLaw::new(&net, j).unwrap();
        for u in grid(0.01, 0.99, 20) {
            let p = law.quantile(u).unwrap();
            let a = dense_power_pdf(p, j, &net).unwrap();
            let b = power_pdf(p, j, &clear).unwrap();
            assert!(((a - b) / b).abs() < 1e-4, "tier {j} p {p}: {a} vs {b}");
        }
    }
}

#[test]
fn power_median_free_space() {
    // K = 1, α_L = 2: mass πλp/ρ_o, so the conditional median has a closed form
    let net = dense_single(-60.0);
    let law = DenseLaw::new(&net, 0).unwrap();
    let (lam, rho) = (lam_dense(), net.tier(0).unwrap().cutoff);
    let z = 1.0 - (-PI * lam / rho).exp();
    let want = -rho * (1.0 - 0.5 * z).ln() / (PI * lam);
    let got = law.quantile(0.5).unwrap();
    assert!(((got - want) / want).abs() < 1e-12);
}

#[test]
fn spec_validation() {
    let net = dense_single(-60.0);
    assert!(DenseSpec::new(0.0, 10, 100.0).is_err());
    assert!(DenseSpec::new(RB, 0, 100.0).is_err());
    assert!(DenseSpec::new(RB, 65, 100.0).is_err());
    let q = SinrQuery::new(&net, 0, 10.0).unwrap();
    let off = DenseSpec::new(RB, 10, 90.0).unwrap();
    match dense_sir_outage(&q, &off, &net, &QuadSpec::default()) {
        Err(e) => assert!(e.is_config()),
        Ok(v) => panic!("mismatched λ₀ accepted: {v}"),
    }
}
