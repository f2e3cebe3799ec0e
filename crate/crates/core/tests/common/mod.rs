#![allow(dead_code)]

use mmwave_uplink::model::{units, NetworkConfig, TierParams, UserAntennaParams};

pub fn tier1(rho_dbm: f64) -> TierParams {
    TierParams {
        density: 1e-5,
        blockage: 0.0071,
        cutoff: units::dbm_to_w(rho_dbm),
        receiver_sensitivity: units::dbm_to_w(-250.0),
        bs_main_gain: units::db_to_lin(7.0),
        bs_side_gain: units::db_to_lin(-10.0),
        bs_beamwidth: units::deg_to_rad(30.0),
        alpha_los: 2.0,
        alpha_nlos: 4.0,
    }
}

pub fn tier2(rho_dbm: f64) -> TierParams {
    TierParams {
        density: 2e-5,
        blockage: 0.0143,
        alpha_los: 2.9,
        alpha_nlos: 5.0,
        ..tier1(rho_dbm)
    }
}

pub fn user() -> UserAntennaParams {
    UserAntennaParams {
        main_gain: units::db_to_lin(7.0),
        side_gain: units::db_to_lin(-10.0),
        beamwidth: units::deg_to_rad(90.0),
    }
}

pub fn single(rho_dbm: f64) -> NetworkConfig {
    NetworkConfig::new(vec![tier1(rho_dbm)], user(), 1.0, 1e-14, 3, 1e-4).unwrap()
}

pub fn two_tier(rho1_dbm: f64, rho2_dbm: f64) -> NetworkConfig {
    NetworkConfig::new(
        vec![tier1(rho1_dbm), tier2(rho2_dbm)],
        user(),
        1.0,
        1e-14,
        3,
        1e-4,
    )
    .unwrap()
}

/// Evenly spaced grid including both ends.
pub fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}
