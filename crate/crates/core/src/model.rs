//! Network parameters, blockage and the interference-link directivity law.
//!
//! Everything in here is SI linear: meters, watts, BS per m², radians.
//! Conversions from dBm / dB / km⁻² / degrees live in [`units`].

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub mod units {
    use std::f64::consts::PI;

    pub fn dbm_to_w(dbm: f64) -> f64 {
        10f64.powf((dbm - 30.0) / 10.0)
    }

    pub fn w_to_dbm(w: f64) -> f64 {
        10.0 * w.log10() + 30.0
    }

    pub fn db_to_lin(db: f64) -> f64 {
        10f64.powf(db / 10.0)
    }

    pub fn lin_to_db(x: f64) -> f64 {
        10.0 * x.log10()
    }

    pub fn per_km2_to_per_m2(x: f64) -> f64 {
        x * 1e-6
    }

    pub fn per_m2_to_per_km2(x: f64) -> f64 {
        x * 1e6
    }

    pub fn deg_to_rad(d: f64) -> f64 {
        d * PI / 180.0
    }

    pub fn rad_to_deg(r: f64) -> f64 {
        r * 180.0 / PI
    }
}

/// One tier of base stations.
#[derive(Debug, Clone, PartialEq)]
pub struct TierParams {
    /// BS per m².
    pub density: f64,
    /// LOS probability decay rate per meter.
    pub blockage: f64,
    /// Target received power ρ_o (W).
    pub cutoff: f64,
    /// Receiver sensitivity ρ_min (W). Validated, otherwise unused.
    pub receiver_sensitivity: f64,
    pub bs_main_gain: f64,
    pub bs_side_gain: f64,
    /// Main-lobe beamwidth (rad).
    pub bs_beamwidth: f64,
    pub alpha_los: f64,
    pub alpha_nlos: f64,
}

impl TierParams {
    /// Checks the tier invariants. `k` is the 1-based tier label used in messages.
    pub fn validate(&self, k: usize) -> Result<()> {
        let f = |name: &str| format!("tier.{k}.{name}");
        let finite = [
            ("density", self.density),
            ("blockage", self.blockage),
            ("cutoff", self.cutoff),
            ("receiver_sensitivity", self.receiver_sensitivity),
            ("bs_main_gain", self.bs_main_gain),
            ("bs_side_gain", self.bs_side_gain),
            ("bs_beamwidth", self.bs_beamwidth),
            ("alpha_los", self.alpha_los),
            ("alpha_nlos", self.alpha_nlos),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::config(f(name), "must be finite"));
            }
        }
        if self.density <= 0.0 {
            return Err(Error::config(f("density"), "must be positive"));
        }
        if self.blockage <= 0.0 {
            return Err(Error::config(f("blockage"), "must be positive"));
        }
        if self.receiver_sensitivity <= 0.0 {
            return Err(Error::config(f("receiver_sensitivity"), "must be positive"));
        }
        if self.cutoff <= self.receiver_sensitivity {
            return Err(Error::config(
                f("cutoff"),
                "must exceed the receiver sensitivity",
            ));
        }
        if self.alpha_los <= 0.0 {
            return Err(Error::config(f("alpha_los"), "must be positive"));
        }
        if self.alpha_nlos < self.alpha_los {
            return Err(Error::config(f("alpha_nlos"), "must be >= alpha_los"));
        }
        if self.bs_side_gain <= 0.0 {
            return Err(Error::config(f("bs_side_gain"), "must be positive"));
        }
        if self.bs_main_gain < self.bs_side_gain {
            return Err(Error::config(f("bs_main_gain"), "must be >= side-lobe gain"));
        }
        if !(self.bs_beamwidth > 0.0 && self.bs_beamwidth < 2.0 * PI) {
            return Err(Error::config(f("bs_beamwidth"), "must lie in (0, 2π)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserAntennaParams {
    pub main_gain: f64,
    pub side_gain: f64,
    /// Main-lobe beamwidth (rad).
    pub beamwidth: f64,
}

impl UserAntennaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.side_gain > 0.0 && self.side_gain.is_finite()) {
            return Err(Error::config("user.side_gain", "must be positive"));
        }
        if !(self.main_gain >= self.side_gain && self.main_gain.is_finite()) {
            return Err(Error::config("user.main_gain", "must be >= side-lobe gain"));
        }
        if !(self.beamwidth > 0.0 && self.beamwidth < 2.0 * PI) {
            return Err(Error::config("user.beamwidth", "must lie in (0, 2π)"));
        }
        Ok(())
    }
}

/// A validated network. Fields are read through accessors so the
/// invariants checked in [`NetworkConfig::new`] cannot be broken afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    tiers: Vec<TierParams>,
    user_antenna: UserAntennaParams,
    max_power: f64,
    noise_power: f64,
    nakagami: u32,
    user_density: f64,
}

impl NetworkConfig {
    pub fn new(
        tiers: Vec<TierParams>,
        user_antenna: UserAntennaParams,
        max_power: f64,
        noise_power: f64,
        nakagami: u32,
        user_density: f64,
    ) -> Result<Self> {
        if tiers.is_empty() {
            return Err(Error::config("tier", "at least one tier is required"));
        }
        for (i, t) in tiers.iter().enumerate() {
            t.validate(i + 1)?;
        }
        user_antenna.validate()?;
        if !(max_power > 0.0 && max_power.is_finite()) {
            return Err(Error::config("network.max_power", "must be positive"));
        }
        if !(noise_power >= 0.0 && noise_power.is_finite()) {
            return Err(Error::config("network.noise_power", "must be >= 0"));
        }
        if nakagami < 1 {
            return Err(Error::config("network.nakagami", "must be >= 1"));
        }
        if !(user_density >= 0.0 && user_density.is_finite()) {
            return Err(Error::config("network.user_density", "must be >= 0"));
        }
        Ok(NetworkConfig {
            tiers,
            user_antenna,
            max_power,
            noise_power,
            nakagami,
            user_density,
        })
    }

    pub fn tiers(&self) -> &[TierParams] {
        &self.tiers
    }

    /// Tier by 0-based index.
    pub fn tier(&self, j: usize) -> Result<&TierParams> {
        self.tiers
            .get(j)
            .ok_or_else(|| Error::argument("tier", format!("tier index {j} out of range")))
    }

    pub fn num_tiers(&self) -> usize {
        self.tiers.len()
    }

    pub fn user_antenna(&self) -> &UserAntennaParams {
        &self.user_antenna
    }

    pub fn max_power(&self) -> f64 {
        self.max_power
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn nakagami(&self) -> u32 {
        self.nakagami
    }

    pub fn user_density(&self) -> f64 {
        self.user_density
    }

    /// Returns a copy with one tier replaced by `f(tier)`, revalidated.
    pub fn with_tier(&self, j: usize, f: impl FnOnce(&mut TierParams)) -> Result<Self> {
        let mut tiers = self.tiers.clone();
        let t = tiers
            .get_mut(j)
            .ok_or_else(|| Error::argument("with_tier", format!("tier index {j} out of range")))?;
        f(t);
        Self::new(
            tiers,
            self.user_antenna.clone(),
            self.max_power,
            self.noise_power,
            self.nakagami,
            self.user_density,
        )
    }

    /// Applies `f` to every tier.
    pub fn with_all_tiers(&self, mut f: impl FnMut(&mut TierParams)) -> Result<Self> {
        let mut tiers = self.tiers.clone();
        tiers.iter_mut().for_each(&mut f);
        Self::new(
            tiers,
            self.user_antenna.clone(),
            self.max_power,
            self.noise_power,
            self.nakagami,
            self.user_density,
        )
    }

    pub fn with_max_power(&self, max_power: f64) -> Result<Self> {
        Self::new(
            self.tiers.clone(),
            self.user_antenna.clone(),
            max_power,
            self.noise_power,
            self.nakagami,
            self.user_density,
        )
    }

    pub fn with_noise_power(&self, noise_power: f64) -> Result<Self> {
        Self::new(
            self.tiers.clone(),
            self.user_antenna.clone(),
            self.max_power,
            noise_power,
            self.nakagami,
            self.user_density,
        )
    }

    pub fn with_nakagami(&self, nakagami: u32) -> Result<Self> {
        Self::new(
            self.tiers.clone(),
            self.user_antenna.clone(),
            self.max_power,
            self.noise_power,
            nakagami,
            self.user_density,
        )
    }

    /// Users per m².
    pub fn with_user_density(&self, user_density: f64) -> Result<Self> {
        Self::new(
            self.tiers.clone(),
            self.user_antenna.clone(),
            self.max_power,
            self.noise_power,
            self.nakagami,
            user_density,
        )
    }

    pub fn with_user_antenna(&self, user_antenna: UserAntennaParams) -> Result<Self> {
        Self::new(
            self.tiers.clone(),
            user_antenna,
            self.max_power,
            self.noise_power,
            self.nakagami,
            self.user_density,
        )
    }

    /// Serving-link gain 𝒢_j with both beams aligned.
    pub fn serving_gain(&self, j: usize) -> Result<f64> {
        Ok(self.tier(j)?.bs_main_gain * self.user_antenna.main_gain)
    }

    /// Largest power-inversion ratio P_u/ρ_o^j a tier-j user can afford.
    pub fn max_ratio(&self, j: usize) -> Result<f64> {
        Ok(self.max_power / self.tier(j)?.cutoff)
    }
}

/// LOS probability e^{-βr} of a link of length `r` meters.
pub fn los_probability(r: f64, tier: &TierParams) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::argument("los_probability", "distance must be >= 0"));
    }
    Ok((-tier.blockage * r).exp())
}

/// Gain / probability pairs of the interference-link directivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectivityPmf {
    pub gains: [f64; 4],
    pub probs: [f64; 4],
}

impl DirectivityPmf {
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.gains.iter().copied().zip(self.probs.iter().copied())
    }

    /// Index of the entry selected by a uniform draw `u` in [0, 1).
    pub fn sample_index(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (v, &b) in self.probs.iter().enumerate() {
            acc += b;
            if u < acc {
                return v;
            }
        }
        // u landed in the rounding slack above Σb
        self.probs.iter().rposition(|&b| b > 0.0).unwrap_or(3)
    }
}

pub fn directivity_pmf(tier: &TierParams, user: &UserAntennaParams) -> DirectivityPmf {
    let cr = tier.bs_beamwidth / (2.0 * PI);
    let ct = user.beamwidth / (2.0 * PI);
    DirectivityPmf {
        gains: [
            tier.bs_main_gain * user.main_gain,
            tier.bs_main_gain * user.side_gain,
            tier.bs_side_gain * user.main_gain,
            tier.bs_side_gain * user.side_gain,
        ],
        probs: [cr * ct, cr * (1.0 - ct), (1.0 - cr) * ct, (1.0 - cr) * (1.0 - ct)],
    }
}

/// η = N (N!)^{-1/N}, the fading-CDF approximation constant.
pub fn eta(n: u32) -> f64 {
    let nf = n as f64;
    let ln_fact: f64 = (1..=n).map(|i| (i as f64).ln()).sum();
    nf * (-ln_fact / nf).exp()
}

/// Binomial coefficient as f64 (exact for the small n used here).
pub fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_small_values() {
        assert_eq!(eta(1), 1.0);
        assert!((eta(3) - 3.0 / 6f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(3, 1), 3.0);
        assert_eq!(binomial(10, 5), 252.0);
        assert_eq!(binomial(5, 0), 1.0);
    }

    #[test]
    fn sample_index_covers_mass() {
        let pmf = DirectivityPmf {
            gains: [4.0, 3.0, 2.0, 1.0],
            probs: [0.25, 0.25, 0.5, 0.0],
        };
        assert_eq!(pmf.sample_index(0.1), 0);
        assert_eq!(pmf.sample_index(0.3), 1);
        assert_eq!(pmf.sample_index(0.9), 2);
        assert_eq!(pmf.sample_index(1.0), 2);
    }
}
