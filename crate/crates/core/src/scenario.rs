//! Scenario files in external units (dBm, dB, BS/km², degrees) and the
//! embedded figure presets.
//!
//! ```toml
//! [network]
//! pu_dbm = 30.0
//! noise_dbm = -110.0
//!
//! [tier.1]
//! lambda_bs_per_km2 = 10.0
//! beta_per_m = 0.0071
//! rho_o_dbm = -60.0
//! alpha_los = 2.0
//! alpha_nlos = 4.0
//!
//! [sweep]
//! variable = "rho_o_dbm"
//! range = { start = -100.0, stop = 0.0, points = 12 }
//!
//! [[series]]
//! name = "theta=25"
//! theta_db = 25.0
//! ```
//!
//! Every key of `[network]`, `[user]`, `[tier.K]`, `[simulation]` and
//! `[dense]` may be repeated inside a `[[series]]` entry to override it for
//! that series only. Tiers are numbered from 1.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Deserialize;

use crate::dense::DenseSpec;
use crate::error::{Error, Result};
use crate::model::{units, NetworkConfig, TierParams, UserAntennaParams};
use crate::sim::SimConfig;

macro_rules! overlay {
    ($ty:ident { $($f:ident),* $(,)? }) => {
        impl $ty {
            /// Fields set in `other` replace ours.
            pub fn overlay(&mut self, other: &$ty) {
                $(if other.$f.is_some() { self.$f = other.$f.clone(); })*
            }
        }
    };
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub pu_dbm: Option<f64>,
    pub noise_dbm: Option<f64>,
    pub nakagami_n: Option<u32>,
    pub lambda_user_per_km2: Option<f64>,
}
overlay!(NetworkSection { pu_dbm, noise_dbm, nakagami_n, lambda_user_per_km2 });

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierSection {
    pub lambda_bs_per_km2: Option<f64>,
    pub beta_per_m: Option<f64>,
    pub rho_o_dbm: Option<f64>,
    pub rho_min_dbm: Option<f64>,
    pub gb_max_db: Option<f64>,
    pub gb_min_db: Option<f64>,
    pub zeta_r_deg: Option<f64>,
    pub alpha_los: Option<f64>,
    pub alpha_nlos: Option<f64>,
}
overlay!(TierSection {
    lambda_bs_per_km2,
    beta_per_m,
    rho_o_dbm,
    rho_min_dbm,
    gb_max_db,
    gb_min_db,
    zeta_r_deg,
    alpha_los,
    alpha_nlos,
});

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSection {
    pub gu_max_db: Option<f64>,
    pub gu_min_db: Option<f64>,
    pub zeta_t_deg: Option<f64>,
}
overlay!(UserSection { gu_max_db, gu_min_db, zeta_t_deg });

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub window_radius_m: Option<f64>,
    pub guard_radius_m: Option<f64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub users_per_cell: Option<f64>,
    pub antithetic: Option<bool>,
}
overlay!(SimulationSection {
    window_radius_m,
    guard_radius_m,
    trials,
    seed,
    users_per_cell,
    antithetic,
});

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseSection {
    /// R_B in meters.
    pub los_radius_m: Option<f64>,
    /// L.
    pub terms: Option<u32>,
}
overlay!(DenseSection { los_radius_m, terms });

/// Quantity swept along the x axis of a figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    RhoODbm,
    ThetaDb,
    LambdaBsPerKm2,
    BetaPerM,
    PuDbm,
}

impl Variable {
    pub fn name(self) -> &'static str {
        match self {
            Variable::RhoODbm => "rho_o_dbm",
            Variable::ThetaDb => "theta_db",
            Variable::LambdaBsPerKm2 => "lambda_bs_per_km2",
            Variable::BetaPerM => "beta_per_m",
            Variable::PuDbm => "pu_dbm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Engine {
    Analytic,
    Simulate,
    Dense,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::Simulate => "simulate",
            Engine::Dense => "dense",
        }
    }
}

/// `all` or a comma-separated list of engines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineSet(pub Vec<Engine>);

impl EngineSet {
    pub fn all() -> Self {
        EngineSet(vec![Engine::Analytic, Engine::Simulate, Engine::Dense])
    }

    pub fn contains(&self, e: Engine) -> bool {
        self.0.contains(&e)
    }
}

impl FromStr for EngineSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim) {
            match part {
                "all" => return Ok(EngineSet::all()),
                "analytic" => out.push(Engine::Analytic),
                "simulate" => out.push(Engine::Simulate),
                "dense" => out.push(Engine::Dense),
                other => {
                    return Err(Error::config("sweep.engine", format!("unknown engine '{other}'")));
                }
            }
        }
        out.sort();
        out.dedup();
        Ok(EngineSet(out))
    }
}

impl fmt::Display for EngineSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.0.iter().map(|e| e.name()).collect();
        f.write_str(&names.join(","))
    }
}

impl<'de> Deserialize<'de> for EngineSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    SinrOutage,
    TruncOutage,
    TotalOutage,
    MeanPowerW,
}

pub const ALL_OUTPUTS: [Output; 4] = [
    Output::SinrOutage,
    Output::TruncOutage,
    Output::TotalOutage,
    Output::MeanPowerW,
];

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub variable: Option<Variable>,
    pub values: Option<Vec<f64>>,
    pub range: Option<Range>,
    pub engine: Option<EngineSet>,
    /// Tier whose rows are reported (1-based); all tiers when absent.
    pub tier: Option<usize>,
    /// Tier the swept parameter is applied to; all tiers when absent.
    pub vary_tier: Option<usize>,
    pub theta_db: Option<f64>,
    pub outputs: Option<Vec<Output>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSection {
    pub name: String,
    pub theta_db: Option<f64>,
    pub engine: Option<EngineSet>,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub user: UserSection,
    #[serde(default)]
    pub tier: BTreeMap<String, TierSection>,
    #[serde(default)]
    pub simulation: SimulationSection,
    pub dense: Option<DenseSection>,
}

/// A parsed scenario file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub user: UserSection,
    #[serde(default)]
    pub tier: BTreeMap<String, TierSection>,
    #[serde(default)]
    pub simulation: SimulationSection,
    pub dense: Option<DenseSection>,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub series: Vec<SeriesSection>,
}

/// Sweep after defaults and validation.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: Variable,
    pub grid: Vec<f64>,
    pub engines: EngineSet,
    /// 0-based.
    pub tier: Option<usize>,
    /// 0-based.
    pub vary_tier: Option<usize>,
    pub theta_db: f64,
    pub outputs: Vec<Output>,
}

/// Everything an engine needs for one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub net: NetworkConfig,
    pub sim: SimConfig,
    pub dense: Option<DenseSpec>,
    pub theta_db: f64,
}

pub const DEFAULT_THETA_DB: f64 = 20.0;

const PRESETS: [(&str, &str); 9] = [
    ("fig1", include_str!("../presets/fig1.toml")),
    ("fig2", include_str!("../presets/fig2.toml")),
    ("fig3", include_str!("../presets/fig3.toml")),
    ("fig4", include_str!("../presets/fig4.toml")),
    ("fig5", include_str!("../presets/fig5.toml")),
    ("fig6", include_str!("../presets/fig6.toml")),
    ("fig7", include_str!("../presets/fig7.toml")),
    ("fig8", include_str!("../presets/fig8.toml")),
    ("fig9", include_str!("../presets/fig9.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

/// Source text of an embedded preset.
pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn preset(name: &str) -> Result<Scenario> {
    let src = preset_source(name)
        .ok_or_else(|| Error::config("figure", format!("unknown preset '{name}'")))?;
    Scenario::parse(src)
}

fn tier_key(key: &str, ctx: &str) -> Result<usize> {
    match key.parse::<usize>() {
        Ok(k) if k >= 1 => Ok(k),
        _ => Err(Error::config(ctx, format!("tier key '{key}' is not a positive integer"))),
    }
}

// Internal field names to the external keys that feed them.
fn external_field(internal: &str) -> String {
    const MAP: [(&str, &str); 15] = [
        ("density", "lambda_bs_per_km2"),
        ("blockage", "beta_per_m"),
        ("cutoff", "rho_o_dbm"),
        ("receiver_sensitivity", "rho_min_dbm"),
        ("bs_main_gain", "gb_max_db"),
        ("bs_side_gain", "gb_min_db"),
        ("bs_beamwidth", "zeta_r_deg"),
        ("alpha_los", "alpha_los"),
        ("alpha_nlos", "alpha_nlos"),
        ("user.main_gain", "user.gu_max_db"),
        ("user.side_gain", "user.gu_min_db"),
        ("user.beamwidth", "user.zeta_t_deg"),
        ("network.max_power", "network.pu_dbm"),
        ("network.noise_power", "network.noise_dbm"),
        ("network.user_density", "network.lambda_user_per_km2"),
    ];
    for (from, to) in MAP {
        if internal == from {
            return to.to_string();
        }
        if let Some(head) = internal.strip_suffix(from) {
            if head.ends_with('.') {
                return format!("{head}{to}");
            }
        }
    }
    if internal == "network.nakagami" {
        return "network.nakagami_n".into();
    }
    internal.to_string()
}

fn rename(e: Error) -> Error {
    match e {
        Error::Config { field, reason } => Error::Config {
            field: external_field(&field),
            reason,
        },
        other => other,
    }
}

fn need(v: Option<f64>, field: String) -> Result<f64> {
    v.ok_or_else(|| Error::config(field, "missing"))
}

impl TierSection {
    /// Converts to SI units. `k` is the 1-based tier label used in errors.
    pub fn to_params(&self, k: usize) -> Result<TierParams> {
        let f = |n: &str| format!("tier.{k}.{n}");
        let t = TierParams {
            density: units::per_km2_to_per_m2(need(self.lambda_bs_per_km2, f("lambda_bs_per_km2"))?),
            blockage: need(self.beta_per_m, f("beta_per_m"))?,
            cutoff: units::dbm_to_w(need(self.rho_o_dbm, f("rho_o_dbm"))?),
            receiver_sensitivity: units::dbm_to_w(self.rho_min_dbm.unwrap_or(-120.0)),
            bs_main_gain: units::db_to_lin(self.gb_max_db.unwrap_or(7.0)),
            bs_side_gain: units::db_to_lin(self.gb_min_db.unwrap_or(-10.0)),
            bs_beamwidth: units::deg_to_rad(self.zeta_r_deg.unwrap_or(30.0)),
            alpha_los: need(self.alpha_los, f("alpha_los"))?,
            alpha_nlos: need(self.alpha_nlos, f("alpha_nlos"))?,
        };
        t.validate(k).map_err(rename)?;
        Ok(t)
    }

    pub fn from_params(t: &TierParams) -> Self {
        TierSection {
            lambda_bs_per_km2: Some(units::per_m2_to_per_km2(t.density)),
            beta_per_m: Some(t.blockage),
            rho_o_dbm: Some(units::w_to_dbm(t.cutoff)),
            rho_min_dbm: Some(units::w_to_dbm(t.receiver_sensitivity)),
            gb_max_db: Some(units::lin_to_db(t.bs_main_gain)),
            gb_min_db: Some(units::lin_to_db(t.bs_side_gain)),
            zeta_r_deg: Some(units::rad_to_deg(t.bs_beamwidth)),
            alpha_los: Some(t.alpha_los),
            alpha_nlos: Some(t.alpha_nlos),
        }
    }
}

impl UserSection {
    pub fn to_params(&self) -> Result<UserAntennaParams> {
        let u = UserAntennaParams {
            main_gain: units::db_to_lin(self.gu_max_db.unwrap_or(7.0)),
            side_gain: units::db_to_lin(self.gu_min_db.unwrap_or(-10.0)),
            beamwidth: units::deg_to_rad(self.zeta_t_deg.unwrap_or(90.0)),
        };
        u.validate().map_err(rename)?;
        Ok(u)
    }

    pub fn from_params(u: &UserAntennaParams) -> Self {
        UserSection {
            gu_max_db: Some(units::lin_to_db(u.main_gain)),
            gu_min_db: Some(units::lin_to_db(u.side_gain)),
            zeta_t_deg: Some(units::rad_to_deg(u.beamwidth)),
        }
    }
}

impl SimulationSection {
    pub fn to_config(&self) -> Result<SimConfig> {
        let d = SimConfig::default();
        let s = SimConfig {
            window_radius: self.window_radius_m.unwrap_or(d.window_radius),
            guard_radius: self.guard_radius_m.unwrap_or(d.guard_radius),
            trials: self.trials.unwrap_or(d.trials),
            base_seed: self.seed.unwrap_or(d.base_seed),
            antithetic: self.antithetic.unwrap_or(d.antithetic),
            users_per_cell: self.users_per_cell.unwrap_or(d.users_per_cell),
        };
        s.validate()?;
        Ok(s)
    }
}

impl Scenario {
    pub fn parse(src: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(src).map_err(|e| Error::config("scenario", e.message()))?;
        s.check_keys()?;
        Ok(s)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| Error::config("scenario", format!("{}: {e}", path.display())))?;
        Self::parse(&src)
    }

    /// The external record of a network, with default simulation settings.
    pub fn from_network(net: &NetworkConfig) -> Self {
        let tier = net
            .tiers()
            .iter()
            .enumerate()
            .map(|(i, t)| ((i + 1).to_string(), TierSection::from_params(t)))
            .collect();
        Scenario {
            network: NetworkSection {
                pu_dbm: Some(units::w_to_dbm(net.max_power())),
                noise_dbm: Some(if net.noise_power() > 0.0 {
                    units::w_to_dbm(net.noise_power())
                } else {
                    f64::NEG_INFINITY
                }),
                nakagami_n: Some(net.nakagami()),
                lambda_user_per_km2: Some(units::per_m2_to_per_km2(net.user_density())),
            },
            user: UserSection::from_params(net.user_antenna()),
            tier,
            ..Scenario::default()
        }
    }

    fn check_keys(&self) -> Result<()> {
        let n = self.tier.len();
        for key in self.tier.keys() {
            let k = tier_key(key, "tier")?;
            if k > n {
                return Err(Error::config(
                    format!("tier.{key}"),
                    format!("tiers must be numbered 1..={n} without gaps"),
                ));
            }
        }
        for s in &self.series {
            for key in s.tier.keys() {
                let k = tier_key(key, "series.tier")?;
                if k > n {
                    return Err(Error::config(
                        format!("series.{}.tier.{key}", s.name),
                        "no such tier in the scenario",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn num_tiers(&self) -> usize {
        self.tier.len()
    }

    fn tiers_sorted(&self) -> Vec<TierSection> {
        let mut v: Vec<(usize, TierSection)> = self
            .tier
            .iter()
            .map(|(k, t)| (k.parse().unwrap_or(usize::MAX), t.clone()))
            .collect();
        v.sort_by_key(|(k, _)| *k);
        v.into_iter().map(|(_, t)| t).collect()
    }

    /// The network described by the base sections.
    pub fn network(&self) -> Result<NetworkConfig> {
        Ok(self.resolve(None, None)?.net)
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        self.simulation.to_config()
    }

    /// The sweep with defaults filled in: θ = 20 dB, all engines, all outputs.
    pub fn sweep(&self) -> Result<SweepSpec> {
        let s = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::config("sweep", "scenario has no [sweep] section"))?;
        let variable = s
            .variable
            .ok_or_else(|| Error::config("sweep.variable", "missing"))?;
        let grid = match (&s.values, &s.range) {
            (Some(v), None) => v.clone(),
            (None, Some(r)) => match r.points {
                0 => Vec::new(),
                1 => vec![r.start],
                n => (0..n)
                    .map(|i| r.start + (r.stop - r.start) * i as f64 / (n - 1) as f64)
                    .collect(),
            },
            _ => {
                return Err(Error::config("sweep", "give exactly one of 'values' and 'range'"));
            }
        };
        let k = self.num_tiers();
        let tier_index = |t: Option<usize>, field: &str| -> Result<Option<usize>> {
            match t {
                None => Ok(None),
                Some(t) if t >= 1 && t <= k => Ok(Some(t - 1)),
                Some(t) => Err(Error::config(field, format!("tier {t} does not exist"))),
            }
        };
        let spec = SweepSpec {
            variable,
            grid,
            engines: s.engine.clone().unwrap_or_else(EngineSet::all),
            tier: tier_index(s.tier, "sweep.tier")?,
            vary_tier: tier_index(s.vary_tier, "sweep.vary_tier")?,
            theta_db: s.theta_db.unwrap_or(DEFAULT_THETA_DB),
            outputs: s.outputs.clone().unwrap_or_else(|| ALL_OUTPUTS.to_vec()),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Applies an optional series and an optional swept value, then converts.
    pub fn resolve(
        &self,
        series: Option<&SeriesSection>,
        value: Option<(Variable, f64, Option<usize>)>,
    ) -> Result<Point> {
        let mut network = self.network.clone();
        let mut user = self.user.clone();
        let mut tiers = self.tiers_sorted();
        let mut simulation = self.simulation.clone();
        let mut dense = self.dense.clone();
        let mut theta_db = self
            .sweep
            .as_ref()
            .and_then(|s| s.theta_db)
            .unwrap_or(DEFAULT_THETA_DB);
        if let Some(s) = series {
            network.overlay(&s.network);
            user.overlay(&s.user);
            for (key, t) in &s.tier {
                let k = tier_key(key, "series.tier")?;
                tiers[k - 1].overlay(t);
            }
            simulation.overlay(&s.simulation);
            if let Some(d) = &s.dense {
                dense.get_or_insert_with(DenseSection::default).overlay(d);
            }
            if let Some(t) = s.theta_db {
                theta_db = t;
            }
        }
        if let Some((var, x, vary)) = value {
            let targets: Vec<usize> = match vary {
                Some(j) => vec![j],
                None => (0..tiers.len()).collect(),
            };
            match var {
                Variable::ThetaDb => theta_db = x,
                Variable::PuDbm => network.pu_dbm = Some(x),
                Variable::RhoODbm => targets.iter().for_each(|&j| tiers[j].rho_o_dbm = Some(x)),
                Variable::LambdaBsPerKm2 => {
                    targets.iter().for_each(|&j| tiers[j].lambda_bs_per_km2 = Some(x))
                }
                Variable::BetaPerM => targets.iter().for_each(|&j| tiers[j].beta_per_m = Some(x)),
            }
        }
        let params = tiers
            .iter()
            .enumerate()
            .map(|(i, t)| t.to_params(i + 1))
            .collect::<Result<Vec<_>>>()?;
        let nakagami = network.nakagami_n.unwrap_or(3);
        let noise_dbm = network.noise_dbm.unwrap_or(-110.0);
        let net = NetworkConfig::new(
            params,
            user.to_params()?,
            units::dbm_to_w(network.pu_dbm.unwrap_or(30.0)),
            units::dbm_to_w(noise_dbm),
            nakagami,
            units::per_km2_to_per_m2(network.lambda_user_per_km2.unwrap_or(100.0)),
        )
        .map_err(rename)?;
        let dense = match dense {
            Some(d) => {
                let r = d
                    .los_radius_m
                    .ok_or_else(|| Error::config("dense.los_radius_m", "missing"))?;
                Some(DenseSpec::for_network(&net, r, d.terms.unwrap_or(10))?)
            }
            None => None,
        };
        if !theta_db.is_finite() {
            return Err(Error::config("theta_db", "must be finite"));
        }
        Ok(Point {
            net,
            sim: simulation.to_config()?,
            dense,
            theta_db,
        })
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::config("sweep.grid", "grid is empty"));
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("sweep.grid", "values must be finite"));
        }
        let up = self.grid.windows(2).all(|w| w[1] > w[0]);
        let down = self.grid.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(Error::config("sweep.grid", "values must be strictly monotone"));
        }
        if self.engines.0.is_empty() {
            return Err(Error::config("sweep.engine", "no engine selected"));
        }
        if self.outputs.is_empty() {
            return Err(Error::config("sweep.outputs", "no output selected"));
        }
        Ok(())
    }

    pub fn wants(&self, o: Output) -> bool {
        self.outputs.contains(&o)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_names_map_to_external_keys() {
        assert_eq!(external_field("tier.2.cutoff"), "tier.2.rho_o_dbm");
        assert_eq!(external_field("user.beamwidth"), "user.zeta_t_deg");
        assert_eq!(external_field("network.nakagami"), "network.nakagami_n");
        assert_eq!(external_field("sweep.grid"), "sweep.grid");
    }
}
