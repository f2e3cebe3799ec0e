//! Sweep runner behind the `mmwave-uplink` binary.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use mmwave_uplink::dense::dense_sir_outage;
use mmwave_uplink::model::units;
use mmwave_uplink::numerics::QuadSpec;
use mmwave_uplink::power::{power_moment, truncation_outage, DenseLaw, PowerDistribution};
use mmwave_uplink::scenario::{
    Engine, EngineSet, Output, Point, Scenario, SeriesSection, SweepSpec, Variable,
};
use mmwave_uplink::sim::{simulate, SimEstimate};
use mmwave_uplink::sinr::{sinr_outage, OutageResult, SinrQuery};
use mmwave_uplink::Error;
use rayon::prelude::*;

pub const HEADER: [&str; 10] = [
    "series",
    "variable",
    "engine",
    "tier",
    "sinr_outage",
    "trunc_outage",
    "total_outage",
    "mean_power_w",
    "mc_half_width",
    "seconds",
];

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numeric(String),
    Validation(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    fn from_core(e: Error, context: impl fmt::Display) -> Self {
        if e.is_config() {
            Failure::Config(format!("{context}: {e}"))
        } else {
            Failure::Numeric(format!("{context}: {e}"))
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numeric(m) => write!(f, "numeric failure: {m}"),
            Failure::Validation(m) => write!(f, "validation failed: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

pub type Outcome<T> = std::result::Result<T, Failure>;

/// One CSV row. Probabilities the sweep did not ask for are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub series: String,
    pub variable: f64,
    pub engine: Engine,
    /// 1-based.
    pub tier: usize,
    pub sinr_outage: Option<f64>,
    pub trunc_outage: Option<f64>,
    pub total_outage: Option<f64>,
    pub mean_power_w: Option<f64>,
    pub sinr_half_width: Option<f64>,
    pub trunc_half_width: Option<f64>,
    pub seconds: Option<f64>,
}

impl Row {
    /// Half-width reported in the CSV: the SINR estimate's, else the
    /// truncation estimate's.
    pub fn mc_half_width(&self) -> Option<f64> {
        self.sinr_half_width.or(self.trunc_half_width)
    }

    fn record(&self) -> [String; 10] {
        let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        [
            self.series.clone(),
            self.variable.to_string(),
            self.engine.name().to_string(),
            self.tier.to_string(),
            f(self.sinr_outage),
            f(self.trunc_outage),
            f(self.total_outage),
            f(self.mean_power_w),
            f(self.mc_half_width()),
            f(self.seconds),
        ]
    }
}

pub fn write_csv(rows: &[Row], out: impl Write) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()
}

/// Run-time options that override the scenario.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub engines: Option<EngineSet>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    /// Fill the `seconds` column; off by default so output is reproducible.
    pub timing: bool,
}

/// Pushes trial count and seed into the base section and clears them in
/// every series so the command line wins.
pub fn apply_overrides(scenario: &mut Scenario, opts: &Options) {
    if opts.trials.is_some() {
        scenario.simulation.trials = opts.trials;
        scenario.series.iter_mut().for_each(|s| s.simulation.trials = None);
    }
    if opts.seed.is_some() {
        scenario.simulation.seed = opts.seed;
        scenario.series.iter_mut().for_each(|s| s.simulation.seed = None);
    }
}

struct Job<'a> {
    series: &'a SeriesSection,
    engines: EngineSet,
    points: Vec<Point>,
}

fn label(series: &str, var: Variable, x: f64) -> String {
    format!("series '{series}' at {}={x}", var.name())
}

/// Runs every series of the scenario over the sweep grid.
pub fn run_sweep(scenario: &Scenario, opts: &Options) -> Outcome<Vec<Row>> {
    let mut scenario = scenario.clone();
    apply_overrides(&mut scenario, opts);
    let sweep = scenario.sweep().map_err(|e| Failure::from_core(e, "sweep"))?;
    let fallback = SeriesSection {
        name: "base".into(),
        ..SeriesSection::default()
    };
    let series: Vec<&SeriesSection> = if scenario.series.is_empty() {
        vec![&fallback]
    } else {
        scenario.series.iter().collect()
    };
    let mut jobs = Vec::new();
    for s in series {
        let chosen = opts
            .engines
            .clone()
            .or_else(|| s.engine.clone())
            .unwrap_or_else(|| sweep.engines.clone());
        let points = sweep
            .grid
            .iter()
            .map(|&x| {
                scenario
                    .resolve(Some(s), Some((sweep.variable, x, sweep.vary_tier)))
                    .map_err(|e| Failure::from_core(e, label(&s.name, sweep.variable, x)))
            })
            .collect::<Outcome<Vec<_>>>()?;
        let mut engines = chosen.clone();
        if points.iter().any(|p| p.dense.is_none()) {
            if chosen == EngineSet::all() {
                engines.0.retain(|&e| e != Engine::Dense);
            } else if chosen.contains(Engine::Dense) {
                return Err(Failure::Config(format!(
                    "series '{}': the dense engine needs a [dense] section",
                    s.name
                )));
            }
        }
        jobs.push(Job { series: s, engines, points });
    }

    let mut rows = Vec::new();
    for job in &jobs {
        let mut per_engine: Vec<Vec<Vec<Row>>> = Vec::new();
        for &e in &job.engines.0 {
            per_engine.push(match e {
                Engine::Simulate => simulate_job(job, &sweep, opts.timing)?,
                _ => job
                    .points
                    .par_iter()
                    .zip(&sweep.grid)
                    .map(|(p, &x)| closed_form(e, p, job.series, &sweep, x, opts.timing))
                    .collect::<Outcome<Vec<_>>>()?,
            });
        }
        for i in 0..sweep.grid.len() {
            for e in &mut per_engine {
                rows.append(&mut e[i]);
            }
        }
    }
    Ok(rows)
}

fn tiers_of(sweep: &SweepSpec, p: &Point) -> Vec<usize> {
    match sweep.tier {
        Some(j) => vec![j],
        None => (0..p.net.num_tiers()).collect(),
    }
}

fn closed_form(
    engine: Engine,
    p: &Point,
    series: &SeriesSection,
    sweep: &SweepSpec,
    x: f64,
    timing: bool,
) -> Outcome<Vec<Row>> {
    let t0 = Instant::now();
    let quad = QuadSpec::default();
    let ctx = |op: &str| format!("{} {op} at {}", engine.name(), label(&series.name, sweep.variable, x));
    let theta = units::db_to_lin(p.theta_db);
    let mut rows = Vec::new();
    for j in tiers_of(sweep, p) {
        let (sinr, trunc, power) = match engine {
            Engine::Analytic => {
                let sinr = if sweep.wants(Output::SinrOutage) || sweep.wants(Output::TotalOutage) {
                    let q = SinrQuery::new(&p.net, j, theta).map_err(|e| Failure::from_core(e, ctx("sinr_outage")))?;
                    Some(sinr_outage(&q, &p.net, &quad).map_err(|e| Failure::from_core(e, ctx("sinr_outage")))?)
                } else {
                    None
                };
                let trunc = truncation_outage(j, &p.net).map_err(|e| Failure::from_core(e, ctx("truncation_outage")))?;
                let power = if sweep.wants(Output::MeanPowerW) {
                    Some(power_moment(1.0, j, &p.net, &quad).map_err(|e| Failure::from_core(e, ctx("power_moment")))?)
                } else {
                    None
                };
                (sinr, trunc, power)
            }
            Engine::Dense => {
                let spec = p.dense.as_ref().expect("checked when the job was built");
                let sinr = if sweep.wants(Output::SinrOutage) || sweep.wants(Output::TotalOutage) {
                    let q = SinrQuery::new(&p.net, j, theta).map_err(|e| Failure::from_core(e, ctx("dense_sir_outage")))?;
                    Some(
                        dense_sir_outage(&q, spec, &p.net, &quad)
                            .map_err(|e| Failure::from_core(e, ctx("dense_sir_outage")))?,
                    )
                } else {
                    None
                };
                let law = DenseLaw::new(&p.net, j).map_err(|e| Failure::from_core(e, ctx("dense power law")))?;
                let power = if sweep.wants(Output::MeanPowerW) {
                    Some(law.moment(1.0, &quad).map_err(|e| Failure::from_core(e, ctx("dense power moment")))?)
                } else {
                    None
                };
                (sinr, law.truncation_outage(), power)
            }
            Engine::Simulate => unreachable!("simulation runs per batch"),
        };
        rows.push(assemble(series, sweep, x, engine, j, sinr, None, trunc, None, power));
    }
    if timing {
        let s = t0.elapsed().as_secs_f64();
        rows.iter_mut().for_each(|r| r.seconds = Some(s));
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    series: &SeriesSection,
    sweep: &SweepSpec,
    x: f64,
    engine: Engine,
    j: usize,
    sinr: Option<f64>,
    sinr_hw: Option<f64>,
    trunc: f64,
    trunc_hw: Option<f64>,
    power: Option<f64>,
) -> Row {
    let keep = |o: Output, v: Option<f64>| v.filter(|_| sweep.wants(o));
    let total = sinr.map(|s| OutageResult::combine(s, trunc).total_outage);
    Row {
        series: series.name.clone(),
        variable: x,
        engine,
        tier: j + 1,
        sinr_outage: keep(Output::SinrOutage, sinr),
        trunc_outage: keep(Output::TruncOutage, Some(trunc)),
        total_outage: keep(Output::TotalOutage, total),
        mean_power_w: keep(Output::MeanPowerW, power),
        sinr_half_width: keep(Output::SinrOutage, sinr_hw),
        trunc_half_width: keep(Output::TruncOutage, trunc_hw),
        seconds: None,
    }
}

// Grid points that differ only in cutoff, power cap or threshold share one
// set of geometries; other variables need one run per point.
fn simulate_job(job: &Job, sweep: &SweepSpec, timing: bool) -> Outcome<Vec<Vec<Row>>> {
    let n = sweep.grid.len();
    let batches: Vec<Vec<usize>> = match sweep.variable {
        Variable::RhoODbm | Variable::PuDbm | Variable::ThetaDb => vec![(0..n).collect()],
        Variable::LambdaBsPerKm2 | Variable::BetaPerM => (0..n).map(|i| vec![i]).collect(),
    };
    let mut out = vec![Vec::new(); n];
    for idx in batches {
        let t0 = Instant::now();
        let first = &job.points[idx[0]];
        let (nets, thresholds) = if sweep.variable == Variable::ThetaDb {
            let th = idx.iter().map(|&i| units::db_to_lin(job.points[i].theta_db)).collect();
            (vec![first.net.clone()], th)
        } else {
            let nets = idx.iter().map(|&i| job.points[i].net.clone()).collect();
            (nets, vec![units::db_to_lin(first.theta_db)])
        };
        let ctx = format!(
            "simulate for series '{}' at {}={:?}",
            job.series.name,
            sweep.variable.name(),
            idx.iter().map(|&i| sweep.grid[i]).collect::<Vec<_>>()
        );
        let levels = simulate(&nets, &thresholds, &first.sim).map_err(|e| Failure::from_core(e, &ctx))?;
        let secs = t0.elapsed().as_secs_f64() / idx.len() as f64;
        for (slot, &i) in idx.iter().enumerate() {
            let (lv, th) = if sweep.variable == Variable::ThetaDb { (0, slot) } else { (slot, 0) };
            let x = sweep.grid[i];
            for j in tiers_of(sweep, &job.points[i]) {
                let est = &levels[lv].tiers[j];
                let missing = |what: &str| {
                    Failure::Numeric(format!(
                        "simulate at {}: no tier-{} {what}",
                        label(&job.series.name, sweep.variable, x),
                        j + 1
                    ))
                };
                let trunc: SimEstimate = est.truncation.ok_or_else(|| missing("users associated"))?;
                let sinr = if sweep.wants(Output::SinrOutage) || sweep.wants(Output::TotalOutage) {
                    let v = est.sinr_outage.as_ref().ok_or_else(|| missing("reference BS with an active user"))?;
                    Some(v[th])
                } else {
                    None
                };
                let power = if sweep.wants(Output::MeanPowerW) {
                    Some(est.mean_power.ok_or_else(|| missing("active users"))?.value)
                } else {
                    None
                };
                let mut row = assemble(
                    job.series,
                    sweep,
                    x,
                    Engine::Simulate,
                    j,
                    sinr.map(|s| s.value),
                    sinr.map(|s| s.half_width_95),
                    trunc.value,
                    Some(trunc.half_width_95),
                    power,
                );
                if timing {
                    row.seconds = Some(secs);
                }
                out[i].push(row);
            }
        }
    }
    Ok(out)
}

/// Largest analytic-vs-simulation gap in excess of the allowance.
#[derive(Debug, Clone, PartialEq)]
pub struct Worst {
    pub series: String,
    pub variable: f64,
    pub tier: usize,
    pub quantity: &'static str,
    pub analytic: f64,
    pub simulated: f64,
    pub half_width: f64,
    /// |gap| − (tolerance + half-width); positive means failure.
    pub excess: f64,
}

pub struct Report {
    pub compared: usize,
    pub worst: Option<Worst>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.worst.as_ref().is_none_or(|w| w.excess <= 0.0)
    }
}

/// Compares analytic and simulated rows point by point: fails where
/// |gap| > tolerance + MC half-width.
pub fn compare(rows: &[Row], tolerance: f64) -> Report {
    let mut compared = 0;
    let mut worst: Option<Worst> = None;
    for a in rows.iter().filter(|r| r.engine == Engine::Analytic) {
        let Some(s) = rows.iter().find(|r| {
            r.engine == Engine::Simulate && r.series == a.series && r.variable == a.variable && r.tier == a.tier
        }) else {
            continue;
        };
        let pairs = [
            ("sinr_outage", a.sinr_outage, s.sinr_outage, s.sinr_half_width),
            ("trunc_outage", a.trunc_outage, s.trunc_outage, s.trunc_half_width),
        ];
        for (quantity, av, sv, hw) in pairs {
            let (Some(av), Some(sv)) = (av, sv) else { continue };
            let hw = hw.unwrap_or(0.0);
            compared += 1;
            let excess = (av - sv).abs() - (tolerance + hw);
            if worst.as_ref().is_none_or(|w| excess > w.excess) {
                worst = Some(Worst {
                    series: a.series.clone(),
                    variable: a.variable,
                    tier: a.tier,
                    quantity,
                    analytic: av,
                    simulated: sv,
                    half_width: hw,
                    excess,
                });
            }
        }
    }
    Report { compared, worst }
}
