//! Monte-Carlo simulator of the uplink system model.
//!
//! Users are modelled in the dense-population limit the analytics assume:
//! each BS with at least one eligible user schedules a uniformly chosen one.
//! To keep that true at high cutoffs, where only users within a few metres
//! of a BS can invert their path loss, extra user layers of doubling density
//! are placed in discs around the BSs within `guard_radius` of a reference
//! BS (see [`SimConfig::users_per_cell`]). Farther cells schedule from the
//! base users only; interference is summed over every BS in the window.

mod geometry;
mod stream;
mod world;

use std::f64::consts::PI;
use std::io::{self, Write};

use rayon::prelude::*;

pub use geometry::sample_ppp;

use crate::error::{Error, Result};
use crate::model::{directivity_pmf, eta, NetworkConfig, TierParams};
use crate::power::intensity_measure;
use crate::numerics::{integrate_with_breakpoints, QuadSpec};
use crate::sinr::SinrQuery;
use world::{LayerSpec, LevelSpec, Plan, TierGeo, TierTrial, World};

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub window_radius: f64,
    /// Reference BSs are taken within `window_radius − guard_radius`; cells
    /// within `guard_radius` of a reference get the extra user layers.
    pub guard_radius: f64,
    pub trials: u64,
    pub base_seed: u64,
    /// Pairs trials (2m, 2m+1) on one geometry with complementary fading.
    pub antithetic: bool,
    /// Target mean number of eligible users per BS when raising the user
    /// density above `NetworkConfig::user_density`.
    pub users_per_cell: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            window_radius: 3000.0,
            guard_radius: 1000.0,
            trials: 30_000,
            base_seed: 1,
            antithetic: false,
            users_per_cell: 10.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.guard_radius >= 0.0 && self.window_radius > self.guard_radius)
            || !self.window_radius.is_finite()
        {
            return Err(Error::config(
                "simulation.window_radius",
                "need window_radius > guard_radius >= 0",
            ));
        }
        if self.trials < 1 {
            return Err(Error::config("simulation.trials", "must be >= 1"));
        }
        if !(self.users_per_cell >= 1.0 && self.users_per_cell.is_finite()) {
            return Err(Error::config("simulation.users_per_cell", "must be >= 1"));
        }
        Ok(())
    }
}

/// Monte-Carlo estimate with a 95% normal-approximation half width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEstimate {
    pub value: f64,
    pub half_width_95: f64,
    pub trials_used: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TierEstimates {
    /// Per threshold; interferer gains from beam geometry.
    pub sinr_outage: Option<Vec<SimEstimate>>,
    /// Per threshold; interferer gains drawn from the directivity PMF.
    pub sinr_outage_table: Option<Vec<SimEstimate>>,
    /// Per threshold, E[e^{−s n I}] for n = 1..N with s = ηθ/(ρ_o 𝒢).
    pub laplace: Option<Vec<Vec<f64>>>,
    pub truncation: Option<SimEstimate>,
    pub mean_power: Option<SimEstimate>,
    /// Trials skipped because the reference BS had no eligible user.
    pub discarded: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelEstimates {
    pub tiers: Vec<TierEstimates>,
}

#[derive(Default, Clone)]
struct Ratio {
    n: u64,
    sx: f64,
    sy: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl Ratio {
    fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.syy += y * y;
        self.sxy += x * y;
    }

    // ratio of sums, delta-method variance over trials
    fn estimate(&self) -> Option<SimEstimate> {
        if self.sx <= 0.0 {
            return None;
        }
        let n = self.n as f64;
        let r = self.sy / self.sx;
        let xbar = self.sx / n;
        let var_d = (self.syy - 2.0 * r * self.sxy + r * r * self.sxx) / n;
        let hw = if self.n > 1 {
            1.96 * (var_d.max(0.0) / (n - 1.0)).sqrt() / xbar
        } else {
            f64::INFINITY
        };
        Some(SimEstimate {
            value: r,
            half_width_95: hw,
            trials_used: self.n,
        })
    }
}

#[derive(Clone)]
struct Accum {
    used: u64,
    geo: Vec<u64>,
    table: Vec<u64>,
    laplace: Vec<f64>,
    trunc: Ratio,
    power: Ratio,
    discarded: u64,
}

fn bernoulli(count: u64, n: u64) -> SimEstimate {
    let p = count as f64 / n as f64;
    SimEstimate {
        value: p,
        half_width_95: 1.96 * (p * (1.0 - p) / n as f64).sqrt(),
        trials_used: n,
    }
}

const LOS_CLIP: f64 = 6.0;

// Distances beyond which a tier-k LOS or NLOS link can carry an eligible
// user: the limit itself, cut at e^{−6} LOS probability and, for NLOS, where
// the chance that no BS beats the link falls below e^{−20}.
fn reach(tiers: &[TierParams], k: usize, limit: f64) -> (f64, f64) {
    let t = &tiers[k];
    let m = |r: f64| -> f64 {
        let y = r.powf(t.alpha_nlos);
        tiers.iter().map(|s| intensity_measure(y, s).unwrap_or(f64::INFINITY)).sum()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while m(hi) < 20.0 && hi < 1e9 {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if m(mid) < 20.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (
        limit.powf(1.0 / t.alpha_los).min(LOS_CLIP / t.blockage),
        limit.powf(1.0 / t.alpha_nlos).min(hi),
    )
}

// Mean eligible area of a tier-k cell at path-loss limit T: the area where a
// user would pick this BS with loss ≤ T, from the typical-user association law.
fn eligible_area(tiers: &[TierParams], k: usize, limit: f64) -> Result<f64> {
    let t = &tiers[k];
    let win = |y: f64| -> f64 {
        let m: f64 = tiers.iter().map(|s| intensity_measure(y, s).unwrap_or(f64::INFINITY)).sum();
        (-m).exp()
    };
    let (rl, rn) = reach(tiers, k, limit);
    let f = |r: f64| {
        let p = (-t.blockage * r).exp();
        let mut q = 0.0;
        if r <= rl {
            q += p * win(r.powf(t.alpha_los));
        }
        if r <= rn {
            q += (1.0 - p) * win(r.powf(t.alpha_nlos));
        }
        q * 2.0 * PI * r
    };
    let top = rl.max(rn);
    let mut pts = [rl, rn];
    pts.sort_by(f64::total_cmp);
    let spec = QuadSpec {
        rel_tol: 1e-6,
        ..QuadSpec::default()
    };
    Ok(integrate_with_breakpoints(f, 0.0, top, &pts, &spec)?.value)
}

fn same_geometry(a: &NetworkConfig, b: &NetworkConfig) -> bool {
    a.num_tiers() == b.num_tiers()
        && a.user_antenna() == b.user_antenna()
        && a.nakagami() == b.nakagami()
        && a.user_density() == b.user_density()
        && a.tiers().iter().zip(b.tiers()).all(|(s, t)| {
            let mut s = s.clone();
            s.cutoff = t.cutoff;
            s.receiver_sensitivity = t.receiver_sensitivity;
            &s == t
        })
}

impl Plan {
    fn new(nets: &[NetworkConfig], thresholds: &[f64], sim: &SimConfig) -> Result<Plan> {
        sim.validate()?;
        let net = nets
            .first()
            .ok_or_else(|| Error::argument("simulate", "no network given"))?;
        if nets.iter().any(|n| !same_geometry(net, n)) {
            return Err(Error::argument(
                "simulate",
                "networks in one batch may differ only in cutoffs, power cap and noise",
            ));
        }
        if thresholds.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::argument("simulate", "thresholds must be positive"));
        }
        let ua = net.user_antenna();
        let tiers: Vec<TierGeo> = net
            .tiers()
            .iter()
            .enumerate()
            .map(|(j, t)| TierGeo {
                density: t.density,
                blockage: t.blockage,
                alpha_los: t.alpha_los,
                alpha_nlos: t.alpha_nlos,
                main_gain: t.bs_main_gain,
                side_gain: t.bs_side_gain,
                half_beam: t.bs_beamwidth / 2.0,
                pmf: directivity_pmf(t, ua),
                serving_gain: net.serving_gain(j).expect("tier exists"),
                near: (4.0 / t.blockage).min(sim.window_radius),
            })
            .collect();
        let lambda_all: f64 = tiers.iter().map(|t| t.density).sum();
        let base = net.user_density().max(sim.users_per_cell * lambda_all);
        if tiers.len() > world::MAX_TIERS {
            return Err(Error::argument("simulate", format!("at most {} tiers", world::MAX_TIERS)));
        }
        let mut levels = Vec::with_capacity(nets.len());
        for n in nets {
            let cutoff: Vec<f64> = n.tiers().iter().map(|t| t.cutoff).collect();
            let limit: Vec<f64> = cutoff.iter().map(|c| n.max_power() / c).collect();
            let mut area = f64::INFINITY;
            for (k, &l) in limit.iter().enumerate() {
                area = area.min(eligible_area(n.tiers(), k, l)?);
            }
            let want = sim.users_per_cell / area.max(1e-300);
            // slack so quadrature noise at want ≈ base does not add a layer
            let layer = if want > 1.1 * base {
                ((want / base).log2() - 0.1).ceil().clamp(1.0, 48.0) as usize
            } else {
                0
            };
            levels.push(LevelSpec {
                cutoff,
                limit,
                noise: n.noise_power(),
                layer,
            });
        }
        let top = levels.iter().map(|l| l.layer).max().unwrap_or(0);
        let mut layers = vec![LayerSpec {
            density: base,
            radius: vec![0.0; tiers.len()],
            bound: f64::INFINITY,
            full: true,
        }];
        for i in 1..=top {
            let mut radius = vec![0.0f64; tiers.len()];
            let mut bound = 0.0f64;
            for lv in levels.iter().filter(|l| l.layer >= i) {
                for k in 0..tiers.len() {
                    let l = lv.limit[k];
                    let (rl, rn) = reach(net.tiers(), k, l);
                    radius[k] = radius[k].max(rl.max(rn));
                    bound = bound.max(l);
                }
            }
            // expected number of discs covering a point; above one, a window
            // PPP thinned to the union is cheaper than per-disc generation
            let cover: f64 = tiers.iter().zip(&radius).map(|(t, r)| t.density * PI * r * r).sum();
            let full = cover >= 1.0;
            layers.push(LayerSpec {
                density: base * 2f64.powi(i as i32 - 1),
                radius,
                bound,
                full,
            });
        }
        Ok(Plan {
            tiers,
            user_main: ua.main_gain,
            user_side: ua.side_gain,
            user_half_beam: ua.beamwidth / 2.0,
            nakagami: net.nakagami(),
            eta: eta(net.nakagami()),
            window: sim.window_radius,
            interior: sim.window_radius - sim.guard_radius,
            guard: sim.guard_radius,
            layers,
            levels,
            thresholds: thresholds.to_vec(),
            seed: sim.base_seed,
            antithetic: sim.antithetic,
        })
    }
}

const BATCH: u64 = 64;

/// Runs one batch of networks that share geometry on common random numbers.
///
/// Truncation and mean-power statistics come from trials `0..trials`; each
/// SINR estimate uses the first `trials` trials whose reference BS has an
/// eligible user. Results do not depend on the rayon schedule.
pub fn simulate(nets: &[NetworkConfig], thresholds: &[f64], sim: &SimConfig) -> Result<Vec<LevelEstimates>> {
    let plan = Plan::new(nets, thresholds, sim)?;
    run(&plan, sim.trials, !thresholds.is_empty())
}

fn run(plan: &Plan, trials: u64, sinr: bool) -> Result<Vec<LevelEstimates>> {
    let k = plan.tiers.len();
    let nth = plan.thresholds.len();
    let nl = nth * plan.nakagami as usize;
    let fresh = Accum {
        used: 0,
        geo: vec![0; nth],
        table: vec![0; nth],
        laplace: vec![0.0; nl],
        trunc: Ratio::default(),
        power: Ratio::default(),
        discarded: 0,
    };
    let mut acc = vec![vec![fresh; k]; plan.levels.len()];
    let cap = trials.saturating_mul(4).saturating_add(64);
    let mut next = 0u64;
    loop {
        let pending = sinr && acc.iter().flatten().any(|a| a.used < trials);
        if next >= cap || (next >= trials && !pending) {
            break;
        }
        let end = if next < trials { (next + BATCH).min(trials) } else { next + BATCH };
        let outs: Vec<Vec<Vec<TierTrial>>> = (next..end)
            .into_par_iter()
            .map(|t| World::build(plan, t).evaluate(plan))
            .collect();
        for (t, out) in (next..end).zip(outs) {
            for (lv, tiers) in acc.iter_mut().zip(out) {
                for (a, tt) in lv.iter_mut().zip(tiers) {
                    if t < trials {
                        a.trunc.push(tt.associated as f64, tt.truncated as f64);
                        a.power.push(tt.active as f64, tt.power_sum);
                    }
                    if !sinr || a.used >= trials {
                        continue;
                    }
                    match tt.sinr {
                        Some(s) => {
                            a.used += 1;
                            for i in 0..nth {
                                a.geo[i] += s.geo[i] as u64;
                                a.table[i] += s.table[i] as u64;
                            }
                            for (l, v) in a.laplace.iter_mut().zip(&s.laplace) {
                                *l += v;
                            }
                        }
                        None => a.discarded += 1,
                    }
                }
            }
        }
        next = end;
    }
    let n_terms = plan.nakagami as usize;
    Ok(acc
        .into_iter()
        .map(|lv| LevelEstimates {
            tiers: lv
                .into_iter()
                .map(|a| {
                    let has = sinr && a.used > 0;
                    TierEstimates {
                        sinr_outage: has.then(|| a.geo.iter().map(|&c| bernoulli(c, a.used)).collect()),
                        sinr_outage_table: has
                            .then(|| a.table.iter().map(|&c| bernoulli(c, a.used)).collect()),
                        laplace: has.then(|| {
                            a.laplace
                                .chunks(n_terms)
                                .map(|c| c.iter().map(|v| v / a.used as f64).collect())
                                .collect()
                        }),
                        truncation: a.trunc.estimate(),
                        mean_power: a.power.estimate(),
                        discarded: a.discarded,
                    }
                })
                .collect(),
        })
        .collect())
}

fn tier_of<'a>(levels: &'a [LevelEstimates], j: usize) -> &'a TierEstimates {
    &levels[0].tiers[j]
}

/// Fraction of trials with SINR below the query threshold at the tier-j
/// reference BS, among trials where that BS schedules a user.
pub fn estimate_sinr_outage(query: &SinrQuery, net: &NetworkConfig, sim: &SimConfig) -> Result<SimEstimate> {
    net.tier(query.serving_tier)?;
    let levels = simulate(std::slice::from_ref(net), &[query.threshold], sim)?;
    tier_of(&levels, query.serving_tier)
        .sinr_outage
        .as_ref()
        .map(|v| v[0])
        .ok_or_else(|| Error::Estimation(format!("no trial had an active user at a tier-{} reference BS", query.serving_tier + 1)))
}

/// Fraction of tier-j-associated users (inside the guard region) whose
/// required power exceeds the cap.
pub fn estimate_truncation_outage(net: &NetworkConfig, sim: &SimConfig, j: usize) -> Result<SimEstimate> {
    net.tier(j)?;
    let levels = simulate(std::slice::from_ref(net), &[], sim)?;
    tier_of(&levels, j)
        .truncation
        .ok_or_else(|| Error::Estimation(format!("no users associated with tier {}", j + 1)))
}

/// Mean transmit power of active tier-j users, watts.
pub fn estimate_mean_power(net: &NetworkConfig, sim: &SimConfig, j: usize) -> Result<SimEstimate> {
    net.tier(j)?;
    let levels = simulate(std::slice::from_ref(net), &[], sim)?;
    tier_of(&levels, j)
        .mean_power
        .ok_or_else(|| Error::Estimation(format!("no active users in tier {}", j + 1)))
}

/// Transmit powers of active tier-j users inside the guard region, in trial
/// order, until `count` samples are collected.
pub fn active_power_samples(net: &NetworkConfig, sim: &SimConfig, j: usize, count: usize) -> Result<Vec<f64>> {
    net.tier(j)?;
    let plan = Plan::new(std::slice::from_ref(net), &[], sim)?;
    let lv = &plan.levels[0];
    let mut out = Vec::with_capacity(count);
    let mut t = 0u64;
    while out.len() < count {
        if t >= sim.trials.max(1).saturating_mul(1000) {
            return Err(Error::Estimation(format!("only {} active users found", out.len())));
        }
        // size the batch from the yield so far; dense networks fill `count` in a trial or two
        let want = if t == 0 || out.is_empty() {
            1
        } else {
            let per = out.len() as f64 / t as f64;
            (((count - out.len()) as f64 / per).ceil() as u64 + 1).min(BATCH)
        };
        let end = t + want;
        let batch: Vec<Vec<f64>> = (t..end)
            .into_par_iter()
            .map(|i| {
                let w = World::build(&plan, i);
                w.users
                    .iter()
                    .filter(|u| u.layer == 0 && u.interior && w.bs[u.bs as usize].tier == j)
                    .filter(|u| u.loss <= lv.limit[j])
                    .map(|u| lv.cutoff[j] * u.loss)
                    .collect()
            })
            .collect();
        for p in batch.into_iter().flatten() {
            if out.len() < count {
                out.push(p);
            }
        }
        t = end;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BsPoint {
    pub tier: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserPoint {
    pub x: f64,
    pub y: f64,
    /// Serving BS index into `Realization::base_stations`.
    pub bs: usize,
    pub tier: usize,
    /// Path loss y to the serving BS (distance^α for the drawn state).
    pub path_loss: f64,
    pub los: bool,
    /// Transmit power ρ_o y, or `None` if truncated.
    pub power: Option<f64>,
}

/// One trial of the system at a single network configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub base_stations: Vec<BsPoint>,
    pub users: Vec<UserPoint>,
    /// Scheduled user per BS, index into `users`.
    pub scheduled: Vec<Option<usize>>,
    /// Beam orientation of each scheduled user, radians.
    pub beam_orientation: Vec<Option<f64>>,
    /// Reference BS per tier.
    pub reference: Vec<Option<usize>>,
}

pub fn build_realization(net: &NetworkConfig, sim: &SimConfig, trial_index: u64) -> Result<Realization> {
    let plan = Plan::new(std::slice::from_ref(net), &[], sim)?;
    let lv = &plan.levels[0];
    let mut w = World::build(&plan, trial_index);
    let mut sched = Vec::new();
    w.schedule(lv, &mut sched);
    let base_stations = w
        .bs
        .iter()
        .map(|b| BsPoint {
            tier: b.tier,
            x: b.x,
            y: b.y,
        })
        .collect();
    let users = w
        .users
        .iter()
        .map(|u| {
            let k = w.bs[u.bs as usize].tier;
            UserPoint {
                x: u.x,
                y: u.y,
                bs: u.bs as usize,
                tier: k,
                path_loss: u.loss,
                los: u.los,
                power: (u.loss <= lv.limit[k]).then(|| lv.cutoff[k] * u.loss),
            }
        })
        .collect();
    let scheduled: Vec<Option<usize>> = sched.iter().map(|s| s.map(|i| i as usize)).collect();
    let beam_orientation = scheduled.iter().map(|s| s.map(|u| w.beam(&plan, u))).collect();
    Ok(Realization {
        base_stations,
        users,
        scheduled,
        beam_orientation,
        reference: w.refs.clone(),
    })
}

impl Realization {
    /// Text dump, one entity per line:
    /// `bs <tier> <x> <y>` and
    /// `user <tier> <x> <y> <power|-> <flags>` where flags is a subset of
    /// `L` (LOS serving link), `S` (scheduled), `T` (truncated), or `-`.
    /// Tiers are 1-based. The format is for debugging and may change.
    pub fn dump(&self, out: &mut impl Write) -> io::Result<()> {
        for b in &self.base_stations {
            writeln!(out, "bs {} {:.3} {:.3}", b.tier + 1, b.x, b.y)?;
        }
        let mut on = vec![false; self.users.len()];
        for s in self.scheduled.iter().flatten() {
            on[*s] = true;
        }
        for (u, &s) in self.users.iter().zip(&on) {
            let mut flags = String::new();
            if u.los {
                flags.push('L');
            }
            if s {
                flags.push('S');
            }
            if u.power.is_none() {
                flags.push('T');
            }
            if flags.is_empty() {
                flags.push('-');
            }
            match u.power {
                Some(p) => writeln!(out, "user {} {:.3} {:.3} {:e} {}", u.tier + 1, u.x, u.y, p, flags)?,
                None => writeln!(out, "user {} {:.3} {:.3} - {}", u.tier + 1, u.x, u.y, flags)?,
            }
        }
        Ok(())
    }
}
