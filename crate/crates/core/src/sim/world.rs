//! One trial: base stations, users, association and per-level evaluation.
//!
//! A trial is evaluated at several "levels" that share geometry and differ
//! only in cutoffs, power cap and noise. Association does not depend on the
//! cutoff, so one realization serves every level; only eligibility
//! (ρ_o y ≤ P_u) and hence scheduling changes.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::geometry::{poisson, ring_ppp, uniform_in_disc, Grid};
use super::stream;
use crate::model::DirectivityPmf;

#[derive(Debug, Clone)]
pub(crate) struct TierGeo {
    pub density: f64,
    pub blockage: f64,
    pub alpha_los: f64,
    pub alpha_nlos: f64,
    pub main_gain: f64,
    pub side_gain: f64,
    pub half_beam: f64,
    pub pmf: DirectivityPmf,
    pub serving_gain: f64,
    /// Links beyond this distance are LOS with probability ≤ e^{−4}.
    pub near: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct LevelSpec {
    pub cutoff: Vec<f64>,
    /// P_u/ρ_o per tier: the largest admissible path loss.
    pub limit: Vec<f64>,
    pub noise: f64,
    /// Highest user layer included at this level.
    pub layer: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerSpec {
    pub density: f64,
    /// Disc radius around each BS, per tier (unused for layer 0).
    pub radius: Vec<f64>,
    /// Users whose best path loss exceeds this are never eligible.
    pub bound: f64,
    /// Discs cover the whole window: generate the layer as a window PPP.
    pub full: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct Plan {
    pub tiers: Vec<TierGeo>,
    pub user_main: f64,
    pub user_side: f64,
    pub user_half_beam: f64,
    pub nakagami: u32,
    pub eta: f64,
    pub window: f64,
    pub interior: f64,
    pub guard: f64,
    pub layers: Vec<LayerSpec>,
    pub levels: Vec<LevelSpec>,
    pub thresholds: Vec<f64>,
    pub seed: u64,
    pub antithetic: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Bs {
    pub x: f64,
    pub y: f64,
    pub tier: usize,
    pub key: u64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct User {
    pub x: f64,
    pub y: f64,
    pub id: u64,
    pub bs: u32,
    pub loss: f64,
    pub los: bool,
    pub layer: u8,
    pub interior: bool,
    pub priority: u64,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct SinrTrial {
    pub geo: Vec<bool>,
    pub table: Vec<bool>,
    /// E-style samples e^{−s n I}, threshold-major, n = 1..N.
    pub laplace: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct TierTrial {
    pub sinr: Option<SinrTrial>,
    pub associated: u64,
    pub truncated: u64,
    pub active: u64,
    pub power_sum: f64,
}

pub(crate) struct World {
    pub bs: Vec<Bs>,
    pub tier_range: Vec<(usize, usize)>,
    near_list: Vec<usize>,
    near_grid: Grid,
    // per-tier grids for association, items offset by the tier start
    tier_grids: Vec<Grid>,
    pub users: Vec<User>,
    cell_start: Vec<u32>,
    cell_users: Vec<u32>,
    pub refs: Vec<Option<usize>>,
    // within the guard radius of some reference BS; only these get the
    // extra user layers, farther cells schedule from the base users
    near_ref: Vec<bool>,
    geo_trial: u64,
    flip: bool,
    marks: Vec<f64>,
    have_marks: Vec<bool>,
}

const MARK_STRIDE: usize = 3;
pub(crate) const MAX_TIERS: usize = 8;

// (d²)^{α/2} with the common exponents done exactly
fn pow_half(d2: f64, alpha: f64) -> f64 {
    if alpha == 2.0 {
        d2
    } else if alpha == 4.0 {
        d2 * d2
    } else if alpha == 5.0 {
        d2 * d2 * d2.sqrt()
    } else {
        d2.powf(0.5 * alpha)
    }
}

impl World {
    pub(crate) fn build(plan: &Plan, trial: u64) -> World {
        // antithetic pairs share everything except the fading uniforms
        let (geo_trial, flip) = if plan.antithetic {
            (trial & !1, trial & 1 == 1)
        } else {
            (trial, false)
        };
        let seed = plan.seed;
        let mut bs = Vec::new();
        let mut tier_range = Vec::new();
        for (k, t) in plan.tiers.iter().enumerate() {
            let start = bs.len();
            for (x, y, key) in ring_ppp(t.density, plan.window, &[seed, geo_trial, stream::BS, k as u64]) {
                bs.push(Bs {
                    x,
                    y,
                    tier: k,
                    key: ((k as u64) << 56) | key,
                });
            }
            tier_range.push((start, bs.len()));
        }
        let tier_grids = tier_range
            .iter()
            .zip(&plan.tiers)
            .map(|(&(s, e), t)| {
                let cell = (t.near / 2.0).max(plan.window / 256.0);
                Grid::new(bs[s..e].iter().map(|b| (b.x, b.y)), plan.window, cell)
            })
            .collect();
        let refs: Vec<Option<usize>> = tier_range
            .iter()
            .map(|&(s, e)| {
                (s..e)
                    .filter(|&i| bs[i].x.hypot(bs[i].y) <= plan.interior)
                    .min_by(|&a, &b| {
                        let da = bs[a].x.hypot(bs[a].y);
                        let db = bs[b].x.hypot(bs[b].y);
                        da.total_cmp(&db)
                    })
            })
            .collect();
        let g2 = plan.guard * plan.guard;
        let near_ref = bs
            .iter()
            .map(|b| {
                refs.iter()
                    .flatten()
                    .any(|&r| (b.x - bs[r].x).powi(2) + (b.y - bs[r].y).powi(2) <= g2)
            })
            .collect::<Vec<bool>>();
        let near_list: Vec<usize> = (0..bs.len()).filter(|&i| near_ref[i]).collect();
        let cell = (plan.guard / 4.0).max(plan.window / 256.0);
        let near_grid = Grid::new(near_list.iter().map(|&i| (bs[i].x, bs[i].y)), plan.window, cell);
        let mut w = World {
            bs,
            tier_range,
            near_grid,
            near_list,
            tier_grids,
            users: Vec::new(),
            cell_start: Vec::new(),
            cell_users: Vec::new(),
            refs,
            near_ref,
            geo_trial,
            flip,
            marks: Vec::new(),
            have_marks: Vec::new(),
        };
        w.populate(plan);
        w
    }

    fn populate(&mut self, plan: &Plan) {
        let seed = plan.seed;
        let gt = self.geo_trial;
        let mut users = Vec::new();
        let base = &plan.layers[0];
        for (x, y, key) in ring_ppp(base.density, plan.window, &[seed, gt, stream::BASE_USERS]) {
            let id = stream::key(&[stream::BASE_USERS, key]);
            if let Some(u) = self.make_user(plan, x, y, id, 0, base.bound) {
                users.push(u);
            }
        }
        for (i, layer) in plan.layers.iter().enumerate().skip(1) {
            let reach = layer.radius.iter().cloned().fold(0.0, f64::max);
            if layer.full {
                let span = self
                    .refs
                    .iter()
                    .flatten()
                    .map(|&r| self.bs[r].x.hypot(self.bs[r].y))
                    .fold(0.0, f64::max)
                    + plan.guard
                    + reach;
                let span = span.min(plan.window);
                for (x, y, key) in ring_ppp(layer.density, span, &[seed, gt, stream::LAYER_USERS, i as u64]) {
                    if !self.covered(x, y, layer) {
                        continue;
                    }
                    let id = stream::key(&[stream::LAYER_USERS, i as u64, key]);
                    if let Some(u) = self.make_user(plan, x, y, id, i as u8, layer.bound) {
                        users.push(u);
                    }
                }
                continue;
            }
            for m in 0..self.bs.len() {
                if !self.near_ref[m] {
                    continue;
                }
                let b = self.bs[m];
                let rad = layer.radius[b.tier];
                let mut rng = stream::rng(&[seed, gt, stream::LAYER_USERS, i as u64, b.key]);
                let n = poisson(layer.density * PI * rad * rad, &mut rng);
                for idx in 0..n as u64 {
                    let [dx, dy] = uniform_in_disc(rad, &mut rng);
                    let (x, y) = (b.x + dx, b.y + dy);
                    if x.hypot(y) > plan.window || self.claimed_earlier(x, y, b.key, reach, layer) {
                        continue;
                    }
                    let id = stream::key(&[stream::LAYER_USERS, i as u64, b.key, idx]);
                    if let Some(u) = self.make_user(plan, x, y, id, i as u8, layer.bound) {
                        users.push(u);
                    }
                }
            }
        }
        // per-BS lists in priority order: the scheduled user at a level is the
        // first eligible entry, i.e. a uniform pick among eligible users
        let mut start = vec![0u32; self.bs.len() + 1];
        for u in &users {
            start[u.bs as usize + 1] += 1;
        }
        for m in 0..self.bs.len() {
            start[m + 1] += start[m];
        }
        let mut fill = start.clone();
        let mut list = vec![0u32; users.len()];
        for (i, u) in users.iter().enumerate() {
            list[fill[u.bs as usize] as usize] = i as u32;
            fill[u.bs as usize] += 1;
        }
        for m in 0..self.bs.len() {
            list[start[m] as usize..start[m + 1] as usize].sort_by_key(|&i| users[i as usize].priority);
        }
        let k = plan.tiers.len();
        self.marks = vec![0.0; users.len() * (1 + MARK_STRIDE * k)];
        self.have_marks = vec![false; users.len()];
        self.users = users;
        self.cell_start = start;
        self.cell_users = list;
    }

    fn covered(&self, x: f64, y: f64, layer: &LayerSpec) -> bool {
        let reach = layer.radius.iter().cloned().fold(0.0, f64::max);
        self.near_grid.any(x, y, reach, |i| {
            let b = &self.bs[self.near_list[i as usize]];
            let r = layer.radius[b.tier];
            (b.x - x).powi(2) + (b.y - y).powi(2) <= r * r
        })
    }

    // Union-of-discs layer: a point belongs to the disc of the BS with the
    // smallest key among those covering it.
    fn claimed_earlier(&self, x: f64, y: f64, key: u64, reach: f64, layer: &LayerSpec) -> bool {
        self.near_grid.any(x, y, reach, |i| {
            let b = &self.bs[self.near_list[i as usize]];
            let r = layer.radius[b.tier];
            b.key < key && (b.x - x).powi(2) + (b.y - y).powi(2) <= r * r
        })
    }

    fn make_user(&self, plan: &Plan, x: f64, y: f64, id: u64, layer: u8, bound: f64) -> Option<User> {
        let mut rng = stream::rng(&[plan.seed, self.geo_trial, stream::ASSOC, id]);
        let (bs, loss, los) = self.associate(plan, x, y, bound, &mut rng)?;
        Some(User {
            x,
            y,
            id,
            bs,
            loss,
            los,
            layer,
            interior: x * x + y * y <= plan.interior * plan.interior,
            priority: stream::key(&[plan.seed, self.geo_trial, stream::PRIORITY, id]),
        })
    }

    /// Exact minimum path loss over all BSs in the window, restricted to
    /// losses below `bound`. Nearby links are drawn explicitly; far links can
    /// only win through LOS and are visited by geometric skipping over the
    /// LOS-thinned BS list.
    pub(crate) fn associate(
        &self,
        plan: &Plan,
        x: f64,
        y: f64,
        bound: f64,
        rng: &mut Xoshiro256PlusPlus,
    ) -> Option<(u32, f64, bool)> {
        let tiers = &plan.tiers;
        let mut best = bound;
        let mut arg: Option<(u32, bool)> = None;
        // squared LOS reach per tier: BSs at or beyond it cannot beat `best`
        let reach2 = |best: f64, a: f64| if best.is_finite() { best.powf(2.0 / a) } else { f64::INFINITY };
        let mut lim2 = [0.0f64; MAX_TIERS];
        for (l, t) in lim2.iter_mut().zip(tiers) {
            *l = reach2(best, t.alpha_los);
        }
        let mut consider = |i: usize, d2: f64, los: bool, best: &mut f64, lim2: &mut [f64; MAX_TIERS]| {
            let t = &tiers[self.bs[i].tier];
            let v = pow_half(d2, if los { t.alpha_los } else { t.alpha_nlos });
            if v < *best {
                *best = v;
                arg = Some((i as u32, los));
                for (l, t) in lim2.iter_mut().zip(tiers) {
                    *l = reach2(v, t.alpha_los);
                }
            }
        };

        for (k, t) in tiers.iter().enumerate() {
            let s = self.tier_range[k].0;
            let scan = lim2[k].sqrt().min(t.near);
            self.tier_grids[k].visit(x, y, scan, |i| {
                let i = s + i as usize;
                let b = &self.bs[i];
                let d2 = (b.x - x).powi(2) + (b.y - y).powi(2);
                if d2 > t.near * t.near || d2 >= lim2[k] {
                    return;
                }
                let los = rng.random::<f64>() < (-t.blockage * d2.sqrt()).exp();
                consider(i, d2, los, &mut best, &mut lim2);
            });
        }

        for (k, t) in tiers.iter().enumerate() {
            let r2 = t.near * t.near;
            if lim2[k] <= r2 {
                continue;
            }
            let (s, e) = self.tier_range[k];
            if reach2(best, t.alpha_nlos) > r2 {
                // NLOS links beyond the near disc can still win: draw them all
                for i in s..e {
                    let b = &self.bs[i];
                    let d2 = (b.x - x).powi(2) + (b.y - y).powi(2);
                    if d2 <= r2 || d2 >= lim2[k] {
                        continue;
                    }
                    let los = rng.random::<f64>() < (-t.blockage * d2.sqrt()).exp();
                    consider(i, d2, los, &mut best, &mut lim2);
                }
                continue;
            }
            let pbar = (-t.blockage * t.near).exp();
            if !(pbar > 0.0) {
                continue;
            }
            let ln_q = (-pbar).ln_1p();
            let skip = |rng: &mut Xoshiro256PlusPlus| -> usize {
                if pbar >= 1.0 {
                    return 0;
                }
                let u = 1.0 - rng.random::<f64>();
                (u.ln() / ln_q).floor().min(1e12) as usize
            };
            let mut i = s + skip(rng);
            while i < e {
                let b = &self.bs[i];
                let d2 = (b.x - x).powi(2) + (b.y - y).powi(2);
                if d2 > r2 && d2 < lim2[k] && rng.random::<f64>() * pbar < (-t.blockage * d2.sqrt()).exp() {
                    consider(i, d2, true, &mut best, &mut lim2);
                }
                i += 1 + skip(rng);
            }
        }
        arg.map(|(i, los)| (i, best, los))
    }

    /// Scheduled user per BS at a level: first eligible user in priority order.
    pub(crate) fn schedule(&self, lv: &LevelSpec, out: &mut Vec<Option<u32>>) {
        out.clear();
        for m in 0..self.bs.len() {
            let limit = lv.limit[self.bs[m].tier];
            let list = &self.cell_users[self.cell_start[m] as usize..self.cell_start[m + 1] as usize];
            out.push(list.iter().copied().find(|&i| {
                let u = &self.users[i as usize];
                u.layer as usize <= lv.layer && u.loss <= limit
            }));
        }
    }

    fn ensure_marks(&mut self, plan: &Plan, u: usize) {
        if self.have_marks[u] {
            return;
        }
        let k = plan.tiers.len();
        let stride = 1 + MARK_STRIDE * k;
        let mut rng = stream::rng(&[plan.seed, self.geo_trial, stream::MARKS, self.users[u].id]);
        let m = &mut self.marks[u * stride..(u + 1) * stride];
        m[0] = 2.0 * PI * rng.random::<f64>();
        let n = plan.nakagami as f64;
        for j in 0..k {
            m[1 + MARK_STRIDE * j] = rng.random::<f64>();
            m[2 + MARK_STRIDE * j] = rng.random::<f64>();
            m[3 + MARK_STRIDE * j] = if plan.antithetic {
                let v: f64 = rng.random();
                gamma_quantile(plan.nakagami, if self.flip { 1.0 - v } else { v }) / n
            } else {
                Gamma::new(n, 1.0 / n).expect("shape >= 1").sample(&mut rng)
            };
        }
        self.have_marks[u] = true;
    }

    pub(crate) fn beam(&mut self, plan: &Plan, u: usize) -> f64 {
        self.ensure_marks(plan, u);
        self.mark(plan, u, 0).0
    }

    // (beam orientation, LOS uniform, gain uniform, fading) toward a tier-j reference
    fn mark(&self, plan: &Plan, u: usize, j: usize) -> (f64, f64, f64, f64) {
        let stride = 1 + MARK_STRIDE * plan.tiers.len();
        let m = &self.marks[u * stride..(u + 1) * stride];
        (m[0], m[1 + MARK_STRIDE * j], m[2 + MARK_STRIDE * j], m[3 + MARK_STRIDE * j])
    }

    /// Interference coefficients from user `z` at the tier-j reference BS,
    /// without the transmitter's cutoff: (geometric-gain, table-gain) paths.
    fn coupling(&mut self, plan: &Plan, z: usize, j: usize, r: usize, aim: f64) -> (f64, f64) {
        self.ensure_marks(plan, z);
        let (phi, u_los, u_gain, fade) = self.mark(plan, z, j);
        let t = &plan.tiers[j];
        let (u, b) = (self.users[z], self.bs[r]);
        let (dx, dy) = (b.x - u.x, b.y - u.y);
        let d = dx.hypot(dy);
        // the user chose its own BS, so a link to the reference that would
        // have beaten it cannot be LOS; otherwise the state is a fresh draw
        let los = d.powf(t.alpha_los) >= u.loss && u_los < (-t.blockage * d).exp();
        let pl = d.powf(if los { t.alpha_los } else { t.alpha_nlos });
        let base = u.loss * fade / pl;
        let at_bs = angle_gap((-dy).atan2(-dx), aim) <= t.half_beam;
        let at_user = angle_gap(dy.atan2(dx), phi) <= plan.user_half_beam;
        let g = if at_bs { t.main_gain } else { t.side_gain }
            * if at_user { plan.user_main } else { plan.user_side };
        let gt = t.pmf.gains[t.pmf.sample_index(u_gain)];
        (base * g, base * gt)
    }

    pub(crate) fn evaluate(&mut self, plan: &Plan) -> Vec<Vec<TierTrial>> {
        let k = plan.tiers.len();
        let nth = plan.thresholds.len();
        let n_terms = plan.nakagami as usize;
        let mut sched = Vec::with_capacity(self.bs.len());
        // cached couplings per (user, reference tier)
        let mut cache: Vec<Option<(f64, f64)>> = vec![None; self.users.len() * k];
        let mut out = Vec::with_capacity(plan.levels.len());
        for lv in &plan.levels {
            let mut tiers = vec![TierTrial::default(); k];
            for u in self.users.iter().filter(|u| u.layer == 0 && u.interior) {
                let kt = self.bs[u.bs as usize].tier;
                let s = &mut tiers[kt];
                s.associated += 1;
                if u.loss > lv.limit[kt] {
                    s.truncated += 1;
                } else {
                    s.active += 1;
                    s.power_sum += lv.cutoff[kt] * u.loss;
                }
            }
            self.schedule(lv, &mut sched);
            for j in 0..k {
                let Some(r) = self.refs[j] else { continue };
                let Some(u0) = sched[r] else { continue };
                let u0 = u0 as usize;
                self.ensure_marks(plan, u0);
                let g0 = self.mark(plan, u0, j).3;
                let b = self.bs[r];
                let aim = (self.users[u0].y - b.y).atan2(self.users[u0].x - b.x);
                let (mut i_geo, mut i_tab) = (0.0, 0.0);
                for m in 0..self.bs.len() {
                    if m == r {
                        continue;
                    }
                    let Some(z) = sched[m] else { continue };
                    let z = z as usize;
                    let c = match cache[z * k + j] {
                        Some(c) => c,
                        None => {
                            let c = self.coupling(plan, z, j, r, aim);
                            cache[z * k + j] = Some(c);
                            c
                        }
                    };
                    let rho = lv.cutoff[self.bs[m].tier];
                    i_geo += rho * c.0;
                    i_tab += rho * c.1;
                }
                let signal = lv.cutoff[j] * plan.tiers[j].serving_gain * g0;
                let mut st = SinrTrial {
                    geo: Vec::with_capacity(nth),
                    table: Vec::with_capacity(nth),
                    laplace: Vec::with_capacity(nth * n_terms),
                };
                for &th in &plan.thresholds {
                    st.geo.push(signal < th * (lv.noise + i_geo));
                    st.table.push(signal < th * (lv.noise + i_tab));
                    let s = plan.eta * th / (lv.cutoff[j] * plan.tiers[j].serving_gain);
                    for n in 1..=n_terms {
                        st.laplace.push((-s * n as f64 * i_geo).exp());
                    }
                }
                tiers[j].sinr = Some(st);
            }
            out.push(tiers);
        }
        out
    }
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Quantile of Gamma(n, 1) for integer n, by safeguarded Newton iteration.
pub(crate) fn gamma_quantile(n: u32, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    let cdf = |x: f64| {
        let (mut term, mut sum) = (1.0, 1.0);
        for k in 1..n {
            term *= x / k as f64;
            sum += term;
        }
        1.0 - (-x).exp() * sum
    };
    let log_fact: f64 = (1..n).map(|k| (k as f64).ln()).sum();
    let (mut lo, mut hi) = (0.0, n as f64);
    while cdf(hi) < p {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return hi;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..100 {
        let f = cdf(x) - p;
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dens = ((n as f64 - 1.0) * x.ln() - x - log_fact).exp();
        let step = x - f / dens;
        x = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-14 * hi {
            break;
        }
    }
    x
}
