//! Transmit-power law of an active user under truncated channel inversion.
//!
//! A user served by tier j transmits P = ρ_o^j·min_k y_k, where y_k is the
//! pathloss to the best tier-k BS. The points {y} form an inhomogeneous PPP
//! with measure Λ_k, which gives the law below. The single-tier formulas are
//! kept as a separate path ([`SingleTierLaw`]) and must agree with K = 1.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{NetworkConfig, TierParams};
use crate::numerics::{integrate_with_breakpoints, QuadSpec};

/// 1 − e^{−x}(1 + x), accurate for small x.
fn blocked_share(x: f64) -> f64 {
    if x < 1e-3 {
        // x²/2 − x³/3 + x⁴/8
        x * x * (0.5 - x / 3.0 + x * x / 8.0)
    } else {
        -(-x).exp_m1() - x * (-x).exp()
    }
}

/// Λ_k(y): mean number of tier-k BSs with pathloss below y (y = p/ρ_o).
pub fn intensity_measure(y: f64, tier: &TierParams) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(Error::argument("intensity_measure", "y must be >= 0"));
    }
    Ok(measure_unchecked(y, tier))
}

fn measure_unchecked(y: f64, t: &TierParams) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    let c = 2.0 * PI * t.density / (t.blockage * t.blockage);
    let rl = y.powf(1.0 / t.alpha_los);
    let rn = y.powf(1.0 / t.alpha_nlos);
    let nlos = PI * t.density * rn * rn;
    // the LOS shell beyond rn, i.e. the LOS-minus-NLOS part, is nonnegative
    c * (blocked_share(t.blockage * rl) - blocked_share(t.blockage * rn)) + nlos
}

/// λ̄_k(p): density in p of the tier-k measure, for a user served with cutoff `serving_cutoff`.
pub fn intensity_density(p: f64, serving_cutoff: f64, source: &TierParams) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::argument("intensity_density", "p must be positive"));
    }
    Ok(density_unchecked(p, serving_cutoff, source))
}

fn density_unchecked(p: f64, rho: f64, t: &TierParams) -> f64 {
    let (al, an) = (t.alpha_los, t.alpha_nlos);
    if p == 0.0 {
        return density_at_origin(rho, t);
    }
    let y = p / rho;
    let los = 2.0 * PI * t.density / (al * rho.powf(2.0 / al))
        * p.powf(2.0 / al - 1.0)
        * (-t.blockage * y.powf(1.0 / al)).exp();
    let nlos = 2.0 * PI * t.density / (an * rho.powf(2.0 / an))
        * p.powf(2.0 / an - 1.0)
        * -(-t.blockage * y.powf(1.0 / an)).exp_m1();
    los + nlos
}

/// Limit of the density as p → 0⁺, possibly +∞.
fn density_at_origin(rho: f64, t: &TierParams) -> f64 {
    let (al, an) = (t.alpha_los, t.alpha_nlos);
    let los = 2.0 * PI * t.density / (al * rho.powf(2.0 / al)) * 0f64.powf(2.0 / al - 1.0);
    // 1 − e^{−β y^{1/α_N}} ~ β y^{1/α_N}
    let nlos = 2.0 * PI * t.density * t.blockage / (an * rho.powf(3.0 / an))
        * 0f64.powf(3.0 / an - 1.0);
    los + nlos
}

/// Fixed quadrature against a power law: E[φ(P)] ≈ Σ wᵢ φ(pᵢ).
#[derive(Debug, Clone)]
pub struct PowerRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Panel edges in p, ascending.
    pub edges: Vec<f64>,
}

impl PowerRule {
    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

// 10-point Gauss–Legendre on [-1, 1], as (node, weight) with nodes ≥ 0.
const GL10: [(f64, f64); 5] = [
    (0.148_874_338_981_631_210_884_826_001_129_720, 0.295_524_224_714_752_870_173_892_994_651_338),
    (0.433_395_394_129_247_190_799_265_943_165_784, 0.269_266_719_309_996_355_091_226_921_569_469),
    (0.679_409_568_299_024_406_234_327_365_114_874, 0.219_086_362_515_982_043_995_534_934_228_163),
    (0.865_063_366_688_984_510_732_096_688_423_493, 0.149_451_349_150_580_593_145_776_339_657_697),
    (0.973_906_528_517_171_720_077_964_012_084_452, 0.066_671_344_308_688_137_593_568_809_893_332),
];

/// A law of the form f(p) = rate(p)·e^{−mass(p)} / (1 − e^{−mass(P_u)}) on (0, P_u].
pub trait PowerDistribution {
    /// Unnormalized cumulative measure at power p (Σ Λ evaluated at p/ρ_o^j).
    fn mass(&self, p: f64) -> f64;
    /// d mass / dp.
    fn rate(&self, p: f64) -> f64;
    fn max_power(&self) -> f64;

    /// Mass at P_u; the truncation outage is e^{−this}.
    fn total_mass(&self) -> f64 {
        self.mass(self.max_power())
    }

    fn normalizer(&self) -> f64 {
        -(-self.total_mass()).exp_m1()
    }

    fn truncation_outage(&self) -> f64 {
        (-self.total_mass()).exp()
    }

    /// Active-user density. Zero above P_u; e^{−mass} underflows to an exact 0.
    fn pdf(&self, p: f64) -> f64 {
        if p < 0.0 || p > self.max_power() {
            return 0.0;
        }
        self.rate(p) * (-self.mass(p)).exp() / self.normalizer()
    }

    fn cdf(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if p >= self.max_power() {
            return 1.0;
        }
        -(-self.mass(p)).exp_m1() / self.normalizer()
    }

    /// Power at conditional CDF level u ∈ (0, 1).
    fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::argument("quantile", "level must lie in (0, 1)"));
        }
        let target = -(-u * self.normalizer()).ln_1p();
        let pu = self.max_power();
        // Newton in ln p, safeguarded by a bracket
        let mut hi = pu.ln();
        let mut lo = hi - 1.0;
        while self.mass(lo.exp()) > target {
            lo -= 2.0 * (hi - lo);
            if lo < -745.0 {
                return Err(Error::NoConvergence {
                    op: "quantile",
                    estimate: lo.exp(),
                    error_bound: f64::INFINITY,
                });
            }
        }
        let mut v = 0.5 * (lo + hi);
        for _ in 0..200 {
            let p = v.exp();
            let g = self.mass(p) - target;
            if g > 0.0 {
                hi = v;
            } else {
                lo = v;
            }
            if (hi - lo) < 1e-14 * (1.0 + v.abs()) || g.abs() <= 1e-15 * target {
                return Ok(p);
            }
            let slope = self.rate(p) * p;
            let step = if slope > 0.0 { g / slope } else { f64::NAN };
            let next = v - step;
            v = if next.is_finite() && next > lo && next < hi {
                next
            } else {
                0.5 * (lo + hi)
            };
        }
        Ok(v.exp())
    }

    /// Composite 10-point Gauss rule in ln p over the central 1 − 2·tail_cut of the law.
    ///
    /// Panels are at most one unit of ln p wide and carry at most 0.5 of `mass`.
    fn rule(&self, spec: &QuadSpec) -> Result<PowerRule> {
        let tail = spec.tail_cut_probability;
        let vlo = self.quantile(tail)?.ln();
        let vhi = self.quantile(1.0 - tail)?.ln().min(self.max_power().ln());
        let mut edges = vec![vlo];
        let n = ((vhi - vlo).ceil() as usize).max(1);
        for i in 1..=n {
            let next = vlo + (vhi - vlo) * i as f64 / n as f64;
            let prev = *edges.last().unwrap();
            split_by_mass(self, prev, next, &mut edges, 0);
        }
        let z = self.normalizer();
        let mut nodes = Vec::with_capacity(10 * edges.len());
        let mut weights = Vec::with_capacity(10 * edges.len());
        for w in edges.windows(2) {
            let c = 0.5 * (w[0] + w[1]);
            let h = 0.5 * (w[1] - w[0]);
            for &(x, gw) in GL10.iter().rev() {
                push_node(self, c - h * x, gw * h, z, &mut nodes, &mut weights);
            }
            for &(x, gw) in GL10.iter() {
                push_node(self, c + h * x, gw * h, z, &mut nodes, &mut weights);
            }
        }
        Ok(PowerRule {
            nodes,
            weights,
            edges: edges.iter().map(|v| v.exp()).collect(),
        })
    }

    /// E[P^δ] by adaptive quadrature in ln p.
    fn moment(&self, delta: f64, spec: &QuadSpec) -> Result<f64> {
        if !(delta >= 0.0) {
            return Err(Error::argument("power_moment", "delta must be >= 0"));
        }
        if delta == 0.0 {
            return Ok(1.0);
        }
        let rule = self.rule(spec)?;
        let logs: Vec<f64> = rule.edges.iter().map(|p| p.ln()).collect();
        let z = self.normalizer();
        let (a, b) = (logs[0], *logs.last().unwrap());
        let r = integrate_with_breakpoints(
            |v| {
                let p = v.exp();
                p.powf(delta) * self.rate(p) * p * (-self.mass(p)).exp() / z
            },
            a,
            b,
            &logs,
            spec,
        )?;
        Ok(r.value)
    }
}

fn push_node<D: PowerDistribution + ?Sized>(
    d: &D,
    v: f64,
    w: f64,
    z: f64,
    nodes: &mut Vec<f64>,
    weights: &mut Vec<f64>,
) {
    let p = v.exp();
    let dens = d.rate(p) * p * (-d.mass(p)).exp() / z;
    nodes.push(p);
    weights.push(w * dens);
}

fn split_by_mass<D: PowerDistribution + ?Sized>(
    d: &D,
    a: f64,
    b: f64,
    edges: &mut Vec<f64>,
    depth: u32,
) {
    let dm = d.mass(b.exp()) - d.mass(a.exp());
    if dm > 0.5 && depth < 40 {
        let m = 0.5 * (a + b);
        split_by_mass(d, a, m, edges, depth + 1);
        split_by_mass(d, m, b, edges, depth + 1);
    } else {
        edges.push(b);
    }
}

/// Power law of a user served by tier j in a K-tier network.
#[derive(Debug, Clone)]
pub struct PowerLaw {
    serving_tier: usize,
    cutoff: f64,
    max_power: f64,
    tiers: Vec<TierParams>,
}

impl PowerLaw {
    pub fn new(net: &NetworkConfig, serving_tier: usize) -> Result<Self> {
        let t = net.tier(serving_tier)?;
        Ok(PowerLaw {
            serving_tier,
            cutoff: t.cutoff,
            max_power: net.max_power(),
            tiers: net.tiers().to_vec(),
        })
    }

    pub fn serving_tier(&self) -> usize {
        self.serving_tier
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Σ_k Λ_k(y) at the pathloss ratio y.
    pub fn measure(&self, y: f64) -> f64 {
        self.tiers.iter().map(|t| measure_unchecked(y, t)).sum()
    }

    /// Σ_k λ̄_k(p).
    pub fn intensity(&self, p: f64) -> f64 {
        self.tiers
            .iter()
            .map(|t| density_unchecked(p, self.cutoff, t))
            .sum()
    }
}

impl PowerDistribution for PowerLaw {
    fn mass(&self, p: f64) -> f64 {
        self.measure(p / self.cutoff)
    }

    fn rate(&self, p: f64) -> f64 {
        self.intensity(p)
    }

    fn max_power(&self) -> f64 {
        self.max_power
    }
}

/// Single-tier law written directly in p (the K = 1 formulas).
#[derive(Debug, Clone)]
pub struct SingleTierLaw {
    tier: TierParams,
    max_power: f64,
}

impl SingleTierLaw {
    pub fn new(tier: &TierParams, max_power: f64) -> Self {
        SingleTierLaw {
            tier: tier.clone(),
            max_power,
        }
    }

    pub fn tier(&self) -> &TierParams {
        &self.tier
    }
}

impl PowerDistribution for SingleTierLaw {
    fn mass(&self, p: f64) -> f64 {
        let t = &self.tier;
        if p <= 0.0 {
            return 0.0;
        }
        let x = p / t.cutoff;
        let c = 2.0 * PI * t.density / (t.blockage * t.blockage);
        let b = t.blockage;
        let rl = x.powf(1.0 / t.alpha_los);
        let rn = x.powf(1.0 / t.alpha_nlos);
        c * (blocked_share(b * rl) - blocked_share(b * rn)) + PI * t.density * rn * rn
    }

    fn rate(&self, p: f64) -> f64 {
        let t = &self.tier;
        let (al, an, rho, lam, b) = (t.alpha_los, t.alpha_nlos, t.cutoff, t.density, t.blockage);
        if p == 0.0 {
            return density_at_origin(rho, t);
        }
        let y = p / rho;
        2.0 * PI * lam / (al * rho.powf(2.0 / al))
            * p.powf(2.0 / al - 1.0)
            * (-b * y.powf(1.0 / al)).exp()
            + 2.0 * PI * lam / (an * rho.powf(2.0 / an))
                * p.powf(2.0 / an - 1.0)
                * -(-b * y.powf(1.0 / an)).exp_m1()
    }

    fn max_power(&self) -> f64 {
        self.max_power
    }
}

/// All-LOS law used by the dense approximation: mass Σ_b πλ_b (p/ρ_o^j)^{2/α_L^b}.
#[derive(Debug, Clone)]
pub struct DenseLaw {
    cutoff: f64,
    max_power: f64,
    tiers: Vec<(f64, f64)>,
}

impl DenseLaw {
    pub fn new(net: &NetworkConfig, serving_tier: usize) -> Result<Self> {
        Ok(DenseLaw {
            cutoff: net.tier(serving_tier)?.cutoff,
            max_power: net.max_power(),
            tiers: net
                .tiers()
                .iter()
                .map(|t| (t.density, t.alpha_los))
                .collect(),
        })
    }
}

impl PowerDistribution for DenseLaw {
    fn mass(&self, p: f64) -> f64 {
        let y = p / self.cutoff;
        self.tiers
            .iter()
            .map(|&(lam, al)| PI * lam * y.powf(2.0 / al))
            .sum()
    }

    fn rate(&self, p: f64) -> f64 {
        let rho = self.cutoff;
        self.tiers
            .iter()
            .map(|&(lam, al)| 2.0 * PI * lam * p.powf(2.0 / al - 1.0) / (al * rho.powf(2.0 / al)))
            .sum()
    }

    fn max_power(&self) -> f64 {
        self.max_power
    }
}

fn check_power(op: &'static str, p: f64, net: &NetworkConfig) -> Result<()> {
    if !(p >= 0.0 && p <= net.max_power()) {
        return Err(Error::argument(op, format!("p = {p} outside [0, P_u]")));
    }
    Ok(())
}

/// f_{P_j}(p).
pub fn power_pdf(p: f64, serving_tier: usize, net: &NetworkConfig) -> Result<f64> {
    check_power("power_pdf", p, net)?;
    Ok(PowerLaw::new(net, serving_tier)?.pdf(p))
}

/// E[P_j^δ] for an active tier-j user.
pub fn power_moment(
    delta: f64,
    serving_tier: usize,
    net: &NetworkConfig,
    spec: &QuadSpec,
) -> Result<f64> {
    PowerLaw::new(net, serving_tier)?.moment(delta, spec)
}

/// O_p^j = exp(−Σ_k Λ_k(P_u/ρ_o^j)).
pub fn truncation_outage(serving_tier: usize, net: &NetworkConfig) -> Result<f64> {
    Ok(PowerLaw::new(net, serving_tier)?.truncation_outage())
}

/// Dense-regime (all-LOS) density.
pub fn dense_power_pdf(p: f64, serving_tier: usize, net: &NetworkConfig) -> Result<f64> {
    check_power("dense_power_pdf", p, net)?;
    Ok(DenseLaw::new(net, serving_tier)?.pdf(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocked_share_branches_agree() {
        for x in [9e-4f64, 1e-3, 1.1e-3] {
            let direct = 1.0 - (-x).exp() * (1.0 + x);
            assert!(((blocked_share(x) - direct) / direct).abs() < 1e-9);
        }
    }
}
