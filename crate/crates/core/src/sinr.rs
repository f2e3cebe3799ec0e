//! SINR outage through the Laplace transform of LOS and NLOS interference.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{binomial, directivity_pmf, eta, NetworkConfig, TierParams, UserAntennaParams};
use crate::numerics::{integrate_semi_infinite_scaled, QuadSpec};
use crate::power::{PowerDistribution, PowerLaw, PowerRule, SingleTierLaw};

pub const MAX_NAKAGAMI: u32 = 10;

/// Width (in ln y) handed to the semi-infinite transform of the outer integral.
const OUTER_SCALE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrQuery {
    pub serving_tier: usize,
    /// Linear SINR threshold θ_j.
    pub threshold: f64,
    pub terms: u32,
    pub eta: f64,
}

impl SinrQuery {
    pub fn new(net: &NetworkConfig, serving_tier: usize, threshold: f64) -> Result<Self> {
        net.tier(serving_tier)?;
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::argument("SinrQuery", "threshold must be positive"));
        }
        let n = net.nakagami();
        if n > MAX_NAKAGAMI {
            return Err(Error::argument(
                "SinrQuery",
                format!("Nakagami N = {n} exceeds {MAX_NAKAGAMI}"),
            ));
        }
        Ok(SinrQuery {
            serving_tier,
            threshold,
            terms: n,
            eta: eta(n),
        })
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::argument("SinrQuery", "threshold must be positive"));
        }
        Ok(SinrQuery { threshold, ..*self })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageResult {
    pub sinr_outage: f64,
    pub truncation_outage: f64,
    pub total_outage: f64,
}

impl OutageResult {
    pub fn combine(sinr_outage: f64, truncation_outage: f64) -> Self {
        OutageResult {
            sinr_outage,
            truncation_outage,
            total_outage: truncation_outage + (1.0 - truncation_outage) * sinr_outage,
        }
    }
}

/// ℱ(N, x) = 1 − (1 + x)^{−N}.
fn fading_factor(n: u32, x: f64) -> f64 {
    -(-(n as f64) * x.ln_1p()).exp_m1()
}

/// Which blockage state an exponent integrates over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Link {
    Los,
    Nlos,
}

/// 2πλ b q^{2/α} ∫_{lower}^∞ ℱ(N, y^{−α}/N) y E_P[P^{2/α} h(β (qP)^{1/α} y)] dy,
/// h(x) = e^{−x} for LOS and 1 − e^{−x} for NLOS.
#[allow(clippy::too_many_arguments)]
fn exponent_term(
    rule: &PowerRule,
    density: f64,
    prob: f64,
    q: f64,
    lower: f64,
    alpha: f64,
    blockage: f64,
    nakagami: u32,
    link: Link,
    spec: &QuadSpec,
) -> Result<f64> {
    if prob == 0.0 || density == 0.0 {
        return Ok(0.0);
    }
    let coef: Vec<f64> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&p, &w)| w * p.powf(2.0 / alpha))
        .collect();
    let rate: Vec<f64> = rule
        .nodes
        .iter()
        .map(|&p| blockage * (q * p).powf(1.0 / alpha))
        .collect();
    let nf = nakagami as f64;
    let inner = |y: f64| -> f64 {
        let mut s = 0.0;
        match link {
            Link::Los => {
                for (c, r) in coef.iter().zip(&rate) {
                    s += c * (-r * y).exp();
                }
            }
            Link::Nlos => {
                for (c, r) in coef.iter().zip(&rate) {
                    s += c * -(-r * y).exp_m1();
                }
            }
        }
        s
    };
    // outer integral in u = ln y
    let integrand = |u: f64| {
        let y = u.exp();
        let f = fading_factor(nakagami, y.powf(-alpha) / nf);
        if f == 0.0 {
            return 0.0;
        }
        f * y * y * inner(y)
    };
    let r = integrate_semi_infinite_scaled(integrand, lower.ln(), OUTER_SCALE, spec)?;
    Ok(2.0 * PI * density * prob * q.powf(2.0 / alpha) * r.value)
}

/// Everything needed to evaluate the exponents for one serving tier.
struct Context<'a> {
    query: &'a SinrQuery,
    serving: &'a TierParams,
    user: &'a UserAntennaParams,
    serving_gain: f64,
}

impl Context<'_> {
    fn q(&self, n: u32, gain: f64) -> f64 {
        self.query.eta * n as f64 * self.query.threshold * gain
            / (self.serving.cutoff * self.serving_gain)
    }
}

fn source_exponent(
    ctx: &Context,
    n: u32,
    source: &TierParams,
    rule: &PowerRule,
    link: Link,
    nakagami: u32,
    spec: &QuadSpec,
) -> Result<f64> {
    let pmf = directivity_pmf(ctx.serving, ctx.user);
    let alpha = match link {
        Link::Los => ctx.serving.alpha_los,
        Link::Nlos => ctx.serving.alpha_nlos,
    };
    let mut total = 0.0;
    for (a, b) in pmf.iter() {
        let q = ctx.q(n, a);
        let lower = (q * source.cutoff).powf(-1.0 / alpha);
        total += exponent_term(
            rule,
            source.density,
            b,
            q,
            lower,
            alpha,
            ctx.serving.blockage,
            nakagami,
            link,
            spec,
        )?;
    }
    Ok(total)
}

fn check_n(n: u32, query: &SinrQuery) -> Result<()> {
    if n < 1 || n > query.terms {
        return Err(Error::argument(
            "laplace_exponent",
            format!("n = {n} outside 1..={}", query.terms),
        ));
    }
    Ok(())
}

fn context<'a>(query: &'a SinrQuery, net: &'a NetworkConfig) -> Result<Context<'a>> {
    Ok(Context {
        query,
        serving: net.tier(query.serving_tier)?,
        user: net.user_antenna(),
        serving_gain: net.serving_gain(query.serving_tier)?,
    })
}

/// Q_n^k: LOS interference exponent from source tier k (0-based).
pub fn laplace_exponent_los(
    n: u32,
    source_tier: usize,
    query: &SinrQuery,
    net: &NetworkConfig,
    spec: &QuadSpec,
) -> Result<f64> {
    check_n(n, query)?;
    let ctx = context(query, net)?;
    let rule = PowerLaw::new(net, source_tier)?.rule(spec)?;
    source_exponent(&ctx, n, net.tier(source_tier)?, &rule, Link::Los, net.nakagami(), spec)
}

/// V_n^k: NLOS interference exponent from source tier k (0-based).
pub fn laplace_exponent_nlos(
    n: u32,
    source_tier: usize,
    query: &SinrQuery,
    net: &NetworkConfig,
    spec: &QuadSpec,
) -> Result<f64> {
    check_n(n, query)?;
    let ctx = context(query, net)?;
    let rule = PowerLaw::new(net, source_tier)?.rule(spec)?;
    source_exponent(&ctx, n, net.tier(source_tier)?, &rule, Link::Nlos, net.nakagami(), spec)
}

/// Σ_k (Q_n^k + V_n^k) for n = 1..=N.
pub fn interference_exponents(
    query: &SinrQuery,
    net: &NetworkConfig,
    spec: &QuadSpec,
) -> Result<Vec<f64>> {
    let ctx = context(query, net)?;
    let rules = (0..net.num_tiers())
        .map(|k| PowerLaw::new(net, k)?.rule(spec))
        .collect::<Result<Vec<_>>>()?;
    (1..=query.terms)
        .map(|n| {
            let mut sum = 0.0;
            for (k, rule) in rules.iter().enumerate() {
                let src = &net.tiers()[k];
                sum += source_exponent(&ctx, n, src, rule, Link::Los, net.nakagami(), spec)?;
                sum += source_exponent(&ctx, n, src, rule, Link::Nlos, net.nakagami(), spec)?;
            }
            Ok(sum)
        })
        .collect()
}

/// 1 − Σ_n (−1)^{n+1} C(N, n) e^{−exponent_n}, checked and clamped.
///
/// `rel_err` is the relative accuracy of the exponents. The error they
/// induce is amplified by Σ C(N, n) e^{−E_n} |E_n|; beyond 1e-3 the result
/// carries no useful digits and a cancellation error is raised.
pub(crate) fn alternating_sum(
    op: &'static str,
    n_terms: u32,
    exponents: &[f64],
    rel_err: f64,
) -> Result<f64> {
    let mut s = 0.0;
    let mut amplification = 0.0;
    for (i, &e) in exponents.iter().enumerate() {
        let n = i as u32 + 1;
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        let term = binomial(n_terms, n) * (-e).exp();
        s += sign * term;
        amplification += term * (rel_err * e.abs() + 4.0 * f64::EPSILON);
    }
    let raw = 1.0 - s;
    if !(-1e-8..=1.0 + 1e-8).contains(&raw) || !raw.is_finite() || amplification > 1e-3 {
        return Err(Error::Cancellation { op, raw });
    }
    Ok(raw.clamp(0.0, 1.0))
}

fn noise_exponent(query: &SinrQuery, net: &NetworkConfig, n: u32) -> Result<f64> {
    let t = net.tier(query.serving_tier)?;
    Ok(query.eta * n as f64 * query.threshold * net.noise_power()
        / (t.cutoff * net.serving_gain(query.serving_tier)?))
}

/// O_s^j for a typical active tier-j user.
pub fn sinr_outage(query: &SinrQuery, net: &NetworkConfig, spec: &QuadSpec) -> Result<f64> {
    let interference = interference_exponents(query, net, spec)?;
    let exps = interference
        .iter()
        .enumerate()
        .map(|(i, e)| Ok(e + noise_exponent(query, net, i as u32 + 1)?))
        .collect::<Result<Vec<_>>>()?;
    alternating_sum("sinr_outage", query.terms, &exps, spec.rel_tol)
}

/// Truncation, SINR and total outage of tier j.
pub fn total_outage(query: &SinrQuery, net: &NetworkConfig, spec: &QuadSpec) -> Result<OutageResult> {
    let op = PowerLaw::new(net, query.serving_tier)?.truncation_outage();
    let os = sinr_outage(query, net, spec)?;
    Ok(OutageResult::combine(os, op))
}

/// Single-tier SINR outage from the K = 1 formulas, independent of the multi-tier plumbing.
pub fn single_tier_sinr_outage(
    threshold: f64,
    tier: &TierParams,
    user: &UserAntennaParams,
    max_power: f64,
    noise_power: f64,
    nakagami: u32,
    spec: &QuadSpec,
) -> Result<f64> {
    if nakagami > MAX_NAKAGAMI || nakagami == 0 {
        return Err(Error::argument("single_tier_sinr_outage", "bad Nakagami N"));
    }
    let law = SingleTierLaw::new(tier, max_power);
    let rule = law.rule(spec)?;
    let pmf = directivity_pmf(tier, user);
    let g = tier.bs_main_gain * user.main_gain;
    let eta = eta(nakagami);
    let rho = tier.cutoff;
    let mut exps = Vec::with_capacity(nakagami as usize);
    for n in 1..=nakagami {
        let mut e = eta * n as f64 * threshold * noise_power / (rho * g);
        for (a, b) in pmf.iter() {
            let q = eta * n as f64 * threshold * a / (rho * g);
            let lower_l = (q * rho).powf(-1.0 / tier.alpha_los);
            let lower_n = (q * rho).powf(-1.0 / tier.alpha_nlos);
            e += exponent_term(
                &rule, tier.density, b, q, lower_l, tier.alpha_los, tier.blockage, nakagami,
                Link::Los, spec,
            )?;
            e += exponent_term(
                &rule, tier.density, b, q, lower_n, tier.alpha_nlos, tier.blockage, nakagami,
                Link::Nlos, spec,
            )?;
        }
        exps.push(e);
    }
    alternating_sum("single_tier_sinr_outage", nakagami, &exps, spec.rel_tol)
}
