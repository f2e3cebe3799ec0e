//! LOS-disc approximation of the SIR outage in dense deployments.
//!
//! Links shorter than R_B are LOS, longer ones are ignored along with noise.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{directivity_pmf, eta, NetworkConfig};
use crate::numerics::{upper_incomplete_gamma, QuadSpec};
use crate::power::{DenseLaw, PowerDistribution};
use crate::sinr::{alternating_sum, SinrQuery};

/// Relative accuracy of the dense exponents (measured against 30-digit evaluation).
const DENSE_EXPONENT_REL_ERR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseSpec {
    /// R_B in meters.
    pub los_radius: f64,
    /// Number of terms L of the fading approximation.
    pub approx_terms: u32,
    /// λ₀ = λ₁πR_B².
    pub relative_density: f64,
    /// Use Γ(−2/α, ηlθa_v/𝒢_j) as the second incomplete gamma for every
    /// source tier, dropping the ρ_o^k/ρ_o^j factor. Identical when K = 1.
    pub drop_cutoff_ratio: bool,
}

impl DenseSpec {
    pub fn new(los_radius: f64, approx_terms: u32, relative_density: f64) -> Result<Self> {
        let s = DenseSpec {
            los_radius,
            approx_terms,
            relative_density,
            drop_cutoff_ratio: false,
        };
        s.validate()?;
        Ok(s)
    }

    /// Builds the spec from R_B, L and the first tier's density.
    pub fn for_network(net: &NetworkConfig, los_radius: f64, approx_terms: u32) -> Result<Self> {
        let lam = net.tier(0)?.density;
        Self::new(los_radius, approx_terms, lam * PI * los_radius * los_radius)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.los_radius > 0.0 && self.los_radius.is_finite()) {
            return Err(Error::config("dense.los_radius", "must be positive"));
        }
        if self.approx_terms < 1 || self.approx_terms > 64 {
            return Err(Error::config("dense.terms", "must lie in 1..=64"));
        }
        if !(self.relative_density > 0.0) {
            return Err(Error::config("dense.relative_density", "must be positive"));
        }
        Ok(())
    }

    /// Checks λ₀ against the first tier's density.
    pub fn check_against(&self, net: &NetworkConfig) -> Result<()> {
        let want = net.tier(0)?.density * PI * self.los_radius * self.los_radius;
        if ((self.relative_density - want) / want).abs() > 1e-9 {
            return Err(Error::config(
                "dense.relative_density",
                format!("{} does not match λ₁πR_B² = {want}", self.relative_density),
            ));
        }
        Ok(())
    }
}

/// Dense-network SIR outage of a tier-j user; the noise power of `net` is ignored.
pub fn dense_sir_outage(
    query: &SinrQuery,
    spec: &DenseSpec,
    net: &NetworkConfig,
    quad: &QuadSpec,
) -> Result<f64> {
    let exps = dense_exponents(query, spec, net, quad)?;
    alternating_sum("dense_sir_outage", spec.approx_terms, &exps, DENSE_EXPONENT_REL_ERR)
}

/// −Σ_k log E[e^{−s l I_k}] for l = 1..=L, each one nonnegative.
pub fn dense_exponents(
    query: &SinrQuery,
    spec: &DenseSpec,
    net: &NetworkConfig,
    quad: &QuadSpec,
) -> Result<Vec<f64>> {
    spec.validate()?;
    spec.check_against(net)?;
    let j = query.serving_tier;
    let serving = net.tier(j)?;
    let big_l = spec.approx_terms;
    let eta_l = eta(big_l);
    let g = net.serving_gain(j)?;
    let alpha = serving.alpha_los;
    let a_exp = -2.0 / alpha;
    let rb_alpha = spec.los_radius.powf(alpha);
    let pmf = directivity_pmf(serving, net.user_antenna());

    let rules = (0..net.num_tiers())
        .map(|k| DenseLaw::new(net, k)?.rule(quad))
        .collect::<Result<Vec<_>>>()?;

    let mut exps = Vec::with_capacity(big_l as usize);
    for l in 1..=big_l {
        let mut total = 0.0;
        for (k, src) in net.tiers().iter().enumerate() {
            let lam0 = src.density * PI * spec.los_radius * spec.los_radius;
            // per-v constants: (s l a_v)^{2/α} b_v and the p-independent Γ
            let mut consts = Vec::with_capacity(4);
            for (a, b) in pmf.iter() {
                if b == 0.0 {
                    continue;
                }
                let sla = eta_l * l as f64 * query.threshold * a / (serving.cutoff * g);
                let upper_arg = if spec.drop_cutoff_ratio {
                    eta_l * l as f64 * query.threshold * a / g
                } else {
                    sla * src.cutoff
                };
                let gamma_hi = upper_incomplete_gamma(a_exp, upper_arg)?;
                consts.push((sla, b * sla.powf(2.0 / alpha), gamma_hi));
            }
            let mut err = None;
            let e = rules[k].expect(|p| {
                let mut s = PI * src.density * (p / src.cutoff).powf(2.0 / alpha) - lam0;
                let pa = p.powf(2.0 / alpha);
                for &(sla, c, gamma_hi) in &consts {
                    match upper_incomplete_gamma(a_exp, sla * p / rb_alpha) {
                        Ok(gl) => s += 2.0 * PI * src.density / alpha * c * pa * (gl - gamma_hi),
                        Err(e) => err = Some(e),
                    }
                }
                s
            });
            if let Some(e) = err {
                return Err(e);
            }
            let scale = lam0.max(1.0);
            if e > 1e-9 * scale {
                return Err(Error::ModelConsistency {
                    op: "dense_sir_outage",
                    reason: format!("exponent {e:e} for tier {} at l = {l} is positive", k + 1),
                });
            }
            total += e;
        }
        exps.push(-total);
    }
    Ok(exps)
}
