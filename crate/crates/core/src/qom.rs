//! Quality-of-memory model.
//!
//! A robot's exam score `GAE_k` says how much of its memory the server
//! already knows. Uploading `F_k` frames of a robot with score `GAE_k`
//! improves expected accuracy by `(1 - GAE_k) F_k / sum_j |D_j|`. Substituting
//! the Shannon frame count gives the objective
//! `QoM(p) = sum_k lambda_k log2(1 + SINR_k(p))`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelState, RadioConstants};
use crate::error::{Error, Result};

/// Relative slack allowed on the sum-power constraint.
pub const BUDGET_SLACK: f64 = 1e-9;

/// Per-robot dataset description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    /// `|D_k|`
    pub num_items: usize,
    /// `Z_k`, bits per memory item.
    pub item_volume_bits: f64,
    /// `rho_k`
    pub pilot_ratio: f64,
}

impl DatasetMeta {
    pub fn validate(&self) -> Result<()> {
        if self.num_items == 0 {
            return Err(Error::invalid("num_items", "must be >= 1"));
        }
        if !(self.item_volume_bits.is_finite() && self.item_volume_bits > 0.0) {
            return Err(Error::invalid("item_volume_bits", format!("must be > 0, got {}", self.item_volume_bits)));
        }
        if !(self.pilot_ratio > 0.0 && self.pilot_ratio <= 1.0) {
            return Err(Error::invalid("pilot_ratio", format!("must lie in (0, 1], got {}", self.pilot_ratio)));
        }
        Ok(())
    }

    /// `|D~_k| = round(rho_k |D_k|)`, at least one item.
    pub fn pilot_size(&self) -> usize {
        pilot_size(self.num_items, self.pilot_ratio)
    }
}

pub(crate) fn pilot_size(num_items: usize, ratio: f64) -> usize {
    ((ratio * num_items as f64).round() as usize).clamp(1, num_items.max(1))
}

pub fn total_items(metas: &[DatasetMeta]) -> usize {
    metas.iter().map(|m| m.num_items).sum()
}

/// `eta_k = |D_k| / sum_j |D_j|`, the share of questions coming from robot `k`.
pub fn question_shares(metas: &[DatasetMeta]) -> Vec<f64> {
    let total = total_items(metas) as f64;
    metas.iter().map(|m| m.num_items as f64 / total).collect()
}

/// A transmit power allocation together with the budget it must respect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerVector {
    powers: Vec<f64>,
    budget: f64,
}

impl PowerVector {
    pub fn new(powers: Vec<f64>, budget: f64) -> Result<Self> {
        if !(budget.is_finite() && budget > 0.0) {
            return Err(Error::invalid("budget", format!("must be > 0, got {budget}")));
        }
        if let Some((k, p)) = powers.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InfeasiblePower(format!("p[{k}] = {p}")));
        }
        let sum: f64 = powers.iter().sum();
        if sum > budget * (1.0 + BUDGET_SLACK) {
            return Err(Error::InfeasiblePower(format!("total {sum} W exceeds budget {budget} W")));
        }
        Ok(Self { powers, budget })
    }

    pub fn zeros(k: usize, budget: f64) -> Result<Self> {
        Self::new(vec![0.0; k], budget)
    }

    pub fn uniform(k: usize, budget: f64) -> Result<Self> {
        if k == 0 {
            return Self::new(Vec::new(), budget);
        }
        Self::new(vec![budget / k as f64; k], budget)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.powers
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.powers
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.powers.iter().sum()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.powers[k]
    }
}

/// Weights of the objective plus the inputs that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QomParams {
    pub lambda: Vec<f64>,
    /// `T~ = T - Delta T`
    pub effective_time_s: f64,
    pub gae_scores: Vec<f64>,
}

impl QomParams {
    pub fn num_robots(&self) -> usize {
        self.lambda.len()
    }

    pub fn all_zero(&self) -> bool {
        self.lambda.iter().all(|l| *l == 0.0)
    }
}

/// Continuous Shannon frame count `T B log2(1 + SINR_k) / Z_k`, unclamped.
/// This is the quantity inside the objective.
pub fn frames_capacity(
    state: &ChannelState,
    p: &PowerVector,
    meta: &DatasetMeta,
    noise_power_w: f64,
    time_s: f64,
    bandwidth_hz: f64,
    k: usize,
) -> Result<f64> {
    if !(time_s > 0.0) {
        return Err(Error::invalid("time_s", format!("must be > 0, got {time_s}")));
    }
    if !(bandwidth_hz > 0.0) {
        return Err(Error::invalid("bandwidth_hz", format!("must be > 0, got {bandwidth_hz}")));
    }
    let s = crate::channel::sinr(state, p, noise_power_w, k)?;
    Ok(time_s * bandwidth_hz * s.ln_1p() / LN_2 / meta.item_volume_bits)
}

/// Frames robot `k` can actually upload: the capacity clamped to `|D_k|`.
pub fn frames_uploaded(
    state: &ChannelState,
    p: &PowerVector,
    meta: &DatasetMeta,
    noise_power_w: f64,
    time_s: f64,
    bandwidth_hz: f64,
    k: usize,
) -> Result<f64> {
    Ok(frames_capacity(state, p, meta, noise_power_w, time_s, bandwidth_hz, k)?.min(meta.num_items as f64))
}

/// Pilot-phase duration `Delta T`.
///
/// Every robot sends its `|D~_k|` pilot items at the same time with equal
/// power `P_sum / K`; the phase lasts as long as the slowest robot.
pub fn pilot_overhead(
    state: &ChannelState,
    metas: &[DatasetMeta],
    constants: &RadioConstants,
    p_sum: f64,
) -> Result<f64> {
    state.check_len(metas.len(), "dataset list")?;
    if !(p_sum > 0.0) {
        return Err(Error::invalid("p_sum", format!("must be > 0, got {p_sum}")));
    }
    let k_count = state.num_robots();
    let equal = vec![p_sum / k_count as f64; k_count];
    let mut worst: f64 = 0.0;
    for (k, meta) in metas.iter().enumerate() {
        meta.validate().map_err(|e| e.for_robot(k))?;
        let rate = constants.bandwidth_hz * state.sinr_raw(k, &equal, constants.noise_power_w).ln_1p() / LN_2;
        let payload = meta.item_volume_bits * meta.pilot_size() as f64;
        worst = worst.max(payload / rate);
    }
    Ok(worst)
}

/// `T~ = T - Delta T`, failing when the pilot phase eats the whole budget.
pub fn effective_time(time_budget_s: f64, overhead_s: f64) -> Result<f64> {
    if !(overhead_s < time_budget_s) {
        return Err(Error::InfeasiblePilot { overhead_s, budget_s: time_budget_s });
    }
    Ok(time_budget_s - overhead_s)
}

/// `lambda_k = (1 - GAE_k) T~ B / (Z_k sum_j |D_j|)`.
pub fn qom_weights(gae: &[f64], metas: &[DatasetMeta], effective_time_s: f64, bandwidth_hz: f64) -> Result<QomParams> {
    if gae.len() != metas.len() {
        return Err(Error::DimensionMismatch(format!("{} scores for {} datasets", gae.len(), metas.len())));
    }
    if !(effective_time_s > 0.0) {
        return Err(Error::invalid("effective_time_s", format!("must be > 0, got {effective_time_s}")));
    }
    if !(bandwidth_hz > 0.0) {
        return Err(Error::invalid("bandwidth_hz", format!("must be > 0, got {bandwidth_hz}")));
    }
    if let Some((k, g)) = gae.iter().enumerate().find(|(_, g)| !(0.0..=1.0).contains(*g)) {
        return Err(Error::invalid("gae", format!("score {g} of robot {k} is outside [0, 1]")));
    }
    for (k, m) in metas.iter().enumerate() {
        m.validate().map_err(|e| e.for_robot(k))?;
    }
    let total = total_items(metas) as f64;
    let lambda = gae
        .iter()
        .zip(metas)
        .map(|(g, m)| (1.0 - g) * effective_time_s * bandwidth_hz / (m.item_volume_bits * total))
        .collect();
    Ok(QomParams { lambda, effective_time_s, gae_scores: gae.to_vec() })
}

/// Weighted log-rate terms `Theta_k = weight_k log2(1 + SINR_k)`.
pub(crate) fn weighted_terms(weights: &[f64], state: &ChannelState, powers: &[f64], noise: f64) -> Vec<f64> {
    (0..state.num_robots())
        .map(|k| {
            if weights[k] == 0.0 {
                0.0
            } else {
                weights[k] * state.sinr_raw(k, powers, noise).ln_1p() / LN_2
            }
        })
        .collect()
}

pub(crate) fn weighted_objective(weights: &[f64], state: &ChannelState, powers: &[f64], noise: f64) -> f64 {
    weighted_terms(weights, state, powers, noise).iter().sum()
}

/// Individual `Theta_k(p)` terms.
pub fn qom_terms(params: &QomParams, state: &ChannelState, p: &PowerVector, noise_power_w: f64) -> Result<Vec<f64>> {
    state.check_len(params.num_robots(), "weight vector")?;
    state.check_len(p.len(), "power vector")?;
    Ok(weighted_terms(&params.lambda, state, p.as_slice(), noise_power_w))
}

pub fn qom_objective(params: &QomParams, state: &ChannelState, p: &PowerVector, noise_power_w: f64) -> Result<f64> {
    Ok(qom_terms(params, state, p, noise_power_w)?.iter().sum())
}

/// Accuracy predicted from frame counts:
/// `Psi[M0] + sum_k (1 - GAE_k) F_k / sum_j |D_j|`, clamped to `[0, 1]`.
pub fn accuracy_estimate(params: &QomParams, frames: &[f64], metas: &[DatasetMeta], base_accuracy: f64) -> Result<f64> {
    if frames.len() != metas.len() || params.gae_scores.len() != metas.len() {
        return Err(Error::DimensionMismatch("frames, scores and datasets must have equal length".into()));
    }
    let total = total_items(metas) as f64;
    let gain: f64 = params.gae_scores.iter().zip(frames).map(|(g, f)| (1.0 - g) * f / total).sum();
    Ok((base_accuracy + gain).clamp(0.0, 1.0))
}
