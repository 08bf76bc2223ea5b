use std::f64::consts::LN_2;

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::qom::{PowerVector, QomParams};

/// Data fixing the surrogate `Theta^_k(. | p*)` around an anchor `p*`.
///
/// With `a_k(p) = sum_l I_{k,l} p_l / sigma^2`, `b_k(p)` the same sum
/// without `l = k`, and `c_k = b_k(p*) + 1`, the surrogate is
///
/// ```text
/// Theta^_k(p|p*) = w_k / ln2 * [ ln(a_k(p) + 1) - ln c_k - (b_k(p) + 1) / c_k + 1 ]
/// ```
///
/// The interference log term is replaced by its tangent at `p*`, so the
/// surrogate is concave, lies below `Theta_k`, and touches it (value and
/// gradient) at the anchor.
#[derive(Debug, Clone)]
pub struct SurrogateContext<'a> {
    pub anchor: PowerVector,
    pub weights: &'a [f64],
    pub state: &'a ChannelState,
    pub noise_power_w: f64,
    /// `c_k`
    anchor_level: Vec<f64>,
}

impl<'a> SurrogateContext<'a> {
    pub fn new(params: &'a QomParams, state: &'a ChannelState, anchor: PowerVector, noise_power_w: f64) -> Result<Self> {
        Self::with_weights(&params.lambda, state, anchor, noise_power_w)
    }

    pub fn with_weights(
        weights: &'a [f64],
        state: &'a ChannelState,
        anchor: PowerVector,
        noise_power_w: f64,
    ) -> Result<Self> {
        state.check_len(weights.len(), "weight vector")?;
        state.check_len(anchor.len(), "anchor")?;
        if !(noise_power_w > 0.0) {
            return Err(Error::invalid("noise_power_w", "must be > 0"));
        }
        let anchor_level = (0..state.num_robots())
            .map(|k| state.interference_power(k, anchor.as_slice()) / noise_power_w + 1.0)
            .collect();
        Ok(Self { anchor, weights, state, noise_power_w, anchor_level })
    }

    pub fn num_robots(&self) -> usize {
        self.weights.len()
    }

    /// `Theta^_k(p | p*)`, evaluated without cancellation as
    /// `w/ln2 [ln1p((b - b* + s) / c) - (b - b*) / c]` with `s = H_k p_k / sigma^2`.
    pub(crate) fn term(&self, powers: &[f64], k: usize) -> f64 {
        let w = self.weights[k];
        if w == 0.0 {
            return 0.0;
        }
        let row = self.state.interference_row(k);
        let anchor = self.anchor.as_slice();
        let shift: f64 = (0..powers.len())
            .filter(|&l| l != k)
            .map(|l| row[l] * (powers[l] - anchor[l]))
            .sum::<f64>()
            / self.noise_power_w;
        let own = row[k] * powers[k] / self.noise_power_w;
        let c = self.anchor_level[k];
        w / LN_2 * (((shift + own) / c).ln_1p() - shift / c)
    }

    pub(crate) fn total(&self, powers: &[f64]) -> f64 {
        (0..self.num_robots()).map(|k| self.term(powers, k)).sum()
    }

    pub(crate) fn gradient_raw(&self, powers: &[f64]) -> Vec<f64> {
        let n = self.num_robots();
        let sigma2 = self.noise_power_w;
        let mut grad = vec![0.0; n];
        for k in 0..n {
            let w = self.weights[k];
            if w == 0.0 {
                continue;
            }
            let row = self.state.interference_row(k);
            let total_level = row.iter().zip(powers).map(|(i, p)| i * p).sum::<f64>() / sigma2 + 1.0;
            let scale = w / LN_2 / sigma2;
            for l in 0..n {
                let mut d = row[l] / total_level;
                if l != k {
                    d -= row[l] / self.anchor_level[k];
                }
                grad[l] += scale * d;
            }
        }
        grad
    }
}

pub fn surrogate_value(ctx: &SurrogateContext<'_>, p: &PowerVector, k: usize) -> Result<f64> {
    ctx.state.check_len(p.len(), "power vector")?;
    if k >= ctx.num_robots() {
        return Err(Error::RobotIndex { index: k, count: ctx.num_robots() });
    }
    Ok(ctx.term(p.as_slice(), k))
}

/// `sum_k Theta^_k(p | p*)`.
pub fn surrogate_objective(ctx: &SurrogateContext<'_>, p: &PowerVector) -> Result<f64> {
    ctx.state.check_len(p.len(), "power vector")?;
    Ok(ctx.total(p.as_slice()))
}

/// Analytic gradient of `sum_k Theta^_k(p | p*)` with respect to `p`.
pub fn surrogate_gradient(ctx: &SurrogateContext<'_>, p: &PowerVector) -> Result<Vec<f64>> {
    ctx.state.check_len(p.len(), "power vector")?;
    Ok(ctx.gradient_raw(p.as_slice()))
}

/// Analytic gradient of the true objective `sum_k w_k log2(1 + SINR_k(p))`.
pub fn objective_gradient(weights: &[f64], state: &ChannelState, p: &PowerVector, noise_power_w: f64) -> Result<Vec<f64>> {
    state.check_len(weights.len(), "weight vector")?;
    state.check_len(p.len(), "power vector")?;
    let n = state.num_robots();
    let powers = p.as_slice();
    let mut grad = vec![0.0; n];
    for k in 0..n {
        if weights[k] == 0.0 {
            continue;
        }
        let row = state.interference_row(k);
        let interference = state.interference_power(k, powers) / noise_power_w + 1.0;
        let total = interference + row[k] * powers[k] / noise_power_w;
        let scale = weights[k] / LN_2 / noise_power_w;
        for l in 0..n {
            let mut d = row[l] / total;
            if l != k {
                d -= row[l] / interference;
            }
            grad[l] += scale * d;
        }
    }
    Ok(grad)
}
