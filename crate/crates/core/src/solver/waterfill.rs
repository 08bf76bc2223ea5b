use crate::error::{Error, Result};
use crate::qom::{PowerVector, QomParams};

pub const DEFAULT_WATERFILL_TOL: f64 = 1e-10;
const MAX_BISECTIONS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaterfillStatus {
    /// The budget is spent and `water_level` solves the budget equation.
    Filled,
    /// No robot has positive value; the zero vector is returned and the budget is left unspent.
    NoValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillSolution {
    pub powers: PowerVector,
    /// The multiplier `nu` in `p_k = max(0, nu * lambda_k - sigma^2 / H_k)`.
    pub water_level: f64,
    pub status: WaterfillStatus,
}

pub(crate) fn level_powers(weights: &[f64], floors: &[f64], nu: f64) -> Vec<f64> {
    weights.iter().zip(floors).map(|(w, f)| (nu * w - f).max(0.0)).collect()
}

/// Closed-form allocation for interference-free channels.
///
/// `weights` are the per-robot values (`lambda_k`), `gains` the `H_k`. The
/// water level is found by bisection on `nu -> sum_k max(0, nu w_k - sigma^2/H_k)`
/// until the sum is within `tol * budget` of the budget.
pub fn waterfill_weights(weights: &[f64], gains: &[f64], noise_power_w: f64, budget: f64, tol: f64) -> Result<WaterfillSolution> {
    if weights.len() != gains.len() {
        return Err(Error::DimensionMismatch(format!("{} weights for {} gains", weights.len(), gains.len())));
    }
    if !(budget.is_finite() && budget > 0.0) {
        return Err(Error::invalid("budget", format!("must be > 0, got {budget}")));
    }
    if !(noise_power_w > 0.0) {
        return Err(Error::invalid("noise_power_w", "must be > 0"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be > 0"));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::invalid("weights", format!("must be finite and >= 0, got {w}")));
    }
    if let Some(h) = gains.iter().find(|h| !(h.is_finite() && **h >= 0.0)) {
        return Err(Error::invalid("gains", format!("must be finite and >= 0, got {h}")));
    }

    // A robot with no gain can never be active; drop its weight.
    let weights: Vec<f64> = weights.iter().zip(gains).map(|(&w, &h)| if h > 0.0 { w } else { 0.0 }).collect();
    let floors: Vec<f64> = gains.iter().map(|&h| if h > 0.0 { noise_power_w / h } else { 0.0 }).collect();

    let min_weight = weights.iter().copied().filter(|&w| w > 0.0).fold(f64::INFINITY, f64::min);
    if !min_weight.is_finite() {
        return Ok(WaterfillSolution {
            powers: PowerVector::zeros(weights.len(), budget)?,
            water_level: 0.0,
            status: WaterfillStatus::NoValue,
        });
    }

    let total = |nu: f64| level_powers(&weights, &floors, nu).iter().sum::<f64>();
    let active_floor: f64 = floors.iter().zip(&weights).filter(|(_, w)| **w > 0.0).map(|(f, _)| f).sum();
    let mut lo = 0.0;
    let mut hi = (budget + active_floor) / min_weight;
    while total(hi) < budget {
        lo = hi;
        hi *= 2.0;
    }

    let mut nu = hi;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let spent = total(mid);
        if (spent - budget).abs() <= tol * budget {
            nu = mid;
            break;
        }
        if spent < budget {
            lo = mid;
        } else {
            hi = mid;
        }
        nu = hi;
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }

    let mut powers = level_powers(&weights, &floors, nu);
    let spent: f64 = powers.iter().sum();
    if spent > budget {
        let scale = budget / spent;
        powers.iter_mut().for_each(|p| *p *= scale);
    }
    Ok(WaterfillSolution { powers: PowerVector::new(powers, budget)?, water_level: nu, status: WaterfillStatus::Filled })
}

/// [`waterfill_weights`] with the QoM weights `lambda_k` as values.
pub fn waterfill(params: &QomParams, gains: &[f64], noise_power_w: f64, budget: f64, tol: f64) -> Result<WaterfillSolution> {
    waterfill_weights(&params.lambda, gains, noise_power_w, budget, tol)
}
