use crate::error::{Error, Result};
use crate::qom::PowerVector;

/// Euclidean projection onto `{p >= 0, sum p <= budget}`.
///
/// Negatives are clipped first. If the clipped vector already fits it is the
/// answer; otherwise the projection lies on the face `sum p = budget` and is
/// found with the sort-and-threshold rule.
pub fn project_feasible(p_raw: &[f64], budget: f64) -> Result<PowerVector> {
    if !(budget.is_finite() && budget > 0.0) {
        return Err(Error::invalid("budget", format!("must be > 0, got {budget}")));
    }
    if let Some(v) = p_raw.iter().find(|v| !v.is_finite()) {
        return Err(Error::InfeasiblePower(format!("cannot project non-finite entry {v}")));
    }
    PowerVector::new(project_raw(p_raw, budget), budget)
}

pub(crate) fn project_raw(p_raw: &[f64], budget: f64) -> Vec<f64> {
    let clipped: Vec<f64> = p_raw.iter().map(|v| v.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= budget {
        return clipped;
    }
    let mut sorted = clipped.clone();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut threshold = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        cumulative += v;
        let t = (cumulative - budget) / (i + 1) as f64;
        if i + 1 == sorted.len() || sorted[i + 1] <= t {
            threshold = t;
            break;
        }
    }
    let mut projected: Vec<f64> = clipped.iter().map(|v| (v - threshold).max(0.0)).collect();
    // Rounding in the threshold can leave the sum a few ulps over.
    let total: f64 = projected.iter().sum();
    if total > budget {
        let scale = budget / total;
        projected.iter_mut().for_each(|v| *v *= scale);
    }
    projected
}
