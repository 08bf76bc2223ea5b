//! Power allocation for the QoM objective.
//!
//! [`solve_weighted`] runs the minorize-maximize loop: each outer step fixes
//! an anchor, maximizes the concave surrogate from [`surrogate`] over the
//! feasible set with projected gradient ascent ([`solve_inner`]), and moves
//! the anchor to the result. [`waterfill`] is the closed form for
//! interference-free channels.

mod projection;
mod surrogate;
mod waterfill;

use serde::{Deserialize, Serialize};

pub use projection::project_feasible;
pub(crate) use projection::project_raw;
pub use surrogate::{objective_gradient, surrogate_gradient, surrogate_objective, surrogate_value, SurrogateContext};
pub use waterfill::{waterfill, waterfill_weights, WaterfillSolution, WaterfillStatus, DEFAULT_WATERFILL_TOL};

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::qom::{self, PowerVector, QomParams, BUDGET_SLACK};

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
/// Relative slack when auditing outer ascent.
pub const ASCENT_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub outer_tol: f64,
    pub max_outer: usize,
    /// Starting point; uniform split when absent.
    #[serde(skip)]
    pub start: Option<PowerVector>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { inner_tol: 1e-8, inner_max_iter: 5000, outer_tol: 1e-7, max_outer: 200, start: None }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.inner_tol > 0.0) {
            return Err(Error::invalid("inner_tol", "must be > 0"));
        }
        if !(self.outer_tol > 0.0) {
            return Err(Error::invalid("outer_tol", "must be > 0"));
        }
        if self.inner_max_iter == 0 || self.max_outer == 0 {
            return Err(Error::invalid("max_iter", "iteration limits must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    /// The true objective dropped beyond rounding slack; the last ascending iterate is kept.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerStatus {
    Converged,
    MaxIterations,
    /// The line search found no ascent step. At the anchor this means the
    /// anchor is already optimal to rounding precision.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub powers: PowerVector,
    pub surrogate: f64,
    pub iterations: usize,
    pub status: InnerStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub powers: PowerVector,
    pub objective: f64,
    pub surrogate: f64,
}

#[derive(Debug, Clone)]
pub struct SolveTrace {
    /// `p^[0], p^[1], ...` with the true and surrogate objectives; the
    /// surrogate entry of `p^[0]` is its true value.
    pub iterates: Vec<Iterate>,
    pub stop_reason: StopReason,
    /// Inner iterations spent in each outer step.
    pub inner_iterations: Vec<usize>,
}

impl SolveTrace {
    pub fn last(&self) -> &Iterate {
        self.iterates.last().expect("trace holds the starting point")
    }

    pub fn powers(&self) -> &PowerVector {
        &self.last().powers
    }

    pub fn objective(&self) -> f64 {
        self.last().objective
    }

    pub fn outer_iterations(&self) -> usize {
        self.inner_iterations.len()
    }

    pub fn total_inner_iterations(&self) -> usize {
        self.inner_iterations.iter().sum()
    }

    pub fn objectives(&self) -> impl Iterator<Item = f64> + '_ {
        self.iterates.iter().map(|it| it.objective)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn stationarity(p: &[f64], grad: &[f64], budget: f64) -> f64 {
    // Projected-gradient step of unit length in the scaled variable p / budget.
    let unit = budget * budget;
    let probe: Vec<f64> = p.iter().zip(grad).map(|(x, g)| x + unit * g).collect();
    let moved = project_raw(&probe, budget);
    moved.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / budget
}

/// Maximizes the surrogate in `ctx` over `{p >= 0, sum p <= budget}`, starting at the anchor.
///
/// Projected gradient ascent with a Barzilai-Borwein trial step and Armijo
/// halving. Stops once the projected-gradient norm (in units of the budget)
/// is at most `tol * (1 + |objective|)`.
pub fn solve_inner(ctx: &SurrogateContext<'_>, budget: f64, tol: f64, max_iter: usize) -> Result<InnerSolution> {
    if !(budget.is_finite() && budget > 0.0) {
        return Err(Error::invalid("budget", format!("must be > 0, got {budget}")));
    }
    if ctx.anchor.total() > budget * (1.0 + BUDGET_SLACK) {
        return Err(Error::InfeasiblePower(format!("anchor spends {} W of {budget} W", ctx.anchor.total())));
    }
    let unit = budget * budget;
    let mut p = ctx.anchor.as_slice().to_vec();
    let mut value = ctx.total(&p);
    let mut grad = ctx.gradient_raw(&p);
    let mut previous: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut step = unit;
    let mut status = InnerStatus::MaxIterations;
    let mut iterations = 0;

    while iterations < max_iter {
        if stationarity(&p, &grad, budget) <= tol * (1.0 + value.abs()) {
            status = InnerStatus::Converged;
            break;
        }
        if let Some((p_prev, g_prev)) = &previous {
            let s: Vec<f64> = p.iter().zip(p_prev).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = grad.iter().zip(g_prev).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            step = if sy < 0.0 { dot(&s, &s) / -sy } else { 2.0 * step };
            step = step.clamp(1e-12 * unit, 1e12 * unit);
        }

        let mut accepted = None;
        let mut trial = step;
        for _ in 0..MAX_HALVINGS {
            let raw: Vec<f64> = p.iter().zip(&grad).map(|(x, g)| x + trial * g).collect();
            let q = project_raw(&raw, budget);
            let direction: Vec<f64> = q.iter().zip(&p).map(|(a, b)| a - b).collect();
            let predicted = dot(&grad, &direction);
            if !(predicted > 0.0) {
                break;
            }
            let candidate = ctx.total(&q);
            if candidate >= value + ARMIJO_C * predicted {
                accepted = Some((q, candidate, trial));
                break;
            }
            trial *= 0.5;
        }
        let Some((q, candidate, used)) = accepted else {
            status = InnerStatus::Stalled;
            break;
        };
        iterations += 1;
        step = used;
        let new_grad = ctx.gradient_raw(&q);
        previous = Some((std::mem::replace(&mut p, q), std::mem::replace(&mut grad, new_grad)));
        value = candidate;
    }

    Ok(InnerSolution { powers: PowerVector::new(p, budget)?, surrogate: value, iterations, status })
}

/// The outer minorize-maximize loop for an arbitrary nonnegative weight vector.
pub fn solve_weighted(
    weights: &[f64],
    state: &ChannelState,
    budget: f64,
    noise_power_w: f64,
    opts: &SolverOptions,
) -> Result<SolveTrace> {
    opts.validate()?;
    state.check_len(weights.len(), "weight vector")?;
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::invalid("weights", format!("must be finite and >= 0, got {w}")));
    }
    let k = state.num_robots();
    let start = match &opts.start {
        Some(p) => {
            state.check_len(p.len(), "start point")?;
            if p.total() > budget * (1.0 + BUDGET_SLACK) {
                return Err(Error::InfeasiblePower(format!("start spends {} W of {budget} W", p.total())));
            }
            PowerVector::new(p.as_slice().to_vec(), budget)?
        }
        None => PowerVector::uniform(k, budget)?,
    };

    let start_value = qom::weighted_objective(weights, state, start.as_slice(), noise_power_w);
    let mut iterates = vec![Iterate { powers: start, objective: start_value, surrogate: start_value }];
    let mut inner_iterations = Vec::new();
    let mut stop_reason = StopReason::MaxIterations;

    for _ in 0..opts.max_outer {
        let current = iterates.last().expect("nonempty");
        let previous_value = current.objective;
        let ctx = SurrogateContext::with_weights(weights, state, current.powers.clone(), noise_power_w)?;
        let inner = solve_inner(&ctx, budget, opts.inner_tol, opts.inner_max_iter)?;
        inner_iterations.push(inner.iterations);
        let value = qom::weighted_objective(weights, state, inner.powers.as_slice(), noise_power_w);

        if value < previous_value - ASCENT_SLACK * (1.0 + previous_value.abs()) {
            log::warn!("outer ascent broke: {value} after {previous_value}");
            stop_reason = StopReason::Stalled;
            break;
        }
        iterates.push(Iterate { powers: inner.powers, objective: value, surrogate: inner.surrogate });
        if (value - previous_value).abs() <= opts.outer_tol * (1.0 + value.abs()) {
            stop_reason = StopReason::Converged;
            break;
        }
    }
    Ok(SolveTrace { iterates, stop_reason, inner_iterations })
}

/// Maximizes `QoM(p)` for the weights in `params`.
pub fn solve_mcpa(
    params: &QomParams,
    state: &ChannelState,
    budget: f64,
    noise_power_w: f64,
    opts: &SolverOptions,
) -> Result<SolveTrace> {
    solve_weighted(&params.lambda, state, budget, noise_power_w, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIGMA2: f64 = 1e-13;

    fn two_user() -> ChannelState {
        ChannelState::new(vec![2e-9, 1e-9], vec![vec![2e-9, 3e-11], vec![5e-11, 1e-9]]).unwrap()
    }

    #[test]
    fn single_user_takes_budget() {
        let state = ChannelState::orthogonal(vec![1e-9]).unwrap();
        let trace = solve_weighted(&[0.3], &state, 0.2, SIGMA2, &SolverOptions::default()).unwrap();
        assert!((trace.powers().get(0) - 0.2).abs() < 1e-9);
    }

    #[test]
    fn zero_weights_keep_start() {
        let state = two_user();
        let trace = solve_weighted(&[0.0, 0.0], &state, 0.2, SIGMA2, &SolverOptions::default()).unwrap();
        assert_eq!(trace.stop_reason, StopReason::Converged);
        assert_eq!(trace.outer_iterations(), 1);
        assert_eq!(trace.objective(), 0.0);
        assert_eq!(trace.powers().as_slice(), &[0.1, 0.1]);
    }

    #[test]
    fn orthogonal_matches_waterfill() {
        let gains = vec![1e-9, 4e-10, 2.5e-9, 8e-11];
        let weights = [0.4, 0.1, 0.25, 0.3];
        let state = ChannelState::orthogonal(gains.clone()).unwrap();
        let trace = solve_weighted(&weights, &state, 0.2, SIGMA2, &SolverOptions::default()).unwrap();
        let wf = waterfill_weights(&weights, &gains, SIGMA2, 0.2, DEFAULT_WATERFILL_TOL).unwrap();
        for (a, b) in trace.powers().as_slice().iter().zip(wf.powers.as_slice()) {
            assert!((a - b).abs() <= 1e-3 * 0.2, "{a} vs {b}");
        }
    }

    #[test]
    fn ascent_on_interference_instance() {
        let state = two_user();
        let trace = solve_weighted(&[0.5, 0.2], &state, 0.2, SIGMA2, &SolverOptions::default()).unwrap();
        let values: Vec<f64> = trace.objectives().collect();
        assert!(values.windows(2).all(|w| w[1] >= w[0] - ASCENT_SLACK * (1.0 + w[0].abs())));
        assert_eq!(trace.stop_reason, StopReason::Converged);
    }

    #[test]
    fn infeasible_start_rejected() {
        let state = two_user();
        let opts = SolverOptions { start: Some(PowerVector::new(vec![0.2, 0.2], 0.4).unwrap()), ..Default::default() };
        assert!(matches!(solve_weighted(&[1.0, 1.0], &state, 0.2, SIGMA2, &opts), Err(Error::InfeasiblePower(_))));
    }
}
