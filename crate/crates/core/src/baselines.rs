//! Comparison allocators on the same feasible set as the MCPA solver.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::qom::{DatasetMeta, PowerVector};
use crate::solver::{self, SolverOptions};

pub const DEFAULT_FAIRNESS_TOL: f64 = 1e-9;
const FIXED_POINT_TOL: f64 = 1e-13;
const FIXED_POINT_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    MaxRate,
    MaxCov,
    Fairness,
    Greedy,
    Remember,
    Uniform,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 6] = [
        BaselineKind::MaxRate,
        BaselineKind::MaxCov,
        BaselineKind::Fairness,
        BaselineKind::Greedy,
        BaselineKind::Remember,
        BaselineKind::Uniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::MaxRate => "max_rate",
            BaselineKind::MaxCov => "max_cov",
            BaselineKind::Fairness => "fairness",
            BaselineKind::Greedy => "greedy",
            BaselineKind::Remember => "remember",
            BaselineKind::Uniform => "uniform",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm || k.name().replace('_', "") == norm)
            .ok_or_else(|| Error::invalid("baseline", format!("unknown baseline '{s}'")))
    }
}

/// Kind-specific knobs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineOptions {
    /// MaxCov admission rate in bit/s; derived from the datasets when absent.
    pub max_cov_rate_bps: Option<f64>,
    /// Relative width at which the Fairness bisection stops.
    pub fairness_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub kind: BaselineKind,
    #[serde(default)]
    pub options: BaselineOptions,
}

impl BaselineSpec {
    pub fn new(kind: BaselineKind) -> Self {
        Self { kind, options: BaselineOptions::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(r) = self.options.max_cov_rate_bps {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::invalid("max_cov_rate_bps", format!("must be > 0, got {r}")));
            }
        }
        if let Some(t) = self.options.fairness_tol {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::invalid("fairness_tol", format!("must lie in (0, 1), got {t}")));
            }
        }
        Ok(())
    }
}

/// Everything an allocator may look at.
#[derive(Debug, Clone, Copy)]
pub struct AllocationInput<'a> {
    pub state: &'a ChannelState,
    pub gae: &'a [f64],
    pub metas: &'a [DatasetMeta],
    pub budget: f64,
    pub noise_power_w: f64,
    pub effective_time_s: f64,
    pub bandwidth_hz: f64,
}

/// Result of a baseline allocation; `solver_iters` counts outer MM steps and is zero for closed-form rules.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub powers: PowerVector,
    pub solver_iters: usize,
}

pub fn allocate(spec: &BaselineSpec, input: &AllocationInput<'_>, solver_opts: &SolverOptions) -> Result<Allocation> {
    spec.validate()?;
    let k = input.state.num_robots();
    let closed = |powers| Ok(Allocation { powers, solver_iters: 0 });
    match spec.kind {
        BaselineKind::MaxRate => {
            let trace = solver::solve_weighted(&vec![1.0; k], input.state, input.budget, input.noise_power_w, solver_opts)?;
            let solver_iters = trace.outer_iterations();
            Ok(Allocation { powers: trace.powers().clone(), solver_iters })
        }
        BaselineKind::MaxCov => {
            let rate = match spec.options.max_cov_rate_bps {
                Some(r) => r,
                None => half_upload_rate(input.metas, input.effective_time_s)?,
            };
            closed(allocate_max_cov(input.state, input.budget, input.noise_power_w, input.bandwidth_hz, rate)?)
        }
        BaselineKind::Fairness => {
            let tol = spec.options.fairness_tol.unwrap_or(DEFAULT_FAIRNESS_TOL);
            closed(allocate_fairness(input.state, input.budget, input.noise_power_w, tol)?)
        }
        BaselineKind::Greedy => closed(allocate_greedy(
            input.state,
            input.gae,
            input.metas,
            input.budget,
            input.noise_power_w,
            input.effective_time_s,
            input.bandwidth_hz,
        )?),
        BaselineKind::Remember => closed(allocate_remember(k, input.budget)?),
        BaselineKind::Uniform => closed(PowerVector::uniform(k, input.budget)?),
    }
}

/// Sum-log-rate maximization: the MM solver with unit weights.
pub fn allocate_max_rate(state: &ChannelState, budget: f64, noise_power_w: f64, opts: &SolverOptions) -> Result<PowerVector> {
    let trace = solver::solve_weighted(&vec![1.0; state.num_robots()], state, budget, noise_power_w, opts)?;
    Ok(trace.powers().clone())
}

/// Power that lifts robot `k` to `rate_bps` with no interference: `sigma^2 (2^(r/B) - 1) / H_k`.
pub fn required_power(gain: f64, noise_power_w: f64, bandwidth_hz: f64, rate_bps: f64) -> f64 {
    if gain > 0.0 {
        noise_power_w * (rate_bps / bandwidth_hz * std::f64::consts::LN_2).exp_m1() / gain
    } else {
        f64::INFINITY
    }
}

/// Rate at which the largest dataset gets half of its items through in `effective_time_s`.
pub fn half_upload_rate(metas: &[DatasetMeta], effective_time_s: f64) -> Result<f64> {
    if !(effective_time_s > 0.0) {
        return Err(Error::invalid("effective_time_s", "must be > 0"));
    }
    metas
        .iter()
        .map(|m| m.item_volume_bits * m.num_items as f64 / 2.0 / effective_time_s)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))))
        .ok_or_else(|| Error::invalid("metas", "no datasets"))
}

/// Admits robots cheapest-first at exactly their zero-interference required power.
pub fn allocate_max_cov(
    state: &ChannelState,
    budget: f64,
    noise_power_w: f64,
    bandwidth_hz: f64,
    rate_threshold_bps: f64,
) -> Result<PowerVector> {
    if !(rate_threshold_bps.is_finite() && rate_threshold_bps > 0.0) {
        return Err(Error::invalid("rate_threshold_bps", format!("must be > 0, got {rate_threshold_bps}")));
    }
    let need: Vec<f64> =
        state.gains().iter().map(|&h| required_power(h, noise_power_w, bandwidth_hz, rate_threshold_bps)).collect();
    admit_cheapest(&need, budget)
}

pub(crate) fn admit_cheapest(need: &[f64], budget: f64) -> Result<PowerVector> {
    let mut order: Vec<usize> = (0..need.len()).collect();
    order.sort_by(|&a, &b| need[a].total_cmp(&need[b]).then(a.cmp(&b)));
    let mut powers = vec![0.0; need.len()];
    let mut spent = 0.0;
    for k in order {
        if spent + need[k] > budget {
            break;
        }
        powers[k] = need[k];
        spent += need[k];
    }
    PowerVector::new(powers, budget)
}

/// Serves robots by descending novelty `1 - GAE_k` (ties by index), each with
/// the zero-interference power for a full upload in `effective_time_s`,
/// capped by what is left of the budget.
pub fn allocate_greedy(
    state: &ChannelState,
    gae: &[f64],
    metas: &[DatasetMeta],
    budget: f64,
    noise_power_w: f64,
    effective_time_s: f64,
    bandwidth_hz: f64,
) -> Result<PowerVector> {
    state.check_len(gae.len(), "score vector")?;
    state.check_len(metas.len(), "dataset list")?;
    if !(effective_time_s > 0.0) {
        return Err(Error::invalid("effective_time_s", "must be > 0"));
    }
    let mut order: Vec<usize> = (0..gae.len()).collect();
    order.sort_by(|&a, &b| (1.0 - gae[b]).total_cmp(&(1.0 - gae[a])).then(a.cmp(&b)));
    let mut powers = vec![0.0; gae.len()];
    let mut remaining = budget;
    for k in order {
        let rate = metas[k].item_volume_bits * metas[k].num_items as f64 / effective_time_s;
        let give = required_power(state.gain(k), noise_power_w, bandwidth_hz, rate).min(remaining);
        powers[k] = give;
        remaining = (remaining - give).max(0.0);
        if remaining == 0.0 {
            break;
        }
    }
    PowerVector::new(powers, budget)
}

/// No uploads at all: the server keeps its pre-collected memory.
pub fn allocate_remember(num_robots: usize, budget: f64) -> Result<PowerVector> {
    PowerVector::zeros(num_robots, budget)
}

/// Fixed point of `p_k <- gamma (sum_{j != k} I_kj p_j + sigma^2) / H_k` from zero.
/// `None` when the iterates exceed the budget or fail to settle.
fn target_powers(state: &ChannelState, noise_power_w: f64, gamma: f64, budget: f64) -> Option<Vec<f64>> {
    let k = state.num_robots();
    let mut p = vec![0.0; k];
    for _ in 0..FIXED_POINT_MAX_ITER {
        let next: Vec<f64> = (0..k)
            .map(|i| gamma * (state.interference_power(i, &p) + noise_power_w) / state.gain(i))
            .collect();
        let total: f64 = next.iter().sum();
        if !(total <= budget) {
            return None;
        }
        let change = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = next.iter().copied().fold(0.0, f64::max);
        p = next;
        if change <= FIXED_POINT_TOL * scale {
            return Some(p);
        }
    }
    None
}

/// Max-min rate allocation by bisection on a common SINR target.
pub fn allocate_fairness(state: &ChannelState, budget: f64, noise_power_w: f64, tol: f64) -> Result<PowerVector> {
    if !(budget.is_finite() && budget > 0.0) {
        return Err(Error::invalid("budget", format!("must be > 0, got {budget}")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be > 0"));
    }
    if state.gains().iter().any(|&h| !(h > 0.0)) {
        // A robot that cannot be heard pins the minimum rate at zero.
        return PowerVector::zeros(state.num_robots(), budget);
    }
    // Without interference, gamma sum_k sigma^2 / H_k <= budget; interference only lowers it.
    let mut hi = budget / state.gains().iter().map(|h| noise_power_w / h).sum::<f64>();
    if let Some(p) = target_powers(state, noise_power_w, hi, budget) {
        return PowerVector::new(p, budget);
    }
    let mut lo = 0.0;
    let mut best = vec![0.0; state.num_robots()];
    while hi - lo > tol * hi {
        let mid = 0.5 * (lo + hi);
        match target_powers(state, noise_power_w, mid, budget) {
            Some(p) => {
                lo = mid;
                best = p;
            }
            None => hi = mid,
        }
    }
    PowerVector::new(best, budget)
}
