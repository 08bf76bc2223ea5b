use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use super::config::{Backend, Config};
use super::world::{build_world, World};
use crate::baselines::{self, AllocationInput, BaselineKind, BaselineSpec};
use crate::channel::{self, ChannelState, RadioConstants, RobotGeometry};
use crate::error::{Error, Result};
use crate::gae::{self, Answerer, GaeReport, GaeSettings, Memory, QaPair, Questioner, RemoteBackend, SyntheticOracle};
use crate::parallel::{self, Execution};
use crate::qom::{self, DatasetMeta, PowerVector, QomParams};
use crate::solver;

/// An allocation rule the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Mcpa,
    Baseline(BaselineKind),
    /// The MM solver on the configured `custom_weights`.
    Custom,
}

impl Method {
    /// MCPA and the five comparison allocators.
    pub const DEFAULT: [Method; 6] = [
        Method::Mcpa,
        Method::Baseline(BaselineKind::MaxRate),
        Method::Baseline(BaselineKind::MaxCov),
        Method::Baseline(BaselineKind::Fairness),
        Method::Baseline(BaselineKind::Greedy),
        Method::Baseline(BaselineKind::Remember),
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Mcpa => "mcpa",
            Method::Baseline(kind) => kind.name(),
            Method::Custom => "custom",
        }
    }

    /// Comma-separated names, e.g. `mcpa,max_rate,remember`.
    pub fn parse_list(list: &str) -> Result<Vec<Method>> {
        let methods: Vec<Method> =
            list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
        if methods.is_empty() {
            return Err(Error::invalid("methods", "empty method list"));
        }
        Ok(methods)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mcpa" => Ok(Method::Mcpa),
            "custom" => Ok(Method::Custom),
            other => other.parse().map(Method::Baseline).map_err(|_| {
                Error::invalid("methods", format!("unknown method '{s}'; expected mcpa, custom or a baseline name"))
            }),
        }
    }
}

/// A validated configuration in linear units.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: Config,
    pub radio: RadioConstants,
    pub meta: DatasetMeta,
    pub budget_w: f64,
}

pub fn build_scenario(config: &Config) -> Result<Scenario> {
    config.validate()?;
    Ok(Scenario { config: config.clone(), radio: config.radio(), meta: config.dataset_meta(), budget_w: config.power_budget_w() })
}

impl Scenario {
    pub fn num_robots(&self) -> usize {
        self.config.num_robots
    }

    pub fn with_budget_mw(&self, mw: f64) -> Result<Scenario> {
        build_scenario(&Config { power_budget_mw: mw, ..self.config.clone() })
    }

    pub fn p_sum_mw(&self) -> f64 {
        self.config.power_budget_mw
    }
}

/// Question writer and answerer used for the exam.
#[derive(Clone)]
pub struct GaeBackend {
    pub questioner: Arc<dyn Questioner>,
    pub answerer: Arc<dyn Answerer>,
}

impl fmt::Debug for GaeBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("GaeBackend")
    }
}

impl GaeBackend {
    pub fn synthetic() -> Self {
        Self { questioner: Arc::new(SyntheticOracle), answerer: Arc::new(SyntheticOracle) }
    }

    pub fn for_scenario(scenario: &Scenario) -> Result<Self> {
        match scenario.config.backend {
            Backend::Synthetic => Ok(Self::synthetic()),
            Backend::Remote => {
                let remote = Arc::new(RemoteBackend::new(scenario.config.remote.clone())?);
                Ok(Self { questioner: remote.clone(), answerer: remote })
            }
        }
    }
}

/// Everything shared by all methods for one seed.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub seed: u64,
    pub world: World,
    pub state: ChannelState,
    pub metas: Vec<DatasetMeta>,
    pub gae: GaeReport,
    pub pilot_overhead_s: f64,
    pub params: QomParams,
    pub ground_truth: Vec<QaPair>,
    pub base_accuracy: f64,
}

/// Fraction of `questions` the synthetic oracle answers correctly from `memory`.
pub fn oracle_accuracy(questions: &[QaPair], memory: &Memory<'_>) -> Result<f64> {
    if questions.is_empty() {
        return Ok(1.0);
    }
    let mut correct = 0usize;
    for qa in questions {
        if gae::grade(&qa.expected, &SyntheticOracle.answer(&qa.question, memory)?) {
            correct += 1;
        }
    }
    Ok(correct as f64 / questions.len() as f64)
}

/// Draws the world and channel, runs the exam, and derives the QoM weights.
pub fn prepare_run(scenario: &Scenario, seed: u64, backend: &GaeBackend, gae_execution: Execution) -> Result<PreparedRun> {
    let world = build_world(&scenario.config, seed)?;
    let geometry = RobotGeometry::new(world.distances_m.clone(), scenario.config.server_height_m);
    let state = channel::draw_channels(&scenario.radio, &geometry, seed)?;
    let metas = vec![scenario.meta; scenario.num_robots()];

    let settings = GaeSettings {
        pilot_ratio: scenario.config.pilot_ratio,
        questions_per_robot: scenario.config.questions_per_robot,
        seed,
        execution: gae_execution,
    };
    let base = world.base_memory();
    let report = gae::run_gae(&world.datasets, &base, &settings, backend.questioner.as_ref(), backend.answerer.as_ref())?;

    let overhead = qom::pilot_overhead(&state, &metas, &scenario.radio, scenario.budget_w)?;
    let effective = qom::effective_time(scenario.config.time_budget_s, overhead)?;
    let params = qom::qom_weights(&report.scores, &metas, effective, scenario.radio.bandwidth_hz)?;
    let ground_truth = world.ground_truth();
    let base_accuracy = oracle_accuracy(&ground_truth, &base)?;
    Ok(PreparedRun {
        seed,
        world,
        state,
        metas,
        gae: report,
        pilot_overhead_s: overhead,
        params,
        ground_truth,
        base_accuracy,
    })
}

/// Outcome of one method on one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub method: Method,
    pub seed: u64,
    pub p_sum_mw: f64,
    pub eqa_accuracy: f64,
    pub qom: f64,
    pub sum_rate_mbps: f64,
    pub connected_drones: usize,
    pub solver_iters: usize,
    pub wall_ms: f64,
    pub powers_w: Vec<f64>,
    /// Whole frames uploaded per robot.
    pub frames: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Record wall-clock time per allocation; off by default so output is reproducible.
    pub timing: bool,
}

/// Powers chosen by `method`, plus the solver iteration count.
pub fn allocate(scenario: &Scenario, prepared: &PreparedRun, method: Method) -> Result<(PowerVector, usize)> {
    let noise = scenario.radio.noise_power_w;
    let budget = scenario.budget_w;
    let opts = &scenario.config.solver;
    match method {
        Method::Mcpa => {
            let trace = solver::solve_mcpa(&prepared.params, &prepared.state, budget, noise, opts)?;
            Ok((trace.powers().clone(), trace.outer_iterations()))
        }
        Method::Custom => {
            let weights = scenario
                .config
                .custom_weights
                .as_ref()
                .ok_or_else(|| Error::invalid("custom_weights", "the custom method needs custom_weights in the config"))?;
            let trace = solver::solve_weighted(weights, &prepared.state, budget, noise, opts)?;
            Ok((trace.powers().clone(), trace.outer_iterations()))
        }
        Method::Baseline(kind) => {
            let spec = BaselineSpec { kind, options: scenario.config.baselines.clone() };
            let input = AllocationInput {
                state: &prepared.state,
                gae: &prepared.gae.scores,
                metas: &prepared.metas,
                budget,
                noise_power_w: noise,
                effective_time_s: prepared.params.effective_time_s,
                bandwidth_hz: scenario.radio.bandwidth_hz,
            };
            let a = baselines::allocate(&spec, &input, opts)?;
            Ok((a.powers, a.solver_iters))
        }
    }
}

/// Applies an allocation: uploads whole frames, grades the ground truth, and collects metrics.
pub fn evaluate(
    scenario: &Scenario,
    prepared: &PreparedRun,
    method: Method,
    powers: &PowerVector,
    solver_iters: usize,
) -> Result<RunMetrics> {
    let noise = scenario.radio.noise_power_w;
    let bandwidth = scenario.radio.bandwidth_hz;
    let effective = prepared.params.effective_time_s;
    let k_count = prepared.state.num_robots();

    let mut frames = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let f = qom::frames_uploaded(&prepared.state, powers, &prepared.metas[k], noise, effective, bandwidth, k)?;
        frames.push(f.floor() as usize);
    }
    let mut memory = prepared.world.base_memory();
    for (k, &f) in frames.iter().enumerate() {
        if f > 0 && !prepared.world.base_robots.contains(&k) {
            memory.push(&prepared.world.datasets[k][..f]);
        }
    }
    let eqa_accuracy = oracle_accuracy(&prepared.ground_truth, &memory)?;
    let qom_value = qom::qom_objective(&prepared.params, &prepared.state, powers, noise)?;
    let sum_rate = channel::sum_rate_bps(&prepared.state, powers, noise, bandwidth)?;
    let connected = frames.iter().zip(&prepared.metas).filter(|(f, m)| 2 * **f > m.num_items).count();

    Ok(RunMetrics {
        method,
        seed: prepared.seed,
        p_sum_mw: scenario.p_sum_mw(),
        eqa_accuracy,
        qom: qom_value,
        sum_rate_mbps: sum_rate / 1e6,
        connected_drones: connected,
        solver_iters,
        wall_ms: 0.0,
        powers_w: powers.as_slice().to_vec(),
        frames,
    })
}

pub fn run_prepared(scenario: &Scenario, prepared: &PreparedRun, method: Method, opts: RunOptions) -> Result<RunMetrics> {
    let start = Instant::now();
    let (powers, iters) = allocate(scenario, prepared, method)?;
    let elapsed = start.elapsed();
    let mut metrics = evaluate(scenario, prepared, method, &powers, iters)?;
    if opts.timing {
        metrics.wall_ms = elapsed.as_secs_f64() * 1e3;
    }
    Ok(metrics)
}

/// One method on one seed, from scratch.
pub fn run_once(scenario: &Scenario, method: Method, seed: u64, backend: &GaeBackend) -> Result<RunMetrics> {
    let prepared = prepare_run(scenario, seed, backend, Execution::Auto)?;
    run_prepared(scenario, &prepared, method, RunOptions::default())
}

/// A failed (method, seed) cell, kept in the table so the campaign can go on.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub method: Method,
    pub seed: u64,
    pub p_sum_mw: f64,
    pub kind: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunRecord {
    Ok(RunMetrics),
    Failed(RunFailure),
}

impl RunRecord {
    pub fn method(&self) -> Method {
        match self {
            RunRecord::Ok(m) => m.method,
            RunRecord::Failed(f) => f.method,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            RunRecord::Ok(m) => m.seed,
            RunRecord::Failed(f) => f.seed,
        }
    }

    pub fn metrics(&self) -> Option<&RunMetrics> {
        match self {
            RunRecord::Ok(m) => Some(m),
            RunRecord::Failed(_) => None,
        }
    }
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stat {
    pub mean: f64,
    pub std_err: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len();
        if n == 0 {
            return Stat { mean: f64::NAN, std_err: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Stat { mean, std_err: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Stat { mean, std_err: (var / n as f64).sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub method: Method,
    pub p_sum_mw: f64,
    pub runs: usize,
    pub failures: usize,
    pub eqa_accuracy: Stat,
    pub qom: Stat,
    pub sum_rate_mbps: Stat,
    pub connected_drones: Stat,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CampaignOptions {
    pub execution: Execution,
    pub run: RunOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    pub p_sum_mw: f64,
    pub methods: Vec<Method>,
    /// Seed-major, then in the order methods were given.
    pub rows: Vec<RunRecord>,
}

impl Campaign {
    pub fn aggregate(&self, method: Method) -> Aggregate {
        let ok: Vec<&RunMetrics> =
            self.rows.iter().filter(|r| r.method() == method).filter_map(RunRecord::metrics).collect();
        let failures = self.rows.iter().filter(|r| r.method() == method && r.metrics().is_none()).count();
        let col = |f: fn(&RunMetrics) -> f64| Stat::of(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
        Aggregate {
            method,
            p_sum_mw: self.p_sum_mw,
            runs: ok.len(),
            failures,
            eqa_accuracy: col(|m| m.eqa_accuracy),
            qom: col(|m| m.qom),
            sum_rate_mbps: col(|m| m.sum_rate_mbps),
            connected_drones: col(|m| m.connected_drones as f64),
        }
    }

    pub fn aggregates(&self) -> Vec<Aggregate> {
        self.methods.iter().map(|&m| self.aggregate(m)).collect()
    }
}

/// Runs every method on seeds `base_seed + i`, `i < num_seeds`. Seeds run in
/// parallel under `opts.execution`; the result does not depend on it.
pub fn run_campaign(
    scenario: &Scenario,
    methods: &[Method],
    num_seeds: usize,
    backend: &GaeBackend,
    opts: CampaignOptions,
) -> Result<Campaign> {
    if num_seeds == 0 {
        return Err(Error::invalid("num_seeds", "must be >= 1"));
    }
    if methods.is_empty() {
        return Err(Error::invalid("methods", "empty method list"));
    }
    let seeds: Vec<u64> = (0..num_seeds as u64).map(|i| scenario.config.base_seed.wrapping_add(i)).collect();
    let per_seed = parallel::map(&seeds, opts.execution, |&seed| {
        let failed = |method: Method, e: &Error| {
            RunRecord::Failed(RunFailure {
                method,
                seed,
                p_sum_mw: scenario.p_sum_mw(),
                kind: e.kind(),
                message: e.to_string(),
            })
        };
        match prepare_run(scenario, seed, backend, Execution::Sequential) {
            Ok(prepared) => methods
                .iter()
                .map(|&m| match run_prepared(scenario, &prepared, m, opts.run) {
                    Ok(metrics) => RunRecord::Ok(metrics),
                    Err(e) => {
                        log::warn!("seed {seed} method {m}: {e}");
                        failed(m, &e)
                    }
                })
                .collect::<Vec<_>>(),
            Err(e) => {
                log::warn!("seed {seed}: {e}");
                methods.iter().map(|&m| failed(m, &e)).collect()
            }
        }
    });
    Ok(Campaign { p_sum_mw: scenario.p_sum_mw(), methods: methods.to_vec(), rows: per_seed.into_iter().flatten().collect() })
}

/// One campaign per budget (mW), in the given order.
pub fn run_sweep(
    scenario: &Scenario,
    methods: &[Method],
    budgets_mw: &[f64],
    num_seeds: usize,
    backend: &GaeBackend,
    opts: CampaignOptions,
) -> Result<Vec<Campaign>> {
    if budgets_mw.is_empty() {
        return Err(Error::invalid("sweep_mw", "empty sweep"));
    }
    budgets_mw
        .iter()
        .map(|&mw| {
            if !(mw.is_finite() && mw > 0.0) {
                return Err(Error::invalid("sweep_mw", format!("budgets must be > 0, got {mw}")));
            }
            run_campaign(&scenario.with_budget_mw(mw)?, methods, num_seeds, backend, opts)
        })
        .collect()
}

/// Per-robot exam score and the accuracy of `M_k` joined with `M0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaeRow {
    pub robot: usize,
    pub gae: Stat,
    pub accuracy: Stat,
}

/// Exam scores for one seed.
pub fn gae_scores(scenario: &Scenario, seed: u64, backend: &GaeBackend, execution: Execution) -> Result<(World, GaeReport)> {
    let world = build_world(&scenario.config, seed)?;
    let settings = GaeSettings {
        pilot_ratio: scenario.config.pilot_ratio,
        questions_per_robot: scenario.config.questions_per_robot,
        seed,
        execution,
    };
    let report = gae::run_gae(&world.datasets, &world.base_memory(), &settings, backend.questioner.as_ref(), backend.answerer.as_ref())?;
    Ok((world, report))
}

/// The exam-validation table over seeds `base_seed + i`.
pub fn gae_table(scenario: &Scenario, num_seeds: usize, backend: &GaeBackend, execution: Execution) -> Result<Vec<GaeRow>> {
    if num_seeds == 0 {
        return Err(Error::invalid("num_seeds", "must be >= 1"));
    }
    let seeds: Vec<u64> = (0..num_seeds as u64).map(|i| scenario.config.base_seed.wrapping_add(i)).collect();
    let per_seed = parallel::map(&seeds, execution, |&seed| {
        let (world, report) = gae_scores(scenario, seed, backend, Execution::Sequential)?;
        let truth = world.ground_truth();
        let accuracies = (0..world.num_robots())
            .map(|k| oracle_accuracy(&truth, &world.base_memory().with(&world.datasets[k])))
            .collect::<Result<Vec<f64>>>()?;
        Ok::<_, Error>((report.scores, accuracies))
    });
    let per_seed: Vec<(Vec<f64>, Vec<f64>)> = per_seed.into_iter().collect::<Result<_>>()?;
    Ok((0..scenario.num_robots())
        .map(|k| GaeRow {
            robot: k,
            gae: Stat::of(&per_seed.iter().map(|(g, _)| g[k]).collect::<Vec<_>>()),
            accuracy: Stat::of(&per_seed.iter().map(|(_, a)| a[k]).collect::<Vec<_>>()),
        })
        .collect())
}
