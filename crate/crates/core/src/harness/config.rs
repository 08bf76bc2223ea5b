use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineOptions;
use crate::channel::{db_to_linear, dbm_to_watts, RadioConstants};
use crate::error::{Error, Result};
use crate::gae::RemoteConfig;
use crate::qom::DatasetMeta;
use crate::solver::SolverOptions;

pub const DEFAULT_OBJECTS: [&str; 10] = [
    "green_car",
    "blue_car",
    "white_car",
    "purple_car",
    "black_car",
    "fire_truck",
    "yamaha",
    "bus",
    "taxi",
    "traffic_cone",
];

pub const DEFAULT_SWEEP_MW: [f64; 5] = [100.0, 150.0, 200.0, 250.0, 300.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Synthetic,
    Remote,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "synthetic" => Ok(Backend::Synthetic),
            "remote" => Ok(Backend::Remote),
            other => Err(Error::invalid("backend", format!("expected synthetic or remote, got '{other}'"))),
        }
    }
}

/// Where the abnormal objects go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Placement {
    /// Every object goes to a uniformly drawn robot, at a uniform point of
    /// its patrol segment. Any robot passing within the view radius sees it.
    Random,
    /// Robot `k` hovers over its own spot; every frame shows the shared tags
    /// plus `novel_counts[k]` objects nobody else has, taken from the
    /// object list in order.
    Staged {
        novel_counts: Vec<usize>,
        #[serde(default = "default_shared_tags")]
        shared_tags: Vec<String>,
    },
}

fn default_shared_tags() -> Vec<String> {
    vec!["road".into(), "building".into()]
}

/// Which robots' full memories make up `M0`. Robot indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseMemorySpec {
    Random { count: usize },
    Robots { robots: Vec<usize> },
}

/// Trajectory and sensing of the synthetic world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub frame_rate_hz: f64,
    /// Total flown distance per robot.
    pub path_length_m: f64,
    /// Length of the segment each robot patrols back and forth.
    pub patrol_length_m: f64,
    /// A frame shows an object when the robot is this close (planar).
    pub view_radius_m: f64,
    /// Objects sit up to this far to the side of the patrol line.
    pub lateral_offset_m: f64,
    /// Staged layout: hover spots lie within this radius of the origin.
    pub hover_spread_m: f64,
    pub altitude_m: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            frame_rate_hz: 35.0,
            path_length_m: 500.0,
            patrol_length_m: 100.0,
            view_radius_m: 40.0,
            lateral_offset_m: 10.0,
            hover_spread_m: 20.0,
            altitude_m: 30.0,
        }
    }
}

/// The JSON experiment description. Every field has a default; decibel
/// quantities carry `_db` / `_dbm` suffixes and are converted on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub num_robots: usize,
    pub bandwidth_hz: f64,
    pub noise_power_dbm: f64,
    pub time_budget_s: f64,
    pub power_budget_mw: f64,
    pub ref_pathloss_db: f64,
    pub shadow_fading_db: f64,
    pub pathloss_exponent: f64,
    pub num_antennas: usize,
    pub item_volume_bits: f64,
    pub items_per_robot: usize,
    pub distance_min_m: f64,
    pub distance_max_m: f64,
    pub server_height_m: f64,
    pub pilot_ratio: f64,
    pub questions_per_robot: usize,
    pub objects: Vec<String>,
    pub placement: Placement,
    pub base_memory: BaseMemorySpec,
    pub world: WorldConfig,
    pub base_seed: u64,
    pub backend: Backend,
    pub remote: RemoteConfig,
    pub solver: SolverOptions,
    pub baselines: BaselineOptions,
    pub sweep_mw: Vec<f64>,
    /// Per-robot weights for the `custom` method.
    pub custom_weights: Option<Vec<f64>>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            num_robots: 10,
            bandwidth_hz: 10e6,
            noise_power_dbm: -100.0,
            time_budget_s: 600.0,
            power_budget_mw: 200.0,
            ref_pathloss_db: -30.0,
            shadow_fading_db: -20.0,
            pathloss_exponent: 3.0,
            num_antennas: 256,
            item_volume_bits: 1.6e6,
            items_per_robot: 1050,
            distance_min_m: 50.0,
            distance_max_m: 250.0,
            server_height_m: 20.0,
            pilot_ratio: 0.01,
            questions_per_robot: 10,
            objects: DEFAULT_OBJECTS.iter().map(|s| s.to_string()).collect(),
            placement: Placement::Random,
            base_memory: BaseMemorySpec::Random { count: 5 },
            world: WorldConfig::default(),
            base_seed: 0,
            backend: Backend::Synthetic,
            remote: RemoteConfig::default(),
            solver: SolverOptions::default(),
            baselines: BaselineOptions::default(),
            sweep_mw: DEFAULT_SWEEP_MW.to_vec(),
            custom_weights: None,
        }
    }
}

impl Config {
    /// The five-robot layout with novelty counts `[0, 1, 2, 3, 4]` and `M0`
    /// equal to the last robot's memory.
    pub fn staged_five() -> Self {
        Self {
            num_robots: 5,
            placement: Placement::Staged { novel_counts: vec![0, 1, 2, 3, 4], shared_tags: default_shared_tags() },
            base_memory: BaseMemorySpec::Robots { robots: vec![4] },
            questions_per_robot: 600,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Config = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: origin.to_string(),
            message: format!("at `{}`: {}", e.path(), e.inner()),
        })?;
        config.validate().map_err(|e| Error::Config { path: origin.to_string(), message: e.to_string() })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn power_budget_w(&self) -> f64 {
        self.power_budget_mw * 1e-3
    }

    pub fn radio(&self) -> RadioConstants {
        RadioConstants {
            bandwidth_hz: self.bandwidth_hz,
            noise_power_w: dbm_to_watts(self.noise_power_dbm),
            ref_pathloss_linear: db_to_linear(self.ref_pathloss_db),
            shadow_fading_linear: db_to_linear(self.shadow_fading_db),
            pathloss_exponent: self.pathloss_exponent,
            num_antennas: self.num_antennas,
        }
    }

    pub fn dataset_meta(&self) -> DatasetMeta {
        DatasetMeta { num_items: self.items_per_robot, item_volume_bits: self.item_volume_bits, pilot_ratio: self.pilot_ratio }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_robots;
        if k == 0 {
            return Err(Error::invalid("num_robots", "must be >= 1"));
        }
        let positive = [
            ("time_budget_s", self.time_budget_s),
            ("power_budget_mw", self.power_budget_mw),
            ("distance_min_m", self.distance_min_m),
            ("world.frame_rate_hz", self.world.frame_rate_hz),
            ("world.path_length_m", self.world.path_length_m),
            ("world.patrol_length_m", self.world.patrol_length_m),
            ("world.view_radius_m", self.world.view_radius_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.distance_min_m < self.distance_max_m) {
            return Err(Error::invalid("distance_max_m", "must exceed distance_min_m"));
        }
        if !(self.world.lateral_offset_m >= 0.0 && self.world.hover_spread_m >= 0.0) {
            return Err(Error::invalid("world", "offsets must be >= 0"));
        }
        if self.questions_per_robot == 0 {
            return Err(Error::invalid("questions_per_robot", "must be >= 1"));
        }
        if self.objects.is_empty() {
            return Err(Error::invalid("objects", "need at least one object"));
        }
        self.radio().validate()?;
        self.dataset_meta().validate()?;
        self.solver.validate()?;

        match &self.placement {
            Placement::Random => {}
            Placement::Staged { novel_counts, .. } => {
                if novel_counts.len() != k {
                    return Err(Error::invalid("placement.novel_counts", format!("need {k} entries, got {}", novel_counts.len())));
                }
                let total: usize = novel_counts.iter().sum();
                if total > self.objects.len() {
                    return Err(Error::invalid(
                        "placement.novel_counts",
                        format!("{total} novel objects requested but only {} listed", self.objects.len()),
                    ));
                }
            }
        }
        match &self.base_memory {
            BaseMemorySpec::Random { count } if *count > k => {
                return Err(Error::invalid("base_memory.count", format!("{count} exceeds {k} robots")));
            }
            BaseMemorySpec::Robots { robots } => {
                if let Some(r) = robots.iter().find(|&&r| r >= k) {
                    return Err(Error::invalid("base_memory.robots", format!("robot {r} out of range for {k} robots")));
                }
            }
            _ => {}
        }
        if let Some(v) = self.sweep_mw.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::invalid("sweep_mw", format!("budgets must be > 0, got {v}")));
        }
        if let Some(w) = &self.custom_weights {
            if w.len() != k {
                return Err(Error::invalid("custom_weights", format!("need {k} entries, got {}", w.len())));
            }
            if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::invalid("custom_weights", "entries must be finite and >= 0"));
            }
        }
        Ok(())
    }
}
