use std::collections::BTreeSet;
use std::f64::consts::TAU;

use rand::seq::index;
use rand::Rng;

use super::config::{BaseMemorySpec, Config, Placement};
use crate::error::Result;
use crate::gae::{Expected, Memory, MemoryItem, Pose, QaPair, Question, Template};
use crate::rng::{self, Domain};

#[derive(Debug, Clone, PartialEq)]
pub struct PlacedObject {
    pub tag: String,
    pub x: f64,
    pub y: f64,
    /// Robots with at least one frame showing the object.
    pub observers: BTreeSet<usize>,
}

/// One realization of the synthetic world: every robot's recorded frames,
/// where the abnormal objects are, and which robots seed `M0`.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    /// Robot-server distances feeding the channel model.
    pub distances_m: Vec<f64>,
    /// `D_k`, in timestamp order.
    pub datasets: Vec<Vec<MemoryItem>>,
    pub objects: Vec<PlacedObject>,
    /// Sorted, deduplicated.
    pub base_robots: Vec<usize>,
}

impl World {
    pub fn num_robots(&self) -> usize {
        self.datasets.len()
    }

    /// `M0`: the full memories of the base robots.
    pub fn base_memory(&self) -> Memory<'_> {
        let mut m = Memory::new();
        for &k in &self.base_robots {
            m.push(&self.datasets[k]);
        }
        m
    }

    /// Three questions per placed object.
    pub fn ground_truth(&self) -> Vec<QaPair> {
        self.objects
            .iter()
            .flat_map(|o| {
                [
                    QaPair { question: Question::new(Template::Presence, o.tag.clone()), expected: Expected::Presence(true) },
                    QaPair {
                        question: Question::new(Template::Location, o.tag.clone()),
                        expected: Expected::Location { x: o.x, y: o.y, yaw: 0.0 },
                    },
                    QaPair {
                        question: Question::new(Template::Reporter, o.tag.clone()),
                        expected: Expected::Reporter(o.observers.clone()),
                    },
                ]
            })
            .collect()
    }
}

struct Patrol {
    start: [f64; 2],
    dir: [f64; 2],
    length: f64,
}

impl Patrol {
    fn point(&self, along: f64, lateral: f64) -> [f64; 2] {
        [
            self.start[0] + along * self.dir[0] - lateral * self.dir[1],
            self.start[1] + along * self.dir[1] + lateral * self.dir[0],
        ]
    }

    /// Position and heading after flying `s` metres back and forth.
    fn fly(&self, s: f64) -> ([f64; 2], f64) {
        let lap = s % (2.0 * self.length);
        let (along, back) = if lap <= self.length { (lap, false) } else { (2.0 * self.length - lap, true) };
        let mut yaw = self.dir[1].atan2(self.dir[0]).to_degrees();
        if back {
            yaw = if yaw > 0.0 { yaw - 180.0 } else { yaw + 180.0 };
        }
        (self.point(along, 0.0), yaw)
    }
}

fn frame(robot: usize, index: usize, config: &Config, xy: [f64; 2], yaw: f64) -> MemoryItem {
    MemoryItem {
        timestamp_s: index as f64 / config.world.frame_rate_hz,
        pose: Pose { x: xy[0], y: xy[1], z: config.world.altitude_m, roll: 0.0, pitch: 0.0, yaw },
        robot,
        tags: BTreeSet::new(),
    }
}

fn draw_distances(config: &Config, seed: u64) -> (Vec<f64>, Vec<f64>) {
    (0..config.num_robots)
        .map(|k| {
            let mut r = rng::stream(seed, Domain::Geometry, k as u64);
            let d = r.random_range(config.distance_min_m..config.distance_max_m);
            let bearing = r.random_range(0.0..TAU);
            (d, bearing)
        })
        .unzip()
}

fn pick_base_robots(spec: &BaseMemorySpec, k: usize, seed: u64) -> Vec<usize> {
    let mut robots = match spec {
        BaseMemorySpec::Random { count } => {
            index::sample(&mut rng::stream(seed, Domain::BaseMemory, 0), k, *count).into_vec()
        }
        BaseMemorySpec::Robots { robots } => robots.clone(),
    };
    robots.sort_unstable();
    robots.dedup();
    robots
}

/// Builds the world for one seed; identical inputs give an identical world.
pub fn build_world(config: &Config, seed: u64) -> Result<World> {
    config.validate()?;
    let k = config.num_robots;
    let n = config.items_per_robot;
    let (distances_m, bearings) = draw_distances(config, seed);
    let base_robots = pick_base_robots(&config.base_memory, k, seed);
    let mut place_rng = rng::stream(seed, Domain::Placement, 0);

    let (datasets, objects) = match &config.placement {
        Placement::Random => {
            let patrols: Vec<Patrol> = (0..k)
                .map(|r| {
                    let heading = place_rng.random_range(0.0..TAU);
                    let dir = [heading.cos(), heading.sin()];
                    let centre = [distances_m[r] * bearings[r].cos(), distances_m[r] * bearings[r].sin()];
                    let half = config.world.patrol_length_m / 2.0;
                    Patrol { start: [centre[0] - half * dir[0], centre[1] - half * dir[1]], dir, length: 2.0 * half }
                })
                .collect();
            let spacing = config.world.path_length_m / n as f64;
            let mut datasets: Vec<Vec<MemoryItem>> = patrols
                .iter()
                .enumerate()
                .map(|(r, patrol)| {
                    (0..n)
                        .map(|i| {
                            let (xy, yaw) = patrol.fly(i as f64 * spacing);
                            frame(r, i, config, xy, yaw)
                        })
                        .collect()
                })
                .collect();

            let mut objects = Vec::with_capacity(config.objects.len());
            for tag in &config.objects {
                let owner = place_rng.random_range(0..k);
                let along = place_rng.random_range(0.0..=patrols[owner].length);
                let off = config.world.lateral_offset_m;
                let lateral = if off > 0.0 { place_rng.random_range(-off..=off) } else { 0.0 };
                let [x, y] = patrols[owner].point(along, lateral);
                let mut observers = BTreeSet::new();
                for (r, data) in datasets.iter_mut().enumerate() {
                    for item in data.iter_mut() {
                        if item.pose.planar_distance(x, y) <= config.world.view_radius_m {
                            item.tags.insert(tag.clone());
                            observers.insert(r);
                        }
                    }
                }
                objects.push(PlacedObject { tag: tag.clone(), x, y, observers });
            }
            (datasets, objects)
        }
        Placement::Staged { novel_counts, shared_tags } => {
            let mut next_object = config.objects.iter();
            let mut objects = Vec::new();
            let datasets = (0..k)
                .map(|r| {
                    let angle = place_rng.random_range(0.0..TAU);
                    let radius = config.world.hover_spread_m * place_rng.random_range(0.0..=1.0f64).sqrt();
                    let xy = [radius * angle.cos(), radius * angle.sin()];
                    let yaw = place_rng.random_range(-180.0..180.0);
                    let mut tags: BTreeSet<String> = shared_tags.iter().cloned().collect();
                    for tag in next_object.by_ref().take(novel_counts[r]) {
                        tags.insert(tag.clone());
                        objects.push(PlacedObject { tag: tag.clone(), x: xy[0], y: xy[1], observers: BTreeSet::from([r]) });
                    }
                    (0..n)
                        .map(|i| MemoryItem { tags: tags.clone(), ..frame(r, i, config, xy, yaw) })
                        .collect()
                })
                .collect();
            (datasets, objects)
        }
    };

    Ok(World { distances_m, datasets, objects, base_robots })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_world_shape() {
        let config = Config::default();
        let w = build_world(&config, 3).unwrap();
        assert_eq!(w.datasets.len(), 10);
        assert!(w.datasets.iter().all(|d| d.len() == 1050));
        assert_eq!(w.objects.len(), 10);
        assert_eq!(w.base_robots.len(), 5);
        assert_eq!(w.ground_truth().len(), 30);
        assert!(w.distances_m.iter().all(|d| (50.0..250.0).contains(d)));
        // Every object is seen by its owner at least.
        assert!(w.objects.iter().all(|o| !o.observers.is_empty()));
        let last = &w.datasets[0][1049];
        assert!((last.timestamp_s - 1049.0 / 35.0).abs() < 1e-12);
    }

    #[test]
    fn worlds_are_seeded() {
        let config = Config::default();
        assert_eq!(build_world(&config, 9).unwrap(), build_world(&config, 9).unwrap());
        assert_ne!(build_world(&config, 9).unwrap(), build_world(&config, 10).unwrap());
    }

    #[test]
    fn staged_world_layout() {
        let config = Config::staged_five();
        let w = build_world(&config, 1).unwrap();
        assert_eq!(w.base_robots, vec![4]);
        let novel: Vec<usize> = (0..5).map(|r| w.datasets[r][0].tags.len() - 2).collect();
        assert_eq!(novel, vec![0, 1, 2, 3, 4]);
        assert_eq!(w.objects.len(), 10);
        assert!(w.datasets.iter().all(|d| d.iter().all(|i| i.has_tag("road"))));
    }

    #[test]
    fn patrol_turns_around() {
        let p = Patrol { start: [0.0, 0.0], dir: [1.0, 0.0], length: 100.0 };
        assert_eq!(p.fly(50.0).0, [50.0, 0.0]);
        let (xy, yaw) = p.fly(150.0);
        assert!((xy[0] - 50.0).abs() < 1e-12);
        assert!((yaw.abs() - 180.0).abs() < 1e-12);
    }
}
