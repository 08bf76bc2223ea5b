//! Random instances shared by the integration tests.
#![allow(dead_code)]

use mcpa::channel::{draw_channels, ChannelState, RadioConstants, RobotGeometry};
use mcpa::qom::{qom_weights, DatasetMeta, QomParams};
use mcpa::PowerVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const P_SUM: f64 = 0.2;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_7e57)
}

pub fn radio(num_antennas: usize) -> RadioConstants {
    RadioConstants { num_antennas, ..RadioConstants::default() }
}

pub fn noise() -> f64 {
    RadioConstants::default().noise_power_w
}

pub fn metas(k: usize) -> Vec<DatasetMeta> {
    vec![DatasetMeta { num_items: 1050, item_volume_bits: 1.6e6, pilot_ratio: 0.01 }; k]
}

/// A drawn channel plus weights built from random exam scores.
pub struct Instance {
    pub state: ChannelState,
    pub params: QomParams,
}

pub fn channel(k: usize, n: usize, seed: u64) -> ChannelState {
    let mut r = rng(seed);
    let d: Vec<f64> = (0..k).map(|_| r.random_range(50.0..250.0)).collect();
    draw_channels(&radio(n), &RobotGeometry::new(d, 20.0), seed).unwrap()
}

pub fn instance(k: usize, n: usize, seed: u64) -> Instance {
    let mut r = rng(seed.wrapping_add(1_000_003));
    let gae: Vec<f64> = (0..k).map(|_| r.random_range(0.0..0.95)).collect();
    instance_with_gae(k, n, seed, &gae)
}

pub fn instance_with_gae(k: usize, n: usize, seed: u64, gae: &[f64]) -> Instance {
    let state = channel(k, n, seed);
    let params = qom_weights(gae, &metas(k), 580.0, 1e7).unwrap();
    Instance { state, params }
}

/// Random point of `{p >= 0, sum p <= budget}` with every coordinate at least `floor`.
pub fn feasible_point<R: Rng>(r: &mut R, k: usize, budget: f64, floor: f64) -> Vec<f64> {
    let spend = budget * r.random_range(0.05..1.0) - floor * k as f64;
    let raw: Vec<f64> = (0..k).map(|_| -r.random_range(1e-12..1.0f64).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| floor + spend.max(0.0) * x / total).collect()
}

/// Like [`feasible_point`] but with some coordinates switched off.
pub fn sparse_point<R: Rng>(r: &mut R, k: usize, budget: f64) -> Vec<f64> {
    let mut p = feasible_point(r, k, budget, 0.0);
    for x in &mut p {
        if r.random_bool(0.25) {
            *x = 0.0;
        }
    }
    p
}

pub fn pv(p: &[f64], budget: f64) -> PowerVector {
    PowerVector::new(p.to_vec(), budget).unwrap()
}

/// `sum_k w_k log2(1 + SINR_k)` written out directly.
pub fn objective_by_hand(weights: &[f64], state: &ChannelState, p: &[f64], noise: f64) -> f64 {
    let k = p.len();
    (0..k)
        .map(|i| {
            let interference: f64 = (0..k).filter(|&j| j != i).map(|j| state.interference(i, j) * p[j]).sum();
            weights[i] * (1.0 + state.gain(i) * p[i] / (interference + noise)).log2()
        })
        .sum()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// The surrogate term transcribed literally, without any rearrangement:
/// `w/ln2 [ln(sum_l I p/s2 + 1) - ln(sum_{l!=k} I p*/s2 + 1) - (sum_{l!=k} I p*/s2 + 1)^-1 (sum_{l!=k} I p/s2 + 1) + 1]`.
pub fn surrogate_literal(w: f64, state: &ChannelState, p: &[f64], anchor: &[f64], noise: f64, k: usize) -> f64 {
    let n = p.len();
    let all: f64 = (0..n).map(|l| state.interference(k, l) * p[l] / noise).sum();
    let others_anchor: f64 = (0..n).filter(|&l| l != k).map(|l| state.interference(k, l) * anchor[l] / noise).sum();
    let others: f64 = (0..n).filter(|&l| l != k).map(|l| state.interference(k, l) * p[l] / noise).sum();
    w / std::f64::consts::LN_2
        * ((all + 1.0).ln() - (others_anchor + 1.0).ln() - (others_anchor + 1.0).recip() * (others + 1.0) + 1.0)
}

/// Central differences of the true objective, step `h` per coordinate.
pub fn fd_gradient(weights: &[f64], state: &ChannelState, p: &[f64], noise: f64, h: f64) -> Vec<f64> {
    (0..p.len())
        .map(|l| {
            let mut up = p.to_vec();
            let mut down = p.to_vec();
            up[l] += h;
            down[l] -= h;
            (objective_by_hand(weights, state, &up, noise) - objective_by_hand(weights, state, &down, noise)) / (2.0 * h)
        })
        .collect()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub const TAG_POOL: [&str; 8] = ["fire_truck", "bus", "taxi", "yamaha", "green_car", "traffic_cone", "road", "building"];

/// Random memory of `len` items with random robots, poses and tag sets.
pub fn random_memory<R: Rng>(r: &mut R, len: usize) -> Vec<mcpa::gae::MemoryItem> {
    let tag_rate = r.random_range(0.0..0.6);
    (0..len)
        .map(|i| mcpa::gae::MemoryItem {
            timestamp_s: i as f64 * 0.1,
            pose: mcpa::gae::Pose {
                x: r.random_range(-500.0..500.0),
                y: r.random_range(-500.0..500.0),
                z: 30.0,
                roll: 0.0,
                pitch: 0.0,
                yaw: r.random_range(-180.0..180.0),
            },
            robot: r.random_range(0..10),
            tags: TAG_POOL.iter().filter(|_| r.random_bool(tag_rate / 2.0)).map(|t| t.to_string()).collect(),
        })
        .collect()
}
