//! Multi-antenna Rayleigh uplink and its MRC reduction.
//!
//! Robot `k` sees the channel `h_k = sqrt(h0 * omega * d_k^-alpha) * g_k`
//! with `g_k ~ CN(0, I_N)`. Under maximum ratio combining the server only
//! needs the gains `H_k = |h_k|^2` and the interference coefficients
//! `I_{k,j} = |h_k^H h_j|^2 / |h_k|^2`.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qom::PowerVector;
use crate::rng::{self, Domain};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// Radio constants, all linear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioConstants {
    pub bandwidth_hz: f64,
    pub noise_power_w: f64,
    /// Path loss at 1 m.
    pub ref_pathloss_linear: f64,
    pub shadow_fading_linear: f64,
    pub pathloss_exponent: f64,
    pub num_antennas: usize,
}

impl Default for RadioConstants {
    /// 10 MHz, -100 dBm noise, -30 dB reference loss, -20 dB shadowing,
    /// exponent 3, 256 server antennas.
    fn default() -> Self {
        Self {
            bandwidth_hz: 10e6,
            noise_power_w: dbm_to_watts(-100.0),
            ref_pathloss_linear: db_to_linear(-30.0),
            shadow_fading_linear: db_to_linear(-20.0),
            pathloss_exponent: 3.0,
            num_antennas: 256,
        }
    }
}

impl RadioConstants {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_power_w", self.noise_power_w),
            ("ref_pathloss_linear", self.ref_pathloss_linear),
            ("shadow_fading_linear", self.shadow_fading_linear),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {value}")));
            }
        }
        if !(self.pathloss_exponent.is_finite() && self.pathloss_exponent >= 1.0) {
            return Err(Error::invalid(
                "pathloss_exponent",
                format!("must be >= 1, got {}", self.pathloss_exponent),
            ));
        }
        if self.num_antennas == 0 {
            return Err(Error::invalid("num_antennas", "must be >= 1"));
        }
        Ok(())
    }

    /// `h0 * omega * d^-alpha`.
    pub fn large_scale_gain(&self, distance_m: f64) -> f64 {
        self.ref_pathloss_linear * self.shadow_fading_linear * distance_m.powf(-self.pathloss_exponent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotGeometry {
    pub distances_m: Vec<f64>,
    pub server_height_m: f64,
}

impl RobotGeometry {
    pub fn new(distances_m: Vec<f64>, server_height_m: f64) -> Self {
        Self { distances_m, server_height_m }
    }

    pub fn num_robots(&self) -> usize {
        self.distances_m.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.distances_m.is_empty() {
            return Err(Error::invalid("distances_m", "need at least one robot"));
        }
        if let Some((k, d)) = self
            .distances_m
            .iter()
            .enumerate()
            .find(|(_, d)| !(d.is_finite() && **d > 0.0))
        {
            return Err(Error::invalid("distances_m", format!("robot {k} has distance {d}")));
        }
        Ok(())
    }
}

/// MRC gains `H_k` and the `K x K` interference matrix `I_{k,j}`.
///
/// Row `k` of the matrix is what robot `k`'s combiner sees from every
/// transmitter, so the diagonal is `H_k` itself.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    gains: Vec<f64>,
    interference: Vec<f64>,
}

impl ChannelState {
    /// Build from explicit rows. The diagonal is overwritten with `gains`.
    pub fn new(gains: Vec<f64>, interference: Vec<Vec<f64>>) -> Result<Self> {
        let k = gains.len();
        if k == 0 {
            return Err(Error::invalid("gains", "need at least one robot"));
        }
        if interference.len() != k || interference.iter().any(|row| row.len() != k) {
            return Err(Error::DimensionMismatch(format!(
                "interference must be {k}x{k} to match {k} gains"
            )));
        }
        if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::invalid("gains", format!("gain {g} is not a finite nonnegative value")));
        }
        let mut flat = Vec::with_capacity(k * k);
        for (row_idx, row) in interference.into_iter().enumerate() {
            for (col, v) in row.into_iter().enumerate() {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::invalid(
                        "interference",
                        format!("entry ({row_idx}, {col}) = {v} is not a finite nonnegative value"),
                    ));
                }
                flat.push(if row_idx == col { gains[row_idx] } else { v });
            }
        }
        Ok(Self { gains, interference: flat })
    }

    /// Interference-free state, the `N -> infinity` limit.
    pub fn orthogonal(gains: Vec<f64>) -> Result<Self> {
        let k = gains.len();
        Self::new(gains, vec![vec![0.0; k]; k])
    }

    /// Reduce raw channel vectors to MRC quantities.
    pub fn from_channel_vectors(vectors: &[Vec<Complex64>]) -> Result<Self> {
        let k = vectors.len();
        if k == 0 {
            return Err(Error::invalid("vectors", "need at least one robot"));
        }
        let n = vectors[0].len();
        if n == 0 || vectors.iter().any(|v| v.len() != n) {
            return Err(Error::DimensionMismatch("channel vectors must share a nonzero length".into()));
        }
        let gains: Vec<f64> = vectors.iter().map(|v| v.iter().map(|c| c.norm_sqr()).sum()).collect();
        let mut interference = vec![0.0; k * k];
        for row in 0..k {
            for col in 0..k {
                interference[row * k + col] = if row == col {
                    gains[row]
                } else if gains[row] == 0.0 {
                    0.0
                } else {
                    let inner: Complex64 =
                        vectors[row].iter().zip(&vectors[col]).map(|(a, b)| a.conj() * b).sum();
                    // Cauchy-Schwarz can be violated by an ulp when the vectors are
                    // nearly parallel.
                    (inner.norm_sqr() / gains[row]).min(gains[col])
                };
            }
        }
        Ok(Self { gains, interference })
    }

    pub fn num_robots(&self) -> usize {
        self.gains.len()
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn gain(&self, k: usize) -> f64 {
        self.gains[k]
    }

    /// `I_{k,j}`: coupling of transmitter `j` into robot `k`'s combiner.
    #[inline]
    pub fn interference(&self, k: usize, j: usize) -> f64 {
        self.interference[k * self.gains.len() + j]
    }

    pub fn interference_row(&self, k: usize) -> &[f64] {
        let n = self.gains.len();
        &self.interference[k * n..(k + 1) * n]
    }

    /// Same gains with every cross term zeroed.
    pub fn without_interference(&self) -> Self {
        let k = self.gains.len();
        let mut interference = vec![0.0; k * k];
        for i in 0..k {
            interference[i * k + i] = self.gains[i];
        }
        Self { gains: self.gains.clone(), interference }
    }

    /// `sum_{j != k} I_{k,j} p_j`.
    #[inline]
    pub(crate) fn interference_power(&self, k: usize, powers: &[f64]) -> f64 {
        self.interference_row(k)
            .iter()
            .zip(powers)
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, (i, p))| i * p)
            .sum()
    }

    #[inline]
    pub(crate) fn sinr_raw(&self, k: usize, powers: &[f64], noise_power_w: f64) -> f64 {
        self.gains[k] * powers[k] / (self.interference_power(k, powers) + noise_power_w)
    }

    pub(crate) fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.num_robots() {
            return Err(Error::DimensionMismatch(format!(
                "{what} has {len} entries, channel has {} robots",
                self.num_robots()
            )));
        }
        Ok(())
    }
}

/// Draw one channel realization.
pub fn draw_channels(constants: &RadioConstants, geometry: &RobotGeometry, seed: u64) -> Result<ChannelState> {
    constants.validate()?;
    geometry.validate()?;
    let n = constants.num_antennas;
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let vectors: Vec<Vec<Complex64>> = geometry
        .distances_m
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let mut rng = rng::stream(seed, Domain::Channel, k as u64);
            let amplitude = constants.large_scale_gain(d).sqrt();
            (0..n)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re * half, im * half) * amplitude
                })
                .collect()
        })
        .collect();
    ChannelState::from_channel_vectors(&vectors)
}

/// `H_k p_k / (sum_{j != k} I_{k,j} p_j + sigma^2)`.
pub fn sinr(state: &ChannelState, p: &PowerVector, noise_power_w: f64, k: usize) -> Result<f64> {
    state.check_len(p.len(), "power vector")?;
    if k >= state.num_robots() {
        return Err(Error::RobotIndex { index: k, count: state.num_robots() });
    }
    Ok(state.sinr_raw(k, p.as_slice(), noise_power_w))
}

pub fn sinr_all(state: &ChannelState, p: &PowerVector, noise_power_w: f64) -> Result<Vec<f64>> {
    state.check_len(p.len(), "power vector")?;
    Ok((0..state.num_robots()).map(|k| state.sinr_raw(k, p.as_slice(), noise_power_w)).collect())
}

/// `sum_k B log2(1 + SINR_k)` in bit/s.
pub fn sum_rate_bps(state: &ChannelState, p: &PowerVector, noise_power_w: f64, bandwidth_hz: f64) -> Result<f64> {
    Ok(sinr_all(state, p, noise_power_w)?.iter().map(|s| bandwidth_hz * s.ln_1p() / std::f64::consts::LN_2).sum())
}
