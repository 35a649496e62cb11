//! Downlink rate-splitting physical layer.
//!
//! The base station superposes one shared stream (index 0) and `K` private
//! streams (index `k + 1` for user `k`, users 0-based). Each user decodes the
//! shared stream treating all private streams as interference, cancels it,
//! then decodes its own private stream with the other private streams as
//! interference.

mod channel;

pub use channel::{
    generate_channels, noise_power, path_loss_db, read_channels_csv, write_channels_csv,
    CellGeometry,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhyError {
    #[error("channel state needs at least one user and one antenna")]
    Empty,
    #[error("all channel vectors must have the same length")]
    RaggedChannels,
    #[error("noise power must be positive, got {0}")]
    NoisePower(f64),
    #[error("bandwidth must be positive, got {0}")]
    Bandwidth(f64),
    #[error("zero-norm vector for stream {0}")]
    ZeroVector(usize),
    #[error("expected {expected} beamformers, got {got}")]
    BeamCount { expected: usize, got: usize },
    #[error("beamformer {0} is not unit norm")]
    NotUnitNorm(usize),
    #[error("channel file: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    channels: Vec<Vec<Complex64>>,
    noise_power: f64,
    bandwidth: f64,
}

impl ChannelState {
    pub fn new(
        channels: Vec<Vec<Complex64>>,
        noise_power: f64,
        bandwidth: f64,
    ) -> Result<Self, PhyError> {
        let antennas = channels.first().map(Vec::len).ok_or(PhyError::Empty)?;
        if antennas == 0 {
            return Err(PhyError::Empty);
        }
        if channels.iter().any(|h| h.len() != antennas) {
            return Err(PhyError::RaggedChannels);
        }
        if !(noise_power > 0.0) {
            return Err(PhyError::NoisePower(noise_power));
        }
        if !(bandwidth > 0.0) {
            return Err(PhyError::Bandwidth(bandwidth));
        }
        Ok(Self {
            channels,
            noise_power,
            bandwidth,
        })
    }

    pub fn users(&self) -> usize {
        self.channels.len()
    }

    pub fn antennas(&self) -> usize {
        self.channels[0].len()
    }

    pub fn channel(&self, user: usize) -> &[Complex64] {
        &self.channels[user]
    }

    pub fn channels(&self) -> &[Vec<Complex64>] {
        &self.channels
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Same channels at a different bandwidth and noise power.
    pub fn with_bandwidth(&self, bandwidth: f64, noise_power: f64) -> Result<Self, PhyError> {
        Self::new(self.channels.clone(), noise_power, bandwidth)
    }
}

/// Unit-norm transmit beamformers: `shared` plus one per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamformerSet {
    pub shared: Vec<Complex64>,
    pub private: Vec<Vec<Complex64>>,
}

impl BeamformerSet {
    /// Stream `0` is the shared beam, `k + 1` user `k`'s private beam.
    pub fn stream(&self, j: usize) -> &[Complex64] {
        if j == 0 {
            &self.shared
        } else {
            &self.private[j - 1]
        }
    }

    pub fn streams(&self) -> usize {
        self.private.len() + 1
    }

    /// Largest deviation of any beam norm from 1.
    pub fn max_norm_deviation(&self) -> f64 {
        (0..self.streams())
            .map(|j| (norm(self.stream(j)) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub enum BeamPolicy {
    /// Private beams matched to each user, shared beam matched to the sum
    /// of all channels.
    #[default]
    Mrt,
    /// Caller-provided vectors (shared first), renormalised.
    Fixed(Vec<Vec<Complex64>>),
}

/// `log2(1 + x)`, accurate for tiny `x`.
pub fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
}

fn normalized(v: &[Complex64], stream: usize) -> Result<Vec<Complex64>, PhyError> {
    let n = norm(v);
    if !(n > 0.0) || !n.is_finite() {
        return Err(PhyError::ZeroVector(stream));
    }
    Ok(v.iter().map(|x| x / n).collect())
}

pub fn make_beamformers(
    channels: &ChannelState,
    policy: &BeamPolicy,
) -> Result<BeamformerSet, PhyError> {
    let users = channels.users();
    match policy {
        BeamPolicy::Mrt => {
            let mut sum = vec![Complex64::new(0.0, 0.0); channels.antennas()];
            let mut private = Vec::with_capacity(users);
            for (k, h) in channels.channels().iter().enumerate() {
                for (s, x) in sum.iter_mut().zip(h) {
                    *s += x;
                }
                private.push(normalized(h, k + 1)?);
            }
            Ok(BeamformerSet {
                shared: normalized(&sum, 0)?,
                private,
            })
        }
        BeamPolicy::Fixed(vectors) => {
            if vectors.len() != users + 1 {
                return Err(PhyError::BeamCount {
                    expected: users + 1,
                    got: vectors.len(),
                });
            }
            if vectors.iter().any(|v| v.len() != channels.antennas()) {
                return Err(PhyError::RaggedChannels);
            }
            let mut out = vectors
                .iter()
                .enumerate()
                .map(|(j, v)| normalized(v, j))
                .collect::<Result<Vec<_>, _>>()?;
            let shared = out.remove(0);
            Ok(BeamformerSet {
                shared,
                private: out,
            })
        }
    }
}

/// Effective link gains `|h_kᴴ w_j|²` for every user `k` and stream `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkGains {
    gains: Vec<Vec<f64>>,
}

impl LinkGains {
    pub fn new(channels: &ChannelState, beams: &BeamformerSet) -> Result<Self, PhyError> {
        if beams.private.len() != channels.users() {
            return Err(PhyError::BeamCount {
                expected: channels.users() + 1,
                got: beams.streams(),
            });
        }
        let gains = channels
            .channels()
            .iter()
            .map(|h| {
                (0..beams.streams())
                    .map(|j| {
                        let w = beams.stream(j);
                        h.iter()
                            .zip(w)
                            .map(|(hn, wn)| hn.conj() * wn)
                            .sum::<Complex64>()
                            .norm_sqr()
                    })
                    .collect()
            })
            .collect();
        Ok(Self { gains })
    }

    /// Builds gains directly, e.g. for hand-constructed test links.
    pub fn from_matrix(gains: Vec<Vec<f64>>) -> Self {
        Self { gains }
    }

    pub fn users(&self) -> usize {
        self.gains.len()
    }

    pub fn gain(&self, user: usize, stream: usize) -> f64 {
        self.gains[user][stream]
    }

    /// Rate at which `user` can decode the shared stream.
    pub fn shared_rate_at_user(&self, user: usize, powers: &[f64], noise: f64, bandwidth: f64) -> f64 {
        let g = &self.gains[user];
        let interference: f64 = (1..g.len()).map(|j| powers[j] * g[j]).sum();
        bandwidth * log2_1p(powers[0] * g[0] / (interference + noise))
    }

    /// Rate at which `user` decodes its own private stream after removing
    /// the shared stream.
    pub fn private_rate(&self, user: usize, powers: &[f64], noise: f64, bandwidth: f64) -> f64 {
        let g = &self.gains[user];
        let own = user + 1;
        let interference: f64 = (1..g.len())
            .filter(|&j| j != own)
            .map(|j| powers[j] * g[j])
            .sum();
        bandwidth * log2_1p(powers[own] * g[own] / (interference + noise))
    }

    /// Shared-stream rate every user can decode: the minimum over users.
    pub fn shared_rate(&self, powers: &[f64], noise: f64, bandwidth: f64) -> f64 {
        (0..self.users())
            .map(|k| self.shared_rate_at_user(k, powers, noise, bandwidth))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Transmit powers per stream: `[p_0, p_1, ..., p_K]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAlloc(pub Vec<f64>);

impl PowerAlloc {
    pub fn equal_split(p_max: f64, users: usize) -> Self {
        Self(vec![p_max / (users + 1) as f64; users + 1])
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn is_within(&self, p_max: f64) -> bool {
        self.0.iter().all(|&p| p >= 0.0) && self.total() <= p_max
    }
}

pub fn shared_rate_at_user(
    user: usize,
    channels: &ChannelState,
    beams: &BeamformerSet,
    powers: &PowerAlloc,
) -> Result<f64, PhyError> {
    let g = LinkGains::new(channels, beams)?;
    Ok(g.shared_rate_at_user(user, &powers.0, channels.noise_power(), channels.bandwidth()))
}

pub fn private_rate(
    user: usize,
    channels: &ChannelState,
    beams: &BeamformerSet,
    powers: &PowerAlloc,
) -> Result<f64, PhyError> {
    let g = LinkGains::new(channels, beams)?;
    Ok(g.private_rate(user, &powers.0, channels.noise_power(), channels.bandwidth()))
}

pub fn shared_rate(
    channels: &ChannelState,
    beams: &BeamformerSet,
    powers: &PowerAlloc,
) -> Result<f64, PhyError> {
    let g = LinkGains::new(channels, beams)?;
    Ok(g.shared_rate(&powers.0, channels.noise_power(), channels.bandwidth()))
}
