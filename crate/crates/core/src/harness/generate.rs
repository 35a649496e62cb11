use super::config::{dbm_to_watts, ExperimentConfig, SweepVar};
use super::synth::synthesize_dataset;
use super::HarnessError;
use crate::alloc::Scenario;
use crate::compress::partition_messages;
use crate::kg::{build_kg, KnowledgeGraph, SampleDataset, Triple};
use crate::phy::{generate_channels, noise_power, BeamPolicy, ChannelState};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

/// What a random stream is used for. Each (trial, purpose) pair gets its
/// own stream, so changing one consumer leaves the others untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Dataset = 0,
    Messages = 1,
    Channels = 2,
}

pub fn stream_rng(seed: u64, trial: usize, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((trial as u64) << 8) | purpose as u64);
    rng
}

/// Builds per-trial scenarios for one configuration. A dataset file is read
/// once and shared by all trials.
#[derive(Debug, Clone)]
pub struct ScenarioGenerator {
    config: ExperimentConfig,
    dataset: Option<SampleDataset>,
    channels: Option<Vec<Vec<Complex64>>>,
}

impl ScenarioGenerator {
    pub fn new(config: &ExperimentConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let dataset = match &config.dataset {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
                Some(SampleDataset::parse(&text)?)
            }
            None => None,
        };
        Ok(Self {
            config: config.clone(),
            dataset,
            channels: None,
        })
    }

    /// Replays fixed channel vectors in every trial instead of drawing them.
    pub fn with_channels(mut self, channels: Vec<Vec<Complex64>>) -> Result<Self, HarnessError> {
        let c = &self.config;
        if channels.len() != c.users || channels.iter().any(|h| h.len() != c.antennas) {
            return Err(HarnessError::Invalid(format!(
                "channel file must hold {} users by {} antennas",
                c.users, c.antennas
            )));
        }
        self.channels = Some(channels);
        Ok(self)
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    fn knowledge_graph(&self, trial: usize) -> Result<KnowledgeGraph, HarnessError> {
        match &self.dataset {
            Some(ds) => Ok(build_kg(ds)?),
            None => {
                let mut rng = stream_rng(self.config.seed, trial, Purpose::Dataset);
                Ok(build_kg(&synthesize_dataset(&self.config.kg, &mut rng)?)?)
            }
        }
    }

    /// Scenario of one trial at the configured bandwidth and power budget.
    pub fn scenario(&self, trial: usize) -> Result<Scenario, HarnessError> {
        let c = &self.config;
        let kg = self.knowledge_graph(trial)?;
        let messages = draw_messages(&kg, c.users, c.message_size, c.overlap, &mut stream_rng(c.seed, trial, Purpose::Messages))?;
        let message = partition_messages(&messages)?;
        let channels = match &self.channels {
            Some(h) => ChannelState::new(h.clone(), noise_power(c.noise_psd_dbm_hz, c.bandwidth_hz), c.bandwidth_hz)?,
            None => generate_channels(
                &c.geometry(),
                c.users,
                c.antennas,
                c.bandwidth_hz,
                c.noise_psd_dbm_hz,
                &mut stream_rng(c.seed, trial, Purpose::Channels),
            )?,
        };
        Ok(Scenario::new(
            kg,
            message,
            channels,
            BeamPolicy::Mrt,
            c.coding()?,
            c.constants(),
            c.compression(),
        )?)
    }

    /// `base` moved to one sweep value.
    pub fn at_sweep_value(&self, base: &Scenario, value: f64) -> Result<Scenario, HarnessError> {
        match self.config.sweep {
            SweepVar::Bandwidth => Ok(base.with_bandwidth(value, noise_power(self.config.noise_psd_dbm_hz, value))?),
            SweepVar::PMax => Ok(base.with_p_max(dbm_to_watts(value))),
        }
    }
}

pub fn generate_scenario(config: &ExperimentConfig, trial: usize) -> Result<Scenario, HarnessError> {
    ScenarioGenerator::new(config)?.scenario(trial)
}

/// Per-user message sets: `round(overlap·size)` triples common to every
/// user, the rest private and disjoint across users. Triples are drawn
/// without replacement, weighted by how often they were observed.
pub fn draw_messages(
    kg: &KnowledgeGraph,
    users: usize,
    size: usize,
    overlap: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<BTreeSet<Triple>>, HarnessError> {
    let shared = (overlap * size as f64).round() as usize;
    let private = size - shared;
    let needed = shared + users * private;
    let mut pool: Vec<(Triple, usize)> = Vec::with_capacity(kg.triple_count());
    for q in kg.quadruples() {
        for (rel, samples) in q.relations() {
            pool.push((Triple::new(q.head, *rel, q.tail), samples.len()));
        }
    }
    if needed > pool.len() {
        return Err(HarnessError::Targets {
            needed,
            available: pool.len(),
        });
    }
    let mut picked: Vec<Triple> = pool
        .choose_multiple_weighted(rng, needed, |(_, w)| *w as f64)
        .map_err(|e| HarnessError::Invalid(e.to_string()))?
        .map(|(t, _)| *t)
        .collect();
    picked.shuffle(rng);
    let common = &picked[..shared];
    Ok((0..users)
        .map(|u| {
            let start = shared + u * private;
            common
                .iter()
                .chain(&picked[start..start + private])
                .copied()
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::read_channels_csv;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            trials: 2,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn same_trial_same_scenario() {
        let c = small();
        let a = generate_scenario(&c, 1).unwrap();
        let b = generate_scenario(&c, 1).unwrap();
        assert_eq!(a.dump(), b.dump());
        assert_ne!(a.dump(), generate_scenario(&c, 0).unwrap().dump());
    }

    #[test]
    fn message_sizes_follow_overlap() {
        let c = small();
        let s = generate_scenario(&c, 0).unwrap();
        assert_eq!(s.message().shared.len(), 4);
        assert!(s.message().private.iter().all(|p| p.len() == 8));

        let full = ExperimentConfig { overlap: 1.0, ..small() };
        let s = generate_scenario(&full, 0).unwrap();
        assert_eq!(s.message().shared.len(), 12);
        assert!(s.message().private.iter().all(Vec::is_empty));

        let none = ExperimentConfig { overlap: 0.0, ..small() };
        let s = generate_scenario(&none, 0).unwrap();
        assert!(s.message().shared.is_empty());
    }

    #[test]
    fn unsatisfiable_targets() {
        let c = ExperimentConfig {
            message_size: 500,
            ..small()
        };
        assert!(matches!(generate_scenario(&c, 0), Err(HarnessError::Targets { .. })));
    }

    #[test]
    fn streams_are_independent_of_each_other() {
        use rand::RngCore;
        let a = stream_rng(1, 0, Purpose::Channels).next_u64();
        let b = stream_rng(1, 0, Purpose::Messages).next_u64();
        let c = stream_rng(1, 1, Purpose::Channels).next_u64();
        assert!(a != b && a != c);
        assert_eq!(a, stream_rng(1, 0, Purpose::Channels).next_u64());
    }

    #[test]
    fn channel_replay() {
        let c = small();
        let g = ScenarioGenerator::new(&c).unwrap();
        let s = g.scenario(0).unwrap();
        let mut buf = Vec::new();
        crate::phy::write_channels_csv(s.channels().channels(), &mut buf).unwrap();
        let h = read_channels_csv(buf.as_slice()).unwrap();
        let replayed = g.clone().with_channels(h).unwrap().scenario(0).unwrap();
        assert_eq!(replayed.dump(), s.dump());
        assert!(g.with_channels(vec![vec![Complex64::new(1.0, 0.0)]]).is_err());
    }

    #[test]
    fn sweep_values_move_the_scenario() {
        let g = ScenarioGenerator::new(&small()).unwrap();
        let s = g.scenario(0).unwrap();
        let w = g.at_sweep_value(&s, 2e7).unwrap();
        assert_eq!(w.channels().bandwidth(), 2e7);
        assert!((w.channels().noise_power() / s.channels().noise_power() - 2.0).abs() < 1e-12);
    }
}
