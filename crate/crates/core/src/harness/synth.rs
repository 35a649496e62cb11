//! Synthetic sample data with latent topics, so that conditioning on one
//! observed relation carries information about the others.

use crate::kg::{KgError, SampleDataset};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticKg {
    /// Candidate entity pairs.
    pub pairs: usize,
    /// Each pair gets between 1 and this many relations.
    pub max_relations: usize,
    pub samples: usize,
    /// Latent topics; each pair has a preferred relation per topic.
    pub topics: usize,
    /// Probability that a sample observes a given pair.
    pub pair_density: f64,
    /// Probability that an observation uses the topic's preferred relation.
    pub topic_affinity: f64,
}

impl Default for SyntheticKg {
    fn default() -> Self {
        Self {
            pairs: 40,
            max_relations: 4,
            samples: 60,
            topics: 4,
            pair_density: 0.3,
            topic_affinity: 0.7,
        }
    }
}

pub fn synthesize_dataset<R: Rng + ?Sized>(
    params: &SyntheticKg,
    rng: &mut R,
) -> Result<SampleDataset, KgError> {
    if params.pairs == 0 || params.samples == 0 || params.max_relations == 0 {
        return Err(KgError::EmptyDataset);
    }
    let topics = params.topics.max(1);
    let pool = params.max_relations * 3;
    let width = (pool.max(params.pairs)).to_string().len();

    struct Pair {
        head: String,
        tail: String,
        relations: Vec<String>,
        preferred: Vec<usize>,
    }
    let pairs: Vec<Pair> = (0..params.pairs)
        .map(|p| {
            let count = rng.gen_range(1..=params.max_relations);
            let mut picks = sample_indices(rng, pool, count).into_vec();
            picks.sort_unstable();
            let relations = picks.iter().map(|r| format!("r{r:0width$}")).collect();
            let preferred = (0..topics).map(|_| rng.gen_range(0..count)).collect();
            Pair {
                head: format!("h{p:0width$}"),
                tail: format!("t{p:0width$}"),
                relations,
                preferred,
            }
        })
        .collect();

    let mut samples = Vec::with_capacity(params.samples);
    for serial in 1..=params.samples {
        let topic = rng.gen_range(0..topics);
        let mut chosen: Vec<usize> = (0..pairs.len())
            .filter(|_| rng.gen_bool(params.pair_density.clamp(0.0, 1.0)))
            .collect();
        if chosen.is_empty() {
            chosen.push(rng.gen_range(0..pairs.len()));
        }
        let triples = chosen
            .into_iter()
            .map(|p| {
                let pair = &pairs[p];
                let rel = if rng.gen_bool(params.topic_affinity.clamp(0.0, 1.0)) {
                    pair.preferred[topic]
                } else {
                    rng.gen_range(0..pair.relations.len())
                };
                (
                    pair.head.clone(),
                    pair.relations[rel].clone(),
                    pair.tail.clone(),
                )
            })
            .collect();
        samples.push((serial as u32, triples));
    }
    SampleDataset::from_named(samples)
}
