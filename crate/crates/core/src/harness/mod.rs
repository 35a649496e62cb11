//! Experiment configuration, reproducible scenario generation and sweeps.

pub mod config;
pub mod generate;
pub mod sweep;
pub mod synth;

pub use config::{dbm_to_watts, ConfigError, ExperimentConfig, Policy, SweepVar};
pub use generate::{draw_messages, generate_scenario, stream_rng, Purpose, ScenarioGenerator};
pub use synth::{synthesize_dataset, SyntheticKg};
pub use sweep::{options_for, run_sweep, run_sweep_with, SweepResult, SweepRow, CSV_HEADER};

use crate::alloc::AllocError;
use crate::compress::CompressError;
use crate::kg::KgError;
use crate::phy::PhyError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("message targets need {needed} distinct triples, graph has {available}")]
    Targets { needed: usize, available: usize },
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error(transparent)]
    Compress(#[from] CompressError),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error(transparent)]
    Alloc(#[from] AllocError),
}
