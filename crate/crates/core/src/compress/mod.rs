//! Relation-omission compression of triple messages.
//!
//! A triple whose relation is the (conditional) maximum of its pair's row in
//! a probability matrix can be sent as `(head, tail)` only; the receiver,
//! holding the same knowledge graph, restores the relation by replaying the
//! matrices. Later rounds condition on triples that degenerated earlier.

mod accuracy;
mod matrix;
mod partition;
mod plan;
mod wire;

pub use accuracy::accuracy;
pub use matrix::{build_matrix, ProbabilityMatrix, TieRule};
pub use partition::{partition_messages, PartitionedMessage};
pub use plan::{
    comm_overhead, comp_overhead, compress, scr, CompressOptions, CompressionPlan, Degeneration,
    Round,
};
pub use wire::{reconstruct, serialize, WireEntry, WirePayload};

use crate::kg::KgError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which stream a message travels on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MessageRole {
    Shared,
    /// Private message of user `i`, 1-based as on the wire.
    Private(u8),
}

impl MessageRole {
    pub fn to_byte(self) -> u8 {
        match self {
            MessageRole::Shared => 0,
            MessageRole::Private(i) => i,
        }
    }

    pub fn from_byte(b: u8) -> Self {
        match b {
            0 => MessageRole::Shared,
            i => MessageRole::Private(i),
        }
    }

    /// Stream index: 0 for shared, `i` for user `i`'s private stream.
    pub fn stream(self) -> usize {
        self.to_byte() as usize
    }
}

/// Equal-length code-word parameters and the compute-cost constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodingParams {
    /// Code words per entity (`E`); a relation uses `2E`.
    pub entity_words: u32,
    /// Bits per code word (`R`).
    pub bits_per_word: u32,
    /// CPU cycles charged per probability-matrix entry.
    pub cycles_per_entry: u32,
}

impl CodingParams {
    pub fn new(
        entity_words: u32,
        bits_per_word: u32,
        cycles_per_entry: u32,
    ) -> Result<Self, CompressError> {
        if entity_words == 0 || bits_per_word == 0 || cycles_per_entry == 0 {
            return Err(CompressError::InvalidCoding);
        }
        Ok(Self {
            entity_words,
            bits_per_word,
            cycles_per_entry,
        })
    }

    /// `R·E`: bits of one entity code word.
    pub fn entity_bits(&self) -> u64 {
        self.entity_words as u64 * self.bits_per_word as u64
    }

    /// `4·R·E`: bits of an uncompressed triple.
    pub fn triple_bits(&self) -> u64 {
        4 * self.entity_bits()
    }
}

impl Default for CodingParams {
    fn default() -> Self {
        Self {
            entity_words: 1,
            bits_per_word: 32,
            cycles_per_entry: 10,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompressError {
    #[error("no users")]
    NoUsers,
    #[error("message has no triples")]
    EmptyMessage,
    #[error("compression ratio {0} outside [0, 1]")]
    OmegaOutOfRange(f64),
    #[error("plan does not belong to this message")]
    PlanMismatch,
    #[error("more than 255 compression rounds")]
    TooManyRounds,
    #[error("coding parameters must all be at least 1")]
    InvalidCoding,
    #[error("identifier {value} does not fit in {bits} bits")]
    FieldOverflow { value: u64, bits: u64 },
    #[error("payload truncated")]
    Truncated,
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error("knowledge base mismatch")]
    KnowledgeBaseMismatch,
    #[error(transparent)]
    Kg(#[from] KgError),
}
