use super::CompressError;
use crate::kg::Triple;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// One transmission task split into the common message and per-user remainders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionedMessage {
    pub shared: Vec<Triple>,
    pub private: Vec<Vec<Triple>>,
}

impl PartitionedMessage {
    pub fn users(&self) -> usize {
        self.private.len()
    }

    /// Uncompressed triple count `M + Σ k'_i`.
    pub fn total_triples(&self) -> usize {
        self.shared.len() + self.private.iter().map(Vec::len).sum::<usize>()
    }

    /// Everything user `user` (0-based) must recover: shared then private.
    pub fn user_view(&self, user: usize) -> Vec<Triple> {
        let mut out = self.shared.clone();
        out.extend_from_slice(&self.private[user]);
        out
    }
}

/// Triples common to every user become shared; the rest stay private.
pub fn partition_messages(users: &[BTreeSet<Triple>]) -> Result<PartitionedMessage, CompressError> {
    let (first, rest) = users.split_first().ok_or(CompressError::NoUsers)?;
    let shared: BTreeSet<Triple> = first
        .iter()
        .filter(|t| rest.iter().all(|u| u.contains(t)))
        .copied()
        .collect();
    let private = users
        .iter()
        .map(|u| u.difference(&shared).copied().collect())
        .collect();
    Ok(PartitionedMessage {
        shared: shared.into_iter().collect(),
        private,
    })
}
