use crate::compress::{
    comm_overhead, comp_overhead, compress, reconstruct, serialize, CodingParams, CompressError,
    CompressOptions, MessageRole,
};
use crate::energy::MessageLoad;
use crate::kg::{KnowledgeGraph, Triple};
use serde::{Deserialize, Serialize};

/// One achievable compression setting of a message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub rounds: usize,
    pub omega: f64,
    pub comp_cycles: f64,
    pub comm_bits: f64,
    /// What the receiver restores at this setting.
    pub recovered: Vec<Triple>,
}

/// Achievable operating points of one message, by increasing round cap.
/// The first entry is always the uncompressed point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaTable {
    pub role: MessageRole,
    pub triples: usize,
    pub points: Vec<OperatingPoint>,
}

impl OmegaTable {
    /// Runs the compressor with every round cap up to `max_rounds`. A cap
    /// that does not raise the ratio only adds computation, so it is dropped.
    pub fn build(
        kg: &KnowledgeGraph,
        role: MessageRole,
        message: &[Triple],
        coding: &CodingParams,
        max_rounds: usize,
        options: CompressOptions,
    ) -> Result<Self, CompressError> {
        let mut points: Vec<OperatingPoint> = Vec::new();
        for rounds in 0..=max_rounds {
            let plan = compress(
                kg,
                role,
                message,
                &CompressOptions {
                    max_rounds: rounds,
                    ..options
                },
            )?;
            if points.last().is_some_and(|p| plan.scr <= p.omega) {
                continue;
            }
            let recovered = reconstruct(kg, &serialize(&plan, message)?, options.tie_rule)?;
            points.push(OperatingPoint {
                rounds,
                omega: plan.scr,
                comp_cycles: comp_overhead(&plan, kg, coding),
                comm_bits: comm_overhead(plan.scr, message.len(), coding)?,
                recovered,
            });
            if plan.rounds.len() < rounds {
                // the compressor stopped early: higher caps change nothing
                break;
            }
        }
        Ok(Self {
            role,
            triples: message.len(),
            points,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn load(&self, index: usize) -> MessageLoad {
        let p = &self.points[index];
        MessageLoad {
            triples: self.triples,
            comp_cycles: p.comp_cycles,
            comm_bits: p.comm_bits,
        }
    }

    /// Entry whose ratio is closest to `target`, ties toward the smaller one.
    pub fn nearest(&self, target: f64) -> usize {
        let mut best = 0;
        for (i, p) in self.points.iter().enumerate() {
            if (p.omega - target).abs() < (self.points[best].omega - target).abs() {
                best = i;
            }
        }
        best
    }
}
