//! Probabilistic knowledge graph built from observed sample data.
//!
//! Each sample is a set of `(head, relation, tail)` observations. Triples that
//! share an entity pair are grouped into a [`QuadrupleSet`], where every
//! relation carries the serial numbers of the samples that observed it. The
//! relative sizes of those sample sets define triple probabilities and
//! conditional probabilities.

mod dataset;
mod graph;

pub use dataset::{parse_triples, Sample, SampleDataset};
pub use graph::{
    build_kg, conditional_probability, conditional_probability_multi, triple_probability,
    Conditioning, KnowledgeGraph, QuadrupleSet, SampleSet,
};

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use thiserror::Error;

/// Interned entity identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

/// Interned relation identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationId(pub u32);

/// A semantic triple. Ordered by `(head, tail, relation)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Self {
            head,
            relation,
            tail,
        }
    }

    pub fn pair(&self) -> (EntityId, EntityId) {
        (self.head, self.tail)
    }
}

impl Ord for Triple {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.head, self.tail, self.relation).cmp(&(other.head, other.tail, other.relation))
    }
}

impl PartialOrd for Triple {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(e{},r{},e{})",
            self.head.0, self.relation.0, self.tail.0
        )
    }
}

/// Interned string tables for entities and relations.
///
/// Both tables are kept sorted, so an identifier's integer value is its rank
/// in the sorted name list. Two datasets over the same names always intern
/// to the same IDs regardless of the order the names were first seen.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Symbols {
    entities: Vec<String>,
    relations: Vec<String>,
}

impl Symbols {
    pub fn from_names<E, R>(entities: E, relations: R) -> Self
    where
        E: IntoIterator,
        E::Item: Into<String>,
        R: IntoIterator,
        R::Item: Into<String>,
    {
        let mut entities: Vec<String> = entities.into_iter().map(Into::into).collect();
        let mut relations: Vec<String> = relations.into_iter().map(Into::into).collect();
        entities.sort();
        entities.dedup();
        relations.sort();
        relations.dedup();
        Self {
            entities,
            relations,
        }
    }

    pub fn entity(&self, name: &str) -> Option<EntityId> {
        self.entities
            .binary_search_by(|e| e.as_str().cmp(name))
            .ok()
            .map(|i| EntityId(i as u32))
    }

    pub fn relation(&self, name: &str) -> Option<RelationId> {
        self.relations
            .binary_search_by(|r| r.as_str().cmp(name))
            .ok()
            .map(|i| RelationId(i as u32))
    }

    pub fn entity_name(&self, id: EntityId) -> Option<&str> {
        self.entities.get(id.0 as usize).map(String::as_str)
    }

    pub fn relation_name(&self, id: RelationId) -> Option<&str> {
        self.relations.get(id.0 as usize).map(String::as_str)
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    /// Looks up a triple by names.
    pub fn triple(&self, head: &str, relation: &str, tail: &str) -> Option<Triple> {
        Some(Triple::new(
            self.entity(head)?,
            self.relation(relation)?,
            self.entity(tail)?,
        ))
    }

    /// Renders a triple with its original names, falling back to raw IDs.
    pub fn display(&self, t: &Triple) -> String {
        match (
            self.entity_name(t.head),
            self.relation_name(t.relation),
            self.entity_name(t.tail),
        ) {
            (Some(h), Some(r), Some(tl)) => format!("({h},{r},{tl})"),
            _ => t.to_string(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KgError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("pair not in knowledge graph")]
    PairNotFound,
    #[error("relation not recorded for its entity pair")]
    RelationNotFound,
    #[error("sample {0} has no triples")]
    EmptySample(u32),
    #[error("sample serials must be contiguous from 1 (missing {0})")]
    NonContiguousSerials(u32),
    #[error("line {line}: duplicate serial {serial}")]
    DuplicateSerial { line: usize, serial: u32 },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
}
