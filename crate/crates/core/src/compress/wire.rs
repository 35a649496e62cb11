//! Bit-exact payload for one compressed message.
//!
//! ```text
//! header : role (1 byte, 0 = shared, i = private of user i) | count (u32 BE)
//! triple : flag (1 byte, 0 = full, n = degenerate at round n)
//!          head (R·E bits) | tail (R·E bits) | relation (2·R·E bits, full only)
//! ```
//!
//! Every ID field is a big-endian unsigned integer left-padded with zeros to
//! a whole number of bytes.

use super::matrix::{build_matrix, TieRule};
use super::plan::{Combinations, CompressionPlan};
use super::{CodingParams, CompressError, MessageRole};
use crate::kg::{Conditioning, EntityId, KnowledgeGraph, RelationId, Triple};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WireEntry {
    Full(Triple),
    Degenerate {
        round: u8,
        head: EntityId,
        tail: EntityId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WirePayload {
    pub role: MessageRole,
    pub entries: Vec<WireEntry>,
}

const HEADER_BYTES: usize = 5;

fn field_bytes(bits: u64) -> usize {
    bits.div_ceil(8) as usize
}

fn put_field(out: &mut Vec<u8>, value: u64, bits: u64) -> Result<(), CompressError> {
    if bits < 64 && value >> bits != 0 {
        return Err(CompressError::FieldOverflow { value, bits });
    }
    let width = field_bytes(bits);
    let be = value.to_be_bytes();
    if width >= 8 {
        out.extend(std::iter::repeat_n(0u8, width - 8));
        out.extend_from_slice(&be);
    } else {
        out.extend_from_slice(&be[8 - width..]);
    }
    Ok(())
}

fn take_field(bytes: &[u8], at: &mut usize, bits: u64) -> Result<u64, CompressError> {
    let width = field_bytes(bits);
    let chunk = bytes
        .get(*at..*at + width)
        .ok_or(CompressError::Truncated)?;
    *at += width;
    let mut value: u64 = 0;
    for (i, &b) in chunk.iter().enumerate() {
        if width - i > 8 {
            if b != 0 {
                return Err(CompressError::Malformed("ID wider than 64 bits".into()));
            }
            continue;
        }
        value = (value << 8) | b as u64;
    }
    Ok(value)
}

fn id32(v: u64) -> Result<u32, CompressError> {
    u32::try_from(v).map_err(|_| CompressError::Malformed(format!("identifier {v} too large")))
}

impl WirePayload {
    pub fn to_bytes(&self, coding: &CodingParams) -> Result<Vec<u8>, CompressError> {
        let eb = coding.entity_bits();
        let count = u32::try_from(self.entries.len())
            .map_err(|_| CompressError::Malformed("too many triples".into()))?;
        let mut out = Vec::with_capacity(HEADER_BYTES + self.entries.len() * 4 * field_bytes(eb));
        out.push(self.role.to_byte());
        out.extend_from_slice(&count.to_be_bytes());
        for e in &self.entries {
            match *e {
                WireEntry::Full(t) => {
                    out.push(0);
                    put_field(&mut out, t.head.0 as u64, eb)?;
                    put_field(&mut out, t.tail.0 as u64, eb)?;
                    put_field(&mut out, t.relation.0 as u64, 2 * eb)?;
                }
                WireEntry::Degenerate { round, head, tail } => {
                    out.push(round);
                    put_field(&mut out, head.0 as u64, eb)?;
                    put_field(&mut out, tail.0 as u64, eb)?;
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], coding: &CodingParams) -> Result<Self, CompressError> {
        let eb = coding.entity_bits();
        if bytes.len() < HEADER_BYTES {
            return Err(CompressError::Truncated);
        }
        let role = MessageRole::from_byte(bytes[0]);
        let count = u32::from_be_bytes([bytes[1], bytes[2], bytes[3], bytes[4]]) as usize;
        let mut at = HEADER_BYTES;
        let mut entries = Vec::with_capacity(count.min(bytes.len()));
        for _ in 0..count {
            let flag = *bytes.get(at).ok_or(CompressError::Truncated)?;
            at += 1;
            let head = EntityId(id32(take_field(bytes, &mut at, eb)?)?);
            let tail = EntityId(id32(take_field(bytes, &mut at, eb)?)?);
            entries.push(if flag == 0 {
                let relation = RelationId(id32(take_field(bytes, &mut at, 2 * eb)?)?);
                WireEntry::Full(Triple::new(head, relation, tail))
            } else {
                WireEntry::Degenerate {
                    round: flag,
                    head,
                    tail,
                }
            });
        }
        if at != bytes.len() {
            return Err(CompressError::Malformed("trailing bytes".into()));
        }
        Ok(Self { role, entries })
    }

    /// Logical bits of the triple code words, excluding the header and flags.
    pub fn triple_field_bits(&self, coding: &CodingParams) -> u64 {
        let eb = coding.entity_bits();
        self.entries
            .iter()
            .map(|e| match e {
                WireEntry::Full(_) => 4 * eb,
                WireEntry::Degenerate { .. } => 2 * eb,
            })
            .sum()
    }
}

pub fn serialize(plan: &CompressionPlan, triples: &[Triple]) -> Result<WirePayload, CompressError> {
    if plan.n_triples != triples.len() {
        return Err(CompressError::PlanMismatch);
    }
    let mut round_of = vec![0u8; triples.len()];
    for (r, round) in plan.rounds.iter().enumerate() {
        let flag = u8::try_from(r + 1).map_err(|_| CompressError::TooManyRounds)?;
        for d in &round.degenerated {
            if triples.get(d.position) != Some(&d.triple) {
                return Err(CompressError::PlanMismatch);
            }
            round_of[d.position] = flag;
        }
    }
    let entries = triples
        .iter()
        .zip(&round_of)
        .map(|(t, &flag)| match flag {
            0 => WireEntry::Full(*t),
            round => WireEntry::Degenerate {
                round,
                head: t.head,
                tail: t.tail,
            },
        })
        .collect();
    Ok(WirePayload {
        role: plan.role,
        entries,
    })
}

/// Receiver side: replays the compression rounds against the shared
/// knowledge graph and restores every omitted relation.
pub fn reconstruct(
    kg: &KnowledgeGraph,
    payload: &WirePayload,
    rule: TieRule,
) -> Result<Vec<Triple>, CompressError> {
    let mut rows = Vec::with_capacity(payload.entries.len());
    for e in &payload.entries {
        let (h, t) = match e {
            WireEntry::Full(tr) => (tr.head, tr.tail),
            WireEntry::Degenerate { head, tail, .. } => (*head, *tail),
        };
        rows.push(kg.row_of(h, t).ok_or(CompressError::KnowledgeBaseMismatch)?);
    }
    let mut out: Vec<Option<Triple>> = payload
        .entries
        .iter()
        .map(|e| match e {
            WireEntry::Full(t) => Some(*t),
            WireEntry::Degenerate { .. } => None,
        })
        .collect();
    let last_round = payload
        .entries
        .iter()
        .filter_map(|e| match e {
            WireEntry::Degenerate { round, .. } => Some(*round as usize),
            WireEntry::Full(_) => None,
        })
        .max()
        .unwrap_or(0);

    let decode = |row: usize, values: &[f64]| -> Option<Triple> {
        let col = rule.certify(values)?;
        let q = kg.quadruple(row);
        Some(Triple::new(q.head, q.relation_at(col)?, q.tail))
    };

    let mut recovered_pool: Vec<Triple> = Vec::new();
    for round in 1..=last_round {
        let pending: Vec<usize> = payload
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| matches!(e, WireEntry::Degenerate { round: r, .. } if *r as usize == round))
            .map(|(i, _)| i)
            .collect();
        if round == 1 {
            let base = build_matrix(kg, &[])?;
            for &i in &pending {
                let t = decode(rows[i], base.row(rows[i]))
                    .ok_or(CompressError::KnowledgeBaseMismatch)?;
                out[i] = Some(t);
            }
        } else {
            let mut pool = recovered_pool.clone();
            pool.sort();
            let mut left = pending.clone();
            for combo in Combinations::new(pool.len(), round - 1) {
                if left.is_empty() {
                    break;
                }
                let given: Vec<Triple> = combo.iter().map(|&k| pool[k]).collect();
                let cond = Conditioning::new(kg, &given)?;
                left.retain(|&i| {
                    let values = super::matrix::row_values(kg, rows[i], Some(&cond));
                    match decode(rows[i], &values) {
                        Some(t) => {
                            out[i] = Some(t);
                            false
                        }
                        None => true,
                    }
                });
            }
            if !left.is_empty() {
                return Err(CompressError::KnowledgeBaseMismatch);
            }
        }
        recovered_pool.extend(pending.iter().map(|&i| out[i].expect("decoded above")));
    }
    Ok(out.into_iter().map(|t| t.expect("every entry decoded")).collect())
}
