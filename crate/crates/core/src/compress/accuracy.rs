use super::CompressError;
use crate::kg::Triple;
use std::collections::BTreeMap;

fn counts(triples: &[Triple]) -> BTreeMap<Triple, usize> {
    let mut m = BTreeMap::new();
    for t in triples {
        *m.entry(*t).or_insert(0) += 1;
    }
    m
}

/// Multiset overlap of the recovered triples with the original ones,
/// normalised by the original size.
pub fn accuracy(original: &[Triple], recovered: &[Triple]) -> Result<f64, CompressError> {
    if original.is_empty() {
        return Err(CompressError::EmptyMessage);
    }
    let want = counts(original);
    let got = counts(recovered);
    let matched: usize = want
        .iter()
        .map(|(t, &n)| n.min(got.get(t).copied().unwrap_or(0)))
        .sum();
    Ok(matched as f64 / original.len() as f64)
}
