use super::{EntityId, KgError, RelationId, SampleDataset, Symbols, Triple};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Sorted, duplicate-free set of sample serial numbers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SampleSet(Vec<u32>);

impl SampleSet {
    pub fn from_unsorted(mut serials: Vec<u32>) -> Self {
        serials.sort_unstable();
        serials.dedup();
        Self(serials)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn contains(&self, serial: u32) -> bool {
        self.0.binary_search(&serial).is_ok()
    }

    pub fn intersection(&self, other: &SampleSet) -> SampleSet {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::with_capacity(self.len().min(other.len()));
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(self.0[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        SampleSet(out)
    }

    pub fn intersection_len(&self, other: &SampleSet) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    pub fn union(&self, other: &SampleSet) -> SampleSet {
        let mut out = Vec::with_capacity(self.len() + other.len());
        out.extend_from_slice(&self.0);
        out.extend_from_slice(&other.0);
        SampleSet::from_unsorted(out)
    }
}

/// All relations observed between one ordered entity pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadrupleSet {
    pub head: EntityId,
    pub tail: EntityId,
    relations: Vec<(RelationId, SampleSet)>,
    pair_union: SampleSet,
}

impl QuadrupleSet {
    pub fn relations(&self) -> &[(RelationId, SampleSet)] {
        &self.relations
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    /// Matrix column of a relation, if recorded for this pair.
    pub fn column_of(&self, relation: RelationId) -> Option<usize> {
        self.relations
            .binary_search_by_key(&relation, |(r, _)| *r)
            .ok()
    }

    pub fn relation_at(&self, column: usize) -> Option<RelationId> {
        self.relations.get(column).map(|(r, _)| *r)
    }

    pub fn samples(&self, column: usize) -> &SampleSet {
        &self.relations[column].1
    }

    /// Union of the sample sets of every relation of this pair.
    pub fn pair_union(&self) -> &SampleSet {
        &self.pair_union
    }

    fn total_observations(&self) -> usize {
        self.relations.iter().map(|(_, s)| s.len()).sum()
    }
}

/// Immutable probabilistic knowledge graph shared by transmitter and receivers.
///
/// Quadruple sets are sorted by `(head, tail)`; a quadruple set's index is
/// its probability-matrix row and a relation's index within it is its column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    symbols: Symbols,
    quadruples: Vec<QuadrupleSet>,
    max_relations: usize,
}

impl KnowledgeGraph {
    pub fn symbols(&self) -> &Symbols {
        &self.symbols
    }

    pub fn quadruples(&self) -> &[QuadrupleSet] {
        &self.quadruples
    }

    pub fn quadruple(&self, row: usize) -> &QuadrupleSet {
        &self.quadruples[row]
    }

    /// Number of quadruple sets (matrix rows).
    pub fn pair_count(&self) -> usize {
        self.quadruples.len()
    }

    /// Largest relation count over all quadruple sets (matrix columns).
    pub fn max_relations(&self) -> usize {
        self.max_relations
    }

    pub fn row_of(&self, head: EntityId, tail: EntityId) -> Option<usize> {
        self.quadruples
            .binary_search_by(|q| (q.head, q.tail).cmp(&(head, tail)))
            .ok()
    }

    /// Resolves a triple to its `(row, column)`; the column is `None` when the
    /// relation is not recorded for the pair.
    pub fn locate(&self, triple: &Triple) -> Result<(usize, Option<usize>), KgError> {
        let row = self
            .row_of(triple.head, triple.tail)
            .ok_or(KgError::PairNotFound)?;
        Ok((row, self.quadruples[row].column_of(triple.relation)))
    }

    /// Every distinct triple in canonical order.
    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.quadruples.iter().flat_map(|q| {
            q.relations
                .iter()
                .map(move |(r, _)| Triple::new(q.head, *r, q.tail))
        })
    }

    pub fn triple_count(&self) -> usize {
        self.quadruples.iter().map(QuadrupleSet::relation_count).sum()
    }
}

pub fn build_kg(dataset: &SampleDataset) -> Result<KnowledgeGraph, KgError> {
    if dataset.is_empty() {
        return Err(KgError::EmptyDataset);
    }
    let mut grouped: BTreeMap<(EntityId, EntityId), BTreeMap<RelationId, Vec<u32>>> =
        BTreeMap::new();
    for sample in dataset.samples() {
        for t in &sample.triples {
            grouped
                .entry((t.head, t.tail))
                .or_default()
                .entry(t.relation)
                .or_default()
                .push(sample.serial);
        }
    }
    let quadruples: Vec<QuadrupleSet> = grouped
        .into_iter()
        .map(|((head, tail), rels)| {
            let relations: Vec<(RelationId, SampleSet)> = rels
                .into_iter()
                .map(|(r, serials)| (r, SampleSet::from_unsorted(serials)))
                .collect();
            let pair_union = relations
                .iter()
                .fold(SampleSet::default(), |acc, (_, s)| acc.union(s));
            QuadrupleSet {
                head,
                tail,
                relations,
                pair_union,
            }
        })
        .collect();
    let max_relations = quadruples
        .iter()
        .map(QuadrupleSet::relation_count)
        .max()
        .unwrap_or(0);
    Ok(KnowledgeGraph {
        symbols: dataset.symbols().clone(),
        quadruples,
        max_relations,
    })
}

pub fn triple_probability(kg: &KnowledgeGraph, triple: &Triple) -> Result<f64, KgError> {
    let (row, col) = kg.locate(triple)?;
    let quad = kg.quadruple(row);
    Ok(match col {
        Some(c) => quad.samples(c).len() as f64 / quad.total_observations() as f64,
        None => 0.0,
    })
}

/// Sample-set evidence derived from an ordered list of conditioning triples.
///
/// For conditioning triples `c1, c2, ..., cN` where `c1` belongs to pair `a`,
/// the conditional probability of a triple with sample set `S` is
/// `|S ∩ N_c1 ∩ X| / |S ∩ U_a ∩ X|` with `X = N_c2 ∩ ... ∩ N_cN` and `U_a` the
/// union of all sample sets of pair `a`. A zero denominator yields 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conditioning {
    numerator: SampleSet,
    denominator: SampleSet,
}

impl Conditioning {
    pub fn new(kg: &KnowledgeGraph, given: &[Triple]) -> Result<Self, KgError> {
        let (first, rest) = given.split_first().ok_or(KgError::RelationNotFound)?;
        let resolve = |t: &Triple| -> Result<(usize, usize), KgError> {
            let (row, col) = kg.locate(t)?;
            Ok((row, col.ok_or(KgError::RelationNotFound)?))
        };
        let (row, col) = resolve(first)?;
        let quad = kg.quadruple(row);
        let mut numerator = quad.samples(col).clone();
        let mut denominator = quad.pair_union().clone();
        for t in rest {
            let (r, c) = resolve(t)?;
            let s = kg.quadruple(r).samples(c);
            numerator = numerator.intersection(s);
            denominator = denominator.intersection(s);
        }
        Ok(Self {
            numerator,
            denominator,
        })
    }

    pub fn probability(&self, samples: &SampleSet) -> f64 {
        let den = samples.intersection_len(&self.denominator);
        if den == 0 {
            return 0.0;
        }
        samples.intersection_len(&self.numerator) as f64 / den as f64
    }
}

pub fn conditional_probability(
    kg: &KnowledgeGraph,
    triple: &Triple,
    given: &Triple,
) -> Result<f64, KgError> {
    conditional_probability_multi(kg, triple, std::slice::from_ref(given))
}

/// Conditional probability under one or more conditioning triples.
pub fn conditional_probability_multi(
    kg: &KnowledgeGraph,
    triple: &Triple,
    given: &[Triple],
) -> Result<f64, KgError> {
    let cond = Conditioning::new(kg, given)?;
    let (row, col) = kg.locate(triple)?;
    Ok(match col {
        Some(c) => cond.probability(kg.quadruple(row).samples(c)),
        None => 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn toy() -> KnowledgeGraph {
        let ds = SampleDataset::parse(
            "1: (h1,r1,t1); (h2,r3,t2)\n2: (h1,r1,t1); (h2,r3,t2)\n3: (h1,r1,t1)\n4: (h1,r2,t1)\n",
        )
        .unwrap();
        build_kg(&ds).unwrap()
    }

    fn t(kg: &KnowledgeGraph, h: &str, r: &str, tl: &str) -> Triple {
        kg.symbols().triple(h, r, tl).unwrap()
    }

    #[test]
    fn groups_by_entity_pair() {
        let ds = SampleDataset::parse("1: (h1,r1,t1)\n2: (h1,r1,t1)\n3: (h1,r1,t1)\n4: (h1,r2,t1)\n")
            .unwrap();
        let kg = build_kg(&ds).unwrap();
        assert_eq!(kg.pair_count(), 1);
        assert_eq!(kg.max_relations(), 2);
        let q = kg.quadruple(0);
        assert_eq!(q.samples(0).as_slice(), &[1, 2, 3]);
        assert_eq!(q.samples(1).as_slice(), &[4]);
    }

    #[test]
    fn single_observation() {
        let kg = build_kg(&SampleDataset::parse("1: (h1,r1,t1)\n").unwrap()).unwrap();
        assert_eq!(kg.pair_count(), 1);
        assert_eq!(kg.quadruple(0).relation_count(), 1);
        assert_eq!(kg.quadruple(0).samples(0).as_slice(), &[1]);
    }

    #[test]
    fn two_pairs_max_relations() {
        let kg = toy();
        assert_eq!(kg.pair_count(), 2);
        assert_eq!(kg.max_relations(), 2);
    }

    #[test]
    fn probabilities_of_the_toy_graph() {
        let kg = toy();
        assert_eq!(triple_probability(&kg, &t(&kg, "h1", "r1", "t1")).unwrap(), 0.75);
        assert_eq!(triple_probability(&kg, &t(&kg, "h2", "r3", "t2")).unwrap(), 1.0);
        // relation recorded elsewhere but not for this pair
        let absent = Triple::new(
            kg.symbols().entity("h1").unwrap(),
            kg.symbols().relation("r3").unwrap(),
            kg.symbols().entity("t1").unwrap(),
        );
        assert_eq!(triple_probability(&kg, &absent).unwrap(), 0.0);
        let bad = Triple::new(
            kg.symbols().entity("h1").unwrap(),
            kg.symbols().relation("r1").unwrap(),
            kg.symbols().entity("t2").unwrap(),
        );
        assert_eq!(triple_probability(&kg, &bad), Err(KgError::PairNotFound));
    }

    #[test]
    fn conditional_matches_direct_evaluation() {
        let kg = toy();
        let p = conditional_probability(&kg, &t(&kg, "h2", "r3", "t2"), &t(&kg, "h1", "r1", "t1"))
            .unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn conditional_disjoint_and_zero_denominator() {
        // r2 observed only in sample 4; (h3,t3) only in 5; r5 of (h1,t1) in {6}
        let ds = SampleDataset::parse(
            "1: (h1,r1,t1)\n2: (h1,r1,t1)\n3: (h1,r1,t1)\n4: (h1,r2,t1); (h2,r3,t2)\n5: (h3,r4,t3)\n",
        )
        .unwrap();
        let kg = build_kg(&ds).unwrap();
        // disjoint numerator: N(h1,r1,t1) = {1,2,3}, N(h2,r3,t2) = {4}
        let p = conditional_probability(&kg, &t(&kg, "h1", "r1", "t1"), &t(&kg, "h2", "r3", "t2"))
            .unwrap();
        assert_eq!(p, 0.0);
        // denominator zero: pair union of (h3,t3) = {5} is disjoint from {1,2,3}
        let p = conditional_probability(&kg, &t(&kg, "h1", "r1", "t1"), &t(&kg, "h3", "r4", "t3"))
            .unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn conditional_errors() {
        let kg = toy();
        let stranger = Triple::new(EntityId(0), RelationId(0), EntityId(3));
        assert!(conditional_probability(&kg, &stranger, &t(&kg, "h1", "r1", "t1")).is_err());
        let unrecorded = Triple::new(
            kg.symbols().entity("h2").unwrap(),
            kg.symbols().relation("r1").unwrap(),
            kg.symbols().entity("t2").unwrap(),
        );
        assert_eq!(
            conditional_probability(&kg, &t(&kg, "h1", "r1", "t1"), &unrecorded),
            Err(KgError::RelationNotFound)
        );
    }

    fn arb_dataset() -> impl Strategy<Value = Vec<Vec<(u8, u8, u8)>>> {
        prop::collection::vec(prop::collection::vec((0u8..4, 0u8..4, 0u8..3), 1..5), 1..12)
    }

    fn to_dataset(raw: &[Vec<(u8, u8, u8)>]) -> SampleDataset {
        let samples = raw
            .iter()
            .enumerate()
            .map(|(i, ts)| {
                let named: Vec<(String, String, String)> = ts
                    .iter()
                    .map(|(h, r, tl)| (format!("h{h}"), format!("r{r}"), format!("t{tl}")))
                    .collect();
                (i as u32 + 1, named)
            })
            .collect();
        SampleDataset::from_named(samples).unwrap()
    }

    proptest! {
        #[test]
        fn row_probabilities_sum_to_one(raw in arb_dataset()) {
            let kg = build_kg(&to_dataset(&raw)).unwrap();
            for q in kg.quadruples() {
                let sum: f64 = q.relations().iter()
                    .map(|(r, _)| triple_probability(&kg, &Triple::new(q.head, *r, q.tail)).unwrap())
                    .sum();
                prop_assert!((sum - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn sample_order_does_not_matter(raw in arb_dataset()) {
            let a = to_dataset(&raw);
            let mut named: Vec<(u32, Vec<(String, String, String)>)> = raw
                .iter()
                .enumerate()
                .map(|(i, ts)| {
                    let mut ts: Vec<_> = ts.iter()
                        .map(|(h, r, tl)| (format!("h{h}"), format!("r{r}"), format!("t{tl}")))
                        .collect();
                    ts.reverse();
                    (i as u32 + 1, ts)
                })
                .collect();
            named.reverse();
            let b = SampleDataset::from_named(named).unwrap();
            let (ka, kb) = (build_kg(&a).unwrap(), build_kg(&b).unwrap());
            prop_assert_eq!(&ka, &kb);
            for x in ka.triples() {
                for y in ka.triples() {
                    prop_assert_eq!(
                        conditional_probability(&ka, &x, &y).unwrap(),
                        conditional_probability(&kb, &x, &y).unwrap()
                    );
                }
            }
        }

        #[test]
        fn text_round_trip_preserves_graph(raw in arb_dataset()) {
            let ds = to_dataset(&raw);
            let back = SampleDataset::parse(&ds.to_text()).unwrap();
            prop_assert_eq!(build_kg(&ds).unwrap(), build_kg(&back).unwrap());
        }

        #[test]
        fn multi_conditioning_matches_set_oracle(raw in arb_dataset(), a in 0usize..64, b in 0usize..64) {
            let kg = build_kg(&to_dataset(&raw)).unwrap();
            let all: Vec<Triple> = kg.triples().collect();
            let (c1, c2) = (all[a % all.len()], all[b % all.len()]);
            let sets = |t: &Triple| -> BTreeSet<u32> {
                let (row, col) = kg.locate(t).unwrap();
                kg.quadruple(row).samples(col.unwrap()).as_slice().iter().copied().collect()
            };
            let (row1, _) = kg.locate(&c1).unwrap();
            let union: BTreeSet<u32> = kg.quadruple(row1).relations().iter()
                .flat_map(|(_, s)| s.as_slice().iter().copied()).collect();
            for x in &all {
                let sx = sets(x);
                let s1 = sets(&c1);
                let s2 = sets(&c2);
                let num = sx.iter().filter(|v| s1.contains(v) && s2.contains(v)).count();
                let den = sx.iter().filter(|v| union.contains(v) && s2.contains(v)).count();
                let expected = if den == 0 { 0.0 } else { num as f64 / den as f64 };
                prop_assert_eq!(conditional_probability_multi(&kg, x, &[c1, c2]).unwrap(), expected);
            }
        }
    }
}
