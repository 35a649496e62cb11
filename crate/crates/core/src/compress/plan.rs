use super::matrix::{build_matrix, TieRule};
use super::{CodingParams, CompressError, MessageRole};
use crate::kg::{KnowledgeGraph, Triple};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressOptions {
    pub max_rounds: usize,
    pub tie_rule: TieRule,
}

impl CompressOptions {
    pub fn rounds(max_rounds: usize) -> Self {
        Self {
            max_rounds,
            tie_rule: TieRule::Strict,
        }
    }
}

/// One omitted relation: which message position, and the conditioning of the
/// matrix that certified it (empty in round 1).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Degeneration {
    pub position: usize,
    pub triple: Triple,
    pub context: Vec<Triple>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub degenerated: Vec<Degeneration>,
    pub matrices_built: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionPlan {
    pub role: MessageRole,
    pub n_triples: usize,
    pub rounds: Vec<Round>,
    pub scr: f64,
    pub matrices_computed: usize,
    pub entries_computed: usize,
}

impl CompressionPlan {
    fn empty(role: MessageRole, n_triples: usize) -> Self {
        Self {
            role,
            n_triples,
            rounds: Vec::new(),
            scr: 0.0,
            matrices_computed: 0,
            entries_computed: 0,
        }
    }

    /// Degenerate-triple count per round (`Q_1, Q_2, ...`).
    pub fn degenerate_counts(&self) -> Vec<usize> {
        self.rounds.iter().map(|r| r.degenerated.len()).collect()
    }

    pub fn total_degenerate(&self) -> usize {
        self.rounds.iter().map(|r| r.degenerated.len()).sum()
    }

    /// 1-based round in which the triple at `position` degenerated.
    pub fn round_of(&self, position: usize) -> Option<usize> {
        self.rounds
            .iter()
            .position(|r| r.degenerated.iter().any(|d| d.position == position))
            .map(|i| i + 1)
    }
}

/// Lexicographic `k`-combinations of `0..n`.
pub(crate) struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub(crate) fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            idx: (0..k).collect(),
            done: k > n || k == 0,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Multi-round relation omission.
///
/// Round 1 tests every triple against the base matrix. Round `n + 1` builds
/// one `n`-dimensional conditional matrix per `n`-combination of all triples
/// degenerated so far (canonically sorted, combinations in lexicographic
/// order). For each surviving triple the certifying matrix is the first one
/// in that order whose row for the triple's pair certifies a relation; the
/// triple degenerates iff that relation is its own. The receiver replays the
/// same order, so it finds the same matrix without extra signalling.
///
/// Stops after `max_rounds` rounds or after a round that degenerates nothing.
pub fn compress(
    kg: &KnowledgeGraph,
    role: MessageRole,
    triples: &[Triple],
    options: &CompressOptions,
) -> Result<CompressionPlan, CompressError> {
    let located = triples
        .iter()
        .map(|t| kg.locate(t))
        .collect::<Result<Vec<_>, _>>()?;
    let mut plan = CompressionPlan::empty(role, triples.len());
    if triples.is_empty() || options.max_rounds == 0 {
        return Ok(plan);
    }
    let rule = options.tie_rule;
    let mut degenerate = vec![false; triples.len()];

    let base = build_matrix(kg, &[])?;
    let mut first = Vec::new();
    for (pos, &(row, col)) in located.iter().enumerate() {
        if let Some(col) = col {
            if rule.degenerates(base.row(row), col) {
                degenerate[pos] = true;
                first.push(Degeneration {
                    position: pos,
                    triple: triples[pos],
                    context: Vec::new(),
                });
            }
        }
    }
    plan.rounds.push(Round {
        degenerated: first,
        matrices_built: 1,
    });

    for dim in 1..options.max_rounds {
        if plan.rounds.last().is_some_and(|r| r.degenerated.is_empty()) {
            break;
        }
        let mut pool: Vec<Triple> = plan
            .rounds
            .iter()
            .flat_map(|r| r.degenerated.iter().map(|d| d.triple))
            .collect();
        pool.sort();

        // (position, row, column, decided)
        let mut pending: Vec<(usize, usize, usize, bool)> = located
            .iter()
            .enumerate()
            .filter(|(pos, _)| !degenerate[*pos])
            .filter_map(|(pos, &(row, col))| col.map(|c| (pos, row, c, false)))
            .collect();

        let mut found = Vec::new();
        let mut built = 0usize;
        for combo in Combinations::new(pool.len(), dim) {
            let conditioning: Vec<Triple> = combo.iter().map(|&i| pool[i]).collect();
            let matrix = build_matrix(kg, &conditioning)?;
            built += 1;
            for entry in pending.iter_mut().filter(|e| !e.3) {
                let (pos, row, col, _) = *entry;
                let values = matrix.row(row);
                if rule.certify(values).is_some() {
                    entry.3 = true;
                    if rule.degenerates(values, col) {
                        found.push(Degeneration {
                            position: pos,
                            triple: triples[pos],
                            context: conditioning.clone(),
                        });
                    }
                }
            }
        }
        found.sort_by_key(|d| d.position);
        for d in &found {
            degenerate[d.position] = true;
        }
        plan.rounds.push(Round {
            degenerated: found,
            matrices_built: built,
        });
    }

    plan.matrices_computed = plan.rounds.iter().map(|r| r.matrices_built).sum();
    plan.entries_computed = plan.matrices_computed * kg.pair_count() * kg.max_relations();
    plan.scr = plan.total_degenerate() as f64 / triples.len() as f64;
    Ok(plan)
}

/// Fraction of a message's triples sent without their relation.
pub fn scr(plan: &CompressionPlan, n_triples: usize) -> Result<f64, CompressError> {
    if n_triples == 0 {
        return Err(CompressError::EmptyMessage);
    }
    let q = plan.total_degenerate();
    if q > n_triples {
        return Err(CompressError::PlanMismatch);
    }
    Ok(q as f64 / n_triples as f64)
}

/// Bits needed to send `n_triples` triples at compression ratio `omega`:
/// `2·R·E·n·(2 − Ω)`.
pub fn comm_overhead(omega: f64, n_triples: usize, coding: &CodingParams) -> Result<f64, CompressError> {
    if !(0.0..=1.0).contains(&omega) {
        return Err(CompressError::OmegaOutOfRange(omega));
    }
    let n = n_triples as f64;
    // Ω from a plan is an integer ratio; snap Ω·n so the count stays exact.
    let mut omitted = omega * n;
    let nearest = omitted.round();
    if (omitted - nearest).abs() <= 1e-9 * n.max(1.0) {
        omitted = nearest;
    }
    Ok(2.0 * coding.entity_bits() as f64 * (2.0 * n - omitted))
}

/// CPU cycles charged for a plan: one unit of `cycles_per_entry` per
/// probability-matrix entry evaluated.
pub fn comp_overhead(plan: &CompressionPlan, kg: &KnowledgeGraph, coding: &CodingParams) -> f64 {
    coding.cycles_per_entry as f64
        * kg.pair_count() as f64
        * kg.max_relations() as f64
        * plan.matrices_computed as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compress::testutil::{random_case, toy, tr};
    use proptest::prelude::*;

    fn binom(n: usize, k: usize) -> usize {
        if k > n {
            return 0;
        }
        (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn combinations_are_lexicographic() {
        let all: Vec<Vec<usize>> = Combinations::new(4, 2).collect();
        assert_eq!(
            all,
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        assert_eq!(Combinations::new(3, 3).count(), 1);
        assert_eq!(Combinations::new(2, 3).count(), 0);
        for n in 0..8 {
            for k in 1..5 {
                assert_eq!(Combinations::new(n, k).count(), binom(n, k));
            }
        }
    }

    #[test]
    fn zero_rounds_disables_compression() {
        let kg = toy();
        let msg = [tr(&kg, "h1", "r1", "t1")];
        let plan = compress(&kg, MessageRole::Shared, &msg, &CompressOptions::rounds(0)).unwrap();
        assert!(plan.rounds.is_empty());
        assert_eq!(plan.scr, 0.0);
        assert_eq!(plan.matrices_computed, 0);
    }

    #[test]
    fn toy_message_degenerates_fully_in_round_one() {
        let kg = toy();
        let msg = [tr(&kg, "h1", "r1", "t1"), tr(&kg, "h2", "r3", "t2")];
        let plan = compress(&kg, MessageRole::Shared, &msg, &CompressOptions::rounds(1)).unwrap();
        assert_eq!(plan.degenerate_counts(), vec![2]);
        assert_eq!(plan.scr, 1.0);
        assert_eq!(plan.matrices_computed, 1);
        assert_eq!(plan.entries_computed, 4);
    }

    #[test]
    fn minority_relation_never_degenerates() {
        let kg = toy();
        let msg = [tr(&kg, "h1", "r2", "t1")];
        let plan = compress(&kg, MessageRole::Shared, &msg, &CompressOptions::rounds(3)).unwrap();
        assert_eq!(plan.degenerate_counts(), vec![0]);
        assert_eq!(plan.scr, 0.0);
        assert_eq!(plan.matrices_computed, 1);
    }

    #[test]
    fn conditional_round_recovers_minority_relation() {
        // (h1,t1): r1 in {1,2,3}, r2 in {4}; (h2,t2) only in sample 4.
        let ds = crate::kg::SampleDataset::parse(
            "1: (h1,r1,t1)\n2: (h1,r1,t1)\n3: (h1,r1,t1)\n4: (h1,r2,t1); (h2,r3,t2)\n",
        )
        .unwrap();
        let kg = crate::kg::build_kg(&ds).unwrap();
        let msg = [tr(&kg, "h1", "r2", "t1"), tr(&kg, "h2", "r3", "t2")];
        let plan = compress(&kg, MessageRole::Private(1), &msg, &CompressOptions::rounds(2)).unwrap();
        assert_eq!(plan.degenerate_counts(), vec![1, 1]);
        assert_eq!(plan.rounds[1].matrices_built, 1);
        assert_eq!(plan.rounds[1].degenerated[0].context, vec![msg[1]]);
        assert_eq!(plan.scr, 1.0);
        assert_eq!(plan.round_of(0), Some(2));
        assert_eq!(plan.round_of(1), Some(1));
    }

    #[test]
    fn scr_arithmetic() {
        let kg = toy();
        let mut plan = compress(&kg, MessageRole::Shared, &[], &CompressOptions::rounds(0)).unwrap();
        assert_eq!(scr(&plan, 5).unwrap(), 0.0);
        assert!(scr(&plan, 0).is_err());
        let d = |p| Degeneration {
            position: p,
            triple: tr(&kg, "h1", "r1", "t1"),
            context: vec![],
        };
        plan.rounds = vec![
            Round { degenerated: vec![d(0), d(1), d(2)], matrices_built: 1 },
            Round { degenerated: vec![d(3)], matrices_built: 3 },
        ];
        assert_eq!(scr(&plan, 10).unwrap(), 0.4);
        plan.rounds = vec![Round { degenerated: (0..5).map(d).collect(), matrices_built: 1 }];
        assert_eq!(scr(&plan, 5).unwrap(), 1.0);
        assert_eq!(scr(&plan, 4), Err(CompressError::PlanMismatch));
    }

    #[test]
    fn communication_overhead_values() {
        let c = CodingParams::new(1, 32, 10).unwrap();
        assert_eq!(comm_overhead(0.0, 1, &c).unwrap(), 128.0);
        assert_eq!(comm_overhead(1.0, 1, &c).unwrap(), 64.0);
        assert_eq!(comm_overhead(0.4, 10, &c).unwrap(), 1024.0);
        assert!(comm_overhead(1.01, 1, &c).is_err());
        assert!(comm_overhead(-0.1, 1, &c).is_err());
    }

    #[test]
    fn computation_overhead_values() {
        let kg = toy();
        let c = CodingParams::new(1, 32, 10).unwrap();
        let mut plan = compress(&kg, MessageRole::Shared, &[], &CompressOptions::rounds(0)).unwrap();
        assert_eq!(comp_overhead(&plan, &kg, &c), 0.0);
        plan.matrices_computed = 1;
        assert_eq!(comp_overhead(&plan, &kg, &c), 40.0);
        plan.matrices_computed = 1 + binom(3, 1);
        assert_eq!(comp_overhead(&plan, &kg, &c), 160.0);
    }

    #[test]
    fn unknown_pair_is_rejected() {
        let kg = toy();
        let bad = Triple::new(
            kg.symbols().entity("h1").unwrap(),
            kg.symbols().relation("r1").unwrap(),
            kg.symbols().entity("t2").unwrap(),
        );
        assert!(compress(&kg, MessageRole::Shared, &[bad], &CompressOptions::rounds(2)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matrix_count_law(seed in any::<u64>(), rounds in 1usize..5) {
            let (kg, msg) = random_case(seed);
            let plan = compress(&kg, MessageRole::Shared, &msg, &CompressOptions::rounds(rounds)).unwrap();
            let q = plan.degenerate_counts();
            prop_assert_eq!(plan.rounds[0].matrices_built, 1);
            for n in 1..plan.rounds.len() {
                let so_far: usize = q[..n].iter().sum();
                prop_assert_eq!(plan.rounds[n].matrices_built, binom(so_far, n));
            }
            prop_assert!(plan.rounds.len() <= rounds);
        }

        #[test]
        fn more_rounds_never_lower_scr(seed in any::<u64>(), rounds in 0usize..4) {
            let (kg, msg) = random_case(seed);
            let a = compress(&kg, MessageRole::Shared, &msg, &CompressOptions::rounds(rounds)).unwrap();
            let b = compress(&kg, MessageRole::Shared, &msg, &CompressOptions::rounds(rounds + 1)).unwrap();
            prop_assert!(b.scr >= a.scr);
            prop_assert!(comp_overhead(&b, &kg, &CodingParams::default()) >= comp_overhead(&a, &kg, &CodingParams::default()));
            // a shorter run is a prefix of a longer one
            prop_assert_eq!(&b.rounds[..a.rounds.len()], &a.rounds[..]);
        }

        #[test]
        fn each_position_degenerates_at_most_once(seed in any::<u64>()) {
            let (kg, msg) = random_case(seed);
            let plan = compress(&kg, MessageRole::Shared, &msg, &CompressOptions::rounds(4)).unwrap();
            let mut seen = std::collections::BTreeSet::new();
            for r in &plan.rounds {
                for d in &r.degenerated {
                    prop_assert!(seen.insert(d.position));
                    prop_assert_eq!(d.triple, msg[d.position]);
                }
            }
            let again = compress(&kg, MessageRole::Shared, &msg, &CompressOptions::rounds(4)).unwrap();
            prop_assert_eq!(plan, again);
        }
    }
}
