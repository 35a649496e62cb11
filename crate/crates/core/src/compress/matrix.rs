use crate::kg::{Conditioning, KgError, KnowledgeGraph, Triple};
use serde::{Deserialize, Serialize};

/// Row-major `pair_count × max_relations` grid of (conditional) triple
/// probabilities. Rows of pairs with fewer relations are zero-padded.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    conditioning: Vec<Triple>,
}

impl ProbabilityMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    /// Triples this matrix is conditioned on; empty for the base matrix.
    pub fn conditioning(&self) -> &[Triple] {
        &self.conditioning
    }
}

/// Evaluates one padded matrix row without building the whole matrix.
pub(crate) fn row_values(
    kg: &KnowledgeGraph,
    row: usize,
    conditioning: Option<&Conditioning>,
) -> Vec<f64> {
    let quad = kg.quadruple(row);
    let mut out = vec![0.0; kg.max_relations()];
    match conditioning {
        None => {
            let total: usize = quad.relations().iter().map(|(_, s)| s.len()).sum();
            for (c, (_, s)) in quad.relations().iter().enumerate() {
                out[c] = s.len() as f64 / total as f64;
            }
        }
        Some(cond) => {
            for (c, (_, s)) in quad.relations().iter().enumerate() {
                out[c] = cond.probability(s);
            }
        }
    }
    out
}

pub fn build_matrix(
    kg: &KnowledgeGraph,
    conditioning: &[Triple],
) -> Result<ProbabilityMatrix, KgError> {
    let cond = if conditioning.is_empty() {
        None
    } else {
        Some(Conditioning::new(kg, conditioning)?)
    };
    let (rows, cols) = (kg.pair_count(), kg.max_relations());
    let mut values = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        values.extend(row_values(kg, r, cond.as_ref()));
    }
    Ok(ProbabilityMatrix {
        rows,
        cols,
        values,
        conditioning: conditioning.to_vec(),
    })
}

/// How a probability-matrix row decides which relation can be omitted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TieRule {
    /// Only a strict, unique, positive row maximum certifies a relation.
    /// Reconstruction is then always exact.
    #[default]
    Strict,
    /// Any entry equal to a positive row maximum degenerates; the receiver
    /// resolves ties to the lowest relation ID, which may be wrong.
    LowestRelation,
}

impl TieRule {
    /// Column the receiver decodes for this row, if the row certifies one.
    pub fn certify(self, row: &[f64]) -> Option<usize> {
        let (mut best, mut best_col, mut ties) = (0.0_f64, None, 0usize);
        for (c, &v) in row.iter().enumerate() {
            if v > best {
                best = v;
                best_col = Some(c);
                ties = 1;
            } else if v == best && best_col.is_some() {
                ties += 1;
            }
        }
        match self {
            TieRule::Strict if ties > 1 => None,
            _ => best_col,
        }
    }

    /// Whether the triple at `col` may drop its relation given this row.
    pub fn degenerates(self, row: &[f64], col: usize) -> bool {
        match self {
            TieRule::Strict => self.certify(row) == Some(col),
            TieRule::LowestRelation => match self.certify(row) {
                Some(c) => row[col] == row[c],
                None => false,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{build_kg, conditional_probability, SampleDataset};

    fn toy() -> KnowledgeGraph {
        let ds = SampleDataset::parse(
            "1: (h1,r1,t1); (h2,r3,t2)\n2: (h1,r1,t1); (h2,r3,t2)\n3: (h1,r1,t1)\n4: (h1,r2,t1)\n",
        )
        .unwrap();
        build_kg(&ds).unwrap()
    }

    #[test]
    fn base_matrix_of_toy_graph() {
        let kg = toy();
        let m = build_matrix(&kg, &[]).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 2));
        assert_eq!(m.row(0), &[0.75, 0.25]);
        assert_eq!(m.row(1), &[1.0, 0.0]);
        assert!(m.conditioning().is_empty());
    }

    #[test]
    fn conditional_matrix_matches_pointwise_probabilities() {
        let kg = toy();
        let given = kg.symbols().triple("h1", "r1", "t1").unwrap();
        let m = build_matrix(&kg, &[given]).unwrap();
        assert_eq!(m.row(1), &[1.0, 0.0]);
        for (r, q) in kg.quadruples().iter().enumerate() {
            for (c, (rel, _)) in q.relations().iter().enumerate() {
                let t = Triple::new(q.head, *rel, q.tail);
                assert_eq!(m.get(r, c), conditional_probability(&kg, &t, &given).unwrap());
            }
        }
    }

    #[test]
    fn single_relation_graph_is_first_column_ones() {
        let ds = SampleDataset::parse("1: (a,r,b); (c,s,d)\n2: (a,r,b)\n3: (e,r,f)\n").unwrap();
        let kg = build_kg(&ds).unwrap();
        let m = build_matrix(&kg, &[]).unwrap();
        assert_eq!(m.cols(), 1);
        for r in 0..m.rows() {
            assert_eq!(m.row(r), &[1.0]);
        }
        // with a wider graph the padding stays zero
        let ds = SampleDataset::parse("1: (a,r,b); (c,s,d)\n2: (a,t,b)\n").unwrap();
        let kg = build_kg(&ds).unwrap();
        let m = build_matrix(&kg, &[]).unwrap();
        assert_eq!(m.row(kg.row_of(kg.symbols().entity("c").unwrap(), kg.symbols().entity("d").unwrap()).unwrap()), &[1.0, 0.0]);
    }

    #[test]
    fn conditioning_on_unknown_triple_fails() {
        let kg = toy();
        let bogus = Triple::new(
            kg.symbols().entity("h1").unwrap(),
            kg.symbols().relation("r3").unwrap(),
            kg.symbols().entity("t1").unwrap(),
        );
        assert!(build_matrix(&kg, &[bogus]).is_err());
    }

    #[test]
    fn tie_rules() {
        assert_eq!(TieRule::Strict.certify(&[0.75, 0.25]), Some(0));
        assert_eq!(TieRule::Strict.certify(&[0.5, 0.5]), None);
        assert_eq!(TieRule::Strict.certify(&[0.0, 0.0]), None);
        assert_eq!(TieRule::LowestRelation.certify(&[0.5, 0.5]), Some(0));
        assert!(TieRule::LowestRelation.degenerates(&[0.5, 0.5], 1));
        assert!(!TieRule::Strict.degenerates(&[0.5, 0.5], 1));
        assert!(!TieRule::Strict.degenerates(&[0.75, 0.25], 1));
        assert!(TieRule::Strict.degenerates(&[0.25, 0.75, 0.0], 1));
    }
}
