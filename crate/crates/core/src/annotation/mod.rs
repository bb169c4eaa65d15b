//! Annotation: the vote store and task queue, majority aggregation, Fleiss'
//! κ, and the HTTP endpoints the labelling UI talks to.

mod server;
mod store;

use crate::error::{Error, Result};
use crate::model::{Label, Verdict};

pub use server::{serve, ServerHandle};
pub use store::{AnnotationStore, Event, Export, LabelDefinition, Progress, SubmitOutcome, TaskPayload, VOTES_PER_VIDEO};

/// Majority label of at least three votes. When no label has a strict
/// plurality with two or more votes, the video is excluded.
pub fn aggregate(votes: &[Label]) -> Result<Verdict> {
    if votes.len() < 3 {
        return Err(Error::InsufficientRaters(votes.len()));
    }
    let mut counts = [0usize; 4];
    for v in votes {
        counts[v.index()] += 1;
    }
    let top = *counts.iter().max().expect("four classes");
    let winners: Vec<usize> = (0..4).filter(|&i| counts[i] == top).collect();
    Ok(match winners[..] {
        [w] if top >= 2 => Verdict::Agreed(Label::from_index(w).expect("class index")),
        _ => Verdict::Excluded,
    })
}

/// Per-item category counts with a constant number of raters per item.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    rows: Vec<Vec<usize>>,
    raters: usize,
}

impl RatingMatrix {
    pub fn new(rows: Vec<Vec<usize>>) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidArgument("rating matrix needs at least one item".into()))?;
        let k = first.len();
        let raters: usize = first.iter().sum();
        if k == 0 {
            return Err(Error::InvalidArgument("rating matrix needs at least one category".into()));
        }
        if raters < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 raters per item, got {raters}")));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != k {
                return Err(Error::DimensionMismatch {
                    what: "rating matrix categories",
                    expected: k,
                    actual: r.len(),
                });
            }
            let s: usize = r.iter().sum();
            if s != raters {
                return Err(Error::InvalidArgument(format!(
                    "item {i} has {s} ratings, expected {raters} like the first item"
                )));
            }
        }
        Ok(RatingMatrix { rows, raters })
    }

    pub fn items(&self) -> usize {
        self.rows.len()
    }

    pub fn raters(&self) -> usize {
        self.raters
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }
}

/// Fleiss' κ. When chance agreement is 1 (every rating in one category),
/// κ is 1 if observed agreement is also perfect and an error otherwise.
pub fn fleiss_kappa(m: &RatingMatrix) -> Result<f64> {
    let n = m.raters as f64;
    let big_n = m.items() as f64;
    let k = m.rows[0].len();
    let p_bar = m
        .rows
        .iter()
        .map(|r| (r.iter().map(|&c| (c * c) as f64).sum::<f64>() - n) / (n * (n - 1.0)))
        .sum::<f64>()
        / big_n;
    let p_e: f64 = (0..k)
        .map(|j| {
            let p = m.rows.iter().map(|r| r[j] as f64).sum::<f64>() / (big_n * n);
            p * p
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return if (p_bar - 1.0).abs() < 1e-15 {
            Ok(1.0)
        } else {
            Err(Error::DegenerateChanceAgreement)
        };
    }
    if (p_bar - 1.0).abs() < 1e-15 {
        return Ok(1.0);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Label::*;

    #[test]
    fn majority_rules() {
        assert_eq!(aggregate(&[Suitable, Suitable, Disturbing]).unwrap(), Verdict::Agreed(Suitable));
        assert_eq!(aggregate(&[Suitable, Disturbing, Restricted]).unwrap(), Verdict::Excluded);
        assert_eq!(aggregate(&[Disturbing; 3]).unwrap(), Verdict::Agreed(Disturbing));
        assert!(matches!(aggregate(&[Suitable, Suitable]), Err(Error::InsufficientRaters(2))));
        // Tie between two labels with two votes each.
        assert_eq!(aggregate(&[Suitable, Suitable, Restricted, Restricted]).unwrap(), Verdict::Excluded);
        assert_eq!(aggregate(&[Suitable, Suitable, Restricted, Irrelevant]).unwrap(), Verdict::Agreed(Suitable));
    }

    #[test]
    fn unanimous_is_one() {
        let m = RatingMatrix::new(vec![vec![3, 0, 0, 0], vec![0, 3, 0, 0], vec![0, 0, 0, 3]]).unwrap();
        assert_eq!(fleiss_kappa(&m).unwrap(), 1.0);
        let single = RatingMatrix::new(vec![vec![0, 3, 0, 0]; 4]).unwrap();
        assert_eq!(fleiss_kappa(&single).unwrap(), 1.0);
    }

    #[test]
    fn textbook_example() {
        // Ten items, fourteen raters, five categories; κ ≈ 0.210.
        let rows = vec![
            vec![0, 0, 0, 0, 14],
            vec![0, 2, 6, 4, 2],
            vec![0, 0, 3, 5, 6],
            vec![0, 3, 9, 2, 0],
            vec![2, 2, 8, 1, 1],
            vec![7, 7, 0, 0, 0],
            vec![3, 2, 6, 3, 0],
            vec![2, 5, 3, 2, 2],
            vec![6, 5, 2, 1, 0],
            vec![0, 2, 2, 3, 7],
        ];
        let k = fleiss_kappa(&RatingMatrix::new(rows).unwrap()).unwrap();
        assert!((k - 0.20993).abs() < 1e-4, "{k}");
    }

    #[test]
    fn malformed_matrices() {
        assert!(RatingMatrix::new(vec![]).is_err());
        assert!(RatingMatrix::new(vec![vec![3, 0], vec![2, 0]]).is_err());
        assert!(RatingMatrix::new(vec![vec![1, 0]]).is_err());
    }

    proptest! {
        #[test]
        fn aggregate_ignores_vote_order(votes in prop::collection::vec(0usize..4, 3..8), rot in 0usize..8) {
            let v: Vec<Label> = votes.iter().map(|&i| Label::from_index(i).unwrap()).collect();
            let mut w = v.clone();
            w.rotate_left(rot % v.len());
            w.reverse();
            prop_assert_eq!(aggregate(&v).unwrap(), aggregate(&w).unwrap());
        }

        #[test]
        fn kappa_is_bounded_and_relabel_invariant(
            raw in prop::collection::vec(prop::collection::vec(0usize..4, 3), 1..12),
            perm in Just([0usize, 1, 2, 3]).prop_shuffle(),
        ) {
            let rows: Vec<Vec<usize>> = raw.iter().map(|votes| {
                let mut r = vec![0; 4];
                votes.iter().for_each(|&v| r[v] += 1);
                r
            }).collect();
            let permuted: Vec<Vec<usize>> = rows.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect();
            let a = fleiss_kappa(&RatingMatrix::new(rows.clone()).unwrap());
            let b = fleiss_kappa(&RatingMatrix::new(permuted).unwrap());
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    prop_assert!((a - b).abs() < 1e-12);
                    prop_assert!(a <= 1.0 + 1e-12);
                    let concentrated = rows.iter().all(|r| r.iter().any(|&c| c == 3));
                    prop_assert_eq!((a - 1.0).abs() < 1e-12, concentrated);
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "relabelling changed definedness"),
            }
        }
    }
}
