//! The comparison classifiers.

pub mod bayes;
pub mod knn;
pub mod neural;
pub mod svm;
pub mod tree;

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use bayes::BernoulliNb;
pub use knn::{KdTree, Knn};
pub use neural::{CnnDdnn, Ddnn};
pub use svm::{Gamma, Svm};
pub use tree::{Criterion, DecisionTree, RandomForest};

/// A baseline and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum BaselineSpec {
    NaiveBayes { alpha: f64 },
    Knn { n_neighbors: usize, leaf_size: usize },
    DecisionTree { criterion: Criterion },
    Svm { c: f64, gamma: Gamma },
    RandomForest { n_trees: usize, criterion: Criterion },
    Ddnn { hidden: usize, dropout: f64 },
    CnnDdnn { embed: usize, filters: usize, kernel: usize, hidden: usize, dropout: f64 },
}

impl BaselineSpec {
    pub const NAMES: [&'static str; 7] = [
        "naive_bayes",
        "knn",
        "decision_tree",
        "svm",
        "random_forest",
        "ddnn",
        "cnn_ddnn",
    ];

    pub fn all() -> Vec<BaselineSpec> {
        Self::NAMES.iter().map(|n| n.parse().expect("known name")).collect()
    }

    pub fn name(&self) -> &'static str {
        match self {
            BaselineSpec::NaiveBayes { .. } => "naive_bayes",
            BaselineSpec::Knn { .. } => "knn",
            BaselineSpec::DecisionTree { .. } => "decision_tree",
            BaselineSpec::Svm { .. } => "svm",
            BaselineSpec::RandomForest { .. } => "random_forest",
            BaselineSpec::Ddnn { .. } => "ddnn",
            BaselineSpec::CnnDdnn { .. } => "cnn_ddnn",
        }
    }
}

impl FromStr for BaselineSpec {
    type Err = Error;

    /// The named baseline with its default parameters.
    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(match s {
            "naive_bayes" => BaselineSpec::NaiveBayes { alpha: 1.0 },
            "knn" => BaselineSpec::Knn {
                n_neighbors: 8,
                leaf_size: 10,
            },
            "decision_tree" => BaselineSpec::DecisionTree {
                criterion: Criterion::Entropy,
            },
            "svm" => BaselineSpec::Svm {
                c: 10.0,
                gamma: Gamma::Auto,
            },
            "random_forest" => BaselineSpec::RandomForest {
                n_trees: 100,
                criterion: Criterion::Entropy,
            },
            "ddnn" => BaselineSpec::Ddnn {
                hidden: 512,
                dropout: 0.5,
            },
            "cnn_ddnn" => BaselineSpec::CnnDdnn {
                embed: 32,
                filters: 32,
                kernel: 3,
                hidden: 512,
                dropout: 0.5,
            },
            other => return Err(Error::UnknownBaseline(other.to_string())),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        assert_eq!(
            "knn".parse::<BaselineSpec>().unwrap(),
            BaselineSpec::Knn {
                n_neighbors: 8,
                leaf_size: 10
            }
        );
        assert_eq!(
            "svm".parse::<BaselineSpec>().unwrap(),
            BaselineSpec::Svm {
                c: 10.0,
                gamma: Gamma::Auto
            }
        );
        assert_eq!("naive_bayes".parse::<BaselineSpec>().unwrap(), BaselineSpec::NaiveBayes { alpha: 1.0 });
        assert!(matches!(
            "random_forest".parse::<BaselineSpec>().unwrap(),
            BaselineSpec::RandomForest {
                n_trees: 100,
                criterion: Criterion::Entropy
            }
        ));
        assert!(matches!("xgboost".parse::<BaselineSpec>(), Err(Error::UnknownBaseline(_))));
        for spec in BaselineSpec::all() {
            assert_eq!(spec.name().parse::<BaselineSpec>().unwrap(), spec);
        }
    }
}
