use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::nn::train::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Entropy,
    Gini,
}

impl Criterion {
    fn impurity(self, counts: &[f64], total: f64) -> f64 {
        if total <= 0.0 {
            return 0.0;
        }
        match self {
            Criterion::Entropy => counts
                .iter()
                .filter(|&&c| c > 0.0)
                .map(|&c| {
                    let p = c / total;
                    -p * p.log2()
                })
                .sum(),
            Criterion::Gini => 1.0 - counts.iter().map(|&c| (c / total) * (c / total)).sum::<f64>(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Node {
    Leaf(Vec<f64>),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART classification tree grown until leaves are pure or unsplittable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionTree {
    pub criterion: Criterion,
    /// Features examined per split; `None` examines all.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    pub seed: u64,
    nodes: Vec<Node>,
}

struct Grow<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    rng: ChaCha8Rng,
}

impl DecisionTree {
    pub fn new(criterion: Criterion) -> Self {
        DecisionTree {
            criterion,
            max_features: None,
            min_samples_split: 2,
            seed: 0,
            nodes: Vec::new(),
        }
    }

    pub fn fit(&mut self, x: &[Vec<f64>], y: &[usize], n_classes: usize) {
        let idx: Vec<usize> = (0..x.len()).collect();
        self.fit_indices(x, y, n_classes, idx);
    }

    /// Fit on the (possibly repeated) rows `idx`.
    pub fn fit_indices(&mut self, x: &[Vec<f64>], y: &[usize], n_classes: usize, idx: Vec<usize>) {
        self.nodes.clear();
        let mut g = Grow {
            x,
            y,
            n_classes,
            rng: ChaCha8Rng::seed_from_u64(self.seed),
        };
        self.grow(&mut g, idx);
    }

    fn distribution(g: &Grow, idx: &[usize]) -> Vec<f64> {
        let mut c = vec![0.0; g.n_classes];
        for &i in idx {
            c[g.y[i]] += 1.0;
        }
        c
    }

    /// Best `(gain, feature, threshold)` over the candidate features.
    fn best_split(&self, g: &mut Grow, idx: &[usize], parent: &[f64]) -> Option<(f64, usize, f64)> {
        let d = g.x[idx[0]].len();
        let mut features: Vec<usize> = (0..d).collect();
        let wanted = self.max_features.map_or(d, |m| m.clamp(1, d));
        if wanted < d {
            features.shuffle(&mut g.rng);
        }
        let n = idx.len() as f64;
        let parent_imp = self.criterion.impurity(parent, n);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut examined = 0;
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(idx.len());
        for f in features {
            // Keep drawing past constant features, as long as fewer than
            // `wanted` informative ones have been seen.
            if examined >= wanted {
                break;
            }
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (g.x[i][f], g.y[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            if pairs[0].0 == pairs[pairs.len() - 1].0 {
                continue;
            }
            examined += 1;
            let mut left = vec![0.0; g.n_classes];
            let mut right = parent.to_vec();
            for k in 0..pairs.len() - 1 {
                let c = pairs[k].1;
                left[c] += 1.0;
                right[c] -= 1.0;
                if pairs[k].0 == pairs[k + 1].0 {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = n - nl;
                let child = (nl * self.criterion.impurity(&left, nl) + nr * self.criterion.impurity(&right, nr)) / n;
                let gain = parent_imp - child;
                if gain > 1e-12 && best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, f, (pairs[k].0 + pairs[k + 1].0) / 2.0));
                }
            }
        }
        best
    }

    fn grow(&mut self, g: &mut Grow, idx: Vec<usize>) -> usize {
        let dist = Self::distribution(g, &idx);
        let pure = dist.iter().filter(|&&c| c > 0.0).count() <= 1;
        let id = self.nodes.len();
        let total: f64 = dist.iter().sum();
        self.nodes.push(Node::Leaf(dist.iter().map(|c| c / total.max(1.0)).collect()));
        if pure || idx.len() < self.min_samples_split {
            return id;
        }
        let Some((_, feature, threshold)) = self.best_split(g, &idx, &dist) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| g.x[i][feature] <= threshold);
        let left = self.grow(g, l);
        let right = self.grow(g, r);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf(p) => return p.clone(),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

/// Bagged trees with `sqrt(d)` features per split; probabilities are the
/// mean over trees.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_trees: usize,
    pub criterion: Criterion,
    pub seed: u64,
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn new(n_trees: usize, criterion: Criterion, seed: u64) -> Self {
        RandomForest {
            n_trees,
            criterion,
            seed,
            trees: Vec::new(),
        }
    }

    pub fn fit(&mut self, x: &[Vec<f64>], y: &[usize], n_classes: usize) {
        let d = x.first().map_or(1, Vec::len);
        let max_features = ((d as f64).sqrt() as usize).max(1);
        self.trees = (0..self.n_trees)
            .into_par_iter()
            .map(|t| {
                let seed = mix_seed(&[self.seed, t as u64]);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let idx: Vec<usize> = (0..x.len()).map(|_| rng.gen_range(0..x.len())).collect();
                let mut tree = DecisionTree::new(self.criterion);
                tree.max_features = Some(max_features);
                tree.seed = seed;
                tree.fit_indices(x, y, n_classes, idx);
                tree
            })
            .collect();
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut p: Vec<f64> = Vec::new();
        for t in &self.trees {
            let q = t.predict_proba(x);
            if p.is_empty() {
                p = vec![0.0; q.len()];
            }
            p.iter_mut().zip(&q).for_each(|(a, b)| *a += b / self.trees.len() as f64);
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_of_even_split_is_one_bit() {
        assert!((Criterion::Entropy.impurity(&[2.0, 2.0], 4.0) - 1.0).abs() < 1e-12);
        assert_eq!(Criterion::Entropy.impurity(&[4.0, 0.0], 4.0), 0.0);
    }

    #[test]
    fn tree_fits_xor() {
        let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y = vec![0, 1, 1, 0];
        let mut t = DecisionTree::new(Criterion::Entropy);
        t.fit(&x, &y, 2);
        // XOR has zero gain on the first split under either feature.
        assert_eq!(t.n_nodes(), 1);
        let x = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let y = vec![0, 0, 1, 1];
        t.fit(&x, &y, 2);
        assert_eq!(t.predict_proba(&[0.4]), vec![1.0, 0.0]);
        assert_eq!(t.predict_proba(&[2.6]), vec![0.0, 1.0]);
    }

    #[test]
    fn forest_separates_blobs_and_is_reproducible() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 2) as f64 * 3.0 + (i as f64) * 0.01, 0.5]).collect();
        let y: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let mut f = RandomForest::new(20, Criterion::Entropy, 7);
        f.fit(&x, &y, 2);
        assert!(f.predict_proba(&[3.1, 0.5])[1] > 0.9);
        let mut g = RandomForest::new(20, Criterion::Entropy, 7);
        g.fit(&x, &y, 2);
        assert_eq!(f.predict_proba(&[1.4, 0.5]), g.predict_proba(&[1.4, 0.5]));
    }
}
