use std::collections::BinaryHeap;

use ordered::Ordered;

mod ordered {
    /// `f64` with a total order, for the candidate heap.
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct Ordered(pub f64, pub usize);

    impl Eq for Ordered {}

    impl PartialOrd for Ordered {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }

    impl Ord for Ordered {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(Vec<usize>),
    Split {
        dim: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// k-d tree over the training rows, split on the widest dimension at the
/// median.
#[derive(Debug, Clone)]
pub struct KdTree {
    rows: Vec<Vec<f64>>,
    root: Node,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KdTree {
    pub fn build(rows: Vec<Vec<f64>>, leaf_size: usize) -> Self {
        let idx: Vec<usize> = (0..rows.len()).collect();
        let root = Self::build_node(&rows, idx, leaf_size.max(1));
        KdTree { rows, root }
    }

    fn build_node(rows: &[Vec<f64>], mut idx: Vec<usize>, leaf_size: usize) -> Node {
        if idx.len() <= leaf_size {
            return Node::Leaf(idx);
        }
        let d = rows[idx[0]].len();
        let (mut dim, mut spread) = (0, -1.0);
        for k in 0..d {
            let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                (lo.min(rows[i][k]), hi.max(rows[i][k]))
            });
            if hi - lo > spread {
                spread = hi - lo;
                dim = k;
            }
        }
        if spread <= 0.0 {
            return Node::Leaf(idx);
        }
        idx.sort_by(|&a, &b| rows[a][dim].total_cmp(&rows[b][dim]).then(a.cmp(&b)));
        let mid = idx.len() / 2;
        let value = rows[idx[mid]][dim];
        let right = idx.split_off(mid);
        Node::Split {
            dim,
            value,
            left: Box::new(Self::build_node(rows, idx, leaf_size)),
            right: Box::new(Self::build_node(rows, right, leaf_size)),
        }
    }

    /// Indices of the `k` nearest rows, closest first (ties by index).
    pub fn nearest(&self, q: &[f64], k: usize) -> Vec<usize> {
        let mut heap: BinaryHeap<Ordered> = BinaryHeap::new();
        self.search(&self.root, q, k, &mut heap);
        let mut out = heap.into_sorted_vec();
        out.truncate(k);
        out.into_iter().map(|o| o.1).collect()
    }

    fn search(&self, node: &Node, q: &[f64], k: usize, heap: &mut BinaryHeap<Ordered>) {
        match node {
            Node::Leaf(idx) => {
                for &i in idx {
                    let c = Ordered(sq_dist(q, &self.rows[i]), i);
                    if heap.len() < k {
                        heap.push(c);
                    } else if heap.peek().is_some_and(|top| c < *top) {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[*dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, heap);
                // Points equal to the split value live on the right, so the
                // far side must be visited on a tie as well.
                if heap.len() < k || diff * diff <= heap.peek().map_or(f64::INFINITY, |t| t.0) {
                    self.search(far, q, k, heap);
                }
            }
        }
    }
}

/// k-nearest-neighbour classifier with uniform votes.
#[derive(Debug, Clone)]
pub struct Knn {
    pub n_neighbors: usize,
    pub leaf_size: usize,
    tree: Option<KdTree>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl Knn {
    pub fn new(n_neighbors: usize, leaf_size: usize) -> Self {
        Knn {
            n_neighbors,
            leaf_size,
            tree: None,
            labels: Vec::new(),
            n_classes: 0,
        }
    }

    pub fn fit(&mut self, x: &[Vec<f64>], y: &[usize], n_classes: usize) {
        self.tree = Some(KdTree::build(x.to_vec(), self.leaf_size));
        self.labels = y.to_vec();
        self.n_classes = n_classes;
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let tree = self.tree.as_ref().expect("fit before predict");
        let nn = tree.nearest(x, self.n_neighbors);
        let mut p = vec![0.0; self.n_classes];
        for &i in &nn {
            p[self.labels[i]] += 1.0 / nn.len() as f64;
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(rows: &[Vec<f64>], q: &[f64], k: usize) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = rows.iter().enumerate().map(|(i, r)| (sq_dist(q, r), i)).collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.into_iter().take(k).map(|x| x.1).collect()
    }

    proptest! {
        #[test]
        fn tree_matches_brute_force(
            pts in prop::collection::vec(prop::collection::vec(0i32..6, 3), 1..60),
            q in prop::collection::vec(0i32..6, 3),
            k in 1usize..10,
        ) {
            let rows: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|&v| v as f64).collect()).collect();
            let q: Vec<f64> = q.iter().map(|&v| v as f64).collect();
            let tree = KdTree::build(rows.clone(), 4);
            prop_assert_eq!(tree.nearest(&q, k), brute(&rows, &q, k));
        }
    }

    #[test]
    fn votes_follow_neighbours() {
        let x = vec![vec![0.0], vec![0.1], vec![0.2], vec![5.0]];
        let y = vec![0, 0, 1, 1];
        let mut m = Knn::new(3, 10);
        m.fit(&x, &y, 2);
        let p = m.predict_proba(&[0.0]);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
    }
}
