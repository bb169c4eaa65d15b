use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classifier::ModelInput;
use crate::classifier::network::dropout_mask;
use crate::nn::layers::ConvCache;
use crate::nn::{cross_entropy, relu_inplace, softmax, Conv1d, Dense, Embedding, Network, ParamLayout};

/// Dense hidden layer with ReLU and dropout followed by a softmax layer,
/// shared by both neural baselines.
#[derive(Debug, Clone)]
struct Head {
    hidden: Dense,
    out: Dense,
    dropout: f64,
}

struct HeadTrace {
    pre: Vec<f64>,
    mask: Option<Vec<f64>>,
    a: Vec<f64>,
    probs: Vec<f64>,
}

impl Head {
    fn new(layout: &mut ParamLayout, input: usize, hidden: usize, n_classes: usize, dropout: f64) -> Self {
        Head {
            hidden: Dense::new(layout, "hidden", input, hidden),
            out: Dense::new(layout, "output", hidden, n_classes),
            dropout,
        }
    }

    fn forward(&self, p: &[f64], z: &[f64], seed: Option<u64>) -> HeadTrace {
        let pre = self.hidden.forward(p, z);
        let mut a = pre.clone();
        relu_inplace(&mut a);
        let mask = seed
            .filter(|_| self.dropout > 0.0)
            .map(|s| dropout_mask(s, a.len(), self.dropout));
        if let Some(m) = &mask {
            a.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
        }
        let probs = softmax(&self.out.forward(p, &a));
        HeadTrace { pre, mask, a, probs }
    }

    /// Backward through both layers; returns the gradient of `z[dz_range]`.
    fn backward(&self, p: &[f64], z: &[f64], t: &HeadTrace, y: usize, grad: &mut [f64], dz_len: usize) -> Vec<f64> {
        let mut dl = t.probs.clone();
        dl[y] -= 1.0;
        let mut da = vec![0.0; t.a.len()];
        let n = da.len();
        self.out.backward(p, &t.a, &dl, grad, Some((&mut da, 0..n)));
        for (j, d) in da.iter_mut().enumerate() {
            if t.pre[j] <= 0.0 {
                *d = 0.0;
            } else if let Some(m) = &t.mask {
                *d *= m[j];
            }
        }
        let mut dz = vec![0.0; z.len()];
        self.hidden.backward(p, z, &da, grad, (dz_len > 0).then_some((&mut dz, 0..dz_len)));
        dz.truncate(dz_len);
        dz
    }
}

/// Two dense layers over a flat feature vector.
#[derive(Debug, Clone)]
pub struct Ddnn {
    layout: ParamLayout,
    head: Head,
    n_classes: usize,
}

impl Ddnn {
    pub fn new(input: usize, hidden: usize, n_classes: usize, dropout: f64) -> Self {
        let mut layout = ParamLayout::new();
        let head = Head::new(&mut layout, input, hidden, n_classes, dropout);
        Ddnn { layout, head, n_classes }
    }
}

impl Network for Ddnn {
    type Input = Vec<f64>;

    fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn init_params(&self, seed: u64) -> Vec<f64> {
        self.layout.init(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn loss(&self, p: &[f64], x: &Vec<f64>, y: usize, seed: Option<u64>, grad: Option<&mut [f64]>) -> f64 {
        let t = self.head.forward(p, x, seed);
        if let Some(g) = grad {
            self.head.backward(p, x, &t, y, g, 0);
        }
        cross_entropy(&t.probs, y)
    }

    fn predict_proba(&self, p: &[f64], x: &Vec<f64>) -> Vec<f64> {
        self.head.forward(p, x, None).probs
    }
}

/// Convolution over the title embeddings followed by the tags embeddings,
/// max-pooled and concatenated with the numeric features, feeding a
/// two-layer dense head.
#[derive(Debug, Clone)]
pub struct CnnDdnn {
    layout: ParamLayout,
    title_embedding: Embedding,
    tags_embedding: Embedding,
    conv: Conv1d,
    head: Head,
    n_classes: usize,
}

impl CnnDdnn {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        title_vocab: usize,
        tags_vocab: usize,
        embed: usize,
        filters: usize,
        kernel: usize,
        numeric: usize,
        hidden: usize,
        n_classes: usize,
        dropout: f64,
    ) -> Self {
        let mut layout = ParamLayout::new();
        let title_embedding = Embedding::new(&mut layout, "title_embedding", title_vocab, embed);
        let tags_embedding = Embedding::new(&mut layout, "tags_embedding", tags_vocab, embed);
        let conv = Conv1d::new(&mut layout, "conv", embed, filters, kernel);
        let head = Head::new(&mut layout, filters + numeric, hidden, n_classes, dropout);
        CnnDdnn {
            layout,
            title_embedding,
            tags_embedding,
            conv,
            head,
            n_classes,
        }
    }

    fn sequence(&self, p: &[f64], x: &ModelInput) -> Vec<Vec<f64>> {
        x.title
            .iter()
            .map(|&t| self.title_embedding.lookup(p, t).to_vec())
            .chain(x.tags.iter().map(|&t| self.tags_embedding.lookup(p, t).to_vec()))
            .collect()
    }

    fn forward(&self, p: &[f64], x: &ModelInput, seed: Option<u64>) -> (Vec<Vec<f64>>, ConvCache, Vec<f64>, HeadTrace) {
        let xs = self.sequence(p, x);
        let (pooled, cache) = self.conv.forward(p, &xs);
        let mut z = pooled;
        z.extend(x.thumbnail.iter().chain(&x.stats));
        let t = self.head.forward(p, &z, seed);
        (xs, cache, z, t)
    }
}

impl Network for CnnDdnn {
    type Input = ModelInput;

    fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn init_params(&self, seed: u64) -> Vec<f64> {
        self.layout.init(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn loss(&self, p: &[f64], x: &ModelInput, y: usize, seed: Option<u64>, grad: Option<&mut [f64]>) -> f64 {
        let (xs, cache, z, t) = self.forward(p, x, seed);
        if let Some(g) = grad {
            let dpool = self.head.backward(p, &z, &t, y, g, self.conv.filters);
            let dxs = self.conv.backward(p, &xs, &cache, &dpool, g);
            let n_title = x.title.len();
            for (k, dx) in dxs.iter().enumerate() {
                if k < n_title {
                    self.title_embedding.backward(x.title[k], dx, g);
                } else {
                    self.tags_embedding.backward(x.tags[k - n_title], dx, g);
                }
            }
        }
        cross_entropy(&t.probs, y)
    }

    fn predict_proba(&self, p: &[f64], x: &ModelInput) -> Vec<f64> {
        self.forward(p, x, None).3.probs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check<N: Network>(net: &N, x: &N::Input, y: usize) {
        let p = net.init_params(4);
        let mut grad = vec![0.0; p.len()];
        net.loss(&p, x, y, Some(9), Some(&mut grad));
        let mut q = p.clone();
        let h = 1e-5;
        for i in 0..p.len() {
            q[i] = p[i] + h;
            let up = net.loss(&q, x, y, Some(9), None);
            q[i] = p[i] - h;
            let down = net.loss(&q, x, y, Some(9), None);
            q[i] = p[i];
            let num = (up - down) / (2.0 * h);
            let err = (grad[i] - num).abs() / grad[i].abs().max(num.abs()).max(1e-6);
            assert!(err < 1e-4, "param {i}: {} vs {num}", grad[i]);
        }
    }

    #[test]
    fn ddnn_gradients() {
        let net = Ddnn::new(5, 6, 3, 0.5);
        check(&net, &vec![0.5, -1.0, 0.0, 2.0, 0.3], 2);
    }

    #[test]
    fn cnn_gradients() {
        let net = CnnDdnn::new(5, 6, 3, 4, 2, 3, 6, 2, 0.5);
        let x = ModelInput {
            title: vec![1, 4, 2],
            tags: vec![5, 3],
            thumbnail: vec![0.2, 0.0],
            stats: vec![-0.7],
        };
        check(&net, &x, 1);
    }
}
