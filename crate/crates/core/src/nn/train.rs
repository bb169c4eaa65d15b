//! Deterministic mini-batch training.
//!
//! A batch is cut into fixed-size chunks whose gradients are computed in
//! parallel and then summed in chunk order, so results do not depend on the
//! thread count. Dropout masks come from per-example RNG streams derived from
//! `(seed, epoch, example index)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Adam, ParamLayout};

/// Examples per gradient chunk.
const CHUNK: usize = 8;

/// A differentiable classifier over a flat parameter vector.
pub trait Network: Sync {
    type Input: Sync;

    fn layout(&self) -> &ParamLayout;

    fn n_classes(&self) -> usize;

    /// Fresh parameters.
    fn init_params(&self, seed: u64) -> Vec<f64>;

    /// Cross-entropy of one example. With `dropout_seed` set the network runs
    /// in training mode using the mask drawn from that seed; with `grad` set
    /// the parameter gradient is accumulated into it.
    fn loss(&self, params: &[f64], x: &Self::Input, label: usize, dropout_seed: Option<u64>, grad: Option<&mut [f64]>) -> f64;

    /// Class probabilities in inference mode.
    fn predict_proba(&self, params: &[f64], x: &Self::Input) -> Vec<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub learning_rate: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop after this many epochs without validation-loss improvement and
    /// restore the best parameters. Ignored without validation data.
    pub patience: Option<usize>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            learning_rate: 1e-5,
            epsilon: 1e-8,
            epochs: 50,
            batch_size: 32,
            seed: 0,
            patience: Some(5),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean training loss of each epoch (dropout active).
    pub train_loss: Vec<f64>,
    /// Validation loss after each epoch, when validation data was given.
    pub val_loss: Vec<f64>,
    /// Epoch whose parameters were kept (0-based).
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn final_train_loss(&self) -> Option<f64> {
        self.train_loss.last().copied()
    }
}

pub fn mix_seed(parts: &[u64]) -> u64 {
    // SplitMix64 finalizer folded over the parts.
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

/// Mean inference-mode loss over a dataset.
pub fn mean_loss<N: Network>(net: &N, params: &[f64], data: &[(N::Input, usize)]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let losses: Vec<f64> = data
        .par_iter()
        .map(|(x, y)| net.loss(params, x, *y, None, None))
        .collect();
    losses.iter().sum::<f64>() / data.len() as f64
}

/// Train `params` in place with Adam on mean cross-entropy.
pub fn fit<N: Network>(
    net: &N,
    params: &mut Vec<f64>,
    train: &[(N::Input, usize)],
    validation: Option<&[(N::Input, usize)]>,
    opts: &TrainOptions,
) -> TrainHistory {
    let n_params = params.len();
    let mut adam = Adam::new(n_params, opts.learning_rate, opts.epsilon);
    let mut history = TrainHistory::default();
    let batch_size = opts.batch_size.max(1);
    let n_chunks = batch_size.div_ceil(CHUNK);
    let mut buffers: Vec<Vec<f64>> = vec![vec![0.0; n_params]; n_chunks];
    let mut total = vec![0.0; n_params];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, Vec<f64>, usize)> = None;
    let mut since_best = 0;

    for epoch in 0..opts.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[opts.seed, epoch as u64, 0x5eed]));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;

        for batch in order.chunks(batch_size) {
            let chunks: Vec<&[usize]> = batch.chunks(CHUNK).collect();
            let losses: Vec<f64> = buffers[..chunks.len()]
                .par_iter_mut()
                .zip(chunks.par_iter())
                .map(|(buf, idxs)| {
                    buf.iter_mut().for_each(|g| *g = 0.0);
                    let mut loss = 0.0;
                    for &i in idxs.iter() {
                        let (x, y) = &train[i];
                        let seed = mix_seed(&[opts.seed, epoch as u64, i as u64]);
                        loss += net.loss(params, x, *y, Some(seed), Some(buf.as_mut_slice()));
                    }
                    loss
                })
                .collect();
            epoch_loss += losses.iter().sum::<f64>();

            let scale = 1.0 / batch.len() as f64;
            total.copy_from_slice(&buffers[0]);
            for buf in &buffers[1..chunks.len()] {
                for (t, g) in total.iter_mut().zip(buf) {
                    *t += g;
                }
            }
            total.iter_mut().for_each(|g| *g *= scale);
            adam.step(params, &total);
        }
        history.train_loss.push(epoch_loss / train.len().max(1) as f64);

        if let Some(val) = validation.filter(|v| !v.is_empty()) {
            let vl = mean_loss(net, params, val);
            history.val_loss.push(vl);
            match &best {
                Some((b, _, _)) if vl >= *b => since_best += 1,
                _ => {
                    best = Some((vl, params.clone(), epoch));
                    since_best = 0;
                }
            }
            if opts.patience.is_some_and(|p| since_best >= p) {
                break;
            }
        }
    }

    history.best_epoch = history.train_loss.len().saturating_sub(1);
    if let Some((_, p, epoch)) = best {
        *params = p;
        history.best_epoch = epoch;
    }
    history
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{softmax, Dense};

    /// Multinomial logistic regression, enough to exercise the trainer.
    struct Logistic {
        layout: ParamLayout,
        dense: Dense,
    }

    impl Logistic {
        fn new(d: usize, k: usize) -> Self {
            let mut layout = ParamLayout::new();
            let dense = Dense::new(&mut layout, "out", d, k);
            Logistic { layout, dense }
        }
    }

    impl Network for Logistic {
        type Input = Vec<f64>;

        fn layout(&self) -> &ParamLayout {
            &self.layout
        }

        fn n_classes(&self) -> usize {
            self.dense.output
        }

        fn init_params(&self, seed: u64) -> Vec<f64> {
            self.layout.init(&mut ChaCha8Rng::seed_from_u64(seed))
        }

        fn loss(&self, p: &[f64], x: &Vec<f64>, y: usize, _d: Option<u64>, grad: Option<&mut [f64]>) -> f64 {
            let probs = softmax(&self.dense.forward(p, x));
            if let Some(g) = grad {
                let mut dy = probs.clone();
                dy[y] -= 1.0;
                self.dense.backward(p, x, &dy, g, None);
            }
            crate::nn::cross_entropy(&probs, y)
        }

        fn predict_proba(&self, p: &[f64], x: &Vec<f64>) -> Vec<f64> {
            softmax(&self.dense.forward(p, x))
        }
    }

    fn blobs() -> Vec<(Vec<f64>, usize)> {
        (0..60)
            .map(|i| {
                let y = i % 2;
                let s = if y == 0 { -1.0 } else { 1.0 };
                (vec![s + 0.01 * i as f64, 1.0], y)
            })
            .collect()
    }

    fn opts(seed: u64) -> TrainOptions {
        TrainOptions {
            learning_rate: 0.05,
            epochs: 40,
            batch_size: 10,
            seed,
            patience: None,
            ..Default::default()
        }
    }

    #[test]
    fn loss_decreases_and_runs_are_reproducible() {
        let net = Logistic::new(2, 2);
        let data = blobs();
        let mut a = net.init_params(1);
        let ha = fit(&net, &mut a, &data, None, &opts(3));
        assert!(ha.train_loss.last().unwrap() < &ha.train_loss[0]);
        let mut b = net.init_params(1);
        let hb = fit(&net, &mut b, &data, None, &opts(3));
        assert_eq!(ha.final_train_loss(), hb.final_train_loss());
        assert_eq!(a, b);
    }

    #[test]
    fn batch_size_not_a_multiple_of_chunk() {
        let net = Logistic::new(2, 2);
        let data = blobs();
        let mut p = net.init_params(0);
        let o = TrainOptions { batch_size: 13, ..opts(0) };
        let h = fit(&net, &mut p, &data, None, &o);
        assert_eq!(h.train_loss.len(), 40);
    }

    #[test]
    fn early_stopping_restores_best() {
        let net = Logistic::new(2, 2);
        let data = blobs();
        let val = data[..10].to_vec();
        let mut p = net.init_params(0);
        let o = TrainOptions {
            epochs: 200,
            patience: Some(2),
            ..opts(0)
        };
        let h = fit(&net, &mut p, &data, Some(&val), &o);
        let best = h.val_loss.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(h.val_loss[h.best_epoch], best);
        assert!((mean_loss(&net, &p, &val) - best).abs() < 1e-12);
    }
}
