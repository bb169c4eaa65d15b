//! A small neural-network toolkit: layers over a flat `f64` parameter vector,
//! hand-written backward passes, Adam, and a deterministic mini-batch trainer.
//!
//! Every layer owns a slice of one contiguous parameter vector described by a
//! [`ParamLayout`]; gradients use the same layout, which keeps the optimizer,
//! persistence and gradient checking oblivious to network structure.

pub mod adam;
pub mod layers;
pub mod train;

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use layers::{Conv1d, Dense, Embedding, Lstm};
pub use train::{fit, mix_seed, Network, TrainHistory, TrainOptions};

/// How a tensor's entries are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Init {
    Zeros,
    Constant(f64),
    Uniform(f64),
    /// Glorot/Xavier uniform with the given fan-in and fan-out.
    Glorot { fan_in: usize, fan_out: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub offset: usize,
    pub len: usize,
    pub init: Init,
}

impl TensorSpec {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// Named, contiguous tensors inside one flat parameter vector.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamLayout {
    tensors: Vec<TensorSpec>,
    total: usize,
}

impl ParamLayout {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, len: usize, init: Init) -> Range<usize> {
        let spec = TensorSpec {
            name: name.into(),
            offset: self.total,
            len,
            init,
        };
        self.total += len;
        let r = spec.range();
        self.tensors.push(spec);
        r
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn tensors(&self) -> &[TensorSpec] {
        &self.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&TensorSpec> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn init<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut p = vec![0.0; self.total];
        for t in &self.tensors {
            let slice = &mut p[t.range()];
            match t.init {
                Init::Zeros => {}
                Init::Constant(c) => slice.iter_mut().for_each(|x| *x = c),
                Init::Uniform(a) => slice.iter_mut().for_each(|x| *x = rng.gen_range(-a..=a)),
                Init::Glorot { fan_in, fan_out } => {
                    let a = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
                    slice.iter_mut().for_each(|x| *x = rng.gen_range(-a..=a));
                }
            }
        }
        p
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn relu_inplace(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of `probs` against class `label`, clamped away from
/// `ln(0)`.
pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(1e-300).ln()
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
