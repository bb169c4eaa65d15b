use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::nn::layers::LstmCache;
use crate::nn::{cross_entropy, relu_inplace, softmax, Dense, Embedding, Lstm, Network, ParamLayout};

/// One example as the network sees it: token indices without padding, the
/// thumbnail embedding, and the scaled statistics/style vector. Branches the
/// configuration disables may carry empty fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInput {
    pub title: Vec<u32>,
    pub tags: Vec<u32>,
    pub thumbnail: Vec<f64>,
    pub stats: Vec<f64>,
}

#[derive(Debug, Clone)]
struct TextBranch {
    embedding: Embedding,
    lstm: Lstm,
    max_len: usize,
}

impl TextBranch {
    fn new(layout: &mut ParamLayout, name: &str, vocab: usize, embed: usize, units: usize, max_len: usize) -> Self {
        TextBranch {
            embedding: Embedding::new(layout, &format!("{name}_embedding"), vocab, embed),
            lstm: Lstm::new(layout, &format!("{name}_lstm"), embed, units),
            max_len,
        }
    }

    fn tokens<'a>(&self, t: &'a [u32]) -> &'a [u32] {
        &t[..t.len().min(self.max_len)]
    }

    fn forward(&self, params: &[f64], tokens: &[u32]) -> (Vec<f64>, LstmCache) {
        let xs = self
            .tokens(tokens)
            .iter()
            .map(|&t| self.embedding.lookup(params, t).to_vec())
            .collect();
        self.lstm.forward(params, xs)
    }

    fn backward(&self, params: &[f64], tokens: &[u32], cache: &LstmCache, dh: &[f64], grad: &mut [f64]) {
        let dxs = self.lstm.backward(params, cache, dh, grad);
        for (&t, dx) in self.tokens(tokens).iter().zip(&dxs) {
            self.embedding.backward(t, dx, grad);
        }
    }
}

/// The fusion network over a flat parameter vector. Branch outputs are
/// concatenated in the order title, tags, statistics/style, thumbnail.
#[derive(Debug, Clone)]
pub struct FusionNet {
    config: ModelConfig,
    layout: ParamLayout,
    title: Option<TextBranch>,
    tags: Option<TextBranch>,
    stats: Option<Dense>,
    fusion: Dense,
    out: Dense,
}

struct Trace {
    title: Option<LstmCache>,
    tags: Option<LstmCache>,
    stats_pre: Vec<f64>,
    z: Vec<f64>,
    fusion_pre: Vec<f64>,
    mask: Option<Vec<f64>>,
    a: Vec<f64>,
    probs: Vec<f64>,
}

/// Inverted-dropout mask: each unit kept with probability `1 - rate` and
/// scaled by `1 / (1 - rate)`.
pub(crate) fn dropout_mask(seed: u64, n: usize, rate: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = 1.0 - rate;
    (0..n)
        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect()
}

impl FusionNet {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let b = c.branches;
        let mut layout = ParamLayout::new();
        let title = b
            .title
            .then(|| TextBranch::new(&mut layout, "title", c.title_vocab_size, c.embed_dim, c.lstm_units, c.title_len));
        let tags = b
            .tags
            .then(|| TextBranch::new(&mut layout, "tags", c.tags_vocab_size, c.embed_dim, c.lstm_units, c.tags_len));
        let stats = b
            .stats
            .then(|| Dense::new(&mut layout, "stats_dense", c.stats_dim, c.stats_hidden));
        let fusion = Dense::new(&mut layout, "fusion_dense", c.fusion_input_dim(), c.fusion_units);
        let out = Dense::new(&mut layout, "output", c.fusion_units, c.n_classes);
        Ok(FusionNet {
            config,
            layout,
            title,
            tags,
            stats,
            fusion,
            out,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn fusion_input_dim(&self) -> usize {
        self.fusion.input
    }

    pub fn output_units(&self) -> usize {
        self.out.output
    }

    /// Check an input against the configuration.
    pub fn check_input(&self, x: &ModelInput) -> Result<()> {
        let c = &self.config;
        let dims = [
            ("thumbnail", c.branches.thumbnail, c.thumbnail_dim, x.thumbnail.len()),
            ("statistics/style vector", c.branches.stats, c.stats_dim, x.stats.len()),
        ];
        for (what, on, expected, actual) in dims {
            if on && expected != actual {
                return Err(Error::DimensionMismatch { what, expected, actual });
            }
        }
        let tokens = [
            ("title token", c.branches.title, c.title_vocab_size, &x.title),
            ("tags token", c.branches.tags, c.tags_vocab_size, &x.tags),
        ];
        for (what, on, size, toks) in tokens {
            if let Some(&t) = toks.iter().find(|&&t| on && t as usize >= size) {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: size,
                    actual: t as usize,
                });
            }
        }
        if x.thumbnail.iter().chain(&x.stats).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite model input".into()));
        }
        Ok(())
    }

    fn forward(&self, params: &[f64], x: &ModelInput, dropout_seed: Option<u64>) -> Trace {
        let mut z = Vec::with_capacity(self.fusion.input);
        let title = self.title.as_ref().map(|br| {
            let (h, cache) = br.forward(params, &x.title);
            z.extend_from_slice(&h);
            cache
        });
        let tags = self.tags.as_ref().map(|br| {
            let (h, cache) = br.forward(params, &x.tags);
            z.extend_from_slice(&h);
            cache
        });
        let mut stats_pre = Vec::new();
        if let Some(d) = &self.stats {
            stats_pre = d.forward(params, &x.stats);
            let mut s = stats_pre.clone();
            relu_inplace(&mut s);
            z.extend_from_slice(&s);
        }
        if self.config.branches.thumbnail {
            z.extend_from_slice(&x.thumbnail);
        }
        let fusion_pre = self.fusion.forward(params, &z);
        let mut a = fusion_pre.clone();
        relu_inplace(&mut a);
        let mask = dropout_seed
            .filter(|_| self.config.dropout > 0.0)
            .map(|seed| dropout_mask(seed, a.len(), self.config.dropout));
        if let Some(m) = &mask {
            a.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
        }
        let probs = softmax(&self.out.forward(params, &a));
        Trace {
            title,
            tags,
            stats_pre,
            z,
            fusion_pre,
            mask,
            a,
            probs,
        }
    }

    fn backward(&self, params: &[f64], x: &ModelInput, label: usize, t: &Trace, grad: &mut [f64]) {
        let mut dlogits = t.probs.clone();
        dlogits[label] -= 1.0;
        let mut da = vec![0.0; t.a.len()];
        let n = da.len();
        self.out.backward(params, &t.a, &dlogits, grad, Some((&mut da, 0..n)));
        for (j, d) in da.iter_mut().enumerate() {
            if t.fusion_pre[j] <= 0.0 {
                *d = 0.0;
            } else if let Some(m) = &t.mask {
                *d *= m[j];
            }
        }
        // The thumbnail sits last and has no upstream parameters.
        let thumb = if self.config.branches.thumbnail { self.config.thumbnail_dim } else { 0 };
        let upstream = t.z.len() - thumb;
        let mut dz = vec![0.0; t.z.len()];
        self.fusion.backward(params, &t.z, &da, grad, Some((&mut dz, 0..upstream)));

        let mut off = 0;
        let units = self.config.lstm_units;
        if let (Some(br), Some(cache)) = (&self.title, &t.title) {
            br.backward(params, &x.title, cache, &dz[off..off + units], grad);
            off += units;
        }
        if let (Some(br), Some(cache)) = (&self.tags, &t.tags) {
            br.backward(params, &x.tags, cache, &dz[off..off + units], grad);
            off += units;
        }
        if let Some(d) = &self.stats {
            let ds: Vec<f64> = dz[off..off + d.output]
                .iter()
                .zip(&t.stats_pre)
                .map(|(g, p)| if *p > 0.0 { *g } else { 0.0 })
                .collect();
            d.backward(params, &x.stats, &ds, grad, None);
        }
    }

    /// Fusing-layer activations after ReLU and, when `dropout_seed` is set,
    /// dropout.
    pub fn fusion_activations(&self, params: &[f64], x: &ModelInput, dropout_seed: Option<u64>) -> Vec<f64> {
        self.forward(params, x, dropout_seed).a
    }
}

impl Network for FusionNet {
    type Input = ModelInput;

    fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn n_classes(&self) -> usize {
        self.config.n_classes
    }

    fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut p = self.layout.init(&mut ChaCha8Rng::seed_from_u64(seed));
        for br in self.title.iter().chain(&self.tags) {
            br.lstm.init_forget_bias(&mut p);
        }
        p
    }

    fn loss(&self, params: &[f64], x: &ModelInput, label: usize, dropout_seed: Option<u64>, grad: Option<&mut [f64]>) -> f64 {
        let t = self.forward(params, x, dropout_seed);
        if let Some(g) = grad {
            self.backward(params, x, label, &t, g);
        }
        cross_entropy(&t.probs, label)
    }

    fn predict_proba(&self, params: &[f64], x: &ModelInput) -> Vec<f64> {
        self.forward(params, x, None).probs
    }
}
