//! The four-branch fusion classifier: title and tags LSTMs, a thumbnail
//! passthrough and a dense statistics/style branch, concatenated into a
//! dense fusing layer with dropout and a softmax head.

mod format;
pub(crate) mod network;
pub(crate) mod trained;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Featurizer, STATS_STYLE_DIM, TAGS_LEN, THUMBNAIL_DIM, TITLE_LEN};

pub use format::{from_bytes, load, save, to_bytes, FORMAT_MAGIC, FORMAT_VERSION};
pub use network::{FusionNet, ModelInput};
pub use trained::{TrainHyperparams, TrainedModel};

/// Which input branches are present. Disabled branches are removed from the
/// architecture, shrinking the fusion input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Branches {
    pub thumbnail: bool,
    pub title: bool,
    pub tags: bool,
    pub stats: bool,
}

impl Branches {
    pub const ALL: Branches = Branches {
        thumbnail: true,
        title: true,
        tags: true,
        stats: true,
    };

    /// Every non-empty subset, in a fixed order: single branches first,
    /// then pairs, triples and the full set.
    pub fn subsets() -> Vec<Branches> {
        let mut out: Vec<Branches> = (1u8..16)
            .map(|m| Branches {
                thumbnail: m & 1 != 0,
                title: m & 2 != 0,
                tags: m & 4 != 0,
                stats: m & 8 != 0,
            })
            .collect();
        out.sort_by_key(|b| (b.count(), b.mask()));
        out
    }

    fn mask(self) -> u8 {
        self.thumbnail as u8 | (self.title as u8) << 1 | (self.tags as u8) << 2 | (self.stats as u8) << 3
    }

    pub fn count(self) -> usize {
        self.mask().count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.count() == 0
    }
}

impl fmt::Display for Branches {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.thumbnail, "thumbnail"),
            (self.title, "title"),
            (self.tags, "tags"),
            (self.stats, "stats_style"),
        ]
        .into_iter()
        .filter_map(|(on, n)| on.then_some(n))
        .collect();
        f.write_str(&names.join("+"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub title_len: usize,
    pub tags_len: usize,
    pub title_vocab_size: usize,
    pub tags_vocab_size: usize,
    pub lstm_units: usize,
    /// Width of the raw statistics and style vector.
    pub stats_dim: usize,
    pub stats_hidden: usize,
    pub thumbnail_dim: usize,
    pub fusion_units: usize,
    pub dropout: f64,
    pub n_classes: usize,
    pub branches: Branches,
}

impl ModelConfig {
    pub fn new(title_vocab_size: usize, tags_vocab_size: usize, n_classes: usize) -> Self {
        ModelConfig {
            embed_dim: 32,
            title_len: TITLE_LEN,
            tags_len: TAGS_LEN,
            title_vocab_size,
            tags_vocab_size,
            lstm_units: 32,
            stats_dim: STATS_STYLE_DIM,
            stats_hidden: 25,
            thumbnail_dim: THUMBNAIL_DIM,
            fusion_units: 512,
            dropout: 0.5,
            n_classes,
            branches: Branches::ALL,
        }
    }

    /// Default architecture sized to `f`'s vocabularies.
    pub fn for_featurizer(f: &Featurizer, n_classes: usize) -> Self {
        Self::new(f.title_vocab.size(), f.tags_vocab.size(), n_classes)
    }

    pub fn with_branches(mut self, branches: Branches) -> Self {
        self.branches = branches;
        self
    }

    /// Width of the concatenated branch outputs.
    pub fn fusion_input_dim(&self) -> usize {
        let b = self.branches;
        b.title as usize * self.lstm_units
            + b.tags as usize * self.lstm_units
            + b.thumbnail as usize * self.thumbnail_dim
            + b.stats as usize * self.stats_hidden
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| {
            Err(Error::Config {
                key: key.into(),
                message: message.into(),
            })
        };
        if self.n_classes != 2 && self.n_classes != 4 {
            return bad("n_classes", "must be 2 or 4");
        }
        if self.branches.is_empty() {
            return bad("branches", "at least one branch is required");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout", "must lie in [0, 1)");
        }
        let b = self.branches;
        let dims = [
            ("fusion_units", self.fusion_units, true),
            ("embed_dim", self.embed_dim, b.title || b.tags),
            ("lstm_units", self.lstm_units, b.title || b.tags),
            ("title_vocab_size", self.title_vocab_size, b.title),
            ("tags_vocab_size", self.tags_vocab_size, b.tags),
            ("thumbnail_dim", self.thumbnail_dim, b.thumbnail),
            ("stats_dim", self.stats_dim, b.stats),
            ("stats_hidden", self.stats_hidden, b.stats),
        ];
        for (key, v, needed) in dims {
            if needed && v == 0 {
                return bad(key, "must be positive");
            }
        }
        Ok(())
    }
}

/// Class probabilities and their argmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probs: Vec<f64>,
    pub class: usize,
}

impl Prediction {
    pub fn from_probs(probs: Vec<f64>) -> Self {
        let class = crate::nn::argmax(&probs);
        Prediction { probs, class }
    }
}
