//! Turning a [`VideoRecord`] into the classifier's four inputs, plus the
//! descriptive term and engagement reports.

pub mod porter;
pub mod reports;
pub mod style;
pub mod text;
pub mod thumbnail;
pub mod vocab;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use style::{style_features, Dictionary, EmoticonDetector, StatsScaler, StatsStyleVector, StyleLexicon, STATS_STYLE_DIM};
pub use text::{jaccard, tokenize, tokenize_and_stem};
pub use thumbnail::{EmbeddingBackbone, StubBackbone, ThumbnailEmbedder, ThumbnailEmbedding, THUMBNAIL_DIM};
pub use vocab::{build_vocab, encode, EncodedText, TextField, Vocabulary, TAGS_LEN, TITLE_LEN};

use crate::model::VideoRecord;

/// Everything the classifier consumes for one video. The statistics and
/// style block is raw; scaling is part of the trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBundle {
    pub video_id: String,
    pub title: EncodedText,
    pub tags: EncodedText,
    pub thumbnail: ThumbnailEmbedding,
    pub stats_style: Vec<f64>,
}

/// Vocabularies and lexicon needed to featurize records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Featurizer {
    pub title_vocab: Vocabulary,
    pub tags_vocab: Vocabulary,
    pub lexicon: StyleLexicon,
}

impl Featurizer {
    /// Build both vocabularies from `records`.
    pub fn fit<'a>(records: impl IntoIterator<Item = &'a VideoRecord> + Clone, lexicon: StyleLexicon) -> Self {
        Featurizer {
            title_vocab: vocab::build_field_vocab(records.clone(), TextField::Title),
            tags_vocab: vocab::build_field_vocab(records, TextField::Tags),
            lexicon,
        }
    }

    pub fn featurize(&self, r: &VideoRecord, thumbnail: ThumbnailEmbedding) -> FeatureBundle {
        FeatureBundle {
            video_id: r.video_id.clone(),
            title: vocab::encode_tokens(&TextField::Title.tokens(r), &self.title_vocab, TITLE_LEN),
            tags: vocab::encode_tokens(&TextField::Tags.tokens(r), &self.tags_vocab, TAGS_LEN),
            thumbnail,
            stats_style: style_features(r, &self.lexicon).to_vec(),
        }
    }

    /// Featurize records in parallel, resolving thumbnails through `embedder`.
    /// Output order follows input order.
    pub fn featurize_all(
        &self,
        records: &[VideoRecord],
        embedder: &ThumbnailEmbedder,
        base_dir: Option<&Path>,
    ) -> Vec<FeatureBundle> {
        records
            .par_iter()
            .map(|r| self.featurize(r, embedder.embed_ref(r.thumbnail_ref.as_deref(), base_dir)))
            .collect()
    }
}
