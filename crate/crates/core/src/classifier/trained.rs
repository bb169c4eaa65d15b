use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FusionNet, ModelConfig, ModelInput, Prediction};
use crate::error::{Error, Result};
use crate::evaluation::{smote, stratified_holdout};
use crate::features::{FeatureBundle, Featurizer, StatsScaler, ThumbnailEmbedder};
use crate::model::{BinaryLabel, VideoRecord};
use crate::nn::{self, Network, TrainHistory, TrainOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHyperparams {
    pub learning_rate: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Early-stopping patience in epochs; `None` trains for every epoch.
    pub patience: Option<usize>,
    /// Share of each class held out for early stopping.
    pub validation_fraction: f64,
    /// Oversample the training part with SMOTE using this many neighbours.
    pub smote_k: Option<usize>,
}

impl Default for TrainHyperparams {
    fn default() -> Self {
        TrainHyperparams {
            learning_rate: 1e-5,
            epsilon: 1e-8,
            epochs: 50,
            batch_size: 32,
            seed: 0,
            patience: Some(5),
            validation_fraction: 0.1,
            smote_k: None,
        }
    }
}

impl TrainHyperparams {
    fn options(&self) -> TrainOptions {
        TrainOptions {
            learning_rate: self.learning_rate,
            epsilon: self.epsilon,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            patience: self.patience,
        }
    }
}

/// A trained classifier with everything needed to featurize and score new
/// videos.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub params: Vec<f64>,
    /// Vocabularies and lexicon the inputs were encoded with.
    pub featurizer: Featurizer,
    pub scaler: StatsScaler,
    /// Decision threshold on the inappropriate probability.
    pub threshold: f64,
    pub history: TrainHistory,
    /// Version of the crate that produced the model.
    pub producer: String,
    net: FusionNet,
}

/// Network input for a bundle under `scaler`.
pub(crate) fn model_input(scaler: &StatsScaler, b: &FeatureBundle) -> ModelInput {
    ModelInput {
        title: b.title.content().to_vec(),
        tags: b.tags.content().to_vec(),
        thumbnail: b.thumbnail.values.iter().map(|&v| v as f64).collect(),
        stats: scaler.transform(&b.stats_style),
    }
}

/// SMOTE over the numeric part (thumbnail then statistics). Synthetic inputs
/// take their token sequences from whichever source point they lie nearer.
pub(crate) fn oversample(inputs: Vec<ModelInput>, labels: Vec<usize>, k: usize, seed: u64) -> (Vec<ModelInput>, Vec<usize>) {
    let rows: Vec<Vec<f64>> = inputs
        .iter()
        .map(|x| x.thumbnail.iter().chain(&x.stats).copied().collect())
        .collect();
    let n_thumb = inputs.first().map_or(0, |x| x.thumbnail.len());
    let (mut xs, mut ys) = (inputs, labels);
    for s in smote(&rows, &ys, k, seed) {
        let src = &xs[s.nearer()];
        let x = ModelInput {
            title: src.title.clone(),
            tags: src.tags.clone(),
            thumbnail: s.row[..n_thumb].to_vec(),
            stats: s.row[n_thumb..].to_vec(),
        };
        xs.push(x);
        ys.push(s.label);
    }
    (xs, ys)
}

impl TrainedModel {
    /// Train a model on labelled bundles encoded with `featurizer`.
    pub fn fit(config: ModelConfig, featurizer: &Featurizer, data: &[(FeatureBundle, usize)], hp: &TrainHyperparams) -> Result<Self> {
        config.validate()?;
        let vocab_dims = [
            ("title vocabulary", config.title_vocab_size, featurizer.title_vocab.size()),
            ("tags vocabulary", config.tags_vocab_size, featurizer.tags_vocab.size()),
        ];
        for (what, expected, actual) in vocab_dims {
            if expected != actual {
                return Err(Error::DimensionMismatch { what, expected, actual });
            }
        }
        if hp.learning_rate <= 0.0 {
            return Err(Error::Config {
                key: "learning_rate".into(),
                message: "must be positive".into(),
            });
        }
        let labels: Vec<usize> = data.iter().map(|(_, y)| *y).collect();
        for class in 0..config.n_classes {
            if !labels.contains(&class) {
                return Err(Error::MissingClass(class));
            }
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= config.n_classes) {
            return Err(Error::InvalidArgument(format!("label {y} outside {} classes", config.n_classes)));
        }

        let net = FusionNet::new(config.clone())?;
        let (train_idx, val_idx) = if hp.patience.is_some() && hp.validation_fraction > 0.0 {
            stratified_holdout(&labels, hp.validation_fraction, hp.seed)
        } else {
            ((0..data.len()).collect(), Vec::new())
        };
        let stats_rows: Vec<Vec<f64>> = train_idx.iter().map(|&i| data[i].0.stats_style.clone()).collect();
        let scaler = StatsScaler::fit(&stats_rows);
        let to_inputs = |idx: &[usize]| -> Result<(Vec<ModelInput>, Vec<usize>)> {
            let mut xs = Vec::with_capacity(idx.len());
            for &i in idx {
                let x = model_input(&scaler, &data[i].0);
                net.check_input(&x)?;
                xs.push(x);
            }
            Ok((xs, idx.iter().map(|&i| labels[i]).collect()))
        };
        let (mut train_x, mut train_y) = to_inputs(&train_idx)?;
        let (val_x, val_y) = to_inputs(&val_idx)?;
        if let Some(k) = hp.smote_k {
            (train_x, train_y) = oversample(train_x, train_y, k, hp.seed);
        }

        let train: Vec<(ModelInput, usize)> = train_x.into_iter().zip(train_y).collect();
        let val: Vec<(ModelInput, usize)> = val_x.into_iter().zip(val_y).collect();
        let mut params = net.init_params(hp.seed);
        let history = nn::fit(&net, &mut params, &train, Some(&val), &hp.options());
        log::debug!(
            "trained {} epochs, final train loss {:?}",
            history.train_loss.len(),
            history.final_train_loss()
        );
        Ok(TrainedModel {
            config,
            params,
            featurizer: featurizer.clone(),
            scaler,
            threshold: 0.5,
            history,
            producer: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_string(),
            net,
        })
    }

    /// Reassemble a model from stored parts.
    pub(crate) fn from_parts(
        config: ModelConfig,
        params: Vec<f64>,
        featurizer: Featurizer,
        scaler: StatsScaler,
        threshold: f64,
        history: TrainHistory,
        producer: String,
    ) -> Result<Self> {
        let net = FusionNet::new(config.clone())?;
        if params.len() != net.layout().len() {
            return Err(Error::DimensionMismatch {
                what: "parameter vector",
                expected: net.layout().len(),
                actual: params.len(),
            });
        }
        Ok(TrainedModel {
            config,
            params,
            featurizer,
            scaler,
            threshold,
            history,
            producer,
            net,
        })
    }

    pub fn network(&self) -> &FusionNet {
        &self.net
    }

    pub fn input(&self, b: &FeatureBundle) -> Result<ModelInput> {
        if self.config.branches.stats && b.stats_style.len() != self.config.stats_dim {
            return Err(Error::DimensionMismatch {
                what: "statistics/style vector",
                expected: self.config.stats_dim,
                actual: b.stats_style.len(),
            });
        }
        let x = model_input(&self.scaler, b);
        self.net.check_input(&x)?;
        Ok(x)
    }

    pub fn predict(&self, b: &FeatureBundle) -> Result<Prediction> {
        let x = self.input(b)?;
        Ok(Prediction::from_probs(self.net.predict_proba(&self.params, &x)))
    }

    pub fn predict_batch(&self, bundles: &[FeatureBundle]) -> Result<Vec<Prediction>> {
        bundles.par_iter().map(|b| self.predict(b)).collect()
    }

    /// Probability mass on the inappropriate side: the second class of a
    /// binary model, disturbing plus restricted for a four-class one.
    pub fn inappropriate_probability(&self, p: &Prediction) -> f64 {
        match self.config.n_classes {
            2 => p.probs[1],
            _ => p.probs[1] + p.probs[2],
        }
    }

    pub fn binary_label(&self, p: &Prediction) -> BinaryLabel {
        if self.inappropriate_probability(p) >= self.threshold {
            BinaryLabel::Inappropriate
        } else {
            BinaryLabel::Appropriate
        }
    }

    /// Featurize and classify one record.
    pub fn classify_record(
        &self,
        r: &VideoRecord,
        embedder: &ThumbnailEmbedder,
        base_dir: Option<&std::path::Path>,
    ) -> Result<(BinaryLabel, f64)> {
        let thumb = embedder.embed_ref(r.thumbnail_ref.as_deref(), base_dir);
        let b = self.featurizer.featurize(r, thumb);
        let p = self.predict(&b)?;
        Ok((self.binary_label(&p), self.inappropriate_probability(&p)))
    }
}
