use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baselines::*;
use super::metrics::{compute_metrics, FoldMetrics, MetricsReport, METRICS_HEADER};
use super::FoldPlan;
use crate::classifier::trained::{model_input, oversample};
use crate::classifier::{Branches, ModelConfig, ModelInput, TrainHyperparams, TrainedModel};
use crate::error::{Error, Result};
use crate::features::{FeatureBundle, Featurizer, StatsScaler};
use crate::nn::train::mix_seed;
use crate::nn::{self, Network, TrainOptions};

/// Labelled bundles together with the featurizer that encoded them.
#[derive(Debug, Clone, Copy)]
pub struct EvalData<'a> {
    pub featurizer: &'a Featurizer,
    pub bundles: &'a [FeatureBundle],
    pub labels: &'a [usize],
    pub n_classes: usize,
}

impl EvalData<'_> {
    fn check(&self, plan: &FoldPlan) -> Result<()> {
        if self.bundles.len() != self.labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} bundles but {} labels",
                self.bundles.len(),
                self.labels.len()
            )));
        }
        if plan.n_samples() != self.labels.len() {
            return Err(Error::InvalidArgument(format!(
                "fold plan covers {} samples, data has {}",
                plan.n_samples(),
                self.labels.len()
            )));
        }
        Ok(())
    }
}

/// One fold's train and test inputs. The scaler and the oversampling see
/// only the training part.
#[derive(Debug, Clone)]
pub struct FoldData {
    pub scaler: StatsScaler,
    pub train: Vec<ModelInput>,
    pub train_labels: Vec<usize>,
    pub test: Vec<ModelInput>,
    pub test_labels: Vec<usize>,
}

pub fn prepare_fold(data: &EvalData, plan: &FoldPlan, fold: usize, smote_k: Option<usize>, seed: u64) -> FoldData {
    let train_idx = plan.train_indices(fold);
    let test_idx = plan.test_indices(fold);
    let rows: Vec<Vec<f64>> = train_idx.iter().map(|&i| data.bundles[i].stats_style.clone()).collect();
    let scaler = StatsScaler::fit(&rows);
    let mut train: Vec<ModelInput> = train_idx.iter().map(|&i| model_input(&scaler, &data.bundles[i])).collect();
    let mut train_labels: Vec<usize> = train_idx.iter().map(|&i| data.labels[i]).collect();
    if let Some(k) = smote_k {
        (train, train_labels) = oversample(train, train_labels, k, seed);
    }
    FoldData {
        test: test_idx.iter().map(|&i| model_input(&scaler, &data.bundles[i])).collect(),
        test_labels: test_idx.iter().map(|&i| data.labels[i]).collect(),
        scaler,
        train,
        train_labels,
    }
}

/// Flat numeric view for the classical baselines: thumbnail, scaled
/// statistics/style, then token presence indicators over both vocabularies.
pub fn flatten(x: &ModelInput, title_vocab: usize, tags_vocab: usize) -> Vec<f64> {
    let base = x.thumbnail.len() + x.stats.len();
    let mut v = Vec::with_capacity(base + title_vocab + tags_vocab);
    v.extend(x.thumbnail.iter().chain(&x.stats));
    v.resize(base + title_vocab + tags_vocab, 0.0);
    for &t in &x.title {
        v[base + t as usize] = 1.0;
    }
    for &t in &x.tags {
        v[base + title_vocab + t as usize] = 1.0;
    }
    v
}

fn fold_metrics(y_true: &[usize], probs: Vec<Vec<f64>>, n_classes: usize) -> Result<FoldMetrics> {
    let y_pred: Vec<usize> = probs.iter().map(|p| nn::argmax(p)).collect();
    compute_metrics(y_true, &y_pred, &probs, n_classes)
}

fn fold_hp(hp: &TrainHyperparams, fold: usize) -> TrainHyperparams {
    TrainHyperparams {
        seed: mix_seed(&[hp.seed, fold as u64]),
        ..hp.clone()
    }
}

/// Cross-validate the fusion model. Each fold trains on its training part
/// (oversampled when `hp.smote_k` is set) and is scored on its test part.
pub fn cross_validate(config: &ModelConfig, data: &EvalData, plan: &FoldPlan, hp: &TrainHyperparams) -> Result<MetricsReport> {
    data.check(plan)?;
    let folds: Vec<FoldMetrics> = (0..plan.k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<(FeatureBundle, usize)> = plan
                .train_indices(f)
                .into_iter()
                .map(|i| (data.bundles[i].clone(), data.labels[i]))
                .collect();
            let model = TrainedModel::fit(config.clone(), data.featurizer, &train, &fold_hp(hp, f))?;
            let test = plan.test_indices(f);
            let probs = test
                .iter()
                .map(|&i| model.predict(&data.bundles[i]).map(|p| p.probs))
                .collect::<Result<Vec<_>>>()?;
            let y: Vec<usize> = test.iter().map(|&i| data.labels[i]).collect();
            fold_metrics(&y, probs, data.n_classes)
        })
        .collect::<Result<_>>()?;
    Ok(MetricsReport::from_folds(folds))
}

fn train_options(hp: &TrainHyperparams, seed: u64) -> TrainOptions {
    TrainOptions {
        learning_rate: hp.learning_rate,
        epsilon: hp.epsilon,
        epochs: hp.epochs,
        batch_size: hp.batch_size,
        seed,
        patience: None,
    }
}

fn baseline_fold(spec: &BaselineSpec, data: &EvalData, fd: &FoldData, hp: &TrainHyperparams, seed: u64) -> Vec<Vec<f64>> {
    let n = data.n_classes;
    let (tv, gv) = (data.featurizer.title_vocab.size(), data.featurizer.tags_vocab.size());
    let flat = |xs: &[ModelInput]| -> Vec<Vec<f64>> { xs.iter().map(|x| flatten(x, tv, gv)).collect() };
    let (x, y) = (&fd.train, &fd.train_labels);
    match spec {
        BaselineSpec::CnnDdnn {
            embed,
            filters,
            kernel,
            hidden,
            dropout,
        } => {
            let numeric = x.first().map_or(0, |x| x.thumbnail.len() + x.stats.len());
            let net = CnnDdnn::new(tv, gv, *embed, *filters, *kernel, numeric, *hidden, n, *dropout);
            let train: Vec<(ModelInput, usize)> = x.iter().cloned().zip(y.iter().copied()).collect();
            let mut p = net.init_params(seed);
            nn::fit(&net, &mut p, &train, None, &train_options(hp, seed));
            fd.test.iter().map(|t| net.predict_proba(&p, t)).collect()
        }
        BaselineSpec::Ddnn { hidden, dropout } => {
            let xs = flat(x);
            let net = Ddnn::new(xs.first().map_or(0, Vec::len), *hidden, n, *dropout);
            let train: Vec<(Vec<f64>, usize)> = xs.into_iter().zip(y.iter().copied()).collect();
            let mut p = net.init_params(seed);
            nn::fit(&net, &mut p, &train, None, &train_options(hp, seed));
            flat(&fd.test).iter().map(|t| net.predict_proba(&p, t)).collect()
        }
        _ => {
            let xs = flat(x);
            let test = flat(&fd.test);
            let predict: Box<dyn Fn(&[f64]) -> Vec<f64> + Sync> = match spec {
                BaselineSpec::NaiveBayes { alpha } => {
                    let mut m = BernoulliNb::new(*alpha);
                    m.fit(&xs, y, n);
                    Box::new(move |r| m.predict_proba(r))
                }
                BaselineSpec::Knn { n_neighbors, leaf_size } => {
                    let mut m = Knn::new(*n_neighbors, *leaf_size);
                    m.fit(&xs, y, n);
                    Box::new(move |r| m.predict_proba(r))
                }
                BaselineSpec::DecisionTree { criterion } => {
                    let mut m = DecisionTree::new(*criterion);
                    m.seed = seed;
                    m.fit(&xs, y, n);
                    Box::new(move |r| m.predict_proba(r))
                }
                BaselineSpec::Svm { c, gamma } => {
                    let mut m = Svm::new(*c, *gamma);
                    m.fit(&xs, y, n);
                    Box::new(move |r| m.predict_proba(r))
                }
                BaselineSpec::RandomForest { n_trees, criterion } => {
                    let mut m = RandomForest::new(*n_trees, *criterion, seed);
                    m.fit(&xs, y, n);
                    Box::new(move |r| m.predict_proba(r))
                }
                BaselineSpec::Ddnn { .. } | BaselineSpec::CnnDdnn { .. } => unreachable!("handled above"),
            };
            test.par_iter().map(|r| predict(r)).collect()
        }
    }
}

/// Cross-validate a baseline on the same folds, scaling and oversampling as
/// the fusion model.
pub fn run_baseline(spec: &BaselineSpec, data: &EvalData, plan: &FoldPlan, hp: &TrainHyperparams) -> Result<MetricsReport> {
    data.check(plan)?;
    let folds: Vec<FoldMetrics> = (0..plan.k)
        .into_par_iter()
        .map(|f| {
            let seed = mix_seed(&[hp.seed, f as u64]);
            let fd = prepare_fold(data, plan, f, hp.smote_k, seed);
            let probs = baseline_fold(spec, data, &fd, hp, seed);
            fold_metrics(&fd.test_labels, probs, data.n_classes)
        })
        .collect::<Result<_>>()?;
    Ok(MetricsReport::from_folds(folds))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub branches: Branches,
    pub fusion_input_dim: usize,
    pub report: MetricsReport,
}

/// Cross-validate the fusion model once per non-empty branch subset.
pub fn ablate(data: &EvalData, plan: &FoldPlan, hp: &TrainHyperparams) -> Result<Vec<AblationRow>> {
    let base = ModelConfig::for_featurizer(data.featurizer, data.n_classes);
    Branches::subsets()
        .into_iter()
        .map(|b| {
            let config = base.clone().with_branches(b);
            log::info!("ablation: {b} (fusion width {})", config.fusion_input_dim());
            Ok(AblationRow {
                branches: b,
                fusion_input_dim: config.fusion_input_dim(),
                report: cross_validate(&config, data, plan, hp)?,
            })
        })
        .collect()
}

pub fn baseline_table_tsv(rows: &[(String, MetricsReport)]) -> String {
    let mut s = format!("model\t{METRICS_HEADER}\n");
    for (name, r) in rows {
        s.push_str(&format!("{name}\t{}\n", r.tsv_cells()));
    }
    s
}

pub fn ablation_table_tsv(rows: &[AblationRow]) -> String {
    let mut s = format!("thumbnail\ttitle\ttags\tstats_style\tfusion_input\t{METRICS_HEADER}\n");
    let mark = |on: bool| if on { "x" } else { "" };
    for r in rows {
        let b = r.branches;
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            mark(b.thumbnail),
            mark(b.title),
            mark(b.tags),
            mark(b.stats),
            r.fusion_input_dim,
            r.report.tsv_cells()
        ));
    }
    s
}
