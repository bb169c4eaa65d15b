//! Five-fold stratified cross-validation of the fusion classifier on a
//! synthetic binary set whose classes differ only in title punctuation.
//!
//! ```text
//! cargo run --release --example planted_signal [learning_rate]
//! ```

use std::time::Instant;

use vidsafe::classifier::{ModelConfig, TrainHyperparams};
use vidsafe::evaluation::{cross_validate, stratified_kfold, EvalData};
use vidsafe::features::{Featurizer, StyleLexicon, ThumbnailEmbedder};
use vidsafe::synthetic::{planted_signal, PlantedSpec};

fn main() -> vidsafe::Result<()> {
    let lr: f64 = std::env::args().nth(1).map_or(Ok(1e-5), |s| s.parse()).expect("learning rate");
    let (records, labels) = planted_signal(&PlantedSpec::default());
    let featurizer = Featurizer::fit(&records, StyleLexicon::default());
    let bundles = featurizer.featurize_all(&records, &ThumbnailEmbedder::stub(0), None);
    let data = EvalData {
        featurizer: &featurizer,
        bundles: &bundles,
        labels: &labels,
        n_classes: 2,
    };
    let plan = stratified_kfold(&labels, 5, 0)?;
    let hp = TrainHyperparams {
        learning_rate: lr,
        smote_k: Some(5),
        ..TrainHyperparams::default()
    };
    let start = Instant::now();
    let report = cross_validate(&ModelConfig::for_featurizer(&featurizer, 2), &data, &plan, &hp)?;
    println!("accuracy  {:.4} ± {:.4}", report.accuracy.mean, report.accuracy.std);
    println!("precision {:.4}", report.precision.mean);
    println!("recall    {:.4}", report.recall.mean);
    if let Some(auc) = report.auc {
        println!("auc       {:.4}", auc.mean);
    }
    println!("elapsed   {:.1?}", start.elapsed());
    Ok(())
}
