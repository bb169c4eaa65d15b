//! The seven comparison classifiers under five-fold stratified
//! cross-validation on a synthetic planted-signal set.

use vidsafe::classifier::TrainHyperparams;
use vidsafe::evaluation::{baseline_table_tsv, run_baseline, stratified_kfold, BaselineSpec, EvalData};
use vidsafe::features::{Featurizer, StyleLexicon, ThumbnailEmbedder};
use vidsafe::synthetic::{planted_signal, PlantedSpec};

fn main() -> vidsafe::Result<()> {
    let (records, labels) = planted_signal(&PlantedSpec { n: 200, ..PlantedSpec::default() });
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
        learning_rate: 1e-3,
        epochs: 10,
        ..TrainHyperparams::default()
    };
    let mut rows = Vec::new();
    for spec in BaselineSpec::all() {
        rows.push((spec.name().to_string(), run_baseline(&spec, &data, &plan, &hp)?));
    }
    print!("{}", baseline_table_tsv(&rows));
    Ok(())
}
