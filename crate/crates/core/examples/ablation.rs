//! Cross-validate the fusion classifier on all fifteen non-empty subsets of
//! its input branches.

use vidsafe::classifier::TrainHyperparams;
use vidsafe::evaluation::{ablate, ablation_table_tsv, stratified_kfold, EvalData};
use vidsafe::features::{Featurizer, StyleLexicon, ThumbnailEmbedder};
use vidsafe::synthetic::{planted_signal, PlantedSpec};

fn main() -> vidsafe::Result<()> {
    let (records, labels) = planted_signal(&PlantedSpec { n: 150, ..PlantedSpec::default() });
    let featurizer = Featurizer::fit(&records, StyleLexicon::default());
    let bundles = featurizer.featurize_all(&records, &ThumbnailEmbedder::stub(0), None);
    let data = EvalData {
        featurizer: &featurizer,
        bundles: &bundles,
        labels: &labels,
        n_classes: 2,
    };
    let plan = stratified_kfold(&labels, 3, 0)?;
    let hp = TrainHyperparams {
        learning_rate: 1e-3,
        epochs: 20,
        ..TrainHyperparams::default()
    };
    print!("{}", ablation_table_tsv(&ablate(&data, &plan, &hp)?));
    Ok(())
}
