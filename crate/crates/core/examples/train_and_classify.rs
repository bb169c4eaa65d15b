//! Train a binary fusion classifier, save it, load it back and label a
//! batch of new videos.

use vidsafe::classifier::{self, ModelConfig, TrainHyperparams, TrainedModel};
use vidsafe::features::{Featurizer, StyleLexicon, ThumbnailEmbedder};
use vidsafe::synthetic::{planted_signal, PlantedSpec};

fn main() -> vidsafe::Result<()> {
    let (records, labels) = planted_signal(&PlantedSpec { n: 300, ..PlantedSpec::default() });
    let (train, test) = records.split_at(240);
    let embedder = ThumbnailEmbedder::stub(0);
    let featurizer = Featurizer::fit(train, StyleLexicon::default());
    let bundles = featurizer.featurize_all(train, &embedder, None);
    let examples: Vec<_> = bundles.into_iter().zip(labels[..240].iter().copied()).collect();
    let hp = TrainHyperparams {
        learning_rate: 1e-3,
        epochs: 30,
        smote_k: Some(5),
        ..TrainHyperparams::default()
    };
    let config = ModelConfig::for_featurizer(&featurizer, 2);
    println!("fusion input width: {}", config.fusion_input_dim());
    let model = TrainedModel::fit(config, &featurizer, &examples, &hp)?;
    println!(
        "stopped after {} epochs, kept epoch {}",
        model.history.train_loss.len(),
        model.history.best_epoch + 1
    );

    let path = std::env::temp_dir().join("vidsafe-example.vsm");
    classifier::save(&model, &path)?;
    let loaded = classifier::load(&path)?;
    let mut correct = 0;
    for (r, &y) in test.iter().zip(&labels[240..]) {
        let (label, p) = loaded.classify_record(r, &embedder, None)?;
        correct += usize::from(label.index() == y);
        if r.video_id.ends_with('0') {
            println!("{}\t{}\t{p:.3}\t{}", r.video_id, label.as_str(), r.title);
        }
    }
    println!("held-out accuracy: {:.3}", correct as f64 / test.len() as f64);
    std::fs::remove_file(path).ok();
    Ok(())
}
