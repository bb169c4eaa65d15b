//! Collection through classification on a synthetic platform.

use vidsafe::classifier::{ModelConfig, TrainHyperparams, TrainedModel};
use vidsafe::features::{Featurizer, StyleLexicon, ThumbnailEmbedder};
use vidsafe::graph::{build_graph, prevalence, transitions, GraphOptions};
use vidsafe::ingestion::{collect_seeds, snowball, CrawlPlan};
use vidsafe::io::{read_dataset, write_dataset};
use vidsafe::synthetic::{demo_world, ground_truth_from_binary};
use vidsafe::{collapse_label, BinaryLabel};

#[test]
fn crawl_label_train_classify() {
    let w = demo_world(300, 4);
    let plan = CrawlPlan {
        elsagate_keywords: w.elsagate_keywords.clone(),
        child_keywords: w.child_keywords.clone(),
        random_count: 10,
        popular_regions: w.regions.clone(),
        depth: 2,
        ..CrawlPlan::default()
    };
    let seeds = collect_seeds(&plan, &w.provider).unwrap();
    let mut d = snowball(&seeds.dataset, &plan, &w.provider).unwrap().dataset;
    assert!(d.len() > 50);
    assert!(d.check_invariants().is_empty());
    ground_truth_from_binary(&mut d, &w.labels.0);

    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &d).unwrap();
    let d = read_dataset(dir.path()).unwrap();
    assert_eq!(d.ground_truth().unwrap().len(), d.len());

    let rows = prevalence(&d, &w.labels.0);
    assert!(rows.iter().all(|r| r.total() > 0));
    let t = transitions(&build_graph(&d, &w.labels.0, GraphOptions::default()));
    assert!(t.total() > 0);

    let records: Vec<_> = d.videos().cloned().collect();
    let labels: Vec<usize> = records
        .iter()
        .map(|r| collapse_label(d.label_of(&r.video_id).unwrap()).index())
        .collect();
    let embedder = ThumbnailEmbedder::stub(0);
    let featurizer = Featurizer::fit(&records, StyleLexicon::default());
    let bundles = featurizer.featurize_all(&records, &embedder, None);
    let examples: Vec<_> = bundles.into_iter().zip(labels.iter().copied()).collect();
    let hp = TrainHyperparams {
        epochs: 3,
        learning_rate: 1e-3,
        ..TrainHyperparams::default()
    };
    let model = TrainedModel::fit(ModelConfig::for_featurizer(&featurizer, 2), &featurizer, &examples, &hp).unwrap();
    assert_eq!(model.history.train_loss.len(), 3);
    for r in records.iter().take(20) {
        let (label, p) = model.classify_record(r, &embedder, None).unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert_eq!(label == BinaryLabel::Inappropriate, p >= model.threshold);
    }
}
