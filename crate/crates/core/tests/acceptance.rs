//! Acceptance gate. Each criterion is checked against an oracle written
//! here, independently of the library code under test, and reported on one
//! line. The process exits non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vidsafe::annotation::{fleiss_kappa, RatingMatrix};
use vidsafe::classifier::{self, Branches, FusionNet, ModelConfig, ModelInput, TrainHyperparams, TrainedModel};
use vidsafe::evaluation::{ablate, auc, cross_validate, smote, smote_balance, stratified_kfold, EvalData};
use vidsafe::features::{Featurizer, StyleLexicon, ThumbnailEmbedder, ThumbnailEmbedding, THUMBNAIL_DIM};
use vidsafe::graph::{build_graph_from_edges, transitions, GraphOptions};
use vidsafe::ingestion::{collect_seeds, snowball, CrawlPlan, FixtureProvider, MetadataProvider, Op};
use vidsafe::nn::Network;
use vidsafe::synthetic::{calibration_world, planted_signal, random_record, PlantedSpec, CALIBRATION_KEYWORD};
use vidsafe::walker::{run_campaign, WalkOptions};
use vidsafe::{BinaryLabel, VideoRecord};

type Check = (bool, String);

fn main() {
    let criteria: Vec<(&str, fn() -> Check)> = vec![
        ("fusion shape and simplex outputs", fusion_shape),
        ("gradient check on miniature config", gradient_check),
        ("planted-signal learnability", planted_signal_accuracy),
        ("fleiss kappa", kappa),
        ("smote balance and segment membership", smote_segments),
        ("auc equals pair counting", auc_pairs),
        ("stratified folds", folds),
        ("transition matrix", transition_matrix),
        ("random-walk calibration", walk_calibration),
        ("snowball bound and uniqueness", snowball_bound),
        ("ablation harness", ablation_rows),
        ("model persistence", persistence),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let (ok, detail) = match std::panic::catch_unwind(check) {
            Ok(r) => r,
            Err(_) => (false, "panicked".to_string()),
        };
        failed += usize::from(!ok);
        println!(
            "{} {name}: {detail} [{:.1?}]",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}

fn within(limit: Duration, start: Instant) -> bool {
    start.elapsed() < limit
}

fn random_input(rng: &mut ChaCha8Rng, c: &ModelConfig) -> ModelInput {
    let n_title = rng.gen_range(1..=c.title_len);
    let n_tags = rng.gen_range(0..=c.tags_len);
    ModelInput {
        title: (0..n_title).map(|_| rng.gen_range(1..c.title_vocab_size as u32)).collect(),
        tags: (0..n_tags).map(|_| rng.gen_range(1..c.tags_vocab_size as u32)).collect(),
        thumbnail: (0..c.thumbnail_dim).map(|_| rng.gen_range(0.0..1.0)).collect(),
        stats: (0..c.stats_dim).map(|_| rng.gen_range(-2.0..2.0)).collect(),
    }
}

fn fusion_shape() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    let mut widths = Vec::new();
    for n_classes in [4, 2] {
        let c = ModelConfig::new(500, 400, n_classes);
        widths.push(c.fusion_input_dim());
        ok &= c.fusion_input_dim() == 32 + 32 + 2048 + 25;
        let net = FusionNet::new(c.clone()).expect("default config builds");
        let params = net.init_params(n_classes as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let p = net.predict_proba(&params, &random_input(&mut rng, &c));
            ok &= p.len() == n_classes && p.iter().all(|&v| (0.0..=1.0).contains(&v));
            worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
        }
    }
    ok &= worst <= 1e-6 && widths == [2137, 2137] && within(Duration::from_secs(10), start);
    (ok, format!("fusion width {widths:?}, max |sum - 1| = {worst:.2e}"))
}

fn gradient_check() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for probe in 0..20u64 {
        let n_classes = if probe % 2 == 0 { 2 } else { 4 };
        let c = ModelConfig {
            embed_dim: 2,
            title_len: 4,
            tags_len: 5,
            title_vocab_size: 6,
            tags_vocab_size: 7,
            lstm_units: 2,
            stats_dim: 3,
            stats_hidden: 3,
            thumbnail_dim: 4,
            fusion_units: 4,
            dropout: 0.5,
            n_classes,
            branches: Branches::ALL,
        };
        let net = FusionNet::new(c.clone()).expect("mini config builds");
        let mut rng = ChaCha8Rng::seed_from_u64(100 + probe);
        let mut params = net.init_params(probe);
        for p in params.iter_mut() {
            *p += rng.gen_range(-0.3..0.3);
        }
        let x = random_input(&mut rng, &c);
        let y = rng.gen_range(0..n_classes);
        let dropout = (probe % 4 >= 2).then_some(probe);
        let mut grad = vec![0.0; params.len()];
        net.loss(&params, &x, y, dropout, Some(&mut grad));
        let h = 1e-5;
        for i in 0..params.len() {
            let mut p = params.clone();
            p[i] += h;
            let up = net.loss(&p, &x, y, dropout, None);
            p[i] -= 2.0 * h;
            let down = net.loss(&p, &x, y, dropout, None);
            let numeric = (up - down) / (2.0 * h);
            let rel = (grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    let ok = worst <= 1e-4 && within(Duration::from_secs(60), start);
    (ok, format!("20 probes, max relative error {worst:.2e}"))
}

fn planted_signal_accuracy() -> Check {
    let start = Instant::now();
    let (records, labels) = planted_signal(&PlantedSpec::default());
    let featurizer = Featurizer::fit(&records, StyleLexicon::default());
    let bundles = featurizer.featurize_all(&records, &ThumbnailEmbedder::stub(0), None);
    let data = EvalData {
        featurizer: &featurizer,
        bundles: &bundles,
        labels: &labels,
        n_classes: 2,
    };
    let plan = stratified_kfold(&labels, 5, 0).expect("folds");
    let hp = TrainHyperparams {
        learning_rate: 1e-3,
        smote_k: Some(5),
        ..TrainHyperparams::default()
    };
    let report = cross_validate(&ModelConfig::for_featurizer(&featurizer, 2), &data, &plan, &hp).expect("cv");
    let acc = report.accuracy.mean;
    let ok = acc >= 0.95 && within(Duration::from_secs(300), start);
    (ok, format!("400 samples, 5-fold mean accuracy {acc:.4} ± {:.4}", report.accuracy.std))
}

/// Fleiss' kappa straight from its definition.
fn kappa_direct(rows: &[Vec<usize>]) -> f64 {
    let n_items = rows.len() as f64;
    let raters = rows[0].iter().sum::<usize>() as f64;
    let cats = rows[0].len();
    let mut p_i_sum = 0.0;
    for r in rows {
        let agree: f64 = r.iter().map(|&c| c as f64 * (c as f64 - 1.0)).sum();
        p_i_sum += agree / (raters * (raters - 1.0));
    }
    let p_obs = p_i_sum / n_items;
    let mut p_exp = 0.0;
    for j in 0..cats {
        let share = rows.iter().map(|r| r[j] as f64).sum::<f64>() / (n_items * raters);
        p_exp += share * share;
    }
    (p_obs - p_exp) / (1.0 - p_exp)
}

fn kappa() -> Check {
    let unanimous = vec![vec![3, 0, 0, 0], vec![0, 3, 0, 0], vec![0, 0, 3, 0], vec![0, 0, 0, 3], vec![0, 3, 0, 0]];
    let k1 = fleiss_kappa(&RatingMatrix::new(unanimous).expect("matrix")).expect("kappa");
    let crafted = [
        vec![vec![2, 1, 0, 0], vec![0, 3, 0, 0], vec![1, 1, 1, 0], vec![0, 0, 2, 1], vec![3, 0, 0, 0], vec![0, 1, 0, 2]],
        vec![vec![1, 2, 0, 0], vec![2, 1, 0, 0], vec![1, 1, 1, 0], vec![0, 1, 1, 1], vec![1, 0, 0, 2]],
        vec![vec![5, 0, 0, 0], vec![4, 1, 0, 0], vec![0, 3, 2, 0], vec![1, 1, 1, 2], vec![0, 0, 5, 0], vec![2, 2, 1, 0], vec![0, 0, 0, 5]],
    ];
    let mut worst: f64 = 0.0;
    let mut values = Vec::new();
    for m in &crafted {
        let lib = fleiss_kappa(&RatingMatrix::new(m.clone()).expect("matrix")).expect("kappa");
        values.push(lib);
        worst = worst.max((lib - kappa_direct(m)).abs());
    }
    let ok = k1 == 1.0 && worst <= 1e-9;
    (
        ok,
        format!("unanimous = {k1}, crafted = {values:.4?}, max deviation {worst:.1e}"),
    )
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Is `p` on the segment from `a` to `b` (2-D)?
fn on_segment(p: &[f64], a: &[f64], b: &[f64]) -> bool {
    let (ab, ap) = ([b[0] - a[0], b[1] - a[1]], [p[0] - a[0], p[1] - a[1]]);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return sq(p, a) <= 1e-18;
    }
    let cross = ab[0] * ap[1] - ab[1] * ap[0];
    let dot = ab[0] * ap[0] + ab[1] * ap[1];
    cross.abs() <= 1e-9 * len2.sqrt().max(1.0) && dot >= -1e-9 && dot <= len2 + 1e-9
}

fn smote_segments() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut fixtures, mut points, mut ok) = (0, 0, true);
    for _ in 0..50 {
        let n_classes = rng.gen_range(2..=3);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..n_classes {
            let n = rng.gen_range(1..=25);
            for _ in 0..n {
                rows.push(vec![rng.gen_range(-5.0..5.0) + 4.0 * c as f64, rng.gen_range(-5.0..5.0)]);
                labels.push(c);
            }
        }
        let k = rng.gen_range(1..=5);
        let seed = rng.gen();
        let (_, balanced) = smote_balance(&rows, &labels, k, seed);
        let majority = (0..n_classes).map(|c| labels.iter().filter(|&&y| y == c).count()).max().unwrap();
        for c in 0..n_classes {
            ok &= balanced.iter().filter(|&&y| y == c).count() == majority;
        }
        for s in smote(&rows, &labels, k, seed) {
            let members: Vec<usize> = (0..rows.len()).filter(|&i| labels[i] == s.label).collect();
            let k_eff = k.min(members.len().saturating_sub(1));
            let found = members.iter().any(|&a| {
                if k_eff == 0 {
                    return on_segment(&s.row, &rows[a], &rows[a]);
                }
                let mut d: Vec<f64> = members.iter().filter(|&&b| b != a).map(|&b| sq(&rows[a], &rows[b])).collect();
                d.sort_by(f64::total_cmp);
                let radius = d[k_eff - 1];
                members
                    .iter()
                    .filter(|&&b| b != a && sq(&rows[a], &rows[b]) <= radius)
                    .any(|&b| on_segment(&s.row, &rows[a], &rows[b]))
            });
            ok &= found;
            points += 1;
        }
        fixtures += 1;
    }
    (ok, format!("{fixtures} fixtures, {points} synthetic points checked"))
}

fn auc_pairs() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    let mut mismatches = 0;
    while checked < 200 {
        let n = rng.gen_range(2..=20);
        let positive: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64 * 0.25).collect();
        let (p, q) = (positive.iter().filter(|&&x| x).count(), positive.iter().filter(|&&x| !x).count());
        if p == 0 || q == 0 {
            continue;
        }
        let mut twice_wins = 0usize;
        for i in (0..n).filter(|&i| positive[i]) {
            for j in (0..n).filter(|&j| !positive[j]) {
                twice_wins += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
        let expected = twice_wins as f64 / (2 * p * q) as f64;
        if auc(&positive, &scores) != Some(expected) {
            mismatches += 1;
        }
        checked += 1;
    }
    (mismatches == 0, format!("{checked} instances, {mismatches} mismatches"))
}

fn folds() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let k = 5;
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for v in 0..50u64 {
        let n_classes = rng.gen_range(2..=4);
        let mut labels = Vec::new();
        for c in 0..n_classes {
            labels.extend(std::iter::repeat(c).take(rng.gen_range(k..=60)));
        }
        let plan = stratified_kfold(&labels, k, v).expect("every class has k members");
        let mut seen = vec![0; labels.len()];
        for f in &plan.folds {
            for &i in f {
                seen[i] += 1;
            }
        }
        ok &= seen.iter().all(|&s| s == 1) && plan.folds.len() == k;
        for c in 0..n_classes {
            let share = labels.iter().filter(|&&y| y == c).count() as f64 / k as f64;
            for f in &plan.folds {
                let count = f.iter().filter(|&&i| labels[i] == c).count() as f64;
                worst = worst.max((count - share).abs());
            }
        }
    }
    ok &= worst <= 1.0;
    (ok, format!("50 label vectors, max deviation from proportional share {worst:.2}"))
}

fn transition_matrix() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut ok = true;
    let mut edges_seen = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=30);
        let ids: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
        let mut labels = BTreeMap::new();
        for id in &ids {
            if rng.gen_bool(0.9) {
                let l = if rng.gen_bool(0.3) { BinaryLabel::Inappropriate } else { BinaryLabel::Appropriate };
                labels.insert(id.clone(), l);
            }
        }
        let mut raw = Vec::new();
        for from in &ids {
            for _ in 0..rng.gen_range(0..=10) {
                raw.push((from.clone(), ids[rng.gen_range(0..n)].clone()));
            }
        }
        let g = build_graph_from_edges(
            raw.iter().map(|(a, b)| (a.as_str(), b.as_str())),
            &labels,
            &BTreeSet::new(),
            GraphOptions::default(),
        );
        let t = transitions(&g);
        let mut cells = [[0usize; 2]; 2];
        let distinct: BTreeSet<&(String, String)> = raw.iter().collect();
        let mut labelled_edges = 0;
        for (a, b) in distinct {
            if let (Some(la), Some(lb)) = (labels.get(a), labels.get(b)) {
                cells[la.index()][lb.index()] += 1;
                labelled_edges += 1;
            }
        }
        for from in BinaryLabel::ALL {
            for to in BinaryLabel::ALL {
                ok &= t.get(from, to) == cells[from.index()][to.index()];
            }
        }
        ok &= t.total() == labelled_edges;
        edges_seen += labelled_edges;
    }
    (ok, format!("100 graphs, {edges_seen} labelled edges enumerated"))
}

/// Exact probability that a walk meets an inappropriate video within
/// `hops` steps, by propagating probability mass over the fixture graph.
fn walk_hit_probability(f: &FixtureProvider, labels: &BTreeMap<String, BinaryLabel>, hops: usize) -> f64 {
    let bad = |id: &str| labels[id] == BinaryLabel::Inappropriate;
    let start = f.search(CALIBRATION_KEYWORD, 10).expect("search");
    let mut mass: BTreeMap<String, f64> = BTreeMap::new();
    let mut hit = 0.0;
    for s in &start {
        let p = 1.0 / start.len() as f64;
        if bad(s) {
            hit += p;
        } else {
            *mass.entry(s.clone()).or_default() += p;
        }
    }
    for _ in 0..hops {
        let mut next: BTreeMap<String, f64> = BTreeMap::new();
        for (u, m) in &mass {
            let recs = f.recommendations(u, 10).expect("recommendations");
            for v in &recs {
                let p = m / recs.len() as f64;
                if bad(v) {
                    hit += p;
                } else {
                    *next.entry(v.clone()).or_default() += p;
                }
            }
        }
        mass = next;
    }
    hit
}

fn walk_calibration() -> Check {
    let start = Instant::now();
    let (f, oracle) = calibration_world(300, 30, 5);
    let exact = walk_hit_probability(&f, &oracle.0, 10);
    let closed = 1.0 - 0.9f64.powi(10);
    let traces = run_campaign(
        &[CALIBRATION_KEYWORD.to_string()],
        10_000,
        &WalkOptions::default(),
        &f,
        &oracle,
        2024,
        None,
    )
    .expect("campaign");
    let complete = traces.iter().filter(|t| t.visits.len() == 11 || t.first_hit.is_some()).count();
    let observed = traces.iter().filter(|t| t.first_hit.is_some()).count() as f64 / traces.len() as f64;
    let ok = (observed - exact).abs() <= 0.015
        && (exact - closed).abs() < 1e-12
        && complete == traces.len()
        && within(Duration::from_secs(120), start);
    (
        ok,
        format!("10000 walks, observed {observed:.4}, oracle {exact:.4} (closed form {closed:.4})"),
    )
}

fn snowball_bound() -> Check {
    let at = chrono::DateTime::UNIX_EPOCH;
    let mut ok = true;
    let plan = CrawlPlan {
        elsagate_keywords: vec!["seed".into()],
        popular_regions: Vec::new(),
        per_request: 1,
        ..CrawlPlan::default()
    };
    // A tree deeper than the crawl, with no shared recommendations.
    let mut tree = FixtureProvider::new();
    let mut level = vec!["r".to_string()];
    tree.add_video(VideoRecord::new("r", "", at));
    tree.set_response(Op::Search, "seed", ["r"]);
    for _ in 0..4 {
        let mut next = Vec::new();
        for id in &level {
            let kids: Vec<String> = (0..10).map(|i| format!("{id}.{i}")).collect();
            for k in &kids {
                tree.add_video(VideoRecord::new(k, "", at));
            }
            tree.set_response(Op::Recommendations, id, kids.clone());
            next.extend(kids);
        }
        level = next;
    }
    let seeds = collect_seeds(&plan, &tree).expect("seeds");
    let d = snowball(&seeds.dataset, &plan, &tree).expect("crawl").dataset;
    let tree_nodes = d.len();
    ok &= tree_nodes == 1 + 10 + 100 + 1000 && tree.fetch_counts().values().all(|&n| n == 1);
    ok &= d.edges().all(|e| e.hop <= 3);

    // Random graphs with shared recommendations and cycles.
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut largest = 0;
    for _ in 0..20 {
        let n = rng.gen_range(20..400);
        let mut f = FixtureProvider::new();
        for i in 0..n {
            f.add_video(VideoRecord::new(format!("v{i}"), "", at));
            let recs: Vec<String> = (0..rng.gen_range(0..=14)).map(|_| format!("v{}", rng.gen_range(0..n))).collect();
            f.set_response(Op::Recommendations, &format!("v{i}"), recs);
        }
        let n_seeds = rng.gen_range(1..=3);
        let seed_ids: Vec<String> = (0..n_seeds).map(|i| format!("v{i}")).collect();
        f.set_response(Op::Search, "seed", seed_ids);
        let plan = CrawlPlan {
            per_request: n_seeds,
            ..plan.clone()
        };
        let seeds = collect_seeds(&plan, &f).expect("seeds");
        let d = snowball(&seeds.dataset, &plan, &f).expect("crawl").dataset;
        largest = largest.max(d.len());
        ok &= d.len() <= n_seeds * 1111 && f.fetch_counts().values().all(|&c| c == 1);
    }
    (
        ok,
        format!("tree crawl reached {tree_nodes} nodes; 20 random graphs, largest {largest}, no double fetches"),
    )
}

fn ablation_rows() -> Check {
    let (records, labels) = planted_signal(&PlantedSpec {
        n: 60,
        ..PlantedSpec::default()
    });
    let featurizer = Featurizer::fit(&records, StyleLexicon::default());
    let bundles = featurizer.featurize_all(&records, &ThumbnailEmbedder::stub(0), None);
    let data = EvalData {
        featurizer: &featurizer,
        bundles: &bundles,
        labels: &labels,
        n_classes: 2,
    };
    let plan = stratified_kfold(&labels, 3, 0).expect("folds");
    let hp = TrainHyperparams {
        epochs: 1,
        learning_rate: 1e-3,
        ..TrainHyperparams::default()
    };
    let rows = ablate(&data, &plan, &hp).expect("ablation");
    let distinct: BTreeSet<(bool, bool, bool, bool)> = rows
        .iter()
        .map(|r| (r.branches.thumbnail, r.branches.title, r.branches.tags, r.branches.stats))
        .collect();
    let widths_ok = rows.iter().all(|r| {
        let b = r.branches;
        r.fusion_input_dim == 2048 * b.thumbnail as usize + 32 * b.title as usize + 32 * b.tags as usize + 25 * b.stats as usize
    });
    let ok = rows.len() == 15 && distinct.len() == 15 && !distinct.contains(&(false, false, false, false)) && widths_ok;
    (ok, format!("{} rows, {} distinct subsets, widths correct: {widths_ok}", rows.len(), distinct.len()))
}

fn persistence() -> Check {
    let (records, labels) = planted_signal(&PlantedSpec {
        n: 120,
        ..PlantedSpec::default()
    });
    let featurizer = Featurizer::fit(&records, StyleLexicon::default());
    let bundles = featurizer.featurize_all(&records, &ThumbnailEmbedder::stub(0), None);
    let examples: Vec<_> = bundles.into_iter().zip(labels).collect();
    let hp = TrainHyperparams {
        epochs: 2,
        learning_rate: 1e-3,
        ..TrainHyperparams::default()
    };
    let model = TrainedModel::fit(ModelConfig::for_featurizer(&featurizer, 2), &featurizer, &examples, &hp)
        .expect("training");
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("m.vsm");
    classifier::save(&model, &path).expect("save");
    let loaded = classifier::load(&path).expect("load");
    let from_mem = classifier::from_bytes(&classifier::to_bytes(&model).expect("encode")).expect("decode");
    if from_mem.params != model.params || loaded.params != model.params {
        return (false, "parameters changed across a round trip".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let r = random_record(format!("probe{i}"), &mut rng);
        let thumb = ThumbnailEmbedding::new((0..THUMBNAIL_DIM).map(|_| rng.gen_range(0.0..1.0)).collect()).expect("dims");
        let b = model.featurizer.featurize(&r, thumb);
        let (p, q) = (model.predict(&b).expect("predict"), loaded.predict(&b).expect("predict"));
        for (a, c) in p.probs.iter().zip(&q.probs) {
            worst = worst.max((a - c).abs());
        }
    }
    (worst < 1e-6, format!("100 probes, max drift {worst:.1e}"))
}
