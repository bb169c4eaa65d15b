use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use vidsafe::annotation::{serve, AnnotationStore, Event};
use vidsafe::classifier::{self, Branches, ModelConfig, TrainedModel};
use vidsafe::evaluation::{
    ablate, ablation_table_tsv, baseline_table_tsv, cross_validate, run_baseline, stratified_kfold, BaselineSpec,
    EvalData,
};
use vidsafe::features::{Featurizer, ThumbnailEmbedder};
use vidsafe::graph::{build_graph, prevalence, prevalence_tsv, transitions, transitions_by_subset, transitions_tsv, GraphOptions};
use vidsafe::ingestion::{audit_availability, audit_tsv, collect_seeds, snowball_resumable, CrawlPlan, ProviderError};
use vidsafe::io::{atomic_write, ensure_dir, read_dataset, read_jsonl, read_label_file, read_videos_lenient, write_dataset, write_jsonl, VIDEOS_FILE};
use vidsafe::walker::{
    apply_cluster_names, cluster_keywords, groups_from_clusters, hop_report, hop_report_tsv, read_traces,
    run_campaign, sanitize_keywords, KmeansOptions, LabelOracle, ModelClassifier, VideoClassifier, WalkOptions,
};
use vidsafe::{validate_record, Error, Result};

use crate::common::{embedder, labelled, read_keywords, require_exists, thumbnail_base, Ctx, Labelled};
use crate::{Cli, Command};

fn parent_dir(p: &Path) -> PathBuf {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn sidecar(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    atomic_write(path, text.as_bytes())
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let ctx = Ctx::new(cli.config.as_deref(), cli.seed, cli.workspace)?;
    match cli.command {
        Command::Collect {
            elsagate_keywords,
            elsagate_channels,
            child_keywords,
            regions,
            random,
            fanout,
            depth,
            per_request,
            parallelism,
            checkpoint,
            provider,
            out,
        } => {
            let mut m = ctx.manifest("collect");
            let mut plan = CrawlPlan::empty();
            for (path, flag, target) in [
                (&elsagate_keywords, "--elsagate-keywords", &mut plan.elsagate_keywords),
                (&elsagate_channels, "--elsagate-channels", &mut plan.elsagate_channels),
                (&child_keywords, "--child-keywords", &mut plan.child_keywords),
                (&regions, "--regions", &mut plan.popular_regions),
            ] {
                if let Some(p) = path {
                    *target = read_keywords(p, flag)?;
                    m.input(p);
                }
            }
            plan.random_count = random;
            plan.fanout = fanout;
            plan.depth = depth;
            plan.per_request = per_request;
            plan.parallelism = parallelism;
            plan.validate()?;
            let _lock = ctx.lock(&out)?;
            let p = ctx.provider(&provider, ctx.seed("collect"))?;
            let seeds = collect_seeds(&plan, &p)?;
            fail_on_credentials(&seeds.failures)?;
            let crawl = snowball_resumable(&seeds.dataset, &plan, &p, checkpoint.as_deref())?;
            fail_on_credentials(&crawl.failures)?;
            let mut failures = seeds.failures;
            failures.extend(crawl.failures);
            for f in &failures {
                log::warn!("{} failed: {}", f.request, f.error);
            }
            write_dataset(&out, &crawl.dataset)?;
            write_jsonl(out.join("failures.jsonl"), &failures)?;
            eprintln!(
                "collected {} videos, {} edges, {} failed requests",
                crawl.dataset.len(),
                crawl.dataset.edge_count(),
                failures.len()
            );
            m.output(&out);
            m.write(out.join("manifest.json"))
        }
        Command::Audit {
            dataset,
            provider,
            now,
            out,
        } => {
            require_exists(&dataset, "--dataset")?;
            let now = match now {
                Some(s) => chrono::DateTime::parse_from_rfc3339(&s)
                    .map_err(|e| Error::Config {
                        key: "--now".into(),
                        message: e.to_string(),
                    })?
                    .with_timezone(&chrono::Utc),
                None => chrono::Utc::now(),
            };
            let _lock = ctx.lock(&parent_dir(&out))?;
            let mut m = ctx.manifest("audit");
            m.input(dataset.join(VIDEOS_FILE));
            let d = read_dataset(&dataset)?;
            let p = ctx.provider(&provider, ctx.seed("audit"))?;
            let audit = audit_availability(&d, &p, now)?;
            fail_on_credentials(&audit.failures)?;
            write_text(&out, &audit_tsv(&audit))?;
            m.output(&out);
            m.write(sidecar(&out, ".manifest.json"))
        }
        Command::AnnotateServe {
            dataset,
            events,
            addr,
            annotators,
        } => {
            require_exists(&dataset, "--dataset")?;
            let _lock = ctx.lock(&parent_dir(&events))?;
            let d = read_dataset(&dataset)?;
            let mut store = AnnotationStore::open(d.videos().cloned(), &events)?;
            for a in &annotators {
                if !store.is_registered(a) {
                    store.register(a)?;
                }
            }
            let handle = serve(Arc::new(Mutex::new(store)), &addr)?;
            eprintln!("serving {} videos at {}", d.len(), handle.url());
            handle.join();
            Ok(())
        }
        Command::Aggregate { dataset, events, out } => {
            require_exists(&dataset, "--dataset")?;
            require_exists(&events, "--events")?;
            let _lock = ctx.lock(&out)?;
            let mut m = ctx.manifest("aggregate");
            m.input(&events);
            let mut d = read_dataset(&dataset)?;
            let store = AnnotationStore::replay(d.videos().cloned(), read_jsonl::<Event>(&events)?)?;
            let export = store.export();
            let mut report = format!(
                "labelled\t{}\nexcluded\t{}\npending\t{}\n",
                export.entries.len(),
                export.excluded.len(),
                export.pending
            );
            match store.rating_matrix(vidsafe::annotation::VOTES_PER_VIDEO) {
                Ok((matrix, skipped)) => {
                    let kappa = vidsafe::annotation::fleiss_kappa(&matrix)
                        .map_or_else(|e| format!("undefined ({e})"), |k| format!("{k:.6}"));
                    report.push_str(&format!("kappa_items\t{}\nkappa_skipped\t{skipped}\nfleiss_kappa\t{kappa}\n", matrix.items()));
                }
                Err(e) => report.push_str(&format!("fleiss_kappa\tundefined ({e})\n")),
            }
            d.set_ground_truth(export.entries.into_iter().chain(export.excluded));
            write_dataset(&out, &d)?;
            write_text(&out.join("agreement.tsv"), &report)?;
            print!("{report}");
            m.output(&out);
            m.write(out.join("manifest.json"))
        }
        Command::Featurize { dataset, thumbs, out } => {
            require_exists(&dataset, "--dataset")?;
            let emb = embedder(&thumbs)?;
            let _lock = ctx.lock(&out)?;
            let mut m = ctx.manifest("featurize");
            m.input(dataset.join(VIDEOS_FILE));
            let d = read_dataset(&dataset)?;
            let records: Vec<_> = d.videos().cloned().collect();
            let featurizer = Featurizer::fit(&records, ctx.lexicon()?);
            let base = thumbnail_base(&thumbs, Some(&dataset));
            let bundles = featurizer.featurize_all(&records, &emb, base.as_deref());
            write_jsonl(out.join("features.jsonl"), &bundles)?;
            let fz = serde_json::to_vec_pretty(&featurizer).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            atomic_write(out.join("featurizer.json"), &fz)?;
            eprintln!("featurized {} videos", bundles.len());
            m.output(&out);
            m.write(out.join("manifest.json"))
        }
        Command::Train {
            data,
            train,
            threshold,
            out,
        } => {
            if !(0.0..=1.0).contains(&threshold) {
                return Err(Error::Config {
                    key: "--threshold".into(),
                    message: "must lie in [0, 1]".into(),
                });
            }
            let seed = ctx.seed("train");
            let l = labelled(&data, seed)?;
            let _lock = ctx.lock(&parent_dir(&out))?;
            let mut m = ctx.manifest("train");
            if let Some(d) = &data.dataset {
                m.input(d.join(VIDEOS_FILE));
            }
            let (featurizer, bundles) = featurize_labelled(&ctx, &l, &data.thumbs, data.dataset.as_deref())?;
            let examples: Vec<_> = bundles.into_iter().zip(l.labels.iter().copied()).collect();
            let config = ModelConfig::for_featurizer(&featurizer, l.n_classes);
            let mut model = TrainedModel::fit(config, &featurizer, &examples, &train.hyperparams(seed))?;
            model.threshold = threshold;
            classifier::save(&model, &out)?;
            if let Some(last) = model.history.train_loss.last() {
                eprintln!("trained for {} epochs, final loss {last:.5}", model.history.train_loss.len());
            }
            m.output(&out);
            m.write(sidecar(&out, ".manifest.json"))
        }
        Command::Evaluate {
            data,
            train,
            folds,
            baselines,
            out,
        } => {
            let specs: Vec<BaselineSpec> = match baselines.as_str() {
                "all" => BaselineSpec::all(),
                "none" | "" => Vec::new(),
                list => list.split(',').map(|s| s.trim().parse()).collect::<Result<_>>()?,
            };
            let seed = ctx.seed("evaluate");
            let l = labelled(&data, seed)?;
            let _lock = ctx.lock(&parent_dir(&out))?;
            let mut m = ctx.manifest("evaluate");
            let (featurizer, bundles) = featurize_labelled(&ctx, &l, &data.thumbs, data.dataset.as_deref())?;
            let eval = EvalData {
                featurizer: &featurizer,
                bundles: &bundles,
                labels: &l.labels,
                n_classes: l.n_classes,
            };
            let plan = stratified_kfold(&l.labels, folds, seed)?;
            let hp = train.hyperparams(seed);
            let mut rows = Vec::new();
            let config = ModelConfig::for_featurizer(&featurizer, l.n_classes);
            rows.push(("fusion".to_string(), cross_validate(&config, &eval, &plan, &hp)?));
            for spec in &specs {
                log::info!("evaluating {}", spec.name());
                rows.push((spec.name().to_string(), run_baseline(spec, &eval, &plan, &hp)?));
            }
            write_text(&out, &baseline_table_tsv(&rows))?;
            let json = serde_json::to_vec_pretty(&rows).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            atomic_write(sidecar(&out, ".json"), &json)?;
            print!("{}", baseline_table_tsv(&rows));
            m.output(&out);
            m.write(sidecar(&out, ".manifest.json"))
        }
        Command::Ablate {
            data,
            train,
            folds,
            out,
        } => {
            let seed = ctx.seed("ablate");
            let l = labelled(&data, seed)?;
            let _lock = ctx.lock(&parent_dir(&out))?;
            let mut m = ctx.manifest("ablate");
            let (featurizer, bundles) = featurize_labelled(&ctx, &l, &data.thumbs, data.dataset.as_deref())?;
            let eval = EvalData {
                featurizer: &featurizer,
                bundles: &bundles,
                labels: &l.labels,
                n_classes: l.n_classes,
            };
            let plan = stratified_kfold(&l.labels, folds, seed)?;
            let rows = ablate(&eval, &plan, &train.hyperparams(seed))?;
            debug_assert_eq!(rows.len(), Branches::subsets().len());
            write_text(&out, &ablation_table_tsv(&rows))?;
            print!("{}", ablation_table_tsv(&rows));
            m.output(&out);
            m.write(sidecar(&out, ".manifest.json"))
        }
        Command::Classify {
            model,
            dataset,
            thumbs,
            out,
            skips,
        } => {
            require_exists(&model, "--model")?;
            require_exists(&dataset, "--dataset")?;
            let emb = embedder(&thumbs)?;
            let _lock = ctx.lock(&parent_dir(&out))?;
            let mut m = ctx.manifest("classify");
            m.input(&model);
            m.input(dataset.join(VIDEOS_FILE));
            let model = classifier::load(&model)?;
            let skips = skips.unwrap_or_else(|| sidecar(&out, ".skipped.tsv"));
            let base = thumbnail_base(&thumbs, Some(&dataset));
            let (lines, skipped) = classify_batch(&model, &dataset.join(VIDEOS_FILE), &emb, base.as_deref())?;
            write_text(&out, &lines)?;
            write_text(&skips, &skipped)?;
            m.output(&out);
            m.output(&skips);
            m.write(sidecar(&out, ".manifest.json"))
        }
        Command::GraphReport {
            dataset,
            labels,
            max_out_degree,
            no_self_loops,
            out,
        } => {
            require_exists(&dataset, "--dataset")?;
            require_exists(&labels, "--labels")?;
            let _lock = ctx.lock(&out)?;
            let mut m = ctx.manifest("graph-report");
            m.input(&labels);
            let d = read_dataset(&dataset)?;
            let labels = read_label_file(&labels)?;
            let opts = GraphOptions {
                max_out_degree,
                include_self_loops: !no_self_loops,
            };
            let g = build_graph(&d, &labels, opts);
            let mut subsets = vec![("all".to_string(), transitions(&g))];
            subsets.extend(
                transitions_by_subset(&g, &d)
                    .into_iter()
                    .map(|(s, t)| (s.as_str().to_string(), t)),
            );
            write_text(&out.join("prevalence.tsv"), &prevalence_tsv(&prevalence(&d, &labels)))?;
            write_text(&out.join("transitions.tsv"), &transitions_tsv(&subsets))?;
            let summary = format!(
                "nodes\t{}\nedges\t{}\nquarantined\t{}\nunfetched_destinations\t{}\nself_loops_dropped\t{}\nfanout_breaches\t{}\n",
                g.node_count(),
                g.edge_count(),
                g.quarantined.len(),
                g.unfetched_destinations,
                g.self_loops_dropped,
                g.fanout_breaches.len()
            );
            write_text(&out.join("graph.tsv"), &summary)?;
            m.output(&out);
            m.write(out.join("manifest.json"))
        }
        Command::Walk {
            keywords,
            walks,
            hops,
            top_k,
            fanout,
            avoid_revisits,
            no_sanitize,
            model,
            labels,
            thumbs,
            provider,
            out,
        } => {
            let mut kws = read_keywords(&keywords, "--keywords")?;
            if !no_sanitize {
                let s = sanitize_keywords(&kws, &ctx.lexicon()?.bad_words);
                if !s.dropped.is_empty() || s.modified > 0 {
                    eprintln!("sanitized keywords: {} dropped, {} modified", s.dropped.len(), s.modified);
                }
                kws = s.keywords;
            }
            let opts = WalkOptions {
                hops,
                top_k,
                fanout,
                avoid_revisits,
            };
            let _lock = ctx.lock(&parent_dir(&out))?;
            let mut m = ctx.manifest("walk");
            m.input(&keywords);
            let p = ctx.provider(&provider, ctx.seed("walk"))?;
            let seed = ctx.seed("walk");
            let traces = match (model, labels) {
                (Some(path), _) => {
                    require_exists(&path, "--model")?;
                    m.input(&path);
                    let model = classifier::load(&path)?;
                    let emb = embedder(&thumbs)?;
                    let c = ModelClassifier {
                        model: &model,
                        embedder: &emb,
                        base_dir: thumbs.thumbnail_base.clone(),
                    };
                    campaign(&kws, walks, &opts, &p, &c, seed, &out)?
                }
                (None, Some(path)) => {
                    require_exists(&path, "--labels")?;
                    m.input(&path);
                    let c = LabelOracle(read_label_file(&path)?);
                    campaign(&kws, walks, &opts, &p, &c, seed, &out)?
                }
                (None, None) => {
                    return Err(Error::Config {
                        key: "--model".into(),
                        message: "walks need --model or --labels to classify visits".into(),
                    })
                }
            };
            let hits = traces.iter().filter(|t| t.first_hit.is_some()).count();
            eprintln!("{} walks, {} reached an inappropriate video", traces.len(), hits);
            m.output(&out);
            m.write(sidecar(&out, ".manifest.json"))
        }
        Command::WalkReport {
            traces,
            clusters,
            cluster_names,
            hops,
            out,
        } => {
            require_exists(&traces, "--traces")?;
            let _lock = ctx.lock(&out)?;
            let mut m = ctx.manifest("walk-report");
            m.input(&traces);
            let traces = read_traces(&traces)?;
            let mut keywords: Vec<String> = traces.iter().map(|t| t.keyword.clone()).collect();
            keywords.sort();
            keywords.dedup();
            let opts = KmeansOptions {
                seed: ctx.seed("walk-report"),
                ..KmeansOptions::default()
            };
            let mut cl = cluster_keywords(&keywords, clusters.min(keywords.len()).max(1), &opts)?;
            if let Some(p) = &cluster_names {
                require_exists(p, "--cluster-names")?;
                m.input(p);
                apply_cluster_names(&mut cl, &vidsafe::io::read_to_string(p)?)?;
            }
            let mut groups = vec![("all".to_string(), keywords.iter().cloned().collect())];
            groups.extend(groups_from_clusters(&cl));
            let rows = hop_report(&traces, &groups, hops);
            write_text(&out.join("hops.tsv"), &hop_report_tsv(&rows))?;
            let mut ct = String::from("cluster_id\tname\tkeyword\n");
            for c in &cl {
                for k in &c.members {
                    ct.push_str(&format!("{}\t{}\t{k}\n", c.id, c.name.as_deref().unwrap_or("")));
                }
            }
            write_text(&out.join("clusters.tsv"), &ct)?;
            print!("{}", hop_report_tsv(&rows));
            m.output(&out);
            m.write(out.join("manifest.json"))
        }
    }
}

/// Credential problems make every later request fail too, so they abort
/// the stage instead of being reported per request.
fn fail_on_credentials(failures: &[vidsafe::ingestion::FailedRequest]) -> Result<()> {
    match failures.iter().find(|f| matches!(f.error, ProviderError::Credentials(_))) {
        Some(f) => Err(Error::Provider(f.error.clone())),
        None => Ok(()),
    }
}

fn featurize_labelled(
    ctx: &Ctx,
    l: &Labelled,
    thumbs: &crate::common::ThumbArgs,
    dataset: Option<&Path>,
) -> Result<(Featurizer, Vec<vidsafe::features::FeatureBundle>)> {
    let emb = embedder(thumbs)?;
    let featurizer = Featurizer::fit(&l.records, ctx.lexicon()?);
    let base = thumbnail_base(thumbs, dataset);
    let bundles = featurizer.featurize_all(&l.records, &emb, base.as_deref());
    Ok((featurizer, bundles))
}

fn campaign<P: vidsafe::ingestion::MetadataProvider, C: VideoClassifier>(
    keywords: &[String],
    walks: usize,
    opts: &WalkOptions,
    p: &P,
    c: &C,
    seed: u64,
    out: &Path,
) -> Result<Vec<vidsafe::walker::WalkTrace>> {
    if let Some(parent) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    run_campaign(keywords, walks, opts, p, c, seed, Some(out))
}

/// One `video_id<TAB>label<TAB>probability` line per classifiable video, in
/// file order, and a skip report for malformed or invalid records.
pub fn classify_batch(
    model: &TrainedModel,
    videos: &Path,
    emb: &ThumbnailEmbedder,
    base: Option<&Path>,
) -> Result<(String, String)> {
    let (records, bad_lines) = read_videos_lenient(videos)?;
    let mut skipped = String::from("line_or_id\treason\n");
    for s in &bad_lines {
        let who = s.video_id.clone().unwrap_or_else(|| format!("line {}", s.line));
        skipped.push_str(&format!("{who}\t{}\n", s.reason.replace(['\t', '\n'], " ")));
    }
    let mut out = String::new();
    for r in &records {
        let violations = validate_record(r);
        if !violations.is_empty() {
            let why: Vec<String> = violations.iter().map(ToString::to_string).collect();
            skipped.push_str(&format!("{}\t{}\n", r.video_id, why.join("; ")));
            continue;
        }
        match model.classify_record(r, emb, base) {
            Ok((label, p)) => out.push_str(&format!("{}\t{}\t{p:.6}\n", r.video_id, label.as_str())),
            Err(e) => skipped.push_str(&format!("{}\t{e}\n", r.video_id)),
        }
    }
    Ok((out, skipped))
}
