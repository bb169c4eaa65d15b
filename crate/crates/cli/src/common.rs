use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use vidsafe::classifier::TrainHyperparams;
use vidsafe::features::{Dictionary, EmoticonDetector, StyleLexicon, ThumbnailEmbedder};
use vidsafe::features::thumbnail::PrecomputedBackbone;
use vidsafe::ingestion::{
    FixtureProvider, KeyPool, LiveProvider, MetadataProvider, RetryPolicy, Retrying, TokenBucket, DEFAULT_KEY_ENV,
};
use vidsafe::io::{ensure_dir, read_dataset, read_lines};
use vidsafe::run::{stage_seed, RunConfig, RunManifest, WorkspaceLock};
use vidsafe::synthetic::{planted_signal, PlantedSpec};
use vidsafe::{collapse_label, Error, Result, VideoRecord};

#[derive(Debug, Args)]
pub struct ProviderArgs {
    /// Replay fixture directory instead of the live API.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Live API requests per second.
    #[arg(long, default_value_t = 5.0)]
    pub rate: f64,
    /// Attempts per request for quota and transport failures.
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
}

#[derive(Debug, Args)]
pub struct ThumbArgs {
    /// Directory of precomputed thumbnail embeddings keyed by image hash.
    /// Without it a deterministic stub embedding is used.
    #[arg(long)]
    pub thumbnail_cache: Option<PathBuf>,
    /// Directory relative thumbnail paths are resolved against; defaults to
    /// the dataset directory.
    #[arg(long)]
    pub thumbnail_base: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset directory with ground truth.
    #[arg(long, required_unless_present = "planted")]
    pub dataset: Option<PathBuf>,
    /// Use a synthetic planted-signal set of this size instead of a dataset.
    #[arg(long, conflicts_with = "dataset")]
    pub planted: Option<usize>,
    /// 4 for the full taxonomy, 2 for appropriate/inappropriate.
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[command(flatten)]
    pub thumbs: ThumbArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub learning_rate: f64,
    /// Early-stopping patience in epochs; 0 disables early stopping.
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.1)]
    pub validation_fraction: f64,
    /// SMOTE neighbours; 0 disables oversampling.
    #[arg(long, default_value_t = 5)]
    pub smote_k: usize,
}

impl TrainArgs {
    pub fn hyperparams(&self, seed: u64) -> TrainHyperparams {
        TrainHyperparams {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            patience: (self.patience > 0).then_some(self.patience),
            validation_fraction: self.validation_fraction,
            smote_k: (self.smote_k > 0).then_some(self.smote_k),
            ..TrainHyperparams::default()
        }
    }
}

/// Config, master seed and workspace shared by every stage.
pub struct Ctx {
    pub config: RunConfig,
    pub master_seed: u64,
    pub workspace: Option<PathBuf>,
}

impl Ctx {
    pub fn new(config: Option<&Path>, seed: Option<u64>, workspace: Option<PathBuf>) -> Result<Self> {
        let config = match config {
            Some(p) => {
                require_exists(p, "--config")?;
                RunConfig::load(p)?
            }
            None => RunConfig::default(),
        };
        config.validate_paths()?;
        let master_seed = match seed {
            Some(s) => s,
            None => config.master_seed()?,
        };
        Ok(Ctx {
            config,
            master_seed,
            workspace,
        })
    }

    pub fn seed(&self, stage: &str) -> u64 {
        stage_seed(self.master_seed, stage)
    }

    /// Lock the workspace, or `default_dir` when none was given.
    pub fn lock(&self, default_dir: &Path) -> Result<WorkspaceLock> {
        let dir = self.workspace.as_deref().unwrap_or(default_dir);
        WorkspaceLock::acquire(ensure_dir(dir)?)
    }

    pub fn manifest(&self, stage: &str) -> RunManifest {
        RunManifest::new(stage, &self.config, self.master_seed)
    }

    /// Style lexicon, with dictionaries overridden by the `bad_words`,
    /// `child_words` and `emoticons` config keys.
    pub fn lexicon(&self) -> Result<StyleLexicon> {
        let mut lex = StyleLexicon::default();
        if let Some(p) = self.config.path("bad_words") {
            lex.bad_words = Dictionary::load(p)?;
        }
        if let Some(p) = self.config.path("child_words") {
            lex.child_words = Dictionary::load(p)?;
        }
        if let Some(p) = self.config.path("emoticons") {
            lex.emoticons = EmoticonDetector::from_patterns(read_lines(p)?);
        }
        Ok(lex)
    }

    pub fn provider(&self, args: &ProviderArgs, seed: u64) -> Result<Box<dyn MetadataProvider>> {
        if let Some(dir) = &args.fixtures {
            require_exists(dir, "--fixtures")?;
            let f = FixtureProvider::load_dir(dir)?;
            return Ok(Box::new(Retrying::new(f, RetryPolicy::no_delay(args.retries))));
        }
        let keys = match self.config.get("api_keys") {
            Some(k) => KeyPool::new(k.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()),
            None => KeyPool::from_env(DEFAULT_KEY_ENV),
        }?;
        if !(args.rate > 0.0) {
            return Err(Error::Config {
                key: "--rate".into(),
                message: "must be positive".into(),
            });
        }
        let bucket = Arc::new(TokenBucket::new(args.rate.ceil().max(1.0) as u32, args.rate)?);
        let mut live = LiveProvider::new(keys, bucket).with_seed(seed);
        if let Some(base) = self.config.get("api_base") {
            live = live.with_base_url(base);
        }
        let policy = RetryPolicy {
            attempts: args.retries.max(1),
            ..RetryPolicy::default()
        };
        Ok(Box::new(Retrying::new(live, policy)))
    }
}

pub fn require_exists(p: &Path, flag: &str) -> Result<()> {
    if p.exists() {
        Ok(())
    } else {
        Err(Error::Config {
            key: flag.into(),
            message: format!("path `{}` does not exist", p.display()),
        })
    }
}

pub fn embedder(args: &ThumbArgs) -> Result<ThumbnailEmbedder> {
    match &args.thumbnail_cache {
        Some(dir) => {
            require_exists(dir, "--thumbnail-cache")?;
            let backbone = PrecomputedBackbone {
                name: "precomputed".into(),
            };
            Ok(ThumbnailEmbedder::new(Arc::new(backbone)).with_disk_cache(dir))
        }
        None => Ok(ThumbnailEmbedder::stub(0)),
    }
}

pub fn thumbnail_base(args: &ThumbArgs, dataset: Option<&Path>) -> Option<PathBuf> {
    args.thumbnail_base.clone().or_else(|| dataset.map(Path::to_path_buf))
}

/// Labelled records for training or evaluation.
pub struct Labelled {
    pub records: Vec<VideoRecord>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

pub fn labelled(args: &DataArgs, seed: u64) -> Result<Labelled> {
    if args.classes != 2 && args.classes != 4 {
        return Err(Error::Config {
            key: "--classes".into(),
            message: "must be 2 or 4".into(),
        });
    }
    if let Some(n) = args.planted {
        if args.classes != 2 {
            return Err(Error::Config {
                key: "--classes".into(),
                message: "the planted-signal set is binary; pass --classes 2".into(),
            });
        }
        let (records, labels) = planted_signal(&PlantedSpec {
            n,
            seed,
            ..PlantedSpec::default()
        });
        return Ok(Labelled {
            records,
            labels,
            n_classes: 2,
        });
    }
    let dir = args.dataset.as_deref().expect("clap requires dataset or planted");
    require_exists(dir, "--dataset")?;
    let d = read_dataset(dir)?;
    let gt = d.ground_truth().ok_or_else(|| Error::Config {
        key: "--dataset".into(),
        message: "dataset has no ground truth; run `aggregate` first".into(),
    })?;
    let mut out = Labelled {
        records: Vec::new(),
        labels: Vec::new(),
        n_classes: args.classes,
    };
    let mut by_id: BTreeMap<&str, usize> = BTreeMap::new();
    for e in gt.values() {
        if let Some(l) = e.verdict.label() {
            let y = if args.classes == 2 { collapse_label(l).index() } else { l.index() };
            by_id.insert(&e.video_id, y);
        }
    }
    for r in d.videos() {
        if let Some(&y) = by_id.get(r.video_id.as_str()) {
            out.records.push(r.clone());
            out.labels.push(y);
        }
    }
    if out.records.is_empty() {
        return Err(Error::Config {
            key: "--dataset".into(),
            message: "no labelled videos".into(),
        });
    }
    Ok(out)
}

pub fn read_keywords(path: &Path, flag: &str) -> Result<Vec<String>> {
    require_exists(path, flag)?;
    read_lines(path)
}
