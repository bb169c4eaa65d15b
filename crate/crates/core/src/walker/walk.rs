use std::collections::{BTreeMap, BTreeSet};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::KeywordCluster;
use crate::classifier::TrainedModel;
use crate::error::{Error, Result};
use crate::features::ThumbnailEmbedder;
use crate::ingestion::MetadataProvider;
use crate::io::read_jsonl;
use crate::model::{Availability, BinaryLabel, VideoRecord};
use crate::nn::train::mix_seed;

/// Assigns a binary label to a visited video.
pub trait VideoClassifier: Sync {
    fn classify(&self, r: &VideoRecord) -> Result<BinaryLabel>;
}

/// A trained model plus what it needs to featurize records.
pub struct ModelClassifier<'a> {
    pub model: &'a TrainedModel,
    pub embedder: &'a ThumbnailEmbedder,
    pub base_dir: Option<PathBuf>,
}

impl VideoClassifier for ModelClassifier<'_> {
    fn classify(&self, r: &VideoRecord) -> Result<BinaryLabel> {
        Ok(self.model.classify_record(r, self.embedder, self.base_dir.as_deref())?.0)
    }
}

/// Known labels, e.g. ground truth on a fixture graph.
#[derive(Debug, Clone, Default)]
pub struct LabelOracle(pub BTreeMap<String, BinaryLabel>);

impl VideoClassifier for LabelOracle {
    fn classify(&self, r: &VideoRecord) -> Result<BinaryLabel> {
        self.0
            .get(&r.video_id)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("no label for {}", r.video_id)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkOptions {
    pub hops: usize,
    /// Search results the start is drawn from.
    pub top_k: usize,
    /// Recommendations requested at each hop.
    pub fanout: usize,
    pub avoid_revisits: bool,
}

impl Default for WalkOptions {
    fn default() -> Self {
        WalkOptions {
            hops: 10,
            top_k: 10,
            fanout: 10,
            avoid_revisits: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Completed,
    NoSearchResults,
    /// No playable recommendation at this hop.
    DeadEnd { hop: usize },
    Failed { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkTrace {
    pub keyword: String,
    pub walk_index: usize,
    pub seed: u64,
    pub visits: Vec<String>,
    pub labels: Vec<BinaryLabel>,
    pub first_hit: Option<usize>,
    pub stop: StopReason,
}

impl WalkTrace {
    fn new(keyword: &str, walk_index: usize, seed: u64) -> Self {
        WalkTrace {
            keyword: keyword.to_string(),
            walk_index,
            seed,
            visits: Vec::new(),
            labels: Vec::new(),
            first_hit: None,
            stop: StopReason::Completed,
        }
    }

    /// Number of hops taken after the start video.
    pub fn hops(&self) -> usize {
        self.visits.len().saturating_sub(1)
    }

    fn push(&mut self, id: String, label: BinaryLabel) {
        if label == BinaryLabel::Inappropriate && self.first_hit.is_none() {
            self.first_hit = Some(self.visits.len());
        }
        self.visits.push(id);
        self.labels.push(label);
    }
}

/// Draw uniformly among `candidates` until one can be fetched, played and
/// classified. Returns `None` when every candidate fails.
fn pick<P: MetadataProvider, C: VideoClassifier>(
    mut candidates: Vec<String>,
    provider: &P,
    classifier: &C,
    rng: &mut ChaCha8Rng,
) -> Option<(String, BinaryLabel)> {
    while !candidates.is_empty() {
        let id = candidates.swap_remove(rng.gen_range(0..candidates.len()));
        let Ok(r) = provider.fetch(&id) else { continue };
        if r.availability == Availability::Removed {
            continue;
        }
        match classifier.classify(&r) {
            Ok(label) => return Some((id, label)),
            Err(e) => log::warn!("cannot classify {id}: {e}"),
        }
    }
    None
}

/// One walk: a uniform pick among the top search results for `keyword`, then
/// `opts.hops` uniform picks among the current video's recommendations.
pub fn random_walk<P: MetadataProvider, C: VideoClassifier>(
    keyword: &str,
    opts: &WalkOptions,
    provider: &P,
    classifier: &C,
    seed: u64,
) -> WalkTrace {
    random_walk_indexed(keyword, 0, opts, provider, classifier, seed)
}

fn random_walk_indexed<P: MetadataProvider, C: VideoClassifier>(
    keyword: &str,
    walk_index: usize,
    opts: &WalkOptions,
    provider: &P,
    classifier: &C,
    seed: u64,
) -> WalkTrace {
    let mut trace = WalkTrace::new(keyword, walk_index, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let results = match provider.search(keyword, opts.top_k) {
        Ok(r) => r,
        Err(e) => {
            trace.stop = StopReason::Failed { message: e.to_string() };
            return trace;
        }
    };
    if results.is_empty() {
        trace.stop = StopReason::NoSearchResults;
        return trace;
    }
    let Some((id, label)) = pick(results, provider, classifier, &mut rng) else {
        trace.stop = StopReason::DeadEnd { hop: 0 };
        return trace;
    };
    trace.push(id, label);
    for hop in 1..=opts.hops {
        let current = trace.visits.last().expect("start visited");
        let mut recs = match provider.recommendations(current, opts.fanout) {
            Ok(r) => r,
            Err(e) => {
                trace.stop = StopReason::Failed { message: e.to_string() };
                return trace;
            }
        };
        if opts.avoid_revisits {
            recs.retain(|r| !trace.visits.contains(r));
        }
        match pick(recs, provider, classifier, &mut rng) {
            Some((id, label)) => trace.push(id, label),
            None => {
                trace.stop = StopReason::DeadEnd { hop };
                return trace;
            }
        }
    }
    trace
}

/// Seed of walk `index` for `keyword`, derived from the master seed.
pub fn campaign_seed(master: u64, keyword: &str, index: usize) -> u64 {
    // FNV-1a keeps the keyword hash stable across platforms and releases.
    let h = keyword
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
    mix_seed(&[master, h, index as u64])
}

/// `walks_per_keyword` walks for every keyword, each independently seeded.
///
/// With a log path, every finished keyword's traces are appended to the log
/// and walks already present there are not repeated, so an interrupted
/// campaign can be resumed. The returned traces are ordered by keyword
/// position, then walk index.
pub fn run_campaign<P: MetadataProvider, C: VideoClassifier>(
    keywords: &[String],
    walks_per_keyword: usize,
    opts: &WalkOptions,
    provider: &P,
    classifier: &C,
    master_seed: u64,
    log_path: Option<&Path>,
) -> Result<Vec<WalkTrace>> {
    let mut done: BTreeMap<(String, usize), WalkTrace> = BTreeMap::new();
    if let Some(path) = log_path.filter(|p| p.exists()) {
        for t in read_traces(path)? {
            done.insert((t.keyword.clone(), t.walk_index), t);
        }
        log::info!("resuming campaign with {} finished walks", done.len());
    }
    let mut out = Vec::with_capacity(keywords.len() * walks_per_keyword);
    for kw in keywords {
        let todo: Vec<usize> = (0..walks_per_keyword)
            .filter(|i| !done.contains_key(&(kw.clone(), *i)))
            .collect();
        let fresh: Vec<WalkTrace> = todo
            .par_iter()
            .map(|&i| random_walk_indexed(kw, i, opts, provider, classifier, campaign_seed(master_seed, kw, i)))
            .collect();
        for t in &fresh {
            if let StopReason::Failed { message } = &t.stop {
                log::warn!("walk {} of `{kw}` failed: {message}", t.walk_index);
            }
        }
        if let Some(path) = log_path {
            append_traces(path, &fresh)?;
        }
        for t in fresh {
            done.insert((kw.clone(), t.walk_index), t);
        }
        out.extend((0..walks_per_keyword).filter_map(|i| done.get(&(kw.clone(), i)).cloned()));
    }
    Ok(out)
}

fn append_traces(path: &Path, traces: &[WalkTrace]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut buf = String::new();
    for t in traces {
        buf.push_str(&serde_json::to_string(t).map_err(|e| Error::InvalidArgument(e.to_string()))?);
        buf.push('\n');
    }
    f.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))?;
    f.sync_data().map_err(|e| Error::io(path, e))
}

pub fn read_traces(path: impl AsRef<Path>) -> Result<Vec<WalkTrace>> {
    read_jsonl(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopRow {
    pub group: String,
    pub walks: usize,
    /// Percent of walks with an inappropriate visit at or before each hop.
    pub cumulative_pct: Vec<f64>,
    /// The group had no walks; its row is all zeros.
    pub empty: bool,
}

/// Keyword groups from clusters, named by mapping when available.
pub fn groups_from_clusters(clusters: &[KeywordCluster]) -> Vec<(String, BTreeSet<String>)> {
    clusters
        .iter()
        .map(|c| {
            let name = c.name.clone().unwrap_or_else(|| format!("cluster {}", c.id));
            (name, c.members.iter().cloned().collect())
        })
        .collect()
}

/// Cumulative hit percentages per hop for each keyword group.
pub fn hop_report(traces: &[WalkTrace], groups: &[(String, BTreeSet<String>)], hops: usize) -> Vec<HopRow> {
    groups
        .iter()
        .map(|(name, keywords)| {
            let members: Vec<&WalkTrace> = traces.iter().filter(|t| keywords.contains(&t.keyword)).collect();
            let mut first_hits = vec![0usize; hops + 1];
            for t in &members {
                if let Some(h) = t.first_hit.filter(|&h| h <= hops) {
                    first_hits[h] += 1;
                }
            }
            let n = members.len();
            let mut acc = 0;
            let cumulative_pct = first_hits
                .iter()
                .map(|&c| {
                    acc += c;
                    if n == 0 {
                        0.0
                    } else {
                        100.0 * acc as f64 / n as f64
                    }
                })
                .collect();
            if n == 0 {
                log::warn!("keyword group `{name}` has no walks");
            }
            HopRow {
                group: name.clone(),
                walks: n,
                cumulative_pct,
                empty: n == 0,
            }
        })
        .collect()
}

pub fn hop_report_tsv(rows: &[HopRow]) -> String {
    let hops = rows.first().map_or(0, |r| r.cumulative_pct.len());
    let mut s = String::from("group\twalks");
    for h in 0..hops {
        s.push_str(&format!("\thop_{h}"));
    }
    s.push('\n');
    for r in rows {
        s.push_str(&format!("{}\t{}", r.group, r.walks));
        for p in &r.cumulative_pct {
            s.push_str(&format!("\t{p:.2}"));
        }
        s.push('\n');
    }
    s
}
