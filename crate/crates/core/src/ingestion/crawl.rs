use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{MetadataProvider, ProviderError};
use crate::error::{Error, Result};
use crate::io::{atomic_write, read_to_string};
use crate::model::{Availability, Dataset, Label, Strategy, VideoRecord};

/// Which seed strategies to run and how far to expand them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrawlPlan {
    pub elsagate_keywords: Vec<String>,
    /// Channels whose uploads count as Elsagate-related seeds.
    pub elsagate_channels: Vec<String>,
    pub child_keywords: Vec<String>,
    pub random_count: usize,
    pub popular_regions: Vec<String>,
    /// Recommendations followed per video.
    pub fanout: usize,
    /// Hops away from the seeds.
    pub depth: u32,
    /// Result cap of each search and popular-chart request.
    pub per_request: usize,
    /// Requests in flight at once.
    pub parallelism: usize,
}

impl Default for CrawlPlan {
    fn default() -> Self {
        CrawlPlan {
            elsagate_keywords: Vec::new(),
            elsagate_channels: Vec::new(),
            child_keywords: Vec::new(),
            random_count: 0,
            popular_regions: ["US", "GB", "RU", "IN", "CA"].map(String::from).to_vec(),
            fanout: 10,
            depth: 3,
            per_request: 30,
            parallelism: 4,
        }
    }
}

impl CrawlPlan {
    /// A plan with no seed strategies configured.
    pub fn empty() -> Self {
        CrawlPlan {
            popular_regions: Vec::new(),
            ..Self::default()
        }
    }

    pub fn has_strategy(&self) -> bool {
        !(self.elsagate_keywords.is_empty()
            && self.elsagate_channels.is_empty()
            && self.child_keywords.is_empty()
            && self.random_count == 0
            && self.popular_regions.is_empty())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| {
            Err(Error::Config {
                key: key.into(),
                message: message.into(),
            })
        };
        if self.fanout == 0 {
            return bad("fanout", "must be at least 1");
        }
        if self.per_request == 0 {
            return bad("per_request", "must be at least 1");
        }
        if self.parallelism == 0 {
            return bad("parallelism", "must be at least 1");
        }
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.parallelism)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedRequest {
    pub request: String,
    pub error: ProviderError,
}

/// A crawl result together with the requests that failed after retries.
#[derive(Debug, Clone, PartialEq)]
pub struct Crawl {
    pub dataset: Dataset,
    pub failures: Vec<FailedRequest>,
}

fn fetch_all<P: MetadataProvider>(
    pool: &rayon::ThreadPool,
    p: &P,
    ids: &[String],
) -> Vec<std::result::Result<VideoRecord, ProviderError>> {
    pool.install(|| ids.par_iter().map(|id| p.fetch(id)).collect())
}

/// Run every configured seed strategy and fetch the union of the results.
/// Each record's `origins` lists the strategies that produced it.
pub fn collect_seeds<P: MetadataProvider>(plan: &CrawlPlan, p: &P) -> Result<Crawl> {
    plan.validate()?;
    if !plan.has_strategy() {
        return Err(Error::Config {
            key: "seeds".into(),
            message: "no seed strategy configured".into(),
        });
    }
    type Listing<'a> = (Strategy, String, Box<dyn Fn() -> std::result::Result<Vec<String>, ProviderError> + Sync + 'a>);
    let n = plan.per_request;
    let mut listings: Vec<Listing> = Vec::new();
    for k in &plan.elsagate_keywords {
        listings.push((Strategy::ElsagateRelated, format!("search `{k}`"), Box::new(move || p.search(k, n))));
    }
    for c in &plan.elsagate_channels {
        listings.push((Strategy::ElsagateRelated, format!("channel `{c}`"), Box::new(move || p.channel_uploads(c))));
    }
    for k in &plan.child_keywords {
        listings.push((Strategy::OtherChildRelated, format!("search `{k}`"), Box::new(move || p.search(k, n))));
    }
    if plan.random_count > 0 {
        let m = plan.random_count;
        listings.push((Strategy::Random, "random sample".into(), Box::new(move || p.random_sample(m))));
    }
    for r in &plan.popular_regions {
        listings.push((Strategy::Popular, format!("popular {r}"), Box::new(move || p.popular(r, n))));
    }

    let pool = plan.pool()?;
    let results: Vec<_> = pool.install(|| listings.par_iter().map(|(_, _, f)| f()).collect());
    let mut failures = Vec::new();
    let mut origins: BTreeMap<String, BTreeSet<Strategy>> = BTreeMap::new();
    for ((strategy, request, _), r) in listings.iter().zip(results) {
        match r {
            Ok(ids) => {
                for id in ids {
                    origins.entry(id).or_default().insert(*strategy);
                }
            }
            Err(error) => failures.push(FailedRequest {
                request: request.clone(),
                error,
            }),
        }
    }

    let ids: Vec<String> = origins.keys().cloned().collect();
    let mut dataset = Dataset::new();
    for (id, r) in ids.iter().zip(fetch_all(&pool, p, &ids)) {
        match r {
            Ok(mut rec) => {
                rec.origins = origins[id].clone();
                dataset.upsert(rec);
            }
            Err(error) => failures.push(FailedRequest {
                request: format!("fetch {id}"),
                error,
            }),
        }
    }
    log::info!("collected {} seed videos, {} failed requests", dataset.len(), failures.len());
    Ok(Crawl { dataset, failures })
}

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    next_hop: u32,
    frontier: Vec<String>,
    videos: Vec<VideoRecord>,
    edges: Vec<(String, String, u32)>,
    unfetched: Vec<String>,
    failures: Vec<FailedRequest>,
}

impl Checkpoint {
    fn capture(next_hop: u32, frontier: &[String], d: &Dataset, failures: &[FailedRequest]) -> Self {
        Checkpoint {
            next_hop,
            frontier: frontier.to_vec(),
            videos: d.videos().cloned().collect(),
            edges: d.edges().map(|e| (e.from, e.to, e.hop)).collect(),
            unfetched: d.unfetched().iter().cloned().collect(),
            failures: failures.to_vec(),
        }
    }

    fn restore(self, seeds: &Dataset) -> (u32, Vec<String>, Dataset, Vec<FailedRequest>) {
        let mut d = Dataset::new();
        for v in self.videos {
            d.upsert(v);
        }
        for u in self.unfetched {
            d.mark_unfetched(u);
        }
        for (f, t, h) in self.edges {
            d.add_edge(f, t, h);
        }
        if let Some(gt) = seeds.ground_truth() {
            d.set_ground_truth(gt.values().cloned());
        }
        (self.next_hop, self.frontier, d, self.failures)
    }
}

pub fn snowball<P: MetadataProvider>(seeds: &Dataset, plan: &CrawlPlan, p: &P) -> Result<Crawl> {
    snowball_resumable(seeds, plan, p, None)
}

/// Breadth-first expansion through the top `plan.fanout` recommendations of
/// each video, up to `plan.depth` hops from the seeds. Every video is
/// fetched at most once; a recommendation that cannot be fetched keeps its
/// edge and is marked unfetched.
///
/// With a checkpoint path, progress is saved after every hop and an
/// existing checkpoint is resumed.
pub fn snowball_resumable<P: MetadataProvider>(
    seeds: &Dataset,
    plan: &CrawlPlan,
    p: &P,
    checkpoint: Option<&Path>,
) -> Result<Crawl> {
    plan.validate()?;
    let (start, mut frontier, mut dataset, mut failures) = match checkpoint.filter(|c| c.exists()) {
        Some(path) => {
            let cp: Checkpoint = serde_json::from_str(&read_to_string(path)?)
                .map_err(|e| Error::parse(path.display().to_string(), e))?;
            log::info!("resuming crawl at hop {}", cp.next_hop);
            cp.restore(seeds)
        }
        None => (1, seeds.video_ids().map(str::to_string).collect(), seeds.clone(), Vec::new()),
    };
    let mut visited: BTreeSet<String> = dataset.video_ids().map(str::to_string).collect();
    visited.extend(dataset.unfetched().iter().cloned());
    let pool = plan.pool()?;

    for hop in start..=plan.depth {
        if frontier.is_empty() {
            break;
        }
        let recs: Vec<_> = pool.install(|| frontier.par_iter().map(|v| p.recommendations(v, plan.fanout)).collect());
        let mut new_ids = Vec::new();
        let mut parent_origins = Vec::new();
        for (v, r) in frontier.iter().zip(recs) {
            let ids = match r {
                Ok(ids) => ids,
                Err(error) => {
                    failures.push(FailedRequest {
                        request: format!("recommendations of {v}"),
                        error,
                    });
                    continue;
                }
            };
            let mut seen = BTreeSet::new();
            let ids: Vec<String> = ids.into_iter().filter(|id| seen.insert(id.clone())).take(plan.fanout).collect();
            let origins = dataset.get(v).map(|r| r.origins.clone()).unwrap_or_default();
            for id in ids {
                dataset.add_edge(v.clone(), id.clone(), hop);
                if visited.insert(id.clone()) {
                    new_ids.push(id);
                    parent_origins.push(origins.clone());
                }
            }
        }
        let mut next = Vec::new();
        for ((id, origins), r) in new_ids.iter().zip(parent_origins).zip(fetch_all(&pool, p, &new_ids)) {
            match r {
                Ok(mut rec) => {
                    rec.origins = origins;
                    dataset.upsert(rec);
                    next.push(id.clone());
                }
                Err(error) => {
                    dataset.mark_unfetched(id.clone());
                    failures.push(FailedRequest {
                        request: format!("fetch {id}"),
                        error,
                    });
                }
            }
        }
        log::info!("hop {hop}: {} new videos, {} total", next.len(), dataset.len());
        frontier = next;
        if let Some(path) = checkpoint {
            let cp = Checkpoint::capture(hop + 1, &frontier, &dataset, &failures);
            let json = serde_json::to_vec(&cp).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            atomic_write(path, &json)?;
        }
    }
    Ok(Crawl { dataset, failures })
}

/// Availability counts for one label class, or for all videos when `class`
/// is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub class: Option<Label>,
    pub total: usize,
    pub live: usize,
    pub removed: usize,
    pub age_restricted: usize,
    /// Videos whose status could not be determined.
    pub unknown: usize,
    pub mean_days_since_publication: Option<f64>,
}

impl AuditRow {
    fn new(class: Option<Label>) -> Self {
        AuditRow {
            class,
            total: 0,
            live: 0,
            removed: 0,
            age_restricted: 0,
            unknown: 0,
            mean_days_since_publication: None,
        }
    }

    fn frac(&self, n: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            n as f64 / self.total as f64
        }
    }

    pub fn removed_fraction(&self) -> f64 {
        self.frac(self.removed)
    }

    pub fn age_restricted_fraction(&self) -> f64 {
        self.frac(self.age_restricted)
    }

    pub fn live_fraction(&self) -> f64 {
        self.frac(self.live)
    }

    pub fn unknown_fraction(&self) -> f64 {
        self.frac(self.unknown)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityAudit {
    /// The overall row first, then one row per label present.
    pub rows: Vec<AuditRow>,
    pub failures: Vec<FailedRequest>,
}

impl AvailabilityAudit {
    pub fn overall(&self) -> &AuditRow {
        &self.rows[0]
    }

    pub fn class(&self, l: Label) -> Option<&AuditRow> {
        self.rows.iter().find(|r| r.class == Some(l))
    }
}

/// Re-fetch every video and count how many are still live. With ground
/// truth present, counts are broken down per label (excluded videos only
/// enter the overall row).
pub fn audit_availability<P: MetadataProvider>(d: &Dataset, p: &P, now: DateTime<Utc>) -> Result<AvailabilityAudit> {
    let ids: Vec<String> = d.video_ids().map(str::to_string).collect();
    let pool = CrawlPlan::default().pool()?;
    let statuses = fetch_all(&pool, p, &ids);
    let mut rows: BTreeMap<Option<Label>, (AuditRow, f64, usize)> = BTreeMap::new();
    let mut failures = Vec::new();
    for (id, status) in ids.iter().zip(statuses) {
        let status = match status {
            Ok(r) => Some(r.availability),
            Err(error) => {
                failures.push(FailedRequest {
                    request: format!("fetch {id}"),
                    error,
                });
                None
            }
        };
        let record = d.get(id).expect("id taken from the dataset");
        let days = (now - record.published_at).num_seconds() as f64 / 86_400.0;
        let mut keys = vec![None];
        if let Some(l) = d.label_of(id) {
            keys.push(Some(l));
        }
        for k in keys {
            let (row, day_sum, day_n) = rows.entry(k).or_insert_with(|| (AuditRow::new(k), 0.0, 0));
            row.total += 1;
            match status {
                Some(Availability::Live) => row.live += 1,
                Some(Availability::Removed) => row.removed += 1,
                Some(Availability::AgeRestricted) => row.age_restricted += 1,
                None => row.unknown += 1,
            }
            *day_sum += days;
            *day_n += 1;
        }
    }
    rows.entry(None).or_insert_with(|| (AuditRow::new(None), 0.0, 0));
    let rows = rows
        .into_values()
        .map(|(mut row, sum, n)| {
            row.mean_days_since_publication = (n > 0).then(|| sum / n as f64);
            row
        })
        .collect();
    Ok(AvailabilityAudit { rows, failures })
}

pub fn audit_tsv(a: &AvailabilityAudit) -> String {
    let mut s = String::from("class\ttotal\tlive\tremoved\tage_restricted\tunknown\tmean_days_since_publication\n");
    for r in &a.rows {
        s.push_str(&format!(
            "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}\n",
            r.class.map_or("all", Label::as_str),
            r.total,
            r.live_fraction(),
            r.removed_fraction(),
            r.age_restricted_fraction(),
            r.unknown_fraction(),
            r.mean_days_since_publication.map_or("NA".into(), |d| format!("{d:.1}")),
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::{FixtureProvider, Op};
    use crate::model::{GroundTruthEntry, Verdict};
    use chrono::TimeZone;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap()
    }

    fn fixture_with(ids: &[&str]) -> FixtureProvider {
        let mut f = FixtureProvider::new();
        for id in ids {
            f.add_video(VideoRecord::new(*id, format!("video {id}"), t0()));
        }
        f
    }

    #[test]
    fn seeds_are_capped_and_deduplicated() {
        let ids: Vec<String> = (0..40).map(|i| format!("v{i}")).collect();
        let mut f = fixture_with(&ids.iter().map(String::as_str).collect::<Vec<_>>());
        f.set_response(Op::Search, "peppa pig", &ids)
            .set_response(Op::Search, "few", ["v0", "v1", "v2", "v3", "v4", "v5", "v6"])
            .set_response(Op::Search, "other", ["v0", "v39"]);
        let mut plan = CrawlPlan::empty();
        plan.elsagate_keywords = vec!["peppa pig".into()];
        assert_eq!(collect_seeds(&plan, &f).unwrap().dataset.len(), 30);
        plan.elsagate_keywords = vec!["few".into()];
        assert_eq!(collect_seeds(&plan, &f).unwrap().dataset.len(), 7);
        plan.child_keywords = vec!["other".into()];
        let d = collect_seeds(&plan, &f).unwrap().dataset;
        assert_eq!(d.len(), 8);
        let both: BTreeSet<Strategy> = [Strategy::ElsagateRelated, Strategy::OtherChildRelated].into();
        assert_eq!(d.get("v0").unwrap().origins, both);
    }

    #[test]
    fn failed_inputs_are_reported() {
        let mut f = fixture_with(&["a"]);
        f.set_response(Op::Search, "ok", ["a", "ghost"]).set_error(Op::Search, "bad", "quota: daily limit");
        let mut plan = CrawlPlan::empty();
        plan.elsagate_keywords = vec!["ok".into(), "bad".into()];
        let c = collect_seeds(&plan, &f).unwrap();
        assert_eq!(c.dataset.len(), 1);
        let requests: Vec<&str> = c.failures.iter().map(|f| f.request.as_str()).collect();
        assert_eq!(requests, vec!["search `bad`", "fetch ghost"]);
    }

    #[test]
    fn no_strategy_is_an_error() {
        assert!(collect_seeds(&CrawlPlan::empty(), &FixtureProvider::new()).is_err());
    }

    #[test]
    fn depth_zero_returns_the_seeds() {
        let mut f = fixture_with(&["s", "r"]);
        f.set_response(Op::Recommendations, "s", ["r"]);
        let mut seeds = Dataset::new();
        seeds.upsert(f.fetch("s").unwrap());
        let plan = CrawlPlan { depth: 0, ..CrawlPlan::empty() };
        assert_eq!(snowball(&seeds, &plan, &f).unwrap().dataset, seeds);
    }

    #[test]
    fn cycle_is_fetched_once_and_unfetchable_nodes_are_marked() {
        let mut f = fixture_with(&["a", "b"]);
        f.set_response(Op::Recommendations, "a", ["b", "missing"])
            .set_response(Op::Recommendations, "b", ["a"]);
        let mut seeds = Dataset::new();
        seeds.upsert(VideoRecord::new("a", "", t0()));
        let c = snowball(&seeds, &CrawlPlan::empty(), &f).unwrap();
        assert_eq!(f.fetch_counts().get("a"), None);
        assert_eq!(f.fetch_counts()["b"], 1);
        assert!(c.dataset.is_unfetched("missing"));
        assert_eq!(c.dataset.edge_count(), 3);
        assert!(c.dataset.check_invariants().is_empty());
    }

    #[test]
    fn checkpoint_resume_matches_a_fresh_crawl() {
        let mut f = FixtureProvider::new();
        for i in 0..40 {
            f.add_video(VideoRecord::new(format!("n{i}"), "", t0()));
            let recs: Vec<String> = (1..4).map(|k| format!("n{}", (i * 3 + k) % 40)).collect();
            f.set_response(Op::Recommendations, &format!("n{i}"), recs);
        }
        let mut seeds = Dataset::new();
        seeds.upsert(VideoRecord::new("n0", "", t0()));
        let full = CrawlPlan { depth: 3, ..CrawlPlan::empty() };
        let fresh = snowball(&seeds, &full, &f).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let cp = dir.path().join("crawl.checkpoint");
        let g = f.clone();
        let partial = CrawlPlan { depth: 1, ..full.clone() };
        snowball_resumable(&seeds, &partial, &g, Some(&cp)).unwrap();
        let resumed = snowball_resumable(&seeds, &full, &g, Some(&cp)).unwrap();
        assert_eq!(resumed.dataset, fresh.dataset);
        assert!(g.fetch_counts().values().all(|&c| c == 1));
    }

    #[test]
    fn audit_counts_removed_per_class() {
        let mut f = FixtureProvider::new();
        let mut d = Dataset::new();
        let mut gt = Vec::new();
        for i in 0..10 {
            let mut r = VideoRecord::new(format!("d{i}"), "", t0());
            d.upsert(r.clone());
            if i < 2 {
                r.availability = Availability::Removed;
            }
            f.add_video(r);
            gt.push(GroundTruthEntry {
                video_id: format!("d{i}"),
                rater_labels: vec![Label::Disturbing; 3],
                verdict: Verdict::Agreed(Label::Disturbing),
            });
        }
        d.set_ground_truth(gt);
        let now = t0() + chrono::Duration::days(10);
        let a = audit_availability(&d, &f, now).unwrap();
        let row = a.class(Label::Disturbing).unwrap();
        assert_eq!(row.removed_fraction(), 0.2);
        assert_eq!(row.age_restricted_fraction(), 0.0);
        assert_eq!(row.mean_days_since_publication, Some(10.0));
        assert_eq!(a.overall().total, 10);
        assert!(audit_tsv(&a).contains("disturbing\t10\t0.8000\t0.2000"));
    }

    #[test]
    fn all_live_audit() {
        let f = fixture_with(&["a", "b"]);
        let mut d = Dataset::new();
        d.upsert(f.fetch("a").unwrap());
        d.upsert(f.fetch("b").unwrap());
        let a = audit_availability(&d, &f, t0()).unwrap();
        assert_eq!(a.rows.len(), 1);
        assert_eq!(a.overall().removed_fraction(), 0.0);
        assert_eq!(a.overall().age_restricted_fraction(), 0.0);
    }
}
