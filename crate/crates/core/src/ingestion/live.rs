//! Client for the public video platform's Data API (v3 REST endpoints).

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use super::{MetadataProvider, ProviderError, ProviderResult, TokenBucket};
use crate::model::{Availability, VideoRecord};

pub const DEFAULT_API_BASE: &str = "https://www.googleapis.com/youtube/v3";
pub const DEFAULT_KEY_ENV: &str = "VIDSAFE_API_KEYS";
/// Page size ceiling of the listing endpoints.
const PAGE_MAX: usize = 50;
/// Upper bound on the uploads collected per channel.
const CHANNEL_LIMIT: usize = 1000;

/// API keys used round-robin; a key that hits its quota is rotated out of
/// first position.
#[derive(Debug)]
pub struct KeyPool {
    keys: Vec<String>,
    current: AtomicUsize,
}

impl KeyPool {
    pub fn new(keys: Vec<String>) -> ProviderResult<Self> {
        let keys: Vec<String> = keys.into_iter().map(|k| k.trim().to_string()).filter(|k| !k.is_empty()).collect();
        if keys.is_empty() {
            return Err(ProviderError::Credentials("no API keys given".into()));
        }
        Ok(KeyPool {
            keys,
            current: AtomicUsize::new(0),
        })
    }

    /// Comma-separated keys from environment variable `var`.
    pub fn from_env(var: &str) -> ProviderResult<Self> {
        let raw = std::env::var(var).map_err(|_| ProviderError::Credentials(format!("environment variable {var} is not set")))?;
        Self::new(raw.split(',').map(str::to_string).collect())
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    fn current(&self) -> &str {
        &self.keys[self.current.load(Ordering::Relaxed) % self.keys.len()]
    }

    fn rotate(&self) {
        self.current.fetch_add(1, Ordering::Relaxed);
    }
}

pub struct LiveProvider {
    base_url: String,
    keys: KeyPool,
    limiter: Arc<TokenBucket>,
    agent: ureq::Agent,
    rng: Mutex<ChaCha8Rng>,
}

impl LiveProvider {
    pub fn new(keys: KeyPool, limiter: Arc<TokenBucket>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .http_status_as_error(false)
            .build()
            .into();
        LiveProvider {
            base_url: DEFAULT_API_BASE.to_string(),
            keys,
            limiter,
            agent,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(0)),
        }
    }

    pub fn with_base_url(mut self, url: impl Into<String>) -> Self {
        self.base_url = url.into().trim_end_matches('/').to_string();
        self
    }

    /// Seed for the query strings used by [`MetadataProvider::random_sample`].
    pub fn with_seed(self, seed: u64) -> Self {
        *self.rng.lock().expect("rng poisoned") = ChaCha8Rng::seed_from_u64(seed);
        self
    }

    fn get(&self, endpoint: &str, params: &[(&str, String)]) -> ProviderResult<Value> {
        self.limiter.acquire();
        let mut req = self
            .agent
            .get(format!("{}/{endpoint}", self.base_url))
            .query("key", self.keys.current());
        for (k, v) in params {
            req = req.query(*k, v);
        }
        let mut resp = req.call().map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let body: Value = resp.body_mut().read_json().unwrap_or(Value::Null);
        let reason = body
            .pointer("/error/errors/0/reason")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string();
        match status {
            200..=299 => Ok(body),
            429 => {
                self.keys.rotate();
                Err(ProviderError::Quota(format!("HTTP 429 {reason}")))
            }
            403 if reason.contains("uota") || reason.contains("imit") => {
                self.keys.rotate();
                Err(ProviderError::Quota(reason))
            }
            500..=599 => Err(ProviderError::Transport(format!("HTTP {status}"))),
            _ => Err(ProviderError::BadResponse(format!("HTTP {status} {reason}"))),
        }
    }

    /// Follow `nextPageToken` until `n` ids are collected.
    fn list_ids(&self, endpoint: &str, params: &[(&str, String)], n: usize) -> ProviderResult<Vec<String>> {
        let mut out: Vec<String> = Vec::new();
        let mut seen = BTreeSet::new();
        let mut page: Option<String> = None;
        while out.len() < n {
            let mut p = params.to_vec();
            p.push(("maxResults", (n - out.len()).min(PAGE_MAX).to_string()));
            if let Some(t) = &page {
                p.push(("pageToken", t.clone()));
            }
            let body = self.get(endpoint, &p)?;
            let items = body.get("items").and_then(Value::as_array).cloned().unwrap_or_default();
            for item in &items {
                let id = item.pointer("/id/videoId").or_else(|| item.get("id")).and_then(Value::as_str);
                if let Some(id) = id {
                    if seen.insert(id.to_string()) {
                        out.push(id.to_string());
                    }
                }
            }
            page = body.get("nextPageToken").and_then(Value::as_str).map(str::to_string);
            if page.is_none() || items.is_empty() {
                break;
            }
        }
        out.truncate(n);
        Ok(out)
    }
}

fn video_search(extra: &[(&'static str, String)]) -> Vec<(&'static str, String)> {
    let mut p = vec![("part", "id".to_string()), ("type", "video".to_string())];
    p.extend_from_slice(extra);
    p
}

impl MetadataProvider for LiveProvider {
    fn search(&self, keyword: &str, n: usize) -> ProviderResult<Vec<String>> {
        self.list_ids("search", &video_search(&[("q", keyword.to_string())]), n)
    }

    fn channel_uploads(&self, channel_id: &str) -> ProviderResult<Vec<String>> {
        let p = video_search(&[("channelId", channel_id.to_string()), ("order", "date".to_string())]);
        self.list_ids("search", &p, CHANNEL_LIMIT)
    }

    /// The API has no random endpoint; this searches for short random
    /// strings and pools the hits.
    fn random_sample(&self, n: usize) -> ProviderResult<Vec<String>> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let mut dry = 0;
        while out.len() < n && dry < 20 {
            let q: String = {
                let mut rng = self.rng.lock().expect("rng poisoned");
                (0..4).map(|_| rng.sample(rand::distributions::Alphanumeric) as char).collect()
            };
            let hits = self.search(&q, (n - out.len()).min(PAGE_MAX))?;
            let before = out.len();
            out.extend(hits.into_iter().filter(|id| seen.insert(id.clone())));
            if out.len() == before {
                dry += 1;
            }
        }
        Ok(out)
    }

    fn popular(&self, region: &str, n: usize) -> ProviderResult<Vec<String>> {
        let p = [
            ("part", "id".to_string()),
            ("chart", "mostPopular".to_string()),
            ("regionCode", region.to_string()),
        ];
        self.list_ids("videos", &p, n)
    }

    fn recommendations(&self, video_id: &str, n: usize) -> ProviderResult<Vec<String>> {
        self.list_ids("search", &video_search(&[("relatedToVideoId", video_id.to_string())]), n)
    }

    fn fetch(&self, video_id: &str) -> ProviderResult<VideoRecord> {
        let body = self.get(
            "videos",
            &[
                ("part", "snippet,statistics,contentDetails".to_string()),
                ("id", video_id.to_string()),
            ],
        )?;
        let now = Utc::now();
        match body.pointer("/items/0") {
            None => {
                let mut r = VideoRecord::new(video_id, "", now);
                r.availability = Availability::Removed;
                Ok(r)
            }
            Some(item) => parse_video(video_id, item, now),
        }
    }
}

fn count(item: &Value, field: &str) -> i64 {
    item.pointer(&format!("/statistics/{field}"))
        .and_then(|v| v.as_str().and_then(|s| s.parse().ok()).or_else(|| v.as_i64()))
        .unwrap_or(0)
}

pub(crate) fn parse_video(video_id: &str, item: &Value, fetched_at: DateTime<Utc>) -> ProviderResult<VideoRecord> {
    let s = |p: &str| item.pointer(p).and_then(Value::as_str).unwrap_or_default().to_string();
    let published = s("/snippet/publishedAt");
    let published_at = DateTime::parse_from_rfc3339(&published)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| ProviderError::BadResponse(format!("{video_id}: publishedAt `{published}`: {e}")))?;
    let mut r = VideoRecord::new(video_id, s("/snippet/title"), fetched_at);
    r.description = s("/snippet/description");
    r.tags = item
        .pointer("/snippet/tags")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_str).map(str::to_string).collect())
        .unwrap_or_default();
    r.thumbnail_ref = ["high", "medium", "default"]
        .iter()
        .find_map(|q| item.pointer(&format!("/snippet/thumbnails/{q}/url")).and_then(Value::as_str))
        .map(str::to_string);
    r.category = s("/snippet/categoryId");
    r.duration_s = parse_iso_duration(&s("/contentDetails/duration")).unwrap_or(0.0);
    r.views = count(item, "viewCount");
    r.likes = count(item, "likeCount");
    r.dislikes = count(item, "dislikeCount");
    r.comments = count(item, "commentCount");
    r.published_at = published_at;
    if s("/contentDetails/contentRating/ytRating") == "ytAgeRestricted" {
        r.availability = Availability::AgeRestricted;
    }
    Ok(r)
}

/// Seconds in an ISO 8601 duration such as `PT1H2M3S` or `P1DT2H`.
pub fn parse_iso_duration(s: &str) -> Option<f64> {
    let rest = s.strip_prefix('P')?;
    let mut total = 0.0;
    let mut num = String::new();
    let mut in_time = false;
    for c in rest.chars() {
        match c {
            'T' => in_time = true,
            '0'..='9' | '.' => num.push(c),
            _ => {
                let v: f64 = num.parse().ok()?;
                num.clear();
                total += v * match (c, in_time) {
                    ('W', false) => 604_800.0,
                    ('D', false) => 86_400.0,
                    ('H', true) => 3600.0,
                    ('M', true) => 60.0,
                    ('S', true) => 1.0,
                    _ => return None,
                };
            }
        }
    }
    num.is_empty().then_some(total)
}
