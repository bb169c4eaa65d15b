//! Offline replay of canned provider responses.
//!
//! A fixture directory holds `videos.jsonl` (the records `fetch` returns)
//! and `responses.jsonl`, one object per listing request:
//!
//! ```text
//! {"op":"search","arg":"peppa pig","ids":["a","b"]}
//! {"op":"recommendations","arg":"a","ids":["c"]}
//! {"op":"search","arg":"broken","error":"transport: connection reset"}
//! ```
//!
//! `random_sample` uses the empty string as its argument. Listing requests
//! without a recorded response return an empty list; fetching an unknown id
//! fails with [`ProviderError::NotRecorded`].

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{MetadataProvider, ProviderError, ProviderResult};
use crate::error::Result;
use crate::io::{read_jsonl, write_jsonl};
use crate::model::VideoRecord;

pub const FIXTURE_VIDEOS: &str = "videos.jsonl";
pub const FIXTURE_RESPONSES: &str = "responses.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Search,
    ChannelUploads,
    RandomSample,
    Popular,
    Recommendations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ResponseLine {
    op: Op,
    arg: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Default)]
pub struct FixtureProvider {
    videos: BTreeMap<String, VideoRecord>,
    responses: BTreeMap<(Op, String), std::result::Result<Vec<String>, String>>,
    fetches: Mutex<BTreeMap<String, usize>>,
}

impl Clone for FixtureProvider {
    fn clone(&self) -> Self {
        FixtureProvider {
            videos: self.videos.clone(),
            responses: self.responses.clone(),
            fetches: Mutex::new(BTreeMap::new()),
        }
    }
}

fn parse_error(msg: &str) -> ProviderError {
    match msg.split_once(':') {
        Some(("quota", m)) => ProviderError::Quota(m.trim().into()),
        Some(("transport", m)) => ProviderError::Transport(m.trim().into()),
        _ => ProviderError::BadResponse(msg.into()),
    }
}

impl FixtureProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_video(&mut self, r: VideoRecord) -> &mut Self {
        self.videos.insert(r.video_id.clone(), r);
        self
    }

    pub fn set_response<S: Into<String>>(&mut self, op: Op, arg: &str, ids: impl IntoIterator<Item = S>) -> &mut Self {
        self.responses
            .insert((op, arg.to_string()), Ok(ids.into_iter().map(Into::into).collect()));
        self
    }

    /// Make a request fail. Messages starting with `quota:` or `transport:`
    /// produce retryable errors.
    pub fn set_error(&mut self, op: Op, arg: &str, message: &str) -> &mut Self {
        self.responses.insert((op, arg.to_string()), Err(message.to_string()));
        self
    }

    pub fn videos(&self) -> impl Iterator<Item = &VideoRecord> {
        self.videos.values()
    }

    /// How many times each id has been fetched.
    pub fn fetch_counts(&self) -> BTreeMap<String, usize> {
        self.fetches.lock().expect("fetch log poisoned").clone()
    }

    pub fn total_fetches(&self) -> usize {
        self.fetch_counts().values().sum()
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut f = FixtureProvider::new();
        let videos = dir.join(FIXTURE_VIDEOS);
        if videos.exists() {
            for r in read_jsonl::<VideoRecord>(&videos)? {
                f.add_video(r);
            }
        }
        let responses = dir.join(FIXTURE_RESPONSES);
        if responses.exists() {
            for line in read_jsonl::<ResponseLine>(&responses)? {
                match line.error {
                    Some(e) => f.set_error(line.op, &line.arg, &e),
                    None => f.set_response(line.op, &line.arg, line.ids),
                };
            }
        }
        Ok(f)
    }

    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        write_jsonl(dir.join(FIXTURE_VIDEOS), self.videos.values())?;
        let lines = self.responses.iter().map(|((op, arg), r)| ResponseLine {
            op: *op,
            arg: arg.clone(),
            ids: r.clone().unwrap_or_default(),
            error: r.clone().err(),
        });
        write_jsonl(dir.join(FIXTURE_RESPONSES), lines)
    }

    fn list(&self, op: Op, arg: &str, n: Option<usize>) -> ProviderResult<Vec<String>> {
        match self.responses.get(&(op, arg.to_string())) {
            None => Ok(Vec::new()),
            Some(Err(e)) => Err(parse_error(e)),
            Some(Ok(ids)) => Ok(ids.iter().take(n.unwrap_or(usize::MAX)).cloned().collect()),
        }
    }
}

impl MetadataProvider for FixtureProvider {
    fn search(&self, keyword: &str, n: usize) -> ProviderResult<Vec<String>> {
        self.list(Op::Search, keyword, Some(n))
    }
    fn channel_uploads(&self, channel_id: &str) -> ProviderResult<Vec<String>> {
        self.list(Op::ChannelUploads, channel_id, None)
    }
    fn random_sample(&self, n: usize) -> ProviderResult<Vec<String>> {
        self.list(Op::RandomSample, "", Some(n))
    }
    fn popular(&self, region: &str, n: usize) -> ProviderResult<Vec<String>> {
        self.list(Op::Popular, region, Some(n))
    }
    fn recommendations(&self, video_id: &str, n: usize) -> ProviderResult<Vec<String>> {
        self.list(Op::Recommendations, video_id, Some(n))
    }
    fn fetch(&self, video_id: &str) -> ProviderResult<VideoRecord> {
        *self
            .fetches
            .lock()
            .expect("fetch log poisoned")
            .entry(video_id.to_string())
            .or_default() += 1;
        self.videos
            .get(video_id)
            .cloned()
            .ok_or_else(|| ProviderError::NotRecorded(format!("fetch {video_id}")))
    }
}

/// Passes requests through to `inner` and records every successful response,
/// so a live crawl can be replayed offline later.
pub struct Recorder<P> {
    inner: P,
    log: Mutex<FixtureProvider>,
}

impl<P: MetadataProvider> Recorder<P> {
    pub fn new(inner: P) -> Self {
        Recorder {
            inner,
            log: Mutex::new(FixtureProvider::new()),
        }
    }

    pub fn into_fixture(self) -> FixtureProvider {
        self.log.into_inner().expect("recorder poisoned")
    }

    fn record(&self, op: Op, arg: &str, r: ProviderResult<Vec<String>>) -> ProviderResult<Vec<String>> {
        if let Ok(ids) = &r {
            self.log.lock().expect("recorder poisoned").set_response(op, arg, ids.clone());
        }
        r
    }
}

impl<P: MetadataProvider> MetadataProvider for Recorder<P> {
    fn search(&self, keyword: &str, n: usize) -> ProviderResult<Vec<String>> {
        self.record(Op::Search, keyword, self.inner.search(keyword, n))
    }
    fn channel_uploads(&self, channel_id: &str) -> ProviderResult<Vec<String>> {
        self.record(Op::ChannelUploads, channel_id, self.inner.channel_uploads(channel_id))
    }
    fn random_sample(&self, n: usize) -> ProviderResult<Vec<String>> {
        self.record(Op::RandomSample, "", self.inner.random_sample(n))
    }
    fn popular(&self, region: &str, n: usize) -> ProviderResult<Vec<String>> {
        self.record(Op::Popular, region, self.inner.popular(region, n))
    }
    fn recommendations(&self, video_id: &str, n: usize) -> ProviderResult<Vec<String>> {
        self.record(Op::Recommendations, video_id, self.inner.recommendations(video_id, n))
    }
    fn fetch(&self, video_id: &str) -> ProviderResult<VideoRecord> {
        let r = self.inner.fetch(video_id)?;
        self.log.lock().expect("recorder poisoned").add_video(r.clone());
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn sample() -> FixtureProvider {
        let t = Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap();
        let mut f = FixtureProvider::new();
        f.add_video(VideoRecord::new("a", "peppa pig", t))
            .add_video(VideoRecord::new("b", "elsa", t))
            .set_response(Op::Search, "peppa", ["a", "b"])
            .set_response(Op::Recommendations, "a", ["b"])
            .set_error(Op::Search, "down", "transport: reset");
        f
    }

    #[test]
    fn replays_and_truncates() {
        let f = sample();
        assert_eq!(f.search("peppa", 1).unwrap(), vec!["a"]);
        assert!(f.search("nothing", 5).unwrap().is_empty());
        assert!(f.search("down", 5).unwrap_err().is_retryable());
        assert!(matches!(f.fetch("zzz"), Err(ProviderError::NotRecorded(_))));
        f.fetch("a").unwrap();
        f.fetch("a").unwrap();
        assert_eq!(f.fetch_counts()["a"], 2);
    }

    #[test]
    fn directory_roundtrip() {
        let f = sample();
        let dir = tempfile::tempdir().unwrap();
        f.save_dir(dir.path()).unwrap();
        let g = FixtureProvider::load_dir(dir.path()).unwrap();
        assert_eq!(g.responses, f.responses);
        assert_eq!(g.videos, f.videos);
    }

    #[test]
    fn recorder_captures_a_replayable_fixture() {
        let rec = Recorder::new(sample());
        rec.search("peppa", 30).unwrap();
        rec.fetch("a").unwrap();
        rec.recommendations("a", 10).unwrap();
        let f = rec.into_fixture();
        assert_eq!(f.search("peppa", 30).unwrap(), vec!["a", "b"]);
        assert_eq!(f.recommendations("a", 10).unwrap(), vec!["b"]);
        assert_eq!(f.fetch("a").unwrap().title, "peppa pig");
    }
}
