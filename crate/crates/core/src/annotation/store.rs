use std::collections::{BTreeMap, BTreeSet};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{aggregate, fleiss_kappa, RatingMatrix};
use crate::error::{Error, Result};
use crate::io::read_jsonl;
use crate::model::{AnnotationRecord, GroundTruthEntry, Label, Verdict, VideoRecord};

/// Votes a video needs before it can be aggregated.
pub const VOTES_PER_VIDEO: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Register { annotator_id: String, at: DateTime<Utc> },
    Vote(AnnotationRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDefinition {
    pub label: Label,
    pub definition: String,
}

/// What an annotator sees for one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPayload {
    pub video_id: String,
    pub title: String,
    pub description: String,
    pub tags: Vec<String>,
    pub thumbnail_ref: Option<String>,
    pub playback_url: String,
    pub labels: Vec<LabelDefinition>,
}

impl TaskPayload {
    fn for_video(r: &VideoRecord) -> Self {
        TaskPayload {
            video_id: r.video_id.clone(),
            title: r.title.clone(),
            description: r.description.clone(),
            tags: r.tags.clone(),
            thumbnail_ref: r.thumbnail_ref.clone(),
            playback_url: format!("https://www.youtube.com/watch?v={}", r.video_id),
            labels: Label::ALL
                .iter()
                .map(|&label| LabelDefinition {
                    label,
                    definition: label.definition().to_string(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubmitOutcome {
    Created,
    /// The annotator had already voted on the video; the new vote replaces
    /// the old one and both stay in the event log.
    Replaced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub videos: usize,
    /// Videos with at least [`VOTES_PER_VIDEO`] votes.
    pub complete: usize,
    pub votes: usize,
    pub per_annotator: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Export {
    pub entries: Vec<GroundTruthEntry>,
    pub excluded: Vec<GroundTruthEntry>,
    /// Videos still short of the vote target.
    pub pending: usize,
}

/// Append-only log of registrations and votes, with the current state
/// folded from it. Optionally mirrored to a line-delimited file.
#[derive(Debug, Default)]
pub struct AnnotationStore {
    videos: BTreeMap<String, VideoRecord>,
    annotators: BTreeSet<String>,
    votes: BTreeMap<(String, String), AnnotationRecord>,
    events: Vec<Event>,
    log_path: Option<PathBuf>,
}

impl AnnotationStore {
    pub fn new(videos: impl IntoIterator<Item = VideoRecord>) -> Self {
        AnnotationStore {
            videos: videos.into_iter().map(|v| (v.video_id.clone(), v)).collect(),
            ..Default::default()
        }
    }

    /// A store whose events are appended to `path`; existing events there
    /// are replayed first.
    pub fn open(videos: impl IntoIterator<Item = VideoRecord>, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut s = Self::new(videos);
        if path.exists() {
            for e in read_jsonl::<Event>(path)? {
                s.apply(e)?;
            }
        }
        s.log_path = Some(path.to_path_buf());
        Ok(s)
    }

    /// Rebuild a store from events.
    pub fn replay(videos: impl IntoIterator<Item = VideoRecord>, events: impl IntoIterator<Item = Event>) -> Result<Self> {
        let mut s = Self::new(videos);
        for e in events {
            s.apply(e)?;
        }
        Ok(s)
    }

    fn apply(&mut self, e: Event) -> Result<SubmitOutcome> {
        let outcome = match &e {
            Event::Register { annotator_id, .. } => {
                self.annotators.insert(annotator_id.clone());
                SubmitOutcome::Created
            }
            Event::Vote(r) => {
                if !self.annotators.contains(&r.annotator_id) {
                    return Err(Error::UnknownAnnotator(r.annotator_id.clone()));
                }
                if !self.videos.contains_key(&r.video_id) {
                    return Err(Error::InvalidArgument(format!("unknown video `{}`", r.video_id)));
                }
                match self.votes.insert((r.video_id.clone(), r.annotator_id.clone()), r.clone()) {
                    Some(_) => SubmitOutcome::Replaced,
                    None => SubmitOutcome::Created,
                }
            }
        };
        self.events.push(e);
        Ok(outcome)
    }

    fn record(&mut self, e: Event) -> Result<SubmitOutcome> {
        let line = serde_json::to_string(&e).map_err(|err| Error::InvalidArgument(err.to_string()))?;
        let outcome = self.apply(e)?;
        if let Some(path) = &self.log_path {
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|err| Error::io(path, err))?;
            writeln!(f, "{line}").map_err(|err| Error::io(path, err))?;
            f.sync_data().map_err(|err| Error::io(path, err))?;
        }
        Ok(outcome)
    }

    pub fn register(&mut self, annotator_id: &str) -> Result<()> {
        let id = annotator_id.trim();
        if id.is_empty() {
            return Err(Error::InvalidArgument("annotator id must not be empty".into()));
        }
        if !self.annotators.contains(id) {
            self.record(Event::Register {
                annotator_id: id.to_string(),
                at: Utc::now(),
            })?;
        }
        Ok(())
    }

    pub fn is_registered(&self, annotator_id: &str) -> bool {
        self.annotators.contains(annotator_id)
    }

    pub fn submit(&mut self, record: AnnotationRecord) -> Result<SubmitOutcome> {
        self.record(Event::Vote(record))
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn vote_count(&self) -> usize {
        self.votes.len()
    }

    pub fn votes_for(&self, video_id: &str) -> Vec<&AnnotationRecord> {
        self.votes
            .range((video_id.to_string(), String::new())..)
            .take_while(|((v, _), _)| v == video_id)
            .map(|(_, r)| r)
            .collect()
    }

    fn counts(&self) -> BTreeMap<&str, usize> {
        let mut c: BTreeMap<&str, usize> = self.videos.keys().map(|k| (k.as_str(), 0)).collect();
        for (v, _) in self.votes.keys() {
            *c.entry(v.as_str()).or_default() += 1;
        }
        c
    }

    /// A video the annotator has not labelled yet. Videos nearest to the
    /// vote target come first, so partially labelled videos get finished;
    /// videos that already reached it come last.
    pub fn next_task(&self, annotator_id: &str) -> Result<Option<TaskPayload>> {
        if !self.annotators.contains(annotator_id) {
            return Err(Error::UnknownAnnotator(annotator_id.to_string()));
        }
        let best = self
            .counts()
            .into_iter()
            .filter(|(v, _)| !self.votes.contains_key(&(v.to_string(), annotator_id.to_string())))
            .min_by_key(|&(v, n)| {
                let remaining = VOTES_PER_VIDEO.checked_sub(n).filter(|&r| r > 0).unwrap_or(usize::MAX);
                (remaining, v)
            });
        Ok(best.map(|(v, _)| TaskPayload::for_video(&self.videos[v])))
    }

    pub fn progress(&self) -> Progress {
        let mut per_annotator: BTreeMap<String, usize> = self.annotators.iter().map(|a| (a.clone(), 0)).collect();
        for (_, a) in self.votes.keys() {
            *per_annotator.entry(a.clone()).or_default() += 1;
        }
        Progress {
            videos: self.videos.len(),
            complete: self.counts().values().filter(|&&n| n >= VOTES_PER_VIDEO).count(),
            votes: self.votes.len(),
            per_annotator,
        }
    }

    /// Aggregate every video with enough votes.
    pub fn export(&self) -> Export {
        let mut out = Export {
            entries: Vec::new(),
            excluded: Vec::new(),
            pending: 0,
        };
        for v in self.videos.keys() {
            let labels: Vec<Label> = self.votes_for(v).iter().map(|r| r.label).collect();
            match aggregate(&labels) {
                Err(_) => out.pending += 1,
                Ok(verdict) => {
                    let e = GroundTruthEntry {
                        video_id: v.clone(),
                        rater_labels: labels,
                        verdict,
                    };
                    if verdict == Verdict::Excluded {
                        out.excluded.push(e);
                    } else {
                        out.entries.push(e);
                    }
                }
            }
        }
        out
    }

    /// Rating matrix over videos with exactly `raters` votes, and how many
    /// labelled videos were skipped for having a different count.
    pub fn rating_matrix(&self, raters: usize) -> Result<(RatingMatrix, usize)> {
        let mut rows = Vec::new();
        let mut skipped = 0;
        for (v, n) in self.counts() {
            if n == 0 {
                continue;
            }
            if n != raters {
                skipped += 1;
                continue;
            }
            let mut row = vec![0; 4];
            for r in self.votes_for(v) {
                row[r.label.index()] += 1;
            }
            rows.push(row);
        }
        Ok((RatingMatrix::new(rows)?, skipped))
    }

    pub fn kappa(&self, raters: usize) -> Result<f64> {
        fleiss_kappa(&self.rating_matrix(raters)?.0)
    }
}
