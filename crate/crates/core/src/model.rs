//! Canonical data types shared by every stage of the pipeline: video metadata,
//! the four-class label taxonomy and its binary collapse, annotation records,
//! and the [`Dataset`] container.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Whether a video can still be watched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Availability {
    Live,
    Removed,
    AgeRestricted,
}

/// The seed strategy through which a video entered the dataset. Recommended
/// videos inherit the strategy of the seed they were reached from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    ElsagateRelated,
    OtherChildRelated,
    Random,
    Popular,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::ElsagateRelated,
        Strategy::OtherChildRelated,
        Strategy::Random,
        Strategy::Popular,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::ElsagateRelated => "elsagate_related",
            Strategy::OtherChildRelated => "other_child_related",
            Strategy::Random => "random",
            Strategy::Popular => "popular",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Metadata of one platform video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub thumbnail_ref: Option<String>,
    /// Platform category id, e.g. `"24"` for Entertainment.
    #[serde(default)]
    pub category: String,
    #[serde(default)]
    pub duration_s: f64,
    #[serde(default)]
    pub views: i64,
    #[serde(default)]
    pub likes: i64,
    #[serde(default)]
    pub dislikes: i64,
    #[serde(default)]
    pub comments: i64,
    pub published_at: DateTime<Utc>,
    pub availability: Availability,
    /// When this copy of the metadata was retrieved.
    pub fetched_at: DateTime<Utc>,
    #[serde(default)]
    pub origins: BTreeSet<Strategy>,
}

impl VideoRecord {
    /// A live record with empty text fields, zero statistics and both
    /// timestamps set to `at`. Handy for fixtures.
    pub fn new(video_id: impl Into<String>, title: impl Into<String>, at: DateTime<Utc>) -> Self {
        VideoRecord {
            video_id: video_id.into(),
            title: title.into(),
            description: String::new(),
            tags: Vec::new(),
            thumbnail_ref: None,
            category: String::new(),
            duration_s: 0.0,
            views: 0,
            likes: 0,
            dislikes: 0,
            comments: 0,
            published_at: at,
            availability: Availability::Live,
            fetched_at: at,
            origins: BTreeSet::new(),
        }
    }
}

/// The four-class safety taxonomy. The discriminant order is the order of the
/// classifier's output units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Suitable,
    Disturbing,
    Restricted,
    Irrelevant,
}

impl Label {
    pub const ALL: [Label; 4] = [
        Label::Suitable,
        Label::Disturbing,
        Label::Restricted,
        Label::Irrelevant,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Suitable => "suitable",
            Label::Disturbing => "disturbing",
            Label::Restricted => "restricted",
            Label::Irrelevant => "irrelevant",
        }
    }

    /// Annotator-facing definition of the label.
    pub fn definition(self) -> &'static str {
        match self {
            Label::Suitable => {
                "Content appropriate for toddlers (aged 1-5) and relevant to their typical \
                 interests: normal cartoons, children's songs, children playing, educational \
                 videos. Anything rated G whose target audience is toddlers."
            }
            Label::Disturbing => {
                "Targets toddlers but contains sexual hints, explicit or abusive language, \
                 nudity, child abuse, scream or horror effects, or scary scenes or characters. \
                 Any toddler-targeted video that would be rated PG, PG-13, R or NC-17."
            }
            Label::Restricted => {
                "Does not target toddlers and contains content inappropriate for anyone under \
                 17: explicit language, nudity, pornography, violence, gambling, drug or \
                 alcohol use, or upsetting situations. Rated R or NC-17."
            }
            Label::Irrelevant => {
                "Appropriate content that is not relevant to a toddler's interests, e.g. \
                 gaming or music videos for older children, adolescents or adults. G, PG or \
                 PG-13 videos that do not target toddlers."
            }
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "suitable" => Ok(Label::Suitable),
            "disturbing" => Ok(Label::Disturbing),
            "restricted" => Ok(Label::Restricted),
            "irrelevant" => Ok(Label::Irrelevant),
            other => Err(Error::InvalidArgument(format!("unknown label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryLabel {
    Appropriate,
    Inappropriate,
}

impl BinaryLabel {
    pub const ALL: [BinaryLabel; 2] = [BinaryLabel::Appropriate, BinaryLabel::Inappropriate];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<BinaryLabel> {
        BinaryLabel::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BinaryLabel::Appropriate => "appropriate",
            BinaryLabel::Inappropriate => "inappropriate",
        }
    }
}

impl fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BinaryLabel {
    type Err = Error;

    /// Accepts the two binary names as well as any four-class label, which is
    /// collapsed.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "appropriate" => Ok(BinaryLabel::Appropriate),
            "inappropriate" => Ok(BinaryLabel::Inappropriate),
            other => other.parse::<Label>().map(collapse_label),
        }
    }
}

/// Collapse the four-class taxonomy to the binary one.
pub fn collapse_label(label: Label) -> BinaryLabel {
    match label {
        Label::Suitable | Label::Irrelevant => BinaryLabel::Appropriate,
        Label::Disturbing | Label::Restricted => BinaryLabel::Inappropriate,
    }
}

/// One rater's judgment of one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub video_id: String,
    pub annotator_id: String,
    pub label: Label,
    pub submitted_at: DateTime<Utc>,
}

/// Outcome of majority aggregation: a label, or the `excluded` sentinel when
/// the raters could not agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Agreed(Label),
    Excluded,
}

impl Verdict {
    pub fn label(self) -> Option<Label> {
        match self {
            Verdict::Agreed(l) => Some(l),
            Verdict::Excluded => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Agreed(l) => l.as_str(),
            Verdict::Excluded => "excluded",
        }
    }
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Verdict {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "excluded" {
            return Ok(Verdict::Excluded);
        }
        s.parse::<Label>()
            .map(Verdict::Agreed)
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub video_id: String,
    pub rater_labels: Vec<Label>,
    #[serde(rename = "final")]
    pub verdict: Verdict,
}

/// A directed recommendation edge, tagged with the crawl hop that found it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub hop: u32,
}

/// A single violated [`VideoRecord`] invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyId,
    NegativeCount(&'static str),
    NegativeDuration,
    NonFiniteDuration,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyId => f.write_str("empty id"),
            Violation::NegativeCount(field) => write!(f, "negative count: {field}"),
            Violation::NegativeDuration => f.write_str("negative duration"),
            Violation::NonFiniteDuration => f.write_str("non-finite duration"),
        }
    }
}

/// Every invariant the record breaks; empty when the record is well formed.
pub fn validate_record(r: &VideoRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    if r.video_id.trim().is_empty() {
        out.push(Violation::EmptyId);
    }
    for (name, value) in [
        ("views", r.views),
        ("likes", r.likes),
        ("dislikes", r.dislikes),
        ("comments", r.comments),
    ] {
        if value < 0 {
            out.push(Violation::NegativeCount(name));
        }
    }
    if !r.duration_s.is_finite() {
        out.push(Violation::NonFiniteDuration);
    } else if r.duration_s < 0.0 {
        out.push(Violation::NegativeDuration);
    }
    out
}

/// Videos, optional ground truth, and the recommendation edges between them.
///
/// Edges are keyed by `(from, to)`; re-adding a pair keeps the smallest hop.
/// Endpoints that could not be fetched are tracked in a separate unfetched set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    videos: BTreeMap<String, VideoRecord>,
    ground_truth: Option<BTreeMap<String, GroundTruthEntry>>,
    edges: BTreeMap<(String, String), u32>,
    unfetched: BTreeSet<String>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.videos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.videos.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&VideoRecord> {
        self.videos.get(id)
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut VideoRecord> {
        self.videos.get_mut(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.videos.contains_key(id)
    }

    pub fn videos(&self) -> impl Iterator<Item = &VideoRecord> {
        self.videos.values()
    }

    pub fn video_ids(&self) -> impl Iterator<Item = &str> {
        self.videos.keys().map(String::as_str)
    }

    /// Insert or replace a record using the merge tie-break rules. Returns
    /// `true` when `record` was new.
    pub fn upsert(&mut self, record: VideoRecord) -> bool {
        self.unfetched.remove(&record.video_id);
        match self.videos.get_mut(&record.video_id) {
            Some(existing) => {
                let merged = merge_records(existing, &record);
                *existing = merged;
                false
            }
            None => {
                self.videos.insert(record.video_id.clone(), record);
                true
            }
        }
    }

    pub fn remove(&mut self, id: &str) -> Option<VideoRecord> {
        self.videos.remove(id)
    }

    pub fn mark_unfetched(&mut self, id: impl Into<String>) {
        let id = id.into();
        if !self.videos.contains_key(&id) {
            self.unfetched.insert(id);
        }
    }

    pub fn unfetched(&self) -> &BTreeSet<String> {
        &self.unfetched
    }

    pub fn is_unfetched(&self, id: &str) -> bool {
        self.unfetched.contains(id)
    }

    /// Add an edge; a duplicate `(from, to)` pair keeps the smaller hop.
    /// Returns `true` when the pair was new.
    pub fn add_edge(&mut self, from: impl Into<String>, to: impl Into<String>, hop: u32) -> bool {
        let key = (from.into(), to.into());
        match self.edges.get_mut(&key) {
            Some(h) => {
                *h = (*h).min(hop);
                false
            }
            None => {
                self.edges.insert(key, hop);
                true
            }
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().map(|((from, to), hop)| Edge {
            from: from.clone(),
            to: to.clone(),
            hop: *hop,
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn out_edges<'a>(&'a self, from: &'a str) -> impl Iterator<Item = (&'a str, u32)> + 'a {
        self.edges
            .range((from.to_string(), String::new())..)
            .take_while(move |((f, _), _)| f == from)
            .map(|((_, t), h)| (t.as_str(), *h))
    }

    pub fn ground_truth(&self) -> Option<&BTreeMap<String, GroundTruthEntry>> {
        self.ground_truth.as_ref()
    }

    pub fn set_ground_truth(&mut self, entries: impl IntoIterator<Item = GroundTruthEntry>) {
        self.ground_truth = Some(
            entries
                .into_iter()
                .map(|e| (e.video_id.clone(), e))
                .collect(),
        );
    }

    /// Agreed four-class label of a video, if it has one.
    pub fn label_of(&self, id: &str) -> Option<Label> {
        self.ground_truth
            .as_ref()
            .and_then(|gt| gt.get(id))
            .and_then(|e| e.verdict.label())
    }

    /// Dataset invariants that do not hold, as human-readable messages.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for (id, r) in &self.videos {
            if id != &r.video_id {
                problems.push(format!("record keyed `{id}` carries id `{}`", r.video_id));
            }
            for v in validate_record(r) {
                problems.push(format!("{id}: {v}"));
            }
        }
        for (from, to) in self.edges.keys() {
            for end in [from, to] {
                if !self.videos.contains_key(end) && !self.unfetched.contains(end) {
                    problems.push(format!("edge endpoint `{end}` is neither a node nor unfetched"));
                }
            }
        }
        problems
    }
}

/// Pick the record to keep when two copies of one video collide: the later
/// fetch wins; equal timestamps fall back to a total order on the serialized
/// form so the choice does not depend on argument order. Origins are unioned.
fn merge_records(a: &VideoRecord, b: &VideoRecord) -> VideoRecord {
    let order = a.fetched_at.cmp(&b.fetched_at).then_with(|| {
        let sa = serde_json::to_string(a).unwrap_or_default();
        let sb = serde_json::to_string(b).unwrap_or_default();
        sa.cmp(&sb)
    });
    let mut keep = match order {
        Ordering::Less => b.clone(),
        _ => a.clone(),
    };
    keep.origins = a.origins.union(&b.origins).copied().collect();
    keep
}

fn prefer_entry<'a>(a: &'a GroundTruthEntry, b: &'a GroundTruthEntry) -> &'a GroundTruthEntry {
    let order = a.rater_labels.len().cmp(&b.rater_labels.len()).then_with(|| {
        let sa = serde_json::to_string(a).unwrap_or_default();
        let sb = serde_json::to_string(b).unwrap_or_default();
        sa.cmp(&sb)
    });
    if order == Ordering::Less {
        b
    } else {
        a
    }
}

/// Union two datasets by video id. Colliding records keep the later fetch;
/// edges are unioned with the smaller hop kept for duplicate pairs.
pub fn merge_datasets(a: &Dataset, b: &Dataset) -> Dataset {
    let mut out = a.clone();
    for r in b.videos.values() {
        out.upsert(r.clone());
    }
    for ((from, to), hop) in &b.edges {
        out.add_edge(from.clone(), to.clone(), *hop);
    }
    for id in &b.unfetched {
        out.mark_unfetched(id.clone());
    }
    out.unfetched.retain(|id| !out.videos.contains_key(id));
    out.ground_truth = match (&a.ground_truth, &b.ground_truth) {
        (None, None) => None,
        (Some(g), None) | (None, Some(g)) => Some(g.clone()),
        (Some(ga), Some(gb)) => {
            let mut merged = ga.clone();
            for (id, eb) in gb {
                let keep = match ga.get(id) {
                    Some(ea) => prefer_entry(ea, eb).clone(),
                    None => eb.clone(),
                };
                merged.insert(id.clone(), keep);
            }
            Some(merged)
        }
    };
    out
}
