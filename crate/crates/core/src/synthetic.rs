//! Synthetic data with known structure: a labelled set whose classes differ
//! in a single style feature, a recommendation graph with a fixed per-hop
//! chance of reaching an inappropriate video, and a small crawlable world
//! for demos and end-to-end tests.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingestion::{FixtureProvider, Op};
use crate::model::{BinaryLabel, Dataset, GroundTruthEntry, Label, Strategy, Verdict, VideoRecord};
use crate::walker::LabelOracle;

const WORDS: &[&str] = &[
    "peppa", "pig", "elsa", "spiderman", "mickey", "mouse", "frozen", "song", "kids", "learn", "colors", "finger",
    "family", "nursery", "rhymes", "cartoon", "episode", "fun", "baby", "shark", "superhero", "animation", "toys",
    "surprise", "eggs", "car", "bus", "wheels", "dance", "party", "princess", "hulk", "joker", "minnie", "daddy",
];
const CATEGORIES: &[&str] = &["1", "10", "22", "24", "27"];

fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2018, 11, 18, 0, 0, 0).unwrap()
}

fn words(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> Vec<String> {
    let n = rng.gen_range(lo..=hi);
    (0..n).map(|_| WORDS.choose(rng).expect("non-empty").to_string()).collect()
}

/// A plausible record whose text and statistics are drawn identically for
/// every class.
pub fn random_record(id: impl Into<String>, rng: &mut ChaCha8Rng) -> VideoRecord {
    let t = epoch() - Duration::days(rng.gen_range(30..900));
    let mut r = VideoRecord::new(id, words(rng, 3, 9).join(" "), t);
    r.description = words(rng, 5, 30).join(" ");
    r.tags = words(rng, 2, 12);
    r.category = CATEGORIES.choose(rng).expect("non-empty").to_string();
    r.duration_s = rng.gen_range(30.0..1200.0);
    r.views = (10f64.powf(rng.gen_range(2.0..7.0))) as i64;
    r.likes = (r.views as f64 * rng.gen_range(0.001..0.05)) as i64;
    r.dislikes = (r.likes as f64 * rng.gen_range(0.01..0.3)) as i64;
    r.comments = (r.views as f64 * rng.gen_range(0.0..0.01)) as i64;
    r.fetched_at = epoch();
    r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedSpec {
    pub n: usize,
    /// Share of the inappropriate class.
    pub positive_fraction: f64,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            n: 400,
            positive_fraction: 0.25,
            seed: 0,
        }
    }
}

/// Binary labelled records in which only the number of `!` in the title
/// tells the classes apart: inappropriate titles end in three to six of
/// them, appropriate titles have none. Returns records and labels
/// (`1` = inappropriate). No record has a thumbnail.
pub fn planted_signal(spec: &PlantedSpec) -> (Vec<VideoRecord>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_pos = (spec.n as f64 * spec.positive_fraction).round() as usize;
    let mut labels: Vec<usize> = (0..spec.n).map(|i| usize::from(i < n_pos)).collect();
    labels.shuffle(&mut rng);
    let records = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let mut r = random_record(format!("p{i:04}"), &mut rng);
            if y == 1 {
                let bangs = rng.gen_range(3..=6);
                r.title.push(' ');
                r.title.push_str(&"!".repeat(bangs));
            }
            r
        })
        .collect();
    (records, labels)
}

/// The planted set as a dataset whose ground truth is unanimous:
/// appropriate videos are labelled suitable, inappropriate ones disturbing.
pub fn planted_dataset(spec: &PlantedSpec) -> Dataset {
    let (records, labels) = planted_signal(spec);
    let mut d = Dataset::new();
    let mut gt = Vec::new();
    for (r, y) in records.into_iter().zip(labels) {
        let l = if y == 1 { Label::Disturbing } else { Label::Suitable };
        gt.push(GroundTruthEntry {
            video_id: r.video_id.clone(),
            rater_labels: vec![l; 3],
            verdict: Verdict::Agreed(l),
        });
        d.upsert(r);
    }
    d.set_ground_truth(gt);
    d
}

/// Keyword whose search results start every calibration walk.
pub const CALIBRATION_KEYWORD: &str = "calibration";

/// A graph in which every video recommends nine appropriate videos and one
/// inappropriate video, so each hop lands on an inappropriate video with
/// probability 0.1. The search results for [`CALIBRATION_KEYWORD`] are ten
/// appropriate videos.
pub fn calibration_world(n_appropriate: usize, n_inappropriate: usize, seed: u64) -> (FixtureProvider, LabelOracle) {
    assert!(n_appropriate >= 10 && n_inappropriate >= 1, "graph too small");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let good: Vec<String> = (0..n_appropriate).map(|i| format!("a{i}")).collect();
    let bad: Vec<String> = (0..n_inappropriate).map(|i| format!("i{i}")).collect();
    let mut f = FixtureProvider::new();
    let mut labels = BTreeMap::new();
    for id in good.iter().chain(&bad) {
        f.add_video(VideoRecord::new(id, "", epoch()));
        let label = if id.starts_with('i') { BinaryLabel::Inappropriate } else { BinaryLabel::Appropriate };
        labels.insert(id.clone(), label);
        let mut recs: Vec<String> = good.choose_multiple(&mut rng, 9).cloned().collect();
        recs.push(bad.choose(&mut rng).expect("non-empty").clone());
        recs.shuffle(&mut rng);
        f.set_response(Op::Recommendations, id, recs);
    }
    f.set_response(Op::Search, CALIBRATION_KEYWORD, good.choose_multiple(&mut rng, 10).cloned());
    (f, LabelOracle(labels))
}

/// A small crawlable world: keyword searches, channel uploads, a random
/// sample, popular charts and a recommendation graph with up to ten
/// recommendations per video. Every fifth video carries violent or sexual
/// terms and is labelled inappropriate.
pub struct DemoWorld {
    pub provider: FixtureProvider,
    pub labels: LabelOracle,
    pub elsagate_keywords: Vec<String>,
    pub child_keywords: Vec<String>,
    pub channels: Vec<String>,
    pub regions: Vec<String>,
}

pub fn demo_world(n_videos: usize, seed: u64) -> DemoWorld {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = FixtureProvider::new();
    let mut labels = BTreeMap::new();
    let ids: Vec<String> = (0..n_videos).map(|i| format!("vid{i:05}")).collect();
    for (i, id) in ids.iter().enumerate() {
        let mut r = random_record(id.clone(), &mut rng);
        let bad = i % 5 == 0;
        if bad {
            r.title = format!("{} kill blood prank", r.title);
            r.tags.push("scary".into());
        }
        if i % 17 == 3 {
            r.availability = crate::model::Availability::Removed;
        }
        labels.insert(
            id.clone(),
            if bad { BinaryLabel::Inappropriate } else { BinaryLabel::Appropriate },
        );
        let n_recs = rng.gen_range(3..=10).min(n_videos - 1);
        let recs: Vec<String> = ids.iter().filter(|o| *o != id).cloned().collect::<Vec<_>>().choose_multiple(&mut rng, n_recs).cloned().collect();
        f.set_response(Op::Recommendations, id, recs);
        f.add_video(r);
    }
    let mut pick = |k: usize| -> Vec<String> { ids.choose_multiple(&mut rng, k.min(ids.len())).cloned().collect() };
    let elsagate_keywords = vec!["elsa spiderman".to_string(), "peppa pig dentist".to_string()];
    let child_keywords = vec!["nursery rhymes".to_string(), "finger family".to_string()];
    let channels = vec!["UCdemo1".to_string()];
    let regions = vec!["US".to_string(), "GB".to_string()];
    let mut responses = Vec::new();
    for k in elsagate_keywords.iter().chain(&child_keywords) {
        responses.push((Op::Search, k.clone(), pick(40)));
    }
    responses.push((Op::ChannelUploads, channels[0].clone(), pick(8)));
    responses.push((Op::RandomSample, String::new(), pick(20)));
    for r in &regions {
        responses.push((Op::Popular, r.clone(), pick(15)));
    }
    for (op, arg, ids) in responses {
        f.set_response(op, &arg, ids);
    }
    DemoWorld {
        provider: f,
        labels: LabelOracle(labels),
        elsagate_keywords,
        child_keywords,
        channels,
        regions,
    }
}

/// Ground truth for every record in `d` from binary labels: appropriate
/// becomes suitable and inappropriate becomes disturbing.
pub fn ground_truth_from_binary(d: &mut Dataset, labels: &BTreeMap<String, BinaryLabel>) {
    let gt: Vec<GroundTruthEntry> = d
        .video_ids()
        .filter_map(|id| labels.get(id).map(|b| (id, b)))
        .map(|(id, b)| {
            let l = match b {
                BinaryLabel::Appropriate => Label::Suitable,
                BinaryLabel::Inappropriate => Label::Disturbing,
            };
            GroundTruthEntry {
                video_id: id.to_string(),
                rater_labels: vec![l; 3],
                verdict: Verdict::Agreed(l),
            }
        })
        .collect();
    d.set_ground_truth(gt);
}

/// Tag every record with `s`.
pub fn tag_origin(d: &mut Dataset, s: Strategy) {
    let ids: Vec<String> = d.video_ids().map(str::to_string).collect();
    for id in ids {
        if let Some(r) = d.get_mut(&id) {
            r.origins.insert(s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{style_features, StyleLexicon};
    use crate::ingestion::MetadataProvider;

    #[test]
    fn planted_classes_differ_in_exclamations_only() {
        let (records, labels) = planted_signal(&PlantedSpec::default());
        assert_eq!(labels.iter().sum::<usize>(), 100);
        let lex = StyleLexicon::default();
        for (r, y) in records.iter().zip(&labels) {
            let bangs = style_features(r, &lex).title_exclamations;
            assert_eq!(bangs > 0.0, *y == 1);
        }
        assert_eq!(planted_signal(&PlantedSpec::default()).0, records);
    }

    #[test]
    fn calibration_graph_has_one_bad_recommendation_per_node() {
        let (f, oracle) = calibration_world(50, 5, 1);
        for id in oracle.0.keys() {
            let recs = f.recommendations(id, 10).unwrap();
            assert_eq!(recs.len(), 10);
            let bad = recs.iter().filter(|r| oracle.0[*r] == BinaryLabel::Inappropriate).count();
            assert_eq!(bad, 1);
        }
        let start = f.search(CALIBRATION_KEYWORD, 10).unwrap();
        assert!(start.iter().all(|s| oracle.0[s] == BinaryLabel::Appropriate));
    }

    #[test]
    fn demo_world_is_consistent() {
        let w = demo_world(120, 3);
        assert_eq!(w.provider.videos().count(), 120);
        for v in w.provider.videos() {
            assert!(w.provider.recommendations(&v.video_id, 10).unwrap().len() <= 10);
        }
    }
}
