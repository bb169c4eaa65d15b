//! Descriptive reports over a labeled dataset: per-class stem proportions
//! and engagement distributions.

use std::collections::{BTreeMap, BTreeSet};

use super::text::{tokenize, tokenize_and_stem};
use super::porter;
use super::vocab::TextField;
use crate::model::{Dataset, Label, Strategy, VideoRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct TermRow {
    pub stem: String,
    /// Labeled videos whose field contains the stem.
    pub videos: usize,
    /// Share of those videos in each class, indexed by [`Label::index`].
    pub proportions: [f64; 4],
}

fn field_stems(r: &VideoRecord, field: TextField) -> BTreeSet<String> {
    match field {
        TextField::Title => tokenize_and_stem(&r.title).into_iter().collect(),
        TextField::Tags => r
            .tags
            .iter()
            .flat_map(|t| tokenize(t))
            .map(|t| porter::stem(&t))
            .collect(),
    }
}

fn labeled<'a>(d: &'a Dataset, subset: Option<Strategy>) -> impl Iterator<Item = (&'a VideoRecord, Label)> + 'a {
    d.videos().filter_map(move |r| {
        if let Some(s) = subset {
            if !r.origins.contains(&s) {
                return None;
            }
        }
        d.label_of(&r.video_id).map(|l| (r, l))
    })
}

/// The `top_k` stems by document frequency (ties broken lexicographically)
/// and, for each, the fraction of containing videos in each class.
pub fn term_report(d: &Dataset, field: TextField, top_k: usize, subset: Option<Strategy>) -> Vec<TermRow> {
    let mut counts: BTreeMap<String, [usize; 4]> = BTreeMap::new();
    for (r, label) in labeled(d, subset) {
        for stem in field_stems(r, field) {
            counts.entry(stem).or_default()[label.index()] += 1;
        }
    }
    let mut rows: Vec<TermRow> = counts
        .into_iter()
        .map(|(stem, c)| {
            let total: usize = c.iter().sum();
            let mut proportions = [0.0; 4];
            for (p, n) in proportions.iter_mut().zip(c) {
                *p = n as f64 / total as f64;
            }
            TermRow {
                stem,
                videos: total,
                proportions,
            }
        })
        .collect();
    rows.sort_by(|a, b| b.videos.cmp(&a.videos).then_with(|| a.stem.cmp(&b.stem)));
    rows.truncate(top_k);
    rows
}

pub fn term_report_tsv(rows: &[TermRow]) -> String {
    let mut out = String::from("stem\tvideos");
    for l in Label::ALL {
        out.push('\t');
        out.push_str(l.as_str());
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{}\t{}", r.stem, r.videos));
        for p in r.proportions {
            out.push_str(&format!("\t{p:.6}"));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EngagementMetric {
    Views,
    LikeFraction,
    CommentsPerView,
}

impl EngagementMetric {
    pub const ALL: [EngagementMetric; 3] = [
        EngagementMetric::Views,
        EngagementMetric::LikeFraction,
        EngagementMetric::CommentsPerView,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EngagementMetric::Views => "views",
            EngagementMetric::LikeFraction => "like_fraction",
            EngagementMetric::CommentsPerView => "comments_per_view",
        }
    }

    pub fn value(self, r: &VideoRecord) -> f64 {
        let views = r.views.max(0) as f64;
        match self {
            EngagementMetric::Views => views,
            EngagementMetric::LikeFraction => {
                let likes = r.likes.max(0) as f64;
                let total = likes + r.dislikes.max(0) as f64;
                if total == 0.0 {
                    0.0
                } else {
                    likes / total
                }
            }
            EngagementMetric::CommentsPerView => {
                if views == 0.0 {
                    0.0
                } else {
                    r.comments.max(0) as f64 / views
                }
            }
        }
    }
}

/// Empirical CDF as `(value, fraction ≤ value)` steps at each distinct value.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, v) in sorted.iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *v => last.1 = f,
            _ => out.push((*v, f)),
        }
    }
    out
}

/// Per metric and class, the CDF points of the labeled videos.
pub type EngagementReport = BTreeMap<(EngagementMetric, Label), Vec<(f64, f64)>>;

pub fn engagement_report(d: &Dataset, subset: Option<Strategy>) -> EngagementReport {
    let mut values: BTreeMap<(EngagementMetric, Label), Vec<f64>> = BTreeMap::new();
    for (r, label) in labeled(d, subset) {
        for m in EngagementMetric::ALL {
            values.entry((m, label)).or_default().push(m.value(r));
        }
    }
    values
        .into_iter()
        .map(|(k, v)| (k, empirical_cdf(&v)))
        .collect()
}

pub fn engagement_report_tsv(report: &EngagementReport) -> String {
    let mut out = String::from("metric\tclass\tvalue\tcdf\n");
    for ((m, l), points) in report {
        for (x, f) in points {
            out.push_str(&format!("{}\t{}\t{}\t{:.6}\n", m.as_str(), l, x, f));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GroundTruthEntry, Verdict};
    use chrono::{TimeZone, Utc};

    fn labeled_dataset(items: &[(&str, &str, Label, i64)]) -> Dataset {
        let t = Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap();
        let mut d = Dataset::new();
        let mut gt = Vec::new();
        for (id, title, label, views) in items {
            let mut r = VideoRecord::new(*id, *title, t);
            r.views = *views;
            d.upsert(r);
            gt.push(GroundTruthEntry {
                video_id: id.to_string(),
                rater_labels: vec![*label; 3],
                verdict: Verdict::Agreed(*label),
            });
        }
        d.set_ground_truth(gt);
        d
    }

    #[test]
    fn stem_proportions_by_direct_count() {
        use Label::*;
        let d = labeled_dataset(&[
            ("a", "peppa pig", Disturbing, 1),
            ("b", "pigs fly", Disturbing, 1),
            ("c", "Pig!", Disturbing, 1),
            ("d", "the pig song", Suitable, 1),
            ("e", "unrelated", Irrelevant, 1),
        ]);
        let rows = term_report(&d, TextField::Title, 15, None);
        let pig = rows.iter().find(|r| r.stem == "pig").unwrap();
        assert_eq!(pig.videos, 4);
        assert!((pig.proportions[Disturbing.index()] - 0.75).abs() < 1e-12);
        assert_eq!(rows[0].stem, "pig");
        for r in &rows {
            assert!((r.proportions.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_video_stems_are_all_its_class() {
        let d = labeled_dataset(&[("a", "Frozen Elsa songs", Label::Restricted, 3)]);
        let rows = term_report(&d, TextField::Title, 15, None);
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.proportions[Label::Restricted.index()] == 1.0));
    }

    #[test]
    fn top_k_limits_rows() {
        let d = labeled_dataset(&[("a", "a b c d e f", Label::Suitable, 0)]);
        assert_eq!(term_report(&d, TextField::Title, 2, None).len(), 2);
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(empirical_cdf(&[10.0, 20.0]), vec![(10.0, 0.5), (20.0, 1.0)]);
        assert_eq!(empirical_cdf(&[7.0, 7.0, 7.0]), vec![(7.0, 1.0)]);
        assert!(empirical_cdf(&[]).is_empty());
    }

    #[test]
    fn like_fraction_handles_zero_votes() {
        let t = Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap();
        let mut r = VideoRecord::new("a", "x", t);
        assert_eq!(EngagementMetric::LikeFraction.value(&r), 0.0);
        r.likes = 3;
        r.dislikes = 1;
        assert_eq!(EngagementMetric::LikeFraction.value(&r), 0.75);
        assert_eq!(EngagementMetric::CommentsPerView.value(&r), 0.0);
    }

    #[test]
    fn engagement_report_per_class() {
        let d = labeled_dataset(&[
            ("a", "x", Label::Suitable, 10),
            ("b", "y", Label::Suitable, 20),
            ("c", "z", Label::Disturbing, 5),
        ]);
        let rep = engagement_report(&d, None);
        assert_eq!(
            rep[&(EngagementMetric::Views, Label::Suitable)],
            vec![(10.0, 0.5), (20.0, 1.0)]
        );
        assert_eq!(rep[&(EngagementMetric::Views, Label::Disturbing)], vec![(5.0, 1.0)]);
        assert!(engagement_report_tsv(&rep).starts_with("metric\tclass"));
    }
}
