//! Hand-crafted statistics and style features of a video.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::porter;
use super::text::{jaccard, tag_tokens, tokenize};
use crate::error::Result;
use crate::io::{parse_lines, read_to_string};
use crate::model::VideoRecord;

const DEFAULT_BAD_WORDS: &str = include_str!("../../data/bad_words.txt");
const DEFAULT_CHILD_WORDS: &str = include_str!("../../data/child_words.txt");
const DEFAULT_EMOTICONS: &str = include_str!("../../data/emoticons.txt");

/// Published platform category ids. Anything else goes to a trailing
/// "unknown" bucket of the one-hot block.
pub const CATEGORY_IDS: [&str; 32] = [
    "1", "2", "10", "15", "17", "18", "19", "20", "21", "22", "23", "24", "25", "26", "27", "28",
    "29", "30", "31", "32", "33", "34", "35", "36", "37", "38", "39", "40", "41", "42", "43", "44",
];

pub const N_STATISTICS: usize = 4;
pub const N_CATEGORIES: usize = CATEGORY_IDS.len() + 1;
const N_STYLE_SCALARS: usize = 20;
/// Length of [`StatsStyleVector::to_vec`].
pub const STATS_STYLE_DIM: usize = N_STATISTICS + N_CATEGORIES + N_STYLE_SCALARS;

pub fn category_index(category: &str) -> usize {
    CATEGORY_IDS
        .iter()
        .position(|c| *c == category.trim())
        .unwrap_or(CATEGORY_IDS.len())
}

/// A set of lowercase terms. A token matches when it, or its Porter stem,
/// equals a term or a term's stem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    terms: BTreeSet<String>,
    #[serde(skip)]
    stems: BTreeSet<String>,
}

impl Dictionary {
    pub fn from_terms<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let terms: BTreeSet<String> = terms
            .into_iter()
            .map(|t| t.as_ref().trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        let stems = terms.iter().map(|t| porter::stem(t)).collect();
        Dictionary { terms, stems }
    }

    pub fn parse(text: &str) -> Self {
        Self::from_terms(parse_lines(text))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::parse(&read_to_string(path)?))
    }

    pub fn default_bad_words() -> Self {
        Self::parse(DEFAULT_BAD_WORDS)
    }

    pub fn default_child_words() -> Self {
        Self::parse(DEFAULT_CHILD_WORDS)
    }

    /// Rebuild the stem index after deserialization.
    pub fn reindexed(self) -> Self {
        Self::from_terms(self.terms)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn matches(&self, token: &str) -> bool {
        if self.terms.contains(token) {
            return true;
        }
        let stem = porter::stem(token);
        self.terms.contains(&stem) || self.stems.contains(&stem)
    }

    pub fn count_in<S: AsRef<str>>(&self, tokens: &[S]) -> usize {
        tokens.iter().filter(|t| self.matches(t.as_ref())).count()
    }
}

/// Emoticon detector: a fixed list of western emoticons plus Unicode emoji
/// code point ranges.
#[derive(Debug, Clone)]
pub struct EmoticonDetector {
    patterns: Vec<Vec<char>>,
}

impl Default for EmoticonDetector {
    fn default() -> Self {
        Self::from_patterns(parse_lines(DEFAULT_EMOTICONS))
    }
}

impl EmoticonDetector {
    pub fn from_patterns<I, S>(patterns: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut patterns: Vec<Vec<char>> = patterns
            .into_iter()
            .map(|p| p.as_ref().chars().collect::<Vec<_>>())
            .filter(|p| !p.is_empty())
            .collect();
        // Longest first so ":-)" is not read as "-" + ")".
        patterns.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        patterns.dedup();
        EmoticonDetector { patterns }
    }

    pub fn patterns(&self) -> impl Iterator<Item = String> + '_ {
        self.patterns.iter().map(|p| p.iter().collect())
    }

    pub fn count(&self, text: &str) -> usize {
        let chars: Vec<char> = text.chars().collect();
        let mut i = 0;
        let mut n = 0;
        while i < chars.len() {
            if is_emoji(chars[i]) {
                n += 1;
                i += 1;
                continue;
            }
            match self.patterns.iter().find(|p| chars[i..].starts_with(p)) {
                Some(p) => {
                    n += 1;
                    i += p.len();
                }
                None => i += 1,
            }
        }
        n
    }
}

fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F300..=0x1F5FF   // symbols and pictographs
        | 0x1F600..=0x1F64F // emoticons
        | 0x1F680..=0x1F6FF // transport and map
        | 0x1F900..=0x1F9FF // supplemental symbols and pictographs
        | 0x1FA70..=0x1FAFF
        | 0x2600..=0x26FF   // miscellaneous symbols
        | 0x2700..=0x27BF) // dingbats
}

/// The dictionaries and detectors style extraction needs.
#[derive(Debug, Clone)]
pub struct StyleLexicon {
    pub bad_words: Dictionary,
    pub child_words: Dictionary,
    pub emoticons: EmoticonDetector,
}

impl Default for StyleLexicon {
    fn default() -> Self {
        StyleLexicon {
            bad_words: Dictionary::default_bad_words(),
            child_words: Dictionary::default_child_words(),
            emoticons: EmoticonDetector::default(),
        }
    }
}

/// Serialized form of a [`StyleLexicon`]: the three term lists.
#[derive(Serialize, Deserialize)]
struct LexiconLists {
    bad_words: Vec<String>,
    child_words: Vec<String>,
    emoticons: Vec<String>,
}

impl Serialize for StyleLexicon {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LexiconLists {
            bad_words: self.bad_words.terms().map(String::from).collect(),
            child_words: self.child_words.terms().map(String::from).collect(),
            emoticons: self.emoticons.patterns().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StyleLexicon {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let l = LexiconLists::deserialize(d)?;
        Ok(StyleLexicon {
            bad_words: Dictionary::from_terms(l.bad_words),
            child_words: Dictionary::from_terms(l.child_words),
            emoticons: EmoticonDetector::from_patterns(l.emoticons),
        })
    }
}

/// Raw (unscaled) statistics and style features of one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsStyleVector {
    pub views: f64,
    pub likes: f64,
    pub dislikes: f64,
    pub comments: f64,
    /// Index into [`CATEGORY_IDS`], or `CATEGORY_IDS.len()` for unknown.
    pub category: usize,
    pub duration_s: f64,
    pub like_dislike_ratio: f64,
    pub title_len: f64,
    pub description_len: f64,
    pub description_title_ratio: f64,
    pub jaccard_title_description: f64,
    pub title_exclamations: f64,
    pub title_questions: f64,
    pub description_exclamations: f64,
    pub description_questions: f64,
    pub title_emoticons: f64,
    pub description_emoticons: f64,
    pub title_bad_words: f64,
    pub description_bad_words: f64,
    pub tags_bad_words: f64,
    pub title_child_words: f64,
    pub description_child_words: f64,
    pub tags_child_words: f64,
    pub tag_count: f64,
    pub jaccard_tags_title: f64,
}

impl StatsStyleVector {
    /// Flat layout: four statistics, the category one-hot block, then the
    /// twenty style scalars in declaration order.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(STATS_STYLE_DIM);
        v.extend([self.views, self.likes, self.dislikes, self.comments]);
        let mut one_hot = [0.0; N_CATEGORIES];
        one_hot[self.category.min(N_CATEGORIES - 1)] = 1.0;
        v.extend(one_hot);
        v.extend([
            self.duration_s,
            self.like_dislike_ratio,
            self.title_len,
            self.description_len,
            self.description_title_ratio,
            self.jaccard_title_description,
            self.title_exclamations,
            self.title_questions,
            self.description_exclamations,
            self.description_questions,
            self.title_emoticons,
            self.description_emoticons,
            self.title_bad_words,
            self.description_bad_words,
            self.tags_bad_words,
            self.title_child_words,
            self.description_child_words,
            self.tags_child_words,
            self.tag_count,
            self.jaccard_tags_title,
        ]);
        debug_assert_eq!(v.len(), STATS_STYLE_DIM);
        v
    }

    /// Column names matching [`Self::to_vec`].
    pub fn names() -> Vec<String> {
        let mut names: Vec<String> = ["views", "likes", "dislikes", "comments"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        names.extend(CATEGORY_IDS.iter().map(|c| format!("category_{c}")));
        names.push("category_unknown".into());
        names.extend(
            [
                "duration_s",
                "like_dislike_ratio",
                "title_len",
                "description_len",
                "description_title_ratio",
                "jaccard_title_description",
                "title_exclamations",
                "title_questions",
                "description_exclamations",
                "description_questions",
                "title_emoticons",
                "description_emoticons",
                "title_bad_words",
                "description_bad_words",
                "tags_bad_words",
                "title_child_words",
                "description_child_words",
                "tags_child_words",
                "tag_count",
                "jaccard_tags_title",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
        names
    }
}

/// Index of a named column in [`StatsStyleVector::to_vec`].
pub fn column_index(name: &str) -> Option<usize> {
    StatsStyleVector::names().iter().position(|n| n == name)
}

fn count_char(text: &str, c: char) -> f64 {
    text.chars().filter(|&x| x == c).count() as f64
}

fn smoothed_ratio(num: f64, den: f64) -> f64 {
    num / (den + 1.0)
}

pub fn style_features(r: &VideoRecord, lex: &StyleLexicon) -> StatsStyleVector {
    let title_tokens = tokenize(&r.title);
    let desc_tokens = tokenize(&r.description);
    let tags = tag_tokens(&r.tags);
    let title_set: BTreeSet<String> = title_tokens.iter().cloned().collect();
    let desc_set: BTreeSet<String> = desc_tokens.iter().cloned().collect();
    let tag_set: BTreeSet<String> = tags.iter().cloned().collect();

    let count = |x: i64| x.max(0) as f64;
    let title_len = r.title.chars().count() as f64;
    let description_len = r.description.chars().count() as f64;
    let duration = if r.duration_s.is_finite() { r.duration_s.max(0.0) } else { 0.0 };

    StatsStyleVector {
        views: count(r.views),
        likes: count(r.likes),
        dislikes: count(r.dislikes),
        comments: count(r.comments),
        category: category_index(&r.category),
        duration_s: duration,
        like_dislike_ratio: smoothed_ratio(count(r.likes), count(r.dislikes)),
        title_len,
        description_len,
        description_title_ratio: smoothed_ratio(description_len, title_len),
        jaccard_title_description: jaccard(&title_set, &desc_set),
        title_exclamations: count_char(&r.title, '!'),
        title_questions: count_char(&r.title, '?'),
        description_exclamations: count_char(&r.description, '!'),
        description_questions: count_char(&r.description, '?'),
        title_emoticons: lex.emoticons.count(&r.title) as f64,
        description_emoticons: lex.emoticons.count(&r.description) as f64,
        title_bad_words: lex.bad_words.count_in(&title_tokens) as f64,
        description_bad_words: lex.bad_words.count_in(&desc_tokens) as f64,
        tags_bad_words: lex.bad_words.count_in(&tags) as f64,
        title_child_words: lex.child_words.count_in(&title_tokens) as f64,
        description_child_words: lex.child_words.count_in(&desc_tokens) as f64,
        tags_child_words: lex.child_words.count_in(&tags) as f64,
        tag_count: r.tags.len() as f64,
        jaccard_tags_title: jaccard(&tag_set, &title_set),
    }
}

/// Column-wise standardization of the flat statistics and style vector, with
/// the four raw statistics passed through `ln(1 + x)` first. Fitted on a
/// training split only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

fn log_statistics(v: &mut [f64]) {
    for x in v.iter_mut().take(N_STATISTICS) {
        *x = x.max(0.0).ln_1p();
    }
}

impl StatsScaler {
    pub fn identity(dim: usize) -> Self {
        StatsScaler {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(STATS_STYLE_DIM, Vec::len);
        if rows.is_empty() {
            return Self::identity(dim);
        }
        let logged: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let mut r = r.clone();
                log_statistics(&mut r);
                r
            })
            .collect();
        let n = logged.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in &logged {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x / n;
            }
        }
        let mut var = vec![0.0; dim];
        for r in &logged {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m) / n;
            }
        }
        let std = var
            .into_iter()
            .map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 })
            .collect();
        StatsScaler { mean, std }
    }

    pub fn transform(&self, raw: &[f64]) -> Vec<f64> {
        let mut v = raw.to_vec();
        log_statistics(&mut v);
        for ((x, m), s) in v.iter_mut().zip(&self.mean).zip(&self.std) {
            *x = (*x - m) / s;
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn record(title: &str, description: &str) -> VideoRecord {
        let t = Utc.with_ymd_and_hms(2019, 5, 10, 0, 0, 0).unwrap();
        let mut r = VideoRecord::new("v", title, t);
        r.description = description.into();
        r
    }

    fn lexicon(bad: &[&str]) -> StyleLexicon {
        StyleLexicon {
            bad_words: Dictionary::from_terms(bad),
            child_words: Dictionary::from_terms(["elsa"]),
            emoticons: EmoticonDetector::default(),
        }
    }

    #[test]
    fn punctuation_is_counted_per_symbol() {
        let f = style_features(&record("ELSA & Spiderman kiss! Funny?!", ""), &lexicon(&[]));
        assert_eq!(f.title_exclamations, 2.0);
        assert_eq!(f.title_questions, 1.0);
        assert_eq!(f.description_exclamations, 0.0);
    }

    #[test]
    fn dictionary_counts() {
        let f = style_features(&record("ELSA & Spiderman kiss! Funny?!", ""), &lexicon(&["kiss"]));
        assert_eq!(f.title_bad_words, 1.0);
        assert_eq!(f.title_child_words, 1.0);
        let d = Dictionary::from_terms(["kiss"]);
        assert!(d.matches("kisses"));
        assert!(!d.matches("kit"));
    }

    #[test]
    fn ratios_are_smoothed() {
        let f = style_features(&record("", "abc"), &lexicon(&[]));
        assert_eq!(f.title_len, 0.0);
        assert_eq!(f.description_len, 3.0);
        assert_eq!(f.description_title_ratio, 3.0);
        let mut r = record("a", "");
        r.likes = 10;
        r.dislikes = 0;
        assert_eq!(style_features(&r, &lexicon(&[])).like_dislike_ratio, 10.0);
    }

    #[test]
    fn emoticons_and_emoji() {
        let e = EmoticonDetector::default();
        assert_eq!(e.count("so fun :-) :) <3"), 3);
        assert_eq!(e.count("party \u{1F389}\u{1F600}"), 2);
        assert_eq!(e.count("plain text"), 0);
    }

    #[test]
    fn vector_layout() {
        let mut r = record("peppa pig", "peppa pig song");
        r.category = "24".into();
        r.tags = vec!["peppa".into(), "cartoon".into()];
        let f = style_features(&r, &StyleLexicon::default());
        let v = f.to_vec();
        assert_eq!(v.len(), STATS_STYLE_DIM);
        assert_eq!(StatsStyleVector::names().len(), STATS_STYLE_DIM);
        assert_eq!(v[N_STATISTICS + category_index("24")], 1.0);
        assert_eq!(v.iter().skip(N_STATISTICS).take(N_CATEGORIES).sum::<f64>(), 1.0);
        assert_eq!(v[column_index("tag_count").unwrap()], 2.0);
        assert!((f.jaccard_title_description - 2.0 / 3.0).abs() < 1e-12);
        assert!((f.jaccard_tags_title - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(category_index("999"), CATEGORY_IDS.len());
    }

    #[test]
    fn negative_counts_are_clamped() {
        let mut r = record("x", "");
        r.views = -5;
        let f = style_features(&r, &StyleLexicon::default());
        assert_eq!(f.views, 0.0);
        assert!(f.to_vec().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn extraction_is_pure() {
        let r = record("Elsa!! :) kill", "kids song ?");
        let lex = StyleLexicon::default();
        assert_eq!(style_features(&r, &lex), style_features(&r, &lex));
    }

    #[test]
    fn scaler_standardizes_training_columns() {
        let rows = vec![vec![0.0, 10.0], vec![(1f64).exp_m1(), 20.0]];
        let s = StatsScaler::fit(&rows);
        let a = s.transform(&rows[0]);
        let b = s.transform(&rows[1]);
        assert!((a[0] + 1.0).abs() < 1e-12 && (b[0] - 1.0).abs() < 1e-12);
        assert!((a[1] + 1.0).abs() < 1e-12 && (b[1] - 1.0).abs() < 1e-12);
        let constant = StatsScaler::fit(&[vec![3.0; 6], vec![3.0; 6]]);
        assert!(constant.transform(&[3.0; 6]).iter().all(|x| x.abs() < 1e-12));
    }
}
