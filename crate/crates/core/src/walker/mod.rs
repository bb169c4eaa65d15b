//! Keyword-seeded random walks over recommendations: keyword sanitization,
//! keyword clustering, the walks themselves and per-hop reports.

mod kmeans;
mod walk;

use serde::{Deserialize, Serialize};

use crate::features::{tokenize, Dictionary};

pub use kmeans::{apply_cluster_names, cluster_keywords, kmeans, sse, KeywordCluster, KmeansOptions};
pub use walk::{
    campaign_seed, groups_from_clusters, hop_report, hop_report_tsv, random_walk, read_traces, run_campaign,
    HopRow, LabelOracle, ModelClassifier, StopReason, VideoClassifier, WalkOptions, WalkTrace,
};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sanitized {
    /// Surviving keywords in input order.
    pub keywords: Vec<String>,
    /// Keywords every token of which was in the dictionary.
    pub dropped: Vec<String>,
    /// How many keywords lost at least one token.
    pub modified: usize,
}

/// Remove dictionary terms from each keyword. A keyword without hits is
/// returned unchanged; otherwise its remaining tokens are rejoined with
/// single spaces.
pub fn sanitize_keywords<S: AsRef<str>>(keywords: &[S], dict: &Dictionary) -> Sanitized {
    let mut out = Sanitized::default();
    for k in keywords {
        let k = k.as_ref();
        let tokens = tokenize(k);
        let kept: Vec<&str> = tokens.iter().map(String::as_str).filter(|t| !dict.matches(t)).collect();
        if kept.len() == tokens.len() {
            out.keywords.push(k.to_string());
        } else if kept.is_empty() {
            out.dropped.push(k.to_string());
        } else {
            out.modified += 1;
            out.keywords.push(kept.join(" "));
        }
    }
    if !out.dropped.is_empty() {
        log::info!("{} keywords dropped entirely by sanitization", out.dropped.len());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_dictionary_terms() {
        let dict = Dictionary::from_terms(["kiss"]);
        let s = sanitize_keywords(&["spiderman kiss elsa", "peppa pig", "kiss"], &dict);
        assert_eq!(s.keywords, vec!["spiderman elsa", "peppa pig"]);
        assert_eq!(s.dropped, vec!["kiss"]);
        assert_eq!(s.modified, 1);
    }

    #[test]
    fn untouched_keywords_keep_their_spelling() {
        let dict = Dictionary::from_terms(["blood"]);
        let s = sanitize_keywords(&["Peppa Pig  Episodes"], &dict);
        assert_eq!(s.keywords, vec!["Peppa Pig  Episodes"]);
    }
}
