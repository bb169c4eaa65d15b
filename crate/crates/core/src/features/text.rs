//! Tokenization shared by vocabularies, style features and term reports.

use std::collections::BTreeSet;
use std::hash::Hash;

use super::porter;

/// Lowercase and split on runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// [`tokenize`] followed by Porter stemming of every token.
pub fn tokenize_and_stem(text: &str) -> Vec<String> {
    tokenize(text).iter().map(|t| porter::stem(t)).collect()
}

/// Tokens of every tag, in tag order.
pub fn tag_tokens(tags: &[String]) -> Vec<String> {
    tags.iter().flat_map(|t| tokenize(t)).collect()
}

pub fn token_set(text: &str) -> BTreeSet<String> {
    tokenize(text).into_iter().collect()
}

/// `|a ∩ b| / |a ∪ b|`, defined as 0 when both sets are empty.
pub fn jaccard<T: Ord + Eq + Hash>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}
