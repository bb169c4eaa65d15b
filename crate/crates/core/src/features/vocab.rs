use std::collections::HashMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::text::{tag_tokens, tokenize};
use crate::model::VideoRecord;

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
const PAD_TOKEN: &str = "<pad>";
const UNK_TOKEN: &str = "<unk>";

/// Longest title, in words, that the title branch sees.
pub const TITLE_LEN: usize = 21;
/// Longest tag sequence, in words, that the tags branch sees.
pub const TAGS_LEN: usize = 78;

/// Which text field of a record a vocabulary covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextField {
    Title,
    Tags,
}

impl TextField {
    pub fn tokens(self, r: &VideoRecord) -> Vec<String> {
        match self {
            TextField::Title => tokenize(&r.title),
            TextField::Tags => tag_tokens(&r.tags),
        }
    }

    pub fn max_len(self) -> usize {
        match self {
            TextField::Title => TITLE_LEN,
            TextField::Tags => TAGS_LEN,
        }
    }
}

/// Token to index map with `0 = PAD` and `1 = UNK`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { tokens, index }
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn index_of(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, index: u32) -> Option<&str> {
        self.tokens.get(index as usize).map(String::as_str)
    }

    /// Corpus tokens in index order, without the two specials.
    pub fn corpus_tokens(&self) -> &[String] {
        &self.tokens[2..]
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.tokens[2..].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let corpus = Vec::<String>::deserialize(d)?;
        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        tokens.extend(corpus);
        Ok(Vocabulary::from_tokens(tokens))
    }
}

/// One index per distinct token, ordered by descending frequency and then
/// lexicographically.
pub fn build_vocab<I, D>(documents: I) -> Vocabulary
where
    I: IntoIterator<Item = D>,
    D: IntoIterator<Item = String>,
{
    let mut counts: HashMap<String, usize> = HashMap::new();
    for doc in documents {
        for tok in doc {
            *counts.entry(tok).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|(ta, ca), (tb, cb)| cb.cmp(ca).then_with(|| ta.cmp(tb)));
    let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
    tokens.extend(ranked.into_iter().map(|(t, _)| t));
    Vocabulary::from_tokens(tokens)
}

/// Build the vocabulary of one field over a set of records.
pub fn build_field_vocab<'a>(records: impl IntoIterator<Item = &'a VideoRecord>, field: TextField) -> Vocabulary {
    build_vocab(records.into_iter().map(|r| field.tokens(r)))
}

/// Fixed-length index sequence, right-padded with [`PAD`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedText(pub Vec<u32>);

impl EncodedText {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Indices up to the first pad.
    pub fn content(&self) -> &[u32] {
        let end = self.0.iter().position(|&i| i == PAD).unwrap_or(self.0.len());
        &self.0[..end]
    }
}

/// Map tokens to indices (unknown tokens to [`UNK`]), keep the first
/// `max_len`, and right-pad with [`PAD`].
pub fn encode_tokens<S: AsRef<str>>(tokens: &[S], v: &Vocabulary, max_len: usize) -> EncodedText {
    let mut out: Vec<u32> = tokens
        .iter()
        .take(max_len)
        .map(|t| v.index_of(t.as_ref()))
        .collect();
    out.resize(max_len, PAD);
    EncodedText(out)
}

pub fn encode(text: &str, v: &Vocabulary, max_len: usize) -> EncodedText {
    encode_tokens(&tokenize(text), v, max_len)
}

pub fn decode(e: &EncodedText, v: &Vocabulary) -> Vec<String> {
    e.content()
        .iter()
        .map(|&i| v.token(i).unwrap_or(UNK_TOKEN).to_string())
        .collect()
}
