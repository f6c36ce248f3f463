//! Keyword normalization.
//!
//! Retrieval is literal containment over normalized tokens, so every keyword
//! that enters the library or a subgoal passes through [`Normalizer`]:
//! lowercase, every non-alphanumeric character acts as a separator, and the
//! resulting tokens are deduplicated into an ordered set.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// A single normalized token: lowercase, alphanumeric, never empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Keyword(String);

impl Keyword {
    /// Accepts `token` only if it is already in normalized form.
    pub fn new(token: &str) -> Option<Self> {
        let normalized: Vec<String> = tokens(token).collect();
        match normalized.as_slice() {
            [one] if one == token => Some(Keyword(one.clone())),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Keyword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub type KeywordSet = BTreeSet<Keyword>;

/// Lowercased alphanumeric runs of `text`, in order of appearance.
pub fn tokens(text: &str) -> impl Iterator<Item = String> {
    let lower: String = text.chars().flat_map(char::to_lowercase).collect();
    lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect::<Vec<_>>()
        .into_iter()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Normalizer {
    stop_tokens: BTreeSet<String>,
}

impl Normalizer {
    pub fn with_stop_tokens<I, S>(stop: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Normalizer {
            stop_tokens: stop.into_iter().flat_map(|s| tokens(s.as_ref()).collect::<Vec<_>>()).collect(),
        }
    }

    pub fn normalize(&self, text: &str) -> KeywordSet {
        tokens(text)
            .filter(|t| !self.stop_tokens.contains(t))
            .map(Keyword)
            .collect()
    }

    pub fn normalize_all<I, S>(&self, texts: I) -> KeywordSet
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        texts.into_iter().flat_map(|t| self.normalize(t.as_ref())).collect()
    }
}

/// Normalizes free text with the default (empty) stop-token list.
pub fn normalize_keywords(text: &str) -> KeywordSet {
    Normalizer::default().normalize(text)
}

/// Union of the normalized tokens of several phrases.
pub fn normalize_phrases<S: AsRef<str>>(phrases: &[S]) -> KeywordSet {
    Normalizer::default().normalize_all(phrases)
}

/// Space-joined rendering, the inverse of normalization up to set order.
pub fn join(set: &KeywordSet) -> String {
    let mut out = String::new();
    for (i, k) in set.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(k.as_str());
    }
    out
}
