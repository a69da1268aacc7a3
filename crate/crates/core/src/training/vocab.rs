use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::textprep::{NormalizedText, TokenTag};

pub const OOV_TOKEN: &str = "<oov>";
/// Stands in for a publication with no text tokens.
pub const EMPTY_TOKEN: &str = "[empty]";
pub const OOV_ID: usize = 0;
pub const EMPTY_ID: usize = 1;

/// Token ↔ id map. Id 0 is out-of-vocabulary and id 1 the empty-text token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

/// Surface strings fed to the text encoder: every rendered token.
pub fn token_strings(text: &NormalizedText) -> Vec<String> {
    text.tokens()
        .iter()
        .filter(|t| t.tag != TokenTag::Elongated)
        .filter_map(|t| t.render())
        .collect()
}

impl Vocabulary {
    /// Tokens seen at least `min_count` times, most frequent first (ties alphabetical).
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a NormalizedText>, min_count: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for t in texts {
            for tok in token_strings(t) {
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_count.max(1) && t != OOV_TOKEN && t != EMPTY_TOKEN)
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut tokens = vec![OOV_TOKEN.to_string(), EMPTY_TOKEN.to_string()];
        tokens.extend(ranked.into_iter().map(|(t, _)| t));
        tokens.into()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(OOV_ID)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map_or(OOV_TOKEN, String::as_str)
    }

    /// Ids of the text's tokens, or `[EMPTY_ID]` for empty text.
    pub fn encode(&self, text: &NormalizedText) -> Vec<usize> {
        let ids: Vec<usize> = token_strings(text).iter().map(|t| self.id(t)).collect();
        if ids.is_empty() {
            vec![EMPTY_ID]
        } else {
            ids
        }
    }
}
