use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Environment variable naming a directory whose lexicon files replace the bundled ones.
pub const LEXICON_DIR_ENV: &str = "FUSELAB_LEXICON_DIR";

const WORDS: &str = include_str!("../../lexicons/words.tsv");
const EMOTICONS: &str = include_str!("../../lexicons/emoticons.tsv");
const TYPOS: &str = include_str!("../../lexicons/typos.tsv");
const POS: &str = include_str!("../../lexicons/pos.tsv");

/// Coarse part-of-speech tags used by the entity-tuple heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PosTag {
    Noun,
    Verb,
    Aux,
    Adj,
    Adv,
    Pron,
    Det,
    Prep,
    Conj,
    Intj,
    Num,
}

impl PosTag {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "NOUN" => PosTag::Noun,
            "VERB" => PosTag::Verb,
            "AUX" => PosTag::Aux,
            "ADJ" => PosTag::Adj,
            "ADV" => PosTag::Adv,
            "PRON" => PosTag::Pron,
            "DET" => PosTag::Det,
            "PREP" => PosTag::Prep,
            "CONJ" => PosTag::Conj,
            "INTJ" => PosTag::Intj,
            "NUM" => PosTag::Num,
            _ => return None,
        })
    }
}

/// Word frequencies, emoticon names, typo corrections and the tagger lexicon.
#[derive(Debug, Clone)]
pub struct Lexicons {
    freq: HashMap<String, u64>,
    total: f64,
    max_word_len: usize,
    /// Sorted longest first so greedy matching prefers `:-)` over `:-`.
    emoticons: Vec<(String, String)>,
    emoticon_names: HashSet<String>,
    typos: HashMap<String, String>,
    pos: HashMap<String, PosTag>,
}

fn rows(text: &str) -> impl Iterator<Item = (usize, Result<(&str, &str)>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            return None;
        }
        let row = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected two tab-separated fields, got {line:?}"),
        });
        Some((i + 1, row))
    })
}

impl Lexicons {
    pub fn from_strs(words: &str, emoticons: &str, typos: &str, pos: &str) -> Result<Self> {
        let mut freq = HashMap::new();
        for (line, row) in rows(words) {
            let (w, f) = row?;
            let f: u64 = f.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad frequency {f:?}"),
            })?;
            *freq.entry(w.trim().to_lowercase()).or_insert(0) += f;
        }
        let total = freq.values().map(|&f| f as f64).sum::<f64>().max(1.0);
        let max_word_len = freq.keys().map(|w| w.chars().count()).max().unwrap_or(1);

        let mut emo = Vec::new();
        for (_, row) in rows(emoticons) {
            let (e, name) = row?;
            emo.push((e.trim().to_string(), name.trim().to_lowercase()));
        }
        emo.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        let emoticon_names = emo.iter().map(|(_, n)| n.clone()).collect();

        let mut typo_map = HashMap::new();
        for (_, row) in rows(typos) {
            let (bad, good) = row?;
            typo_map.insert(bad.trim().to_lowercase(), good.trim().to_lowercase());
        }

        let mut pos_map = HashMap::new();
        for (line, row) in rows(pos) {
            let (w, tag) = row?;
            let tag = PosTag::parse(tag.trim()).ok_or_else(|| Error::Parse {
                line,
                message: format!("unknown tag {tag:?}"),
            })?;
            pos_map.insert(w.trim().to_lowercase(), tag);
        }

        Ok(Self {
            freq,
            total,
            max_word_len,
            emoticons: emo,
            emoticon_names,
            typos: typo_map,
            pos: pos_map,
        })
    }

    /// The lexicons compiled into the crate.
    pub fn bundled() -> &'static Lexicons {
        static BUNDLED: OnceLock<Lexicons> = OnceLock::new();
        BUNDLED.get_or_init(|| Lexicons::from_strs(WORDS, EMOTICONS, TYPOS, POS).expect("bundled lexicons parse"))
    }

    /// Reads `words.tsv`, `emoticons.tsv`, `typos.tsv` and `pos.tsv` from `dir`;
    /// any file that is missing falls back to the bundled copy.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str, fallback: &'static str| -> Result<String> {
            let path = dir.join(name);
            if path.exists() {
                std::fs::read_to_string(&path).map_err(|e| Error::io(path, e))
            } else {
                Ok(fallback.to_string())
            }
        };
        Self::from_strs(
            &read("words.tsv", WORDS)?,
            &read("emoticons.tsv", EMOTICONS)?,
            &read("typos.tsv", TYPOS)?,
            &read("pos.tsv", POS)?,
        )
    }

    /// Lexicons from `$FUSELAB_LEXICON_DIR` when set, else the bundled ones.
    pub fn from_env() -> Result<Lexicons> {
        match std::env::var_os(LEXICON_DIR_ENV) {
            Some(dir) => Self::from_dir(Path::new(&dir)),
            None => Ok(Self::bundled().clone()),
        }
    }

    pub fn frequency(&self, word: &str) -> Option<u64> {
        self.freq.get(word).copied()
    }

    /// In the frequency list, or the target of a typo correction.
    pub fn is_known(&self, word: &str) -> bool {
        self.freq.contains_key(word) || self.typos.values().any(|v| v == word)
    }

    pub fn total_frequency(&self) -> f64 {
        self.total
    }

    pub fn max_word_len(&self) -> usize {
        self.max_word_len
    }

    pub fn len(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }

    pub fn typo(&self, word: &str) -> Option<&str> {
        self.typos.get(word).map(String::as_str)
    }

    pub fn pos(&self, word: &str) -> Option<PosTag> {
        self.pos.get(word).copied()
    }

    pub fn is_emoticon_name(&self, name: &str) -> bool {
        self.emoticon_names.contains(name)
    }

    /// Longest emoticon that is a prefix of `s`, with its name.
    pub fn emoticon_prefix(&self, s: &str) -> Option<(&str, &str)> {
        self.emoticons
            .iter()
            .find(|(e, _)| s.starts_with(e.as_str()))
            .map(|(e, n)| (e.as_str(), n.as_str()))
    }
}
