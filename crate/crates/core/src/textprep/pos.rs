use super::{Lexicons, NormalizedText, PosTag, TokenTag};

/// `(subject, object, verb, modifier)` summary of a normalized sentence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityTuple {
    pub subject: Option<String>,
    pub object: Option<String>,
    pub verb: Option<String>,
    pub modifier: Option<String>,
}

impl EntityTuple {
    /// Slots in `(subject, object, verb, modifier)` order.
    pub fn slots(&self) -> [Option<&str>; 4] {
        [
            self.subject.as_deref(),
            self.object.as_deref(),
            self.verb.as_deref(),
            self.modifier.as_deref(),
        ]
    }

    pub fn is_empty(&self) -> bool {
        self.slots().iter().all(Option::is_none)
    }
}

const ADJ_SUFFIXES: [&str; 7] = ["ous", "ful", "ive", "able", "ible", "less", "ish"];

fn verb_bases(w: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut push = |s: &str| out.push(s.to_string());
    if let Some(stem) = w.strip_suffix("ies").or_else(|| w.strip_suffix("ied")) {
        push(&format!("{stem}y"));
    }
    for suffix in ["ing", "ed", "es", "s", "d"] {
        if let Some(stem) = w.strip_suffix(suffix) {
            if stem.len() < 2 {
                continue;
            }
            push(stem);
            if suffix == "ing" {
                push(&format!("{stem}e"));
            }
            // stopped -> stop, running -> run
            let b = stem.as_bytes();
            if (suffix == "ing" || suffix == "ed") && b.len() >= 3 && b[b.len() - 1] == b[b.len() - 2] {
                push(&stem[..stem.len() - 1]);
            }
        }
    }
    out
}

/// Lexicon tag, else suffix heuristics, else noun.
pub fn tag_word(word: &str, previous: Option<PosTag>, lex: &Lexicons) -> PosTag {
    if let Some(t) = lex.pos(word) {
        return t;
    }
    if word.chars().all(|c| c.is_numeric() || c == '.' || c == ',') && word.chars().any(char::is_numeric) {
        return PosTag::Num;
    }
    let len = word.chars().count();
    if len > 3 && word.ends_with("ly") {
        return PosTag::Adv;
    }
    if verb_bases(word).iter().any(|b| lex.pos(b) == Some(PosTag::Verb)) {
        return PosTag::Verb;
    }
    if len > 3 && word.ends_with("ed") {
        return PosTag::Verb;
    }
    if len > 2 && word.ends_with('s') && previous == Some(PosTag::Pron) {
        return PosTag::Verb;
    }
    if ADJ_SUFFIXES.iter().any(|s| word.ends_with(s) && len > s.len() + 2) {
        return PosTag::Adj;
    }
    PosTag::Noun
}

/// Tags the word tokens of `text`. Mention contents are tagged as nouns.
pub fn pos_tag(text: &NormalizedText, lex: &Lexicons) -> Vec<(String, PosTag)> {
    let mut out: Vec<(String, PosTag)> = Vec::new();
    let mut in_user = false;
    for tok in text.tokens() {
        match tok.tag {
            TokenTag::UserOpen => in_user = true,
            TokenTag::UserClose => in_user = false,
            TokenTag::Word => {
                let tag = if in_user {
                    PosTag::Noun
                } else {
                    tag_word(&tok.text, out.last().map(|(_, t)| *t), lex)
                };
                out.push((tok.text.clone(), tag));
            }
            _ => {}
        }
    }
    out
}

/// Subject is the first noun before the first verb, object the first noun
/// after it, and modifier the first adverb or adjective after it.
pub fn extract_entity_tuple(text: &NormalizedText, lex: &Lexicons) -> EntityTuple {
    let tagged = pos_tag(text, lex);
    let Some(v) = tagged.iter().position(|(_, t)| *t == PosTag::Verb) else {
        return EntityTuple::default();
    };
    let find = |range: &[(String, PosTag)], want: &[PosTag]| {
        range.iter().find(|(_, t)| want.contains(t)).map(|(w, _)| w.clone())
    };
    EntityTuple {
        subject: find(&tagged[..v], &[PosTag::Noun]),
        object: find(&tagged[v + 1..], &[PosTag::Noun]),
        verb: Some(tagged[v].0.clone()),
        modifier: find(&tagged[v + 1..], &[PosTag::Adv, PosTag::Adj]),
    }
}
