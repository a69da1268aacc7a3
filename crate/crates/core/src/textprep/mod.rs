//! Social-media text normalization, entity tuples and tf-idf features.
//!
//! ```
//! use fuselab::textprep::{normalize, Lexicons};
//!
//! let out = normalize("@fiery_eyes, this is soooo coool borther! ;) #coolforever", Lexicons::bundled());
//! assert_eq!(
//!     out.surface(),
//!     "[user] fiery_eyes [/user] this is so cool brother! [wink] [hashtag] cool forever [/hashtag]"
//! );
//! ```

mod lexicon;
mod pos;
mod repair;
mod segment;
mod tfidf;

pub use lexicon::{Lexicons, PosTag, LEXICON_DIR_ENV};
pub use pos::{extract_entity_tuple, pos_tag, tag_word, EntityTuple};
pub use repair::{collapse_elongation, edit_distance_one, repair_word, Repaired};
pub use segment::{segment_hashtag, segment_words};
pub use tfidf::{tfidf_features, SparseVector, TfidfModel};

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenTag {
    Word,
    UserOpen,
    UserClose,
    HashtagOpen,
    HashtagClose,
    /// Text holds the emoticon name, rendered as `[name]`.
    Emoticon,
    /// Marks that the preceding word was elongated. Not rendered.
    Elongated,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub tag: TokenTag,
}

impl Token {
    fn new(text: impl Into<String>, tag: TokenTag) -> Self {
        Self { text: text.into(), tag }
    }

    fn marker(tag: TokenTag) -> Self {
        let text = match tag {
            TokenTag::UserOpen => "[user]",
            TokenTag::UserClose => "[/user]",
            TokenTag::HashtagOpen => "[hashtag]",
            TokenTag::HashtagClose => "[/hashtag]",
            TokenTag::Elongated => "<elongated>",
            _ => unreachable!("not a marker tag"),
        };
        Self::new(text, tag)
    }

    /// Surface form, or `None` for tokens that are not rendered.
    pub fn render(&self) -> Option<String> {
        match self.tag {
            TokenTag::Elongated => None,
            TokenTag::Emoticon => Some(format!("[{}]", self.text)),
            _ => Some(self.text.clone()),
        }
    }
}

/// Token sequence produced by [`normalize`], plus the raw input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedText {
    tokens: Vec<Token>,
    original: String,
}

impl NormalizedText {
    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn original(&self) -> &str {
        &self.original
    }

    /// Word tokens only, in order.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().filter(|t| t.tag == TokenTag::Word).map(|t| t.text.as_str())
    }

    /// Tokens joined by spaces; punctuation attaches to the preceding non-punctuation token.
    pub fn surface(&self) -> String {
        let mut s = String::new();
        let mut prev: Option<&Token> = None;
        for tok in &self.tokens {
            let Some(r) = tok.render() else { continue };
            // a URL would swallow anything glued to it on re-tokenisation
            let glue = tok.tag == TokenTag::Punct
                && prev.is_some_and(|p| p.tag != TokenTag::Punct && !patterns().url.is_match(&p.text));
            if !s.is_empty() && !glue {
                s.push(' ');
            }
            s.push_str(&r);
            prev = Some(tok);
        }
        s
    }
}

impl fmt::Display for NormalizedText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.surface())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lexeme<'a> {
    Url(&'a str),
    Bracket(&'a str),
    Emoticon(&'a str),
    Mention(&'a str),
    Hashtag(&'a str),
    Word(&'a str),
    Punct(&'a str),
}

struct Patterns {
    url: Regex,
    bracket: Regex,
    mention: Regex,
    hashtag: Regex,
    word: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| Patterns {
        url: Regex::new(r"^(?:https?://|www\.)\S+").unwrap(),
        bracket: Regex::new(r"^\[/?[A-Za-z_]+\]").unwrap(),
        mention: Regex::new(r"^@\w+").unwrap(),
        hashtag: Regex::new(r"^#\w+").unwrap(),
        word: Regex::new(r"^\w+(?:'\w+)*").unwrap(),
    })
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn lex<'a>(s: &'a str, lexicons: &'a Lexicons) -> Vec<Lexeme<'a>> {
    let p = patterns();
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < s.len() {
        let rest = &s[pos..];
        let c = rest.chars().next().unwrap();
        if c.is_whitespace() {
            pos += c.len_utf8();
            continue;
        }
        let (lexeme, len) = if let Some(m) = p.url.find(rest) {
            (Lexeme::Url(m.as_str()), m.end())
        } else if let Some(m) = p.bracket.find(rest) {
            (Lexeme::Bracket(m.as_str()), m.end())
        } else if let Some((e, name)) = lexicons
            .emoticon_prefix(rest)
            .filter(|(e, _)| !rest[e.len()..].starts_with(is_word_char))
        {
            (Lexeme::Emoticon(name), e.len())
        } else if let Some(m) = p.mention.find(rest) {
            (Lexeme::Mention(&m.as_str()[1..]), m.end())
        } else if let Some(m) = p.hashtag.find(rest) {
            (Lexeme::Hashtag(&m.as_str()[1..]), m.end())
        } else if let Some(m) = p.word.find(rest) {
            (Lexeme::Word(m.as_str()), m.end())
        } else {
            let len = rest.chars().take_while(|&d| d == c).map(char::len_utf8).sum();
            (Lexeme::Punct(&rest[..len]), len)
        };
        out.push(lexeme);
        pos += len;
    }
    out
}

fn span_kind(bracket: &str) -> Option<(bool, TokenTag, TokenTag)> {
    match bracket.to_lowercase().as_str() {
        "[user]" => Some((true, TokenTag::UserOpen, TokenTag::UserClose)),
        "[hashtag]" => Some((false, TokenTag::HashtagOpen, TokenTag::HashtagClose)),
        _ => None,
    }
}

fn verbatim(lexeme: Lexeme<'_>) -> Token {
    match lexeme {
        Lexeme::Emoticon(name) => Token::new(name, TokenTag::Emoticon),
        Lexeme::Punct(p) => Token::new(p, TokenTag::Punct),
        Lexeme::Url(u) => Token::new(u, TokenTag::Word),
        Lexeme::Mention(m) => Token::new(format!("@{}", m.to_lowercase()), TokenTag::Word),
        Lexeme::Hashtag(h) => Token::new(format!("#{}", h.to_lowercase()), TokenTag::Word),
        Lexeme::Bracket(w) | Lexeme::Word(w) => Token::new(w.to_lowercase(), TokenTag::Word),
    }
}

/// Normalizes social-media text: mentions and hashtags are wrapped in tags,
/// hashtags segmented, emoticons named, elongations collapsed, typos repaired
/// and everything lowercased. Already-normalized markup is recognised, so the
/// operation is idempotent on its own surface output.
pub fn normalize(raw: &str, lexicons: &Lexicons) -> NormalizedText {
    let lexemes = lex(raw, lexicons);
    let mut tokens = Vec::new();
    let mut i = 0;
    // commas right after a mention are dropped
    let skip_comma = |i: usize| {
        lexemes[i.min(lexemes.len())..]
            .iter()
            .take_while(|l| matches!(l, Lexeme::Punct(p) if p.starts_with(',')))
            .count()
    };
    while i < lexemes.len() {
        match lexemes[i] {
            Lexeme::Mention(name) => {
                tokens.push(Token::marker(TokenTag::UserOpen));
                tokens.push(Token::new(name.to_lowercase(), TokenTag::Word));
                tokens.push(Token::marker(TokenTag::UserClose));
                i += 1;
                i += skip_comma(i);
            }
            Lexeme::Hashtag(body) => {
                tokens.push(Token::marker(TokenTag::HashtagOpen));
                for w in segment_hashtag(body, lexicons) {
                    tokens.push(Token::new(w, TokenTag::Word));
                }
                tokens.push(Token::marker(TokenTag::HashtagClose));
                i += 1;
            }
            Lexeme::Emoticon(name) => {
                tokens.push(Token::new(name, TokenTag::Emoticon));
                i += 1;
            }
            Lexeme::Bracket(b) => {
                let inner = b[1..b.len() - 1].to_lowercase();
                if let Some((is_user, open, close)) = span_kind(b) {
                    let close_text = format!("[/{}]", &inner);
                    let end = lexemes[i + 1..]
                        .iter()
                        .position(|l| matches!(l, Lexeme::Bracket(x) if span_kind(x).is_some() || x.eq_ignore_ascii_case(&close_text)))
                        .map(|k| i + 1 + k)
                        .filter(|&k| matches!(lexemes[k], Lexeme::Bracket(x) if x.eq_ignore_ascii_case(&close_text)));
                    if let Some(end) = end {
                        tokens.push(Token::marker(open));
                        tokens.extend(lexemes[i + 1..end].iter().map(|l| match l {
                            Lexeme::Bracket(x) if lexicons.is_emoticon_name(&x[1..x.len() - 1].to_lowercase()) => {
                                Token::new(x[1..x.len() - 1].to_lowercase(), TokenTag::Emoticon)
                            }
                            _ => verbatim(*l),
                        }));
                        tokens.push(Token::marker(close));
                        i = end + 1;
                        if is_user {
                            i += skip_comma(i);
                        }
                        continue;
                    }
                    tokens.push(verbatim(lexemes[i]));
                } else if lexicons.is_emoticon_name(&inner) {
                    tokens.push(Token::new(inner, TokenTag::Emoticon));
                } else {
                    tokens.push(verbatim(lexemes[i]));
                }
                i += 1;
            }
            Lexeme::Word(w) => {
                let lower = w.to_lowercase();
                if lower.chars().all(char::is_alphabetic) {
                    let r = repair_word(&lower, lexicons);
                    tokens.push(Token::new(r.word, TokenTag::Word));
                    if r.elongated {
                        tokens.push(Token::marker(TokenTag::Elongated));
                    }
                } else {
                    tokens.push(Token::new(lower, TokenTag::Word));
                }
                i += 1;
            }
            Lexeme::Url(_) | Lexeme::Punct(_) => {
                tokens.push(verbatim(lexemes[i]));
                i += 1;
            }
        }
    }
    NormalizedText {
        tokens,
        original: raw.to_string(),
    }
}

/// Normalizes and renders in one step.
pub fn normalize_str(raw: &str, lexicons: &Lexicons) -> String {
    normalize(raw, lexicons).surface()
}
