use super::Lexicons;

/// Longest unknown piece the segmenter will consider.
const MAX_UNKNOWN_LEN: usize = 24;

fn word_cost(lex: &Lexicons, w: &str, len: usize) -> f64 {
    let n = lex.total_frequency();
    match lex.frequency(w) {
        Some(f) if f > 0 => -(f as f64 / n).ln(),
        // unseen words get 10 / (N · 10^len), so long unknown runs are expensive
        _ => -(10.0f64.ln() - n.ln() - len as f64 * 10.0f64.ln()),
    }
}

/// Most probable split of `text` into words under a unigram model.
pub fn segment_words(text: &str, lex: &Lexicons) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    if n == 0 {
        return Vec::new();
    }
    let limit = lex.max_word_len().max(MAX_UNKNOWN_LEN);
    let mut best = vec![f64::INFINITY; n + 1];
    let mut back = vec![0usize; n + 1];
    best[0] = 0.0;
    for end in 1..=n {
        for start in end.saturating_sub(limit)..end {
            if !best[start].is_finite() {
                continue;
            }
            let piece: String = chars[start..end].iter().collect();
            let cost = best[start] + word_cost(lex, &piece, end - start);
            if cost < best[end] {
                best[end] = cost;
                back[end] = start;
            }
        }
    }
    let mut words = Vec::new();
    let mut end = n;
    while end > 0 {
        let start = back[end];
        words.push(chars[start..end].iter().collect());
        end = start;
    }
    words.reverse();
    words
}

/// Splits a hashtag body on case changes, underscores and digit runs, then
/// segments each lowercase piece.
pub fn segment_hashtag(body: &str, lex: &Lexicons) -> Vec<String> {
    let mut pieces: Vec<String> = Vec::new();
    let mut cur = String::new();
    let mut prev: Option<char> = None;
    let flush = |cur: &mut String, pieces: &mut Vec<String>| {
        if !cur.is_empty() {
            pieces.push(std::mem::take(cur));
        }
    };
    for c in body.chars() {
        if c == '_' {
            flush(&mut cur, &mut pieces);
            prev = None;
            continue;
        }
        if let Some(p) = prev {
            let boundary = (p.is_lowercase() && c.is_uppercase()) || (p.is_numeric() != c.is_numeric());
            if boundary {
                flush(&mut cur, &mut pieces);
            }
        }
        cur.push(c);
        prev = Some(c);
    }
    flush(&mut cur, &mut pieces);
    pieces
        .into_iter()
        .flat_map(|p| {
            let lower = p.to_lowercase();
            if lower.chars().all(char::is_numeric) {
                vec![lower]
            } else {
                segment_words(&lower, lex)
            }
        })
        .collect()
}
