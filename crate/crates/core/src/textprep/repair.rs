use super::Lexicons;

/// Result of repairing one lowercase alphabetic word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Repaired {
    pub word: String,
    pub elongated: bool,
}

/// Maximum number of long runs whose 1-or-2 collapses are enumerated exhaustively.
const MAX_ENUMERATED_RUNS: usize = 10;

fn runs(word: &str) -> Vec<(char, usize)> {
    let mut out: Vec<(char, usize)> = Vec::new();
    for c in word.chars() {
        match out.last_mut() {
            Some((p, n)) if *p == c => *n += 1,
            _ => out.push((c, 1)),
        }
    }
    out
}

fn render(runs: &[(char, usize)], long_as: &[usize]) -> String {
    let mut k = 0;
    let mut s = String::new();
    for &(c, n) in runs {
        let n = if n >= 3 {
            k += 1;
            long_as[k - 1]
        } else {
            n
        };
        s.extend(std::iter::repeat_n(c, n));
    }
    s
}

/// Collapses runs of three or more to one or two characters and returns the
/// most frequent lexicon word among the collapses (shorter wins ties).
/// `None` when the word has no long run.
pub fn collapse_elongation(word: &str, lex: &Lexicons) -> Option<Result<String, String>> {
    let rs = runs(word);
    let long = rs.iter().filter(|(_, n)| *n >= 3).count();
    if long == 0 {
        return None;
    }
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    if long <= MAX_ENUMERATED_RUNS {
        for mask in 0..(1u32 << long) {
            candidates.push((0..long).map(|i| 1 + ((mask >> i) & 1) as usize).collect());
        }
    } else {
        candidates.push(vec![1; long]);
        candidates.push(vec![2; long]);
    }
    let best = candidates
        .iter()
        .map(|c| render(&rs, c))
        .filter_map(|w| lex.frequency(&w).map(|f| (f, w)))
        .max_by(|a, b| a.0.cmp(&b.0).then_with(|| b.1.len().cmp(&a.1.len())).then_with(|| b.1.cmp(&a.1)));
    Some(match best {
        Some((_, w)) => Ok(w),
        None => Err(render(&rs, &vec![1; long])),
    })
}

/// Optimal-string-alignment distance-1 neighbours of `word` over a-z.
fn edits1(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    let alphabet = 'a'..='z';
    let mut out = Vec::new();
    for i in 0..n {
        let mut v = chars.clone();
        v.remove(i);
        out.push(v.into_iter().collect());
    }
    for i in 0..n.saturating_sub(1) {
        let mut v = chars.clone();
        v.swap(i, i + 1);
        out.push(v.into_iter().collect());
    }
    for i in 0..n {
        for c in alphabet.clone() {
            if c != chars[i] {
                let mut v = chars.clone();
                v[i] = c;
                out.push(v.into_iter().collect());
            }
        }
    }
    for i in 0..=n {
        for c in alphabet.clone() {
            let mut v = chars.clone();
            v.insert(i, c);
            out.push(v.into_iter().collect());
        }
    }
    out
}

/// Most frequent lexicon word at edit distance one (alphabetical on ties).
pub fn edit_distance_one(word: &str, lex: &Lexicons) -> Option<String> {
    edits1(word)
        .into_iter()
        .filter_map(|w| lex.frequency(&w).map(|f| (f, w)))
        .max_by(|a, b| a.0.cmp(&b.0).then_with(|| b.1.cmp(&a.1)))
        .map(|(_, w)| w)
}

/// Words shorter than this are never edit-repaired.
const MIN_REPAIR_LEN: usize = 3;

/// Elongation collapse, then the typo map, then edit-distance-1 repair.
pub fn repair_word(word: &str, lex: &Lexicons) -> Repaired {
    if let Some(fixed) = lex.typo(word) {
        return Repaired {
            word: fixed.to_string(),
            elongated: false,
        };
    }
    if lex.is_known(word) {
        return Repaired {
            word: word.to_string(),
            elongated: false,
        };
    }
    let (base, elongated) = match collapse_elongation(word, lex) {
        Some(Ok(w)) => return Repaired { word: w, elongated: true },
        Some(Err(w)) => (w, true),
        None => (word.to_string(), false),
    };
    if lex.is_known(&base) {
        return Repaired { word: base, elongated };
    }
    if let Some(fixed) = lex.typo(&base) {
        return Repaired {
            word: fixed.to_string(),
            elongated,
        };
    }
    if base.chars().count() >= MIN_REPAIR_LEN && base.chars().all(|c| c.is_ascii_lowercase()) {
        if let Some(fixed) = edit_distance_one(&base, lex) {
            return Repaired { word: fixed, elongated };
        }
    }
    Repaired { word: base, elongated }
}
