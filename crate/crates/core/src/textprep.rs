//! Tweet normalization and tokenization.
//!
//! Normalization lowercases, rewrites URLs to `HTTP`, @-mentions to `userID`,
//! digits to `D`, truncates character elongations to two, and strips all
//! punctuation except `. ; ? !`. The placeholders keep their canonical casing,
//! and text that is already normalized passes through unchanged, so `normalize`
//! is idempotent.

use std::sync::LazyLock;

use regex::Regex;

/// Placeholder substituted for URLs.
pub const URL_TOKEN: &str = "HTTP";
/// Placeholder substituted for @-mentions.
pub const MENTION_TOKEN: &str = "userID";
/// Placeholder substituted for each digit.
pub const DIGIT_TOKEN: &str = "D";
/// Punctuation retained by normalization and emitted as standalone tokens.
pub const KEPT_PUNCT: [char; 4] = ['.', ';', '?', '!'];

static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[a-z][a-z0-9+.\-]*://\S+|www\.\S+").unwrap());
static MENTION_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@\w+").unwrap());

/// One character plus a flag marking it as part of a placeholder. Placeholder
/// characters are exempt from lowercasing and run-collapsing, which is what
/// keeps `D`-runs like `DDDD` and pre-existing `HTTP`/`userID` tokens stable
/// across repeated normalization.
#[derive(Clone, Copy, PartialEq)]
struct PChar {
    ch: char,
    protected: bool,
}

fn plain(ch: char) -> PChar {
    PChar { ch, protected: false }
}

fn protected_str(s: &str) -> impl Iterator<Item = PChar> + '_ {
    s.chars().map(|ch| PChar { ch, protected: true })
}

/// Mark canonical placeholder occurrences already present in the input.
fn recognize_placeholders(text: &str) -> Vec<PChar> {
    let chars: Vec<char> = text.chars().collect();
    let mention: Vec<char> = MENTION_TOKEN.chars().collect();
    let url: Vec<char> = URL_TOKEN.chars().collect();
    let mut out = Vec::with_capacity(chars.len());
    let mut i = 0;
    while i < chars.len() {
        if chars[i..].starts_with(&mention) {
            out.extend(protected_str(MENTION_TOKEN));
            i += mention.len();
        } else if chars[i..].starts_with(&url) {
            out.extend(protected_str(URL_TOKEN));
            i += url.len();
        } else if chars[i] == 'D' {
            out.push(PChar { ch: 'D', protected: true });
            i += 1;
        } else {
            out.push(plain(chars[i]));
            i += 1;
        }
    }
    out
}

/// Replace every regex match over the rendered text with a placeholder.
/// Matches may swallow placeholder characters (e.g. `@HTTP` as a mention).
fn replace_matches(seq: Vec<PChar>, re: &Regex, replacement: &str) -> Vec<PChar> {
    let rendered: String = seq.iter().map(|p| p.ch).collect();
    // Map byte offsets of the rendered string back to positions in `seq`.
    let mut byte_to_index = vec![0usize; rendered.len() + 1];
    for (idx, (byte, _)) in rendered.char_indices().enumerate() {
        byte_to_index[byte] = idx;
    }
    byte_to_index[rendered.len()] = seq.len();

    let mut out = Vec::with_capacity(seq.len());
    let mut cursor = 0;
    for m in re.find_iter(&rendered) {
        let (start, end) = (byte_to_index[m.start()], byte_to_index[m.end()]);
        out.extend_from_slice(&seq[cursor..start]);
        out.extend(protected_str(replacement));
        cursor = end;
    }
    out.extend_from_slice(&seq[cursor..]);
    out
}

/// Collapse runs of three or more identical unprotected characters to two.
fn collapse_runs(seq: Vec<PChar>) -> Vec<PChar> {
    let mut out: Vec<PChar> = Vec::with_capacity(seq.len());
    let mut run = 0usize;
    for p in seq {
        if let Some(last) = out.last() {
            if !p.protected && *last == p {
                run += 1;
                if run >= 2 {
                    continue;
                }
            } else {
                run = 0;
            }
        }
        out.push(p);
    }
    out
}

fn is_removed_punct(ch: char) -> bool {
    !ch.is_alphanumeric() && !ch.is_whitespace() && !KEPT_PUNCT.contains(&ch)
}

/// Normalize raw tweet text. Total and idempotent.
pub fn normalize(text: &str) -> String {
    let mut seq = recognize_placeholders(text);

    // 1. Lowercase (placeholders keep their canonical casing).
    seq = seq
        .into_iter()
        .flat_map(|p| -> Vec<PChar> {
            if p.protected {
                vec![p]
            } else {
                p.ch.to_lowercase().map(plain).collect()
            }
        })
        .collect();

    // 2. URLs, 3. mentions.
    seq = replace_matches(seq, &URL_RE, URL_TOKEN);
    seq = replace_matches(seq, &MENTION_RE, MENTION_TOKEN);

    // 4. Truncate elongations.
    seq = collapse_runs(seq);

    // 5. Digits.
    let mut digits_done = Vec::with_capacity(seq.len());
    for p in seq {
        if !p.protected && p.ch.is_numeric() {
            digits_done.extend(protected_str(DIGIT_TOKEN));
        } else {
            digits_done.push(p);
        }
    }

    // 6. Removed punctuation becomes a space so adjacent words never merge.
    let mut punct_done = Vec::with_capacity(digits_done.len());
    for p in digits_done {
        if !p.protected && is_removed_punct(p.ch) {
            punct_done.push(plain(' '));
        } else {
            punct_done.push(p);
        }
    }

    // Punctuation removal can create runs of spaces; collapse once more so the
    // output is a fixed point of this function.
    collapse_runs(punct_done).into_iter().map(|p| p.ch).collect()
}

/// Split normalized text on whitespace, emitting each retained punctuation
/// character as its own token.
pub fn tokenize(normalized: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in normalized.split_whitespace() {
        let mut current = String::new();
        for ch in chunk.chars() {
            if KEPT_PUNCT.contains(&ch) {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(ch.to_string());
            } else {
                current.push(ch);
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

/// Convenience: normalize then tokenize.
pub fn normalize_and_tokenize(text: &str) -> Vec<String> {
    tokenize(&normalize(text))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use proptest::prelude::*;

    #[test]
    fn normalize_spec_example() {
        assert_eq!(
            normalize("Sooooo sad!!! 4 Nepal :( http://t.co/ab @UN"),
            "soo sad!! D nepal  HTTP userID"
        );
    }

    #[test]
    fn normalize_empty_is_empty() {
        assert_eq!(normalize(""), "");
    }

    #[test]
    fn normalize_keeps_already_normalized_tweet() {
        let t = "guys if know any medical emergency you can reach umesh HTTP doctor at HTTP HTTP";
        assert_eq!(normalize(t), t);
    }

    #[test]
    fn tokenize_detaches_kept_punctuation() {
        assert_eq!(
            tokenize("soo sad!! D nepal HTTP userID"),
            vec!["soo", "sad", "!", "!", "D", "nepal", "HTTP", "userID"]
        );
        assert_eq!(tokenize("help. now?"), vec!["help", ".", "now", "?"]);
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn digits_replaced_per_character() {
        assert_eq!(normalize("2015"), "DDDD");
        assert_eq!(normalize("call 911 now"), "call DDD now");
    }

    #[test]
    fn elongation_truncation_applies_to_punctuation() {
        assert_eq!(normalize("wow!!!!"), "wow!!");
    }

    #[test]
    fn removed_punctuation_becomes_space_not_deletion() {
        assert_eq!(normalize("a:(b"), "a  b");
        assert!(normalize_and_tokenize("a:(b") == vec!["a", "b"]);
    }

    #[test]
    fn hashtag_loses_hash() {
        assert_eq!(normalize("#nepal"), " nepal");
    }

    #[test]
    fn www_urls_are_replaced() {
        assert_eq!(normalize("see www.example.com/x now"), "see HTTP now");
    }

    /// Seeded generator for adversarial-ish strings mixing URLs, mentions,
    /// digits, elongations, unicode, and punctuation.
    fn random_string(rng: &mut Rng) -> String {
        const PIECES: &[&str] = &[
            "Sooooo", "sad", "!!!", "http://t.co/xyz", "@UN", "2015", "nepal", ":(", "HTTP",
            "userID", "D", "DDDD", "WWW.x.CO", "a:(b", "#tag", "née", "Übermut", "...", "??",
            "x9y", "@", "://", "www.", "---", "0", "ＡＢ", "\u{1F600}", "İstanbul",
        ];
        let len = rng.below(12);
        let mut parts = Vec::with_capacity(len);
        for _ in 0..len {
            parts.push(PIECES[rng.below(PIECES.len())]);
        }
        let sep = if rng.below(4) == 0 { "" } else { " " };
        parts.join(sep)
    }

    #[test]
    fn normalize_idempotent_over_random_strings() {
        let mut rng = Rng::new(20_240_601);
        for _ in 0..10_000 {
            let s = random_string(&mut rng);
            let once = normalize(&s);
            let twice = normalize(&once);
            assert_eq!(once, twice, "not idempotent for input {s:?}");
        }
    }

    #[test]
    fn no_long_runs_outside_placeholders() {
        let mut rng = Rng::new(77);
        for _ in 0..2_000 {
            let s = random_string(&mut rng);
            let out = normalize(&s);
            let chars: Vec<char> = out.chars().collect();
            let mut i = 0;
            while i < chars.len() {
                let mut j = i;
                while j < chars.len() && chars[j] == chars[i] {
                    j += 1;
                }
                // Runs longer than two must be placeholder D's.
                if j - i > 2 {
                    assert_eq!(chars[i], 'D', "run of {:?} in {out:?}", chars[i]);
                }
                i = j;
            }
        }
    }

    proptest! {
        #[test]
        fn tokens_never_contain_removed_punct_or_whitespace(s in ".{0,80}") {
            for token in normalize_and_tokenize(&s) {
                prop_assert!(!token.is_empty());
                for ch in token.chars() {
                    prop_assert!(!ch.is_whitespace());
                    let kept = KEPT_PUNCT.contains(&ch);
                    prop_assert!(ch.is_alphanumeric() || kept, "bad char {ch:?} in {token:?}");
                }
            }
        }

        #[test]
        fn tokenize_round_trip_stable(s in ".{0,80}") {
            let tokens = normalize_and_tokenize(&s);
            let rejoined = tokens.join(" ");
            prop_assert_eq!(tokenize(&rejoined), tokens);
        }

        #[test]
        fn normalize_idempotent_proptest(s in ".{0,80}") {
            let once = normalize(&s);
            prop_assert_eq!(normalize(&once), once);
        }
    }
}
