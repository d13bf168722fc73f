//! Whitespace tokenization and Unicode normalization shared by every stage.
//!
//! A token is a maximal run of non-whitespace characters. This is the unit
//! for passage length limits and for the token-overlap test of partial
//! matching.

use unicode_normalization::{is_nfc, UnicodeNormalization};

/// Iterates the whitespace tokens of `text`.
pub fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
}

pub fn token_count(text: &str) -> usize {
    tokens(text).count()
}

/// Byte ranges of each whitespace token, in order.
pub fn token_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

/// NFC-normalizes `text`, borrowing when it is already normalized.
pub fn nfc(text: &str) -> String {
    if is_nfc(text) {
        text.to_owned()
    } else {
        text.nfc().collect()
    }
}

/// True when the two strings share at least one whitespace token.
pub fn shares_token(a: &str, b: &str) -> bool {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let long_tokens: std::collections::HashSet<&str> = tokens(long).collect();
    tokens(short).any(|t| long_tokens.contains(t))
}
