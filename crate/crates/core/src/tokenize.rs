//! The tokenizer shared by relevance scoring, boilerplate features and
//! alignment.
//!
//! A token is a maximal run of Unicode letters or digits. Tokens are
//! case-folded with full Unicode lowercasing.

use std::ops::Range;

/// Byte ranges of the raw (not case-folded) tokens in `text`.
pub fn token_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            spans.push(s..i);
        }
    }
    if let Some(s) = start {
        spans.push(s..text.len());
    }
    spans
}

/// Case-folded tokens of `text`.
pub fn tokenize(text: &str) -> Vec<String> {
    token_spans(text)
        .into_iter()
        .map(|r| text[r].to_lowercase())
        .collect()
}

/// Number of tokens in `text`, without allocating them.
pub fn count_tokens(text: &str) -> usize {
    token_spans(text).len()
}
