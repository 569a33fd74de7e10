//! Topic definitions and topic relevance scoring.
//!
//! A topic definition is a list of weighted terms, each labelled with a topic
//! class. Documents are scored by counting term occurrences in three
//! locations (title, meta keywords, body) weighted 4, 2 and 1, multiplied by
//! the term weight and normalised by the body length in tokens. Links are
//! prioritised by mixing the score of their context window with the score of
//! the page they were found on.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::tokenize::tokenize;
use crate::Lang;

/// Default weight of the link context score in [`score_link`].
pub const DEFAULT_LINK_ALPHA: f64 = 0.75;

#[derive(Debug, Clone, PartialEq)]
pub struct TopicTerm {
    /// Case-folded tokens joined by single spaces.
    pub surface: String,
    pub weight: f64,
    pub topic_class: String,
    tokens: Vec<String>,
}

impl TopicTerm {
    pub fn new(surface: &str, weight: f64, topic_class: &str) -> Result<Self, TopicError> {
        let tokens = tokenize(surface);
        if tokens.is_empty() {
            return Err(TopicError::Malformed {
                line: 0,
                reason: format!("term {surface:?} has no tokens"),
            });
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(TopicError::Malformed {
                line: 0,
                reason: format!("weight {weight} must be a positive number"),
            });
        }
        let topic_class = topic_class.trim();
        if topic_class.is_empty() {
            return Err(TopicError::Malformed {
                line: 0,
                reason: "empty topic class".into(),
            });
        }
        Ok(TopicTerm {
            surface: tokens.join(" "),
            weight,
            topic_class: topic_class.to_string(),
            tokens,
        })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Non-overlapping, left-to-right occurrences of the term in `tokens`.
    pub fn count_in(&self, tokens: &[String]) -> usize {
        let n = self.tokens.len();
        if tokens.len() < n {
            return 0;
        }
        let mut count = 0;
        let mut i = 0;
        while i + n <= tokens.len() {
            if tokens[i..i + n] == self.tokens[..] {
                count += 1;
                i += n;
            } else {
                i += 1;
            }
        }
        count
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicDefinition {
    pub language: Lang,
    pub terms: Vec<TopicTerm>,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopicError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: duplicate term {surface:?}")]
    DuplicateTerm { line: usize, surface: String },
    #[error("topic definition contains no terms")]
    Empty,
    #[error("relevance threshold {0} must be a non-negative number")]
    InvalidThreshold(f64),
    #[error("link mix weight {0} must lie in [0, 1]")]
    InvalidAlpha(f64),
}

impl TopicDefinition {
    /// Builds a definition from already-validated terms.
    pub fn new(language: Lang, terms: Vec<TopicTerm>, threshold: f64) -> Result<Self, TopicError> {
        if !(threshold.is_finite() && threshold >= 0.0) {
            return Err(TopicError::InvalidThreshold(threshold));
        }
        if terms.is_empty() {
            return Err(TopicError::Empty);
        }
        let mut seen = HashSet::new();
        for (i, t) in terms.iter().enumerate() {
            if !seen.insert(t.surface.as_str()) {
                return Err(TopicError::DuplicateTerm {
                    line: i + 1,
                    surface: t.surface.clone(),
                });
            }
        }
        Ok(TopicDefinition {
            language,
            terms,
            threshold,
        })
    }

    /// Distinct topic classes in definition order.
    pub fn classes(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.terms
            .iter()
            .map(|t| t.topic_class.as_str())
            .filter(|c| seen.insert(*c))
            .collect()
    }
}

/// Parses the tab-separated topic format: `surface<TAB>weight<TAB>class`.
///
/// Blank lines and lines starting with `#` are skipped. Surfaces are
/// case-folded, so two lines differing only in case collide.
pub fn parse_topic_definition(
    text: &str,
    language: Lang,
    threshold: f64,
) -> Result<TopicDefinition, TopicError> {
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(TopicError::InvalidThreshold(threshold));
    }
    let mut terms = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(TopicError::Malformed {
                line: line_no,
                reason: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let weight: f64 = fields[1].trim().parse().map_err(|_| TopicError::Malformed {
            line: line_no,
            reason: format!("weight {:?} is not a number", fields[1]),
        })?;
        let term = TopicTerm::new(fields[0], weight, fields[2]).map_err(|e| match e {
            TopicError::Malformed { reason, .. } => TopicError::Malformed {
                line: line_no,
                reason,
            },
            other => other,
        })?;
        if seen.insert(term.surface.clone(), line_no).is_some() {
            return Err(TopicError::DuplicateTerm {
                line: line_no,
                surface: term.surface,
            });
        }
        terms.push(term);
    }
    if terms.is_empty() {
        return Err(TopicError::Empty);
    }
    Ok(TopicDefinition {
        language,
        terms,
        threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Location {
    Title,
    Keywords,
    Body,
}

impl Location {
    pub fn multiplier(self) -> f64 {
        match self {
            Location::Title => 4.0,
            Location::Keywords => 2.0,
            Location::Body => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Location::Title => "title",
            Location::Keywords => "keywords",
            Location::Body => "body",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "title" => Some(Location::Title),
            "keywords" => Some(Location::Keywords),
            "body" => Some(Location::Body),
            _ => None,
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedTerm {
    pub surface: String,
    pub topic_class: String,
    pub location: Location,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RelevanceScore {
    pub value: f64,
    pub matched_terms: Vec<MatchedTerm>,
}

impl RelevanceScore {
    /// Matched topic classes, deduplicated, in first-match order.
    pub fn classes(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.matched_terms
            .iter()
            .map(|m| m.topic_class.as_str())
            .filter(|c| seen.insert(*c))
            .collect()
    }
}

/// Scores a document against `topic`. All token lists must be case-folded.
pub fn score_document(
    title: &[String],
    keywords: &[String],
    body: &[String],
    topic: &TopicDefinition,
) -> RelevanceScore {
    let norm = body.len().max(1) as f64;
    let mut value = 0.0;
    let mut matched_terms = Vec::new();
    for term in &topic.terms {
        let mut weighted = 0.0;
        for (location, tokens) in [
            (Location::Title, title),
            (Location::Keywords, keywords),
            (Location::Body, body),
        ] {
            let count = term.count_in(tokens);
            if count > 0 {
                weighted += location.multiplier() * count as f64;
                matched_terms.push(MatchedTerm {
                    surface: term.surface.clone(),
                    topic_class: term.topic_class.clone(),
                    location,
                    count,
                });
            }
        }
        if weighted > 0.0 {
            value += term.weight * weighted / norm;
        }
    }
    RelevanceScore {
        value,
        matched_terms,
    }
}

/// A page is relevant when its score strictly exceeds the topic threshold.
pub fn classify_relevant(score: &RelevanceScore, topic: &TopicDefinition) -> bool {
    score.value > topic.threshold
}

/// Validates a link mix weight.
pub fn check_alpha(alpha: f64) -> Result<f64, TopicError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(alpha)
    } else {
        Err(TopicError::InvalidAlpha(alpha))
    }
}

/// Priority of a link: `alpha * context score + (1 - alpha) * source score`.
///
/// The context is scored as a body-only document.
pub fn score_link(
    context_tokens: &[String],
    source_score: f64,
    topic: &TopicDefinition,
    alpha: f64,
) -> f64 {
    let context = score_document(&[], &[], context_tokens, topic).value;
    let source = if source_score.is_finite() { source_score.max(0.0) } else { 0.0 };
    alpha * context + (1.0 - alpha) * source
}
