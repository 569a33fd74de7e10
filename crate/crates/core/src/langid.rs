//! Character n-gram language identification with rank-order profiles.
//!
//! A profile is the list of the K most frequent character n-grams
//! (n = 1..=5) of a case-folded, whitespace-normalised text. Texts are
//! compared with the out-of-place distance: the sum over the text's ranked
//! n-grams of the rank difference to the profile, or K when the profile
//! lacks the n-gram.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::html::ParsedDoc;
use crate::Lang;

pub const PROFILE_SIZE: usize = 400;
pub const MAX_NGRAM: usize = 5;
pub const MIN_TRAINING_CHARS: usize = 1000;
/// Texts shorter than this (in normalised characters) are not identified.
pub const MIN_TEXT_CHARS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageProfile {
    pub language: Lang,
    /// N-grams in rank order.
    pub ngrams: Vec<String>,
    ranks: HashMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProfileError {
    #[error("training corpus has {0} characters, at least {MIN_TRAINING_CHARS} are needed")]
    CorpusTooShort(usize),
    #[error("profile line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Identification {
    Known { lang: Lang, distance: u64 },
    Unknown,
}

impl Identification {
    pub fn lang(self) -> Option<Lang> {
        match self {
            Identification::Known { lang, .. } => Some(lang),
            Identification::Unknown => None,
        }
    }
}

/// Lowercases and collapses whitespace runs to single spaces.
pub fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

/// The `k` most frequent n-grams of normalised `text`, ties broken
/// lexicographically.
fn ranked_ngrams(normalized: &str, k: usize) -> Vec<String> {
    let chars: Vec<char> = normalized.chars().collect();
    let mut counts: HashMap<String, u32> = HashMap::new();
    for start in 0..chars.len() {
        let mut gram = String::new();
        for &c in chars[start..].iter().take(MAX_NGRAM) {
            gram.push(c);
            *counts.entry(gram.clone()).or_insert(0) += 1;
        }
    }
    let mut all: Vec<(String, u32)> = counts.into_iter().collect();
    all.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    all.into_iter().map(|(g, _)| g).collect()
}

impl LanguageProfile {
    fn from_ngrams(language: Lang, ngrams: Vec<String>) -> Self {
        let ranks = ngrams
            .iter()
            .enumerate()
            .map(|(i, g)| (g.clone(), i))
            .collect();
        LanguageProfile {
            language,
            ngrams,
            ranks,
        }
    }

    pub fn rank(&self, ngram: &str) -> Option<usize> {
        self.ranks.get(ngram).copied()
    }

    /// Serialises to the `lang<TAB>K` / `ngram<TAB>rank` text format.
    pub fn to_file_string(&self) -> String {
        let mut out = format!("{}\t{}\n", self.language, self.ngrams.len());
        for (i, g) in self.ngrams.iter().enumerate() {
            let _ = writeln!(out, "{g}\t{i}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ProfileError> {
        let mut lines = text.split('\n').enumerate();
        let (_, header) = lines.next().ok_or(ProfileError::Malformed {
            line: 1,
            reason: "empty profile".into(),
        })?;
        let (lang, k) = header.split_once('\t').ok_or(ProfileError::Malformed {
            line: 1,
            reason: "header must be lang<TAB>K".into(),
        })?;
        let language = Lang::new(lang).map_err(|e| ProfileError::Malformed {
            line: 1,
            reason: e.to_string(),
        })?;
        let k: usize = k.trim().parse().map_err(|_| ProfileError::Malformed {
            line: 1,
            reason: format!("bad profile size {k:?}"),
        })?;
        let mut ngrams = vec![None; k];
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let bad = |reason: String| ProfileError::Malformed {
                line: idx + 1,
                reason,
            };
            let (gram, rank) = line
                .rsplit_once('\t')
                .ok_or_else(|| bad("expected ngram<TAB>rank".into()))?;
            let rank: usize = rank
                .parse()
                .map_err(|_| bad(format!("bad rank {rank:?}")))?;
            let slot = ngrams
                .get_mut(rank)
                .ok_or_else(|| bad(format!("rank {rank} out of range")))?;
            if slot.is_some() {
                return Err(bad(format!("rank {rank} repeated")));
            }
            *slot = Some(gram.to_string());
        }
        let ngrams: Option<Vec<String>> = ngrams.into_iter().collect();
        let ngrams = ngrams.ok_or(ProfileError::Malformed {
            line: 1,
            reason: "missing ranks".into(),
        })?;
        Ok(LanguageProfile::from_ngrams(language, ngrams))
    }
}

pub fn train_profile(corpus: &str, language: Lang) -> Result<LanguageProfile, ProfileError> {
    let normalized = normalize_text(corpus);
    let n = normalized.chars().count();
    if n < MIN_TRAINING_CHARS {
        return Err(ProfileError::CorpusTooShort(n));
    }
    Ok(LanguageProfile::from_ngrams(
        language,
        ranked_ngrams(&normalized, PROFILE_SIZE),
    ))
}

/// Out-of-place distance between a ranked n-gram list and a profile.
pub fn out_of_place(text_ngrams: &[String], profile: &LanguageProfile) -> u64 {
    text_ngrams
        .iter()
        .enumerate()
        .map(|(i, g)| match profile.rank(g) {
            Some(r) => i.abs_diff(r) as u64,
            None => PROFILE_SIZE as u64,
        })
        .sum()
}

/// Closest profile by out-of-place distance; earlier profiles win ties.
pub fn identify(text: &str, profiles: &[LanguageProfile]) -> Identification {
    let normalized = normalize_text(text);
    if normalized.chars().count() < MIN_TEXT_CHARS || profiles.is_empty() {
        return Identification::Unknown;
    }
    let ngrams = ranked_ngrams(&normalized, PROFILE_SIZE);
    let mut best: Option<(Lang, u64)> = None;
    for p in profiles {
        let d = out_of_place(&ngrams, p);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((p.language, d));
        }
    }
    let (lang, distance) = best.expect("profiles non-empty");
    Identification::Known { lang, distance }
}

const BUNDLED_PROFILES: [(&str, &str); 5] = [
    ("en", include_str!("../data/profiles/en.profile")),
    ("fr", include_str!("../data/profiles/fr.profile")),
    ("el", include_str!("../data/profiles/el.profile")),
    ("es", include_str!("../data/profiles/es.profile")),
    ("de", include_str!("../data/profiles/de.profile")),
];

/// Profiles shipped with the crate, in the order en, fr, el, es, de.
pub fn bundled_profiles() -> Vec<LanguageProfile> {
    BUNDLED_PROFILES
        .iter()
        .map(|(code, text)| {
            let p = LanguageProfile::parse(text).expect("bundled profile parses");
            debug_assert_eq!(p.language.as_str(), *code);
            p
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("document language {detected:?} is not the target {target}")]
pub struct Rejected {
    pub detected: Option<Lang>,
    pub target: Lang,
}

/// Identifies the document language and labels each block.
///
/// Documents not in `target` are rejected. Blocks of at least
/// [`MIN_TEXT_CHARS`] characters get their own label, shorter ones (and
/// unidentifiable ones) inherit the document language.
pub fn annotate_document(
    mut doc: ParsedDoc,
    target: Lang,
    profiles: &[LanguageProfile],
) -> Result<ParsedDoc, Rejected> {
    let joined = doc
        .blocks
        .iter()
        .map(|b| b.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    let main = identify(&joined, profiles).lang();
    if main != Some(target) {
        return Err(Rejected {
            detected: main,
            target,
        });
    }
    doc.main_language = main;
    for block in &mut doc.blocks {
        let own = identify(&block.text, profiles).lang();
        block.language = own.or(main);
    }
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::html::Block;
    use proptest::prelude::*;

    fn corpus(code: &str) -> String {
        let path = format!("{}/data/corpora/{code}.txt", env!("CARGO_MANIFEST_DIR"));
        std::fs::read_to_string(path).unwrap()
    }

    #[test]
    fn committed_profiles_match_training() {
        for p in bundled_profiles() {
            let trained = train_profile(&corpus(p.language.as_str()), p.language).unwrap();
            assert_eq!(trained, p, "profile {} is stale", p.language);
            assert_eq!(p.ngrams.len(), PROFILE_SIZE);
        }
    }

    #[test]
    fn profile_file_round_trip() {
        let p = train_profile(&corpus("fr"), Lang::FR).unwrap();
        assert_eq!(LanguageProfile::parse(&p.to_file_string()).unwrap(), p);
        assert!(LanguageProfile::parse("fr\t2\na\t0\n").is_err());
        assert!(LanguageProfile::parse("fr\t1\na\t0\nb\t0\n").is_err());
        assert!(LanguageProfile::parse("").is_err());
    }

    #[test]
    fn degenerate_and_short_corpora() {
        let p = train_profile(&"a".repeat(1200), Lang::EN).unwrap();
        assert_eq!(p.ngrams, vec!["a", "aa", "aaa", "aaaa", "aaaaa"]);
        assert_eq!(train_profile("short", Lang::EN), Err(ProfileError::CorpusTooShort(5)));
    }

    #[test]
    fn whitespace_runs_do_not_matter() {
        let text = corpus("de");
        let spaced = text.replace(' ', "  \t ").replace('\n', "\n\n  ");
        assert_eq!(
            train_profile(&text, Lang::DE).unwrap(),
            train_profile(&spaced, Lang::DE).unwrap()
        );
    }

    #[test]
    fn own_corpus_at_distance_zero() {
        let profiles = bundled_profiles();
        for p in &profiles {
            match identify(&corpus(p.language.as_str()), &profiles) {
                Identification::Known { lang, distance } => {
                    assert_eq!(lang, p.language);
                    assert_eq!(distance, 0);
                }
                Identification::Unknown => panic!("unknown"),
            }
        }
    }

    #[test]
    fn short_text_unknown() {
        let profiles = bundled_profiles();
        assert_eq!(identify("nineteen characters", &profiles), Identification::Unknown);
        assert_eq!("nineteen characters".chars().count(), 19);
        assert!(matches!(identify("twenty characters!!!", &profiles), Identification::Known { .. }));
    }

    #[test]
    fn english_sample_against_three_profiles() {
        let all = bundled_profiles();
        let three: Vec<LanguageProfile> = all
            .into_iter()
            .filter(|p| [Lang::EN, Lang::FR, Lang::EL].contains(&p.language))
            .collect();
        let sample = "The committee will publish its annual report on the state of the rivers next month.";
        assert_eq!(identify(sample, &three).lang(), Some(Lang::EN));
    }

    fn doc(blocks: &[&str]) -> ParsedDoc {
        ParsedDoc {
            blocks: blocks.iter().map(|t| Block::new("html/body/p", t)).collect(),
            ..ParsedDoc::default()
        }
    }

    const FR1: &str = "La qualité de l'eau des rivières s'est nettement améliorée depuis que les communes traitent leurs eaux usées.";
    const FR2: &str = "Les habitants du quartier se retrouvent chaque samedi matin sur la place du marché pour acheter des légumes.";
    const EN1: &str = "This page is also available in English for visitors from abroad who would like to read it.";

    #[test]
    fn annotate_accepts_and_rejects() {
        let profiles = bundled_profiles();
        let d = annotate_document(doc(&[FR1, FR2]), Lang::FR, &profiles).unwrap();
        assert_eq!(d.main_language, Some(Lang::FR));
        assert!(d.blocks.iter().all(|b| b.language == Some(Lang::FR)));
        let r = annotate_document(doc(&[FR1, FR2]), Lang::EL, &profiles).unwrap_err();
        assert_eq!(r.detected, Some(Lang::FR));
        assert!(annotate_document(doc(&[]), Lang::FR, &profiles).is_err());
    }

    #[test]
    fn annotate_marks_foreign_block_and_inherits_short() {
        let profiles = bundled_profiles();
        let original = doc(&[FR1, EN1, "Oui.", FR2]);
        let d = annotate_document(original.clone(), Lang::FR, &profiles).unwrap();
        let langs: Vec<Option<Lang>> = d.blocks.iter().map(|b| b.language).collect();
        assert_eq!(langs, vec![Some(Lang::FR), Some(Lang::EN), Some(Lang::FR), Some(Lang::FR)]);
        for (a, b) in d.blocks.iter().zip(&original.blocks) {
            assert_eq!(a.text, b.text);
        }
        assert!(!d.is_content(1));
        assert!(d.is_content(2));
    }

    proptest! {
        #[test]
        fn identify_ignores_whitespace_runs(words in prop::collection::vec("[a-zé]{1,8}", 3..30), sep in "[ \t\n]{1,4}") {
            let profiles = bundled_profiles();
            let single = words.join(" ");
            let multi = words.join(&sep);
            prop_assert_eq!(identify(&single, &profiles), identify(&multi, &profiles));
        }
    }
}
