//! Sentence splitting and length-based sentence alignment.
//!
//! The aligner is the classic Gale-Church dynamic program over character
//! lengths with the bead menu 1-1, 1-0, 0-1, 2-1, 1-2 and 2-2.

pub mod tmx;

use std::fmt;
use std::ops::Range;

use crate::Lang;

pub use tmx::{read_tmx, to_tmx, to_tsv, Tmx, TmxError, TmxMeta};

/// Expected ratio of B characters per A character.
pub const LENGTH_RATIO: f64 = 1.0;
/// Variance of the length difference per A character.
pub const LENGTH_VARIANCE: f64 = 6.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BeadKind {
    OneOne,
    OneZero,
    ZeroOne,
    TwoOne,
    OneTwo,
    TwoTwo,
}

impl BeadKind {
    /// All kinds in tie-break order.
    pub const ALL: [BeadKind; 6] = [
        BeadKind::OneOne,
        BeadKind::OneZero,
        BeadKind::ZeroOne,
        BeadKind::TwoOne,
        BeadKind::OneTwo,
        BeadKind::TwoTwo,
    ];

    /// Sentences consumed on each side.
    pub fn sizes(self) -> (usize, usize) {
        match self {
            BeadKind::OneOne => (1, 1),
            BeadKind::OneZero => (1, 0),
            BeadKind::ZeroOne => (0, 1),
            BeadKind::TwoOne => (2, 1),
            BeadKind::OneTwo => (1, 2),
            BeadKind::TwoTwo => (2, 2),
        }
    }

    pub fn prior(self) -> f64 {
        match self {
            BeadKind::OneOne => 0.89,
            BeadKind::OneZero | BeadKind::ZeroOne => 0.0099,
            BeadKind::TwoOne | BeadKind::OneTwo => 0.089 / 2.0,
            BeadKind::TwoTwo => 0.011,
        }
    }

    pub fn from_sizes(a: usize, b: usize) -> Option<Self> {
        BeadKind::ALL.into_iter().find(|k| k.sizes() == (a, b))
    }
}

impl fmt::Display for BeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = self.sizes();
        write!(f, "{a}-{b}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bead {
    pub kind: BeadKind,
    pub a: Range<usize>,
    pub b: Range<usize>,
    pub cost: f64,
}

impl Bead {
    pub fn a_indices(&self) -> Vec<usize> {
        self.a.clone().collect()
    }

    pub fn b_indices(&self) -> Vec<usize> {
        self.b.clone().collect()
    }
}

const AS_P: f64 = 0.231_641_9;
const AS_B: [f64; 5] = [
    0.319_381_530,
    -0.356_563_782,
    1.781_477_937,
    -1.821_255_978,
    1.330_274_429,
];

/// `ln(2 * (1 - Phi(x)))` for `x >= 0`, from the Abramowitz-Stegun 26.2.17
/// polynomial, evaluated in log space so large `x` does not underflow.
pub fn ln_two_tail(x: f64) -> f64 {
    let x = x.abs();
    let t = 1.0 / (1.0 + AS_P * x);
    let poly = t * (AS_B[0] + t * (AS_B[1] + t * (AS_B[2] + t * (AS_B[3] + t * AS_B[4]))));
    let ln_pdf = -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln();
    std::f64::consts::LN_2 + ln_pdf + poly.ln()
}

/// Cost of a bead whose sides have `la` and `lb` characters.
pub fn bead_cost(kind: BeadKind, la: usize, lb: usize) -> f64 {
    let (la, lb) = (la as f64, lb as f64);
    // A bead with an empty A side uses the B length as the variance base.
    let base = if la > 0.0 { la } else { lb / LENGTH_RATIO };
    let delta = if base > 0.0 {
        (lb - la * LENGTH_RATIO) / (base * LENGTH_VARIANCE).sqrt()
    } else {
        0.0
    };
    -kind.prior().ln() - ln_two_tail(delta)
}

fn side_len(lens: &[usize], range: Range<usize>) -> usize {
    lens[range].iter().sum()
}

/// Aligns two lists of sentence lengths (in characters).
pub fn align_lengths(la: &[usize], lb: &[usize]) -> Vec<Bead> {
    let (n, m) = (la.len(), lb.len());
    let w = m + 1;
    let mut cost = vec![f64::INFINITY; (n + 1) * w];
    let mut back: Vec<Option<BeadKind>> = vec![None; (n + 1) * w];
    cost[0] = 0.0;
    for i in 0..=n {
        for j in 0..=m {
            if i == 0 && j == 0 {
                continue;
            }
            let mut best = f64::INFINITY;
            let mut choice = None;
            for kind in BeadKind::ALL {
                let (da, db) = kind.sizes();
                if da > i || db > j {
                    continue;
                }
                let prev = cost[(i - da) * w + (j - db)];
                if !prev.is_finite() {
                    continue;
                }
                let c = prev + bead_cost(kind, side_len(la, i - da..i), side_len(lb, j - db..j));
                if c < best {
                    best = c;
                    choice = Some(kind);
                }
            }
            cost[i * w + j] = best;
            back[i * w + j] = choice;
        }
    }
    let mut beads = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let kind = back[i * w + j].expect("every cell is reachable");
        let (da, db) = kind.sizes();
        let (a, b) = (i - da..i, j - db..j);
        let c = bead_cost(kind, side_len(la, a.clone()), side_len(lb, b.clone()));
        beads.push(Bead { kind, a, b, cost: c });
        i -= da;
        j -= db;
    }
    beads.reverse();
    beads
}

pub fn sentence_lengths<S: AsRef<str>>(sents: &[S]) -> Vec<usize> {
    sents.iter().map(|s| s.as_ref().chars().count()).collect()
}

pub fn align_sentences<S: AsRef<str>>(sents_a: &[S], sents_b: &[S]) -> Vec<Bead> {
    align_lengths(&sentence_lengths(sents_a), &sentence_lengths(sents_b))
}

/// Sum of bead costs, accumulated left to right.
pub fn total_cost(beads: &[Bead]) -> f64 {
    beads.iter().fold(0.0, |acc, b| acc + b.cost)
}

/// One segment pair per bead with both sides non-empty; multi-sentence
/// sides are joined with a space.
pub fn extract_pairs<S: AsRef<str>>(beads: &[Bead], sents_a: &[S], sents_b: &[S]) -> Vec<(String, String)> {
    let join = |sents: &[S], r: &Range<usize>| {
        sents[r.clone()]
            .iter()
            .map(|s| s.as_ref())
            .collect::<Vec<_>>()
            .join(" ")
    };
    beads
        .iter()
        .filter(|b| !b.a.is_empty() && !b.b.is_empty())
        .map(|b| (join(sents_a, &b.a), join(sents_b, &b.b)))
        .collect()
}

fn abbreviations(lang: Lang) -> &'static [&'static str] {
    match lang.as_str() {
        "en" => &[
            "Mr", "Mrs", "Ms", "Dr", "Prof", "St", "Jr", "Sr", "etc", "e.g", "i.e", "vs", "Inc", "Ltd",
            "Co", "No", "Fig", "approx", "Jan", "Feb", "Mar", "Apr", "Aug", "Sep", "Sept", "Oct", "Nov",
            "Dec",
        ],
        "fr" => &[
            "M", "MM", "Mme", "Mmes", "Mlle", "Dr", "Pr", "etc", "p.ex", "cf", "av", "env", "n°", "art",
            "vol", "chap",
        ],
        "el" => &["κ", "κα", "π.χ", "δηλ", "βλ", "σελ", "αρ", "κ.λπ", "κλπ", "π.Χ", "μ.Χ", "τηλ"],
        "es" => &[
            "Sr", "Sra", "Srta", "Dr", "Dra", "Ud", "Uds", "etc", "p.ej", "núm", "pág", "aprox", "art",
            "Avda",
        ],
        "de" => &[
            "Dr", "Prof", "Hr", "Fr", "bzw", "z.B", "usw", "ca", "Nr", "vgl", "d.h", "u.a", "inkl", "evtl",
            "ggf", "Str", "S",
        ],
        _ => &["Mr", "Mrs", "Dr", "etc"],
    }
}

const CLOSERS: [char; 7] = ['"', '\'', ')', '»', '”', '’', ']'];

/// Splits one block of text into sentences.
///
/// A sentence ends at `.`, `!`, `?` or `;` (optionally followed by closing
/// quotes or brackets) when whitespace and then an uppercase letter or a
/// digit follow. A period closing a known abbreviation or a single-letter
/// initial does not end a sentence.
pub fn split_sentences(text: &str, lang: Lang) -> Vec<String> {
    let abbrevs = abbreviations(lang);
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !matches!(c, '.' | '!' | '?' | ';') {
            i += 1;
            continue;
        }
        let mut k = i + 1;
        while k < chars.len() && CLOSERS.contains(&chars[k].1) {
            k += 1;
        }
        let ws_start = k;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let boundary = k > ws_start
            && k < chars.len()
            && (chars[k].1.is_uppercase() || chars[k].1.is_ascii_digit() || chars[k].1.is_numeric());
        if boundary && c == '.' {
            let word_start = text[..pos]
                .rfind(char::is_whitespace)
                .map(|p| p + text[p..].chars().next().map_or(1, char::len_utf8))
                .unwrap_or(0);
            let word = text[word_start..pos].trim_start_matches(['(', '"', '\'', '«', '“']);
            let single_initial = {
                let mut cs = word.chars();
                matches!((cs.next(), cs.next()), (Some(f), None) if f.is_uppercase())
            };
            if single_initial || abbrevs.contains(&word) {
                i += 1;
                continue;
            }
        }
        if boundary {
            let end = chars[ws_start - 1].0 + chars[ws_start - 1].1.len_utf8();
            let s = text[start..end].trim();
            if !s.is_empty() {
                out.push(s.to_string());
            }
            start = chars[k].0;
            i = k;
        } else {
            i += 1;
        }
    }
    let s = text[start..].trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
    out
}

/// Splits each block separately; block ends always end a sentence.
pub fn split_blocks<S: AsRef<str>>(blocks: &[S], lang: Lang) -> Vec<String> {
    blocks
        .iter()
        .flat_map(|b| split_sentences(b.as_ref(), lang))
        .collect()
}
