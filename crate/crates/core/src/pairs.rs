//! Parallel document detection within a crawled site.
//!
//! Candidates come from URL language markers and from a length band on
//! content characters. Each candidate is scored from tag-path structure
//! similarity, length ratio and URL evidence, and a greedy one-to-one
//! matching keeps the best pairs.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;
use url::Url;

use crate::xml;
use crate::Lang;

const QUERY_KEYS: [&str; 5] = ["lang", "hl", "locale", "language", "lng"];

/// Rewrites `text` in the letter case of `model` (lower, upper or title).
fn match_case(model: &str, text: &str) -> String {
    if model.chars().all(|c| !c.is_alphabetic() || c.is_uppercase()) {
        text.to_uppercase()
    } else if model.chars().next().is_some_and(char::is_uppercase) {
        let mut cs = text.chars();
        cs.next()
            .map(|f| f.to_uppercase().chain(cs).collect())
            .unwrap_or_default()
    } else {
        text.to_string()
    }
}

fn markers(lang: Lang) -> Vec<String> {
    let mut v = vec![lang.as_str().to_string()];
    v.extend(lang.english_name().map(str::to_string));
    v.extend(lang.iso639_3().map(str::to_string));
    v
}

/// Replaces `from` by `to` in a file name where it appears as an infix
/// (`_en.`, `-en.`, `.en.`). Returns `None` when there is no such infix.
fn swap_infix(name: &str, from: &str, to: &str) -> Option<String> {
    let lower = name.to_ascii_lowercase();
    let mut out = String::new();
    let mut last = 0;
    let mut found = false;
    let bytes = lower.as_bytes();
    let mut i = 0;
    while i + from.len() + 2 <= lower.len() {
        let sep = bytes[i];
        let end = i + 1 + from.len();
        if matches!(sep, b'_' | b'-' | b'.')
            && lower.is_char_boundary(i + 1)
            && lower.is_char_boundary(end)
            && &lower[i + 1..end] == from
            && bytes[end] == b'.'
        {
            out.push_str(&name[last..i + 1]);
            out.push_str(&match_case(&name[i + 1..end], to));
            last = end;
            found = true;
            i = end;
        } else {
            i += 1;
        }
    }
    found.then(|| {
        out.push_str(&name[last..]);
        out
    })
}

/// URLs the translation of `url` into `lang_b` is likely to have, derived
/// by swapping language markers of `lang_a`.
pub fn url_translation_candidates(url: &str, lang_a: Lang, lang_b: Lang) -> Vec<String> {
    let Ok(parsed) = Url::parse(url) else {
        return Vec::new();
    };
    let from = markers(lang_a);
    let to = markers(lang_b);
    let mut out: Vec<String> = Vec::new();
    for (f, t) in from.iter().zip(&to) {
        let mut candidate = parsed.clone();
        let mut changed = false;
        let segments: Vec<String> = parsed
            .path()
            .split('/')
            .enumerate()
            .map(|(i, seg)| {
                let is_last = i == parsed.path().matches('/').count();
                if seg.eq_ignore_ascii_case(f) {
                    changed = true;
                    match_case(seg, t)
                } else if is_last {
                    match swap_infix(seg, f, t) {
                        Some(s) => {
                            changed = true;
                            s
                        }
                        None => seg.to_string(),
                    }
                } else {
                    seg.to_string()
                }
            })
            .collect();
        candidate.set_path(&segments.join("/"));
        if let Some(query) = parsed.query() {
            let parts: Vec<String> = query
                .split('&')
                .map(|kv| match kv.split_once('=') {
                    Some((k, v))
                        if QUERY_KEYS.contains(&k.to_ascii_lowercase().as_str())
                            && v.eq_ignore_ascii_case(f) =>
                    {
                        changed = true;
                        format!("{k}={}", match_case(v, t))
                    }
                    _ => kv.to_string(),
                })
                .collect();
            candidate.set_query(Some(&parts.join("&")));
        }
        let candidate: String = candidate.into();
        if changed && candidate != url && !out.contains(&candidate) {
            out.push(candidate);
        }
    }
    out
}

/// Levenshtein distance over arbitrary sequences.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - editdist / max(len)` over the block tag-path sequences.
pub fn structure_similarity<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - edit_distance(a, b) as f64 / longest as f64
}

/// What pair detection needs to know about a crawled document.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolDoc {
    pub id: usize,
    pub url: String,
    pub lang: Lang,
    pub tag_seq: Vec<String>,
    /// Characters of non-boilerplate text.
    pub content_chars: usize,
    /// Exported file name relative to the docs directory.
    pub file: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocumentPair {
    pub doc_a: usize,
    pub doc_b: usize,
    pub url_evidence: bool,
    pub structure_sim: f64,
    pub length_ratio: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairParams {
    pub min_score: f64,
    pub min_length_ratio: f64,
    pub max_length_ratio: f64,
    pub structure_weight: f64,
    pub length_weight: f64,
    pub url_bonus: f64,
}

impl Default for PairParams {
    fn default() -> Self {
        PairParams {
            min_score: 0.75,
            min_length_ratio: 0.5,
            max_length_ratio: 2.0,
            structure_weight: 0.5,
            length_weight: 0.5,
            url_bonus: 0.1,
        }
    }
}

pub fn pair_score(structure_sim: f64, length_ratio: f64, url_evidence: bool, params: &PairParams) -> f64 {
    let length = if length_ratio > 0.0 && length_ratio.is_finite() {
        length_ratio.min(1.0 / length_ratio)
    } else {
        0.0
    };
    let bonus = if url_evidence { params.url_bonus } else { 0.0 };
    (params.structure_weight * structure_sim + params.length_weight * length + bonus).min(1.0)
}

/// Finds parallel pairs between the `lang_a` and `lang_b` documents of `pool`.
pub fn detect_pairs(pool: &[PoolDoc], lang_a: Lang, lang_b: Lang, params: &PairParams) -> Vec<DocumentPair> {
    let side_a: Vec<&PoolDoc> = pool.iter().filter(|d| d.lang == lang_a).collect();
    let side_b: Vec<&PoolDoc> = pool.iter().filter(|d| d.lang == lang_b).collect();
    if side_a.is_empty() || side_b.is_empty() {
        return Vec::new();
    }
    let mut evidence: HashSet<(usize, usize)> = HashSet::new();
    for a in &side_a {
        let cands: HashSet<String> = url_translation_candidates(&a.url, lang_a, lang_b).into_iter().collect();
        for b in &side_b {
            if cands.contains(&b.url) || url_translation_candidates(&b.url, lang_b, lang_a).contains(&a.url) {
                evidence.insert((a.id, b.id));
            }
        }
    }
    let mut scored = Vec::new();
    for a in &side_a {
        for b in &side_b {
            let url_evidence = evidence.contains(&(a.id, b.id));
            let length_ratio = if b.content_chars == 0 {
                if a.content_chars == 0 { 1.0 } else { f64::INFINITY }
            } else {
                a.content_chars as f64 / b.content_chars as f64
            };
            let in_band = (params.min_length_ratio..=params.max_length_ratio).contains(&length_ratio);
            if !url_evidence && !in_band {
                continue;
            }
            let structure_sim = structure_similarity(&a.tag_seq, &b.tag_seq);
            let score = pair_score(structure_sim, length_ratio, url_evidence, params);
            if score >= params.min_score {
                scored.push(DocumentPair {
                    doc_a: a.id,
                    doc_b: b.id,
                    url_evidence,
                    structure_sim,
                    length_ratio,
                    score,
                });
            }
        }
    }
    scored.sort_by(|x, y| {
        y.score
            .total_cmp(&x.score)
            .then(x.doc_a.cmp(&y.doc_a))
            .then(x.doc_b.cmp(&y.doc_b))
    });
    let mut used_a = HashSet::new();
    let mut used_b = HashSet::new();
    scored
        .into_iter()
        .filter(|p| {
            if used_a.contains(&p.doc_a) || used_b.contains(&p.doc_b) {
                return false;
            }
            used_a.insert(p.doc_a);
            used_b.insert(p.doc_b);
            true
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum PairIoError {
    #[error("document {id} ({path}) has not been exported")]
    MissingDocument { id: usize, path: String },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PairIoError + '_ {
    move |source| PairIoError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn pair_file_name(a: &PoolDoc, b: &PoolDoc) -> String {
    let stem = |f: &str| f.trim_end_matches(".xml").to_string();
    format!("{}_{}.xml", stem(&a.file), stem(&b.file))
}

/// Renders one pair-list document. `docs_rel` is the docs directory as seen
/// from the pair file.
pub fn pair_xml(pair: &DocumentPair, a: &PoolDoc, b: &PoolDoc, docs_rel: &str) -> String {
    PairFile {
        score: pair.score,
        structure_sim: pair.structure_sim,
        length_ratio: pair.length_ratio,
        url_evidence: pair.url_evidence,
        docs: [a, b]
            .iter()
            .map(|d| (d.lang, format!("{docs_rel}/{}", d.file)))
            .collect(),
    }
    .to_xml()
}

/// Writes one XML file per pair into `pairs_dir` plus `index.tsv`
/// (`file<TAB>score`, no header). Every member document must already exist
/// in `docs_dir`.
pub fn write_pair_list(
    pairs: &[DocumentPair],
    pool: &[PoolDoc],
    docs_dir: &Path,
    pairs_dir: &Path,
) -> Result<Vec<PathBuf>, PairIoError> {
    fs::create_dir_all(pairs_dir).map_err(io_err(pairs_dir))?;
    let find = |id: usize| pool.iter().find(|d| d.id == id);
    let docs_rel = relative_dir(pairs_dir, docs_dir);
    let mut index = String::new();
    let mut written = Vec::new();
    for pair in pairs {
        let mut members = Vec::new();
        for id in [pair.doc_a, pair.doc_b] {
            let doc = find(id).ok_or_else(|| PairIoError::MissingDocument {
                id,
                path: "<not in pool>".into(),
            })?;
            let path = docs_dir.join(&doc.file);
            if !path.is_file() {
                return Err(PairIoError::MissingDocument {
                    id,
                    path: path.display().to_string(),
                });
            }
            members.push(doc);
        }
        let name = pair_file_name(members[0], members[1]);
        let path = pairs_dir.join(&name);
        fs::write(&path, pair_xml(pair, members[0], members[1], &docs_rel)).map_err(io_err(&path))?;
        let _ = writeln!(index, "{name}\t{:.2}", pair.score);
        written.push(path);
    }
    let index_path = pairs_dir.join("index.tsv");
    fs::write(&index_path, index).map_err(io_err(&index_path))?;
    Ok(written)
}

/// `docs` relative to `from` when they share a parent, else absolute.
fn relative_dir(from: &Path, docs: &Path) -> String {
    match (from.parent(), docs.parent(), docs.file_name()) {
        (Some(a), Some(b), Some(name)) if a == b => format!("../{}", name.to_string_lossy()),
        _ => docs.display().to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairFile {
    pub score: f64,
    pub structure_sim: f64,
    pub length_ratio: f64,
    pub url_evidence: bool,
    /// `(lang, href)` of the two documents, href as written.
    pub docs: Vec<(Lang, String)>,
}

impl PairFile {
    /// Canonical XML form; numbers carry two decimals.
    pub fn to_xml(&self) -> String {
        let mut s = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        let _ = writeln!(
            s,
            "<pair score=\"{:.2}\" structure=\"{:.2}\" length=\"{:.2}\" url=\"{}\">",
            self.score, self.structure_sim, self.length_ratio, self.url_evidence
        );
        for (lang, href) in &self.docs {
            let _ = writeln!(s, "  <doc lang=\"{lang}\" href=\"{}\"/>", xml::escape(href));
        }
        s.push_str("</pair>\n");
        s
    }

    /// Resolves a member href against the directory holding the pair file.
    pub fn resolve(&self, pair_path: &Path, i: usize) -> PathBuf {
        let href = Path::new(&self.docs[i].1);
        if href.is_absolute() {
            href.to_path_buf()
        } else {
            pair_path.parent().unwrap_or(Path::new(".")).join(href)
        }
    }
}

pub fn parse_pair_xml(text: &str, path: &str) -> Result<PairFile, PairIoError> {
    let fmt = |message: String| PairIoError::Format {
        path: path.to_string(),
        message,
    };
    let root = xml::parse(text).map_err(|e| fmt(e.to_string()))?;
    if root.name != "pair" {
        return Err(fmt(format!("root element is <{}>, expected <pair>", root.name)));
    }
    let number = |name: &str| -> Result<f64, PairIoError> {
        root.attr(name)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| fmt(format!("missing or bad {name}")))
    };
    let score = number("score")?;
    let structure_sim = number("structure")?;
    let length_ratio = number("length")?;
    let url_evidence = match root.attr("url") {
        Some("true") => true,
        Some("false") => false,
        _ => return Err(fmt("missing or bad url".into())),
    };
    let mut docs = Vec::new();
    for d in root.children_named("doc") {
        let lang = d
            .attr("lang")
            .and_then(|l| Lang::new(l).ok())
            .ok_or_else(|| fmt("doc without a valid lang".into()))?;
        let href = d.attr("href").ok_or_else(|| fmt("doc without href".into()))?;
        docs.push((lang, href.to_string()));
    }
    if docs.len() != 2 {
        return Err(fmt(format!("expected 2 <doc> elements, found {}", docs.len())));
    }
    Ok(PairFile {
        score,
        structure_sim,
        length_ratio,
        url_evidence,
        docs,
    })
}

/// Pair files listed in `pairs_dir/index.tsv`, or every `*.xml` file in the
/// directory when there is no index.
pub fn read_pair_list(pairs_dir: &Path) -> Result<Vec<(PathBuf, PairFile)>, PairIoError> {
    let index_path = pairs_dir.join("index.tsv");
    let names: Vec<String> = if index_path.is_file() {
        fs::read_to_string(&index_path)
            .map_err(io_err(&index_path))?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.split('\t').next().unwrap_or("").to_string())
            .collect()
    } else {
        let mut v: Vec<String> = fs::read_dir(pairs_dir)
            .map_err(io_err(pairs_dir))?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".xml"))
            .collect();
        v.sort();
        v
    };
    names
        .into_iter()
        .map(|name| {
            let path = pairs_dir.join(&name);
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let pf = parse_pair_xml(&text, &path.display().to_string())?;
            Ok((path, pf))
        })
        .collect()
}
