//! CES-style XML serialisation of annotated documents and the crawl index.
//!
//! The writer is canonical: attribute order, indentation and number
//! formatting are fixed, so reading a file and writing it again reproduces
//! it byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use thiserror::Error;

use crate::html::{Block, ParsedDoc};
use crate::tokenize::tokenize;
use crate::topic::{Location, MatchedTerm, RelevanceScore};
use crate::xml::{self, Element};
use crate::Lang;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrawlMeta {
    pub fetched_at: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("document {url} has no {field} annotation")]
    Unannotated { url: String, field: &'static str },
    #[error("XML error: {0}")]
    Xml(#[from] xml::XmlError),
    #[error("schema error at /{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

fn schema(path: &str, message: impl Into<String>) -> ExportError {
    ExportError::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

/// Relevance scores are written with four decimals.
pub fn format_score(v: f64) -> String {
    format!("{v:.4}")
}

pub fn write_document_xml(doc: &ParsedDoc, meta: &CrawlMeta) -> Result<String, ExportError> {
    let main = doc.main_language.ok_or_else(|| ExportError::Unannotated {
        url: doc.url.clone(),
        field: "language",
    })?;
    let relevance = doc.relevance.as_ref().ok_or_else(|| ExportError::Unannotated {
        url: doc.url.clone(),
        field: "relevance",
    })?;
    let e = xml::escape;
    let mut s = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<cesDoc version=\"0.4\">\n  <cesHeader>\n");
    let _ = writeln!(s, "    <url>{}</url>", e(&doc.url));
    let _ = writeln!(
        s,
        "    <fetchedAt>{}</fetchedAt>",
        meta.fetched_at.to_rfc3339_opts(SecondsFormat::Secs, true)
    );
    let _ = writeln!(s, "    <language iso639=\"{main}\"/>");
    let _ = writeln!(s, "    <title>{}</title>", e(&doc.title_text));
    let _ = writeln!(s, "    <keywords>{}</keywords>", e(&doc.keywords_text));
    if relevance.matched_terms.is_empty() {
        let _ = writeln!(s, "    <relevance score=\"{}\"/>", format_score(relevance.value));
    } else {
        let _ = writeln!(s, "    <relevance score=\"{}\">", format_score(relevance.value));
        for m in &relevance.matched_terms {
            let _ = writeln!(
                s,
                "      <term class=\"{}\" location=\"{}\" count=\"{}\">{}</term>",
                e(&m.topic_class),
                m.location,
                m.count,
                e(&m.surface)
            );
        }
        s.push_str("    </relevance>\n");
    }
    s.push_str("  </cesHeader>\n  <text>\n");
    if doc.blocks.is_empty() {
        s.push_str("    <body/>\n");
    } else {
        s.push_str("    <body>\n");
        for (i, b) in doc.blocks.iter().enumerate() {
            let _ = write!(s, "      <p id=\"p{}\" tagpath=\"{}\"", i + 1, e(&b.tag_path));
            if let Some(l) = b.language.filter(|l| *l != main) {
                let _ = write!(s, " lang=\"{l}\"");
            }
            if b.is_boilerplate {
                s.push_str(" crawlinfo=\"boilerplate\"");
            }
            let _ = writeln!(s, ">{}</p>", e(&b.text));
        }
        s.push_str("    </body>\n");
    }
    s.push_str("  </text>\n</cesDoc>\n");
    Ok(s)
}

fn child<'a>(parent: &'a Element, name: &str, path: &str) -> Result<&'a Element, ExportError> {
    parent
        .child(name)
        .ok_or_else(|| schema(path, format!("missing <{name}>")))
}

pub fn read_document_xml(text: &str) -> Result<(ParsedDoc, CrawlMeta), ExportError> {
    let root = xml::parse(text)?;
    if root.name != "cesDoc" {
        return Err(schema(&root.name, "root element must be <cesDoc>"));
    }
    let header = child(&root, "cesHeader", "cesDoc")?;
    let hp = "cesDoc/cesHeader";
    let url = child(header, "url", hp)?.text();
    let fetched_raw = child(header, "fetchedAt", hp)?.text();
    let fetched_at = DateTime::parse_from_rfc3339(&fetched_raw)
        .map_err(|err| schema(&format!("{hp}/fetchedAt"), err.to_string()))?
        .with_timezone(&Utc);
    let lang_el = child(header, "language", hp)?;
    let main = lang_el
        .attr("iso639")
        .and_then(|l| Lang::new(l).ok())
        .ok_or_else(|| schema(&format!("{hp}/language"), "missing or invalid iso639"))?;
    let title_text = child(header, "title", hp)?.text();
    let keywords_text = child(header, "keywords", hp)?.text();
    let rel = child(header, "relevance", hp)?;
    let rp = format!("{hp}/relevance");
    let value: f64 = rel
        .attr("score")
        .and_then(|v| v.parse().ok())
        .filter(|v: &f64| v.is_finite() && *v >= 0.0)
        .ok_or_else(|| schema(&rp, "missing or invalid score"))?;
    let mut matched_terms = Vec::new();
    for t in rel.children_named("term") {
        let tp = format!("{rp}/term");
        let location = t
            .attr("location")
            .and_then(Location::parse)
            .ok_or_else(|| schema(&tp, "bad location"))?;
        let count = t
            .attr("count")
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| schema(&tp, "bad count"))?;
        matched_terms.push(MatchedTerm {
            surface: t.text(),
            topic_class: t.attr("class").unwrap_or("").to_string(),
            location,
            count,
        });
    }
    let text_el = child(&root, "text", "cesDoc")?;
    let body = child(text_el, "body", "cesDoc/text")?;
    let mut blocks = Vec::new();
    for p in body.children_named("p") {
        let pp = "cesDoc/text/body/p";
        let tag_path = p.attr("tagpath").ok_or_else(|| schema(pp, "missing tagpath"))?;
        let mut block = Block::new(tag_path, &p.text());
        block.language = match p.attr("lang") {
            Some(l) => Some(Lang::new(l).map_err(|err| schema(pp, err.to_string()))?),
            None => Some(main),
        };
        block.is_boilerplate = match p.attr("crawlinfo") {
            None => false,
            Some("boilerplate") => true,
            Some(other) => return Err(schema(pp, format!("unknown crawlinfo {other:?}"))),
        };
        blocks.push(block);
    }
    let doc = ParsedDoc {
        url,
        title: tokenize(&title_text),
        title_text,
        meta_keywords: tokenize(&keywords_text),
        keywords_text,
        blocks,
        links: Vec::new(),
        main_language: Some(main),
        relevance: Some(RelevanceScore {
            value,
            matched_terms,
        }),
    };
    Ok((doc, CrawlMeta { fetched_at }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexRow {
    /// Path relative to the output directory, e.g. `docs/000001.xml`.
    pub file: String,
    pub url: String,
    pub score: f64,
    pub language: Lang,
}

pub const INDEX_HEADER: &str = "file\turl\tscore\tlanguage";

pub fn format_index(rows: &[IndexRow]) -> String {
    let mut s = format!("{INDEX_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{}\t{}\t{}\t{}", r.file, r.url, format_score(r.score), r.language);
    }
    s
}

pub fn parse_index(text: &str) -> Result<Vec<IndexRow>, ExportError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 && line.starts_with("file\t") {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let bad = |m: &str| schema(&format!("index.tsv:{}", i + 1), m);
        if f.len() != 4 {
            return Err(bad("expected 4 columns"));
        }
        rows.push(IndexRow {
            file: f[0].to_string(),
            url: f[1].to_string(),
            score: f[2].parse().map_err(|_| bad("bad score"))?,
            language: Lang::new(f[3]).map_err(|_| bad("bad language"))?,
        });
    }
    Ok(rows)
}

pub fn read_index(path: &Path) -> Result<Vec<IndexRow>, ExportError> {
    let text = fs::read_to_string(path).map_err(|source| ExportError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_index(&text)
}

/// Writes `out/docs/NNNNNN.xml` files and `out/index.tsv`.
#[derive(Debug)]
pub struct CorpusWriter {
    out: PathBuf,
    rows: Vec<IndexRow>,
}

impl CorpusWriter {
    pub fn create(out: &Path) -> Result<Self, ExportError> {
        let docs = out.join("docs");
        fs::create_dir_all(&docs).map_err(|source| ExportError::Io {
            path: docs.display().to_string(),
            source,
        })?;
        Ok(CorpusWriter {
            out: out.to_path_buf(),
            rows: Vec::new(),
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    pub fn docs_dir(&self) -> PathBuf {
        self.out.join("docs")
    }

    pub fn rows(&self) -> &[IndexRow] {
        &self.rows
    }

    /// Writes the next document and returns its 1-based number and file name.
    pub fn write(&mut self, doc: &ParsedDoc, meta: &CrawlMeta) -> Result<(usize, String), ExportError> {
        let xml = write_document_xml(doc, meta)?;
        let n = self.rows.len() + 1;
        let name = format!("{n:06}.xml");
        let path = self.docs_dir().join(&name);
        fs::write(&path, xml).map_err(|source| ExportError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.rows.push(IndexRow {
            file: format!("docs/{name}"),
            url: doc.url.clone(),
            score: doc.relevance.as_ref().map_or(0.0, |r| r.value),
            language: doc.main_language.expect("checked by write_document_xml"),
        });
        Ok((n, name))
    }

    pub fn finish(&self) -> Result<PathBuf, ExportError> {
        let path = self.out.join("index.tsv");
        fs::write(&path, format_index(&self.rows)).map_err(|source| ExportError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(path)
    }
}
