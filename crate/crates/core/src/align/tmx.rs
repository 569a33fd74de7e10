//! TMX 1.4b and TSV output for aligned segment pairs.

use std::fmt::Write as _;

use chrono::{DateTime, NaiveDateTime, Utc};
use thiserror::Error;

use crate::xml::{self, Element};
use crate::Lang;

#[derive(Debug, Clone, PartialEq)]
pub struct TmxMeta {
    pub creation_tool: String,
    pub creation_tool_version: String,
    pub creation_date: DateTime<Utc>,
}

impl TmxMeta {
    pub fn new(creation_date: DateTime<Utc>) -> Self {
        TmxMeta {
            creation_tool: "webcorpus".into(),
            creation_tool_version: env!("CARGO_PKG_VERSION").into(),
            creation_date,
        }
    }
}

const TMX_DATE: &str = "%Y%m%dT%H%M%SZ";

/// Renders segment pairs as a TMX 1.4b document.
pub fn to_tmx(pairs: &[(String, String)], lang_a: Lang, lang_b: Lang, meta: &TmxMeta) -> String {
    let mut s = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<tmx version=\"1.4\">\n");
    let _ = writeln!(
        s,
        "  <header creationtool=\"{}\" creationtoolversion=\"{}\" datatype=\"plaintext\" segtype=\"sentence\" adminlang=\"en\" srclang=\"{}\" o-tmf=\"webcorpus\" creationdate=\"{}\"/>",
        xml::escape(&meta.creation_tool),
        xml::escape(&meta.creation_tool_version),
        lang_a,
        meta.creation_date.format(TMX_DATE)
    );
    if pairs.is_empty() {
        s.push_str("  <body/>\n");
    } else {
        s.push_str("  <body>\n");
        for (i, (a, b)) in pairs.iter().enumerate() {
            let _ = writeln!(s, "    <tu tuid=\"{}\">", i + 1);
            for (lang, seg) in [(lang_a, a), (lang_b, b)] {
                let _ = writeln!(
                    s,
                    "      <tuv xml:lang=\"{lang}\"><seg>{}</seg></tuv>",
                    xml::escape(seg)
                );
            }
            s.push_str("    </tu>\n");
        }
        s.push_str("  </body>\n");
    }
    s.push_str("</tmx>\n");
    s
}

/// One `segment_a<TAB>segment_b` line per pair. Tabs and line breaks inside
/// segments become spaces.
pub fn to_tsv(pairs: &[(String, String)]) -> String {
    let clean = |s: &str| s.replace(['\t', '\n', '\r'], " ");
    pairs
        .iter()
        .map(|(a, b)| format!("{}\t{}\n", clean(a), clean(b)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tmx {
    pub srclang: Lang,
    pub creation_date: Option<DateTime<Utc>>,
    /// `(lang, segment)` lists, one per translation unit.
    pub units: Vec<Vec<(Lang, String)>>,
}

impl Tmx {
    /// Segment pairs for two languages, skipping units that lack either.
    pub fn pairs(&self, lang_a: Lang, lang_b: Lang) -> Vec<(String, String)> {
        self.units
            .iter()
            .filter_map(|u| {
                let find = |l| u.iter().find(|(x, _)| *x == l).map(|(_, s)| s.clone());
                Some((find(lang_a)?, find(lang_b)?))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TmxError {
    #[error(transparent)]
    Xml(#[from] xml::XmlError),
    #[error("{0}")]
    Schema(String),
}

fn lang_attr(e: &Element, name: &str) -> Result<Lang, TmxError> {
    let v = e
        .attr(name)
        .ok_or_else(|| TmxError::Schema(format!("<{}> without {name}", e.name)))?;
    Lang::new(v).map_err(|err| TmxError::Schema(err.to_string()))
}

pub fn read_tmx(text: &str) -> Result<Tmx, TmxError> {
    let root = xml::parse(text)?;
    if root.name != "tmx" {
        return Err(TmxError::Schema(format!("root is <{}>", root.name)));
    }
    let header = root
        .child("header")
        .ok_or_else(|| TmxError::Schema("missing <header>".into()))?;
    let srclang = lang_attr(header, "srclang")?;
    let creation_date = header
        .attr("creationdate")
        .and_then(|d| NaiveDateTime::parse_from_str(d, TMX_DATE).ok())
        .map(|d| d.and_utc());
    let body = root
        .child("body")
        .ok_or_else(|| TmxError::Schema("missing <body>".into()))?;
    let mut units = Vec::new();
    for tu in body.children_named("tu") {
        let mut unit = Vec::new();
        for tuv in tu.children_named("tuv") {
            let lang = lang_attr(tuv, "xml:lang")?;
            let seg = tuv
                .child("seg")
                .ok_or_else(|| TmxError::Schema("<tuv> without <seg>".into()))?;
            unit.push((lang, seg.text()));
        }
        units.push(unit);
    }
    Ok(Tmx {
        srclang,
        creation_date,
        units,
    })
}
