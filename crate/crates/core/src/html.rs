//! Turns raw page bytes into a [`ParsedDoc`]: UTF-8 text, title and keyword
//! metadata, text blocks with tag paths, and outgoing links with context
//! windows.
//!
//! The HTML reader is a permissive tag-soup lexer. It never fails: unclosed
//! elements are closed implicitly, stray end tags are ignored and a lone `<`
//! that does not start a tag is kept as text.

use std::ops::Range;

use encoding_rs::{Encoding, UTF_8, WINDOWS_1252};
use log::warn;
use regex::bytes::Regex;
use std::sync::OnceLock;

use crate::frontier::normalize_url;
use crate::tokenize::{token_spans, tokenize};
use crate::topic::RelevanceScore;
use crate::xml::escape;
use crate::Lang;

/// Tokens taken on each side of an anchor for its context window.
pub const DEFAULT_LINK_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub tag_path: String,
    pub text: String,
    pub tokens: usize,
    pub linked_tokens: usize,
    pub language: Option<Lang>,
    pub is_boilerplate: bool,
}

impl Block {
    /// A link-free block at `tag_path`.
    pub fn new(tag_path: &str, text: &str) -> Self {
        Block {
            tag_path: tag_path.to_string(),
            text: text.to_string(),
            tokens: token_spans(text).len(),
            linked_tokens: 0,
            language: None,
            is_boilerplate: false,
        }
    }

    pub fn chars(&self) -> usize {
        self.text.chars().count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkRef {
    pub href: String,
    pub anchor_tokens: Vec<String>,
    pub context_tokens: Vec<String>,
    /// Index of the block holding the anchor; `None` when the anchor has no
    /// text of its own and sits outside any emitted block.
    pub source_block: Option<usize>,
    /// Token range of the anchor inside its block.
    pub anchor_range: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedDoc {
    pub url: String,
    pub title_text: String,
    pub title: Vec<String>,
    pub keywords_text: String,
    pub meta_keywords: Vec<String>,
    pub blocks: Vec<Block>,
    pub links: Vec<LinkRef>,
    pub main_language: Option<Lang>,
    pub relevance: Option<RelevanceScore>,
}

impl ParsedDoc {
    /// Whether block `i` counts as main-language content.
    pub fn is_content(&self, i: usize) -> bool {
        let b = &self.blocks[i];
        !b.is_boilerplate
            && match (b.language, self.main_language) {
                (Some(l), Some(m)) => l == m,
                _ => true,
            }
    }

    /// Body tokens used for relevance scoring.
    pub fn body_tokens(&self) -> Vec<String> {
        (0..self.blocks.len())
            .filter(|&i| self.is_content(i))
            .flat_map(|i| tokenize(&self.blocks[i].text))
            .collect()
    }

    /// Characters of non-boilerplate text.
    pub fn content_chars(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| !b.is_boilerplate)
            .map(Block::chars)
            .sum()
    }

    /// Texts of the content blocks, in order.
    pub fn content_texts(&self) -> Vec<&str> {
        (0..self.blocks.len())
            .filter(|&i| self.is_content(i))
            .map(|i| self.blocks[i].text.as_str())
            .collect()
    }

    pub fn tag_sequence(&self) -> Vec<&str> {
        self.blocks.iter().map(|b| b.tag_path.as_str()).collect()
    }
}

/// Extracts the `charset` parameter of a Content-Type header value.
pub fn charset_from_content_type(content_type: &str) -> Option<String> {
    content_type.split(';').skip(1).find_map(|param| {
        let (k, v) = param.split_once('=')?;
        if k.trim().eq_ignore_ascii_case("charset") {
            let v = v.trim().trim_matches(['"', '\'']).trim();
            (!v.is_empty()).then(|| v.to_ascii_lowercase())
        } else {
            None
        }
    })
}

/// Looks for a charset declaration in the first 1024 bytes of an HTML page.
pub fn sniff_meta_charset(body: &[u8]) -> Option<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r#"(?i-u)<meta[^>]*?charset\s*=\s*["']?\s*([A-Za-z0-9_.:-]+)"#).unwrap()
    });
    let head = &body[..body.len().min(1024)];
    re.captures(head)
        .map(|c| String::from_utf8_lossy(&c[1]).to_ascii_lowercase())
}

/// Decodes page bytes to UTF-8.
///
/// The HTTP charset wins over the meta charset, which wins over detection.
/// Detection honours a byte-order mark, then accepts valid UTF-8, and
/// otherwise falls back to windows-1252 (a superset of Latin-1's printable
/// range). Unknown labels are ignored. A leading BOM never reaches the output
/// and malformed sequences become U+FFFD.
pub fn normalize_encoding(
    body: &[u8],
    http_charset: Option<&str>,
    html_meta_charset: Option<&str>,
) -> String {
    let declared = [http_charset, html_meta_charset]
        .into_iter()
        .flatten()
        .find_map(|label| Encoding::for_label(label.trim().as_bytes()));
    let encoding = match declared {
        Some(e) => e,
        None => match Encoding::for_bom(body) {
            Some((e, _)) => e,
            None if std::str::from_utf8(body).is_ok() => UTF_8,
            None => WINDOWS_1252,
        },
    };
    // `decode_with_bom_removal` strips the declared encoding's own BOM.
    let (text, _) = encoding.decode_with_bom_removal(body);
    match text.strip_prefix('\u{feff}') {
        Some(rest) => rest.to_string(),
        None => text.into_owned(),
    }
}

/// Tokens of the anchor plus up to `window` tokens on each side.
pub fn link_context(block_tokens: &[String], anchor: Range<usize>, window: usize) -> Vec<String> {
    let end = anchor.end.min(block_tokens.len());
    let start = anchor.start.min(end);
    let lo = start.saturating_sub(window);
    let hi = (end + window).min(block_tokens.len());
    block_tokens[lo..hi].to_vec()
}

fn is_block_element(name: &str) -> bool {
    matches!(
        name,
        "address"
            | "article"
            | "aside"
            | "blockquote"
            | "body"
            | "caption"
            | "center"
            | "dd"
            | "details"
            | "dialog"
            | "div"
            | "dl"
            | "dt"
            | "fieldset"
            | "figcaption"
            | "figure"
            | "footer"
            | "form"
            | "h1"
            | "h2"
            | "h3"
            | "h4"
            | "h5"
            | "h6"
            | "head"
            | "header"
            | "hr"
            | "html"
            | "legend"
            | "li"
            | "main"
            | "menu"
            | "nav"
            | "ol"
            | "option"
            | "p"
            | "pre"
            | "section"
            | "select"
            | "summary"
            | "table"
            | "tbody"
            | "td"
            | "tfoot"
            | "th"
            | "thead"
            | "tr"
            | "ul"
    )
}

fn is_void_element(name: &str) -> bool {
    matches!(
        name,
        "area"
            | "base"
            | "br"
            | "col"
            | "embed"
            | "hr"
            | "img"
            | "input"
            | "link"
            | "meta"
            | "param"
            | "source"
            | "track"
            | "wbr"
    )
}

/// Elements that close an open element of the same name when they start.
fn closes_same(name: &str) -> bool {
    matches!(name, "p" | "li" | "dt" | "dd" | "td" | "th" | "tr" | "option")
}

fn named_entity(name: &str) -> Option<char> {
    Some(match name {
        "amp" | "AMP" => '&',
        "lt" | "LT" => '<',
        "gt" | "GT" => '>',
        "quot" | "QUOT" => '"',
        "apos" => '\'',
        "nbsp" => '\u{a0}',
        "copy" => '©',
        "reg" => '®',
        "trade" => '™',
        "hellip" => '…',
        "mdash" => '—',
        "ndash" => '–',
        "laquo" => '«',
        "raquo" => '»',
        "lsquo" => '‘',
        "rsquo" => '’',
        "ldquo" => '“',
        "rdquo" => '”',
        "bull" => '•',
        "middot" => '·',
        "euro" => '€',
        "pound" => '£',
        "deg" => '°',
        "sect" => '§',
        "shy" => '\u{ad}',
        "aacute" => 'á',
        "agrave" => 'à',
        "acirc" => 'â',
        "auml" => 'ä',
        "ccedil" => 'ç',
        "eacute" => 'é',
        "egrave" => 'è',
        "ecirc" => 'ê',
        "euml" => 'ë',
        "iacute" => 'í',
        "icirc" => 'î',
        "iuml" => 'ï',
        "ntilde" => 'ñ',
        "oacute" => 'ó',
        "ocirc" => 'ô',
        "ouml" => 'ö',
        "uacute" => 'ú',
        "ugrave" => 'ù',
        "ucirc" => 'û',
        "uuml" => 'ü',
        "szlig" => 'ß',
        "Aacute" => 'Á',
        "Agrave" => 'À',
        "Auml" => 'Ä',
        "Ccedil" => 'Ç',
        "Eacute" => 'É',
        "Egrave" => 'È',
        "Ouml" => 'Ö',
        "Uuml" => 'Ü',
        "Ntilde" => 'Ñ',
        _ => return None,
    })
}

/// Decodes character references. Unknown or malformed references are kept
/// literally.
pub fn decode_entities(raw: &str) -> String {
    if !raw.contains('&') {
        return raw.to_string();
    }
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(i) = rest.find('&') {
        out.push_str(&rest[..i]);
        rest = &rest[i..];
        let body = &rest[1..];
        let end = body
            .char_indices()
            .take(32)
            .find(|&(_, c)| !(c.is_ascii_alphanumeric() || c == '#'))
            .map(|(j, _)| j);
        let decoded = end.and_then(|j| {
            if !body[j..].starts_with(';') {
                return None;
            }
            let name = &body[..j];
            let c = if let Some(num) = name.strip_prefix('#') {
                let code = match num.strip_prefix(['x', 'X']) {
                    Some(hex) => u32::from_str_radix(hex, 16).ok(),
                    None => num.parse().ok(),
                };
                code.and_then(char::from_u32)
                    .filter(|c| *c != '\0')
                    .or(Some('\u{fffd}'))
            } else {
                named_entity(name)
            }?;
            Some((c, j + 2))
        });
        match decoded {
            Some((c, len)) => {
                out.push(c);
                rest = &rest[len..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

struct Tag<'a> {
    name: String,
    attrs: Vec<(String, String)>,
    end: bool,
    raw_len: usize,
    _src: &'a str,
}

impl Tag<'_> {
    fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }
}

/// Lexes a tag starting at `<`. Returns `None` when the `<` does not open a
/// tag, in which case it is text.
fn lex_tag(s: &str) -> Option<Tag<'_>> {
    let bytes = s.as_bytes();
    let mut i = 1;
    let end = bytes.get(1) == Some(&b'/');
    if end {
        i += 1;
    }
    if !bytes.get(i).is_some_and(u8::is_ascii_alphabetic) {
        return None;
    }
    let name_start = i;
    while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'>' && bytes[i] != b'/'
    {
        i += 1;
    }
    let name = s[name_start..i].to_ascii_lowercase();
    let mut attrs = Vec::new();
    loop {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'/') {
            i += 1;
        }
        if i >= bytes.len() {
            // Unterminated tag: consume the rest of the input.
            return Some(Tag {
                name,
                attrs,
                end,
                raw_len: s.len(),
                _src: s,
            });
        }
        if bytes[i] == b'>' {
            return Some(Tag {
                name,
                attrs,
                end,
                raw_len: i + 1,
                _src: s,
            });
        }
        let key_start = i;
        while i < bytes.len()
            && !bytes[i].is_ascii_whitespace()
            && !matches!(bytes[i], b'=' | b'>' | b'/')
        {
            i += 1;
        }
        let key = s[key_start..i].to_ascii_lowercase();
        if key.is_empty() {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < bytes.len() && bytes[j].is_ascii_whitespace() {
            j += 1;
        }
        let mut value = String::new();
        if bytes.get(j) == Some(&b'=') {
            j += 1;
            while j < bytes.len() && bytes[j].is_ascii_whitespace() {
                j += 1;
            }
            match bytes.get(j) {
                Some(&q @ (b'"' | b'\'')) => {
                    let vstart = j + 1;
                    let vend = s[vstart..]
                        .find(q as char)
                        .map(|k| vstart + k)
                        .unwrap_or(s.len());
                    value = decode_entities(&s[vstart..vend]);
                    i = (vend + 1).min(s.len());
                }
                _ => {
                    let vstart = j;
                    while j < bytes.len() && !bytes[j].is_ascii_whitespace() && bytes[j] != b'>' {
                        j += 1;
                    }
                    value = decode_entities(&s[vstart..j]);
                    i = j;
                }
            }
        }
        if !attrs.iter().any(|(k, _)| *k == key) {
            attrs.push((key, value));
        }
    }
}

fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.len() > h.len() {
        return None;
    }
    (0..=h.len() - n.len()).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

struct PendingLink {
    href: Option<String>,
    block: Option<(usize, Range<usize>)>,
}

struct Builder {
    base: String,
    stack: Vec<String>,
    buf: String,
    /// Byte ranges of anchors in `buf`, with the index of their link.
    ranges: Vec<(Range<usize>, usize)>,
    open_anchor: Option<(usize, usize)>,
    links: Vec<PendingLink>,
    blocks: Vec<Block>,
    br_run: usize,
}

impl Builder {
    fn push_text(&mut self, text: &str) {
        for c in text.chars() {
            if c.is_whitespace() {
                if !self.buf.is_empty() && !self.buf.ends_with(' ') {
                    self.buf.push(' ');
                }
            } else {
                self.buf.push(c);
                self.br_run = 0;
            }
        }
    }

    fn tag_path(&self) -> String {
        let last_block = self.stack.iter().rposition(|n| is_block_element(n));
        let mut path = vec!["html", "body"];
        if let Some(last) = last_block {
            path.extend(
                self.stack[..=last]
                    .iter()
                    .map(String::as_str)
                    .filter(|n| !matches!(*n, "html" | "body" | "head")),
            );
        }
        path.join("/")
    }

    fn flush(&mut self) {
        if let Some((link, start)) = self.open_anchor {
            let end = self.buf.len();
            self.ranges.push((start..end, link));
            self.open_anchor = Some((link, 0));
        }
        let text = self.buf.trim_end().to_string();
        let ranges = std::mem::take(&mut self.ranges);
        self.buf.clear();
        self.br_run = 0;
        if text.is_empty() {
            return;
        }
        let spans = token_spans(&text);
        let tokens: Vec<String> = spans.iter().map(|r| text[r.clone()].to_lowercase()).collect();
        let mut linked = vec![false; spans.len()];
        let index = self.blocks.len();
        for (range, link) in ranges {
            let first = spans.iter().position(|s| s.end > range.start);
            let hit: Vec<usize> = spans
                .iter()
                .enumerate()
                .filter(|(_, s)| s.start < range.end && s.end > range.start)
                .map(|(i, _)| i)
                .collect();
            for &i in &hit {
                linked[i] = true;
            }
            let pending = &mut self.links[link];
            if pending.block.is_none() {
                let tok_range = match (hit.first(), hit.last()) {
                    (Some(&a), Some(&b)) => a..b + 1,
                    _ => {
                        let p = first.unwrap_or(spans.len());
                        p..p
                    }
                };
                pending.block = Some((index, tok_range));
            }
        }
        self.blocks.push(Block {
            tag_path: self.tag_path(),
            linked_tokens: linked.iter().filter(|l| **l).count(),
            tokens: tokens.len(),
            text,
            language: None,
            is_boilerplate: false,
        });
    }

    fn close_anchor(&mut self) {
        if let Some((link, start)) = self.open_anchor.take() {
            let end = self.buf.len();
            self.ranges.push((start..end, link));
        }
    }

    fn open(&mut self, name: &str) {
        if closes_same(name) {
            if let Some(pos) = self.stack.iter().rposition(|n| is_block_element(n)) {
                if self.stack[pos] == name {
                    self.stack.truncate(pos);
                }
            }
        } else if is_block_element(name) {
            // A block start closes an open paragraph.
            if let Some(pos) = self.stack.iter().rposition(|n| is_block_element(n)) {
                if self.stack[pos] == "p" {
                    self.stack.truncate(pos);
                }
            }
        }
        self.stack.push(name.to_string());
    }

    fn close(&mut self, name: &str) {
        if let Some(pos) = self.stack.iter().rposition(|n| n == name) {
            self.stack.truncate(pos);
        }
    }
}

/// Parses an HTML page. `base_url` resolves relative links.
pub fn parse_html(text: &str, base_url: &str) -> ParsedDoc {
    let mut doc = ParsedDoc {
        url: base_url.to_string(),
        ..ParsedDoc::default()
    };
    if text.contains('\0') {
        warn!("{base_url}: input looks binary, no content extracted");
        return doc;
    }
    let mut b = Builder {
        base: base_url.to_string(),
        stack: Vec::new(),
        buf: String::new(),
        ranges: Vec::new(),
        open_anchor: None,
        links: Vec::new(),
        blocks: Vec::new(),
        br_run: 0,
    };
    let mut title_seen = false;
    let mut pos = 0;
    while pos < text.len() {
        let rest = &text[pos..];
        let lt = match rest.find('<') {
            Some(i) => i,
            None => {
                b.push_text(&decode_entities(rest));
                break;
            }
        };
        if lt > 0 {
            b.push_text(&decode_entities(&rest[..lt]));
            pos += lt;
            continue;
        }
        if let Some(comment) = rest.strip_prefix("<!--") {
            pos += comment.find("-->").map(|i| i + 7).unwrap_or(rest.len());
            continue;
        }
        if rest.starts_with("<!") || rest.starts_with("<?") {
            pos += rest.find('>').map(|i| i + 1).unwrap_or(rest.len());
            continue;
        }
        let Some(tag) = lex_tag(rest) else {
            b.push_text("<");
            pos += 1;
            continue;
        };
        pos += tag.raw_len;
        let name = tag.name.as_str();
        if tag.end {
            match name {
                "a" => b.close_anchor(),
                "br" => handle_br(&mut b),
                _ if is_block_element(name) => {
                    b.flush();
                    b.close(name);
                }
                _ => b.close(name),
            }
            if name != "br" {
                b.br_run = 0;
            }
            continue;
        }
        if name != "br" {
            b.br_run = 0;
        }
        match name {
            "script" | "style" | "title" | "textarea" => {
                let close = format!("</{name}");
                let rel = find_ci(&text[pos..], &close);
                let body = &text[pos..pos + rel.unwrap_or(text.len() - pos)];
                pos += rel.unwrap_or(text.len() - pos);
                if let Some(gt) = text[pos..].find('>') {
                    pos += gt + 1;
                }
                if name == "title" && !title_seen {
                    title_seen = true;
                    let mut t = String::new();
                    for w in decode_entities(body).split_whitespace() {
                        if !t.is_empty() {
                            t.push(' ');
                        }
                        t.push_str(w);
                    }
                    doc.title_text = t;
                } else if name == "textarea" {
                    b.push_text(&decode_entities(body));
                }
            }
            "br" => handle_br(&mut b),
            "base" => {
                if let Some(Ok(u)) = tag.attr("href").map(|h| normalize_url(h, base_url)) {
                    b.base = u;
                }
            }
            "meta" => {
                if tag
                    .attr("name")
                    .is_some_and(|n| n.eq_ignore_ascii_case("keywords"))
                {
                    let content = tag.attr("content").unwrap_or("");
                    doc.keywords_text = content.split_whitespace().collect::<Vec<_>>().join(" ");
                }
            }
            "a" => {
                b.close_anchor();
                if let Some(href) = tag.attr("href") {
                    let href = href.trim();
                    let resolved = if href.is_empty() {
                        None
                    } else {
                        normalize_url(href, &b.base).ok()
                    };
                    b.links.push(PendingLink {
                        href: resolved,
                        block: None,
                    });
                    b.open_anchor = Some((b.links.len() - 1, b.buf.len()));
                }
            }
            _ if is_void_element(name) => {
                if is_block_element(name) {
                    b.flush();
                }
            }
            _ => {
                if is_block_element(name) {
                    b.flush();
                }
                b.open(name);
            }
        }
    }
    b.close_anchor();
    b.flush();

    let block_tokens: Vec<Vec<String>> = b.blocks.iter().map(|bl| tokenize(&bl.text)).collect();
    for link in b.links {
        let Some(href) = link.href else { continue };
        let (source_block, anchor_range, anchor_tokens, context_tokens) = match link.block {
            Some((i, r)) => {
                let toks = &block_tokens[i];
                (
                    Some(i),
                    r.clone(),
                    toks[r.clone()].to_vec(),
                    link_context(toks, r, DEFAULT_LINK_WINDOW),
                )
            }
            None => (None, 0..0, Vec::new(), Vec::new()),
        };
        doc.links.push(LinkRef {
            href,
            anchor_tokens,
            context_tokens,
            source_block,
            anchor_range,
        });
    }
    doc.title = tokenize(&doc.title_text);
    doc.meta_keywords = tokenize(&doc.keywords_text);
    doc.blocks = b.blocks;
    doc
}

fn handle_br(b: &mut Builder) {
    b.br_run += 1;
    if b.br_run >= 2 {
        b.flush();
        // Keep counting so a third <br> does not start a new run.
        b.br_run = 2;
    } else {
        b.push_text(" ");
        b.br_run = 1;
    }
}

/// Wraps plain text as a single block.
pub fn parse_plain(text: &str, url: &str) -> ParsedDoc {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut doc = ParsedDoc {
        url: url.to_string(),
        ..ParsedDoc::default()
    };
    if !collapsed.is_empty() {
        doc.blocks.push(Block::new("html/body/pre", &collapsed));
    }
    doc
}

/// Renders the document's title, keywords and blocks back to HTML.
///
/// Parsing the output yields the same title, keywords, block texts and tag
/// paths. Links are not rendered.
pub fn serialize(doc: &ParsedDoc) -> String {
    let mut out = String::from("<html><head>");
    if !doc.title_text.is_empty() {
        out.push_str(&format!("<title>{}</title>", escape(&doc.title_text)));
    }
    if !doc.keywords_text.is_empty() {
        out.push_str(&format!(
            "<meta name=\"keywords\" content=\"{}\">",
            escape(&doc.keywords_text)
        ));
    }
    out.push_str("</head><body>\n");
    for block in &doc.blocks {
        let segs: Vec<&str> = block
            .tag_path
            .split('/')
            .filter(|s| !matches!(*s, "html" | "body" | "head" | ""))
            .collect();
        for s in &segs {
            out.push_str(&format!("<{s}>"));
        }
        out.push_str(&escape(&block.text));
        for s in segs.iter().rev() {
            out.push_str(&format!("</{s}>"));
        }
        if segs.is_empty() {
            // Bare body text needs an explicit break from the next block.
            out.push_str("<br><br>");
        }
        out.push('\n');
    }
    out.push_str("</body></html>\n");
    out
}
