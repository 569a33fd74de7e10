//! Minimal XML support: escaping for the writers and a small non-validating
//! reader used to load exported documents, pair lists and TMX files back.
//!
//! The reader accepts the subset the writers produce plus comments,
//! processing instructions and a DOCTYPE line. It rejects anything that is
//! not well-formed (unbalanced tags, bad entities, duplicate attributes,
//! stray markup characters, multiple roots).

use thiserror::Error;

/// Escapes text for element content and double-quoted attribute values.
pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            // Characters not allowed in XML 1.0 are dropped.
            c if is_xml_char(c) => out.push(c),
            _ => {}
        }
    }
    out
}

fn is_xml_char(c: char) -> bool {
    matches!(c, '\t' | '\n' | '\r' | '\u{20}'..='\u{D7FF}' | '\u{E000}'..='\u{FFFD}' | '\u{10000}'..='\u{10FFFF}')
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Element(Element),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Node>,
}

impl Element {
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn elements(&self) -> impl Iterator<Item = &Element> {
        self.children.iter().filter_map(|n| match n {
            Node::Element(e) => Some(e),
            Node::Text(_) => None,
        })
    }

    pub fn child(&self, name: &str) -> Option<&Element> {
        self.elements().find(|e| e.name == name)
    }

    pub fn children_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Element> + 'a {
        self.elements().filter(move |e| e.name == name)
    }

    /// Concatenated text of direct text children.
    pub fn text(&self) -> String {
        let mut s = String::new();
        for n in &self.children {
            if let Node::Text(t) = n {
                s.push_str(t);
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("XML error at byte {offset} (in /{path}): {message}")]
pub struct XmlError {
    pub offset: usize,
    pub path: String,
    pub message: String,
}

/// Parses a complete document and returns its root element.
pub fn parse(input: &str) -> Result<Element, XmlError> {
    Reader {
        src: input,
        pos: 0,
        stack: Vec::new(),
    }
    .document()
}

/// True when `input` is a well-formed document.
pub fn is_well_formed(input: &str) -> bool {
    parse(input).is_ok()
}

struct Reader<'a> {
    src: &'a str,
    pos: usize,
    stack: Vec<Element>,
}

impl<'a> Reader<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, XmlError> {
        let path = self
            .stack
            .iter()
            .map(|e| e.name.as_str())
            .collect::<Vec<_>>()
            .join("/");
        Err(XmlError {
            offset: self.pos,
            path,
            message: message.into(),
        })
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start_matches([' ', '\t', '\r', '\n']);
        self.pos = self.src.len() - trimmed.len();
    }

    fn skip_past(&mut self, end: &str, what: &str) -> Result<&'a str, XmlError> {
        match self.rest().find(end) {
            Some(i) => {
                let body = &self.rest()[..i];
                self.pos += i + end.len();
                Ok(body)
            }
            None => self.err(format!("unterminated {what}")),
        }
    }

    /// Skips comments, processing instructions and DOCTYPE. Returns true if
    /// something was skipped.
    fn misc(&mut self) -> Result<bool, XmlError> {
        let rest = self.rest();
        if rest.starts_with("<!--") {
            self.pos += 4;
            let body = self.skip_past("-->", "comment")?;
            if body.contains("--") {
                return self.err("'--' inside comment");
            }
            Ok(true)
        } else if rest.starts_with("<?") {
            self.pos += 2;
            self.skip_past("?>", "processing instruction")?;
            Ok(true)
        } else if rest.starts_with("<!DOCTYPE") {
            if self.stack.is_empty() {
                self.skip_past(">", "DOCTYPE")?;
                Ok(true)
            } else {
                self.err("DOCTYPE inside element")
            }
        } else {
            Ok(false)
        }
    }

    fn document(mut self) -> Result<Element, XmlError> {
        let rest = self.rest();
        if let Some(stripped) = rest.strip_prefix('\u{feff}') {
            self.pos = self.src.len() - stripped.len();
        }
        loop {
            self.skip_ws();
            if !self.misc()? {
                break;
            }
        }
        if !self.rest().starts_with('<') {
            return self.err("expected root element");
        }
        let root = self.element()?;
        loop {
            self.skip_ws();
            if self.pos == self.src.len() {
                return Ok(root);
            }
            if !self.misc()? {
                return self.err("content after root element");
            }
        }
    }

    fn name(&mut self) -> Result<&'a str, XmlError> {
        let rest = self.rest();
        let end = rest
            .char_indices()
            .find(|&(i, c)| {
                !(c.is_alphanumeric() || c == '_' || c == ':' || (i > 0 && (c == '-' || c == '.')))
            })
            .map(|(i, _)| i)
            .unwrap_or(rest.len());
        if end == 0 {
            return self.err("expected a name");
        }
        self.pos += end;
        Ok(&rest[..end])
    }

    fn element(&mut self) -> Result<Element, XmlError> {
        // At '<'.
        self.pos += 1;
        let name = self.name()?.to_string();
        let mut el = Element {
            name,
            attrs: Vec::new(),
            children: Vec::new(),
        };
        loop {
            let before = self.pos;
            self.skip_ws();
            let rest = self.rest();
            if rest.starts_with("/>") {
                self.pos += 2;
                return Ok(el);
            }
            if rest.starts_with('>') {
                self.pos += 1;
                break;
            }
            if self.pos == before {
                return self.err(format!("malformed start tag <{}>", el.name));
            }
            let key = self.name()?.to_string();
            self.skip_ws();
            if !self.rest().starts_with('=') {
                return self.err(format!("attribute {key} has no value"));
            }
            self.pos += 1;
            self.skip_ws();
            let quote = match self.rest().chars().next() {
                Some(q @ ('"' | '\'')) => q,
                _ => return self.err(format!("attribute {key} value is not quoted")),
            };
            self.pos += 1;
            let raw = match self.rest().find(quote) {
                Some(i) => {
                    let raw = &self.rest()[..i];
                    self.pos += i + 1;
                    raw
                }
                None => return self.err("unterminated attribute value"),
            };
            if raw.contains('<') {
                return self.err(format!("'<' in value of attribute {key}"));
            }
            let value = self.unescape(raw)?;
            if el.attrs.iter().any(|(k, _)| *k == key) {
                return self.err(format!("duplicate attribute {key}"));
            }
            el.attrs.push((key, value));
        }
        self.stack.push(el);
        let result = self.content();
        let mut el = self.stack.pop().expect("element on stack");
        let children = result?;
        el.children = children;
        Ok(el)
    }

    fn content(&mut self) -> Result<Vec<Node>, XmlError> {
        let mut children = Vec::new();
        let mut text = String::new();
        loop {
            let rest = self.rest();
            if rest.is_empty() {
                return self.err("unexpected end of input");
            }
            if rest.starts_with("</") {
                self.pos += 2;
                let name = self.name()?;
                self.skip_ws();
                if !self.rest().starts_with('>') {
                    return self.err("malformed end tag");
                }
                self.pos += 1;
                let open = &self.stack.last().expect("element on stack").name;
                if name != open {
                    return self.err(format!("end tag </{name}> does not match <{open}>"));
                }
                if !text.is_empty() {
                    children.push(Node::Text(text));
                }
                return Ok(children);
            }
            if rest.starts_with("<![CDATA[") {
                self.pos += 9;
                let body = self.skip_past("]]>", "CDATA section")?;
                text.push_str(body);
                continue;
            }
            if self.misc()? {
                continue;
            }
            if rest.starts_with('<') {
                if !text.is_empty() {
                    children.push(Node::Text(std::mem::take(&mut text)));
                }
                let child = self.element()?;
                children.push(Node::Element(child));
                continue;
            }
            let end = rest.find('<').unwrap_or(rest.len());
            let raw = &rest[..end];
            if raw.contains("]]>") {
                return self.err("']]>' in text");
            }
            let decoded = self.unescape(raw)?;
            text.push_str(&decoded);
            self.pos += end;
        }
    }

    fn unescape(&self, raw: &str) -> Result<String, XmlError> {
        if !raw.contains('&') {
            return Ok(raw.to_string());
        }
        let mut out = String::with_capacity(raw.len());
        let mut rest = raw;
        while let Some(i) = rest.find('&') {
            out.push_str(&rest[..i]);
            rest = &rest[i + 1..];
            let Some(semi) = rest.find(';') else {
                return self.err("unterminated entity reference");
            };
            let entity = &rest[..semi];
            let c = match entity {
                "lt" => '<',
                "gt" => '>',
                "amp" => '&',
                "quot" => '"',
                "apos" => '\'',
                _ => {
                    let code = if let Some(hex) = entity
                        .strip_prefix("#x")
                        .or_else(|| entity.strip_prefix("#X"))
                    {
                        u32::from_str_radix(hex, 16).ok()
                    } else if let Some(dec) = entity.strip_prefix('#') {
                        dec.parse().ok()
                    } else {
                        None
                    };
                    match code.and_then(char::from_u32).filter(|c| is_xml_char(*c)) {
                        Some(c) => c,
                        None => return self.err(format!("unknown entity &{entity};")),
                    }
                }
            };
            out.push(c);
            rest = &rest[semi + 1..];
        }
        out.push_str(rest);
        Ok(out)
    }
}
