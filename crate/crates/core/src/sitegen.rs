//! Deterministic synthetic multilingual websites with ground-truth labels.
//!
//! A generated site is served through [`PageSource`], so the whole crawl
//! pipeline can run offline. Every label in [`GroundTruth`] is fixed at
//! construction time.
//!
//! Layout of a site with languages `[a, b, ...]`:
//!
//! - `/{lang}/index.html`: home page with a list of featured documents
//! - `/{lang}/sitemap.html`: links to every document of that language
//! - `/{lang}/doc-NNN.html`: documents; mirrored documents share `NNN`
//!   across languages, distractors have numbers used by one language only
//! - `/{lang}/{news,about,contact,privacy,terms}.html`: chrome pages
//! - `/robots.txt` disallows `/private/`
//! - `/` and `/old-home.html` redirect to the first language's home page
//! - `/missing.html` answers 404
//!
//! Distractors of the first language are short and those of the other
//! languages are long, so no distractor has a same-length counterpart.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::ops::Range;
use std::path::Path;
use std::time::Duration;

use chrono::{DateTime, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fetch::{PageSource, RawResponse, SourceError};
use crate::topic::{parse_topic_definition, TopicDefinition, TopicError};
use crate::xml;
use crate::Lang;

const SENTENCES: &str = include_str!("../data/sitegen/sentences.tsv");
const TITLES: &str = include_str!("../data/sitegen/titles.tsv");
const CHROME: &str = include_str!("../data/sitegen/chrome.tsv");

const TOPIC_FILES: [(Lang, &str); 5] = [
    (Lang::EN, include_str!("../data/topics/environment.en.tsv")),
    (Lang::FR, include_str!("../data/topics/environment.fr.tsv")),
    (Lang::EL, include_str!("../data/topics/environment.el.tsv")),
    (Lang::ES, include_str!("../data/topics/environment.es.tsv")),
    (Lang::DE, include_str!("../data/topics/environment.de.tsv")),
];

/// Relevance threshold the fixture pages are built around.
pub const FIXTURE_THRESHOLD: f64 = 0.05;

/// The bundled environment topic definition for `lang`.
pub fn fixture_topic(lang: Lang) -> Result<TopicDefinition, TopicError> {
    let text = TOPIC_FILES
        .iter()
        .find(|(l, _)| *l == lang)
        .map(|(_, t)| *t)
        .ok_or(TopicError::Empty)?;
    parse_topic_definition(text, lang, FIXTURE_THRESHOLD)
}

/// Raw text of the bundled topic file for `lang`.
pub fn fixture_topic_text(lang: Lang) -> Option<&'static str> {
    TOPIC_FILES.iter().find(|(l, _)| *l == lang).map(|(_, t)| *t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteSpec {
    pub pages_per_lang: usize,
    pub langs: Vec<Lang>,
    pub relevant_fraction: f64,
    pub boilerplate_templates: usize,
    /// Fraction of each language's documents that are mirrored in every
    /// language; the rest are distractors.
    pub pair_fraction: f64,
    /// Probability that a mirrored sentence is merged with its successor in
    /// the non-first languages.
    pub sentence_merge_rate: f64,
    /// Mean sentence count of a mirrored document.
    pub sentences_per_page: usize,
    pub hosts: usize,
}

impl Default for SiteSpec {
    fn default() -> Self {
        SiteSpec {
            pages_per_lang: 20,
            langs: vec![Lang::EN, Lang::FR],
            relevant_fraction: 0.5,
            boilerplate_templates: 3,
            pair_fraction: 1.0,
            sentence_merge_rate: 0.0,
            sentences_per_page: 12,
            hosts: 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum SiteError {
    #[error("unsupported language {0}")]
    UnsupportedLanguage(Lang),
    #[error("invalid site spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledBlock {
    pub text: String,
    pub boilerplate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageTruth {
    pub lang: Lang,
    pub relevant: bool,
    pub blocks: Vec<LabeledBlock>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruePair {
    pub url_a: String,
    pub url_b: String,
    pub sentences_a: Vec<String>,
    pub sentences_b: Vec<String>,
    /// Sentence index ranges of each bead, in order.
    pub beads: Vec<(Range<usize>, Range<usize>)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    pub relevant: BTreeSet<String>,
    /// Labels for every document page (index and chrome pages excluded).
    pub pages: BTreeMap<String, PageTruth>,
    /// Pairs between the first language and each other language.
    pub pairs: Vec<TruePair>,
    /// Mirrored pages other than documents (home, sitemap and chrome
    /// pages), as (first language URL, other language URL).
    pub chrome_pairs: Vec<(String, String)>,
}

impl GroundTruth {
    pub fn relevant_in(&self, lang: Lang) -> BTreeSet<String> {
        self.pages
            .iter()
            .filter(|(_, p)| p.lang == lang && p.relevant)
            .map(|(u, _)| u.clone())
            .collect()
    }

    /// Every parallel URL pair of the site, documents first.
    pub fn all_pairs(&self) -> Vec<(String, String)> {
        self.pairs
            .iter()
            .map(|p| (p.url_a.clone(), p.url_b.clone()))
            .chain(self.chrome_pairs.iter().cloned())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Resource {
    status: u16,
    content_type: String,
    location: Option<String>,
    body: Vec<u8>,
}

/// An in-memory website. Read-only once built, so it can serve many workers.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSite {
    resources: BTreeMap<String, Resource>,
    hosts: Vec<String>,
    now: DateTime<Utc>,
    latency: Duration,
}

/// Every synthetic response carries this fetch time, keeping exports
/// reproducible.
pub fn fixed_now() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2012, 5, 21, 9, 30, 0).unwrap()
}

impl SyntheticSite {
    pub fn host_url(&self, i: usize) -> &str {
        &self.hosts[i]
    }

    pub fn hosts(&self) -> &[String] {
        &self.hosts
    }

    /// Home page URL of `lang`.
    pub fn home(&self, lang: Lang) -> String {
        format!("{}/{lang}/index.html", self.hosts[0])
    }

    pub fn urls(&self) -> impl Iterator<Item = &str> {
        self.resources.keys().map(String::as_str)
    }

    pub fn body(&self, url: &str) -> Option<&[u8]> {
        self.resources.get(url).map(|r| r.body.as_slice())
    }

    /// Adds simulated network latency to every request.
    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    /// FNV-1a over every URL and response, in URL order.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for (url, r) in &self.resources {
            eat(url.as_bytes());
            eat(&r.status.to_be_bytes());
            eat(r.content_type.as_bytes());
            eat(r.location.as_deref().unwrap_or("").as_bytes());
            eat(&r.body);
        }
        h
    }

    /// Writes the site under `dir`: one file per resource plus
    /// `manifest.tsv` (url, status, content type, location, file).
    pub fn materialize(&self, dir: &Path) -> Result<(), SiteError> {
        let io_err = |p: &Path| {
            let path = p.display().to_string();
            move |source| SiteError::Io { path, source }
        };
        let mut manifest = String::from("url\tstatus\tcontent_type\tlocation\tfile\n");
        for (i, (url, r)) in self.resources.iter().enumerate() {
            let rel = url
                .split_once("://")
                .map_or(url.as_str(), |(_, rest)| rest)
                .replace(':', "_");
            let rel = if rel.ends_with('/') { format!("{rel}index") } else { rel };
            let file = format!("files/{i:05}_{}", rel.replace('/', "_"));
            let path = dir.join(&file);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
            fs::write(&path, &r.body).map_err(io_err(&path))?;
            let _ = writeln!(
                manifest,
                "{url}\t{}\t{}\t{}\t{file}",
                r.status,
                r.content_type,
                r.location.as_deref().unwrap_or("")
            );
        }
        let mpath = dir.join("manifest.tsv");
        fs::write(&mpath, manifest).map_err(io_err(&mpath))?;
        Ok(())
    }

    /// Loads a site written by [`materialize`](Self::materialize).
    pub fn load(dir: &Path) -> Result<Self, SiteError> {
        let mpath = dir.join("manifest.tsv");
        let text = fs::read_to_string(&mpath).map_err(|source| SiteError::Io {
            path: mpath.display().to_string(),
            source,
        })?;
        let mut resources = BTreeMap::new();
        let mut hosts = BTreeSet::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            let bad = |message: &str| SiteError::Format {
                path: format!("{}:{}", mpath.display(), i + 1),
                message: message.to_string(),
            };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(bad("expected 5 columns"));
            }
            let path = dir.join(f[4]);
            let body = fs::read(&path).map_err(|source| SiteError::Io {
                path: path.display().to_string(),
                source,
            })?;
            if let Some((scheme, rest)) = f[0].split_once("://") {
                let host = rest.split('/').next().unwrap_or("");
                hosts.insert(format!("{scheme}://{host}"));
            }
            resources.insert(
                f[0].to_string(),
                Resource {
                    status: f[1].parse().map_err(|_| bad("bad status"))?,
                    content_type: f[2].to_string(),
                    location: (!f[3].is_empty()).then(|| f[3].to_string()),
                    body,
                },
            );
        }
        Ok(SyntheticSite {
            resources,
            hosts: hosts.into_iter().collect(),
            now: fixed_now(),
            latency: Duration::ZERO,
        })
    }
}

impl PageSource for SyntheticSite {
    fn get(&self, url: &str, _timeout: Duration, _user_agent: &str) -> Result<RawResponse, SourceError> {
        if !self.latency.is_zero() {
            std::thread::sleep(self.latency);
        }
        let Some(r) = self.resources.get(url) else {
            return Ok(RawResponse::new(404, "text/html; charset=utf-8", NOT_FOUND));
        };
        let mut resp = RawResponse::new(r.status, &r.content_type, r.body.clone());
        if let Some(loc) = &r.location {
            resp.headers.push(("location".into(), loc.clone()));
        }
        Ok(resp)
    }

    fn now(&self) -> DateTime<Utc> {
        self.now
    }
}

const NOT_FOUND: &str = "<html><head><title>404</title></head><body><p>Not found</p></body></html>";

struct Pools {
    /// sentence id → per-language text, split by kind.
    env: Vec<HashMap<Lang, String>>,
    gen: Vec<HashMap<Lang, String>>,
    env_titles: Vec<HashMap<Lang, String>>,
    gen_titles: Vec<HashMap<Lang, String>>,
    chrome: HashMap<String, HashMap<Lang, String>>,
}

/// Language columns of a fixture header, after `skip` leading columns.
fn columns(header: &str, skip: usize) -> Vec<Lang> {
    header
        .split('\t')
        .skip(skip)
        .filter_map(|c| Lang::new(c.trim()).ok())
        .collect()
}

type Column = Vec<HashMap<Lang, String>>;

fn load_pools() -> Pools {
    fn kinded(text: &str) -> (Column, Column) {
        let mut lines = text.lines();
        let langs = columns(lines.next().unwrap_or(""), 2);
        let (mut env, mut gen) = (Vec::new(), Vec::new());
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split('\t').collect();
            let row: HashMap<Lang, String> = langs
                .iter()
                .zip(&f[2..])
                .map(|(l, t)| (*l, t.to_string()))
                .collect();
            if f[1] == "env" {
                env.push(row);
            } else {
                gen.push(row);
            }
        }
        (env, gen)
    }
    let (env, gen) = kinded(SENTENCES);
    let (env_titles, gen_titles) = kinded(TITLES);
    let mut lines = CHROME.lines();
    let langs = columns(lines.next().unwrap_or(""), 1);
    let chrome = lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split('\t').collect();
            let row = langs.iter().zip(&f[1..]).map(|(l, t)| (*l, t.to_string())).collect();
            (f[0].to_string(), row)
        })
        .collect();
    Pools {
        env,
        gen,
        env_titles,
        gen_titles,
        chrome,
    }
}

/// Languages the bundled fixture pools cover.
pub fn supported_languages() -> Vec<Lang> {
    columns(SENTENCES.lines().next().unwrap_or(""), 2)
}

/// A sentence reference: (is_env, pool index).
type SentRef = (bool, usize);

struct DocPlan {
    number: usize,
    relevant: bool,
    title: usize,
    paragraphs: Vec<Vec<SentRef>>,
    readmore: usize,
    related: Vec<usize>,
    template: usize,
}

enum Piece {
    Text(String),
    Link(String, String),
}

#[derive(Default)]
struct PageBuilder {
    html: String,
    blocks: Vec<LabeledBlock>,
}

impl PageBuilder {
    fn raw(&mut self, s: &str) {
        self.html.push_str(s);
    }

    fn block(&mut self, tag: &str, pieces: &[Piece], boilerplate: bool) {
        let _ = write!(self.html, "<{tag}>");
        let mut text = String::new();
        for p in pieces {
            match p {
                Piece::Text(t) => {
                    self.html.push_str(&xml::escape(t));
                    text.push_str(t);
                }
                Piece::Link(href, t) => {
                    let _ = write!(self.html, "<a href=\"{}\">{}</a>", xml::escape(href), xml::escape(t));
                    text.push_str(t);
                }
            }
        }
        let _ = writeln!(self.html, "</{tag}>");
        self.blocks.push(LabeledBlock { text, boilerplate });
    }

    fn list(&mut self, open: &str, close: &str, links: &[(String, String)]) {
        self.raw(open);
        self.raw("\n");
        for (href, text) in links {
            self.block("li", &[Piece::Link(href.clone(), text.clone())], true);
        }
        self.raw(close);
        self.raw("\n");
    }
}

struct Generator<'a> {
    spec: &'a SiteSpec,
    pools: Pools,
    hosts: Vec<String>,
}

impl Generator<'_> {
    fn chrome(&self, key: &str, lang: Lang) -> String {
        self.pools.chrome[key][&lang].clone()
    }

    fn doc_url(&self, lang: Lang, number: usize) -> String {
        let host = &self.hosts[number % self.hosts.len()];
        format!("{host}/{lang}/doc-{number:03}.html")
    }

    fn page_url(&self, lang: Lang, name: &str) -> String {
        format!("{}/{lang}/{name}.html", self.hosts[0])
    }

    fn title(&self, plan: &DocPlan, lang: Lang) -> String {
        let pool = if plan.relevant { &self.pools.env_titles } else { &self.pools.gen_titles };
        pool[plan.title][&lang].clone()
    }

    fn sentence(&self, s: SentRef, lang: Lang) -> String {
        let pool = if s.0 { &self.pools.env } else { &self.pools.gen };
        pool[s.1][&lang].clone()
    }

    fn head(&self, b: &mut PageBuilder, lang: Lang, title: &str) {
        let _ = writeln!(
            b.html,
            "<!DOCTYPE html>\n<html lang=\"{lang}\">\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n</head>\n<body>",
            xml::escape(title)
        );
    }

    fn nav(&self, b: &mut PageBuilder, lang: Lang, template: usize) {
        let items: Vec<(String, String)> = ["home", "news", "about", "contact", "sitemap"]
            .iter()
            .map(|k| {
                let page = if *k == "home" { "index" } else { k };
                (self.page_url(lang, page), self.chrome(k, lang))
            })
            .collect();
        match template % 3 {
            0 => b.list("<div id=\"header\">\n<ul class=\"nav\">", "</ul>\n</div>", &items),
            1 => {
                b.raw("<div id=\"header\">\n");
                let mut pieces = Vec::new();
                for (i, (href, text)) in items.iter().enumerate() {
                    if i > 0 {
                        pieces.push(Piece::Text(" | ".into()));
                    }
                    pieces.push(Piece::Link(href.clone(), text.clone()));
                }
                b.block("div", &pieces, true);
                b.raw("</div>\n");
            }
            _ => {
                b.list("<div id=\"top\">\n<ul class=\"menu\">", "</ul>\n</div>", &items);
                b.block(
                    "div",
                    &[Piece::Text(self.chrome("search", lang))],
                    true,
                );
            }
        }
    }

    fn footer(&self, b: &mut PageBuilder, lang: Lang, template: usize) {
        b.raw("<div id=\"footer\">\n");
        let mut pieces = Vec::new();
        for (i, k) in ["privacy", "terms", "sitemap"].iter().enumerate() {
            if i > 0 {
                pieces.push(Piece::Text(" | ".into()));
            }
            pieces.push(Piece::Link(self.page_url(lang, k), self.chrome(k, lang)));
        }
        b.block("p", &pieces, true);
        if template % 3 == 2 {
            b.block("p", &[Piece::Link(self.page_url(lang, "contact"), self.chrome("follow", lang))], true);
        }
        b.block("p", &[Piece::Text(self.chrome("rights", lang))], true);
        b.raw("</div>\n</body>\n</html>\n");
    }

    /// Renders one document. Returns the page and the sentence list per
    /// paragraph as they appear in the page.
    fn render_doc(
        &self,
        plan: &DocPlan,
        lang: Lang,
        translations: &[(Lang, usize)],
        merges: &BTreeSet<(usize, usize)>,
        docs: &[DocPlan],
    ) -> (PageBuilder, Vec<String>) {
        let mut b = PageBuilder::default();
        let title = self.title(plan, lang);
        self.head(&mut b, lang, &title);
        self.nav(&mut b, lang, plan.template);
        if !translations.is_empty() {
            let links: Vec<(String, String)> = translations
                .iter()
                .map(|(l, n)| (self.doc_url(*l, *n), self.chrome("langname", *l)))
                .collect();
            b.list("<ul class=\"languages\">", "</ul>", &links);
        }
        if plan.template % 3 == 1 {
            b.raw("<div class=\"sidebar\">\n");
            b.block("p", &[Piece::Text(self.chrome("advert", lang))], true);
            b.block("p", &[Piece::Text(self.chrome("offer", lang))], true);
            b.raw("</div>\n");
        }
        b.raw("<div id=\"content\">\n");
        let mut sentences = Vec::new();
        let target = &docs[plan.readmore];
        let n_paras = plan.paragraphs.len();
        for (pi, para) in plan.paragraphs.iter().enumerate() {
            let mut texts: Vec<String> = Vec::new();
            let mut si = 0;
            while si < para.len() {
                let s = self.sentence(para[si], lang);
                if merges.contains(&(pi, si)) && si + 1 < para.len() {
                    let first = s.strip_suffix('.').unwrap_or(&s);
                    texts.push(format!("{first}, {}", self.sentence(para[si + 1], lang)));
                    si += 2;
                } else {
                    texts.push(s);
                    si += 1;
                }
            }
            let mut pieces = vec![Piece::Text(texts.join(" "))];
            sentences.extend(texts);
            if pi + 1 == n_paras {
                let lead = self.chrome("readmore", lang);
                let anchor = self.title(target, lang);
                pieces.push(Piece::Text(format!(" {lead} ")));
                pieces.push(Piece::Link(self.doc_url(lang, target.number), anchor.clone()));
                pieces.push(Piece::Text(".".into()));
                sentences.push(format!("{lead} {anchor}."));
            }
            b.block("p", &pieces, false);
        }
        b.raw("</div>\n");
        let related: Vec<(String, String)> = plan
            .related
            .iter()
            .map(|&i| (self.doc_url(lang, docs[i].number), self.title(&docs[i], lang)))
            .collect();
        if !related.is_empty() {
            b.raw("<div class=\"related\">\n");
            b.block("h3", &[Piece::Text(self.chrome("related", lang))], true);
            b.list("<ul>", "</ul>", &related);
            b.raw("</div>\n");
        }
        self.footer(&mut b, lang, plan.template);
        (b, sentences)
    }

    fn list_page(&self, lang: Lang, title_key: &str, links: &[(String, String)], extra: &[(String, String)]) -> String {
        let mut b = PageBuilder::default();
        self.head(&mut b, lang, &self.chrome(title_key, lang));
        self.nav(&mut b, lang, 0);
        if !extra.is_empty() {
            b.list("<ul class=\"languages\">", "</ul>", extra);
        }
        b.list("<ul class=\"documents\">", "</ul>", links);
        self.footer(&mut b, lang, 0);
        b.html
    }

    fn chrome_page(&self, lang: Lang, key: &str, body: &[String], links: &[(String, String)]) -> String {
        let mut b = PageBuilder::default();
        self.head(&mut b, lang, &self.chrome(key, lang));
        self.nav(&mut b, lang, 0);
        b.raw("<div id=\"content\">\n");
        b.block("p", &[Piece::Text(body.join(" "))], false);
        b.raw("</div>\n");
        if !links.is_empty() {
            b.list("<ul>", "</ul>", links);
        }
        self.footer(&mut b, lang, 0);
        b.html
    }
}

fn check_spec(spec: &SiteSpec) -> Result<(), SiteError> {
    let bad = |m: &str| Err(SiteError::InvalidSpec(m.to_string()));
    if spec.pages_per_lang == 0 {
        return bad("pages_per_lang must be positive");
    }
    if spec.langs.is_empty() {
        return bad("no languages");
    }
    if spec.langs.iter().collect::<BTreeSet<_>>().len() != spec.langs.len() {
        return bad("duplicate language");
    }
    for f in [spec.relevant_fraction, spec.pair_fraction, spec.sentence_merge_rate] {
        if !(0.0..=1.0).contains(&f) {
            return bad("fractions must lie in [0, 1]");
        }
    }
    if spec.boilerplate_templates == 0 || spec.hosts == 0 || spec.sentences_per_page < 2 {
        return bad("boilerplate_templates, hosts and sentences_per_page must be positive");
    }
    let supported = supported_languages();
    if let Some(l) = spec.langs.iter().find(|l| !supported.contains(l)) {
        return Err(SiteError::UnsupportedLanguage(*l));
    }
    Ok(())
}

/// Splits `n` sentences into paragraphs of two to four.
fn paragraph_sizes(rng: &mut ChaCha8Rng, mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    while n > 0 {
        let take = if n <= 4 { n } else { rng.random_range(2..=4).min(n - 2) };
        out.push(take);
        n -= take;
    }
    out
}

fn plan_sentences(rng: &mut ChaCha8Rng, pools: &Pools, n: usize, relevant: bool) -> Vec<SentRef> {
    let mut out: Vec<SentRef> = Vec::with_capacity(n);
    for i in 0..n {
        loop {
            // Relevant pages open with a topical sentence and keep about
            // half of the rest topical.
            let env = relevant && (i == 0 || rng.random_bool(0.5));
            let pool_len = if env { pools.env.len() } else { pools.gen.len() };
            let s = (env, rng.random_range(0..pool_len));
            if out.last() != Some(&s) {
                out.push(s);
                break;
            }
        }
    }
    out
}

/// Builds the site for `spec`. Identical `(seed, spec)` give identical sites.
pub fn generate_site(seed: u64, spec: &SiteSpec) -> Result<(SyntheticSite, GroundTruth), SiteError> {
    check_spec(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hosts: Vec<String> = (0..spec.hosts).map(|i| format!("http://site{i}.test")).collect();
    let gen = Generator {
        spec,
        pools: load_pools(),
        hosts,
    };
    let n = spec.pages_per_lang;
    let n_pairs = (spec.pair_fraction * n as f64).round() as usize;
    let n_relevant = (spec.relevant_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let relevant_slots: BTreeSet<usize> = order[..n_relevant].iter().copied().collect();
    let slots: (Vec<usize>, Vec<usize>) = (0..n).partition(|i| relevant_slots.contains(i));

    // Document plans per language. Mirrored plans are shared, so plan index
    // `i < n_pairs` is the same document in every language.
    let first = spec.langs[0];
    let mut plans: BTreeMap<Lang, Vec<DocPlan>> = BTreeMap::new();
    let mut mirrored: Vec<DocPlan> = Vec::new();
    let mean = spec.sentences_per_page;
    for i in 0..n_pairs {
        let relevant = relevant_slots.contains(&i);
        let count = rng.random_range(mean - mean / 3..=mean + mean / 3).max(2);
        mirrored.push(plan_doc(&mut rng, &gen, i, i + 1, relevant, count, n, &slots));
    }
    let mut next_number = n_pairs + 1;
    for (li, &lang) in spec.langs.iter().enumerate() {
        let mut docs: Vec<DocPlan> = mirrored
            .iter()
            .map(|p| DocPlan {
                number: p.number,
                relevant: p.relevant,
                title: p.title,
                paragraphs: p.paragraphs.clone(),
                readmore: p.readmore,
                related: p.related.clone(),
                template: p.template,
            })
            .collect();
        for i in n_pairs..n {
            let relevant = relevant_slots.contains(&i);
            let count = if li == 0 {
                rng.random_range(3..=(mean / 3).max(3))
            } else {
                rng.random_range(mean * 2..=mean * 2 + mean / 2)
            };
            docs.push(plan_doc(&mut rng, &gen, i, next_number, relevant, count, n, &slots));
            next_number += 1;
        }
        plans.insert(lang, docs);
    }

    let mut site = SyntheticSite {
        resources: BTreeMap::new(),
        hosts: gen.hosts.clone(),
        now: fixed_now(),
        latency: Duration::ZERO,
    };
    let mut truth = GroundTruth::default();
    let html = |body: String| Resource {
        status: 200,
        content_type: "text/html; charset=utf-8".into(),
        location: None,
        body: body.into_bytes(),
    };
    let mut sentences: BTreeMap<(Lang, usize), Vec<String>> = BTreeMap::new();
    let mut merge_sets: BTreeMap<(Lang, usize), BTreeSet<(usize, usize)>> = BTreeMap::new();
    for &lang in &spec.langs {
        let docs = &plans[&lang];
        for (i, plan) in docs.iter().enumerate() {
            let translations: Vec<(Lang, usize)> = if i < n_pairs {
                spec.langs.iter().filter(|l| **l != lang).map(|l| (*l, plan.number)).collect()
            } else {
                Vec::new()
            };
            let mut merges = BTreeSet::new();
            if i < n_pairs && lang != first {
                for (pi, para) in plan.paragraphs.iter().enumerate() {
                    let mut si = 0;
                    while si + 1 < para.len() {
                        if rng.random_bool(spec.sentence_merge_rate) {
                            merges.insert((pi, si));
                            si += 2;
                        } else {
                            si += 1;
                        }
                    }
                }
            }
            let (page, sents) = gen.render_doc(plan, lang, &translations, &merges, docs);
            let url = gen.doc_url(lang, plan.number);
            if plan.relevant {
                truth.relevant.insert(url.clone());
            }
            truth.pages.insert(
                url.clone(),
                PageTruth {
                    lang,
                    relevant: plan.relevant,
                    blocks: page.blocks,
                },
            );
            site.resources.insert(url, html(page.html));
            if i < n_pairs {
                sentences.insert((lang, i), sents);
                merge_sets.insert((lang, i), merges);
            }
        }

        let all_docs: Vec<(String, String)> = docs
            .iter()
            .map(|d| (gen.doc_url(lang, d.number), gen.title(d, lang)))
            .collect();
        let featured: Vec<(String, String)> = all_docs.iter().take(10).cloned().collect();
        let other_homes: Vec<(String, String)> = spec
            .langs
            .iter()
            .filter(|l| **l != lang)
            .map(|l| (gen.page_url(*l, "index"), gen.chrome("langname", *l)))
            .collect();
        site.resources.insert(
            gen.page_url(lang, "index"),
            html(gen.list_page(lang, "home", &featured, &other_homes)),
        );
        site.resources.insert(
            gen.page_url(lang, "sitemap"),
            html(gen.list_page(lang, "sitemap", &all_docs, &[])),
        );
        for (k, key) in ["news", "about", "contact", "privacy", "terms"].iter().enumerate() {
            let body: Vec<String> = (0..3).map(|j| gen.sentence((false, (k * 3 + j) % gen.pools.gen.len()), lang)).collect();
            let links = if *key == "about" {
                vec![
                    (format!("{}/missing.html", gen.hosts[0]), gen.chrome("related", lang)),
                    (format!("{}/private/report.html", gen.hosts[0]), gen.chrome("news", lang)),
                    (format!("{}/old-home.html", gen.hosts[0]), gen.chrome("home", lang)),
                ]
            } else {
                Vec::new()
            };
            site.resources.insert(gen.page_url(lang, key), html(gen.chrome_page(lang, key, &body, &links)));
        }
    }

    for lang in spec.langs.iter().skip(1) {
        for page in ["index", "sitemap", "news", "about", "contact", "privacy", "terms"] {
            truth
                .chrome_pairs
                .push((gen.page_url(first, page), gen.page_url(*lang, page)));
        }
        for i in 0..n_pairs {
            let plan = &plans[&first][i];
            let sa = &sentences[&(first, i)];
            let sb = &sentences[&(*lang, i)];
            let merges = &merge_sets[&(*lang, i)];
            let mut beads = Vec::new();
            let (mut ia, mut ib) = (0, 0);
            for (pi, para) in plan.paragraphs.iter().enumerate() {
                let mut si = 0;
                while si < para.len() {
                    if merges.contains(&(pi, si)) && si + 1 < para.len() {
                        beads.push((ia..ia + 2, ib..ib + 1));
                        ia += 2;
                        si += 2;
                    } else {
                        beads.push((ia..ia + 1, ib..ib + 1));
                        ia += 1;
                        si += 1;
                    }
                    ib += 1;
                }
            }
            // The closing cross-reference sentence.
            beads.push((ia..ia + 1, ib..ib + 1));
            debug_assert_eq!((ia + 1, ib + 1), (sa.len(), sb.len()));
            truth.pairs.push(TruePair {
                url_a: gen.doc_url(first, plan.number),
                url_b: gen.doc_url(*lang, plan.number),
                sentences_a: sa.clone(),
                sentences_b: sb.clone(),
                beads,
            });
        }
    }

    for host in &gen.hosts {
        site.resources.insert(
            format!("{host}/robots.txt"),
            Resource {
                status: 200,
                content_type: "text/plain".into(),
                location: None,
                body: b"User-agent: *\nDisallow: /private/\n".to_vec(),
            },
        );
    }
    let home = gen.page_url(first, "index");
    for path in ["/", "/old-home.html"] {
        site.resources.insert(
            format!("{}{path}", gen.hosts[0]),
            Resource {
                status: 301,
                content_type: "text/html".into(),
                location: Some(home.clone()),
                body: Vec::new(),
            },
        );
    }
    site.resources.insert(
        format!("{}/private/report.html", gen.hosts[0]),
        html(gen.chrome_page(first, "news", &[gen.sentence((false, 0), first)], &[])),
    );
    site.resources.insert(
        format!("{}/missing.html", gen.hosts[0]),
        Resource {
            status: 404,
            content_type: "text/html; charset=utf-8".into(),
            location: None,
            body: NOT_FOUND.as_bytes().to_vec(),
        },
    );
    Ok((site, truth))
}

#[allow(clippy::too_many_arguments)]
fn plan_doc(
    rng: &mut ChaCha8Rng,
    gen: &Generator<'_>,
    slot: usize,
    number: usize,
    relevant: bool,
    sentences: usize,
    n: usize,
    slots: &(Vec<usize>, Vec<usize>),
) -> DocPlan {
    let pools = &gen.pools;
    let refs = plan_sentences(rng, pools, sentences, relevant);
    let mut paragraphs = Vec::new();
    let mut at = 0;
    for size in paragraph_sizes(rng, sentences) {
        paragraphs.push(refs[at..at + size].to_vec());
        at += size;
    }
    let title_pool = if relevant { pools.env_titles.len() } else { pools.gen_titles.len() };
    // Four out of five related links stay within the page's own relevance
    // class; the in-text cross reference always does.
    let pick = |rng: &mut ChaCha8Rng, same: bool| {
        let class = if same == relevant { &slots.0 } else { &slots.1 };
        if class.is_empty() {
            rng.random_range(0..n)
        } else {
            class[rng.random_range(0..class.len())]
        }
    };
    let related = (0..5)
        .map(|_| {
            let same = rng.random_bool(0.8);
            pick(rng, same)
        })
        .filter(|&s| s != slot)
        .collect();
    let readmore = pick(rng, true);
    DocPlan {
        number,
        relevant,
        title: rng.random_range(0..title_pool),
        paragraphs,
        readmore,
        related,
        template: rng.random_range(0..gen.spec.boilerplate_templates),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::split_blocks;
    use crate::html::parse_html;
    use crate::topic::{classify_relevant, score_document};

    fn spec() -> SiteSpec {
        SiteSpec {
            pages_per_lang: 30,
            pair_fraction: 0.6,
            sentence_merge_rate: 0.2,
            ..SiteSpec::default()
        }
    }

    fn parse(site: &SyntheticSite, url: &str) -> crate::html::ParsedDoc {
        parse_html(std::str::from_utf8(site.body(url).unwrap()).unwrap(), url)
    }

    #[test]
    fn deterministic() {
        let (a, ta) = generate_site(7, &spec()).unwrap();
        let (b, tb) = generate_site(7, &spec()).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_eq!(ta, tb);
        let (c, _) = generate_site(8, &spec()).unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn counts() {
        let one = SiteSpec {
            pages_per_lang: 100,
            langs: vec![Lang::EN],
            ..SiteSpec::default()
        };
        let (_, t) = generate_site(7, &one).unwrap();
        assert_eq!(t.relevant.len(), 50);
        assert!(t.pairs.is_empty());
        let none = SiteSpec { pair_fraction: 0.0, ..spec() };
        assert!(generate_site(7, &none).unwrap().1.pairs.is_empty());
        let (_, t) = generate_site(7, &spec()).unwrap();
        assert_eq!(t.pairs.len(), 18);
        assert_eq!(t.pages.len(), 60);
    }

    #[test]
    fn spec_errors() {
        let zz = SiteSpec {
            langs: vec![Lang::new("zz").unwrap()],
            ..SiteSpec::default()
        };
        assert!(matches!(generate_site(1, &zz), Err(SiteError::UnsupportedLanguage(_))));
        let bad = SiteSpec { relevant_fraction: 1.5, ..SiteSpec::default() };
        assert!(matches!(generate_site(1, &bad), Err(SiteError::InvalidSpec(_))));
    }

    #[test]
    fn block_labels_follow_parser_blocks() {
        let (site, truth) = generate_site(3, &spec()).unwrap();
        for (url, page) in &truth.pages {
            let doc = parse(&site, url);
            let texts: Vec<&str> = doc.blocks.iter().map(|b| b.text.as_str()).collect();
            let want: Vec<&str> = page.blocks.iter().map(|b| b.text.as_str()).collect();
            assert_eq!(texts, want, "{url}");
        }
    }

    #[test]
    fn relevance_labels_hold_under_the_fixture_topic() {
        let (site, truth) = generate_site(5, &SiteSpec { langs: vec![Lang::EN, Lang::FR, Lang::EL, Lang::ES, Lang::DE], ..spec() }).unwrap();
        for (url, page) in &truth.pages {
            let topic = fixture_topic(page.lang).unwrap();
            let mut doc = parse(&site, url);
            for (b, l) in doc.blocks.iter_mut().zip(&page.blocks) {
                b.is_boilerplate = l.boilerplate;
            }
            let s = score_document(&doc.title, &doc.meta_keywords, &doc.body_tokens(), &topic);
            assert_eq!(classify_relevant(&s, &topic), page.relevant, "{url}: {}", s.value);
        }
    }

    #[test]
    fn pair_sentences_and_beads_are_consistent() {
        let (site, truth) = generate_site(11, &spec()).unwrap();
        assert!(truth.pairs.iter().any(|p| p.beads.iter().any(|(a, _)| a.len() == 2)));
        for p in &truth.pairs {
            for (url, sents, lang) in [(&p.url_a, &p.sentences_a, Lang::EN), (&p.url_b, &p.sentences_b, Lang::FR)] {
                let page = &truth.pages[url];
                let content: Vec<&str> = page.blocks.iter().filter(|b| !b.boilerplate).map(|b| b.text.as_str()).collect();
                assert_eq!(&split_blocks(&content, lang), sents, "{url}");
                assert!(site.body(url).is_some());
            }
            let (la, lb) = p.beads.last().map(|(a, b)| (a.end, b.end)).unwrap();
            assert_eq!((la, lb), (p.sentences_a.len(), p.sentences_b.len()));
        }
    }

    #[test]
    fn special_resources() {
        let (site, _) = generate_site(1, &SiteSpec { hosts: 2, ..spec() }).unwrap();
        assert_eq!(site.hosts().len(), 2);
        let t = Duration::from_secs(1);
        let r = site.get("http://site0.test/old-home.html", t, "x").unwrap();
        assert_eq!((r.status, r.header("location")), (301, Some("http://site0.test/en/index.html")));
        assert_eq!(site.get("http://site0.test/missing.html", t, "x").unwrap().status, 404);
        assert_eq!(site.get("http://site1.test/nowhere", t, "x").unwrap().status, 404);
        let robots = site.get("http://site1.test/robots.txt", t, "x").unwrap();
        assert!(String::from_utf8(robots.body).unwrap().contains("Disallow: /private/"));
        assert!(site.urls().any(|u| u.starts_with("http://site1.test/en/doc-")));
    }

    #[test]
    fn materialize_and_load() {
        let (site, _) = generate_site(2, &spec()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        site.materialize(dir.path()).unwrap();
        let back = SyntheticSite::load(dir.path()).unwrap();
        assert_eq!(back.fingerprint(), site.fingerprint());
        assert_eq!(back.hosts(), site.hosts());
    }
}
