//! The crawl loop: a pool of workers sharing one frontier and one fetcher.
//!
//! Each worker runs the whole per-page pipeline (fetch, decode, parse,
//! language identification, boilerplate marking, scoring, export, link
//! scoring) for the page it popped. Ordering decisions stay in the
//! frontier.

use std::collections::HashSet;
use std::path::Path;
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use thiserror::Error;

use crate::boilerplate::{classify_blocks, BoilerplateParams};
use crate::export::{read_document_xml, read_index, CorpusWriter, CrawlMeta, ExportError, IndexRow};
use crate::fetch::{FetchLogEntry, Fetcher};
use crate::frontier::{host_of, normalize_absolute, CrawlLimits, Frontier, UnboundedCrawl};
use crate::html::{charset_from_content_type, normalize_encoding, parse_html, parse_plain, sniff_meta_charset, ParsedDoc};
use crate::langid::{annotate_document, identify, LanguageProfile};
use crate::pairs::{url_translation_candidates, PoolDoc};
use crate::topic::{check_alpha, classify_relevant, score_document, score_link, TopicDefinition, TopicError};
use crate::Lang;

/// Priority added to links that look like the translation of the current
/// page in a bilingual crawl.
pub const TRANSLATION_LINK_BONUS: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct CrawlConfig {
    /// Target languages, each with the topic used to score its pages.
    pub targets: Vec<(Lang, TopicDefinition)>,
    /// Store every target-language page, not only relevant ones.
    pub keep_all: bool,
    pub limits: CrawlLimits,
    pub workers: usize,
    pub link_alpha: f64,
    pub boilerplate: BoilerplateParams,
}

#[derive(Debug, Error)]
pub enum CrawlError {
    #[error("no seed URLs")]
    NoSeeds,
    #[error("seed {url:?}: {reason}")]
    BadSeed { url: String, reason: String },
    #[error("no target languages")]
    NoTargets,
    #[error("topic language {topic} does not match target {target}")]
    TopicLanguage { topic: Lang, target: Lang },
    #[error(transparent)]
    Unbounded(#[from] UnboundedCrawl),
    #[error(transparent)]
    Topic(#[from] TopicError),
    #[error(transparent)]
    Export(#[from] ExportError),
}

#[derive(Debug, Clone, Default)]
pub struct CrawlOutcome {
    /// Pages whose fetch was attempted.
    pub fetched: usize,
    pub stored: usize,
    pub rejected_language: usize,
    pub irrelevant: usize,
    /// Fetch failures, error statuses and unsupported content types.
    pub failed: usize,
    /// URLs in fetch order (1 worker) or completion order.
    pub fetched_urls: Vec<String>,
    pub index: Vec<IndexRow>,
    pub pool: Vec<PoolDoc>,
    pub fetch_log: Vec<FetchLogEntry>,
    pub elapsed: Duration,
}

impl CrawlOutcome {
    /// Stored pages per fetched page.
    pub fn harvest_rate(&self) -> f64 {
        if self.fetched == 0 {
            0.0
        } else {
            self.stored as f64 / self.fetched as f64
        }
    }

    pub fn summary(&self) -> String {
        format!(
            "pages fetched: {}, stored: {}, rejected by language: {}, irrelevant: {}, failed: {}, harvest rate: {:.4}",
            self.fetched,
            self.stored,
            self.rejected_language,
            self.irrelevant,
            self.failed,
            self.harvest_rate()
        )
    }
}

pub fn pool_doc(id: usize, file: &str, doc: &ParsedDoc) -> Option<PoolDoc> {
    Some(PoolDoc {
        id,
        url: doc.url.clone(),
        lang: doc.main_language?,
        tag_seq: doc.tag_sequence().into_iter().map(str::to_string).collect(),
        content_chars: doc.content_chars(),
        file: file.to_string(),
    })
}

/// Rebuilds the pair-detection pool from an exported crawl directory.
pub fn load_pool(out: &Path) -> Result<Vec<PoolDoc>, ExportError> {
    let rows = read_index(&out.join("index.tsv"))?;
    let mut pool = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let path = out.join(&row.file);
        let text = std::fs::read_to_string(&path).map_err(|source| ExportError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let (doc, _) = read_document_xml(&text)?;
        let file = row.file.rsplit('/').next().unwrap_or(&row.file);
        pool.extend(pool_doc(i + 1, file, &doc));
    }
    Ok(pool)
}

#[derive(Default)]
struct Progress {
    started: usize,
    in_flight: usize,
    done: bool,
}

struct Shared<'a> {
    config: &'a CrawlConfig,
    fetcher: &'a Fetcher,
    frontier: &'a Frontier,
    profiles: &'a [LanguageProfile],
    writer: Mutex<CorpusWriter>,
    progress: Mutex<Progress>,
    wake: Condvar,
    outcome: Mutex<CrawlOutcome>,
    start: Instant,
}

enum PageResult {
    Failed,
    Rejected,
    Irrelevant,
    Stored,
}

impl Shared<'_> {
    fn next(&self) -> Option<(String, u32)> {
        let limits = &self.config.limits;
        let mut p = self.progress.lock().unwrap_or_else(|e| e.into_inner());
        loop {
            let elapsed = self.start.elapsed().as_secs_f64();
            let over_budget = limits.max_pages.is_some_and(|m| p.started >= m)
                || limits.max_seconds.is_some_and(|m| elapsed >= m as f64);
            if p.done || over_budget {
                p.done = true;
                self.wake.notify_all();
                return None;
            }
            if let Some(entry) = self.frontier.pop() {
                p.started += 1;
                p.in_flight += 1;
                return Some((entry.url, entry.depth));
            }
            if p.in_flight == 0 {
                p.done = true;
                self.wake.notify_all();
                return None;
            }
            p = self
                .wake
                .wait_timeout(p, Duration::from_millis(50))
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
    }

    fn finish_one(&self) {
        let mut p = self.progress.lock().unwrap_or_else(|e| e.into_inner());
        p.in_flight -= 1;
        self.wake.notify_all();
    }

    fn worker(&self) -> Result<(), CrawlError> {
        while let Some((url, depth)) = self.next() {
            let result = self.process(&url, depth);
            {
                let mut o = self.outcome.lock().unwrap_or_else(|e| e.into_inner());
                o.fetched += 1;
                o.fetched_urls.push(url);
                match &result {
                    Ok(PageResult::Failed) => o.failed += 1,
                    Ok(PageResult::Rejected) => o.rejected_language += 1,
                    Ok(PageResult::Irrelevant) => o.irrelevant += 1,
                    Ok(PageResult::Stored) => o.stored += 1,
                    Err(_) => {}
                }
            }
            if result.is_err() {
                self.progress.lock().unwrap_or_else(|e| e.into_inner()).done = true;
            }
            self.finish_one();
            result?;
        }
        Ok(())
    }

    fn topic_for(&self, lang: Lang) -> &TopicDefinition {
        &self
            .config
            .targets
            .iter()
            .find(|(l, _)| *l == lang)
            .expect("annotated language is a target")
            .1
    }

    fn process(&self, url: &str, depth: u32) -> Result<PageResult, CrawlError> {
        let fetched = match self.fetcher.fetch_with(url, &mut |next| self.frontier.claim(next)) {
            Ok(f) => f,
            Err(e) => {
                warn!("{e}");
                return Ok(PageResult::Failed);
            }
        };
        if !fetched.is_success() {
            debug!("{url}: status {}", fetched.status);
            return Ok(PageResult::Failed);
        }
        let http_charset = charset_from_content_type(&fetched.content_type);
        let doc = if fetched.is_html() {
            let meta = sniff_meta_charset(&fetched.body);
            let text = normalize_encoding(&fetched.body, http_charset.as_deref(), meta.as_deref());
            parse_html(&text, &fetched.final_url)
        } else if fetched.is_plain() {
            let text = normalize_encoding(&fetched.body, http_charset.as_deref(), None);
            parse_plain(&text, &fetched.final_url)
        } else {
            debug!("{url}: skipping content type {:?}", fetched.content_type);
            return Ok(PageResult::Failed);
        };

        let joined = doc.blocks.iter().map(|b| b.text.as_str()).collect::<Vec<_>>().join(" ");
        let detected = identify(&joined, self.profiles).lang();
        let target = detected
            .filter(|l| self.config.targets.iter().any(|(t, _)| t == l))
            .unwrap_or(self.config.targets[0].0);
        let mut doc = match annotate_document(doc, target, self.profiles) {
            Ok(d) => d,
            Err(r) => {
                debug!("{url}: language {:?}, not {}", r.detected, r.target);
                return Ok(PageResult::Rejected);
            }
        };
        let lang = doc.main_language.expect("annotated");
        classify_blocks(&mut doc.blocks, &self.config.boilerplate);
        let topic = self.topic_for(lang);
        let score = score_document(&doc.title, &doc.meta_keywords, &doc.body_tokens(), topic);
        let relevant = classify_relevant(&score, topic);
        let source_score = score.value;
        doc.relevance = Some(score);

        self.push_links(&doc, lang, source_score, depth);

        if !(relevant || self.config.keep_all) {
            return Ok(PageResult::Irrelevant);
        }
        let meta = CrawlMeta {
            fetched_at: fetched.fetched_at,
        };
        let (id, file) = {
            let mut w = self.writer.lock().unwrap_or_else(|e| e.into_inner());
            w.write(&doc, &meta)?
        };
        info!("stored {url} as {file} (score {:.4})", source_score);
        if let Some(p) = pool_doc(id, &file, &doc) {
            self.outcome.lock().unwrap_or_else(|e| e.into_inner()).pool.push(p);
        }
        Ok(PageResult::Stored)
    }

    fn push_links(&self, doc: &ParsedDoc, lang: Lang, source_score: f64, depth: u32) {
        let topic = self.topic_for(lang);
        let translations: HashSet<String> = if self.config.keep_all {
            self.config
                .targets
                .iter()
                .filter(|(l, _)| *l != lang)
                .flat_map(|(other, _)| url_translation_candidates(&doc.url, lang, *other))
                .collect()
        } else {
            HashSet::new()
        };
        for link in &doc.links {
            let mut priority = score_link(&link.context_tokens, source_score, topic, self.config.link_alpha);
            if translations.contains(&link.href) {
                priority += TRANSLATION_LINK_BONUS;
            }
            self.frontier.push(&link.href, priority, depth + 1);
        }
    }
}

/// Runs a crawl from `seeds`, exporting stored pages under `out`.
pub fn run_crawl(
    seeds: &[String],
    config: &CrawlConfig,
    fetcher: &Fetcher,
    profiles: &[LanguageProfile],
    out: &Path,
) -> Result<CrawlOutcome, CrawlError> {
    if seeds.is_empty() {
        return Err(CrawlError::NoSeeds);
    }
    if config.targets.is_empty() {
        return Err(CrawlError::NoTargets);
    }
    for (lang, topic) in &config.targets {
        if topic.language != *lang {
            return Err(CrawlError::TopicLanguage {
                topic: topic.language,
                target: *lang,
            });
        }
    }
    check_alpha(config.link_alpha)?;
    if !config.keep_all {
        config.limits.validate_monolingual()?;
    }
    let mut normalized = Vec::new();
    for s in seeds {
        let url = normalize_absolute(s).map_err(|e| CrawlError::BadSeed {
            url: s.clone(),
            reason: format!("{e:?}"),
        })?;
        normalized.push(url);
    }
    let mut frontier = Frontier::new(config.limits.clone());
    if let Some(host) = host_of(&normalized[0]) {
        frontier = frontier.with_seed_host(&host);
    }
    for url in &normalized {
        frontier.push_seed(url);
    }
    let shared = Shared {
        config,
        fetcher,
        frontier: &frontier,
        profiles,
        writer: Mutex::new(CorpusWriter::create(out)?),
        progress: Mutex::new(Progress::default()),
        wake: Condvar::new(),
        outcome: Mutex::new(CrawlOutcome::default()),
        start: Instant::now(),
    };
    let workers = config.workers.max(1);
    let results: Vec<Result<(), CrawlError>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers).map(|_| scope.spawn(|| shared.worker())).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("crawl worker panicked"))
            .collect()
    });
    for r in results {
        r?;
    }
    let writer = shared.writer.into_inner().unwrap_or_else(|e| e.into_inner());
    writer.finish()?;
    let mut outcome = shared.outcome.into_inner().unwrap_or_else(|e| e.into_inner());
    outcome.index = writer.rows().to_vec();
    outcome.pool.sort_by_key(|p| p.id);
    outcome.fetch_log = fetcher.fetch_log();
    outcome.elapsed = shared.start.elapsed();
    Ok(outcome)
}
