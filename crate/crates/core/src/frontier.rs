//! URL normalisation and the prioritised crawl frontier.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Mutex;

use thiserror::Error;
use url::Url;

/// Why a link was not turned into a crawlable URL.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Skip {
    #[error("unsupported scheme {0:?}")]
    Scheme(String),
    #[error("unparseable URL: {0}")]
    Invalid(String),
}

/// Resolves `href` against `base` and puts the result in canonical form.
///
/// Scheme and host are lowercased, the fragment is dropped, default ports
/// are removed and dot-segments collapsed. The query string is kept as
/// written. Only http and https are accepted.
pub fn normalize_url(href: &str, base: &str) -> Result<String, Skip> {
    let href = href.trim();
    let resolved = match Url::parse(base) {
        Ok(b) => b.join(href),
        Err(_) => Url::parse(href),
    }
    .map_err(|e| Skip::Invalid(format!("{href}: {e}")))?;
    canonical(resolved)
}

/// Canonical form of an already absolute URL.
pub fn normalize_absolute(url: &str) -> Result<String, Skip> {
    let parsed = Url::parse(url.trim()).map_err(|e| Skip::Invalid(format!("{url}: {e}")))?;
    canonical(parsed)
}

fn canonical(mut url: Url) -> Result<String, Skip> {
    match url.scheme() {
        "http" | "https" => {}
        other => return Err(Skip::Scheme(other.to_string())),
    }
    if url.host_str().is_none_or(str::is_empty) {
        return Err(Skip::Invalid(format!("{url}: no host")));
    }
    // The parser already lowercases scheme and host, drops default ports and
    // resolves dot-segments for special schemes.
    url.set_fragment(None);
    Ok(url.into())
}

/// Host part of a normalised URL.
pub fn host_of(url: &str) -> Option<String> {
    Url::parse(url).ok()?.host_str().map(str::to_string)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierEntry {
    pub url: String,
    pub priority: f64,
    pub depth: u32,
    pub seq: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CrawlLimits {
    pub max_pages: Option<usize>,
    pub max_seconds: Option<u64>,
    pub max_depth: Option<u32>,
    pub same_host_only: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("a monolingual crawl needs max_pages or max_seconds")]
pub struct UnboundedCrawl;

impl CrawlLimits {
    /// Monolingual crawls need a page or time budget.
    pub fn validate_monolingual(&self) -> Result<(), UnboundedCrawl> {
        if self.max_pages.is_none() && self.max_seconds.is_none() {
            Err(UnboundedCrawl)
        } else {
            Ok(())
        }
    }
}

/// Termination test for the crawl loop.
pub fn should_stop(
    pages_fetched: usize,
    elapsed_seconds: f64,
    frontier_empty: bool,
    limits: &CrawlLimits,
) -> bool {
    frontier_empty
        || limits.max_pages.is_some_and(|m| pages_fetched >= m)
        || limits
            .max_seconds
            .is_some_and(|m| elapsed_seconds >= m as f64)
}

#[derive(Debug)]
struct HeapItem {
    priority: f64,
    seq: u64,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap on priority, then smaller seq first.
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug)]
enum Slot {
    Queued { priority: f64, depth: u32, seq: u64 },
    Taken,
}

#[derive(Debug, Default)]
struct Inner {
    heap: BinaryHeap<HeapItem>,
    slots: HashMap<String, Slot>,
    by_seq: HashMap<u64, String>,
    queued: usize,
    next_seq: u64,
    accepted: u64,
    popped: u64,
}

/// Outcome of [`Frontier::push`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PushOutcome {
    Accepted,
    /// Already queued; the queued priority is now the larger of the two.
    Merged,
    /// Already fetched or claimed.
    Seen,
    OffHost,
    TooDeep,
}

impl PushOutcome {
    pub fn accepted(self) -> bool {
        self == PushOutcome::Accepted
    }
}

/// Thread-safe priority frontier with URL-level deduplication.
///
/// Raising a queued entry's priority pushes a fresh heap item; stale items
/// are discarded on pop.
#[derive(Debug)]
pub struct Frontier {
    inner: Mutex<Inner>,
    seed_host: Option<String>,
    limits: CrawlLimits,
}

impl Frontier {
    pub fn new(limits: CrawlLimits) -> Self {
        Frontier {
            inner: Mutex::new(Inner::default()),
            seed_host: None,
            limits,
        }
    }

    /// Restricts the frontier to `host` when `same_host_only` is set.
    pub fn with_seed_host(mut self, host: &str) -> Self {
        self.seed_host = Some(host.to_ascii_lowercase());
        self
    }

    pub fn limits(&self) -> &CrawlLimits {
        &self.limits
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Adds a seed at infinite priority.
    pub fn push_seed(&self, url: &str) -> PushOutcome {
        self.push(url, f64::INFINITY, 0)
    }

    /// Queues `url` (already normalised) at `priority`.
    pub fn push(&self, url: &str, priority: f64, depth: u32) -> PushOutcome {
        if self.limits.same_host_only {
            if let Some(seed) = &self.seed_host {
                if host_of(url).as_deref() != Some(seed.as_str()) {
                    return PushOutcome::OffHost;
                }
            }
        }
        if self.limits.max_depth.is_some_and(|m| depth > m) {
            return PushOutcome::TooDeep;
        }
        let priority = if priority.is_nan() { 0.0 } else { priority };
        let mut inner = self.lock();
        let inner = &mut *inner;
        match inner.slots.get_mut(url) {
            Some(Slot::Taken) => PushOutcome::Seen,
            Some(Slot::Queued {
                priority: old,
                seq,
                depth: d,
            }) => {
                if priority > *old {
                    *old = priority;
                    *d = (*d).min(depth);
                    inner.heap.push(HeapItem {
                        priority,
                        seq: *seq,
                    });
                }
                PushOutcome::Merged
            }
            None => {
                let seq = inner.next_seq;
                inner.next_seq += 1;
                inner.slots.insert(
                    url.to_string(),
                    Slot::Queued {
                        priority,
                        depth,
                        seq,
                    },
                );
                inner.by_seq.insert(seq, url.to_string());
                inner.heap.push(HeapItem { priority, seq });
                inner.queued += 1;
                inner.accepted += 1;
                PushOutcome::Accepted
            }
        }
    }

    /// Removes and returns the highest-priority entry.
    pub fn pop(&self) -> Option<FrontierEntry> {
        let mut inner = self.lock();
        while let Some(item) = inner.heap.pop() {
            let Some(url) = inner.by_seq.get(&item.seq).cloned() else {
                continue;
            };
            let Some(Slot::Queued {
                priority, depth, ..
            }) = inner.slots.get(&url)
            else {
                continue;
            };
            if priority.total_cmp(&item.priority) != Ordering::Equal {
                continue;
            }
            let depth = *depth;
            inner.slots.insert(url.clone(), Slot::Taken);
            inner.by_seq.remove(&item.seq);
            inner.queued -= 1;
            inner.popped += 1;
            return Some(FrontierEntry {
                url,
                priority: item.priority,
                depth,
                seq: item.seq,
            });
        }
        None
    }

    /// Marks `url` as taken without queueing it, e.g. a redirect target that
    /// was fetched as part of another request. Returns false when the URL was
    /// already taken. A queued entry for it is withdrawn.
    pub fn claim(&self, url: &str) -> bool {
        let mut inner = self.lock();
        match inner.slots.insert(url.to_string(), Slot::Taken) {
            Some(Slot::Taken) => false,
            Some(Slot::Queued { seq, .. }) => {
                inner.by_seq.remove(&seq);
                inner.queued -= 1;
                true
            }
            None => true,
        }
    }

    pub fn len(&self) -> usize {
        self.lock().queued
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pushes accepted so far.
    pub fn accepted(&self) -> u64 {
        self.lock().accepted
    }

    /// Entries popped so far.
    pub fn popped(&self) -> u64 {
        self.lock().popped
    }

    pub fn is_seen(&self, url: &str) -> bool {
        self.lock().slots.contains_key(url)
    }
}
