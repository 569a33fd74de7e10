//! Polite page retrieval over a pluggable [`PageSource`].
//!
//! The [`Fetcher`] follows redirects itself so that every hop goes through
//! robots checks and the per-host scheduler. Requests to one host are
//! serialised and their start times spaced by the policy delay.

mod http;
pub mod robots;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use log::{debug, warn};
use thiserror::Error;
use url::Url;

pub use http::HttpSource;
pub use robots::{robots_allowed, RobotsRules};

use crate::frontier::normalize_url;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawResponse {
    pub status: u16,
    /// Header names are lowercase.
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl RawResponse {
    pub fn new(status: u16, content_type: &str, body: impl Into<Vec<u8>>) -> Self {
        RawResponse {
            status,
            headers: vec![("content-type".into(), content_type.into())],
            body: body.into(),
        }
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SourceError {
    #[error("timed out")]
    Timeout,
    #[error("{0}")]
    Transport(String),
}

/// Where pages come from: the network or an offline site.
pub trait PageSource: Send + Sync {
    fn get(&self, url: &str, timeout: Duration, user_agent: &str) -> Result<RawResponse, SourceError>;

    /// Timestamp recorded on fetch results.
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchResult {
    pub requested_url: String,
    pub final_url: String,
    pub status: u16,
    pub content_type: String,
    pub body: Vec<u8>,
    pub fetched_at: DateTime<Utc>,
}

impl FetchResult {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    pub fn is_html(&self) -> bool {
        let ct = self.content_type.to_ascii_lowercase();
        ct.is_empty() || ct.starts_with("text/html") || ct.starts_with("application/xhtml")
    }

    pub fn is_plain(&self) -> bool {
        self.content_type.to_ascii_lowercase().starts_with("text/plain")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolitenessPolicy {
    pub min_delay_ms_per_host: u64,
    pub max_redirects: u32,
    pub user_agent: String,
    pub respect_robots: bool,
    pub per_fetch_timeout_ms: u64,
}

impl Default for PolitenessPolicy {
    fn default() -> Self {
        PolitenessPolicy {
            min_delay_ms_per_host: 1000,
            max_redirects: 5,
            user_agent: concat!("webcorpus/", env!("CARGO_PKG_VERSION")).to_string(),
            respect_robots: true,
            per_fetch_timeout_ms: 30_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FetchError {
    #[error("{url}: disallowed by robots.txt")]
    PolicyDenied { url: String },
    #[error("{url}: timed out")]
    Timeout { url: String },
    #[error("{url}: more than {max} redirects or a redirect cycle")]
    RedirectLoop { url: String, max: u32 },
    #[error("{url}: {message}")]
    Transport { url: String, message: String },
}

impl FetchError {
    pub fn url(&self) -> &str {
        match self {
            FetchError::PolicyDenied { url }
            | FetchError::Timeout { url }
            | FetchError::RedirectLoop { url, .. }
            | FetchError::Transport { url, .. } => url,
        }
    }
}

/// Start of one request, as seen by the scheduler.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchLogEntry {
    pub host: String,
    pub url: String,
    pub started: Instant,
}

/// Serialises requests per host and spaces their start times.
#[derive(Debug, Default)]
pub struct HostScheduler {
    delay: Duration,
    hosts: Mutex<HashMap<String, Arc<Mutex<Option<Instant>>>>>,
}

impl HostScheduler {
    pub fn new(delay: Duration) -> Self {
        HostScheduler {
            delay,
            hosts: Mutex::new(HashMap::new()),
        }
    }

    fn slot(&self, host: &str) -> Arc<Mutex<Option<Instant>>> {
        let mut hosts = self.hosts.lock().unwrap_or_else(|e| e.into_inner());
        hosts.entry(host.to_string()).or_default().clone()
    }

    /// Blocks until `host` may be contacted, then runs `f` while holding the
    /// host's turn.
    pub fn with_turn<T>(&self, host: &str, f: impl FnOnce(Instant) -> T) -> T {
        let slot = self.slot(host);
        let mut last = slot.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(prev) = *last {
            let ready = prev + self.delay;
            let now = Instant::now();
            if ready > now {
                std::thread::sleep(ready - now);
            }
        }
        let started = Instant::now();
        *last = Some(started);
        // The guard stays alive until `f` returns.
        f(started)
    }
}

/// Fetches pages politely. Shared by all crawl workers.
pub struct Fetcher {
    source: Arc<dyn PageSource>,
    policy: PolitenessPolicy,
    scheduler: HostScheduler,
    robots: Mutex<HashMap<String, Arc<OnceLock<RobotsRules>>>>,
    log: Mutex<Vec<FetchLogEntry>>,
}

const REDIRECT_CODES: [u16; 5] = [301, 302, 303, 307, 308];

impl Fetcher {
    pub fn new(source: Arc<dyn PageSource>, policy: PolitenessPolicy) -> Self {
        Fetcher {
            source,
            scheduler: HostScheduler::new(Duration::from_millis(policy.min_delay_ms_per_host)),
            policy,
            robots: Mutex::new(HashMap::new()),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn policy(&self) -> &PolitenessPolicy {
        &self.policy
    }

    /// Every request issued so far, including robots.txt and redirect hops.
    pub fn fetch_log(&self) -> Vec<FetchLogEntry> {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn request(&self, url: &str, host: &str) -> Result<RawResponse, SourceError> {
        let timeout = Duration::from_millis(self.policy.per_fetch_timeout_ms);
        self.scheduler.with_turn(host, |started| {
            self.log
                .lock()
                .unwrap_or_else(|e| e.into_inner())
                .push(FetchLogEntry {
                    host: host.to_string(),
                    url: url.to_string(),
                    started,
                });
            debug!("GET {url}");
            self.source.get(url, timeout, &self.policy.user_agent)
        })
    }

    fn robots_for(&self, origin: &str, host: &str) -> Arc<OnceLock<RobotsRules>> {
        let cell = {
            let mut map = self.robots.lock().unwrap_or_else(|e| e.into_inner());
            map.entry(origin.to_string()).or_default().clone()
        };
        cell.get_or_init(|| {
            let robots_url = format!("{origin}/robots.txt");
            match self.request(&robots_url, host) {
                Ok(r) if (200..300).contains(&r.status) => RobotsRules::parse(&r.body),
                Ok(r) => {
                    if r.status >= 500 {
                        warn!("{robots_url}: status {}, allowing all", r.status);
                    }
                    RobotsRules::allow_all()
                }
                Err(e) => {
                    warn!("{robots_url}: {e}, allowing all");
                    RobotsRules::allow_all()
                }
            }
        });
        cell
    }

    /// Whether robots rules permit fetching `url`.
    pub fn allowed(&self, url: &str) -> bool {
        if !self.policy.respect_robots {
            return true;
        }
        let Ok(parsed) = Url::parse(url) else {
            return false;
        };
        let host = parsed.host_str().unwrap_or("").to_string();
        let origin = parsed.origin().ascii_serialization();
        let rules = self.robots_for(&origin, &host);
        let mut path = parsed.path().to_string();
        if let Some(q) = parsed.query() {
            path.push('?');
            path.push_str(q);
        }
        robots_allowed(rules.get().expect("initialised"), &path, &self.policy.user_agent)
    }

    pub fn fetch(&self, url: &str) -> Result<FetchResult, FetchError> {
        self.fetch_with(url, &mut |_| true)
    }

    /// Fetches `url`, following redirects. `claim` is called for every
    /// redirect target before it is requested; when it returns false the
    /// redirect response itself is returned.
    pub fn fetch_with(
        &self,
        url: &str,
        claim: &mut dyn FnMut(&str) -> bool,
    ) -> Result<FetchResult, FetchError> {
        let requested_url = url.to_string();
        let mut current = url.to_string();
        let mut chain = vec![current.clone()];
        loop {
            let parsed = Url::parse(&current).map_err(|e| FetchError::Transport {
                url: current.clone(),
                message: e.to_string(),
            })?;
            if !self.allowed(&current) {
                return Err(FetchError::PolicyDenied { url: current });
            }
            let host = parsed.host_str().unwrap_or("").to_string();
            let response = self.request(&current, &host).map_err(|e| match e {
                SourceError::Timeout => FetchError::Timeout {
                    url: current.clone(),
                },
                SourceError::Transport(message) => FetchError::Transport {
                    url: current.clone(),
                    message,
                },
            })?;
            let location = response
                .header("location")
                .filter(|_| REDIRECT_CODES.contains(&response.status))
                .and_then(|l| normalize_url(l, &current).ok());
            if let Some(next) = location {
                if chain.len() > self.policy.max_redirects as usize || chain.contains(&next) {
                    return Err(FetchError::RedirectLoop {
                        url: requested_url,
                        max: self.policy.max_redirects,
                    });
                }
                if claim(&next) {
                    chain.push(next.clone());
                    current = next;
                    continue;
                }
            }
            return Ok(FetchResult {
                requested_url,
                final_url: current,
                status: response.status,
                content_type: response.header("content-type").unwrap_or("").to_string(),
                body: response.body,
                fetched_at: self.source.now(),
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Tiny in-memory source keyed by URL.
    struct MapSource {
        pages: HashMap<String, RawResponse>,
        calls: AtomicUsize,
    }

    impl MapSource {
        fn new(pages: &[(&str, RawResponse)]) -> Arc<Self> {
            Arc::new(MapSource {
                pages: pages.iter().map(|(u, r)| (u.to_string(), r.clone())).collect(),
                calls: AtomicUsize::new(0),
            })
        }
    }

    impl PageSource for MapSource {
        fn get(&self, url: &str, _: Duration, _: &str) -> Result<RawResponse, SourceError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if url.contains("slow") {
                return Err(SourceError::Timeout);
            }
            if url.contains("broken") {
                return Err(SourceError::Transport("connection reset".into()));
            }
            Ok(self
                .pages
                .get(url)
                .cloned()
                .unwrap_or_else(|| RawResponse::new(404, "text/html", "not found")))
        }
    }

    fn redirect(to: &str) -> RawResponse {
        RawResponse {
            status: 301,
            headers: vec![("location".into(), to.into())],
            body: vec![],
        }
    }

    fn policy() -> PolitenessPolicy {
        PolitenessPolicy {
            min_delay_ms_per_host: 0,
            ..PolitenessPolicy::default()
        }
    }

    #[test]
    fn robots_denied() {
        let src = MapSource::new(&[(
            "http://x.test/robots.txt",
            RawResponse::new(200, "text/plain", "User-agent: *\nDisallow: /private/\n"),
        )]);
        let f = Fetcher::new(src.clone(), policy());
        assert_eq!(
            f.fetch("http://x.test/private/a.html"),
            Err(FetchError::PolicyDenied {
                url: "http://x.test/private/a.html".into()
            })
        );
        // robots.txt is fetched once per host.
        f.fetch("http://x.test/a").unwrap();
        f.fetch("http://x.test/b").unwrap();
        assert_eq!(src.calls.load(Ordering::SeqCst), 3);
        let ignoring = Fetcher::new(
            src,
            PolitenessPolicy {
                respect_robots: false,
                ..policy()
            },
        );
        assert_eq!(ignoring.fetch("http://x.test/private/a.html").unwrap().status, 404);
    }

    #[test]
    fn not_found_is_data() {
        let f = Fetcher::new(MapSource::new(&[]), policy());
        let r = f.fetch("http://x.test/missing").unwrap();
        assert_eq!(r.status, 404);
        assert!(!r.is_success());
    }

    #[test]
    fn redirect_chain() {
        let src = MapSource::new(&[
            ("http://x.test/a", redirect("/b")),
            ("http://x.test/b", redirect("http://X.test/c#frag")),
            ("http://x.test/c", RawResponse::new(200, "text/html", "<p>c</p>")),
        ]);
        let f = Fetcher::new(src, policy());
        let r = f.fetch("http://x.test/a").unwrap();
        assert_eq!(r.requested_url, "http://x.test/a");
        assert_eq!(r.final_url, "http://x.test/c");
        assert_eq!(r.body, b"<p>c</p>");
    }

    #[test]
    fn redirect_limits() {
        let src = MapSource::new(&[
            ("http://x.test/loop1", redirect("/loop2")),
            ("http://x.test/loop2", redirect("/loop1")),
            ("http://x.test/r0", redirect("/r1")),
            ("http://x.test/r1", redirect("/r2")),
            ("http://x.test/r2", redirect("/r3")),
            ("http://x.test/r3", RawResponse::new(200, "text/html", "ok")),
        ]);
        let f = Fetcher::new(src.clone(), policy());
        assert!(matches!(f.fetch("http://x.test/loop1"), Err(FetchError::RedirectLoop { .. })));
        assert_eq!(f.fetch("http://x.test/r0").unwrap().final_url, "http://x.test/r3");
        let strict = Fetcher::new(
            src,
            PolitenessPolicy {
                max_redirects: 2,
                ..policy()
            },
        );
        assert!(matches!(strict.fetch("http://x.test/r0"), Err(FetchError::RedirectLoop { .. })));
        assert_eq!(strict.fetch("http://x.test/r1").unwrap().final_url, "http://x.test/r3");
    }

    #[test]
    fn claim_refusal_stops_at_redirect() {
        let src = MapSource::new(&[
            ("http://x.test/old", redirect("/new")),
            ("http://x.test/new", RawResponse::new(200, "text/html", "new")),
        ]);
        let f = Fetcher::new(src, policy());
        let r = f.fetch_with("http://x.test/old", &mut |_| false).unwrap();
        assert_eq!(r.status, 301);
        assert_eq!(r.final_url, "http://x.test/old");
    }

    #[test]
    fn transport_errors_carry_url() {
        let f = Fetcher::new(MapSource::new(&[]), policy());
        assert_eq!(
            f.fetch("http://x.test/slow"),
            Err(FetchError::Timeout {
                url: "http://x.test/slow".into()
            })
        );
        let e = f.fetch("http://x.test/broken").unwrap_err();
        assert_eq!(e.url(), "http://x.test/broken");
    }

    #[test]
    fn same_host_starts_are_spaced() {
        let src = MapSource::new(&[]);
        let f = Arc::new(Fetcher::new(
            src,
            PolitenessPolicy {
                min_delay_ms_per_host: 20,
                ..PolitenessPolicy::default()
            },
        ));
        let handles: Vec<_> = (0..4)
            .map(|w| {
                let f = f.clone();
                std::thread::spawn(move || {
                    for i in 0..3 {
                        let host = if (w + i) % 2 == 0 { "a.test" } else { "b.test" };
                        let _ = f.fetch(&format!("http://{host}/{w}/{i}"));
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        let log = f.fetch_log();
        assert_eq!(log.len(), 14);
        for (i, a) in log.iter().enumerate() {
            for b in &log[i + 1..] {
                if a.host == b.host {
                    let gap = if a.started > b.started {
                        a.started - b.started
                    } else {
                        b.started - a.started
                    };
                    assert!(gap >= Duration::from_millis(20), "{gap:?}");
                }
            }
        }
    }
}
