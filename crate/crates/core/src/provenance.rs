//! Per-site page counts, IPR triage thresholds and negotiation statistics.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use chrono::NaiveDate;
use thiserror::Error;

use crate::frontier::host_of;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Status {
    #[default]
    Unexamined,
    Pending,
    Negotiating,
    Granted,
    Refused,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Unexamined => "unexamined",
            Status::Pending => "pending",
            Status::Negotiating => "negotiating",
            Status::Granted => "granted",
            Status::Refused => "refused",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = LedgerError;
    fn from_str(s: &str) -> Result<Self, LedgerError> {
        Ok(match s {
            "unexamined" => Status::Unexamined,
            "pending" => Status::Pending,
            "negotiating" => Status::Negotiating,
            "granted" => Status::Granted,
            "refused" => Status::Refused,
            other => {
                return Err(LedgerError::Field {
                    line: 0,
                    message: format!("unknown status {other:?}"),
                })
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteRecord {
    /// Exact host of the exported URLs; no public-suffix folding.
    pub domain: String,
    pub pages: usize,
    pub batch: String,
    pub status: Status,
    pub contact_opened: Option<NaiveDate>,
    pub resolved: Option<NaiveDate>,
}

impl SiteRecord {
    pub fn new(domain: &str, pages: usize, batch: &str) -> Self {
        SiteRecord {
            domain: domain.to_string(),
            pages,
            batch: batch.to_string(),
            status: Status::Unexamined,
            contact_opened: None,
            resolved: None,
        }
    }

    /// Whole days between opening contact and resolution.
    pub fn duration_days(&self) -> Option<i64> {
        Some((self.resolved? - self.contact_opened?).num_days())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Monolingual,
    Bilingual,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "monolingual" => Ok(Mode::Monolingual),
            "bilingual" => Ok(Mode::Bilingual),
            other => Err(format!("unknown mode {other:?}, expected monolingual or bilingual")),
        }
    }
}

/// One record per host, ordered by page count descending then host.
pub fn aggregate_sites<S: AsRef<str>>(urls: &[S], batch: &str) -> Vec<SiteRecord> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for url in urls {
        let url = url.as_ref();
        let host = host_of(url).unwrap_or_else(|| url.to_string());
        *counts.entry(host).or_default() += 1;
    }
    let mut records: Vec<SiteRecord> = counts
        .into_iter()
        .map(|(domain, pages)| SiteRecord::new(&domain, pages, batch))
        .collect();
    records.sort_by(|a, b| b.pages.cmp(&a.pages).then_with(|| a.domain.cmp(&b.domain)));
    records
}

/// Sites that qualify for rights clearance. In monolingual mode a site with
/// exactly `min_pages` pages qualifies; bilingual mode keeps everything.
pub fn ipr_candidates(records: &[SiteRecord], min_pages: usize, mode: Mode) -> Vec<SiteRecord> {
    records
        .iter()
        .filter(|r| mode == Mode::Bilingual || r.pages >= min_pages)
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NegotiationStats {
    pub min_days: i64,
    pub max_days: i64,
    pub mean_days: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no resolved negotiations")]
pub struct NoData;

pub fn duration_stats(days: &[i64]) -> Result<NegotiationStats, NoData> {
    let min_days = *days.iter().min().ok_or(NoData)?;
    let max_days = *days.iter().max().ok_or(NoData)?;
    let mean = days.iter().sum::<i64>() as f64 / days.len() as f64;
    Ok(NegotiationStats {
        min_days,
        max_days,
        mean_days: mean.round() as i64,
    })
}

/// Durations of resolved, non-refused negotiations.
pub fn negotiation_stats(records: &[SiteRecord]) -> Result<NegotiationStats, NoData> {
    let days: Vec<i64> = records
        .iter()
        .filter(|r| r.status != Status::Refused)
        .filter_map(SiteRecord::duration_days)
        .collect();
    duration_stats(&days)
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("ledger line {line}: {message}")]
    Field { line: usize, message: String },
    #[error("ledger line {line}: resolved date precedes contact date")]
    DateOrder { line: usize },
}

pub const LEDGER_HEADER: &str = "domain\tpages\tbatch\tstatus\tcontact_opened\tresolved";

pub fn format_ledger(records: &[SiteRecord]) -> String {
    let date = |d: Option<NaiveDate>| d.map(|d| d.format("%Y-%m-%d").to_string()).unwrap_or_default();
    let mut s = format!("{LEDGER_HEADER}\n");
    for r in records {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.domain,
            r.pages,
            r.batch,
            r.status,
            date(r.contact_opened),
            date(r.resolved)
        );
    }
    s
}

pub fn parse_ledger(text: &str) -> Result<Vec<SiteRecord>, LedgerError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if (i == 0 && line.starts_with("domain\t")) || line.trim().is_empty() {
            continue;
        }
        let err = |message: String| LedgerError::Field { line: line_no, message };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(err(format!("expected 6 columns, found {}", f.len())));
        }
        let date = |s: &str| -> Result<Option<NaiveDate>, LedgerError> {
            if s.is_empty() {
                return Ok(None);
            }
            NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .map(Some)
                .map_err(|e| err(format!("bad date {s:?}: {e}")))
        };
        let status = f[3].parse::<Status>().map_err(|e| match e {
            LedgerError::Field { message, .. } => err(message),
            other => other,
        })?;
        let record = SiteRecord {
            domain: f[0].to_string(),
            pages: f[1].parse().map_err(|_| err(format!("bad page count {:?}", f[1])))?,
            batch: f[2].to_string(),
            status,
            contact_opened: date(f[4])?,
            resolved: date(f[5])?,
        };
        if let (Some(a), Some(b)) = (record.contact_opened, record.resolved) {
            if b < a {
                return Err(LedgerError::DateOrder { line: line_no });
            }
        }
        out.push(record);
    }
    Ok(out)
}

/// Refreshes page counts from a new aggregation while keeping the status and
/// dates already recorded for the same (domain, batch). Records absent from
/// the aggregation are kept unchanged.
pub fn merge_ledger(existing: &[SiteRecord], fresh: &[SiteRecord]) -> Vec<SiteRecord> {
    let mut out: Vec<SiteRecord> = existing.to_vec();
    for f in fresh {
        match out.iter_mut().find(|r| r.domain == f.domain && r.batch == f.batch) {
            Some(r) => r.pages = f.pages,
            None => out.push(f.clone()),
        }
    }
    out.sort_by(|a, b| {
        a.batch
            .cmp(&b.batch)
            .then_with(|| b.pages.cmp(&a.pages))
            .then_with(|| a.domain.cmp(&b.domain))
    });
    out
}

pub const REFERENCE_LINES: [&str; 2] = [
    "monolingual: 1\u{2013}339 days, mean 66",
    "bilingual: 8\u{2013}344 days, mean 176",
];

pub fn render_report(records: &[SiteRecord], min_pages: usize, mode: Mode) -> String {
    let candidates = ipr_candidates(records, min_pages, mode);
    let total: usize = records.iter().map(|r| r.pages).sum();
    let cand_pages: usize = candidates.iter().map(|r| r.pages).sum();
    let mut s = String::new();
    let mode_name = match mode {
        Mode::Monolingual => "monolingual",
        Mode::Bilingual => "bilingual",
    };
    let _ = writeln!(s, "mode: {mode_name}, min pages: {min_pages}");
    let _ = writeln!(s, "sites: {} ({} pages)", records.len(), total);
    let _ = writeln!(s, "candidates: {} ({} pages)", candidates.len(), cand_pages);
    for r in &candidates {
        let _ = writeln!(s, "  {}\t{}\t{}\t{}", r.domain, r.pages, r.batch, r.status);
    }
    match negotiation_stats(records) {
        Ok(st) => {
            let _ = writeln!(
                s,
                "negotiation: {}\u{2013}{} days, mean {}",
                st.min_days, st.max_days, st.mean_days
            );
        }
        Err(NoData) => s.push_str("negotiation: no resolved records\n"),
    }
    s.push_str("reference:\n");
    for line in REFERENCE_LINES {
        let _ = writeln!(s, "  {line}");
    }
    s
}
