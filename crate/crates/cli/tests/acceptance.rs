//! End-to-end acceptance checks. Runs with its own harness so that every
//! check prints a PASS or FAIL line, even when cargo captures test output.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use webcorpus_core::align::{
    align_lengths, align_sentences, bead_cost, read_tmx, to_tmx, total_cost, BeadKind, TmxMeta,
};
use webcorpus_core::boilerplate::{classify_blocks, BoilerplateParams};
use webcorpus_core::crawl::{run_crawl, CrawlConfig};
use webcorpus_core::export::{read_document_xml, read_index, write_document_xml};
use webcorpus_core::fetch::{Fetcher, PolitenessPolicy};
use webcorpus_core::frontier::{host_of, CrawlLimits};
use webcorpus_core::html::{parse_html, Block};
use webcorpus_core::langid::{bundled_profiles, identify, Identification};
use webcorpus_core::pairs::{parse_pair_xml, read_pair_list};
use webcorpus_core::provenance::{
    aggregate_sites, duration_stats, ipr_candidates, negotiation_stats, Mode, SiteRecord, Status,
};
use webcorpus_core::sitegen::{fixture_topic, fixture_topic_text, generate_site, GroundTruth, SiteSpec};
use webcorpus_core::xml::is_well_formed;
use webcorpus_core::Lang;

type Check = fn() -> String;

fn main() {
    let checks: [(&str, Check); 10] = [
        ("monolingual focused crawl", c01_monolingual_crawl),
        ("bilingual crawl and pair detection", c02_bilingual_pairs),
        ("alignment DP matches exhaustive search", c03_alignment_optimal),
        ("alignment recovers true beads", c04_alignment_accuracy),
        ("language identification", c05_language_id),
        ("boilerplate detection", c06_boilerplate),
        ("per-host politeness", c07_politeness),
        ("deterministic output", c08_determinism),
        ("IPR candidate thresholds", c09_ipr),
        ("well-formed, round-tripping exports", c10_round_trip),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        match panic::catch_unwind(AssertUnwindSafe(check)) {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("criterion {:>2} {name}: FAIL ({msg})", i + 1);
            }
        }
    }
    let _ = panic::take_hook();
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn webcorpus(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_webcorpus"))
        .args(args)
        .output()
        .expect("run webcorpus");
    assert!(
        out.status.success(),
        "webcorpus {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn write_topic(dir: &Path, lang: Lang) -> PathBuf {
    let path = dir.join(format!("topic.{lang}.tsv"));
    fs::write(&path, fixture_topic_text(lang).expect("bundled topic")).unwrap();
    path
}

fn site_spec(pages_per_lang: usize) -> SiteSpec {
    SiteSpec {
        pages_per_lang,
        langs: vec![Lang::EN, Lang::FR],
        ..SiteSpec::default()
    }
}

/// Materialises the site for `spec` under `dir/site`.
fn site_dir(dir: &Path, seed: u64, spec: &SiteSpec) -> (PathBuf, GroundTruth, String) {
    let (site, truth) = generate_site(seed, spec).unwrap();
    let path = dir.join("site");
    site.materialize(&path).unwrap();
    (path, truth, site.home(Lang::EN))
}

fn crawl_bi(site: &Path, seed: &str, topics: &Path, out: &Path, extra: &[&str]) -> String {
    let (ta, tb) = (write_topic(topics, Lang::EN), write_topic(topics, Lang::FR));
    let mut args = vec![
        "--site-dir",
        path_str(site),
        "--seed-url",
        seed,
        "--out",
        path_str(out),
        "crawl-bi",
        "--topic-a",
        path_str(&ta),
        "--topic-b",
        path_str(&tb),
        "--lang-a",
        "en",
        "--lang-b",
        "fr",
        "--min-delay-ms",
        "0",
    ];
    args.extend_from_slice(extra);
    webcorpus(&args)
}

/// URL pairs named by the pair files under `out/pairs`.
fn detected_pairs(out: &Path) -> BTreeSet<(String, String)> {
    let urls: BTreeMap<String, String> = read_index(&out.join("index.tsv"))
        .unwrap()
        .into_iter()
        .map(|r| (r.file.rsplit('/').next().unwrap().to_string(), r.url))
        .collect();
    read_pair_list(&out.join("pairs"))
        .unwrap()
        .into_iter()
        .map(|(path, pf)| {
            let url = |i: usize| {
                let file = pf.resolve(&path, i);
                urls[&file.file_name().unwrap().to_string_lossy().into_owned()].clone()
            };
            let (a, b) = (url(0), url(1));
            if pf.docs[0].0 == Lang::EN {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect()
}

fn c01_monolingual_crawl() -> String {
    let tmp = TempDir::new().unwrap();
    let (site, truth, home) = site_dir(tmp.path(), 7, &site_spec(100));
    let topic = write_topic(tmp.path(), Lang::EN);
    let out = tmp.path().join("out");
    let start = Instant::now();
    let stdout = webcorpus(&[
        "--site-dir",
        path_str(&site),
        "--seed-url",
        &home,
        "--out",
        path_str(&out),
        "crawl-mono",
        "--topic",
        path_str(&topic),
        "--lang",
        "en",
        "--max-pages",
        "150",
        "--min-delay-ms",
        "0",
    ]);
    let elapsed = start.elapsed();
    let relevant = truth.relevant_in(Lang::EN);
    assert_eq!(relevant.len(), 50, "fixture should hold 50 relevant en pages");
    let rows = read_index(&out.join("index.tsv")).unwrap();
    let stored: BTreeSet<String> = rows.iter().map(|r| r.url.clone()).collect();
    let off_language = rows
        .iter()
        .filter(|r| r.language != Lang::EN || truth.pages.get(&r.url).is_some_and(|p| p.lang != Lang::EN))
        .count();
    let recall = relevant.intersection(&stored).count() as f64 / relevant.len() as f64;
    assert!(stdout.contains("harvest rate"), "summary missing: {stdout}");
    assert_eq!(off_language, 0, "stored {off_language} off-language documents");
    assert!(recall >= 0.9, "recall {recall:.3} < 0.9");
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    format!(
        "recall {recall:.3}, {} stored, 0 off-language, {:.1}s",
        rows.len(),
        elapsed.as_secs_f64()
    )
}

fn c02_bilingual_pairs() -> String {
    let tmp = TempDir::new().unwrap();
    let spec = SiteSpec {
        pair_fraction: 0.625,
        ..site_spec(80)
    };
    let (site, truth, home) = site_dir(tmp.path(), 7, &spec);
    assert_eq!(truth.pairs.len(), 50, "fixture should hold 50 document pairs");
    let out = tmp.path().join("out");
    let start = Instant::now();
    crawl_bi(&site, &home, tmp.path(), &out, &[]);
    let elapsed = start.elapsed();
    let found = detected_pairs(&out);
    let valid: BTreeSet<(String, String)> = truth.all_pairs().into_iter().collect();
    let docs: BTreeSet<(String, String)> = truth.pairs.iter().map(|p| (p.url_a.clone(), p.url_b.clone())).collect();
    assert!(!found.is_empty(), "no pairs detected");
    let precision = found.intersection(&valid).count() as f64 / found.len() as f64;
    let recall = found.intersection(&docs).count() as f64 / docs.len() as f64;
    assert!(precision >= 0.95, "precision {precision:.3} < 0.95");
    assert!(recall >= 0.9, "recall {recall:.3} < 0.9");
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    format!(
        "{} pairs, precision {precision:.3}, recall {recall:.3}, {:.1}s",
        found.len(),
        elapsed.as_secs_f64()
    )
}

/// Cheapest complete bead sequence, summing costs left to right.
fn exhaustive_min(la: &[usize], lb: &[usize], i: usize, j: usize, acc: f64) -> f64 {
    if i == la.len() && j == lb.len() {
        return acc;
    }
    let mut best = f64::INFINITY;
    for kind in BeadKind::ALL {
        let (da, db) = kind.sizes();
        if i + da > la.len() || j + db > lb.len() {
            continue;
        }
        let sa: usize = la[i..i + da].iter().sum();
        let sb: usize = lb[j..j + db].iter().sum();
        best = best.min(exhaustive_min(la, lb, i + da, j + db, acc + bead_cost(kind, sa, sb)));
    }
    best
}

fn c03_alignment_optimal() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(2012);
    let mut worst = 0.0f64;
    for fixture in 0..200 {
        let lengths = |rng: &mut ChaCha8Rng| -> Vec<usize> {
            let n = rng.random_range(0..=8);
            (0..n).map(|_| rng.random_range(1..=160)).collect()
        };
        let la = lengths(&mut rng);
        let lb = lengths(&mut rng);
        let dp = total_cost(&align_lengths(&la, &lb));
        let brute = exhaustive_min(&la, &lb, 0, 0, 0.0);
        worst = worst.max((dp - brute).abs());
        assert!(dp == brute, "fixture {fixture}: dp {dp} != exhaustive {brute} for {la:?} / {lb:?}");
    }
    format!("200 fixtures, max difference {worst}")
}

fn c04_alignment_accuracy() -> String {
    let spec = SiteSpec {
        sentence_merge_rate: 0.1,
        sentences_per_page: 100,
        ..site_spec(6)
    };
    let (_, truth) = generate_site(21, &spec).unwrap();
    let (mut total, mut matched, mut merged) = (0, 0, 0);
    for pair in &truth.pairs {
        let beads = align_sentences(&pair.sentences_a, &pair.sentences_b);
        let predicted: BTreeSet<(usize, usize, usize, usize)> =
            beads.iter().map(|b| (b.a.start, b.a.end, b.b.start, b.b.end)).collect();
        for (a, b) in &pair.beads {
            total += 1;
            merged += usize::from(a.len() != b.len());
            matched += usize::from(predicted.contains(&(a.start, a.end, b.start, b.end)));
        }
    }
    assert!(merged > 0, "fixture has no merged sentences");
    let accuracy = matched as f64 / total as f64;
    assert!(accuracy >= 0.95, "bead accuracy {accuracy:.3} < 0.95");
    format!("{matched}/{total} beads ({merged} non 1-1), accuracy {accuracy:.3}")
}

fn held_out_text(lang: Lang) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/sitegen/sentences.tsv");
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().trim_start_matches("# ").split('\t').collect();
    let col = header.iter().position(|h| *h == lang.as_str()).unwrap();
    lines
        .map(|l| l.split('\t').nth(col).unwrap().to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn c05_language_id() -> String {
    let profiles = bundled_profiles();
    let (mut total, mut correct) = (0, 0);
    for lang in Lang::BUNDLED {
        let chars: Vec<char> = held_out_text(lang).chars().collect();
        let mut start = 0;
        while start + 500 <= chars.len() {
            let window: String = chars[start..start + 500].iter().collect();
            total += 1;
            correct += usize::from(identify(&window, &profiles).lang() == Some(lang));
            start += 100;
        }
        let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../core/data/corpora/{lang}.txt"));
        let own = identify(&fs::read_to_string(corpus).unwrap(), &profiles);
        assert_eq!(own, Identification::Known { lang, distance: 0 }, "training corpus {lang}");
    }
    assert!(total >= 100, "only {total} windows");
    let accuracy = correct as f64 / total as f64;
    assert!(accuracy >= 0.99, "accuracy {accuracy:.4} < 0.99");
    format!("{correct}/{total} windows, accuracy {accuracy:.4}, training corpora at distance 0")
}

fn c06_boilerplate() -> String {
    let spec = SiteSpec {
        langs: Lang::BUNDLED.to_vec(),
        ..site_spec(30)
    };
    let (site, truth) = generate_site(7, &spec).unwrap();
    let params = BoilerplateParams::default();
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (url, page) in &truth.pages {
        let body = String::from_utf8(site.body(url).unwrap().to_vec()).unwrap();
        let mut doc = parse_html(&body, url);
        assert_eq!(doc.blocks.len(), page.blocks.len(), "{url}: block count");
        classify_blocks(&mut doc.blocks, &params);
        for (got, want) in doc.blocks.iter().zip(&page.blocks) {
            match (got.is_boilerplate, want.boilerplate) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    let f1 = 2.0 * precision * recall / (precision + recall);
    assert!(f1 >= 0.9, "F1 {f1:.3} < 0.9");

    let words: Vec<String> = held_out_text(Lang::EN).split_whitespace().map(str::to_string).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..300 {
        let n = rng.random_range(20..200);
        let text = (0..n)
            .map(|_| words[rng.random_range(0..words.len())].as_str())
            .collect::<Vec<_>>()
            .join(" ");
        let mut blocks = vec![Block::new("html/body/p", &text)];
        classify_blocks(&mut blocks, &params);
        assert!(!blocks[0].is_boilerplate, "long link-free block marked: {text}");
        let mut doc = parse_html(&format!("<html><body><p>{text}</p></body></html>"), "http://x.test/");
        classify_blocks(&mut doc.blocks, &params);
        assert!(doc.blocks.iter().all(|b| !b.is_boilerplate), "parsed block marked: {text}");
    }
    format!(
        "F1 {f1:.3} (precision {precision:.3}, recall {recall:.3}) over {} pages, 300 long blocks kept",
        truth.pages.len()
    )
}

fn c07_politeness() -> String {
    const DELAY_MS: u64 = 40;
    let spec = SiteSpec { hosts: 2, ..site_spec(30) };
    let (site, _) = generate_site(7, &spec).unwrap();
    let home = site.home(Lang::EN);
    let site = site.with_latency(Duration::from_millis(3));
    let policy = PolitenessPolicy {
        min_delay_ms_per_host: DELAY_MS,
        ..PolitenessPolicy::default()
    };
    let fetcher = Fetcher::new(Arc::new(site), policy);
    let config = CrawlConfig {
        targets: vec![(Lang::EN, fixture_topic(Lang::EN).unwrap())],
        keep_all: false,
        limits: CrawlLimits {
            max_pages: Some(40),
            ..CrawlLimits::default()
        },
        workers: 4,
        link_alpha: 0.75,
        boilerplate: BoilerplateParams::default(),
    };
    let tmp = TempDir::new().unwrap();
    let outcome = run_crawl(&[home], &config, &fetcher, &bundled_profiles(), tmp.path()).unwrap();
    let mut by_host: BTreeMap<String, Vec<Instant>> = BTreeMap::new();
    for e in &outcome.fetch_log {
        by_host.entry(e.host.clone()).or_default().push(e.started);
    }
    assert!(by_host.len() >= 2, "only {} hosts fetched", by_host.len());
    let mut min_gap = Duration::MAX;
    for (host, starts) in &mut by_host {
        starts.sort();
        for w in starts.windows(2) {
            let gap = w[1] - w[0];
            min_gap = min_gap.min(gap);
            assert!(gap >= Duration::from_millis(DELAY_MS), "{host}: requests {gap:?} apart");
        }
    }
    assert!(outcome.fetch_log.iter().all(|e| host_of(&e.url).as_deref() == Some(e.host.as_str())));
    format!(
        "{} requests on {} hosts, 4 workers, min same-host gap {:.1} ms",
        outcome.fetch_log.len(),
        by_host.len(),
        min_gap.as_secs_f64() * 1000.0
    )
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, acc: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, acc);
            } else {
                acc.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut acc = BTreeMap::new();
    walk(dir, dir, &mut acc);
    acc
}

fn c08_determinism() -> String {
    let tmp = TempDir::new().unwrap();
    let spec = SiteSpec {
        pair_fraction: 0.75,
        ..site_spec(30)
    };
    let (a, _) = generate_site(11, &spec).unwrap();
    let (b, _) = generate_site(11, &spec).unwrap();
    assert_eq!(a.fingerprint(), b.fingerprint(), "site generation differs");
    let (site, _, home) = site_dir(tmp.path(), 11, &spec);
    let topic = write_topic(tmp.path(), Lang::EN);
    let mut files = 0;
    for run in 0..2 {
        let mono = tmp.path().join(format!("mono{run}"));
        webcorpus(&[
            "--site-dir",
            path_str(&site),
            "--seed-url",
            &home,
            "--workers",
            "1",
            "--out",
            path_str(&mono),
            "crawl-mono",
            "--topic",
            path_str(&topic),
            "--lang",
            "en",
            "--max-pages",
            "60",
            "--min-delay-ms",
            "0",
        ]);
        let bi = tmp.path().join(format!("bi{run}"));
        crawl_bi(&site, &home, tmp.path(), &bi, &[]);
        webcorpus(&["--out", path_str(&bi), "align"]);
        webcorpus(&["--out", path_str(&bi), "export-tmx"]);
    }
    for kind in ["mono", "bi"] {
        let first = tree(&tmp.path().join(format!("{kind}0")));
        let second = tree(&tmp.path().join(format!("{kind}1")));
        assert!(!first.is_empty(), "{kind}: empty output");
        assert_eq!(
            first.keys().collect::<Vec<_>>(),
            second.keys().collect::<Vec<_>>(),
            "{kind}: file sets differ"
        );
        for (path, bytes) in &first {
            assert!(second[path] == *bytes, "{kind}: {} differs", path.display());
        }
        files += first.len();
    }
    format!("{files} files byte-identical across two runs")
}

fn urls(domain: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("http://{domain}/p{i}.html")).collect()
}

fn domains(records: &[SiteRecord]) -> Vec<String> {
    records.iter().map(|r| r.domain.clone()).collect()
}

fn c09_ipr() -> String {
    let batch1: Vec<String> = [urls("six.test", 6), urls("seven.test", 7), urls("one.test", 1)].concat();
    let records = aggregate_sites(&batch1, "1");
    assert_eq!(domains(&ipr_candidates(&records, 7, Mode::Monolingual)), ["seven.test"]);
    let bilingual = ipr_candidates(&records, 7, Mode::Bilingual);
    assert_eq!(bilingual.len(), 3, "bilingual mode keeps every site");

    let batch2: Vec<String> = [urls("a99.test", 99), urls("a100.test", 100)].concat();
    let records2 = aggregate_sites(&batch2, "2");
    assert_eq!(domains(&ipr_candidates(&records2, 100, Mode::Monolingual)), ["a100.test"]);

    let day = |s: &str| chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap();
    let mut fast = SiteRecord::new("fast.test", 10, "1");
    fast.status = Status::Granted;
    fast.contact_opened = Some(day("2012-01-01"));
    fast.resolved = Some(day("2012-01-02"));
    let mut slow = SiteRecord::new("slow.test", 10, "1");
    slow.status = Status::Granted;
    slow.contact_opened = Some(day("2012-01-01"));
    slow.resolved = Some(day("2012-05-11"));
    let stats = negotiation_stats(&[fast, slow]).unwrap();
    assert_eq!((stats.min_days, stats.max_days, stats.mean_days), (1, 131, 66));
    assert_eq!(duration_stats(&[1, 131]).unwrap(), stats);

    let tmp = TempDir::new().unwrap();
    let index = tmp.path().join("index.tsv");
    let mut text = String::from("file\turl\tscore\tlanguage\n");
    for (i, u) in batch1.iter().enumerate() {
        text.push_str(&format!("docs/{:06}.xml\t{u}\t0.5000\ten\n", i + 1));
    }
    fs::write(&index, text).unwrap();
    let ledger = tmp.path().join("ledger.tsv");
    let report = webcorpus(&[
        "--out",
        path_str(tmp.path()),
        "ipr-report",
        "--index",
        path_str(&index),
        "--ledger",
        path_str(&ledger),
    ]);
    assert!(report.contains("seven.test") && !report.contains("six.test"), "report: {report}");
    assert!(ledger.exists(), "ledger not written");
    format!("7 vs 6 pages, 100 vs 99 pages, bilingual keeps all, stats 1/131/{}", stats.mean_days)
}

fn c10_round_trip() -> String {
    let tmp = TempDir::new().unwrap();
    let spec = SiteSpec {
        relevant_fraction: 0.6,
        ..site_spec(25)
    };
    let (site, _, home) = site_dir(tmp.path(), 13, &spec);
    let out = tmp.path().join("out");
    crawl_bi(&site, &home, tmp.path(), &out, &[]);
    webcorpus(&["--out", path_str(&out), "align"]);
    webcorpus(&["--out", path_str(&out), "export-tmx"]);
    let (mut docs, mut pairs, mut tmx) = (0, 0, 0);
    for (path, bytes) in tree(&out) {
        let text = String::from_utf8(bytes).unwrap();
        match path.extension().and_then(|e| e.to_str()) {
            Some("xml") if path.starts_with("docs") => {
                assert!(is_well_formed(&text), "{} malformed", path.display());
                let (doc, meta) = read_document_xml(&text).unwrap();
                assert_eq!(write_document_xml(&doc, &meta).unwrap(), text, "{}", path.display());
                docs += 1;
            }
            Some("xml") => {
                assert!(is_well_formed(&text), "{} malformed", path.display());
                let pf = parse_pair_xml(&text, path_str(&path)).unwrap();
                assert_eq!(pf.to_xml(), text, "{}", path.display());
                pairs += 1;
            }
            Some("tmx") => {
                assert!(is_well_formed(&text), "{} malformed", path.display());
                let parsed = read_tmx(&text).unwrap();
                let other = parsed
                    .units
                    .iter()
                    .flatten()
                    .map(|(l, _)| *l)
                    .find(|l| *l != parsed.srclang)
                    // An empty body names no second language.
                    .unwrap_or(parsed.srclang);
                let meta = TmxMeta::new(parsed.creation_date.expect("creation date"));
                let again = to_tmx(&parsed.pairs(parsed.srclang, other), parsed.srclang, other, &meta);
                assert_eq!(again, text, "{}", path.display());
                tmx += 1;
            }
            _ => {}
        }
    }
    assert!(docs > 0 && pairs > 0 && tmx > 1, "docs {docs}, pairs {pairs}, tmx {tmx}");
    format!("{docs} documents, {pairs} pair files, {tmx} TMX files round-trip byte-identically")
}
