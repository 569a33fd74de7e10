use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use webcorpus_core::sitegen::fixture_topic_text;
use webcorpus_core::Lang;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_webcorpus"))
        .args(args)
        .output()
        .expect("run webcorpus")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn topic(dir: &Path, lang: Lang) -> PathBuf {
    let path = dir.join(format!("{lang}.tsv"));
    fs::write(&path, fixture_topic_text(lang).unwrap()).unwrap();
    path
}

/// Simulated site under `dir/site`.
fn simulate(dir: &Path, extra: &[&str]) -> PathBuf {
    let site = dir.join("site");
    let mut args = vec!["--out", s(&site), "simulate", "--pages-per-lang", "12"];
    args.extend_from_slice(extra);
    let stdout = ok(&args);
    assert!(stdout.contains("home http://site0.test/"), "{stdout}");
    site
}

fn crawl_mono(dir: &Path, site: &Path, out: &Path, extra: &[&str]) -> Output {
    let t = topic(dir, Lang::EN);
    let mut args = vec![
        "--site-dir",
        s(site),
        "--seed-url",
        "http://site0.test/en/index.html",
        "--out",
        s(out),
        "crawl-mono",
        "--topic",
        s(&t),
        "--lang",
        "en",
        "--min-delay-ms",
        "0",
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn simulate_writes_truth() {
    let tmp = TempDir::new().unwrap();
    let site = simulate(tmp.path(), &[]);
    assert!(site.join("manifest.tsv").is_file());
    let pairs = fs::read_to_string(site.join("truth/pairs.tsv")).unwrap();
    assert!(pairs.lines().count() >= 12);
    assert!(!fs::read_to_string(site.join("truth/relevant.txt")).unwrap().is_empty());
}

#[test]
fn crawl_without_seeds_fails() {
    let tmp = TempDir::new().unwrap();
    let t = topic(tmp.path(), Lang::EN);
    let out = run(&["--out", s(tmp.path()), "crawl-mono", "--topic", s(&t), "--lang", "en", "--max-pages", "5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no seed"));
}

#[test]
fn off_scheme_seed_fails() {
    let tmp = TempDir::new().unwrap();
    let t = topic(tmp.path(), Lang::EN);
    let out = run(&[
        "--seed-url",
        "ftp://example.test/",
        "--out",
        s(tmp.path()),
        "crawl-mono",
        "--topic",
        s(&t),
        "--lang",
        "en",
        "--max-pages",
        "5",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("ftp://example.test/"));
}

#[test]
fn unbounded_monolingual_crawl_fails() {
    let tmp = TempDir::new().unwrap();
    let site = simulate(tmp.path(), &[]);
    let out = crawl_mono(tmp.path(), &site, &tmp.path().join("out"), &[]);
    assert!(!out.status.success());
}

#[test]
fn zero_page_budget_gives_empty_corpus() {
    let tmp = TempDir::new().unwrap();
    let site = simulate(tmp.path(), &[]);
    let out = tmp.path().join("out");
    let res = crawl_mono(tmp.path(), &site, &out, &["--max-pages", "0"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let index = fs::read_to_string(out.join("index.tsv")).unwrap();
    assert_eq!(index.lines().count(), 1, "header only: {index}");
}

#[test]
fn monolingual_site_yields_no_pairs() {
    let tmp = TempDir::new().unwrap();
    let site = simulate(tmp.path(), &["--langs", "en"]);
    let out = tmp.path().join("out");
    let (a, b) = (topic(tmp.path(), Lang::EN), topic(tmp.path(), Lang::FR));
    let stdout = ok(&[
        "--site-dir",
        s(&site),
        "--seed-url",
        "http://site0.test/en/index.html",
        "--out",
        s(&out),
        "crawl-bi",
        "--topic-a",
        s(&a),
        "--topic-b",
        s(&b),
        "--lang-a",
        "en",
        "--lang-b",
        "fr",
        "--min-delay-ms",
        "0",
    ]);
    assert!(stdout.contains("pairs: 0"), "{stdout}");
    let listed = fs::read_to_string(out.join("pairs/index.tsv")).unwrap();
    assert!(listed.is_empty(), "{listed}");
}

#[test]
fn empty_pair_dir_writes_nothing() {
    let tmp = TempDir::new().unwrap();
    let pairs = tmp.path().join("pairs");
    fs::create_dir(&pairs).unwrap();
    let out = tmp.path().join("out");
    ok(&["--out", s(&out), "align", "--pairs", s(&pairs)]);
    ok(&["--out", s(&out), "export-tmx", "--pairs", s(&pairs)]);
    assert!(!out.join("tmx").exists());
}

#[test]
fn bilingual_run_with_tsv_alignment() {
    let tmp = TempDir::new().unwrap();
    let site = simulate(tmp.path(), &[]);
    let out = tmp.path().join("out");
    let (a, b) = (topic(tmp.path(), Lang::EN), topic(tmp.path(), Lang::FR));
    ok(&[
        "--site-dir",
        s(&site),
        "--seed-url",
        "http://site0.test/en/index.html",
        "--out",
        s(&out),
        "crawl-bi",
        "--topic-a",
        s(&a),
        "--topic-b",
        s(&b),
        "--lang-a",
        "en",
        "--lang-b",
        "fr",
        "--min-delay-ms",
        "0",
    ]);
    let stdout = ok(&["--out", s(&out), "align", "--format", "tsv"]);
    assert!(stdout.contains("aligned pairs:"));
    let files: Vec<_> = fs::read_dir(out.join("tsv")).unwrap().map(|e| e.unwrap().path()).collect();
    assert!(!files.is_empty());
    let some = files
        .iter()
        .map(|f| fs::read_to_string(f).unwrap())
        .find(|t| !t.is_empty())
        .unwrap();
    assert!(some.lines().all(|l| l.split('\t').count() == 2));

    // Detection alone reproduces the crawl's pair list.
    let before = fs::read_dir(out.join("pairs")).unwrap().count();
    ok(&["--out", s(&out), "detect-pairs", "--lang-a", "en", "--lang-b", "fr"]);
    assert_eq!(fs::read_dir(out.join("pairs")).unwrap().count(), before);
}

#[test]
fn flags_override_config_file() {
    let tmp = TempDir::new().unwrap();
    let site = simulate(tmp.path(), &[]);
    let config = tmp.path().join("webcorpus.conf");
    fs::write(&config, "# test\ncrawl.max_pages = 3\nfetch.min_delay_ms = 0\n").unwrap();
    let t = topic(tmp.path(), Lang::EN);
    let crawl = |out: &Path, extra: &[&str]| {
        let mut args = vec![
            "--config",
            s(&config),
            "--site-dir",
            s(&site),
            "--seed-url",
            "http://site0.test/en/index.html",
            "--out",
            s(out),
            "crawl-mono",
            "--topic",
            s(&t),
            "--lang",
            "en",
        ];
        args.extend_from_slice(extra);
        ok(&args)
    };
    let from_file = crawl(&tmp.path().join("a"), &[]);
    assert!(from_file.contains("pages fetched: 3,"), "{from_file}");
    let from_flag = crawl(&tmp.path().join("b"), &["--max-pages", "5"]);
    assert!(from_flag.contains("pages fetched: 5,"), "{from_flag}");

    fs::write(&config, "crawl.max_pages = lots\n").unwrap();
    let bad = run(&[
        "--config",
        s(&config),
        "--site-dir",
        s(&site),
        "--seed-url",
        "http://site0.test/en/index.html",
        "--out",
        s(&tmp.path().join("c")),
        "crawl-mono",
        "--topic",
        s(&t),
        "--lang",
        "en",
    ]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("crawl.max_pages"));
}

#[test]
fn ipr_report_from_index() {
    let tmp = TempDir::new().unwrap();
    let mut index = String::from("file\turl\tscore\tlanguage\n");
    for i in 0..8 {
        index.push_str(&format!("docs/{:06}.xml\thttp://big.test/{i}.html\t0.3000\ten\n", i + 1));
    }
    index.push_str("docs/000009.xml\thttp://small.test/a.html\t0.3000\ten\n");
    fs::write(tmp.path().join("index.tsv"), index).unwrap();
    let report = ok(&["--out", s(tmp.path()), "ipr-report"]);
    assert!(report.contains("big.test"));
    assert!(!report.contains("small.test"));
    let all = ok(&["--out", s(tmp.path()), "ipr-report", "--mode", "bilingual"]);
    assert!(all.contains("small.test"));
}
