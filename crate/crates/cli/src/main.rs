//! `webcorpus`: crawl, pair, align and report from the command line.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use webcorpus_core::align::{align_sentences, extract_pairs, split_blocks, to_tmx, to_tsv, TmxMeta};
use webcorpus_core::boilerplate::BoilerplateParams;
use webcorpus_core::config::Config;
use webcorpus_core::crawl::{load_pool, run_crawl, CrawlConfig, CrawlOutcome};
use webcorpus_core::export::{read_document_xml, read_index};
use webcorpus_core::fetch::{Fetcher, HttpSource, PageSource, PolitenessPolicy};
use webcorpus_core::frontier::CrawlLimits;
use webcorpus_core::langid::bundled_profiles;
use webcorpus_core::pairs::{detect_pairs, read_pair_list, write_pair_list, PairParams};
use webcorpus_core::provenance::{
    aggregate_sites, format_ledger, merge_ledger, parse_ledger, render_report, Mode,
};
use webcorpus_core::sitegen::{generate_site, SiteSpec, SyntheticSite};
use webcorpus_core::topic::{parse_topic_definition, TopicDefinition, DEFAULT_LINK_ALPHA};
use webcorpus_core::Lang;

/// Relevance threshold used when neither a flag nor the config sets one.
const DEFAULT_THRESHOLD: f64 = 0.05;

#[derive(Parser, Debug)]
#[command(name = "webcorpus", version, about = "Focused crawling and bitext mining for domain corpora")]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    /// Seed URL; repeatable.
    #[arg(long = "seed-url", global = true)]
    seed_urls: Vec<String>,
    /// File with one seed URL per line.
    #[arg(long, global = true)]
    seed_file: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Serve pages from a site written by `simulate` instead of the network.
    #[arg(long, global = true)]
    site_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct CrawlFlags {
    #[arg(long)]
    max_pages: Option<usize>,
    #[arg(long)]
    max_seconds: Option<u64>,
    #[arg(long)]
    max_depth: Option<u32>,
    #[arg(long)]
    same_host_only: bool,
    #[arg(long)]
    min_delay_ms: Option<u64>,
    #[arg(long)]
    timeout_ms: Option<u64>,
    #[arg(long)]
    user_agent: Option<String>,
    #[arg(long)]
    ignore_robots: bool,
    /// Relevance threshold; a page is relevant when its score exceeds it.
    #[arg(long)]
    threshold: Option<f64>,
    /// Weight of the link context against the source page score.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Tmx,
    Tsv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Monolingual,
    Bilingual,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Focused monolingual crawl.
    CrawlMono {
        #[arg(long)]
        topic: PathBuf,
        #[arg(long)]
        lang: Lang,
        #[command(flatten)]
        flags: CrawlFlags,
    },
    /// Same-host crawl of a bilingual site followed by pair detection.
    CrawlBi {
        #[arg(long)]
        topic_a: PathBuf,
        #[arg(long)]
        topic_b: PathBuf,
        #[arg(long)]
        lang_a: Lang,
        #[arg(long)]
        lang_b: Lang,
        #[command(flatten)]
        flags: CrawlFlags,
    },
    /// Detect document pairs in an exported crawl.
    DetectPairs {
        #[arg(long)]
        lang_a: Lang,
        #[arg(long)]
        lang_b: Lang,
    },
    /// Sentence-align every pair of a pair list, one output file per pair.
    Align {
        /// Pair-list directory; defaults to OUT/pairs.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "tmx")]
        format: Format,
    },
    /// Sentence-align every pair into a single TMX file.
    ExportTmx {
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Output file; defaults to OUT/tmx/corpus.tmx.
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Per-site page counts and IPR candidates.
    IprReport {
        /// Crawl index; defaults to OUT/index.tsv.
        #[arg(long)]
        index: Option<PathBuf>,
        /// Ledger TSV, created or refreshed with the new counts.
        #[arg(long)]
        ledger: Option<PathBuf>,
        #[arg(long, default_value = "1")]
        batch: String,
        #[arg(long)]
        min_pages: Option<usize>,
        #[arg(long, value_enum, default_value = "monolingual")]
        mode: ModeArg,
    },
    /// Generate a synthetic site and write it to OUT.
    Simulate {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        pages_per_lang: usize,
        #[arg(long, value_delimiter = ',', default_value = "en,fr")]
        langs: Vec<Lang>,
        #[arg(long, default_value_t = 0.5)]
        relevant_fraction: f64,
        #[arg(long, default_value_t = 3)]
        boilerplate_templates: usize,
        #[arg(long, default_value_t = 1.0)]
        pair_fraction: f64,
        #[arg(long, default_value_t = 0.0)]
        sentence_merge_rate: f64,
        #[arg(long, default_value_t = 12)]
        sentences_per_page: usize,
        #[arg(long, default_value_t = 1)]
        hosts: usize,
    },
}

struct Ctx {
    cli: Cli,
    config: Config,
}

impl Ctx {
    fn seeds(&self) -> Result<Vec<String>> {
        let mut seeds = self.cli.seed_urls.clone();
        if let Some(path) = &self.cli.seed_file {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            seeds.extend(
                text.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(str::to_string),
            );
        }
        if seeds.is_empty() {
            if let Some(s) = self.config.raw("crawl.seed_url") {
                seeds.push(s.to_string());
            }
        }
        if seeds.is_empty() {
            bail!("no seed URLs: pass --seed-url or --seed-file");
        }
        Ok(seeds)
    }

    fn source(&self) -> Result<Arc<dyn PageSource>> {
        Ok(match &self.cli.site_dir {
            Some(dir) => Arc::new(
                SyntheticSite::load(dir).with_context(|| format!("loading site from {}", dir.display()))?,
            ),
            None => Arc::new(HttpSource::new()),
        })
    }

    fn policy(&self, f: &CrawlFlags) -> Result<PolitenessPolicy> {
        let d = PolitenessPolicy::default();
        let c = &self.config;
        Ok(PolitenessPolicy {
            min_delay_ms_per_host: c.resolve(f.min_delay_ms, "fetch.min_delay_ms", d.min_delay_ms_per_host)?,
            max_redirects: c.resolve(None, "fetch.max_redirects", d.max_redirects)?,
            user_agent: c.resolve(f.user_agent.clone(), "fetch.user_agent", d.user_agent)?,
            respect_robots: !c.resolve(f.ignore_robots.then_some(true), "fetch.ignore_robots", false)?,
            per_fetch_timeout_ms: c.resolve(f.timeout_ms, "fetch.timeout_ms", d.per_fetch_timeout_ms)?,
        })
    }

    fn limits(&self, f: &CrawlFlags, same_host: bool) -> Result<CrawlLimits> {
        let c = &self.config;
        Ok(CrawlLimits {
            max_pages: c.resolve_opt(f.max_pages, "crawl.max_pages")?,
            max_seconds: c.resolve_opt(f.max_seconds, "crawl.max_seconds")?,
            max_depth: c.resolve_opt(f.max_depth, "crawl.max_depth")?,
            same_host_only: same_host
                || c.resolve(f.same_host_only.then_some(true), "crawl.same_host_only", false)?,
        })
    }

    fn boilerplate(&self) -> Result<BoilerplateParams> {
        let d = BoilerplateParams::default();
        Ok(BoilerplateParams {
            link_density_max: self.config.resolve(None, "boilerplate.link_density_max", d.link_density_max)?,
            min_tokens: self.config.resolve(None, "boilerplate.min_tokens", d.min_tokens)?,
            ..d
        })
    }

    fn pair_params(&self) -> Result<PairParams> {
        let d = PairParams::default();
        let c = &self.config;
        Ok(PairParams {
            min_score: c.resolve(None, "pairs.min_score", d.min_score)?,
            min_length_ratio: c.resolve(None, "pairs.min_length_ratio", d.min_length_ratio)?,
            max_length_ratio: c.resolve(None, "pairs.max_length_ratio", d.max_length_ratio)?,
            structure_weight: c.resolve(None, "pairs.structure_weight", d.structure_weight)?,
            length_weight: c.resolve(None, "pairs.length_weight", d.length_weight)?,
            url_bonus: c.resolve(None, "pairs.url_bonus", d.url_bonus)?,
        })
    }

    fn topic(&self, path: &Path, lang: Lang, f: &CrawlFlags) -> Result<TopicDefinition> {
        let threshold = self.config.resolve(f.threshold, "topic.threshold", DEFAULT_THRESHOLD)?;
        let text = fs::read_to_string(path).with_context(|| format!("reading topic file {}", path.display()))?;
        parse_topic_definition(&text, lang, threshold).with_context(|| format!("topic file {}", path.display()))
    }

    fn crawl(&self, targets: Vec<(Lang, TopicDefinition)>, keep_all: bool, flags: &CrawlFlags) -> Result<CrawlOutcome> {
        let seeds = self.seeds()?;
        let config = CrawlConfig {
            targets,
            keep_all,
            limits: self.limits(flags, keep_all)?,
            workers: self.config.resolve(self.cli.workers, "crawl.workers", 1)?,
            link_alpha: self.config.resolve(flags.alpha, "topic.alpha", DEFAULT_LINK_ALPHA)?,
            boilerplate: self.boilerplate()?,
        };
        let fetcher = Fetcher::new(self.source()?, self.policy(flags)?);
        let profiles = bundled_profiles();
        let outcome = run_crawl(&seeds, &config, &fetcher, &profiles, &self.cli.out)?;
        println!("{}", outcome.summary());
        Ok(outcome)
    }

    fn pairs_dir(&self, given: &Option<PathBuf>) -> PathBuf {
        given.clone().unwrap_or_else(|| self.cli.out.join("pairs"))
    }

    fn detect(&self, lang_a: Lang, lang_b: Lang) -> Result<usize> {
        let out = &self.cli.out;
        let pool = load_pool(out).with_context(|| format!("reading crawl in {}", out.display()))?;
        let pairs = detect_pairs(&pool, lang_a, lang_b, &self.pair_params()?);
        write_pair_list(&pairs, &pool, &out.join("docs"), &out.join("pairs"))?;
        println!("documents: {}, pairs: {}", pool.len(), pairs.len());
        Ok(pairs.len())
    }
}

/// Aligned segments of every pair in `pairs_dir`, one entry per pair file.
struct AlignedPair {
    name: String,
    langs: (Lang, Lang),
    segments: Vec<(String, String)>,
    meta: TmxMeta,
}

fn align_all(pairs_dir: &Path) -> Result<Vec<AlignedPair>> {
    if !pairs_dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (path, pair) in read_pair_list(pairs_dir)? {
        let mut sides = Vec::new();
        let mut latest = None;
        for i in 0..2 {
            let doc_path = pair.resolve(&path, i);
            let text = fs::read_to_string(&doc_path).with_context(|| format!("reading {}", doc_path.display()))?;
            let (doc, meta) = read_document_xml(&text).with_context(|| doc_path.display().to_string())?;
            latest = latest.max(Some(meta.fetched_at));
            let lang = pair.docs[i].0;
            sides.push((lang, split_blocks(&doc.content_texts(), lang)));
        }
        let beads = align_sentences(&sides[0].1, &sides[1].1);
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        out.push(AlignedPair {
            name,
            langs: (sides[0].0, sides[1].0),
            segments: extract_pairs(&beads, &sides[0].1, &sides[1].1),
            meta: TmxMeta::new(latest.expect("two documents")),
        });
    }
    Ok(out)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => Config::load(p).with_context(|| format!("config {}", p.display()))?,
        None => Config::default(),
    };
    let ctx = Ctx { cli, config };
    match &ctx.cli.command {
        Command::CrawlMono { topic, lang, flags } => {
            let topic = ctx.topic(topic, *lang, flags)?;
            ctx.crawl(vec![(*lang, topic)], false, flags)?;
        }
        Command::CrawlBi {
            topic_a,
            topic_b,
            lang_a,
            lang_b,
            flags,
        } => {
            if lang_a == lang_b {
                bail!("--lang-a and --lang-b must differ");
            }
            let targets = vec![
                (*lang_a, ctx.topic(topic_a, *lang_a, flags)?),
                (*lang_b, ctx.topic(topic_b, *lang_b, flags)?),
            ];
            ctx.crawl(targets, true, flags)?;
            ctx.detect(*lang_a, *lang_b)?;
        }
        Command::DetectPairs { lang_a, lang_b } => {
            ctx.detect(*lang_a, *lang_b)?;
        }
        Command::Align { pairs, format } => {
            let aligned = align_all(&ctx.pairs_dir(pairs))?;
            for a in &aligned {
                let (path, body) = match format {
                    Format::Tmx => (
                        ctx.cli.out.join("tmx").join(format!("{}.tmx", a.name)),
                        to_tmx(&a.segments, a.langs.0, a.langs.1, &a.meta),
                    ),
                    Format::Tsv => (ctx.cli.out.join("tsv").join(format!("{}.tsv", a.name)), to_tsv(&a.segments)),
                };
                write_file(&path, &body)?;
            }
            println!("aligned pairs: {}", aligned.len());
        }
        Command::ExportTmx { pairs, file } => {
            let aligned = align_all(&ctx.pairs_dir(pairs))?;
            let Some(first) = aligned.first() else {
                println!("aligned pairs: 0");
                return Ok(());
            };
            let langs = first.langs;
            let mut segments = Vec::new();
            for a in &aligned {
                if a.langs != langs {
                    warn!("{}: languages {}-{} differ from {}-{}, skipped", a.name, a.langs.0, a.langs.1, langs.0, langs.1);
                    continue;
                }
                segments.extend(a.segments.iter().cloned());
            }
            let date = aligned.iter().map(|a| a.meta.creation_date).max().expect("non-empty");
            let path = file.clone().unwrap_or_else(|| ctx.cli.out.join("tmx").join("corpus.tmx"));
            write_file(&path, &to_tmx(&segments, langs.0, langs.1, &TmxMeta::new(date)))?;
            println!("aligned pairs: {}, segments: {}", aligned.len(), segments.len());
        }
        Command::IprReport {
            index,
            ledger,
            batch,
            min_pages,
            mode,
        } => {
            let index = index.clone().unwrap_or_else(|| ctx.cli.out.join("index.tsv"));
            let rows = read_index(&index)?;
            let urls: Vec<&str> = rows.iter().map(|r| r.url.as_str()).collect();
            let fresh = aggregate_sites(&urls, batch);
            let records = match ledger {
                Some(path) => {
                    let existing = if path.is_file() {
                        parse_ledger(&fs::read_to_string(path)?).with_context(|| path.display().to_string())?
                    } else {
                        Vec::new()
                    };
                    let merged = merge_ledger(&existing, &fresh);
                    write_file(path, &format_ledger(&merged))?;
                    merged.into_iter().filter(|r| r.batch == *batch).collect()
                }
                None => fresh,
            };
            let mode = match mode {
                ModeArg::Monolingual => Mode::Monolingual,
                ModeArg::Bilingual => Mode::Bilingual,
            };
            let min_pages = ctx.config.resolve(*min_pages, "ipr.min_pages", 7)?;
            print!("{}", render_report(&records, min_pages, mode));
        }
        Command::Simulate {
            seed,
            pages_per_lang,
            langs,
            relevant_fraction,
            boilerplate_templates,
            pair_fraction,
            sentence_merge_rate,
            sentences_per_page,
            hosts,
        } => {
            let spec = SiteSpec {
                pages_per_lang: *pages_per_lang,
                langs: langs.clone(),
                relevant_fraction: *relevant_fraction,
                boilerplate_templates: *boilerplate_templates,
                pair_fraction: *pair_fraction,
                sentence_merge_rate: *sentence_merge_rate,
                sentences_per_page: *sentences_per_page,
                hosts: *hosts,
            };
            let (site, truth) = generate_site(*seed, &spec)?;
            site.materialize(&ctx.cli.out)?;
            let relevant: String = truth.relevant.iter().map(|u| format!("{u}\n")).collect();
            write_file(&ctx.cli.out.join("truth/relevant.txt"), &relevant)?;
            let pairs: String = truth.all_pairs().iter().map(|(a, b)| format!("{a}\t{b}\n")).collect();
            write_file(&ctx.cli.out.join("truth/pairs.tsv"), &pairs)?;
            info!("site fingerprint {:016x}", site.fingerprint());
            println!(
                "site written to {}: {} resources, {} relevant pages, {} pairs, home {}",
                ctx.cli.out.display(),
                site.urls().count(),
                truth.relevant.len(),
                truth.all_pairs().len(),
                site.home(spec.langs[0])
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
