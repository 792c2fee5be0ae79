//! Command-line surface over the census pipeline. Each subcommand runs one
//! stage; stages communicate through on-disk artifacts, so a full offline
//! census is `analyze` followed by `report`.

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use webcensus::config::{self, print_effective_config};
use webcensus::pipeline::{run_pipeline, Stage};

#[derive(Parser)]
#[command(
    name = "webcensus",
    version,
    about = "Web-privacy census: third-party requests, cookies, owner reach, Referer leakage"
)]
struct Cli {
    /// TOML config file (flags > WEBCENSUS_* env > file > defaults).
    #[arg(long, global = true, value_name = "FILE")]
    config_file: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct CommonFlags {
    /// Stage input artifact (result sets, page list, HAR dir, record log).
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Output root; runs land in <out-dir>/run-<timestamp>-<digest>.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Public-suffix ruleset file (bundled snapshot when omitted).
    #[arg(long, value_name = "FILE")]
    ruleset: Option<PathBuf>,
    /// Ownership database file (bundled snapshot when omitted).
    #[arg(long, value_name = "FILE")]
    owner_db: Option<PathBuf>,
    /// Lexicon file (bundled list when omitted).
    #[arg(long, value_name = "FILE")]
    lexicon: Option<PathBuf>,
    /// Skip-and-count corrupt record-log lines instead of failing fast.
    #[arg(long)]
    tolerant_read: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Build the deduplicated page list from search-result sets (.tsv).
    Pagelist {
        #[command(flatten)]
        common: CommonFlags,
        /// Comma-separated binary extensions to filter out.
        #[arg(long, value_name = "LIST")]
        binary_extensions: Option<String>,
    },
    /// Capture pages live through a browser remote-debugging endpoint.
    Scan {
        #[command(flatten)]
        common: CommonFlags,
        /// Remote-debugging endpoint, host:port.
        #[arg(long, value_name = "HOST:PORT")]
        browser_endpoint: Option<String>,
        /// Seconds to let each page settle after navigation.
        #[arg(long, value_name = "SECONDS")]
        settle_seconds: Option<u32>,
        /// Hard per-page ceiling wrapping the settle window.
        #[arg(long, value_name = "SECONDS")]
        hard_timeout_seconds: Option<u32>,
        /// Concurrent captures, each in an isolated browser context.
        #[arg(long, value_name = "N")]
        parallel_captures: Option<u32>,
    },
    /// Classify HAR traffic into the per-page record log.
    Analyze {
        #[command(flatten)]
        common: CommonFlags,
        /// Comma-separated extensions classified as dynamic pages.
        #[arg(long, value_name = "LIST")]
        dynamic_page_extensions: Option<String>,
    },
    /// Aggregate a record log into summary tables and the leakage sample.
    Report {
        #[command(flatten)]
        common: CommonFlags,
        /// Elements considered by top-element tables and the histogram.
        #[arg(long, value_name = "N")]
        top_n: Option<usize>,
        #[command(flatten)]
        sampling: SamplingFlags,
    },
    /// Assess a seeded random URI sample for sensitive-term leakage.
    Leakage {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        sampling: SamplingFlags,
    },
    /// Print every effective config value with its origin.
    Config {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        sampling: SamplingFlags,
        #[arg(long, value_name = "SECONDS")]
        settle_seconds: Option<u32>,
        #[arg(long, value_name = "SECONDS")]
        hard_timeout_seconds: Option<u32>,
        #[arg(long, value_name = "N")]
        parallel_captures: Option<u32>,
        #[arg(long, value_name = "N")]
        top_n: Option<usize>,
        #[arg(long, value_name = "HOST:PORT")]
        browser_endpoint: Option<String>,
        #[arg(long, value_name = "LIST")]
        binary_extensions: Option<String>,
        #[arg(long, value_name = "LIST")]
        dynamic_page_extensions: Option<String>,
    },
}

#[derive(Args, Default)]
struct SamplingFlags {
    /// URIs to sample for the leakage assessment.
    #[arg(long, value_name = "N")]
    sample_n: Option<usize>,
    /// Sample seed (ChaCha8 Fisher-Yates; same seed, same sample).
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
    /// Include the host in leakage term matching.
    #[arg(long)]
    leakage_include_host: bool,
}

fn flag_map(common: &CommonFlags) -> BTreeMap<String, String> {
    let mut flags = BTreeMap::new();
    let mut put_path = |key: &str, value: &Option<PathBuf>| {
        if let Some(path) = value {
            flags.insert(key.to_string(), path.display().to_string());
        }
    };
    put_path("input", &common.input);
    put_path("out_dir", &common.out_dir);
    put_path("ruleset", &common.ruleset);
    put_path("owner_db", &common.owner_db);
    put_path("lexicon", &common.lexicon);
    if common.tolerant_read {
        flags.insert("tolerant_read".into(), "true".into());
    }
    flags
}

fn add_sampling(flags: &mut BTreeMap<String, String>, sampling: &SamplingFlags) {
    if let Some(n) = sampling.sample_n {
        flags.insert("sample_n".into(), n.to_string());
    }
    if let Some(seed) = sampling.seed {
        flags.insert("seed".into(), seed.to_string());
    }
    if sampling.leakage_include_host {
        flags.insert("leakage_include_host".into(), "true".into());
    }
}

fn run(cli: Cli) -> Result<i32> {
    let env = |key: &str| std::env::var(key).ok();
    let (flags, stage) = match &cli.command {
        Command::Pagelist { common, binary_extensions } => {
            let mut flags = flag_map(common);
            if let Some(list) = binary_extensions {
                flags.insert("binary_extensions".into(), list.clone());
            }
            (flags, Some(Stage::PageList))
        }
        Command::Scan { common, browser_endpoint, settle_seconds, hard_timeout_seconds, parallel_captures } => {
            let mut flags = flag_map(common);
            if let Some(endpoint) = browser_endpoint {
                flags.insert("browser_endpoint".into(), endpoint.clone());
            }
            if let Some(value) = settle_seconds {
                flags.insert("settle_seconds".into(), value.to_string());
            }
            if let Some(value) = hard_timeout_seconds {
                flags.insert("hard_timeout_seconds".into(), value.to_string());
            }
            if let Some(value) = parallel_captures {
                flags.insert("parallel_captures".into(), value.to_string());
            }
            (flags, Some(Stage::Scan))
        }
        Command::Analyze { common, dynamic_page_extensions } => {
            let mut flags = flag_map(common);
            if let Some(list) = dynamic_page_extensions {
                flags.insert("dynamic_page_extensions".into(), list.clone());
            }
            (flags, Some(Stage::Analyze))
        }
        Command::Report { common, top_n, sampling } => {
            let mut flags = flag_map(common);
            if let Some(n) = top_n {
                flags.insert("top_n".into(), n.to_string());
            }
            add_sampling(&mut flags, sampling);
            (flags, Some(Stage::Report))
        }
        Command::Leakage { common, sampling } => {
            let mut flags = flag_map(common);
            add_sampling(&mut flags, sampling);
            (flags, Some(Stage::Leakage))
        }
        Command::Config {
            common,
            sampling,
            settle_seconds,
            hard_timeout_seconds,
            parallel_captures,
            top_n,
            browser_endpoint,
            binary_extensions,
            dynamic_page_extensions,
        } => {
            let mut flags = flag_map(common);
            add_sampling(&mut flags, sampling);
            if let Some(value) = settle_seconds {
                flags.insert("settle_seconds".into(), value.to_string());
            }
            if let Some(value) = hard_timeout_seconds {
                flags.insert("hard_timeout_seconds".into(), value.to_string());
            }
            if let Some(value) = parallel_captures {
                flags.insert("parallel_captures".into(), value.to_string());
            }
            if let Some(value) = top_n {
                flags.insert("top_n".into(), value.to_string());
            }
            if let Some(value) = browser_endpoint {
                flags.insert("browser_endpoint".into(), value.clone());
            }
            if let Some(value) = binary_extensions {
                flags.insert("binary_extensions".into(), value.clone());
            }
            if let Some(value) = dynamic_page_extensions {
                flags.insert("dynamic_page_extensions".into(), value.clone());
            }
            (flags, None)
        }
    };

    let effective = config::resolve(cli.config_file.as_deref(), &env, &flags)?;
    match stage {
        None => {
            print!("{}", print_effective_config(&effective));
            Ok(0)
        }
        Some(stage) => {
            let artifacts = run_pipeline(&effective, &[stage])?;
            println!("run directory: {}", artifacts.run_dir.display());
            if let Some(path) = &artifacts.page_list {
                println!("page list:     {}", path.display());
            }
            if let Some(path) = &artifacts.har_dir {
                println!("har files:     {}", path.display());
            }
            if let Some(path) = &artifacts.record_log {
                println!("record log:    {} ({} records)", path.display(), artifacts.records_written);
            }
            if let Some(path) = &artifacts.report_dir {
                println!("report:        {}", path.display());
            }
            if let Some(path) = &artifacts.leakage_report {
                println!("leakage:       {}", path.display());
            }
            if artifacts.analyze_skipped > 0 {
                eprintln!("warning: {} pages skipped (unclassifiable final uri)", artifacts.analyze_skipped);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}
