//! The full offline census, end to end: generate a synthetic HAR corpus,
//! run analyze + report through the pipeline, and print the headline
//! tables. This is the same path the `webcensus analyze` / `webcensus
//! report` subcommands drive.
//!
//! ```bash
//! cargo run --release -p webcensus --example census_report
//! ```

use anyhow::Result;
use std::collections::BTreeMap;
use webcensus::config::resolve;
use webcensus::fixture;
use webcensus::pipeline::{run_pipeline, Stage};

fn main() -> Result<()> {
    let work = std::env::temp_dir().join(format!("webcensus-census-report-{}", std::process::id()));
    let har_dir = work.join("hars");
    println!("generating synthetic corpus under {} ...", har_dir.display());
    let manifest = fixture::generate_census_corpus(&har_dir)?;
    println!(
        "  {} loaded pages, {} failures, {} requests, {} har files\n",
        manifest.pages_loaded,
        manifest.pages_failed,
        manifest.requests,
        manifest.har_files.len()
    );

    let mut flags = BTreeMap::new();
    flags.insert("input".to_string(), har_dir.display().to_string());
    flags.insert("out_dir".to_string(), work.join("runs").display().to_string());
    let effective = resolve(None, &|key| std::env::var(key).ok(), &flags)?;

    println!("running analyze + report ...");
    let artifacts = run_pipeline(&effective, &[Stage::Analyze, Stage::Report])?;
    let report_dir = artifacts.report_dir.expect("report stage ran");
    println!("  record log: {} ({} records)\n", artifacts.record_log.unwrap().display(), artifacts.records_written);

    for table in ["tld_prevalence.csv", "extension_histogram.csv", "owner_ranking.csv", "leakage.csv", "load_failures.csv"] {
        println!("--- {table}");
        print!("{}", std::fs::read_to_string(report_dir.join(table))?);
        println!();
    }
    println!("full report under {}", report_dir.display());
    Ok(())
}
