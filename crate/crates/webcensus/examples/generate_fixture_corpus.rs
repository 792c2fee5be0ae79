//! Emit the synthetic acceptance corpus as HAR files. The corpus encodes
//! its ground truth by construction (per-category prevalence, owner
//! reach, the top-element histogram, and a 3.24% https share), so the
//! analyze/report pipeline can be checked for exactness against it.
//!
//! ```bash
//! cargo run --release -p webcensus --example generate_fixture_corpus -- out/hars
//! ```

use anyhow::Result;
use std::path::PathBuf;
use webcensus::fixture::{self, CATEGORIES};

fn main() -> Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("fixture-corpus"));
    let manifest = fixture::generate_census_corpus(&dir)?;

    println!(
        "wrote {} har files to {} ({} loaded pages, {} failures, {} requests)",
        manifest.har_files.len(),
        dir.display(),
        manifest.pages_loaded,
        manifest.pages_failed,
        manifest.requests
    );
    println!("\npage plan (count / third-party request / javascript / cookie):");
    for plan in CATEGORIES {
        println!(
            "  {:6} {:>5} / {:>4} / {:>4} / {:>4}",
            plan.label, plan.count, plan.req, plan.js, plan.cookie
        );
    }
    println!("\nanalyze it with:");
    println!("  webcensus analyze --input {} --out-dir runs", dir.display());
    Ok(())
}
