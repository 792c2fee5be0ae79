//! Corporate ownership attribution: resolving obscure tracker domains to
//! named owners and ranking owners by page reach.
//!
//! ```bash
//! cargo run -p webcensus --example ownership_attribution
//! ```

use anyhow::Result;
use webcensus::capture::har::ingest_har;
use webcensus::classify::classify_page;
use webcensus::fixture;
use webcensus::ownership::{rank_owner_prevalence, OwnershipDb};
use webcensus::psl::PublicSuffixRuleset;
use webcensus::uri::ExtensionRules;

fn main() -> Result<()> {
    let db = OwnershipDb::bundled();
    println!("ownership db version {} ({} owners)\n", db.version, db.records().len());

    // Seemingly-unrelated domains funnel to the same corporations.
    for domain in ["2mdn.net", "fbcdn.net", "scorecardresearch.com", "rlcdn.com", "omtrdc.net", "mystery-tracker.example"] {
        match db.resolve_str(domain) {
            Some(owner) => println!(
                "{domain:28} -> {} ({})",
                owner.display_name, owner.revenue_model
            ),
            None => println!("{domain:28} -> unattributed"),
        }
    }

    // Owner reach over a small classified corpus: one count per page per
    // owner, however many requests the owner receives.
    let rules = PublicSuffixRuleset::bundled();
    let records: Vec<_> = ingest_har(&fixture::demo_har())?
        .iter()
        .map(|page| classify_page(page, &rules, &ExtensionRules::default()))
        .collect::<Result<_, _>>()?;
    let ranking = rank_owner_prevalence(&records, &db)?;

    println!("\nowner reach over {} demo pages:", records.len());
    for row in &ranking.rows {
        println!("  {:12} {:>5.1}%  ({} pages)", row.owner_id, row.percent, row.pages);
    }
    println!(
        "  {:12} {:>5.1}%  ({} pages)",
        ranking.unattributed.owner_id, ranking.unattributed.percent, ranking.unattributed.pages
    );
    Ok(())
}
