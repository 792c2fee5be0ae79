//! Page-list construction from recorded search-result sets: normalization,
//! deduplication keeping the lowest rank, and binary-file filtering.
//!
//! ```bash
//! cargo run -p webcensus --example build_page_list
//! ```

use anyhow::Result;
use std::collections::BTreeSet;
use webcensus::capture::{build_page_list, parse_result_set, DEFAULT_BINARY_EXTENSIONS};

fn main() -> Result<()> {
    // Result-set files are tab-separated: term, rank, uri.
    let hiv = "hiv\t1\thttp://www.cdc.gov/hiv/\n\
               hiv\t2\thttp://www.cdc.gov/hiv/#statistics\n\
               hiv\t3\thttp://example.org/hiv-treatment.pdf\n\
               hiv\t4\thttp://www.nhs.uk/conditions/hiv/\n";
    let flu = "influenza\t1\thttp://www.cdc.gov/flu/\n\
               influenza\t2\tnot a uri\n\
               influenza\t3\thttp://WWW.CDC.GOV/flu/\n";

    let sets = vec![parse_result_set("hiv-2014-04", hiv)?, parse_result_set("flu-2014-04", flu)?];
    let binary: BTreeSet<String> = DEFAULT_BINARY_EXTENSIONS.iter().map(|s| s.to_string()).collect();
    let list = build_page_list(&sets, &binary);

    println!("entries:");
    for entry in &list.entries {
        println!(
            "  {:40} term={} rank={} set={}",
            entry.normalized_uri, entry.source_term, entry.rank, entry.provenance
        );
    }
    println!();
    println!("deduplicated:      {}", list.deduplicated);
    println!("filtered binary:   {}", list.filtered_binary);
    println!("dropped malformed: {}", list.dropped_malformed);
    Ok(())
}
