//! Offline traffic ingestion: HAR 1.2 documents become page-load results
//! with verbatim Referer values and header-derived cookie events.
//!
//! ```bash
//! cargo run -p webcensus --example ingest_har [page.har]
//! ```

use anyhow::Result;
use webcensus::capture::har::ingest_har;
use webcensus::fixture;

fn main() -> Result<()> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => fixture::demo_har(),
    };

    for page in ingest_har(&text)? {
        println!("page {}", page.requested_uri);
        println!("  final  {}", page.final_uri);
        println!("  status {}", page.status);
        for request in &page.requests {
            println!(
                "  {} {}  [{}]",
                request.method,
                request.uri,
                request.content_type.as_deref().unwrap_or("-")
            );
            if let Some(referer) = &request.referer {
                println!("      referer: {referer}");
            }
        }
        for cookie in &page.cookies {
            println!(
                "  cookie {}  domain={}{}",
                cookie.name,
                cookie.domain_attribute,
                if cookie.host_wide { " (host-wide)" } else { "" }
            );
        }
        println!();
    }
    Ok(())
}
