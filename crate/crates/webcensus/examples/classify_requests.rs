//! First- vs third-party classification: per-request party decisions,
//! element records, and the per-page tracking flags.
//!
//! ```bash
//! cargo run -p webcensus --example classify_requests
//! ```

use anyhow::Result;
use webcensus::capture::har::ingest_har;
use webcensus::classify::{classify_page, classify_party, party_unit};
use webcensus::fixture;
use webcensus::psl::PublicSuffixRuleset;
use webcensus::uri::{parse_uri, ExtensionRules};

fn main() -> Result<()> {
    let rules = PublicSuffixRuleset::bundled();
    let pages = ingest_har(&fixture::demo_har())?;

    for page in &pages {
        let page_host = parse_uri(&page.final_uri)?.host;
        let (page_domain, _) = party_unit(&page_host, &rules)?;
        println!("page {}  (domain {})", page.final_uri, page_domain);

        for request in &page.requests {
            let host = parse_uri(&request.uri)?.host;
            let (domain, _) = party_unit(&host, &rules)?;
            println!("  {:?}  {}", classify_party(&page_domain, &domain), request.uri);
        }

        let record = classify_page(page, &rules, &ExtensionRules::default())?;
        println!(
            "  flags: request={} javascript={} cookie={}",
            record.flags.has_third_party_request,
            record.flags.has_third_party_javascript,
            record.flags.has_third_party_cookie
        );
        for element in record.elements.iter().filter(|e| record.third_party_domains.contains(&e.request_registrable_domain)) {
            println!("  third-party element: {}  [{:?}]", element.stripped_uri, element.extension_class);
        }
        println!();
    }
    Ok(())
}
