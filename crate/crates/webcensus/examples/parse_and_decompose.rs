//! URI decomposition: components, page-key normalization, argument
//! stripping, extension classes, and TLD categories.
//!
//! ```bash
//! cargo run -p webcensus --example parse_and_decompose
//! ```

use anyhow::Result;
use webcensus::uri::{
    extract_extension, normalize_page_uri, parse_uri, strip_arguments, tld_category,
};

fn main() -> Result<()> {
    let samples = [
        "http://www.cdc.gov/hiv/",
        "HTTP://Www.CDC.gov/hiv/#top",
        "http://www.google-analytics.com/ga.js?SITEID=123",
        "http://x.net/__utm.gif?utmac=UA-1",
        "https://www.nhs.uk/conditions/breast-lump/",
        "http://tracker.example.net:8080/collect?v=1&tid=UA-2",
    ];

    for raw in samples {
        let uri = parse_uri(raw)?;
        println!("{raw}");
        println!("  scheme    {}", uri.scheme);
        println!("  host      {}  (tld category: {})", uri.host, tld_category(&uri.host));
        if let Some(port) = uri.port {
            println!("  port      {port}");
        }
        println!("  path      {}", uri.path);
        if let Some(query) = &uri.query {
            println!("  query     {query}");
        }
        println!("  page key  {}", normalize_page_uri(raw)?);
        println!("  stripped  {}", strip_arguments(&uri));
        println!("  element   {:?}", extract_extension(&uri));
        println!();
    }
    Ok(())
}
