//! Live page capture through a headless browser's remote-debugging
//! endpoint. Requires a browser listening, e.g.:
//!
//! ```bash
//! chromium --headless --remote-debugging-port=9222 --user-data-dir=/tmp/webcensus-profile &
//! cargo run -p webcensus --example live_capture -- http://example.com/ 127.0.0.1:9222
//! ```
//!
//! Every capture runs in a fresh, isolated browser context: no cookies or
//! cache carry over between pages.

use anyhow::Result;
use webcensus::capture::live::{capture_live, CaptureSettings};
use webcensus::capture::PageListEntry;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let uri = args.next().unwrap_or_else(|| "http://example.com/".to_string());
    let endpoint = args.next().unwrap_or_else(|| "127.0.0.1:9222".to_string());

    let entry = PageListEntry {
        normalized_uri: uri.clone(),
        source_term: String::new(),
        rank: 1,
        provenance: "live-capture-example".into(),
    };
    let settings = CaptureSettings {
        endpoint,
        settle_seconds: 10,
        hard_timeout_seconds: 30,
    };

    println!("capturing {uri} (settle {}s) ...", settings.settle_seconds);
    let result = capture_live(&entry, &settings)?;

    println!("status    {}", result.status);
    println!("final uri {}", result.final_uri);
    println!("requests  {}", result.requests.len());
    for request in &result.requests {
        println!(
            "  {} {}  status={}",
            request.method,
            request.uri,
            request.response_status.map(|s| s.to_string()).unwrap_or_else(|| "-".into())
        );
        if let Some(referer) = &request.referer {
            println!("      referer: {referer}");
        }
    }
    println!("cookies   {}", result.cookies.len());
    for cookie in &result.cookies {
        println!("  {} domain={}", cookie.name, cookie.domain_attribute);
    }
    Ok(())
}
