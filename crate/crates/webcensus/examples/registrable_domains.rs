//! Registrable-domain (eTLD+1) extraction with the bundled public-suffix
//! snapshot: multi-label suffixes, wildcard and exception rules, fallback
//! behavior, and why this beats a naive last-two-labels comparison.
//!
//! ```bash
//! cargo run -p webcensus --example registrable_domains
//! ```

use anyhow::Result;
use webcensus::psl::PublicSuffixRuleset;

fn main() -> Result<()> {
    let rules = PublicSuffixRuleset::bundled();
    println!(
        "ruleset snapshot {} ({} rules)\n",
        &rules.snapshot_id()[..12],
        rules.rule_count()
    );

    let hosts = [
        "images.example.com",
        "www.google-analytics.com",
        "www.foo.co.uk",
        "bar.co.uk",
        "www.nhs.uk",
        "deep.sub.domain.example.org",
        "foo.www.ck",     // exception rule !www.ck
        "bar.foo.ck",     // wildcard rule *.ck
        "host.unknowntld",
        "127.0.0.1",
    ];
    for host in hosts {
        match rules.registrable_domain(host) {
            Ok(m) => println!("{host:32} -> {}  [{:?}]", m.domain, m.derivation),
            Err(e) => println!("{host:32} -> error: {e}"),
        }
    }

    // The repair this buys: a naive last-two-labels rule calls these the
    // same party, the suffix-aware comparison does not.
    println!();
    let a = rules.registrable_domain("www.foo.co.uk")?.domain;
    let b = rules.registrable_domain("cdn.bar.co.uk")?.domain;
    println!("naive rule:  foo.co.uk vs bar.co.uk both end in co.uk -> looks first-party");
    println!("suffix rule: {a} vs {b} -> {:?}", webcensus::classify_party(&a, &b));
    Ok(())
}
