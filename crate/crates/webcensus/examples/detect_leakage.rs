//! Sensitive-term leakage: what a page URI reveals through the Referer
//! header, plus a seeded random-sample assessment.
//!
//! ```bash
//! cargo run -p webcensus --example detect_leakage
//! ```

use anyhow::Result;
use webcensus::capture::har::ingest_har;
use webcensus::classify::classify_page;
use webcensus::fixture;
use webcensus::leakage::{assess_sample, detect_sensitive, normalize_uri_text, Lexicon};
use webcensus::psl::PublicSuffixRuleset;
use webcensus::uri::{parse_uri, ExtensionRules};

fn main() -> Result<()> {
    let lexicon = Lexicon::bundled();
    println!("lexicon {} terms (source {})\n", lexicon.len(), &lexicon.source_id[..12]);

    let samples = [
        "http://www.nhs.uk/conditions/breast-lump/Pages/Introduction.aspx",
        "http://www.ncbi.nlm.nih.gov/pubmed/21722252",
        "http://www.cdc.gov/hiv/",
        "http://example.com/search?q=type+2+diabetes",
    ];
    for raw in samples {
        let uri = parse_uri(raw)?;
        let verdict = detect_sensitive(&uri, &lexicon);
        println!("{raw}");
        println!("  normalized: {:?}", normalize_uri_text(&uri));
        if verdict.sensitive {
            let terms: Vec<&str> = verdict.matches.iter().map(|m| m.term.as_str()).collect();
            println!("  SENSITIVE: {}", terms.join(", "));
        } else {
            println!("  not sensitive");
        }
    }

    // Seeded sample over a classified corpus: same seed, same report.
    let rules = PublicSuffixRuleset::bundled();
    let records: Vec<_> = ingest_har(&fixture::demo_har())?
        .iter()
        .map(|page| classify_page(page, &rules, &ExtensionRules::default()))
        .collect::<Result<_, _>>()?;
    let report = assess_sample(&records, 3, 42, &lexicon)?;
    println!(
        "\nsample of {}/{} pages (seed {}, {}): sensitive {:.2}%, https {:.2}%",
        report.sample_size,
        report.population_size,
        report.seed,
        report.generator,
        report.sensitive_share,
        report.https_share
    );
    Ok(())
}
