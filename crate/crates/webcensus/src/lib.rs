//! # webcensus
//!
//! A desk-scale web-privacy census toolkit: detect and quantify third-party
//! HTTP requests, third-party cookies, corporate data-collection reach, and
//! sensitive-term leakage via the Referer channel across a corpus of
//! health-related web pages.
//!
//! The pipeline has four stages plus a standalone leakage assessment:
//!
//! 1. **pagelist**: build a deduplicated page corpus from recorded
//!    search-result sets, filtering binary files.
//! 2. **scan**: capture per-page traffic through an external headless
//!    browser's remote-debugging endpoint, one fresh browser context per
//!    page, written out as HAR files.
//! 3. **analyze**: ingest HAR files (captured or supplied), classify every
//!    request and cookie first- vs third-party against public-suffix
//!    registrable domains, and persist per-page records.
//! 4. **report**: aggregate records into prevalence-by-TLD tables, top
//!    requested elements, extension histograms, corporate owner reach, the
//!    HTTPS share, and a seeded leakage sample.
//!
//! Analyze and report run fully offline; HAR ingestion is the canonical
//! acquisition path and live capture is an adapter over it.
//!
//! Start with the `examples/` directory (each example is a runnable tour
//! of one capability) or the `webcensus` binary, which exposes the stages
//! as subcommands.

pub mod capture;
pub mod census;
pub mod classify;
pub mod config;
pub mod fixture;
pub mod leakage;
pub mod ownership;
pub mod pipeline;
pub mod psl;
pub mod store;
pub mod uri;

pub use capture::{
    build_page_list, CapturedCookie, CapturedRequest, LoadStatus, PageList, PageListEntry,
    PageLoadResult,
};
pub use census::{summarize, CensusRecord, CensusSummary};
pub use classify::{classify_party, derive_page_flags, ElementRecord, PageFlags, PartyClass};
pub use config::RunConfig;
pub use leakage::{detect_sensitive, LeakageVerdict, Lexicon};
pub use ownership::{load_owner_db, OwnerRecord, OwnershipDb};
pub use pipeline::{run_pipeline, RunArtifacts, Stage};
pub use psl::{registrable_domain, PublicSuffixRuleset, RegistrableDomain};
pub use uri::{parse_uri, ExtensionClass, ParsedUri, TldCategory};
