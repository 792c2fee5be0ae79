//! Persistence: the per-page record log and finalized report exports.
//!
//! The record log is line-delimited JSON: header line first, then one
//! record per line sorted by page URI. Every artifact embeds the versions
//! of the ruleset, ownership db, and lexicon it was built under, so
//! reports are self-describing and stale inputs are caught instead of
//! silently mixed. Identical inputs produce byte-identical files.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::census::{CategoryRow, CensusRecord, CensusSummary};
use crate::leakage::LeakageSampleReport;
use crate::uri::ElementClass;

/// Record-log schema version; bumped on any incompatible change.
pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),
    #[error("schema version mismatch: log has {found:?}, reader expects {expected:?}")]
    SchemaVersionMismatch { found: String, expected: String },
    #[error("corrupt line {0}")]
    CorruptLine(usize),
    #[error("missing header line")]
    MissingHeader,
}

/// Provenance header of a record log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema_version: String,
    pub ruleset_snapshot: String,
    pub owner_db_version: String,
    pub lexicon_source: String,
}

impl LogHeader {
    pub fn new(ruleset_snapshot: &str, owner_db_version: &str, lexicon_source: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            ruleset_snapshot: ruleset_snapshot.to_string(),
            owner_db_version: owner_db_version.to_string(),
            lexicon_source: lexicon_source.to_string(),
        }
    }
}

/// Write records as a log: header line, then one JSON record per line
/// sorted by page URI. Returns the number of records written.
pub fn write_records(
    records: &[CensusRecord],
    header: &LogHeader,
    destination: &mut dyn Write,
) -> Result<usize, StoreError> {
    let mut ordered: Vec<&CensusRecord> = records.iter().collect();
    ordered.sort_by(|a, b| a.page_uri.cmp(&b.page_uri).then_with(|| a.load_status.label().cmp(&b.load_status.label())));
    writeln!(destination, "{}", serde_json::to_string(header)?)?;
    for record in &ordered {
        writeln!(destination, "{}", serde_json::to_string(record)?)?;
    }
    Ok(ordered.len())
}

pub fn write_records_file(records: &[CensusRecord], header: &LogHeader, path: &Path) -> Result<usize, StoreError> {
    let mut buffer = Vec::new();
    let count = write_records(records, header, &mut buffer)?;
    std::fs::write(path, buffer)?;
    Ok(count)
}

/// Result of reading a record log.
#[derive(Debug)]
pub struct ReadOutcome {
    pub header: LogHeader,
    pub records: Vec<CensusRecord>,
    /// Corrupt lines skipped (tolerant mode only).
    pub skipped: u32,
}

/// Read a record log. Fail-fast on the first corrupt line by default; in
/// tolerant mode corrupt lines are skipped and counted.
pub fn read_records(source: impl BufRead, tolerant: bool) -> Result<ReadOutcome, StoreError> {
    let mut lines = source.lines();
    let header_line = lines.next().ok_or(StoreError::MissingHeader)??;
    let header: LogHeader =
        serde_json::from_str(&header_line).map_err(|_| StoreError::MissingHeader)?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(StoreError::SchemaVersionMismatch {
            found: header.schema_version,
            expected: SCHEMA_VERSION.to_string(),
        });
    }
    let mut records = Vec::new();
    let mut skipped = 0u32;
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<CensusRecord>(&line) {
            Ok(record) => records.push(record),
            Err(_) if tolerant => skipped += 1,
            Err(_) => return Err(StoreError::CorruptLine(line_no)),
        }
    }
    Ok(ReadOutcome { header, records, skipped })
}

pub fn read_records_file(path: &Path, tolerant: bool) -> Result<ReadOutcome, StoreError> {
    let file = std::fs::File::open(path)?;
    read_records(std::io::BufReader::new(file), tolerant)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Csv,
}

/// Quote a CSV field when needed (commas, quotes, newlines).
fn csv_field(value: &str) -> String {
    if value.contains(',') || value.contains('"') || value.contains('\n') {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

fn pct_int(value: f64) -> i64 {
    crate::census::render_percent_int(value)
}

fn pct2(value: f64) -> String {
    format!("{value:.2}")
}

/// Export a finalized summary (and, when present, the leakage sample
/// report) to deterministic files under `dir`. Returns the paths written.
///
/// JSON export writes `summary.json` (and `leakage.json`); CSV export
/// writes one table per file: by-TLD prevalence, extension histogram,
/// owner ranking, top elements, load failures, and the leakage report.
pub fn export_summary(
    summary: &CensusSummary,
    leakage: Option<&LeakageSampleReport>,
    format: ExportFormat,
    dir: &Path,
) -> Result<Vec<PathBuf>, StoreError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match format {
        ExportFormat::Json => {
            let path = dir.join("summary.json");
            let mut body = serde_json::to_string_pretty(summary)?;
            body.push('\n');
            std::fs::write(&path, body)?;
            written.push(path);
            if let Some(report) = leakage {
                let path = dir.join("leakage.json");
                let mut body = serde_json::to_string_pretty(report)?;
                body.push('\n');
                std::fs::write(&path, body)?;
                written.push(path);
            }
        }
        ExportFormat::Csv => {
            written.push(write_table(dir, "tld_prevalence.csv", tld_prevalence_csv(summary))?);
            written.push(write_table(dir, "extension_histogram.csv", histogram_csv(summary))?);
            written.push(write_table(dir, "owner_ranking.csv", owner_ranking_csv(summary))?);
            written.push(write_table(dir, "top_elements.csv", top_elements_csv(summary))?);
            written.push(write_table(dir, "load_failures.csv", load_failures_csv(summary))?);
            if let Some(report) = leakage {
                written.push(write_table(dir, "leakage.csv", leakage_csv(report))?);
            }
        }
    }
    Ok(written)
}

fn write_table(dir: &Path, name: &str, body: String) -> Result<PathBuf, StoreError> {
    let path = dir.join(name);
    std::fs::write(&path, body)?;
    Ok(path)
}

fn tld_prevalence_csv(summary: &CensusSummary) -> String {
    let mut out = String::from("category,pages,pct_third_party_requests,pct_third_party_js,pct_third_party_cookies\n");
    for row in CategoryRow::ALL_ROWS {
        if let Some(prevalence) = summary.per_category.get(&row) {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                row.label(),
                prevalence.loaded,
                pct_int(prevalence.pct_third_party_requests),
                pct_int(prevalence.pct_third_party_js),
                pct_int(prevalence.pct_third_party_cookies),
            );
        }
    }
    out
}

fn histogram_csv(summary: &CensusSummary) -> String {
    let mut out = String::from("class,percent\n");
    for class in ElementClass::ALL {
        let share = summary.extension_histogram.get(&class).copied().unwrap_or(0);
        let _ = writeln!(out, "{},{}", csv_field(class.label()), share);
    }
    out
}

fn owner_ranking_csv(summary: &CensusSummary) -> String {
    let mut out = String::from("owner,percent\n");
    for row in &summary.owner_ranking.rows {
        let _ = writeln!(out, "{},{}", csv_field(&row.owner_id), pct_int(row.percent));
    }
    // Unattributed reach is its own trailing row whenever it exists; a
    // corpus without any unattributed traffic renders owners only.
    let unattributed = &summary.owner_ranking.unattributed;
    if unattributed.pages > 0 {
        let _ = writeln!(out, "{},{}", csv_field(&unattributed.owner_id), pct_int(unattributed.percent));
    }
    out
}

fn top_elements_csv(summary: &CensusSummary) -> String {
    let mut out = String::from("rank,stripped_uri,class,pages,percent_of_pages\n");
    for (idx, element) in summary.top_elements.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            idx + 1,
            csv_field(&element.stripped_uri),
            csv_field(element.element_class.label()),
            element.pages,
            pct2(element.percent_of_pages),
        );
    }
    out
}

fn load_failures_csv(summary: &CensusSummary) -> String {
    let mut out = String::from("status,pages\n");
    for (status, pages) in &summary.load_failures {
        let _ = writeln!(out, "{},{}", csv_field(status), pages);
    }
    out
}

fn leakage_csv(report: &LeakageSampleReport) -> String {
    let mut out = String::from(
        "population_size,sample_size,requested_n,seed,generator,sensitive_share,https_share\n",
    );
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{}",
        report.population_size,
        report.sample_size,
        report.requested_n,
        report.seed,
        report.generator,
        pct2(report.sensitive_share),
        pct2(report.https_share),
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::LoadStatus;
    use crate::census::{summarize, RecordDiagnostics};
    use crate::classify::{ElementRecord, PageFlags};
    use crate::ownership::load_owner_db;
    use crate::psl::RegistrableDomain;
    use crate::uri::{ExtensionClass, TldCategory};

    fn sample_records() -> Vec<CensusRecord> {
        (0..5)
            .map(|i| CensusRecord {
                page_uri: format!("http://site{i}.com/page"),
                tld_category: TldCategory::Com,
                flags: PageFlags {
                    has_third_party_request: true,
                    has_third_party_javascript: i % 2 == 0,
                    has_third_party_cookie: false,
                },
                third_party_domains: [RegistrableDomain::new("google-analytics.com")].into_iter().collect(),
                elements: vec![ElementRecord {
                    stripped_uri: "http://www.google-analytics.com/ga.js".into(),
                    extension_class: ExtensionClass::Javascript,
                    request_registrable_domain: RegistrableDomain::new("google-analytics.com"),
                }],
                https: i == 0,
                load_status: LoadStatus::Loaded,
                diagnostics: RecordDiagnostics::default(),
            })
            .collect()
    }

    fn header() -> LogHeader {
        LogHeader::new("ruleset-digest", "db-version", "lexicon-digest")
    }

    #[test]
    fn empty_log_round_trips() {
        let mut buffer = Vec::new();
        let count = write_records(&[], &header(), &mut buffer).unwrap();
        assert_eq!(count, 0);
        let outcome = read_records(buffer.as_slice(), false).unwrap();
        assert!(outcome.records.is_empty());
        assert_eq!(outcome.header, header());
    }

    #[test]
    fn write_then_read_equals_input() {
        let records = sample_records();
        let mut buffer = Vec::new();
        let count = write_records(&records, &header(), &mut buffer).unwrap();
        assert_eq!(count, records.len());
        let outcome = read_records(buffer.as_slice(), false).unwrap();
        assert_eq!(outcome.records, records);
    }

    #[test]
    fn identical_inputs_identical_bytes() {
        let records = sample_records();
        let render = || {
            let mut buffer = Vec::new();
            write_records(&records, &header(), &mut buffer).unwrap();
            buffer
        };
        assert_eq!(render(), render());
    }

    #[test]
    fn corrupt_line_fail_fast_and_tolerant() {
        let records = sample_records();
        let mut buffer = Vec::new();
        write_records(&records, &header(), &mut buffer).unwrap();
        let mut text = String::from_utf8(buffer).unwrap();
        let insert_at = text.find('\n').unwrap() + 1;
        text.insert_str(insert_at, "{not json}\n");

        match read_records(text.as_bytes(), false) {
            Err(StoreError::CorruptLine(2)) => {}
            other => panic!("expected corrupt line 2, got {other:?}"),
        }
        let outcome = read_records(text.as_bytes(), true).unwrap();
        assert_eq!(outcome.records.len(), records.len());
        assert_eq!(outcome.skipped, 1);
    }

    #[test]
    fn schema_version_checked() {
        let bad = "{\"schema_version\":\"99\",\"ruleset_snapshot\":\"r\",\"owner_db_version\":\"d\",\"lexicon_source\":\"l\"}\n";
        assert!(matches!(
            read_records(bad.as_bytes(), false),
            Err(StoreError::SchemaVersionMismatch { .. })
        ));
    }

    #[test]
    fn export_is_deterministic_and_shapes_hold() {
        let db = load_owner_db(
            "version: test.1\nowner: google\nname: Google\nrevenue: Advertising\ndomains: google-analytics.com\n",
        )
        .unwrap();
        let summary = summarize(&sample_records(), &db, 100, "rs").unwrap();
        let dir = std::env::temp_dir().join(format!("webcensus-store-test-{}", std::process::id()));
        let first = export_summary(&summary, None, ExportFormat::Csv, &dir).unwrap();
        let owner_csv = std::fs::read_to_string(dir.join("owner_ranking.csv")).unwrap();
        let mut lines = owner_csv.lines();
        assert_eq!(lines.next(), Some("owner,percent"));
        assert_eq!(lines.next(), Some("google,100"));
        // No unattributed traffic in this corpus, so no trailing row.
        assert_eq!(lines.next(), None);

        let before: Vec<Vec<u8>> = first.iter().map(|p| std::fs::read(p).unwrap()).collect();
        let again = export_summary(&summary, None, ExportFormat::Csv, &dir).unwrap();
        let after: Vec<Vec<u8>> = again.iter().map(|p| std::fs::read(p).unwrap()).collect();
        assert_eq!(before, after);

        export_summary(&summary, None, ExportFormat::Json, &dir).unwrap();
        let json = std::fs::read_to_string(dir.join("summary.json")).unwrap();
        assert!(json.contains("\"pages_loaded\": 5"));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn empty_owner_ranking_renders_header_only() {
        let db = load_owner_db("").unwrap();
        // Loaded pages with no third-party traffic at all.
        let records: Vec<CensusRecord> = (0..3)
            .map(|i| CensusRecord {
                page_uri: format!("http://quiet{i}.com/"),
                tld_category: TldCategory::Com,
                flags: PageFlags::default(),
                third_party_domains: Default::default(),
                elements: Vec::new(),
                https: false,
                load_status: LoadStatus::Loaded,
                diagnostics: RecordDiagnostics::default(),
            })
            .collect();
        let summary = summarize(&records, &db, 100, "rs").unwrap();
        let dir = std::env::temp_dir().join(format!("webcensus-store-empty-{}", std::process::id()));
        export_summary(&summary, None, ExportFormat::Csv, &dir).unwrap();
        let owner_csv = std::fs::read_to_string(dir.join("owner_ranking.csv")).unwrap();
        assert_eq!(owner_csv, "owner,percent\n");
        std::fs::remove_dir_all(&dir).ok();
    }
}
