//! Stage orchestration: pagelist -> scan -> analyze -> report / leakage.
//!
//! Stages communicate exclusively through on-disk artifacts, so analyze and
//! report run fully offline from HAR inputs and any stage can be re-run in
//! isolation. Within one invocation, each requested stage consumes the
//! artifact the previous stage just produced; the first requested stage
//! reads `config.input`.
//!
//! All outputs land under a run directory named by timestamp plus the
//! digest of the effective configuration.

use chrono::Utc;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use thiserror::Error;

use crate::capture::{
    self, har, live::CaptureSettings, CaptureError, PageListEntry, PageLoadResult,
};
use crate::census::{self, CensusRecord};
use crate::classify;
use crate::config::{config_digest, EffectiveConfig, RunConfig};
use crate::leakage::{self, Lexicon};
use crate::ownership::{load_owner_db, OwnershipDb};
use crate::psl::PublicSuffixRuleset;
use crate::store::{self, ExportFormat, LogHeader};
use crate::uri::ExtensionRules;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("{stage}: missing input ({message})")]
    MissingInput { stage: &'static str, message: String },
    #[error("{stage}:{code}: {message}")]
    Stage { stage: &'static str, code: String, message: String },
}

fn stage_error(stage: &'static str, code: &str, message: impl ToString) -> PipelineError {
    PipelineError::Stage { stage, code: code.to_string(), message: message.to_string() }
}

fn capture_stage_error(err: &CaptureError) -> PipelineError {
    match err {
        CaptureError::Endpoint(message) => stage_error("capture", "endpoint", message),
        other => stage_error("capture", "failed", other),
    }
}

/// Pipeline stages in canonical execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    PageList,
    Scan,
    Analyze,
    Report,
    Leakage,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::PageList => "pagelist",
            Stage::Scan => "scan",
            Stage::Analyze => "analyze",
            Stage::Report => "report",
            Stage::Leakage => "leakage",
        }
    }

    pub fn parse(name: &str) -> Option<Stage> {
        match name {
            "pagelist" => Some(Stage::PageList),
            "scan" => Some(Stage::Scan),
            "analyze" => Some(Stage::Analyze),
            "report" => Some(Stage::Report),
            "leakage" => Some(Stage::Leakage),
            _ => None,
        }
    }
}

/// Paths produced by a run.
#[derive(Debug, Clone, Default)]
pub struct RunArtifacts {
    pub run_dir: PathBuf,
    pub page_list: Option<PathBuf>,
    pub har_dir: Option<PathBuf>,
    pub record_log: Option<PathBuf>,
    pub report_dir: Option<PathBuf>,
    pub leakage_report: Option<PathBuf>,
    pub records_written: usize,
    /// Loaded pages whose final URI could not be classified (skipped).
    pub analyze_skipped: usize,
}

/// Shared read-only inputs, loaded from configured paths or the bundled
/// snapshots.
pub struct LoadedInputs {
    pub ruleset: PublicSuffixRuleset,
    pub owner_db: OwnershipDb,
    pub lexicon: Lexicon,
}

pub fn load_inputs(config: &RunConfig) -> Result<LoadedInputs, PipelineError> {
    let ruleset = match &config.ruleset {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| stage_error("config", "ruleset", format!("{}: {e}", path.display())))?;
            PublicSuffixRuleset::parse(&text)
                .map_err(|e| stage_error("config", "ruleset", e))?
        }
        None => PublicSuffixRuleset::bundled(),
    };
    let owner_db = match &config.owner_db {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| stage_error("config", "owner-db", format!("{}: {e}", path.display())))?;
            load_owner_db(&text).map_err(|e| stage_error("config", "owner-db", e))?
        }
        None => OwnershipDb::bundled(),
    };
    let lexicon = match &config.lexicon {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| stage_error("config", "lexicon", format!("{}: {e}", path.display())))?;
            leakage::load_lexicon(&text)
        }
        None => Lexicon::bundled(),
    };
    Ok(LoadedInputs { ruleset, owner_db, lexicon })
}

/// Create the run directory: `run-<timestamp>-<config digest>` under the
/// configured output root, suffixed when a same-second run already exists.
pub fn create_run_dir(effective: &EffectiveConfig) -> Result<PathBuf, PipelineError> {
    let stamp = Utc::now().format("%Y%m%dT%H%M%SZ");
    let digest = config_digest(effective);
    let base = effective.config.out_dir.join(format!("run-{stamp}-{digest}"));
    let mut candidate = base.clone();
    let mut suffix = 1;
    while candidate.exists() {
        suffix += 1;
        candidate = PathBuf::from(format!("{}-{suffix}", base.display()));
    }
    std::fs::create_dir_all(&candidate)
        .map_err(|e| stage_error("config", "out-dir", format!("{}: {e}", candidate.display())))?;
    Ok(candidate)
}

/// Run the requested stages in canonical order.
pub fn run_pipeline(effective: &EffectiveConfig, stages: &[Stage]) -> Result<RunArtifacts, PipelineError> {
    let config = &effective.config;
    let mut ordered: Vec<Stage> = stages.to_vec();
    ordered.sort();
    ordered.dedup();

    let inputs = load_inputs(config)?;
    let mut artifacts = RunArtifacts { run_dir: create_run_dir(effective)?, ..Default::default() };

    for stage in ordered {
        match stage {
            Stage::PageList => run_pagelist(config, &mut artifacts)?,
            Stage::Scan => run_scan(config, &mut artifacts)?,
            Stage::Analyze => run_analyze(config, &inputs, &mut artifacts)?,
            Stage::Report => run_report(config, &inputs, &mut artifacts)?,
            Stage::Leakage => run_leakage(config, &inputs, &mut artifacts)?,
        }
    }
    Ok(artifacts)
}

fn require_input(
    stage: &'static str,
    explicit: Option<&PathBuf>,
    predecessor: Option<&PathBuf>,
    what: &str,
) -> Result<PathBuf, PipelineError> {
    predecessor
        .or(explicit)
        .cloned()
        .ok_or_else(|| PipelineError::MissingInput { stage, message: format!("expected {what}") })
}

fn run_pagelist(config: &RunConfig, artifacts: &mut RunArtifacts) -> Result<(), PipelineError> {
    let input = require_input("pagelist", config.input.as_ref(), None, "a result-set file or directory")?;
    let mut sets = Vec::new();
    for path in collect_files(&input, "tsv").map_err(|e| stage_error("pagelist", "input", e))? {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| stage_error("pagelist", "input", format!("{}: {e}", path.display())))?;
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("results").to_string();
        sets.push(capture::parse_result_set(&id, &text).map_err(|e| stage_error("pagelist", "schema", e))?);
    }
    if sets.is_empty() {
        return Err(stage_error("pagelist", "input", format!("no .tsv result sets under {}", input.display())));
    }
    let binary: std::collections::BTreeSet<String> = config.binary_extensions.iter().cloned().collect();
    let list = capture::build_page_list(&sets, &binary);

    let uris_path = artifacts.run_dir.join("pages.txt");
    let sidecar_path = artifacts.run_dir.join("pages.provenance.tsv");
    let mut uris = Vec::new();
    let mut sidecar = Vec::new();
    capture::write_page_list(&list, &mut uris, &mut sidecar)
        .map_err(|e| stage_error("pagelist", "write", e))?;
    std::fs::write(&uris_path, uris).map_err(|e| stage_error("pagelist", "write", e))?;
    std::fs::write(&sidecar_path, sidecar).map_err(|e| stage_error("pagelist", "write", e))?;
    artifacts.page_list = Some(uris_path);
    Ok(())
}

fn run_scan(config: &RunConfig, artifacts: &mut RunArtifacts) -> Result<(), PipelineError> {
    let input = require_input("scan", config.input.as_ref(), artifacts.page_list.as_ref(), "a page-list file")?;
    let endpoint = config
        .browser_endpoint
        .clone()
        .ok_or_else(|| stage_error("capture", "endpoint", "no browser endpoint configured"))?;

    let uris = std::fs::File::open(&input)
        .map_err(|e| stage_error("scan", "input", format!("{}: {e}", input.display())))?;
    let sidecar_path = input.with_extension("provenance.tsv");
    let sidecar = std::fs::File::open(&sidecar_path).ok().map(std::io::BufReader::new);
    let entries = capture::read_page_list(std::io::BufReader::new(uris), sidecar)
        .map_err(|e| stage_error("scan", "input", e))?;

    let settings = CaptureSettings {
        endpoint,
        settle_seconds: config.settle_seconds,
        hard_timeout_seconds: config.hard_timeout_seconds,
    };

    let har_dir = artifacts.run_dir.join("hars");
    std::fs::create_dir_all(&har_dir).map_err(|e| stage_error("scan", "write", e))?;

    let results = capture_parallel(&entries, &settings, config.parallel_captures as usize)?;
    for (idx, result) in results.iter().enumerate() {
        let path = har_dir.join(format!("page_{idx:05}.har"));
        let text = har::write_har(std::slice::from_ref(result), "webcensus");
        std::fs::write(&path, text).map_err(|e| stage_error("scan", "write", e))?;
    }
    artifacts.har_dir = Some(har_dir);
    Ok(())
}

/// Capture pages with a bounded worker pool. Jobs are independent; results
/// land in per-index slots so output order matches the page list.
fn capture_parallel(
    entries: &[PageListEntry],
    settings: &CaptureSettings,
    parallel: usize,
) -> Result<Vec<PageLoadResult>, PipelineError> {
    let queue: Mutex<std::collections::VecDeque<(usize, &PageListEntry)>> =
        Mutex::new(entries.iter().enumerate().collect());
    let slots: Mutex<Vec<Option<PageLoadResult>>> = Mutex::new(vec![None; entries.len()]);
    let failure: Mutex<Option<CaptureError>> = Mutex::new(None);

    std::thread::scope(|scope| {
        for _ in 0..parallel.max(1) {
            scope.spawn(|| loop {
                if failure.lock().unwrap().is_some() {
                    return;
                }
                let job = queue.lock().unwrap().pop_front();
                let Some((idx, entry)) = job else { return };
                match capture::live::capture_live(entry, settings) {
                    Ok(result) => slots.lock().unwrap()[idx] = Some(result),
                    Err(err) => {
                        *failure.lock().unwrap() = Some(err);
                        return;
                    }
                }
            });
        }
    });

    if let Some(err) = failure.into_inner().unwrap() {
        return Err(capture_stage_error(&err));
    }
    Ok(slots.into_inner().unwrap().into_iter().map(|slot| slot.expect("all jobs completed")).collect())
}

fn run_analyze(
    config: &RunConfig,
    inputs: &LoadedInputs,
    artifacts: &mut RunArtifacts,
) -> Result<(), PipelineError> {
    let input = require_input("analyze", config.input.as_ref(), artifacts.har_dir.as_ref(), "a HAR file or directory")?;
    let files = collect_files(&input, "har").map_err(|e| stage_error("analyze", "input", e))?;
    if files.is_empty() {
        return Err(stage_error("analyze", "input", format!("no .har files under {}", input.display())));
    }
    let ext_rules = ExtensionRules { dynamic_page: config.dynamic_page_extensions.clone() };

    let mut records: Vec<CensusRecord> = Vec::new();
    let mut skipped = 0usize;
    for path in files {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| stage_error("analyze", "input", format!("{}: {e}", path.display())))?;
        let results = har::ingest_har(&text)
            .map_err(|e| stage_error("analyze", "ingest", format!("{}: {e}", path.display())))?;
        for result in &results {
            match classify::classify_page(result, &inputs.ruleset, &ext_rules) {
                Ok(record) => records.push(record),
                Err(_) => skipped += 1,
            }
        }
    }

    let header = LogHeader::new(
        inputs.ruleset.snapshot_id(),
        &inputs.owner_db.version,
        &inputs.lexicon.source_id,
    );
    let log_path = artifacts.run_dir.join("records.jsonl");
    let written = store::write_records_file(&records, &header, &log_path)
        .map_err(|e| stage_error("analyze", "write", e))?;
    artifacts.record_log = Some(log_path);
    artifacts.records_written = written;
    artifacts.analyze_skipped = skipped;
    Ok(())
}

fn read_checked_records(
    stage: &'static str,
    config: &RunConfig,
    inputs: &LoadedInputs,
    path: &Path,
    check_owner_db: bool,
) -> Result<(LogHeader, Vec<CensusRecord>), PipelineError> {
    let outcome = store::read_records_file(path, config.tolerant_read)
        .map_err(|e| stage_error(stage, "records", format!("{}: {e}", path.display())))?;
    if check_owner_db && outcome.header.owner_db_version != inputs.owner_db.version {
        return Err(stage_error(
            stage,
            "version-mismatch",
            format!(
                "record log built with ownership db {:?}, loaded db is {:?}",
                outcome.header.owner_db_version, inputs.owner_db.version
            ),
        ));
    }
    if outcome.header.lexicon_source != inputs.lexicon.source_id {
        return Err(stage_error(
            stage,
            "version-mismatch",
            format!(
                "record log built with lexicon {:?}, loaded lexicon is {:?}",
                outcome.header.lexicon_source, inputs.lexicon.source_id
            ),
        ));
    }
    Ok((outcome.header, outcome.records))
}

fn run_report(
    config: &RunConfig,
    inputs: &LoadedInputs,
    artifacts: &mut RunArtifacts,
) -> Result<(), PipelineError> {
    let input = require_input("report", config.input.as_ref(), artifacts.record_log.as_ref(), "a record log")?;
    let (header, records) = read_checked_records("report", config, inputs, &input, true)?;

    // The summary's fingerprint carries the ruleset the records were
    // classified under, as recorded in the log header.
    let summary = census::summarize(&records, &inputs.owner_db, config.top_n, &header.ruleset_snapshot)
        .map_err(|e| stage_error("report", "summarize", e))?;
    let sample = leakage::assess_sample_with(
        &records,
        config.sample_n,
        config.seed,
        &inputs.lexicon,
        config.leakage_include_host,
    )
    .map_err(|e| stage_error("report", "leakage", e))?;

    let report_dir = artifacts.run_dir.join("report");
    store::export_summary(&summary, Some(&sample), ExportFormat::Json, &report_dir)
        .map_err(|e| stage_error("report", "export", e))?;
    store::export_summary(&summary, Some(&sample), ExportFormat::Csv, &report_dir)
        .map_err(|e| stage_error("report", "export", e))?;
    artifacts.report_dir = Some(report_dir);
    Ok(())
}

fn run_leakage(
    config: &RunConfig,
    inputs: &LoadedInputs,
    artifacts: &mut RunArtifacts,
) -> Result<(), PipelineError> {
    let input = require_input("leakage", config.input.as_ref(), artifacts.record_log.as_ref(), "a record log")?;
    let (_, records) = read_checked_records("leakage", config, inputs, &input, false)?;

    let report = leakage::assess_sample_with(
        &records,
        config.sample_n,
        config.seed,
        &inputs.lexicon,
        config.leakage_include_host,
    )
    .map_err(|e| stage_error("leakage", "sample", e))?;

    // Detailed per-URI verdicts for the sampled population.
    let loaded: Vec<&CensusRecord> = records.iter().filter(|r| r.load_status.is_loaded()).collect();
    let picked = leakage::sample_indices(loaded.len(), config.sample_n, config.seed);
    let mut verdicts = String::from("uri,sensitive,matched_terms\n");
    let mut rows: Vec<(String, bool, String)> = Vec::with_capacity(picked.len());
    for &idx in &picked {
        let record = loaded[idx];
        match crate::uri::parse_uri(&record.page_uri) {
            Ok(parsed) => {
                let verdict =
                    leakage::detect_sensitive_with(&parsed, &inputs.lexicon, config.leakage_include_host);
                let mut terms: Vec<&str> = verdict.matches.iter().map(|m| m.term.as_str()).collect();
                terms.dedup();
                rows.push((record.page_uri.clone(), verdict.sensitive, terms.join(";")));
            }
            Err(_) => rows.push((record.page_uri.clone(), false, String::new())),
        }
    }
    rows.sort();
    for (uri, sensitive, terms) in rows {
        let quoted = if uri.contains(',') { format!("\"{uri}\"") } else { uri };
        let _ = writeln!(verdicts, "{quoted},{sensitive},{terms}");
    }

    let report_path = artifacts.run_dir.join("leakage.json");
    let mut body = serde_json::to_string_pretty(&report)
        .map_err(|e| stage_error("leakage", "export", e))?;
    body.push('\n');
    std::fs::write(&report_path, body).map_err(|e| stage_error("leakage", "export", e))?;
    std::fs::write(artifacts.run_dir.join("leakage_verdicts.csv"), verdicts)
        .map_err(|e| stage_error("leakage", "export", e))?;
    artifacts.leakage_report = Some(report_path);
    Ok(())
}

/// Files with the given extension: the path itself, or the directory's
/// matching children sorted by name.
fn collect_files(input: &Path, extension: &str) -> Result<Vec<PathBuf>, String> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    if !input.is_dir() {
        return Err(format!("{} does not exist", input.display()));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(input)
        .map_err(|e| format!("{}: {e}", input.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some(extension))
        .collect();
    files.sort();
    Ok(files)
}

/// Stage set helper for callers holding stage names.
pub fn parse_stages(names: &[String]) -> Result<Vec<Stage>, PipelineError> {
    let mut stages = Vec::with_capacity(names.len());
    for name in names {
        match Stage::parse(name) {
            Some(stage) => stages.push(stage),
            None => {
                return Err(PipelineError::Config(crate::config::ConfigError::InvalidValue {
                    key: "stages".into(),
                    message: format!("unknown stage {name:?}"),
                }))
            }
        }
    }
    Ok(stages)
}

/// Convenience: resolve a default configuration with overrides, mainly for
/// tests and examples.
pub fn effective_with(flags: &BTreeMap<String, String>) -> Result<EffectiveConfig, PipelineError> {
    Ok(crate::config::resolve(None, &|_| None, flags)?)
}
