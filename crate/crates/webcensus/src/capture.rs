//! Page-corpus construction and traffic acquisition.
//!
//! Two acquisition paths exist: offline ingestion of HTTP Archive files
//! (the canonical path, so tests stay hermetic) and live capture through an
//! external headless browser's remote-debugging endpoint. Both produce the
//! same [`PageLoadResult`] shape.

pub mod har;
pub mod live;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use thiserror::Error;

use crate::uri::{self, UriError};

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("result-set line {line}: {message}")]
    ResultSetSchema { line: usize, message: String },
    #[error("browser endpoint unreachable: {0}")]
    Endpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Uri(#[from] UriError),
}

/// One search result feeding the page list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    pub term: String,
    pub rank: u32,
    pub uri: String,
}

/// A recorded result-set file: the adapter contract replacing a live
/// search-API client.
#[derive(Debug, Clone)]
pub struct ResultSet {
    pub id: String,
    pub results: Vec<SearchResult>,
}

/// Parse a result-set document: one record per line, tab-separated
/// `term<TAB>rank<TAB>uri`. Blank lines and `#` comments are skipped.
pub fn parse_result_set(id: &str, text: &str) -> Result<ResultSet, CaptureError> {
    let mut results = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let (term, rank, uri) = match (fields.next(), fields.next(), fields.next()) {
            (Some(t), Some(r), Some(u)) => (t, r, u),
            _ => {
                return Err(CaptureError::ResultSetSchema {
                    line: line_no,
                    message: "expected term<TAB>rank<TAB>uri".into(),
                })
            }
        };
        let rank: u32 = rank.parse().map_err(|_| CaptureError::ResultSetSchema {
            line: line_no,
            message: format!("rank {rank:?} is not an integer"),
        })?;
        results.push(SearchResult {
            term: term.to_string(),
            rank,
            uri: uri.to_string(),
        });
    }
    Ok(ResultSet { id: id.to_string(), results })
}

/// An entry of the deduplicated page list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageListEntry {
    pub normalized_uri: String,
    pub source_term: String,
    pub rank: u32,
    pub provenance: String,
}

/// The page list plus its construction diagnostics.
#[derive(Debug, Clone, Default)]
pub struct PageList {
    pub entries: Vec<PageListEntry>,
    pub dropped_malformed: u32,
    pub filtered_binary: u32,
    pub deduplicated: u32,
    pub invalid_rank: u32,
}

/// Default binary-file extensions filtered from page lists: the classic
/// trio plus their modern equivalents.
pub const DEFAULT_BINARY_EXTENSIONS: &[&str] =
    &["pdf", "doc", "xls", "docx", "xlsx", "ppt", "pptx"];

pub const MAX_RESULT_RANK: u32 = 50;

/// Extension token of a path's final segment, if any, using the same token
/// rule as element classification.
fn path_extension_token(parsed: &crate::uri::ParsedUri) -> Option<String> {
    let segment = parsed.path.rsplit('/').next().unwrap_or("");
    let (_, ext) = segment.rsplit_once('.')?;
    if ext.is_empty() || ext.len() > uri::MAX_EXTENSION_LEN || !ext.chars().all(|c| c.is_ascii_alphanumeric()) {
        return None;
    }
    Some(ext.to_ascii_lowercase())
}

/// Build a deduplicated, filtered page list from result sets.
///
/// URIs are normalized, duplicates collapse to the lowest-ranked entry, and
/// results whose path extension is in `binary_extensions` are removed.
/// Output ordering is deterministic: (term, rank, uri).
pub fn build_page_list(sets: &[ResultSet], binary_extensions: &BTreeSet<String>) -> PageList {
    let mut list = PageList::default();
    let mut candidates: Vec<PageListEntry> = Vec::new();

    for set in sets {
        for result in &set.results {
            if result.rank < 1 || result.rank > MAX_RESULT_RANK {
                list.invalid_rank += 1;
                continue;
            }
            let parsed = match uri::parse_uri(&result.uri) {
                Ok(p) => p,
                Err(_) => {
                    list.dropped_malformed += 1;
                    continue;
                }
            };
            if let Some(token) = path_extension_token(&parsed) {
                if binary_extensions.contains(&token) {
                    list.filtered_binary += 1;
                    continue;
                }
            }
            let normalized = match uri::normalize_page_uri(&result.uri) {
                Ok(n) => n,
                Err(_) => {
                    list.dropped_malformed += 1;
                    continue;
                }
            };
            candidates.push(PageListEntry {
                normalized_uri: normalized,
                source_term: result.term.clone(),
                rank: result.rank,
                provenance: set.id.clone(),
            });
        }
    }

    // Lowest rank wins a duplicate; remaining fields break ties so the
    // outcome does not depend on input order.
    candidates.sort_by(|a, b| {
        (a.rank, &a.source_term, &a.provenance, &a.normalized_uri).cmp(&(
            b.rank,
            &b.source_term,
            &b.provenance,
            &b.normalized_uri,
        ))
    });
    let mut seen: BTreeMap<String, ()> = BTreeMap::new();
    let mut kept = Vec::new();
    for entry in candidates {
        if seen.insert(entry.normalized_uri.clone(), ()).is_none() {
            kept.push(entry);
        } else {
            list.deduplicated += 1;
        }
    }
    kept.sort_by(|a, b| {
        (&a.source_term, a.rank, &a.normalized_uri).cmp(&(&b.source_term, b.rank, &b.normalized_uri))
    });
    list.entries = kept;
    list
}

/// Write the page list: one normalized URI per line, plus a tab-separated
/// sidecar carrying provenance (uri, term, rank, result-set id).
pub fn write_page_list(list: &PageList, uris: &mut dyn Write, sidecar: &mut dyn Write) -> std::io::Result<()> {
    for entry in &list.entries {
        writeln!(uris, "{}", entry.normalized_uri)?;
    }
    writeln!(sidecar, "# uri\tterm\trank\tresult_set")?;
    for entry in &list.entries {
        writeln!(
            sidecar,
            "{}\t{}\t{}\t{}",
            entry.normalized_uri, entry.source_term, entry.rank, entry.provenance
        )?;
    }
    Ok(())
}

/// Read a page list written by [`write_page_list`]. The sidecar is optional;
/// without it, entries carry empty provenance.
pub fn read_page_list(uris: impl BufRead, sidecar: Option<impl BufRead>) -> Result<Vec<PageListEntry>, CaptureError> {
    let mut provenance: BTreeMap<String, (String, u32, String)> = BTreeMap::new();
    if let Some(side) = sidecar {
        for line in side.lines() {
            let line = line?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(CaptureError::Schema(format!("bad sidecar line: {line:?}")));
            }
            let rank = fields[2]
                .parse()
                .map_err(|_| CaptureError::Schema(format!("bad sidecar rank: {line:?}")))?;
            provenance.insert(
                fields[0].to_string(),
                (fields[1].to_string(), rank, fields[3].to_string()),
            );
        }
    }
    let mut entries = Vec::new();
    for line in uris.lines() {
        let line = line?;
        let uri = line.trim();
        if uri.is_empty() {
            continue;
        }
        let (term, rank, set) = provenance.get(uri).cloned().unwrap_or((String::new(), 1, String::new()));
        entries.push(PageListEntry {
            normalized_uri: uri.to_string(),
            source_term: term,
            rank,
            provenance: set,
        });
    }
    Ok(entries)
}

/// Outcome of one page load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadStatus {
    Loaded,
    Timeout,
    Error(String),
}

impl LoadStatus {
    pub fn is_loaded(&self) -> bool {
        matches!(self, LoadStatus::Loaded)
    }

    /// Stable label used in failure tables: `loaded`, `timeout`, `error:<reason>`.
    pub fn label(&self) -> String {
        match self {
            LoadStatus::Loaded => "loaded".into(),
            LoadStatus::Timeout => "timeout".into(),
            LoadStatus::Error(reason) => format!("error:{reason}"),
        }
    }
}

impl fmt::Display for LoadStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// One observed HTTP request. The Referer is recorded verbatim; that header
/// is the leakage channel under study and must not be normalized away.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapturedRequest {
    pub uri: String,
    pub method: String,
    pub referer: Option<String>,
    pub user_agent: Option<String>,
    pub response_status: Option<u16>,
    pub content_type: Option<String>,
    pub timestamp: DateTime<Utc>,
}

/// Where a cookie observation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CookieSource {
    Header,
    Script,
    Unknown,
}

/// One observed cookie event. A leading dot on the domain attribute is
/// stripped and remembered as `host_wide`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapturedCookie {
    pub name: String,
    pub domain_attribute: String,
    pub host_wide: bool,
    pub source: CookieSource,
    pub timestamp: DateTime<Utc>,
}

/// Everything observed while loading one page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageLoadResult {
    pub requested_uri: String,
    /// Post-redirect location; the party basis for classification.
    pub final_uri: String,
    pub status: LoadStatus,
    pub started_at: DateTime<Utc>,
    pub settle_seconds: u32,
    pub requests: Vec<CapturedRequest>,
    pub cookies: Vec<CapturedCookie>,
}

/// Parse a Set-Cookie header value into a cookie event. When the Domain
/// attribute is absent, the cookie scopes to the setting request's host.
pub fn parse_set_cookie(value: &str, default_domain: &str, timestamp: DateTime<Utc>) -> Option<CapturedCookie> {
    let mut parts = value.split(';');
    let name_value = parts.next()?.trim();
    let name = name_value.split('=').next()?.trim();
    if name.is_empty() {
        return None;
    }
    let mut domain_attribute = default_domain.to_ascii_lowercase();
    let mut host_wide = false;
    for attr in parts {
        let attr = attr.trim();
        if let Some(raw) = attr
            .strip_prefix("Domain=")
            .or_else(|| attr.strip_prefix("domain="))
            .or_else(|| attr.strip_prefix("DOMAIN="))
        {
            let raw = raw.trim().to_ascii_lowercase();
            if let Some(stripped) = raw.strip_prefix('.') {
                domain_attribute = stripped.to_string();
                host_wide = true;
            } else {
                domain_attribute = raw;
            }
        }
    }
    Some(CapturedCookie {
        name: name.to_string(),
        domain_attribute,
        host_wide,
        source: CookieSource::Header,
        timestamp,
    })
}
