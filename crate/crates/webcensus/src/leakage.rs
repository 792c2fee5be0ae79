//! Sensitive-term detection in page URIs and leakage sampling.
//!
//! Page URIs travel to third parties in the Referer header, so a URI that
//! names a condition or treatment leaks it. Detection is lexicon-driven
//! word-boundary matching over a normalized rendering of path and query:
//! a deterministic stand-in for the original study's manual review, not a
//! reproduction of human judgment.
//!
//! Sampling uses a ChaCha8-seeded Fisher-Yates partial shuffle with
//! rejection-sampled bounds, so a given seed reproduces the same sample on
//! every platform. The generator name is embedded in every report.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use thiserror::Error;

use crate::capture::PageLoadResult;
use crate::census::CensusRecord;
use crate::uri::ParsedUri;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LeakageError {
    #[error("empty corpus: no loaded pages")]
    EmptyCorpus,
    #[error("sample size must be at least 1")]
    InvalidSampleSize,
}

/// Name of the sampling algorithm, embedded in report headers.
pub const SAMPLE_GENERATOR: &str = "chacha8-fisher-yates";

/// A loaded term list. Terms are lowercase, whitespace-collapsed, and
/// non-empty; the source id is the SHA-256 digest of the input bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    terms: BTreeSet<String>,
    pub source_id: String,
}

/// Condition/symptom/treatment list shipped with the crate.
pub const BUNDLED_LEXICON: &str = include_str!("../data/lexicon.txt");

impl Lexicon {
    pub fn bundled() -> Self {
        load_lexicon(BUNDLED_LEXICON)
    }

    /// Build from explicit terms (mainly for tests and small experiments).
    pub fn from_terms<I: IntoIterator<Item = S>, S: AsRef<str>>(terms: I) -> Self {
        let mut set = BTreeSet::new();
        for term in terms {
            if let Some(normalized) = normalize_term(term.as_ref()) {
                set.insert(normalized);
            }
        }
        let joined = set.iter().cloned().collect::<Vec<_>>().join("\n");
        let source_id = format!("{:x}", Sha256::digest(joined.as_bytes()));
        Lexicon { terms: set, source_id }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains(term)
    }
}

fn normalize_term(raw: &str) -> Option<String> {
    let collapsed = raw.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    if collapsed.is_empty() {
        None
    } else {
        Some(collapsed)
    }
}

/// Parse a lexicon file: one term per line, `#` comments.
pub fn load_lexicon(text: &str) -> Lexicon {
    let mut terms = BTreeSet::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(normalized) = normalize_term(line) {
            terms.insert(normalized);
        }
    }
    let source_id = format!("{:x}", Sha256::digest(text.as_bytes()));
    Lexicon { terms, source_id }
}

/// A term hit: the matched term and its byte span in the normalized text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermMatch {
    pub term: String,
    pub start: usize,
    pub end: usize,
}

/// Verdict for one URI: sensitive exactly when at least one term matched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageVerdict {
    pub uri: String,
    pub sensitive: bool,
    pub matches: Vec<TermMatch>,
}

/// Render path and query as matchable text: percent-decode, lowercase,
/// turn the URI separators `/ - _ + . =` into spaces, collapse whitespace.
/// Invalid percent escapes stay verbatim. The host is excluded; terms
/// inside hostnames (cancer.org) would inflate matches.
pub fn normalize_uri_text(uri: &ParsedUri) -> String {
    normalize_uri_text_with(uri, false)
}

/// [`normalize_uri_text`] with an opt-in host toggle.
pub fn normalize_uri_text_with(uri: &ParsedUri, include_host: bool) -> String {
    let mut combined = String::new();
    if include_host {
        combined.push_str(&uri.host);
        combined.push(' ');
    }
    combined.push_str(&uri.path);
    if let Some(query) = &uri.query {
        combined.push(' ');
        combined.push_str(query);
    }
    let decoded = percent_decode_lossy(&combined);
    let lowered = decoded.to_lowercase();
    let spaced: String = lowered
        .chars()
        .map(|c| if matches!(c, '/' | '-' | '_' | '+' | '.' | '=') { ' ' } else { c })
        .collect();
    spaced.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn percent_decode_lossy(input: &str) -> String {
    let bytes = input.as_bytes();
    let mut out: Vec<u8> = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() {
            let hex = &input[i + 1..i + 3];
            if let Ok(value) = u8::from_str_radix(hex, 16) {
                out.push(value);
                i += 3;
                continue;
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric()
}

/// Scan the normalized text for lexicon terms aligned on word boundaries.
/// Multi-word terms match as contiguous word sequences; every reported span
/// re-extracts to the matched term.
pub fn detect_sensitive(uri: &ParsedUri, lexicon: &Lexicon) -> LeakageVerdict {
    detect_sensitive_with(uri, lexicon, false)
}

/// [`detect_sensitive`] with an opt-in host toggle.
pub fn detect_sensitive_with(uri: &ParsedUri, lexicon: &Lexicon, include_host: bool) -> LeakageVerdict {
    let text = normalize_uri_text_with(uri, include_host);
    let bytes = text.as_bytes();
    let mut matches = Vec::new();
    for term in lexicon.terms() {
        let mut from = 0;
        while let Some(pos) = text[from..].find(term) {
            let start = from + pos;
            let end = start + term.len();
            let left_ok = start == 0 || !is_word_byte(bytes[start - 1]);
            let right_ok = end == bytes.len() || !is_word_byte(bytes[end]);
            if left_ok && right_ok {
                matches.push(TermMatch { term: term.to_string(), start, end });
            }
            from = start + 1;
        }
    }
    matches.sort_by(|a, b| (a.start, a.end, &a.term).cmp(&(b.start, b.end, &b.term)));
    LeakageVerdict { uri: uri.raw.clone(), sensitive: !matches.is_empty(), matches }
}

fn share(numerator: u64, denominator: u64) -> f64 {
    let raw = numerator as f64 * 100.0 / denominator as f64;
    (raw * 100.0).round() / 100.0
}

/// Percentage of loaded pages whose final URI uses the https scheme.
pub fn https_share(pages: &[PageLoadResult]) -> Result<f64, LeakageError> {
    let mut loaded = 0u64;
    let mut secure = 0u64;
    for page in pages.iter().filter(|p| p.status.is_loaded()) {
        loaded += 1;
        if page.final_uri.starts_with("https://") {
            secure += 1;
        }
    }
    if loaded == 0 {
        return Err(LeakageError::EmptyCorpus);
    }
    Ok(share(secure, loaded))
}

/// Leakage assessment of a seeded random URI sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageSampleReport {
    pub population_size: usize,
    pub sample_size: usize,
    pub requested_n: usize,
    pub seed: u64,
    pub generator: String,
    /// Percent of sampled URIs containing at least one lexicon term.
    pub sensitive_share: f64,
    /// Percent of the whole loaded population using https.
    pub https_share: f64,
}

/// Uniform integer in `[0, bound)` by rejection sampling, so the draw
/// sequence depends only on the ChaCha8 stream.
fn bounded(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let draw = rng.next_u64();
        if draw < zone {
            return draw % bound;
        }
    }
}

/// Deterministic sample of `k` indices out of `n` without replacement:
/// Fisher-Yates partial shuffle driven by a seeded ChaCha8 stream.
pub fn sample_indices(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let k = k.min(n);
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..k {
        let j = i + bounded(&mut rng, (n - i) as u64) as usize;
        indices.swap(i, j);
    }
    indices.truncate(k);
    indices
}

/// Draw a seeded sample of loaded page URIs and assess them against the
/// lexicon. Requests larger than the population use the whole population;
/// the report keeps both the requested and effective sizes.
pub fn assess_sample(
    records: &[CensusRecord],
    n: usize,
    seed: u64,
    lexicon: &Lexicon,
) -> Result<LeakageSampleReport, LeakageError> {
    assess_sample_with(records, n, seed, lexicon, false)
}

/// [`assess_sample`] with an opt-in host toggle for term matching.
pub fn assess_sample_with(
    records: &[CensusRecord],
    n: usize,
    seed: u64,
    lexicon: &Lexicon,
    include_host: bool,
) -> Result<LeakageSampleReport, LeakageError> {
    if n == 0 {
        return Err(LeakageError::InvalidSampleSize);
    }
    let loaded: Vec<&CensusRecord> = records.iter().filter(|r| r.load_status.is_loaded()).collect();
    if loaded.is_empty() {
        return Err(LeakageError::EmptyCorpus);
    }
    let population = loaded.len();
    let picked = sample_indices(population, n, seed);
    let mut sensitive = 0u64;
    for &idx in &picked {
        let record = loaded[idx];
        if let Ok(parsed) = crate::uri::parse_uri(&record.page_uri) {
            if detect_sensitive_with(&parsed, lexicon, include_host).sensitive {
                sensitive += 1;
            }
        }
    }
    let secure = loaded.iter().filter(|r| r.https).count() as u64;
    Ok(LeakageSampleReport {
        population_size: population,
        sample_size: picked.len(),
        requested_n: n,
        seed,
        generator: SAMPLE_GENERATOR.to_string(),
        sensitive_share: share(sensitive, picked.len() as u64),
        https_share: share(secure, population as u64),
    })
}
