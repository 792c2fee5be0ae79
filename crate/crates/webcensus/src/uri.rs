//! URI parsing and decomposition.
//!
//! Everything downstream (party decisions, element analysis, leakage
//! matching) starts from a [`ParsedUri`]. Parsing is deliberately strict:
//! only absolute URIs with an authority are accepted, and percent-encoding
//! is carried verbatim so captured request URIs survive round trips.

use serde::{Deserialize, Serialize};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UriError {
    #[error("malformed uri: {0}")]
    MalformedUri(String),
}

/// A decomposed absolute URI.
///
/// `raw` keeps the input as given; equality is defined over the parsed
/// components only, so `HTTP://X.com/` and `http://x.com/` compare equal.
#[derive(Debug, Clone, Eq, Serialize, Deserialize)]
pub struct ParsedUri {
    pub raw: String,
    pub scheme: String,
    pub host: String,
    pub port: Option<u16>,
    pub path: String,
    pub query: Option<String>,
    pub fragment: Option<String>,
}

impl PartialEq for ParsedUri {
    fn eq(&self, other: &Self) -> bool {
        self.scheme == other.scheme
            && self.host == other.host
            && self.port == other.port
            && self.path == other.path
            && self.query == other.query
            && self.fragment == other.fragment
    }
}

impl fmt::Display for ParsedUri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}://{}", self.scheme, self.host)?;
        if let Some(port) = self.port {
            write!(f, ":{port}")?;
        }
        write!(f, "{}", self.path)?;
        if let Some(q) = &self.query {
            write!(f, "?{q}")?;
        }
        if let Some(frag) = &self.fragment {
            write!(f, "#{frag}")?;
        }
        Ok(())
    }
}

/// Grouping of pages by the final host label, per the census's five
/// reporting categories.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TldCategory {
    Com,
    Org,
    Gov,
    Edu,
    Other(String),
}

impl fmt::Display for TldCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TldCategory::Com => write!(f, "com"),
            TldCategory::Org => write!(f, "org"),
            TldCategory::Gov => write!(f, "gov"),
            TldCategory::Edu => write!(f, "edu"),
            TldCategory::Other(label) => write!(f, "other({label})"),
        }
    }
}

/// File-extension classification of a requested element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionClass {
    NoExtension,
    Javascript,
    Image,
    DynamicPage,
    Other(String),
}

impl ExtensionClass {
    /// Collapse to the five-bucket class used by histogram tables.
    pub fn element_class(&self) -> ElementClass {
        match self {
            ExtensionClass::NoExtension => ElementClass::NoExtension,
            ExtensionClass::Javascript => ElementClass::Javascript,
            ExtensionClass::Image => ElementClass::Image,
            ExtensionClass::DynamicPage => ElementClass::DynamicPage,
            ExtensionClass::Other(_) => ElementClass::Other,
        }
    }
}

/// The five element classes of the extension histogram, with `Other`
/// collapsed to a single bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementClass {
    NoExtension,
    Javascript,
    Image,
    DynamicPage,
    Other,
}

impl ElementClass {
    pub const ALL: [ElementClass; 5] = [
        ElementClass::NoExtension,
        ElementClass::Javascript,
        ElementClass::Image,
        ElementClass::DynamicPage,
        ElementClass::Other,
    ];

    /// Table label for report rendering.
    pub fn label(&self) -> &'static str {
        match self {
            ElementClass::NoExtension => "No Extension",
            ElementClass::Javascript => "Javascript",
            ElementClass::Image => "Image",
            ElementClass::DynamicPage => "Dynamic Page",
            ElementClass::Other => "Other",
        }
    }
}

/// Extensions classified as images.
pub const IMAGE_EXTENSIONS: &[&str] = &["gif", "jpg", "jpeg", "png", "webp", "svg", "ico", "bmp"];

/// Default extensions classified as dynamic pages. Overridable through
/// [`ExtensionRules`].
pub const DYNAMIC_PAGE_EXTENSIONS: &[&str] = &["php", "asp", "aspx", "jsp", "cgi", "pl"];

/// Extension tokens longer than this are not treated as extensions, so
/// dotted path segments such as `v1.2` do not classify as files.
pub const MAX_EXTENSION_LEN: usize = 6;

/// Configurable extension sets for element classification.
#[derive(Debug, Clone)]
pub struct ExtensionRules {
    pub dynamic_page: Vec<String>,
}

impl Default for ExtensionRules {
    fn default() -> Self {
        Self {
            dynamic_page: DYNAMIC_PAGE_EXTENSIONS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn valid_scheme(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
}

fn valid_host(h: &str) -> bool {
    if h.is_empty() {
        return false;
    }
    // Bracketed IPv6 literals are kept opaque.
    if h.starts_with('[') {
        return h.ends_with(']') && h.len() > 2;
    }
    h.chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '.' | '_' | '~' | '%'))
}

/// Parse an absolute URI into its components.
///
/// The scheme and host are lowercased; path, query, and fragment keep their
/// percent-encoding verbatim. Relative references are rejected.
pub fn parse_uri(raw: &str) -> Result<ParsedUri, UriError> {
    if raw.is_empty() {
        return Err(UriError::MalformedUri("empty input".into()));
    }
    let (scheme_part, rest) = match raw.split_once("://") {
        Some(split) => split,
        None => return Err(UriError::MalformedUri(format!("no scheme/authority in {raw:?}"))),
    };
    if !valid_scheme(scheme_part) {
        return Err(UriError::MalformedUri(format!("invalid scheme in {raw:?}")));
    }
    let scheme = scheme_part.to_ascii_lowercase();

    let authority_end = rest.find(['/', '?', '#']).unwrap_or(rest.len());
    let authority = &rest[..authority_end];
    let tail = &rest[authority_end..];

    // Userinfo is dropped; it never participates in census comparisons.
    let host_port = match authority.rsplit_once('@') {
        Some((_, hp)) => hp,
        None => authority,
    };

    let (host_raw, port) = if host_port.starts_with('[') {
        match host_port.find(']') {
            Some(close) => {
                let host = &host_port[..=close];
                let after = &host_port[close + 1..];
                let port = parse_port(after.strip_prefix(':'), raw)?;
                (host, port)
            }
            None => return Err(UriError::MalformedUri(format!("unclosed ipv6 literal in {raw:?}"))),
        }
    } else {
        match host_port.split_once(':') {
            Some((h, p)) => (h, parse_port(Some(p), raw)?),
            None => (host_port, None),
        }
    };

    if !valid_host(host_raw) {
        return Err(UriError::MalformedUri(format!("invalid host in {raw:?}")));
    }
    let host = host_raw.to_ascii_lowercase();

    let (path, query, fragment) = split_tail(tail);

    Ok(ParsedUri {
        raw: raw.to_string(),
        scheme,
        host,
        port,
        path,
        query,
        fragment,
    })
}

fn parse_port(p: Option<&str>, raw: &str) -> Result<Option<u16>, UriError> {
    match p {
        None | Some("") => Ok(None),
        Some(digits) => digits
            .parse::<u16>()
            .map(Some)
            .map_err(|_| UriError::MalformedUri(format!("invalid port in {raw:?}"))),
    }
}

fn split_tail(tail: &str) -> (String, Option<String>, Option<String>) {
    let (before_frag, fragment) = match tail.split_once('#') {
        Some((b, f)) => (b, Some(f.to_string())),
        None => (tail, None),
    };
    let (path_part, query) = match before_frag.split_once('?') {
        Some((p, q)) => (p, Some(q.to_string())),
        None => (before_frag, None),
    };
    let path = if path_part.is_empty() { "/".to_string() } else { path_part.to_string() };
    (path, query, fragment)
}

/// Categorize a host by its final label.
pub fn tld_category(host: &str) -> TldCategory {
    let trimmed = host.trim_end_matches('.');
    let label = trimmed.rsplit('.').next().unwrap_or(trimmed).to_ascii_lowercase();
    match label.as_str() {
        "com" => TldCategory::Com,
        "org" => TldCategory::Org,
        "gov" => TldCategory::Gov,
        "edu" => TldCategory::Edu,
        _ => TldCategory::Other(label),
    }
}

/// Drop query and fragment, returning `scheme://host/path`.
///
/// Argument strings carry per-site identifiers that make otherwise-identical
/// elements look unique, so element analysis always works on the stripped
/// form.
pub fn strip_arguments(uri: &ParsedUri) -> String {
    format!("{}://{}{}", uri.scheme, uri.host, uri.path)
}

/// Extract and classify the extension of the final path segment.
pub fn extract_extension(uri: &ParsedUri) -> ExtensionClass {
    extract_extension_with(uri, &ExtensionRules::default())
}

/// [`extract_extension`] with a configurable dynamic-page set.
pub fn extract_extension_with(uri: &ParsedUri, rules: &ExtensionRules) -> ExtensionClass {
    let segment = uri.path.rsplit('/').next().unwrap_or("");
    let ext = match segment.rsplit_once('.') {
        Some((_, e)) => e,
        None => return ExtensionClass::NoExtension,
    };
    if ext.is_empty() || ext.len() > MAX_EXTENSION_LEN || !ext.chars().all(|c| c.is_ascii_alphanumeric()) {
        return ExtensionClass::NoExtension;
    }
    let token = ext.to_ascii_lowercase();
    if token == "js" {
        ExtensionClass::Javascript
    } else if IMAGE_EXTENSIONS.contains(&token.as_str()) {
        ExtensionClass::Image
    } else if rules.dynamic_page.iter().any(|d| d == &token) {
        ExtensionClass::DynamicPage
    } else {
        ExtensionClass::Other(token)
    }
}

/// Canonical page key for deduplication: lowercased scheme and host,
/// default port elided, fragment removed, query preserved.
pub fn normalize_page_uri(raw: &str) -> Result<String, UriError> {
    let uri = parse_uri(raw)?;
    let mut out = format!("{}://{}", uri.scheme, uri.host);
    if let Some(port) = uri.port {
        let default = matches!((uri.scheme.as_str(), port), ("http", 80) | ("https", 443));
        if !default {
            out.push_str(&format!(":{port}"));
        }
    }
    out.push_str(&uri.path);
    if let Some(q) = &uri.query {
        out.push('?');
        out.push_str(q);
    }
    Ok(out)
}
