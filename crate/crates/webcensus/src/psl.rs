//! Public-suffix rules and registrable-domain extraction.
//!
//! The census compares "domains" to decide first- vs third-party. A naive
//! last-two-labels comparison misclassifies hosts under multi-label
//! suffixes such as `co.uk`, so the party unit here is the registrable
//! domain (eTLD+1) computed against a pinned ruleset snapshot.
//!
//! Rule semantics follow the public-suffix algorithm: the longest matching
//! rule wins, exception rules (`!`) beat everything and shed their leftmost
//! label, and wildcard rules (`*.`) match exactly one extra label. Hosts
//! with no matching rule fall back to the last-two-labels heuristic and the
//! result is flagged as such.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PslError {
    #[error("host {0:?} is itself a public suffix")]
    HostIsPublicSuffix(String),
    #[error("malformed host {0:?}")]
    MalformedHost(String),
    #[error("duplicate rule {0:?} in ruleset")]
    DuplicateRule(String),
    #[error("exception rule !{0} has no shadowing wildcard *.{1}")]
    ExceptionWithoutWildcard(String, String),
    #[error("invalid rule {0:?} on line {1}")]
    InvalidRule(String, usize),
}

/// The ownership unit for party decisions: public suffix plus one label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegistrableDomain(String);

impl RegistrableDomain {
    /// Wrap an already-derived lowercase registrable domain.
    pub fn new(value: impl Into<String>) -> Self {
        let v: String = value.into();
        RegistrableDomain(v.to_ascii_lowercase())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RegistrableDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// How a registrable domain was derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Derivation {
    /// A ruleset rule matched.
    Rule,
    /// No rule matched; last-two-labels heuristic applied.
    Fallback,
    /// The host is an IP literal and is its own ownership unit.
    IpLiteral,
}

/// Result of [`registrable_domain`], carrying the derivation flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainMatch {
    pub domain: RegistrableDomain,
    pub derivation: Derivation,
}

/// A loaded public-suffix ruleset snapshot.
#[derive(Debug, Clone)]
pub struct PublicSuffixRuleset {
    plain: HashSet<String>,
    /// Parents of wildcard rules: `*.ck` is stored as `ck`.
    wildcard: HashSet<String>,
    /// Exception rules without their `!` prefix.
    exception: HashSet<String>,
    snapshot_id: String,
    rule_count: usize,
}

/// Trimmed ruleset snapshot shipped with the crate.
pub const BUNDLED_RULESET: &str = include_str!("../data/public_suffix_snapshot.dat");

impl PublicSuffixRuleset {
    /// Parse a ruleset from its text form: one rule per line, `*.` wildcard
    /// prefix, `!` exception prefix, `//` comments ignored. The snapshot id
    /// is the SHA-256 digest of the input bytes.
    pub fn parse(text: &str) -> Result<Self, PslError> {
        let mut plain = HashSet::new();
        let mut wildcard = HashSet::new();
        let mut exception = HashSet::new();
        let mut rule_count = 0usize;

        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let rule = line.trim();
            if rule.is_empty() || rule.starts_with("//") {
                continue;
            }
            let rule = rule.to_ascii_lowercase();
            let inserted = if let Some(body) = rule.strip_prefix('!') {
                if body.split('.').count() < 2 || !valid_rule_body(body) {
                    return Err(PslError::InvalidRule(rule.clone(), line_no));
                }
                exception.insert(body.to_string())
            } else if let Some(body) = rule.strip_prefix("*.") {
                if !valid_rule_body(body) {
                    return Err(PslError::InvalidRule(rule.clone(), line_no));
                }
                wildcard.insert(body.to_string())
            } else {
                if !valid_rule_body(&rule) {
                    return Err(PslError::InvalidRule(rule.clone(), line_no));
                }
                plain.insert(rule.clone())
            };
            if !inserted {
                return Err(PslError::DuplicateRule(rule));
            }
            rule_count += 1;
        }

        // Every exception must shadow a wildcard: !www.ck requires *.ck.
        for exc in &exception {
            let parent = exc.split_once('.').map(|(_, p)| p.to_string()).unwrap_or_default();
            if !wildcard.contains(&parent) {
                return Err(PslError::ExceptionWithoutWildcard(exc.clone(), parent));
            }
        }

        let snapshot_id = format!("{:x}", Sha256::digest(text.as_bytes()));
        Ok(Self { plain, wildcard, exception, snapshot_id, rule_count })
    }

    /// The ruleset snapshot shipped in `data/public_suffix_snapshot.dat`.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_RULESET).expect("bundled ruleset snapshot must parse")
    }

    pub fn snapshot_id(&self) -> &str {
        &self.snapshot_id
    }

    pub fn rule_count(&self) -> usize {
        self.rule_count
    }

    /// Derive the registrable domain of `host` under this ruleset.
    pub fn registrable_domain(&self, host: &str) -> Result<DomainMatch, PslError> {
        registrable_domain(host, self)
    }
}

fn valid_rule_body(body: &str) -> bool {
    !body.is_empty()
        && body.split('.').all(|label| {
            !label.is_empty()
                && label.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
        })
}

fn is_ipv4(labels: &[&str]) -> bool {
    labels.len() == 4
        && labels.iter().all(|l| {
            !l.is_empty() && l.len() <= 3 && l.chars().all(|c| c.is_ascii_digit()) && l.parse::<u16>().map(|v| v <= 255).unwrap_or(false)
        })
}

/// Derive the registrable domain (public suffix + 1 label) of a host.
///
/// IP literals are their own ownership unit. Hosts that are themselves a
/// public suffix produce [`PslError::HostIsPublicSuffix`]; callers treat
/// those as third party and flag them.
pub fn registrable_domain(host: &str, rules: &PublicSuffixRuleset) -> Result<DomainMatch, PslError> {
    let trimmed = host.trim_end_matches('.').to_ascii_lowercase();
    if trimmed.is_empty() {
        return Err(PslError::MalformedHost(host.to_string()));
    }
    if trimmed.starts_with('[') {
        return Ok(DomainMatch {
            domain: RegistrableDomain(trimmed),
            derivation: Derivation::IpLiteral,
        });
    }
    let labels: Vec<&str> = trimmed.split('.').collect();
    if labels.iter().any(|l| l.is_empty()) {
        return Err(PslError::MalformedHost(host.to_string()));
    }
    if is_ipv4(&labels) {
        return Ok(DomainMatch {
            domain: RegistrableDomain(trimmed),
            derivation: Derivation::IpLiteral,
        });
    }

    let n = labels.len();
    // Suffix label count of the prevailing rule; exceptions win outright.
    let mut exception_ps: Option<usize> = None;
    let mut rule_ps: Option<usize> = None;
    for i in 0..n {
        let suffix = labels[i..].join(".");
        if exception_ps.is_none() && rules.exception.contains(&suffix) {
            // Exception sheds its leftmost label.
            exception_ps = Some(n - i - 1);
        }
        if rule_ps.is_none() {
            if rules.plain.contains(&suffix) {
                rule_ps = Some(n - i);
            } else if i + 1 < n {
                let parent = labels[i + 1..].join(".");
                if rules.wildcard.contains(&parent) {
                    rule_ps = Some(n - i);
                }
            }
        }
    }

    let (ps_labels, derivation) = match (exception_ps, rule_ps) {
        (Some(k), _) => (k, Derivation::Rule),
        (None, Some(k)) => (k, Derivation::Rule),
        // No rule matched: the last label is treated as the suffix, making
        // the registrable domain the last two labels.
        (None, None) => (1, Derivation::Fallback),
    };

    if ps_labels >= n {
        return Err(PslError::HostIsPublicSuffix(trimmed));
    }
    let start = n - ps_labels - 1;
    Ok(DomainMatch {
        domain: RegistrableDomain(labels[start..].join(".")),
        derivation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_rules() -> PublicSuffixRuleset {
        PublicSuffixRuleset::parse(
            "// test rules\ncom\nnet\ngov\nuk\nco.uk\norg.uk\n*.ck\n!www.ck\n",
        )
        .unwrap()
    }

    #[test]
    fn subdomains_share_registrable_domain() {
        let rules = small_rules();
        let m = registrable_domain("images.example.com", &rules).unwrap();
        assert_eq!(m.domain.as_str(), "example.com");
        assert_eq!(m.derivation, Derivation::Rule);
        let m = registrable_domain("www.google-analytics.com", &rules).unwrap();
        assert_eq!(m.domain.as_str(), "google-analytics.com");
    }

    #[test]
    fn multi_label_suffix() {
        let rules = small_rules();
        let m = registrable_domain("www.foo.co.uk", &rules).unwrap();
        assert_eq!(m.domain.as_str(), "foo.co.uk");
        let m = registrable_domain("foo.co.uk", &rules).unwrap();
        assert_eq!(m.domain.as_str(), "foo.co.uk");
    }

    #[test]
    fn host_equal_to_suffix_is_error() {
        let rules = small_rules();
        assert_eq!(
            registrable_domain("co.uk", &rules),
            Err(PslError::HostIsPublicSuffix("co.uk".into()))
        );
        assert_eq!(
            registrable_domain("com", &rules),
            Err(PslError::HostIsPublicSuffix("com".into()))
        );
    }

    #[test]
    fn wildcard_and_exception() {
        let rules = small_rules();
        // *.ck makes every direct child a public suffix.
        assert_eq!(
            registrable_domain("foo.ck", &rules),
            Err(PslError::HostIsPublicSuffix("foo.ck".into()))
        );
        let m = registrable_domain("bar.foo.ck", &rules).unwrap();
        assert_eq!(m.domain.as_str(), "bar.foo.ck");
        // !www.ck carves www.ck back out as registrable.
        let m = registrable_domain("www.ck", &rules).unwrap();
        assert_eq!(m.domain.as_str(), "www.ck");
        let m = registrable_domain("sub.www.ck", &rules).unwrap();
        assert_eq!(m.domain.as_str(), "www.ck");
    }

    #[test]
    fn fallback_when_no_rule_matches() {
        let rules = small_rules();
        let m = registrable_domain("host.unknowntld", &rules).unwrap();
        assert_eq!(m.domain.as_str(), "host.unknowntld");
        assert_eq!(m.derivation, Derivation::Fallback);
        let m = registrable_domain("a.b.unknowntld", &rules).unwrap();
        assert_eq!(m.domain.as_str(), "b.unknowntld");
        assert_eq!(
            registrable_domain("localhost", &rules),
            Err(PslError::HostIsPublicSuffix("localhost".into()))
        );
    }

    #[test]
    fn ip_literals_are_their_own_unit() {
        let rules = small_rules();
        let m = registrable_domain("127.0.0.1", &rules).unwrap();
        assert_eq!(m.domain.as_str(), "127.0.0.1");
        assert_eq!(m.derivation, Derivation::IpLiteral);
        let m = registrable_domain("[::1]", &rules).unwrap();
        assert_eq!(m.derivation, Derivation::IpLiteral);
    }

    #[test]
    fn idempotent_on_own_output() {
        let rules = PublicSuffixRuleset::bundled();
        for host in ["images.example.com", "www.foo.co.uk", "a.b.c.example.org", "www.nhs.uk"] {
            let first = registrable_domain(host, &rules).unwrap();
            let again = registrable_domain(first.domain.as_str(), &rules).unwrap();
            assert_eq!(first.domain, again.domain);
        }
    }

    #[test]
    fn result_is_label_suffix_of_host() {
        let rules = PublicSuffixRuleset::bundled();
        for host in ["images.example.com", "www.foo.co.uk", "deep.a.b.example.net", "www.nhs.uk"] {
            let m = registrable_domain(host, &rules).unwrap();
            let suffix = format!(".{}", m.domain.as_str());
            assert!(host == m.domain.as_str() || host.ends_with(&suffix), "{host} vs {}", m.domain);
        }
    }

    #[test]
    fn rejects_duplicates_and_orphan_exceptions() {
        assert!(matches!(
            PublicSuffixRuleset::parse("com\ncom\n"),
            Err(PslError::DuplicateRule(rule)) if rule == "com"
        ));
        assert!(matches!(
            PublicSuffixRuleset::parse("com\n!www.ck\n"),
            Err(PslError::ExceptionWithoutWildcard(_, _))
        ));
    }

    #[test]
    fn malformed_hosts() {
        let rules = small_rules();
        assert!(registrable_domain("", &rules).is_err());
        assert!(registrable_domain("a..b", &rules).is_err());
    }

    #[test]
    fn bundled_snapshot_loads() {
        let rules = PublicSuffixRuleset::bundled();
        assert!(rules.rule_count() > 50);
        assert_eq!(rules.snapshot_id().len(), 64);
        let m = rules.registrable_domain("www.nhs.uk").unwrap();
        assert_eq!(m.domain.as_str(), "nhs.uk");
    }
}
