//! First- vs third-party decisions and per-page tracking flags.
//!
//! The party test compares registrable domains: a request is first-party
//! exactly when its registrable domain equals the page's. The page domain
//! comes from the post-redirect `final_uri`: that is the page the user
//! actually received and the value third parties see in the Referer.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capture::{CapturedCookie, CapturedRequest, LoadStatus, PageLoadResult};
use crate::census::{CensusRecord, RecordDiagnostics};
use crate::psl::{registrable_domain, Derivation, PslError, PublicSuffixRuleset, RegistrableDomain};
use crate::uri::{self, ExtensionClass, ExtensionRules, UriError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("result not loaded (status {0})")]
    NotLoaded(String),
    #[error("final uri unusable: {0}")]
    FinalUri(String),
    #[error(transparent)]
    MalformedUri(#[from] UriError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartyClass {
    FirstParty,
    ThirdParty,
}

/// Per-page tracking flags. `has_third_party_javascript` implies
/// `has_third_party_request` by construction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageFlags {
    pub has_third_party_request: bool,
    pub has_third_party_javascript: bool,
    pub has_third_party_cookie: bool,
}

/// One requested element: its argument-stripped URI, extension class, and
/// the registrable domain it was served from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementRecord {
    pub stripped_uri: String,
    pub extension_class: ExtensionClass,
    pub request_registrable_domain: RegistrableDomain,
}

/// How a host was mapped to its ownership unit for party comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitFlag {
    Rule,
    Fallback,
    IpLiteral,
    /// Host is itself a public suffix; the host string stands in as the
    /// unit and the observation is flagged.
    SuffixHost,
}

/// Ownership unit of a host. Suffix hosts fall back to the host itself.
pub fn party_unit(host: &str, rules: &PublicSuffixRuleset) -> Result<(RegistrableDomain, UnitFlag), PslError> {
    match registrable_domain(host, rules) {
        Ok(m) => {
            let flag = match m.derivation {
                Derivation::Rule => UnitFlag::Rule,
                Derivation::Fallback => UnitFlag::Fallback,
                Derivation::IpLiteral => UnitFlag::IpLiteral,
            };
            Ok((m.domain, flag))
        }
        Err(PslError::HostIsPublicSuffix(host)) => Ok((RegistrableDomain::new(host), UnitFlag::SuffixHost)),
        Err(e) => Err(e),
    }
}

/// First-party iff the two registrable domains are equal.
pub fn classify_party(page_domain: &RegistrableDomain, request_domain: &RegistrableDomain) -> PartyClass {
    if page_domain == request_domain {
        PartyClass::FirstParty
    } else {
        PartyClass::ThirdParty
    }
}

/// Outcome of classifying one cookie.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CookieVerdict {
    pub party: PartyClass,
    /// Set when the cookie's domain attribute was a public suffix or could
    /// not be mapped to a registrable domain.
    pub flagged: bool,
}

/// Apply the party test to a cookie's domain attribute.
pub fn classify_cookie(
    page_domain: &RegistrableDomain,
    cookie: &CapturedCookie,
    rules: &PublicSuffixRuleset,
) -> CookieVerdict {
    match party_unit(&cookie.domain_attribute, rules) {
        Ok((domain, flag)) => CookieVerdict {
            party: classify_party(page_domain, &domain),
            flagged: flag == UnitFlag::SuffixHost,
        },
        Err(_) => CookieVerdict { party: PartyClass::ThirdParty, flagged: true },
    }
}

/// Build the element record for one request: strip arguments, classify the
/// extension, attach the registrable domain.
pub fn classify_element(
    request: &CapturedRequest,
    rules: &PublicSuffixRuleset,
) -> Result<ElementRecord, ClassifyError> {
    classify_element_with(request, rules, &ExtensionRules::default())
}

pub fn classify_element_with(
    request: &CapturedRequest,
    rules: &PublicSuffixRuleset,
    ext_rules: &ExtensionRules,
) -> Result<ElementRecord, ClassifyError> {
    let parsed = uri::parse_uri(&request.uri)?;
    let (domain, _) = party_unit(&parsed.host, rules)
        .map_err(|e| ClassifyError::MalformedUri(UriError::MalformedUri(e.to_string())))?;
    Ok(ElementRecord {
        stripped_uri: uri::strip_arguments(&parsed),
        extension_class: uri::extract_extension_with(&parsed, ext_rules),
        request_registrable_domain: domain,
    })
}

fn is_script_content_type(content_type: &str) -> bool {
    let ct = content_type.to_ascii_lowercase();
    ct.contains("javascript") || ct.contains("ecmascript")
}

/// Derive the page's tracking flags. Rejects non-Loaded results; callers
/// exclude those from denominators.
pub fn derive_page_flags(
    result: &PageLoadResult,
    rules: &PublicSuffixRuleset,
) -> Result<PageFlags, ClassifyError> {
    if !result.status.is_loaded() {
        return Err(ClassifyError::NotLoaded(result.status.label()));
    }
    let record = classify_page(result, rules, &ExtensionRules::default())?;
    Ok(record.flags)
}

/// Full per-page classification: flags, third-party domain set, element
/// records, and diagnostics. Non-Loaded results produce a record with the
/// failure status and no analysis, so load failures stay visible in
/// reports without polluting percentage denominators.
pub fn classify_page(
    result: &PageLoadResult,
    rules: &PublicSuffixRuleset,
    ext_rules: &ExtensionRules,
) -> Result<CensusRecord, ClassifyError> {
    if !result.status.is_loaded() {
        let page_uri = if result.final_uri.is_empty() {
            result.requested_uri.clone()
        } else {
            result.final_uri.clone()
        };
        let tld = uri::parse_uri(&page_uri)
            .map(|p| uri::tld_category(&p.host))
            .unwrap_or(uri::TldCategory::Other(String::new()));
        return Ok(CensusRecord {
            page_uri,
            tld_category: tld,
            flags: PageFlags::default(),
            third_party_domains: Default::default(),
            elements: Vec::new(),
            https: false,
            load_status: result.status.clone(),
            diagnostics: RecordDiagnostics::default(),
        });
    }

    let final_parsed = uri::parse_uri(&result.final_uri)
        .map_err(|e| ClassifyError::FinalUri(e.to_string()))?;
    let (page_domain, page_flag) = party_unit(&final_parsed.host, rules)
        .map_err(|e| ClassifyError::FinalUri(e.to_string()))?;

    let mut flags = PageFlags::default();
    let mut third_party_domains = std::collections::BTreeSet::new();
    let mut elements = Vec::new();
    let mut diagnostics = RecordDiagnostics::default();
    if page_flag == UnitFlag::Fallback {
        diagnostics.fallback_domains += 1;
    }

    for request in &result.requests {
        let parsed = match uri::parse_uri(&request.uri) {
            Ok(p) => p,
            Err(_) => {
                diagnostics.malformed_requests += 1;
                continue;
            }
        };
        let (domain, flag) = match party_unit(&parsed.host, rules) {
            Ok(unit) => unit,
            Err(_) => {
                diagnostics.malformed_requests += 1;
                continue;
            }
        };
        match flag {
            UnitFlag::Fallback => diagnostics.fallback_domains += 1,
            UnitFlag::SuffixHost => diagnostics.suffix_host_requests += 1,
            _ => {}
        }
        let element = ElementRecord {
            stripped_uri: uri::strip_arguments(&parsed),
            extension_class: uri::extract_extension_with(&parsed, ext_rules),
            request_registrable_domain: domain.clone(),
        };
        if classify_party(&page_domain, &domain) == PartyClass::ThirdParty {
            flags.has_third_party_request = true;
            let is_js = element.extension_class == ExtensionClass::Javascript
                || request.content_type.as_deref().is_some_and(is_script_content_type);
            if is_js {
                flags.has_third_party_javascript = true;
            }
            third_party_domains.insert(domain);
        }
        elements.push(element);
    }

    for cookie in &result.cookies {
        let verdict = classify_cookie(&page_domain, cookie, rules);
        if verdict.flagged {
            diagnostics.suffix_host_cookies += 1;
        }
        if verdict.party == PartyClass::ThirdParty {
            flags.has_third_party_cookie = true;
        }
    }

    Ok(CensusRecord {
        page_uri: result.final_uri.clone(),
        tld_category: uri::tld_category(&final_parsed.host),
        flags,
        third_party_domains,
        elements,
        https: final_parsed.scheme == "https",
        load_status: LoadStatus::Loaded,
        diagnostics,
    })
}
