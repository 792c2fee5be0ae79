//! HTTP Archive (HAR 1.2) ingestion and export.
//!
//! HAR files are the offline acquisition path and the on-disk artifact of
//! the scan stage. One HAR log may contain many pages; each page maps to
//! one [`PageLoadResult`]. Referer and User-Agent header values survive
//! ingestion byte-exact.
//!
//! Exported archives carry two custom page fields (`_webcensusStatus`,
//! `_webcensusFinalUrl`) so that non-Loaded statuses and resolved final
//! URIs round-trip; standard archives without them still ingest.

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::{
    parse_set_cookie, CaptureError, CapturedCookie, CapturedRequest, LoadStatus, PageLoadResult,
};

#[derive(Debug, Serialize, Deserialize)]
struct Har {
    log: HarLog,
}

#[derive(Debug, Serialize, Deserialize)]
struct HarLog {
    #[serde(default = "default_version")]
    version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    creator: Option<HarCreator>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pages: Vec<HarPage>,
    entries: Vec<HarEntry>,
}

fn default_version() -> String {
    "1.2".to_string()
}

#[derive(Debug, Serialize, Deserialize)]
struct HarCreator {
    name: String,
    version: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct HarPage {
    id: String,
    #[serde(rename = "startedDateTime")]
    started_date_time: String,
    #[serde(default)]
    title: String,
    #[serde(rename = "pageTimings", default)]
    page_timings: serde_json::Value,
    #[serde(rename = "_webcensusStatus", skip_serializing_if = "Option::is_none")]
    webcensus_status: Option<String>,
    #[serde(rename = "_webcensusFinalUrl", skip_serializing_if = "Option::is_none")]
    webcensus_final_url: Option<String>,
    #[serde(rename = "_webcensusSettleSeconds", skip_serializing_if = "Option::is_none")]
    webcensus_settle_seconds: Option<u32>,
    #[serde(rename = "_webcensusCookies", skip_serializing_if = "Option::is_none")]
    webcensus_cookies: Option<Vec<CapturedCookie>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct HarEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pageref: Option<String>,
    #[serde(rename = "startedDateTime")]
    started_date_time: String,
    #[serde(default)]
    time: f64,
    request: HarRequest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    response: Option<HarResponse>,
}

#[derive(Debug, Serialize, Deserialize)]
struct HarRequest {
    method: String,
    url: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    headers: Vec<HarHeader>,
}

#[derive(Debug, Serialize, Deserialize)]
struct HarResponse {
    #[serde(default)]
    status: u16,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    headers: Vec<HarHeader>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    content: Option<HarContent>,
    #[serde(rename = "redirectURL", default, skip_serializing_if = "Option::is_none")]
    redirect_url: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct HarContent {
    #[serde(rename = "mimeType", default)]
    mime_type: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct HarHeader {
    name: String,
    value: String,
}

fn header<'a>(headers: &'a [HarHeader], name: &str) -> Option<&'a str> {
    headers
        .iter()
        .find(|h| h.name.eq_ignore_ascii_case(name))
        .map(|h| h.value.as_str())
}

fn parse_har_time(value: &str) -> Result<DateTime<Utc>, CaptureError> {
    DateTime::parse_from_rfc3339(value)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| CaptureError::Schema(format!("bad startedDateTime {value:?}: {e}")))
}

fn parse_status_field(raw: &str) -> LoadStatus {
    match raw {
        "loaded" => LoadStatus::Loaded,
        "timeout" => LoadStatus::Timeout,
        other => match other.strip_prefix("error:") {
            Some(reason) => LoadStatus::Error(reason.to_string()),
            None => LoadStatus::Error(other.to_string()),
        },
    }
}

/// Ingest a HAR 1.2 document, producing one result per page object.
///
/// Archives without a `pages` array are treated as a single page. Pages
/// with zero entries come back as `status=error:empty`. Cookies are taken
/// from response `Set-Cookie` headers unless the page carries a
/// `_webcensusCookies` field, which then stands in for them entirely.
pub fn ingest_har(document: &str) -> Result<Vec<PageLoadResult>, CaptureError> {
    let har: Har = serde_json::from_str(document)
        .map_err(|e| CaptureError::Schema(format!("har parse failed: {e}")))?;
    let log = har.log;

    // Group entry indices by pageref, preserving order.
    let mut by_page: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut unassigned: Vec<usize> = Vec::new();
    for (idx, entry) in log.entries.iter().enumerate() {
        match &entry.pageref {
            Some(page) => by_page.entry(page.clone()).or_default().push(idx),
            None => unassigned.push(idx),
        }
    }

    let pages: Vec<HarPage> = if log.pages.is_empty() {
        if log.entries.is_empty() {
            return Err(CaptureError::Schema("har has no pages and no entries".into()));
        }
        vec![HarPage {
            id: "page_0".into(),
            started_date_time: log.entries[0].started_date_time.clone(),
            title: log.entries[0].request.url.clone(),
            page_timings: serde_json::Value::Null,
            webcensus_status: None,
            webcensus_final_url: None,
            webcensus_settle_seconds: None,
            webcensus_cookies: None,
        }]
    } else {
        log.pages
    };
    let single_page = pages.len() == 1;

    let mut results = Vec::with_capacity(pages.len());
    for page in &pages {
        let mut indices = by_page.remove(&page.id).unwrap_or_default();
        if single_page {
            indices.extend(unassigned.iter().copied());
            indices.sort_unstable();
        }

        let mut requests = Vec::with_capacity(indices.len());
        let mut cookies = Vec::new();
        for &idx in &indices {
            let entry = &log.entries[idx];
            let ts = parse_har_time(&entry.started_date_time)?;
            let response = entry.response.as_ref();
            let content_type = response.and_then(|r| {
                r.content
                    .as_ref()
                    .map(|c| c.mime_type.clone())
                    .filter(|m| !m.is_empty())
                    .or_else(|| header(&r.headers, "content-type").map(str::to_string))
            });
            requests.push(CapturedRequest {
                uri: entry.request.url.clone(),
                method: entry.request.method.clone(),
                referer: header(&entry.request.headers, "referer").map(str::to_string),
                user_agent: header(&entry.request.headers, "user-agent").map(str::to_string),
                response_status: response.map(|r| r.status).filter(|s| *s != 0),
                content_type,
                timestamp: ts,
            });
            if page.webcensus_cookies.is_none() {
                if let Some(resp) = response {
                    let host = crate::uri::parse_uri(&entry.request.url)
                        .map(|u| u.host)
                        .unwrap_or_default();
                    for h in resp.headers.iter().filter(|h| h.name.eq_ignore_ascii_case("set-cookie")) {
                        if let Some(cookie) = parse_set_cookie(&h.value, &host, ts) {
                            cookies.push(cookie);
                        }
                    }
                }
            }
        }
        if let Some(recorded) = &page.webcensus_cookies {
            cookies = recorded.clone();
        }

        let requested_uri = requests
            .first()
            .map(|r| r.uri.clone())
            .unwrap_or_else(|| page.title.clone());
        let final_uri = match &page.webcensus_final_url {
            Some(url) => url.clone(),
            None => walk_redirects(&log.entries, &indices),
        };
        let final_uri = if final_uri.is_empty() { requested_uri.clone() } else { final_uri };

        let status = match &page.webcensus_status {
            Some(raw) => parse_status_field(raw),
            None if requests.is_empty() => LoadStatus::Error("empty".into()),
            None => LoadStatus::Loaded,
        };

        let mut started_at = parse_har_time(&page.started_date_time)?;
        if let Some(min_request) = requests.iter().map(|r| r.timestamp).min() {
            started_at = started_at.min(min_request);
        }

        results.push(PageLoadResult {
            requested_uri,
            final_uri,
            status,
            started_at,
            settle_seconds: page.webcensus_settle_seconds.unwrap_or(0),
            requests,
            cookies,
        });
    }
    Ok(results)
}

/// Follow the document redirect chain starting from the page's first entry
/// and return the last location reached.
fn walk_redirects(entries: &[HarEntry], indices: &[usize]) -> String {
    let Some(&first) = indices.first() else {
        return String::new();
    };
    let mut current = first;
    let mut current_url = entries[current].request.url.clone();
    for _ in 0..16 {
        let entry = &entries[current];
        let Some(resp) = entry.response.as_ref() else { break };
        if !(300..400).contains(&resp.status) {
            break;
        }
        let Some(target) = resp.redirect_url.as_ref().filter(|t| !t.is_empty()) else { break };
        let absolute = resolve_redirect(&current_url, target);
        let Some(&next) = indices
            .iter()
            .find(|&&idx| idx > current && entries[idx].request.url == absolute)
        else {
            current_url = absolute;
            break;
        };
        current = next;
        current_url = entries[current].request.url.clone();
    }
    current_url
}

fn resolve_redirect(base: &str, target: &str) -> String {
    if target.contains("://") {
        return target.to_string();
    }
    match crate::uri::parse_uri(base) {
        Ok(parsed) if target.starts_with('/') => {
            let port = parsed.port.map(|p| format!(":{p}")).unwrap_or_default();
            format!("{}://{}{}{}", parsed.scheme, parsed.host, port, target)
        }
        _ => target.to_string(),
    }
}

fn render_time(ts: DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Serialize page-load results as a HAR 1.2 document.
pub fn write_har(results: &[PageLoadResult], creator: &str) -> String {
    let mut pages = Vec::with_capacity(results.len());
    let mut entries = Vec::new();
    for (idx, result) in results.iter().enumerate() {
        let page_id = format!("page_{idx}");
        pages.push(HarPage {
            id: page_id.clone(),
            started_date_time: render_time(result.started_at),
            title: result.requested_uri.clone(),
            page_timings: serde_json::json!({}),
            webcensus_status: Some(result.status.label()),
            webcensus_final_url: Some(result.final_uri.clone()),
            webcensus_settle_seconds: Some(result.settle_seconds),
            webcensus_cookies: Some(result.cookies.clone()),
        });
        for request in &result.requests {
            let mut headers = Vec::new();
            if let Some(referer) = &request.referer {
                headers.push(HarHeader { name: "Referer".into(), value: referer.clone() });
            }
            if let Some(agent) = &request.user_agent {
                headers.push(HarHeader { name: "User-Agent".into(), value: agent.clone() });
            }
            entries.push(HarEntry {
                pageref: Some(page_id.clone()),
                started_date_time: render_time(request.timestamp),
                time: 0.0,
                request: HarRequest {
                    method: request.method.clone(),
                    url: request.uri.clone(),
                    headers,
                },
                response: Some(HarResponse {
                    status: request.response_status.unwrap_or(0),
                    headers: Vec::new(),
                    content: Some(HarContent {
                        mime_type: request.content_type.clone().unwrap_or_default(),
                    }),
                    redirect_url: None,
                }),
            });
        }
    }
    let har = Har {
        log: HarLog {
            version: "1.2".into(),
            creator: Some(HarCreator { name: creator.into(), version: env!("CARGO_PKG_VERSION").into() }),
            pages,
            entries,
        },
    };
    serde_json::to_string(&har).expect("har serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::CookieSource;
    use chrono::TimeZone;

    const MINIMAL: &str = r#"{
      "log": {
        "version": "1.2",
        "pages": [
          {"id": "p1", "startedDateTime": "2014-04-01T00:00:00.000Z", "title": "http://www.cdc.gov/hiv/", "pageTimings": {}}
        ],
        "entries": [
          {
            "pageref": "p1",
            "startedDateTime": "2014-04-01T00:00:01.000Z",
            "request": {"method": "GET", "url": "http://www.cdc.gov/hiv/", "headers": []},
            "response": {"status": 200, "headers": [], "content": {"mimeType": "text/html"}}
          }
        ]
      }
    }"#;

    #[test]
    fn ingests_minimal_har() {
        let results = ingest_har(MINIMAL).unwrap();
        assert_eq!(results.len(), 1);
        let page = &results[0];
        assert_eq!(page.status, LoadStatus::Loaded);
        assert_eq!(page.requests.len(), 1);
        assert_eq!(page.requested_uri, "http://www.cdc.gov/hiv/");
        assert_eq!(page.final_uri, "http://www.cdc.gov/hiv/");
    }

    #[test]
    fn preserves_referer_byte_exact() {
        let doc = r#"{
          "log": {
            "version": "1.2",
            "pages": [{"id": "p1", "startedDateTime": "2014-04-01T00:00:00Z", "title": "", "pageTimings": {}}],
            "entries": [
              {
                "pageref": "p1",
                "startedDateTime": "2014-04-01T00:00:01Z",
                "request": {
                  "method": "GET",
                  "url": "http://www.google-analytics.com/ga.js",
                  "headers": [
                    {"name": "Referer", "value": "http://www.cdc.gov/hiv/"},
                    {"name": "User-Agent", "value": "Mozilla/5.0 (Macintosh)"}
                  ]
                },
                "response": {"status": 200, "headers": [], "content": {"mimeType": "application/javascript"}}
              }
            ]
          }
        }"#;
        let results = ingest_har(doc).unwrap();
        let request = &results[0].requests[0];
        assert_eq!(request.referer.as_deref(), Some("http://www.cdc.gov/hiv/"));
        assert_eq!(request.user_agent.as_deref(), Some("Mozilla/5.0 (Macintosh)"));
    }

    #[test]
    fn truncated_document_is_schema_error() {
        let err = ingest_har("{\"log\": {\"entr").unwrap_err();
        assert!(matches!(err, CaptureError::Schema(_)));
        let err = ingest_har("{}").unwrap_err();
        assert!(matches!(err, CaptureError::Schema(_)));
    }

    #[test]
    fn page_without_entries_is_empty_error() {
        let doc = r#"{
          "log": {
            "version": "1.2",
            "pages": [{"id": "p1", "startedDateTime": "2014-04-01T00:00:00Z", "title": "http://dead.com/", "pageTimings": {}}],
            "entries": []
          }
        }"#;
        let results = ingest_har(doc).unwrap();
        assert_eq!(results[0].status, LoadStatus::Error("empty".into()));
        assert_eq!(results[0].requested_uri, "http://dead.com/");
    }

    #[test]
    fn extracts_header_cookies_with_default_domain() {
        let doc = r#"{
          "log": {
            "version": "1.2",
            "pages": [{"id": "p1", "startedDateTime": "2014-04-01T00:00:00Z", "title": "", "pageTimings": {}}],
            "entries": [
              {
                "pageref": "p1",
                "startedDateTime": "2014-04-01T00:00:01Z",
                "request": {"method": "GET", "url": "http://tracker.example.net/b", "headers": []},
                "response": {
                  "status": 200,
                  "headers": [{"name": "Set-Cookie", "value": "uid=1; Domain=.example.net; Path=/"},
                              {"name": "Set-Cookie", "value": "local=2"}],
                  "content": {"mimeType": "image/gif"}
                }
              }
            ]
          }
        }"#;
        let results = ingest_har(doc).unwrap();
        let cookies = &results[0].cookies;
        assert_eq!(cookies.len(), 2);
        assert_eq!(cookies[0].domain_attribute, "example.net");
        assert!(cookies[0].host_wide);
        assert_eq!(cookies[0].source, CookieSource::Header);
        assert_eq!(cookies[1].domain_attribute, "tracker.example.net");
    }

    #[test]
    fn follows_redirect_chain_for_final_uri() {
        let doc = r#"{
          "log": {
            "version": "1.2",
            "pages": [{"id": "p1", "startedDateTime": "2014-04-01T00:00:00Z", "title": "", "pageTimings": {}}],
            "entries": [
              {
                "pageref": "p1",
                "startedDateTime": "2014-04-01T00:00:01Z",
                "request": {"method": "GET", "url": "http://old.com/", "headers": []},
                "response": {"status": 301, "headers": [], "content": {"mimeType": ""}, "redirectURL": "http://new.com/home"}
              },
              {
                "pageref": "p1",
                "startedDateTime": "2014-04-01T00:00:02Z",
                "request": {"method": "GET", "url": "http://new.com/home", "headers": []},
                "response": {"status": 200, "headers": [], "content": {"mimeType": "text/html"}}
              }
            ]
          }
        }"#;
        let results = ingest_har(doc).unwrap();
        assert_eq!(results[0].requested_uri, "http://old.com/");
        assert_eq!(results[0].final_uri, "http://new.com/home");
    }

    #[test]
    fn har_without_pages_is_single_page() {
        let doc = r#"{
          "log": {
            "version": "1.2",
            "entries": [
              {
                "startedDateTime": "2014-04-01T00:00:01Z",
                "request": {"method": "GET", "url": "http://solo.com/", "headers": []},
                "response": {"status": 200, "headers": [], "content": {"mimeType": "text/html"}}
              }
            ]
          }
        }"#;
        let results = ingest_har(doc).unwrap();
        assert_eq!(results.len(), 1);
        assert_eq!(results[0].requested_uri, "http://solo.com/");
    }

    #[test]
    fn round_trips_through_write_har() {
        let base = Utc.with_ymd_and_hms(2014, 4, 1, 0, 0, 0).unwrap();
        let original = PageLoadResult {
            requested_uri: "http://old.com/".into(),
            final_uri: "http://new.com/home".into(),
            status: LoadStatus::Timeout,
            started_at: base,
            settle_seconds: 30,
            requests: vec![CapturedRequest {
                uri: "http://old.com/".into(),
                method: "GET".into(),
                referer: None,
                user_agent: Some("probe/1.0".into()),
                response_status: Some(200),
                content_type: Some("text/html".into()),
                timestamp: base + chrono::Duration::seconds(1),
            }],
            cookies: vec![CapturedCookie {
                name: "uid".into(),
                domain_attribute: "old.com".into(),
                host_wide: true,
                source: CookieSource::Unknown,
                timestamp: base + chrono::Duration::seconds(2),
            }],
        };
        let text = write_har(std::slice::from_ref(&original), "webcensus-test");
        let back = ingest_har(&text).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0], original);
    }
}
