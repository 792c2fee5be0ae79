//! Live page capture through an external headless browser.
//!
//! Talks the remote-debugging wire protocol over a WebSocket to a browser
//! started with `--remote-debugging-port`. Only three capabilities are
//! used: navigation, network-event subscription, and cookie enumeration.
//! Every page gets a fresh, isolated browser context, so no cookies or
//! cache carry over between captures.

use chrono::{DateTime, TimeZone, Utc};
use serde_json::{json, Value};
use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::TcpStream;
use std::time::{Duration, Instant};
use tungstenite::{client::client, Message, WebSocket};

use super::{
    CaptureError, CapturedCookie, CapturedRequest, CookieSource, LoadStatus, PageListEntry,
    PageLoadResult,
};

/// Settings for one live capture job.
#[derive(Debug, Clone)]
pub struct CaptureSettings {
    /// Remote-debugging endpoint, `host:port`.
    pub endpoint: String,
    /// Seconds to keep observing after navigation so redirects and deferred
    /// content finish loading.
    pub settle_seconds: u32,
    /// Hard ceiling wrapping the settle window; exceeding it yields a
    /// Timeout result with partial data retained.
    pub hard_timeout_seconds: u32,
}

impl CaptureSettings {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self { endpoint: endpoint.into(), settle_seconds: 30, hard_timeout_seconds: 60 }
    }
}

const READ_TICK: Duration = Duration::from_millis(200);

/// Plain HTTP GET against the debugging endpoint (no TLS; the endpoint is
/// loopback-local by convention).
fn http_get(endpoint: &str, path: &str) -> Result<String, CaptureError> {
    let mut stream = TcpStream::connect(endpoint)
        .map_err(|e| CaptureError::Endpoint(format!("{endpoint}: {e}")))?;
    stream
        .set_read_timeout(Some(Duration::from_secs(5)))
        .map_err(|e| CaptureError::Endpoint(e.to_string()))?;
    let request = format!("GET {path} HTTP/1.1\r\nHost: {endpoint}\r\nConnection: close\r\n\r\n");
    stream
        .write_all(request.as_bytes())
        .map_err(|e| CaptureError::Endpoint(format!("{endpoint}: {e}")))?;
    let mut raw = Vec::new();
    stream
        .read_to_end(&mut raw)
        .map_err(|e| CaptureError::Endpoint(format!("{endpoint}: {e}")))?;
    let text = String::from_utf8_lossy(&raw);
    match text.split_once("\r\n\r\n") {
        Some((_, body)) => Ok(body.to_string()),
        None => Err(CaptureError::Endpoint(format!("{endpoint}: malformed http response"))),
    }
}

struct CdpConnection {
    socket: WebSocket<TcpStream>,
    next_id: u64,
    pending_events: Vec<Value>,
}

impl CdpConnection {
    fn connect(endpoint: &str) -> Result<Self, CaptureError> {
        let body = http_get(endpoint, "/json/version")?;
        let info: Value = serde_json::from_str(body.trim())
            .map_err(|e| CaptureError::Endpoint(format!("bad /json/version body: {e}")))?;
        let ws_url = info
            .get("webSocketDebuggerUrl")
            .and_then(Value::as_str)
            .ok_or_else(|| CaptureError::Endpoint("no webSocketDebuggerUrl advertised".into()))?;
        // The advertised URL may name a host we did not dial; keep the path
        // but connect to the configured endpoint.
        let path = ws_url.splitn(4, '/').nth(3).map(|p| format!("/{p}")).unwrap_or_default();
        let url = format!("ws://{endpoint}{path}");

        let stream = TcpStream::connect(endpoint)
            .map_err(|e| CaptureError::Endpoint(format!("{endpoint}: {e}")))?;
        let (socket, _) =
            client(&url, stream).map_err(|e| CaptureError::Endpoint(format!("ws handshake: {e}")))?;
        socket
            .get_ref()
            .set_read_timeout(Some(READ_TICK))
            .map_err(|e| CaptureError::Endpoint(e.to_string()))?;
        Ok(Self { socket, next_id: 1, pending_events: Vec::new() })
    }

    /// Issue a command and block until its response arrives; events received
    /// meanwhile are queued for the caller.
    fn call(
        &mut self,
        method: &str,
        params: Value,
        session_id: Option<&str>,
        deadline: Instant,
    ) -> Result<Value, CaptureError> {
        let id = self.next_id;
        self.next_id += 1;
        let mut message = json!({"id": id, "method": method, "params": params});
        if let Some(session) = session_id {
            message["sessionId"] = Value::String(session.to_string());
        }
        self.socket
            .send(Message::Text(message.to_string()))
            .map_err(|e| CaptureError::Endpoint(format!("ws send: {e}")))?;
        loop {
            if Instant::now() > deadline {
                return Err(CaptureError::Endpoint(format!("{method}: response deadline exceeded")));
            }
            match self.poll()? {
                Some(msg) if msg.get("id").and_then(Value::as_u64) == Some(id) => {
                    if let Some(err) = msg.get("error") {
                        return Err(CaptureError::Endpoint(format!("{method}: {err}")));
                    }
                    return Ok(msg.get("result").cloned().unwrap_or(Value::Null));
                }
                Some(msg) if msg.get("method").is_some() => self.pending_events.push(msg),
                _ => {}
            }
        }
    }

    /// Read one frame if available within the read tick.
    fn poll(&mut self) -> Result<Option<Value>, CaptureError> {
        match self.socket.read() {
            Ok(Message::Text(text)) => Ok(serde_json::from_str(&text).ok()),
            Ok(_) => Ok(None),
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) =>
            {
                Ok(None)
            }
            Err(e) => Err(CaptureError::Endpoint(format!("ws read: {e}"))),
        }
    }

    fn next_event(&mut self) -> Result<Option<Value>, CaptureError> {
        if !self.pending_events.is_empty() {
            return Ok(Some(self.pending_events.remove(0)));
        }
        Ok(self.poll()?.filter(|msg| msg.get("method").is_some()))
    }
}

fn wall_time_to_utc(seconds: f64, fallback: DateTime<Utc>) -> DateTime<Utc> {
    if !seconds.is_finite() || seconds <= 0.0 {
        return fallback;
    }
    Utc.timestamp_millis_opt((seconds * 1000.0) as i64).single().unwrap_or(fallback)
}

/// Capture one page through the remote-debugging endpoint.
///
/// Page-level failures (timeout, DNS, navigation errors) come back as a
/// [`PageLoadResult`] with the corresponding status and any partial data;
/// only an unreachable or broken endpoint is an `Err`.
pub fn capture_live(entry: &PageListEntry, settings: &CaptureSettings) -> Result<PageLoadResult, CaptureError> {
    let mut cdp = CdpConnection::connect(&settings.endpoint)?;
    let command_deadline = Instant::now() + Duration::from_secs(u64::from(settings.hard_timeout_seconds).max(10));

    let context = cdp.call("Target.createBrowserContext", json!({}), None, command_deadline)?;
    let context_id = context
        .get("browserContextId")
        .and_then(Value::as_str)
        .ok_or_else(|| CaptureError::Endpoint("no browserContextId".into()))?
        .to_string();

    let capture = run_in_context(&mut cdp, entry, settings, &context_id);

    // Context disposal closes the tab and discards all its state.
    let _ = cdp.call("Target.disposeBrowserContext", json!({"browserContextId": context_id}), None, Instant::now() + Duration::from_secs(5));
    capture
}

fn run_in_context(
    cdp: &mut CdpConnection,
    entry: &PageListEntry,
    settings: &CaptureSettings,
    context_id: &str,
) -> Result<PageLoadResult, CaptureError> {
    let started_at = Utc::now();
    let start = Instant::now();
    let settle_deadline = start + Duration::from_secs(u64::from(settings.settle_seconds));
    let hard_deadline = start + Duration::from_secs(u64::from(settings.hard_timeout_seconds));

    let target = cdp.call(
        "Target.createTarget",
        json!({"url": "about:blank", "browserContextId": context_id}),
        None,
        hard_deadline.min(Instant::now() + Duration::from_secs(10)),
    )?;
    let target_id = target
        .get("targetId")
        .and_then(Value::as_str)
        .ok_or_else(|| CaptureError::Endpoint("no targetId".into()))?
        .to_string();
    let attach = cdp.call(
        "Target.attachToTarget",
        json!({"targetId": target_id, "flatten": true}),
        None,
        hard_deadline,
    )?;
    let session_id = attach
        .get("sessionId")
        .and_then(Value::as_str)
        .ok_or_else(|| CaptureError::Endpoint("no sessionId".into()))?
        .to_string();

    cdp.call("Network.enable", json!({}), Some(&session_id), hard_deadline)?;
    cdp.call("Page.enable", json!({}), Some(&session_id), hard_deadline)?;

    let mut requests: Vec<CapturedRequest> = Vec::new();
    let mut request_index: HashMap<String, usize> = HashMap::new();
    let mut final_uri = entry.normalized_uri.clone();
    let mut status = LoadStatus::Loaded;

    let navigate = cdp.call(
        "Page.navigate",
        json!({"url": entry.normalized_uri}),
        Some(&session_id),
        hard_deadline,
    );
    match navigate {
        Ok(result) => {
            if let Some(error_text) = result.get("errorText").and_then(Value::as_str) {
                if !error_text.is_empty() {
                    status = if error_text.contains("NAME_NOT_RESOLVED") {
                        LoadStatus::Error("dns".into())
                    } else {
                        LoadStatus::Error(error_text.to_string())
                    };
                }
            }
        }
        Err(_) if Instant::now() >= hard_deadline => status = LoadStatus::Timeout,
        Err(e) => return Err(e),
    }

    // Observe network events until the settle deadline.
    while Instant::now() < settle_deadline {
        if Instant::now() >= hard_deadline {
            status = LoadStatus::Timeout;
            break;
        }
        let Some(event) = cdp.next_event()? else { continue };
        let method = event.get("method").and_then(Value::as_str).unwrap_or("");
        let params = event.get("params").cloned().unwrap_or(Value::Null);
        match method {
            "Network.requestWillBeSent" => {
                let request = &params["request"];
                let url = request["url"].as_str().unwrap_or("").to_string();
                if url.is_empty() || url.starts_with("about:") || url.starts_with("data:") {
                    continue;
                }
                let headers = &request["headers"];
                let wall = params["wallTime"].as_f64().unwrap_or(0.0);
                let timestamp = wall_time_to_utc(wall, started_at).max(started_at);
                let captured = CapturedRequest {
                    uri: url,
                    method: request["method"].as_str().unwrap_or("GET").to_string(),
                    referer: header_value(headers, "Referer"),
                    user_agent: header_value(headers, "User-Agent"),
                    response_status: None,
                    content_type: None,
                    timestamp,
                };
                if let Some(id) = params["requestId"].as_str() {
                    request_index.insert(id.to_string(), requests.len());
                }
                requests.push(captured);
            }
            "Network.responseReceived" => {
                if let Some(idx) = params["requestId"].as_str().and_then(|id| request_index.get(id)) {
                    let response = &params["response"];
                    if let Some(code) = response["status"].as_u64() {
                        requests[*idx].response_status = Some(code as u16);
                    }
                    if let Some(mime) = response["mimeType"].as_str() {
                        if !mime.is_empty() {
                            requests[*idx].content_type = Some(mime.to_string());
                        }
                    }
                }
            }
            "Page.frameNavigated" => {
                let frame = &params["frame"];
                if frame.get("parentId").and_then(Value::as_str).is_none() {
                    if let Some(url) = frame["url"].as_str() {
                        if !url.is_empty() && !url.starts_with("about:") {
                            final_uri = url.to_string();
                        }
                    }
                }
            }
            _ => {}
        }
    }

    // Cookie enumeration for the isolated context.
    let mut cookies = Vec::new();
    let cookie_deadline = Instant::now() + Duration::from_secs(5);
    if let Ok(result) = cdp.call(
        "Storage.getCookies",
        json!({"browserContextId": context_id}),
        None,
        cookie_deadline,
    ) {
        let now = Utc::now();
        for cookie in result.get("cookies").and_then(Value::as_array).into_iter().flatten() {
            let name = cookie["name"].as_str().unwrap_or("").to_string();
            let raw_domain = cookie["domain"].as_str().unwrap_or("").to_ascii_lowercase();
            if name.is_empty() || raw_domain.is_empty() {
                continue;
            }
            let (domain_attribute, host_wide) = match raw_domain.strip_prefix('.') {
                Some(stripped) => (stripped.to_string(), true),
                None => (raw_domain, false),
            };
            cookies.push(CapturedCookie {
                name,
                domain_attribute,
                host_wide,
                source: CookieSource::Unknown,
                timestamp: now,
            });
        }
    }

    let _ = cdp.call(
        "Target.closeTarget",
        json!({"targetId": target_id}),
        None,
        Instant::now() + Duration::from_secs(5),
    );

    Ok(PageLoadResult {
        requested_uri: entry.normalized_uri.clone(),
        final_uri,
        status,
        started_at,
        settle_seconds: settings.settle_seconds,
        requests,
        cookies,
    })
}

fn header_value(headers: &Value, name: &str) -> Option<String> {
    headers.as_object()?.iter().find_map(|(key, value)| {
        if key.eq_ignore_ascii_case(name) {
            value.as_str().map(str::to_string)
        } else {
            None
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unreachable_endpoint_is_endpoint_error() {
        // Port 9 (discard) is assumed closed in test environments.
        let entry = PageListEntry {
            normalized_uri: "http://example.com/".into(),
            source_term: "flu".into(),
            rank: 1,
            provenance: "test".into(),
        };
        let settings = CaptureSettings::new("127.0.0.1:9");
        match capture_live(&entry, &settings) {
            Err(CaptureError::Endpoint(_)) => {}
            other => panic!("expected endpoint error, got {other:?}"),
        }
    }

    #[test]
    fn wall_time_conversion_clamps_bad_input() {
        let fallback = Utc::now();
        assert_eq!(wall_time_to_utc(0.0, fallback), fallback);
        assert_eq!(wall_time_to_utc(f64::NAN, fallback), fallback);
        let converted = wall_time_to_utc(1_396_310_400.5, fallback);
        assert_eq!(converted.timestamp(), 1_396_310_400);
    }
}
