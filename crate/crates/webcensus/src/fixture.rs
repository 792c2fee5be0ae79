//! Synthetic census corpus generator.
//!
//! Emits a fully deterministic corpus of HAR files whose ground truth is
//! known by construction: per-category third-party prevalence, owner
//! reach, the top-element class histogram, and the HTTPS share are all
//! fixed by the page plan below. Live-web figures are not reproducible, so
//! exactness testing runs against this corpus instead.
//!
//! Construction outline:
//! - 10,000 loaded pages split over com/org/gov/edu/other hosts, plus 12
//!   deliberately failed pages (timeout, dns, empty) for the failure table.
//! - Within each category, flag targets are prefixes: the first `req`
//!   pages make a third-party request, the first `js` of those load a
//!   third-party script, the first `cookie` receive a third-party cookie.
//! - Owner reach is nested by global request index: the page with request
//!   index r hosts exactly the owners whose target exceeds r, so each
//!   owner's distinct-page count equals its target.
//! - Exactly 100 distinct third-party elements exist (12 owner beacons,
//!   33 scripts, 55 fillers), so the top-100 cut is exact and the class
//!   histogram is 47/33/8/4/8 by construction.
//! - 324 of the 10,000 pages are served over https (3.24%).

use chrono::{Duration, SecondsFormat, TimeZone, Utc};
use serde_json::{json, Value};
use std::io;
use std::path::{Path, PathBuf};

/// Loaded-page count of the generated corpus.
pub const LOADED_PAGES: usize = 10_000;
/// Deliberately failed pages appended after the loaded ones.
pub const FAILED_PAGES: usize = 12;
/// Pages per generated HAR file.
pub const PAGES_PER_FILE: usize = 100;
/// Pages served over https: 324 of 10,000 = 3.24%.
pub const HTTPS_PAGES: usize = 324;

/// Per-category page plan: count plus flag prefixes.
#[derive(Debug, Clone, Copy)]
pub struct CategoryPlan {
    pub label: &'static str,
    pub count: usize,
    pub req: usize,
    pub js: usize,
    pub cookie: usize,
}

/// The five-category plan. Overall: 9,100 / 8,600 / 7,100 of 10,000
/// (91 / 86 / 71 percent); category rows follow the same arithmetic.
pub const CATEGORIES: [CategoryPlan; 5] = [
    CategoryPlan { label: "com", count: 5000, req: 4650, js: 4550, cookie: 4100 },
    CategoryPlan { label: "org", count: 1500, req: 1425, js: 1320, cookie: 1125 },
    CategoryPlan { label: "gov", count: 1000, req: 810, js: 740, cookie: 210 },
    CategoryPlan { label: "edu", count: 1000, req: 760, js: 730, cookie: 450 },
    CategoryPlan { label: "other", count: 1500, req: 1455, js: 1260, cookie: 1215 },
];

/// Owner beacons: element URI, its registrable domain in the bundled
/// ownership db, and the distinct-page target. All extensionless so owner
/// requests never influence the script flag.
pub const OWNER_ELEMENTS: [(&str, &str, usize); 12] = [
    ("http://www.google-analytics.com/collect", "google-analytics.com", 7800),
    ("http://sb.scorecardresearch.com/b", "scorecardresearch.com", 3800),
    ("http://www.facebook.com/tr", "facebook.com", 3100),
    ("http://ib.adnxs.com/tt", "adnxs.com", 2200),
    ("http://s7.addthis.com/live/red", "addthis.com", 1800),
    ("http://platform.twitter.com/widgets", "twitter.com", 1800),
    ("http://pixel.quantserve.com/pixel", "quantserve.com", 1600),
    ("http://aax.amazon-adsystem.com/bid", "amazon-adsystem.com", 1600),
    ("http://metrics.omtrdc.net/b/ss", "omtrdc.net", 1100),
    ("http://ads.yahoo.com/pixel", "yahoo.com", 1100),
    ("http://match.experian.com/sync", "experian.com", 500),
    ("http://id.rlcdn.com/365868", "rlcdn.com", 300),
];

pub const JS_POOL_SIZE: usize = 33;
pub const FILLER_POOL_SIZE: usize = 55;

const IMAGE_FILES: [&str; 8] = [
    "pixel.gif", "pixel.png", "pixel.jpg", "pixel.jpeg", "pixel.webp", "pixel.svg", "pixel.ico",
    "pixel.bmp",
];
const IMAGE_TYPES: [&str; 8] =
    ["image/gif", "image/png", "image/jpeg", "image/jpeg", "image/webp", "image/svg+xml", "image/x-icon", "image/bmp"];
const DYNAMIC_FILES: [&str; 4] = ["track.php", "count.asp", "hit.cgi", "view.jsp"];
const OTHER_FILES: [&str; 8] = [
    "style.css", "font.woff", "data.json", "feed.xml", "player.swf", "font.ttf", "map.kml",
    "clip.mp4",
];
const OTHER_TYPES: [&str; 8] = [
    "text/css",
    "font/woff",
    "application/json",
    "application/xml",
    "application/x-shockwave-flash",
    "font/ttf",
    "application/vnd.google-earth.kml+xml",
    "video/mp4",
];

/// Seven in ten page paths name a condition from the bundled lexicon; the
/// rest use a neutral identifier path.
const SENSITIVE_TERMS: [&str; 10] = [
    "hiv", "cancer", "diabetes", "asthma", "depression", "breast-lump", "heart-disease",
    "arthritis", "migraine", "eczema",
];

const FIXTURE_AGENT: &str = "Mozilla/5.0 (webcensus fixture)";

/// What the generator wrote.
#[derive(Debug, Clone)]
pub struct CorpusManifest {
    pub pages_loaded: usize,
    pub pages_failed: usize,
    pub har_files: Vec<PathBuf>,
    pub requests: usize,
}

fn category_of(page: usize) -> (usize, usize) {
    let mut start = 0;
    for (idx, plan) in CATEGORIES.iter().enumerate() {
        if page < start + plan.count {
            return (idx, page - start);
        }
        start += plan.count;
    }
    unreachable!("page index {page} out of plan");
}

fn req_index_base(category: usize) -> usize {
    CATEGORIES[..category].iter().map(|p| p.req).sum()
}

fn js_index_base(category: usize) -> usize {
    CATEGORIES[..category].iter().map(|p| p.js).sum()
}

fn host_for(page: usize, category: usize) -> String {
    match CATEGORIES[category].label {
        "com" => format!("www.site{page}.com"),
        "org" => format!("www.site{page}.org"),
        "gov" => format!("www.site{page}.gov"),
        "edu" => format!("www.site{page}.edu"),
        _ => {
            if page.is_multiple_of(2) {
                format!("www.site{page}.co.uk")
            } else {
                format!("www.site{page}.net")
            }
        }
    }
}

fn path_for(page: usize) -> String {
    if page % 10 < 7 {
        format!("/conditions/{}/", SENSITIVE_TERMS[(page / 10) % SENSITIVE_TERMS.len()])
    } else {
        format!("/pubmed/21{page:06}")
    }
}

fn filler_element(index: usize) -> (String, &'static str) {
    match index {
        0..=34 => (format!("http://b.fillpoint{index:02}.net/probe"), "text/plain"),
        35..=42 => {
            let i = index - 35;
            (format!("http://img.adgrid{i}.net/{}", IMAGE_FILES[i]), IMAGE_TYPES[i])
        }
        43..=46 => {
            let i = index - 43;
            (format!("http://srv.adserve{i}.net/{}", DYNAMIC_FILES[i]), "text/html")
        }
        47..=54 => {
            let i = index - 47;
            (format!("http://cdn.assets{i}.net/{}", OTHER_FILES[i]), OTHER_TYPES[i])
        }
        _ => unreachable!("filler index {index} out of pool"),
    }
}

fn js_element(index: usize) -> String {
    format!("http://static.tagcdn{index:02}.net/tracker.js")
}

struct EntryBuilder {
    page_id: String,
    page_uri: String,
    entries: Vec<Value>,
    base_ts: chrono::DateTime<chrono::Utc>,
}

impl EntryBuilder {
    fn push(&mut self, uri: &str, content_type: &str, referer: bool, set_cookie: Option<String>) {
        let ts = self.base_ts + Duration::milliseconds(100 * (self.entries.len() as i64 + 1));
        let mut request_headers = vec![json!({"name": "User-Agent", "value": FIXTURE_AGENT})];
        if referer {
            request_headers.push(json!({"name": "Referer", "value": self.page_uri}));
        }
        let mut response_headers = vec![json!({"name": "Content-Type", "value": content_type})];
        if let Some(cookie) = set_cookie {
            response_headers.push(json!({"name": "Set-Cookie", "value": cookie}));
        }
        self.entries.push(json!({
            "pageref": self.page_id,
            "startedDateTime": ts.to_rfc3339_opts(SecondsFormat::Millis, true),
            "time": 1.0,
            "request": {"method": "GET", "url": uri, "headers": request_headers},
            "response": {
                "status": 200,
                "headers": response_headers,
                "content": {"mimeType": content_type}
            }
        }));
    }
}

/// Generate the corpus into `dir` as `batch_NNN.har` files.
pub fn generate_census_corpus(dir: &Path) -> io::Result<CorpusManifest> {
    std::fs::create_dir_all(dir)?;
    let base = Utc.with_ymd_and_hms(2014, 4, 1, 0, 0, 0).unwrap();

    let mut har_files = Vec::new();
    let mut total_requests = 0usize;
    let total_pages = LOADED_PAGES + FAILED_PAGES;
    let mut batch_pages: Vec<Value> = Vec::new();
    let mut batch_entries: Vec<Value> = Vec::new();
    let mut batch_index = 0usize;

    for page in 0..total_pages {
        let page_id = format!("page_{page:05}");
        let started = base + Duration::seconds(page as i64);
        let started_text = started.to_rfc3339_opts(SecondsFormat::Millis, true);

        if page >= LOADED_PAGES {
            // Failure pages: 5 timeouts with a partial document request,
            // 4 DNS errors, 3 empty captures.
            let failure = page - LOADED_PAGES;
            let uri = format!("http://www.failsite{failure}.com/conditions/flu/");
            let mut page_object = json!({
                "id": page_id,
                "startedDateTime": started_text,
                "title": uri,
                "pageTimings": {}
            });
            if failure < 5 {
                page_object["_webcensusStatus"] = Value::String("timeout".into());
                batch_entries.push(json!({
                    "pageref": page_id,
                    "startedDateTime": started_text,
                    "time": 0.0,
                    "request": {"method": "GET", "url": uri,
                                 "headers": [{"name": "User-Agent", "value": FIXTURE_AGENT}]},
                    "response": {"status": 0, "headers": [], "content": {"mimeType": ""}}
                }));
                total_requests += 1;
            } else if failure < 9 {
                page_object["_webcensusStatus"] = Value::String("error:dns".into());
            }
            batch_pages.push(page_object);
        } else {
            let (category, local) = category_of(page);
            let plan = CATEGORIES[category];
            let host = host_for(page, category);
            let scheme = if page < HTTPS_PAGES { "https" } else { "http" };
            let page_uri = format!("{scheme}://{host}{}", path_for(page));

            let has_req = local < plan.req;
            let has_js = local < plan.js;
            let has_cookie = local < plan.cookie;

            batch_pages.push(json!({
                "id": page_id,
                "startedDateTime": started_text,
                "title": page_uri,
                "pageTimings": {}
            }));

            let mut builder = EntryBuilder {
                page_id: page_id.clone(),
                page_uri: page_uri.clone(),
                entries: Vec::new(),
                base_ts: started,
            };

            // Document plus a first-party asset; the document sets a
            // first-party session cookie on every page.
            builder.push(&page_uri, "text/html", false, Some(format!("session=s{page}; Path=/")));
            builder.push(&format!("{scheme}://{host}/assets/logo.png"), "image/png", true, None);

            if has_req {
                let req_index = req_index_base(category) + local;
                let owners: Vec<&(&str, &str, usize)> =
                    OWNER_ELEMENTS.iter().filter(|(_, _, target)| req_index < *target).collect();

                // The first third-party response sets the third-party
                // cookie on cookie-flagged pages.
                let mut cookie_pending = has_cookie;
                for (uri, domain, _) in &owners {
                    let set_cookie = if cookie_pending {
                        cookie_pending = false;
                        Some(format!("uid{page}=x; Domain=.{domain}; Path=/"))
                    } else {
                        None
                    };
                    builder.push(uri, "image/gif", true, set_cookie);
                }

                let (filler_uri, filler_type) = filler_element(req_index % FILLER_POOL_SIZE);
                let set_cookie = if cookie_pending {
                    let host = crate::uri::parse_uri(&filler_uri).expect("filler uri parses").host;
                    let (_, domain) = host.split_once('.').expect("filler host has a parent domain");
                    Some(format!("uid{page}=x; Domain=.{domain}; Path=/"))
                } else {
                    None
                };
                builder.push(&filler_uri, filler_type, true, set_cookie);

                if has_js {
                    let js_index = js_index_base(category) + local;
                    builder.push(&js_element(js_index % JS_POOL_SIZE), "application/javascript", true, None);
                }
            }

            total_requests += builder.entries.len();
            batch_entries.extend(builder.entries);
        }

        let last_page = page + 1 == total_pages;
        if (page + 1) % PAGES_PER_FILE == 0 || last_page {
            let har = json!({
                "log": {
                    "version": "1.2",
                    "creator": {"name": "webcensus-fixture", "version": env!("CARGO_PKG_VERSION")},
                    "pages": std::mem::take(&mut batch_pages),
                    "entries": std::mem::take(&mut batch_entries)
                }
            });
            let path = dir.join(format!("batch_{batch_index:03}.har"));
            std::fs::write(&path, serde_json::to_string(&har)?)?;
            har_files.push(path);
            batch_index += 1;
        }
    }

    Ok(CorpusManifest {
        pages_loaded: LOADED_PAGES,
        pages_failed: FAILED_PAGES,
        har_files,
        requests: total_requests,
    })
}

/// A small inline corpus for examples and quick demos: a handful of pages
/// with a known mix of trackers. Returns HAR text.
pub fn demo_har() -> String {
    let base = Utc.with_ymd_and_hms(2014, 4, 1, 0, 0, 0).unwrap();
    let mut pages = Vec::new();
    let mut entries = Vec::new();
    let specs: [(&str, &[(&str, &str)]); 3] = [
        (
            "http://www.cdc.gov/hiv/",
            &[
                ("http://www.google-analytics.com/ga.js", "application/javascript"),
                ("http://www.google-analytics.com/__utm.gif?utmac=UA-1", "image/gif"),
                ("http://www.facebook.com/plugins/like.php?href=x", "text/html"),
            ],
        ),
        (
            "http://www.nhs.uk/conditions/breast-lump/",
            &[("http://sb.scorecardresearch.com/b?c1=2", "image/gif")],
        ),
        ("http://www.ncbi.nlm.nih.gov/pubmed/21722252", &[]),
    ];
    for (idx, (page_uri, extras)) in specs.iter().enumerate() {
        let page_id = format!("page_{idx}");
        let started = base + Duration::seconds(idx as i64);
        pages.push(json!({
            "id": page_id,
            "startedDateTime": started.to_rfc3339_opts(SecondsFormat::Millis, true),
            "title": page_uri,
            "pageTimings": {}
        }));
        let mut builder = EntryBuilder {
            page_id,
            page_uri: page_uri.to_string(),
            entries: Vec::new(),
            base_ts: started,
        };
        builder.push(page_uri, "text/html", false, None);
        for (uri, content_type) in *extras {
            builder.push(uri, content_type, true, None);
        }
        entries.extend(builder.entries);
    }
    serde_json::to_string_pretty(&json!({
        "log": {"version": "1.2", "creator": {"name": "webcensus-demo", "version": "0"},
                 "pages": pages, "entries": entries}
    }))
    .expect("demo har serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_totals_match_paper_arithmetic() {
        let count: usize = CATEGORIES.iter().map(|p| p.count).sum();
        let req: usize = CATEGORIES.iter().map(|p| p.req).sum();
        let js: usize = CATEGORIES.iter().map(|p| p.js).sum();
        let cookie: usize = CATEGORIES.iter().map(|p| p.cookie).sum();
        assert_eq!(count, LOADED_PAGES);
        assert_eq!(req * 100 / count, 91);
        assert_eq!(js * 100 / count, 86);
        assert_eq!(cookie * 100 / count, 71);
        for plan in CATEGORIES {
            assert!(plan.js <= plan.req, "{}: script pages exceed request pages", plan.label);
            assert!(plan.cookie <= plan.js, "{}: cookie pages exceed script pages", plan.label);
            assert_eq!(plan.req * 100 % plan.count, 0, "{}: request pct not integral", plan.label);
            assert_eq!(plan.js * 100 % plan.count, 0, "{}: js pct not integral", plan.label);
            assert_eq!(plan.cookie * 100 % plan.count, 0, "{}: cookie pct not integral", plan.label);
        }
    }

    #[test]
    fn element_inventory_is_exactly_one_hundred() {
        assert_eq!(OWNER_ELEMENTS.len() + JS_POOL_SIZE + FILLER_POOL_SIZE, 100);
        // 12 owner beacons + 35 extensionless fillers = 47 NoExtension.
        let noext_fillers = (0..FILLER_POOL_SIZE)
            .filter(|&f| matches!(f, 0..=34))
            .count();
        assert_eq!(OWNER_ELEMENTS.len() + noext_fillers, 47);
    }

    #[test]
    fn owner_targets_fit_request_population() {
        let req_total: usize = CATEGORIES.iter().map(|p| p.req).sum();
        for (uri, domain, target) in OWNER_ELEMENTS {
            assert!(target <= req_total, "{uri}: target exceeds request pages");
            assert!(uri.contains(domain), "{uri}: domain {domain} not in element host");
        }
    }

    #[test]
    fn sensitive_terms_are_in_bundled_lexicon() {
        let lexicon = crate::leakage::Lexicon::bundled();
        for term in SENSITIVE_TERMS {
            let normalized = term.replace('-', " ");
            assert!(lexicon.contains(&normalized), "{normalized:?} missing from lexicon");
        }
    }

    #[test]
    fn generates_parsable_batches() {
        let dir = std::env::temp_dir().join(format!("webcensus-fixture-smoke-{}", std::process::id()));
        std::fs::remove_dir_all(&dir).ok();
        let manifest = generate_census_corpus(&dir).unwrap();
        assert_eq!(manifest.har_files.len(), (LOADED_PAGES + FAILED_PAGES).div_ceil(PAGES_PER_FILE));

        let first = std::fs::read_to_string(&manifest.har_files[0]).unwrap();
        let results = crate::capture::har::ingest_har(&first).unwrap();
        assert_eq!(results.len(), PAGES_PER_FILE);
        // Page 0: com, https, all flags set, all twelve owners present.
        let first_page = &results[0];
        assert!(first_page.final_uri.starts_with("https://www.site0.com/"));
        assert_eq!(first_page.requests.len(), 2 + 12 + 1 + 1);

        let last = std::fs::read_to_string(manifest.har_files.last().unwrap()).unwrap();
        let failures = crate::capture::har::ingest_har(&last).unwrap();
        assert_eq!(failures.len(), FAILED_PAGES);
        assert!(matches!(failures[0].status, crate::capture::LoadStatus::Timeout));
        assert!(matches!(failures[11].status, crate::capture::LoadStatus::Error(ref r) if r == "empty"));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn demo_har_ingests() {
        let results = crate::capture::har::ingest_har(&demo_har()).unwrap();
        assert_eq!(results.len(), 3);
    }
}
