//! Corporate ownership attribution.
//!
//! Seemingly unrelated domains (`2mdn.net`, `fbcdn.net`) funnel traffic to
//! a small set of corporations. A versioned, human-curated database maps
//! third-party registrable domains to named owners with revenue-model tags;
//! resolution is exact-match only, which works because lookup keys are
//! already registrable domains; subdomains collapse before lookup.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use thiserror::Error;

use crate::census::CensusRecord;
use crate::psl::RegistrableDomain;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OwnershipError {
    #[error("domain {domain} claimed by both {owner_a} and {owner_b}")]
    DuplicateDomain { domain: String, owner_a: String, owner_b: String },
    #[error("ownership file line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("empty corpus: no loaded pages")]
    EmptyCorpus,
}

/// Revenue-model vocabulary of the ownership table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevenueModel {
    Advertising,
    DataBroker,
    RetailAndHosting,
    SoftwareAndServices,
    Other(String),
}

impl RevenueModel {
    fn parse(raw: &str) -> RevenueModel {
        let folded = raw.trim().to_ascii_lowercase();
        match folded.as_str() {
            "advertising" => RevenueModel::Advertising,
            "data broker" => RevenueModel::DataBroker,
            "retail & hosting" => RevenueModel::RetailAndHosting,
            "software & services" => RevenueModel::SoftwareAndServices,
            _ => RevenueModel::Other(raw.trim().to_string()),
        }
    }
}

impl fmt::Display for RevenueModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RevenueModel::Advertising => write!(f, "Advertising"),
            RevenueModel::DataBroker => write!(f, "Data Broker"),
            RevenueModel::RetailAndHosting => write!(f, "Retail & Hosting"),
            RevenueModel::SoftwareAndServices => write!(f, "Software & Services"),
            RevenueModel::Other(label) => write!(f, "{label}"),
        }
    }
}

/// One corporate owner and the registrable domains it operates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OwnerRecord {
    pub id: String,
    pub display_name: String,
    pub revenue_model: RevenueModel,
    pub domains: BTreeSet<RegistrableDomain>,
}

/// Loaded ownership database. The domain->owner mapping is single-valued
/// and lookups are case-insensitive; the version string travels with every
/// report built from this database.
#[derive(Debug, Clone)]
pub struct OwnershipDb {
    records: Vec<OwnerRecord>,
    index: HashMap<String, usize>,
    pub version: String,
    pub built_at: DateTime<Utc>,
}

/// Ownership snapshot shipped with the crate, seeded with the domains of
/// the major analytics, advertising, social, and data-broker companies.
pub const BUNDLED_OWNER_DB: &str = include_str!("../data/owners.txt");

impl OwnershipDb {
    pub fn bundled() -> Self {
        load_owner_db(BUNDLED_OWNER_DB).expect("bundled ownership db must parse")
    }

    pub fn records(&self) -> &[OwnerRecord] {
        &self.records
    }

    /// Exact registrable-domain lookup; misses mean "unattributed".
    pub fn resolve(&self, domain: &RegistrableDomain) -> Option<&OwnerRecord> {
        self.index.get(domain.as_str()).map(|idx| &self.records[*idx])
    }

    /// Case-insensitive convenience lookup from a raw domain string.
    pub fn resolve_str(&self, domain: &str) -> Option<&OwnerRecord> {
        self.resolve(&RegistrableDomain::new(domain))
    }
}

/// Parse an ownership file.
///
/// Format: optional `version:` line, then blocks introduced by `owner:`
/// with `name:`, `revenue:`, and one or more `domains:` lines holding
/// space-separated registrable domains. `#` starts a comment. A file
/// without a `version:` line gets a digest-derived version so reports stay
/// self-describing.
pub fn load_owner_db(document: &str) -> Result<OwnershipDb, OwnershipError> {
    let mut version: Option<String> = None;
    let mut records: Vec<OwnerRecord> = Vec::new();
    let mut current: Option<OwnerRecord> = None;

    for (idx, raw_line) in document.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once(':').ok_or(OwnershipError::Schema {
            line: line_no,
            message: format!("expected key: value, got {line:?}"),
        })?;
        let value = value.trim();
        match key.trim() {
            "version" => version = Some(value.to_string()),
            "owner" => {
                if let Some(done) = current.take() {
                    finish_record(done, &mut records, line_no)?;
                }
                let id = value.to_ascii_lowercase();
                if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                    return Err(OwnershipError::Schema {
                        line: line_no,
                        message: format!("invalid owner id {value:?}"),
                    });
                }
                current = Some(OwnerRecord {
                    id,
                    display_name: String::new(),
                    revenue_model: RevenueModel::Other(String::new()),
                    domains: BTreeSet::new(),
                });
            }
            "name" => match current.as_mut() {
                Some(record) => record.display_name = value.to_string(),
                None => return Err(orphan_key(line_no, "name")),
            },
            "revenue" => match current.as_mut() {
                Some(record) => record.revenue_model = RevenueModel::parse(value),
                None => return Err(orphan_key(line_no, "revenue")),
            },
            "domains" => match current.as_mut() {
                Some(record) => {
                    for domain in value.split_whitespace() {
                        record.domains.insert(RegistrableDomain::new(domain));
                    }
                }
                None => return Err(orphan_key(line_no, "domains")),
            },
            other => {
                return Err(OwnershipError::Schema {
                    line: line_no,
                    message: format!("unknown key {other:?}"),
                })
            }
        }
    }
    if let Some(done) = current.take() {
        finish_record(done, &mut records, document.lines().count())?;
    }

    let mut index: HashMap<String, usize> = HashMap::new();
    for (pos, record) in records.iter().enumerate() {
        for domain in &record.domains {
            if let Some(previous) = index.insert(domain.as_str().to_string(), pos) {
                return Err(OwnershipError::DuplicateDomain {
                    domain: domain.as_str().to_string(),
                    owner_a: records[previous].id.clone(),
                    owner_b: record.id.clone(),
                });
            }
        }
    }

    let version = version.unwrap_or_else(|| {
        format!("sha256:{:.16}", format!("{:x}", Sha256::digest(document.as_bytes())))
    });
    Ok(OwnershipDb { records, index, version, built_at: Utc::now() })
}

fn orphan_key(line: usize, key: &str) -> OwnershipError {
    OwnershipError::Schema { line, message: format!("{key:?} before any owner block") }
}

fn finish_record(record: OwnerRecord, records: &mut Vec<OwnerRecord>, line: usize) -> Result<(), OwnershipError> {
    if record.domains.is_empty() {
        return Err(OwnershipError::Schema {
            line,
            message: format!("owner {:?} has no domains", record.id),
        });
    }
    if records.iter().any(|r| r.id == record.id) {
        return Err(OwnershipError::Schema {
            line,
            message: format!("owner id {:?} declared twice", record.id),
        });
    }
    records.push(record);
    Ok(())
}

/// One ranking row: an owner's reach across the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OwnerReach {
    pub owner_id: String,
    pub display_name: String,
    pub revenue_model: RevenueModel,
    pub pages: u64,
    /// Percent of loaded pages with at least one third-party request
    /// resolving to the owner.
    pub percent: f64,
}

/// Owner ranking plus the unattributed remainder. The unattributed row is
/// always reported, as its own trailing row rather than ranked among
/// owners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OwnerRanking {
    pub rows: Vec<OwnerReach>,
    pub unattributed: OwnerReach,
}

fn reach_percent(pages: u64, loaded: u64) -> f64 {
    if loaded == 0 {
        return 0.0;
    }
    let raw = pages as f64 * 100.0 / loaded as f64;
    (raw * 100.0).round() / 100.0
}

/// Build the ranking from per-owner page counts. Sorted by page count
/// descending, ties by owner id ascending. Percentages are per-owner page
/// shares and may sum over 100: pages host multiple owners and no cap is
/// applied.
pub fn rank_owner_reach(
    owner_pages: &BTreeMap<String, u64>,
    unattributed_pages: u64,
    loaded_pages: u64,
    db: &OwnershipDb,
) -> OwnerRanking {
    let mut rows: Vec<OwnerReach> = owner_pages
        .iter()
        .map(|(id, pages)| {
            let record = db.records.iter().find(|r| &r.id == id);
            OwnerReach {
                owner_id: id.clone(),
                display_name: record.map(|r| r.display_name.clone()).unwrap_or_else(|| id.clone()),
                revenue_model: record
                    .map(|r| r.revenue_model.clone())
                    .unwrap_or(RevenueModel::Other(String::new())),
                pages: *pages,
                percent: reach_percent(*pages, loaded_pages),
            }
        })
        .collect();
    rows.sort_by(|a, b| b.pages.cmp(&a.pages).then_with(|| a.owner_id.cmp(&b.owner_id)));
    OwnerRanking {
        rows,
        unattributed: OwnerReach {
            owner_id: "unattributed".into(),
            display_name: "Unattributed".into(),
            revenue_model: RevenueModel::Other("Unknown".into()),
            pages: unattributed_pages,
            percent: reach_percent(unattributed_pages, loaded_pages),
        },
    }
}

/// Rank owners by page reach over census records: one count per page per
/// owner regardless of request multiplicity, denominated by loaded pages.
pub fn rank_owner_prevalence(records: &[CensusRecord], db: &OwnershipDb) -> Result<OwnerRanking, OwnershipError> {
    let loaded: Vec<&CensusRecord> = records.iter().filter(|r| r.load_status.is_loaded()).collect();
    if loaded.is_empty() {
        return Err(OwnershipError::EmptyCorpus);
    }
    let mut owner_pages: BTreeMap<String, u64> = BTreeMap::new();
    let mut unattributed_pages = 0u64;
    for record in &loaded {
        let mut owners: BTreeSet<&str> = BTreeSet::new();
        let mut any_unattributed = false;
        for domain in &record.third_party_domains {
            match db.resolve(domain) {
                Some(owner) => {
                    owners.insert(owner.id.as_str());
                }
                None => any_unattributed = true,
            }
        }
        for owner in owners {
            *owner_pages.entry(owner.to_string()).or_insert(0) += 1;
        }
        if any_unattributed {
            unattributed_pages += 1;
        }
    }
    Ok(rank_owner_reach(&owner_pages, unattributed_pages, loaded.len() as u64, db))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::LoadStatus;
    use crate::census::RecordDiagnostics;
    use crate::classify::PageFlags;
    use crate::uri::TldCategory;

    const SMALL_DB: &str = "\
version: test.1
owner: google
name: Google
revenue: Advertising
domains: google-analytics.com doubleclick.net 2mdn.net googleapis.com youtube.com

owner: facebook
name: Facebook
revenue: Advertising
domains: facebook.com fbcdn.net
";

    fn record(uri: &str, domains: &[&str]) -> CensusRecord {
        CensusRecord {
            page_uri: uri.into(),
            tld_category: TldCategory::Com,
            flags: PageFlags {
                has_third_party_request: !domains.is_empty(),
                has_third_party_javascript: false,
                has_third_party_cookie: false,
            },
            third_party_domains: domains.iter().map(|d| RegistrableDomain::new(*d)).collect(),
            elements: Vec::new(),
            https: false,
            load_status: LoadStatus::Loaded,
            diagnostics: RecordDiagnostics::default(),
        }
    }

    #[test]
    fn loads_and_resolves_paper_domains() {
        let db = load_owner_db(SMALL_DB).unwrap();
        assert_eq!(db.version, "test.1");
        assert_eq!(db.resolve_str("2mdn.net").unwrap().id, "google");
        assert_eq!(db.resolve_str("fbcdn.net").unwrap().id, "facebook");
        assert_eq!(db.resolve_str("YouTube.com").unwrap().id, "google");
        assert!(db.resolve_str("nonexistent-tracker.example").is_none());
        assert_eq!(db.records()[0].domains.len(), 5);
    }

    #[test]
    fn duplicate_domain_rejected() {
        let doc = "owner: a\nname: A\nrevenue: Advertising\ndomains: x.com\nowner: b\nname: B\nrevenue: Advertising\ndomains: x.com\n";
        match load_owner_db(doc) {
            Err(OwnershipError::DuplicateDomain { domain, owner_a, owner_b }) => {
                assert_eq!(domain, "x.com");
                assert_eq!((owner_a.as_str(), owner_b.as_str()), ("a", "b"));
            }
            other => panic!("expected duplicate-domain error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_yields_empty_db_with_version() {
        let db = load_owner_db("").unwrap();
        assert!(db.records().is_empty());
        assert!(db.version.starts_with("sha256:"));
    }

    #[test]
    fn revenue_vocabulary() {
        assert_eq!(RevenueModel::parse("Advertising"), RevenueModel::Advertising);
        assert_eq!(RevenueModel::parse("Data Broker"), RevenueModel::DataBroker);
        assert_eq!(RevenueModel::parse("Retail & Hosting"), RevenueModel::RetailAndHosting);
        assert_eq!(RevenueModel::parse("Software & Services"), RevenueModel::SoftwareAndServices);
        assert_eq!(RevenueModel::parse("Subscriptions"), RevenueModel::Other("Subscriptions".into()));
    }

    #[test]
    fn singleton_corpus_ranking() {
        let db = load_owner_db(SMALL_DB).unwrap();
        let ranking = rank_owner_prevalence(&[record("http://a.com/", &["google-analytics.com"])], &db).unwrap();
        assert_eq!(ranking.rows.len(), 1);
        assert_eq!(ranking.rows[0].owner_id, "google");
        assert_eq!(ranking.rows[0].percent, 100.0);
        assert_eq!(ranking.unattributed.pages, 0);
    }

    #[test]
    fn multiplicity_counts_once_per_page() {
        let db = load_owner_db(SMALL_DB).unwrap();
        // 40 doubleclick requests collapse to one domain entry and one page count.
        let many = record("http://a.com/", &["doubleclick.net"]);
        let hand_counted_pages = 1;
        let ranking = rank_owner_prevalence(&[many], &db).unwrap();
        assert_eq!(ranking.rows[0].pages, hand_counted_pages);
    }

    #[test]
    fn multiple_domains_same_owner_count_once() {
        let db = load_owner_db(SMALL_DB).unwrap();
        let ranking = rank_owner_prevalence(
            &[record("http://a.com/", &["doubleclick.net", "2mdn.net", "youtube.com"])],
            &db,
        )
        .unwrap();
        assert_eq!(ranking.rows.len(), 1);
        assert_eq!(ranking.rows[0].pages, 1);
    }

    #[test]
    fn unattributed_reported_not_ranked() {
        let db = load_owner_db(SMALL_DB).unwrap();
        let ranking = rank_owner_prevalence(
            &[
                record("http://a.com/", &["mystery-tracker.net"]),
                record("http://b.com/", &["facebook.com"]),
            ],
            &db,
        )
        .unwrap();
        assert_eq!(ranking.rows.len(), 1);
        assert_eq!(ranking.rows[0].owner_id, "facebook");
        assert_eq!(ranking.unattributed.pages, 1);
        assert_eq!(ranking.unattributed.percent, 50.0);
    }

    #[test]
    fn percentages_uncapped() {
        let db = load_owner_db(SMALL_DB).unwrap();
        let records: Vec<CensusRecord> = (0..4)
            .map(|i| record(&format!("http://p{i}.com/"), &["google-analytics.com", "facebook.com"]))
            .collect();
        let ranking = rank_owner_prevalence(&records, &db).unwrap();
        let total: f64 = ranking.rows.iter().map(|r| r.percent).sum();
        assert_eq!(total, 200.0);
        for row in &ranking.rows {
            assert!(row.percent >= 0.0 && row.percent <= 100.0);
        }
    }

    #[test]
    fn ties_break_by_owner_id() {
        let db = load_owner_db(SMALL_DB).unwrap();
        let records = vec![record("http://a.com/", &["google-analytics.com", "facebook.com"])];
        let ranking = rank_owner_prevalence(&records, &db).unwrap();
        assert_eq!(ranking.rows[0].owner_id, "facebook");
        assert_eq!(ranking.rows[1].owner_id, "google");
    }

    #[test]
    fn empty_corpus_error() {
        let db = load_owner_db(SMALL_DB).unwrap();
        assert!(matches!(rank_owner_prevalence(&[], &db), Err(OwnershipError::EmptyCorpus)));
    }

    #[test]
    fn bundled_db_covers_study_owners() {
        let db = OwnershipDb::bundled();
        for (domain, owner) in [
            ("google-analytics.com", "google"),
            ("doubleclick.net", "google"),
            ("2mdn.net", "google"),
            ("googleapis.com", "google"),
            ("youtube.com", "google"),
            ("fbcdn.net", "facebook"),
            ("scorecardresearch.com", "comscore"),
            ("adnxs.com", "appnexus"),
            ("addthis.com", "addthis"),
            ("twitter.com", "twitter"),
            ("quantserve.com", "quantcast"),
            ("amazon-adsystem.com", "amazon"),
            ("omtrdc.net", "adobe"),
            ("yimg.com", "yahoo"),
            ("experian.com", "experian"),
            ("acxiom.com", "acxiom"),
        ] {
            assert_eq!(db.resolve_str(domain).map(|r| r.id.as_str()), Some(owner), "{domain}");
        }
        assert_eq!(db.resolve_str("amazon.com").unwrap().revenue_model, RevenueModel::RetailAndHosting);
        assert_eq!(db.resolve_str("experian.com").unwrap().revenue_model, RevenueModel::DataBroker);
    }
}
