//! Corpus aggregation: prevalence by TLD category, top elements, extension
//! histograms, owner reach, and load-failure accounting.
//!
//! Aggregation is split into a mergeable count accumulator and a single
//! finalization step that renders percentages. Any number of workers can
//! build partial accumulators over disjoint record slices and merge them;
//! the finalized output is identical to a whole-corpus pass.
//!
//! All measured figures are lower bounds: pages that failed to load are
//! excluded from every percentage denominator and reported in a separate
//! failure table instead of being silently dropped.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

use crate::capture::LoadStatus;
use crate::classify::{ElementRecord, PageFlags};
use crate::ownership::{rank_owner_reach, OwnerRanking, OwnershipDb};
use crate::psl::RegistrableDomain;
use crate::uri::{ElementClass, TldCategory};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CensusError {
    #[error("empty corpus: no loaded pages")]
    EmptyCorpus,
    #[error("version mismatch: {0}")]
    VersionMismatch(String),
}

/// Per-page diagnostics carried alongside classification results.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordDiagnostics {
    /// Requests whose URI could not be parsed; excluded from classification.
    pub malformed_requests: u32,
    /// Hosts resolved by the last-two-labels fallback (no ruleset match).
    pub fallback_domains: u32,
    /// Requests to hosts that are themselves a public suffix.
    pub suffix_host_requests: u32,
    /// Cookies whose domain attribute was a public suffix or unusable.
    pub suffix_host_cookies: u32,
}

/// One analyzed page: the record-log unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusRecord {
    pub page_uri: String,
    pub tld_category: TldCategory,
    pub flags: PageFlags,
    pub third_party_domains: BTreeSet<RegistrableDomain>,
    pub elements: Vec<ElementRecord>,
    pub https: bool,
    pub load_status: LoadStatus,
    #[serde(default)]
    pub diagnostics: RecordDiagnostics,
}

/// Reporting rows: the overall corpus plus the four named TLD categories,
/// with everything else aggregated under `Other`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryRow {
    All,
    Com,
    Org,
    Gov,
    Edu,
    Other,
}

impl CategoryRow {
    pub const ALL_ROWS: [CategoryRow; 6] = [
        CategoryRow::All,
        CategoryRow::Com,
        CategoryRow::Org,
        CategoryRow::Gov,
        CategoryRow::Edu,
        CategoryRow::Other,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            CategoryRow::All => "all",
            CategoryRow::Com => "com",
            CategoryRow::Org => "org",
            CategoryRow::Gov => "gov",
            CategoryRow::Edu => "edu",
            CategoryRow::Other => "other",
        }
    }

    fn of(category: &TldCategory) -> CategoryRow {
        match category {
            TldCategory::Com => CategoryRow::Com,
            TldCategory::Org => CategoryRow::Org,
            TldCategory::Gov => CategoryRow::Gov,
            TldCategory::Edu => CategoryRow::Edu,
            TldCategory::Other(_) => CategoryRow::Other,
        }
    }
}

/// Configuration fingerprint an accumulator was built under. Accumulators
/// with different fingerprints must not be merged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigFingerprint {
    pub top_n: usize,
    pub ruleset_snapshot: String,
    pub owner_db_version: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
struct RowCounts {
    loaded: u64,
    third_party_requests: u64,
    third_party_js: u64,
    third_party_cookies: u64,
}

/// Mergeable census accumulator: counts only, no percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusAccumulator {
    fingerprint: ConfigFingerprint,
    pages_total: u64,
    pages_loaded: u64,
    https_loaded: u64,
    rows: BTreeMap<CategoryRow, RowCounts>,
    /// stripped URI -> (class, distinct pages requesting it); third-party
    /// elements only, deduplicated within each page.
    element_pages: BTreeMap<String, (ElementClass, u64)>,
    /// owner id -> pages with at least one request resolving to the owner.
    owner_pages: BTreeMap<String, u64>,
    unattributed_pages: u64,
    failures: BTreeMap<String, u64>,
    diagnostics: RecordDiagnostics,
}

impl CensusAccumulator {
    pub fn new(fingerprint: ConfigFingerprint) -> Self {
        Self {
            fingerprint,
            pages_total: 0,
            pages_loaded: 0,
            https_loaded: 0,
            rows: BTreeMap::new(),
            element_pages: BTreeMap::new(),
            owner_pages: BTreeMap::new(),
            unattributed_pages: 0,
            failures: BTreeMap::new(),
            diagnostics: RecordDiagnostics::default(),
        }
    }

    pub fn fingerprint(&self) -> &ConfigFingerprint {
        &self.fingerprint
    }

    /// Fold one record into the accumulator.
    pub fn add(&mut self, record: &CensusRecord, db: &OwnershipDb) {
        self.pages_total += 1;
        self.diagnostics.malformed_requests += record.diagnostics.malformed_requests;
        self.diagnostics.fallback_domains += record.diagnostics.fallback_domains;
        self.diagnostics.suffix_host_requests += record.diagnostics.suffix_host_requests;
        self.diagnostics.suffix_host_cookies += record.diagnostics.suffix_host_cookies;

        if !record.load_status.is_loaded() {
            *self.failures.entry(record.load_status.label()).or_insert(0) += 1;
            return;
        }
        self.pages_loaded += 1;
        if record.https {
            self.https_loaded += 1;
        }

        let row = CategoryRow::of(&record.tld_category);
        for key in [CategoryRow::All, row] {
            let counts = self.rows.entry(key).or_default();
            counts.loaded += 1;
            if record.flags.has_third_party_request {
                counts.third_party_requests += 1;
            }
            if record.flags.has_third_party_javascript {
                counts.third_party_js += 1;
            }
            if record.flags.has_third_party_cookie {
                counts.third_party_cookies += 1;
            }
        }

        // Distinct-page element prevalence: a page contributes each
        // third-party stripped URI once, however many times it was requested.
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for element in &record.elements {
            if !record.third_party_domains.contains(&element.request_registrable_domain) {
                continue;
            }
            if seen.insert(element.stripped_uri.as_str()) {
                let entry = self
                    .element_pages
                    .entry(element.stripped_uri.clone())
                    .or_insert((element.extension_class.element_class(), 0));
                entry.1 += 1;
            }
        }

        // Owner reach: one count per page per owner, independent of how many
        // of the owner's domains or requests appear.
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
            *self.owner_pages.entry(owner.to_string()).or_insert(0) += 1;
        }
        if any_unattributed {
            self.unattributed_pages += 1;
        }
    }

    /// Count-wise merge. Both sides must share the same fingerprint.
    pub fn merge(mut self, other: CensusAccumulator) -> Result<CensusAccumulator, CensusError> {
        if self.fingerprint != other.fingerprint {
            return Err(CensusError::VersionMismatch(format!(
                "accumulator fingerprints differ: {:?} vs {:?}",
                self.fingerprint, other.fingerprint
            )));
        }
        self.pages_total += other.pages_total;
        self.pages_loaded += other.pages_loaded;
        self.https_loaded += other.https_loaded;
        for (row, counts) in other.rows {
            let mine = self.rows.entry(row).or_default();
            mine.loaded += counts.loaded;
            mine.third_party_requests += counts.third_party_requests;
            mine.third_party_js += counts.third_party_js;
            mine.third_party_cookies += counts.third_party_cookies;
        }
        for (uri, (class, pages)) in other.element_pages {
            let entry = self.element_pages.entry(uri).or_insert((class, 0));
            entry.1 += pages;
        }
        for (owner, pages) in other.owner_pages {
            *self.owner_pages.entry(owner).or_insert(0) += pages;
        }
        self.unattributed_pages += other.unattributed_pages;
        for (status, count) in other.failures {
            *self.failures.entry(status).or_insert(0) += count;
        }
        self.diagnostics.malformed_requests += other.diagnostics.malformed_requests;
        self.diagnostics.fallback_domains += other.diagnostics.fallback_domains;
        self.diagnostics.suffix_host_requests += other.diagnostics.suffix_host_requests;
        self.diagnostics.suffix_host_cookies += other.diagnostics.suffix_host_cookies;
        Ok(self)
    }

    /// Render percentages and rankings. Errors on an empty corpus.
    pub fn finalize(&self, db: &OwnershipDb) -> Result<CensusSummary, CensusError> {
        if self.pages_loaded == 0 {
            return Err(CensusError::EmptyCorpus);
        }
        let loaded = self.pages_loaded;

        let mut per_category = BTreeMap::new();
        for row in CategoryRow::ALL_ROWS {
            let counts = self.rows.get(&row).copied().unwrap_or_default();
            per_category.insert(
                row,
                CategoryPrevalence {
                    loaded: counts.loaded,
                    pct_third_party_requests: percent(counts.third_party_requests, counts.loaded),
                    pct_third_party_js: percent(counts.third_party_js, counts.loaded),
                    pct_third_party_cookies: percent(counts.third_party_cookies, counts.loaded),
                },
            );
        }

        // Rank elements by distinct-page count, ties lexicographic.
        let mut ranked: Vec<(&String, &(ElementClass, u64))> = self.element_pages.iter().collect();
        ranked.sort_by(|a, b| b.1 .1.cmp(&a.1 .1).then_with(|| a.0.cmp(b.0)));
        let top_elements: Vec<TopElement> = ranked
            .iter()
            .take(self.fingerprint.top_n)
            .map(|(uri, (class, pages))| TopElement {
                stripped_uri: (*uri).clone(),
                element_class: *class,
                pages: *pages,
                percent_of_pages: percent(*pages, loaded),
            })
            .collect();
        let extension_histogram = extension_histogram(&top_elements);

        let owner_ranking = rank_owner_reach(&self.owner_pages, self.unattributed_pages, loaded, db);

        Ok(CensusSummary {
            pages_total: self.pages_total,
            pages_loaded: loaded,
            per_category,
            extension_histogram,
            top_elements,
            owner_ranking,
            https_share: percent(self.https_loaded, loaded),
            load_failures: self.failures.clone(),
            diagnostics: self.diagnostics,
            fingerprint: self.fingerprint.clone(),
        })
    }
}

/// Percentage at two-decimal precision.
fn percent(numerator: u64, denominator: u64) -> f64 {
    if denominator == 0 {
        return 0.0;
    }
    let raw = numerator as f64 * 100.0 / denominator as f64;
    (raw * 100.0).round() / 100.0
}

/// Integer rendering used by prevalence tables: round half up.
pub fn render_percent_int(value: f64) -> i64 {
    (value + 0.5).floor() as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryPrevalence {
    pub loaded: u64,
    pub pct_third_party_requests: f64,
    pub pct_third_party_js: f64,
    pub pct_third_party_cookies: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopElement {
    pub stripped_uri: String,
    pub element_class: ElementClass,
    pub pages: u64,
    pub percent_of_pages: f64,
}

/// Finalized corpus statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusSummary {
    pub pages_total: u64,
    pub pages_loaded: u64,
    pub per_category: BTreeMap<CategoryRow, CategoryPrevalence>,
    /// Integer shares of each element class among the top-N elements;
    /// sums to exactly 100.
    pub extension_histogram: BTreeMap<ElementClass, i64>,
    pub top_elements: Vec<TopElement>,
    pub owner_ranking: OwnerRanking,
    pub https_share: f64,
    pub load_failures: BTreeMap<String, u64>,
    pub diagnostics: RecordDiagnostics,
    pub fingerprint: ConfigFingerprint,
}

/// Class shares among the listed elements, rounded half-up to integers with
/// the rounding residual assigned to `Other` so the total is exactly 100.
pub fn extension_histogram(top_elements: &[TopElement]) -> BTreeMap<ElementClass, i64> {
    let mut histogram: BTreeMap<ElementClass, i64> = ElementClass::ALL.iter().map(|c| (*c, 0)).collect();
    let total = top_elements.len() as i64;
    if total == 0 {
        return histogram;
    }
    let mut counts: BTreeMap<ElementClass, i64> = BTreeMap::new();
    for element in top_elements {
        *counts.entry(element.element_class).or_insert(0) += 1;
    }
    let mut sum = 0;
    for class in ElementClass::ALL {
        let count = counts.get(&class).copied().unwrap_or(0);
        let share = render_percent_int(count as f64 * 100.0 / total as f64);
        histogram.insert(class, share);
        sum += share;
    }
    *histogram.get_mut(&ElementClass::Other).unwrap() += 100 - sum;
    histogram
}

/// Build an accumulator over a record slice.
pub fn accumulate(
    records: &[CensusRecord],
    db: &OwnershipDb,
    fingerprint: ConfigFingerprint,
) -> CensusAccumulator {
    let mut acc = CensusAccumulator::new(fingerprint);
    for record in records {
        acc.add(record, db);
    }
    acc
}

/// Whole-corpus aggregation in one pass.
pub fn summarize(
    records: &[CensusRecord],
    db: &OwnershipDb,
    top_n: usize,
    ruleset_snapshot: &str,
) -> Result<CensusSummary, CensusError> {
    let fingerprint = ConfigFingerprint {
        top_n,
        ruleset_snapshot: ruleset_snapshot.to_string(),
        owner_db_version: db.version.clone(),
    };
    accumulate(records, db, fingerprint).finalize(db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::PageFlags;
    use crate::ownership::load_owner_db;
    use crate::uri::ExtensionClass;

    fn db() -> OwnershipDb {
        load_owner_db("version: test.1\nowner: google\nname: Google\nrevenue: Advertising\ndomains: google-analytics.com doubleclick.net\n").unwrap()
    }

    fn element(uri: &str, class: ExtensionClass, domain: &str) -> ElementRecord {
        ElementRecord {
            stripped_uri: uri.into(),
            extension_class: class,
            request_registrable_domain: RegistrableDomain::new(domain),
        }
    }

    fn page(uri: &str, category: TldCategory, flags: PageFlags, domains: &[&str], elements: Vec<ElementRecord>, https: bool) -> CensusRecord {
        CensusRecord {
            page_uri: uri.into(),
            tld_category: category,
            flags,
            third_party_domains: domains.iter().map(|d| RegistrableDomain::new(*d)).collect(),
            elements,
            https,
            load_status: LoadStatus::Loaded,
            diagnostics: RecordDiagnostics::default(),
        }
    }

    fn ga_page(uri: &str) -> CensusRecord {
        page(
            uri,
            TldCategory::Com,
            PageFlags { has_third_party_request: true, has_third_party_javascript: true, has_third_party_cookie: false },
            &["google-analytics.com"],
            vec![element("http://www.google-analytics.com/ga.js", ExtensionClass::Javascript, "google-analytics.com")],
            false,
        )
    }

    fn fingerprint() -> ConfigFingerprint {
        ConfigFingerprint { top_n: 100, ruleset_snapshot: "rs".into(), owner_db_version: "test.1".into() }
    }

    #[test]
    fn empty_corpus_is_error() {
        let db = db();
        assert_eq!(summarize(&[], &db, 100, "rs"), Err(CensusError::EmptyCorpus));
    }

    #[test]
    fn singleton_page_with_ga() {
        let db = db();
        let summary = summarize(&[ga_page("http://a.com/")], &db, 100, "rs").unwrap();
        let all = summary.per_category[&CategoryRow::All];
        assert_eq!(all.pct_third_party_requests, 100.0);
        assert_eq!(all.pct_third_party_js, 100.0);
        assert_eq!(all.pct_third_party_cookies, 0.0);
        assert_eq!(summary.top_elements[0].stripped_uri, "http://www.google-analytics.com/ga.js");
        assert_eq!(summary.owner_ranking.rows[0].owner_id, "google");
        assert_eq!(summary.owner_ranking.rows[0].percent, 100.0);
    }

    #[test]
    fn histogram_matches_reference_class_mix() {
        // 100 elements split 47/33/8/4/8 across the five classes.
        let mut elements = Vec::new();
        let mix = [
            (ElementClass::NoExtension, 47),
            (ElementClass::Javascript, 33),
            (ElementClass::Image, 8),
            (ElementClass::DynamicPage, 4),
            (ElementClass::Other, 8),
        ];
        for (class, count) in mix {
            for i in 0..count {
                elements.push(TopElement {
                    stripped_uri: format!("http://e{class:?}{i}.net/x"),
                    element_class: class,
                    pages: 10,
                    percent_of_pages: 1.0,
                });
            }
        }
        let histogram = extension_histogram(&elements);
        for (class, count) in mix {
            assert_eq!(histogram[&class], count as i64);
        }
        assert_eq!(histogram.values().sum::<i64>(), 100);
    }

    #[test]
    fn histogram_cases() {
        let mk = |class: ElementClass| TopElement {
            stripped_uri: "u".into(),
            element_class: class,
            pages: 1,
            percent_of_pages: 1.0,
        };
        let single = extension_histogram(&[mk(ElementClass::Javascript)]);
        assert_eq!(single[&ElementClass::Javascript], 100);
        assert_eq!(single.values().sum::<i64>(), 100);

        let two = extension_histogram(&[mk(ElementClass::Javascript), mk(ElementClass::Image)]);
        assert_eq!(two[&ElementClass::Javascript], 50);
        assert_eq!(two[&ElementClass::Image], 50);

        // Thirds: 33+33+33 leaves a residual of 1 assigned to Other.
        let thirds = extension_histogram(&[
            mk(ElementClass::Javascript),
            mk(ElementClass::Image),
            mk(ElementClass::NoExtension),
        ]);
        assert_eq!(thirds.values().sum::<i64>(), 100);
        assert_eq!(thirds[&ElementClass::Other], 1);
    }

    #[test]
    fn merge_identity_and_commutativity() {
        let db = db();
        let records: Vec<CensusRecord> = (0..10).map(|i| ga_page(&format!("http://site{i}.com/"))).collect();
        let (a, b) = records.split_at(4);
        let acc_a = accumulate(a, &db, fingerprint());
        let acc_b = accumulate(b, &db, fingerprint());
        let empty = CensusAccumulator::new(fingerprint());

        let merged_with_empty = acc_a.clone().merge(empty).unwrap();
        assert_eq!(merged_with_empty, acc_a);

        let ab = acc_a.clone().merge(acc_b.clone()).unwrap().finalize(&db).unwrap();
        let ba = acc_b.merge(acc_a).unwrap().finalize(&db).unwrap();
        assert_eq!(ab, ba);

        let whole = summarize(&records, &db, 100, "rs").unwrap();
        assert_eq!(ab, whole);
    }

    #[test]
    fn merge_rejects_mismatched_fingerprints() {
        let other = ConfigFingerprint { top_n: 50, ..fingerprint() };
        let err = CensusAccumulator::new(fingerprint()).merge(CensusAccumulator::new(other));
        assert!(matches!(err, Err(CensusError::VersionMismatch(_))));
    }

    #[test]
    fn multiplicity_does_not_change_output() {
        let db = db();
        let mut duplicated = ga_page("http://a.com/");
        let extra = duplicated.elements[0].clone();
        duplicated.elements.extend(std::iter::repeat_n(extra, 40));
        let base = summarize(&[ga_page("http://a.com/")], &db, 100, "rs").unwrap();
        let multi = summarize(&[duplicated], &db, 100, "rs").unwrap();
        assert_eq!(base, multi);
    }

    #[test]
    fn failures_excluded_from_denominators() {
        let db = db();
        let mut failed = ga_page("http://b.com/");
        failed.load_status = LoadStatus::Timeout;
        failed.flags = PageFlags::default();
        failed.third_party_domains.clear();
        failed.elements.clear();
        let summary = summarize(&[ga_page("http://a.com/"), failed], &db, 100, "rs").unwrap();
        assert_eq!(summary.pages_total, 2);
        assert_eq!(summary.pages_loaded, 1);
        assert_eq!(summary.per_category[&CategoryRow::All].pct_third_party_requests, 100.0);
        assert_eq!(summary.load_failures["timeout"], 1);
    }

    #[test]
    fn all_row_aggregates_category_rows() {
        let db = db();
        let mut records = Vec::new();
        let categories = [
            TldCategory::Com,
            TldCategory::Org,
            TldCategory::Gov,
            TldCategory::Edu,
            TldCategory::Other("uk".into()),
            TldCategory::Other("net".into()),
        ];
        for (i, category) in categories.iter().enumerate() {
            for j in 0..(i + 1) {
                let mut record = ga_page(&format!("http://s{i}x{j}.example/"));
                record.tld_category = category.clone();
                records.push(record);
            }
        }
        let summary = summarize(&records, &db, 100, "rs").unwrap();
        let all = summary.per_category[&CategoryRow::All];
        let category_sum: u64 = CategoryRow::ALL_ROWS
            .iter()
            .filter(|row| **row != CategoryRow::All)
            .map(|row| summary.per_category[row].loaded)
            .sum();
        assert_eq!(all.loaded, category_sum);
        assert_eq!(all.loaded, records.len() as u64);
        // Both Other labels landed in the single Other row.
        assert_eq!(summary.per_category[&CategoryRow::Other].loaded, 5 + 6);
    }

    #[test]
    fn js_percentage_never_exceeds_requests() {
        let db = db();
        let mut records = vec![ga_page("http://a.com/")];
        records.push(page(
            "http://b.com/",
            TldCategory::Com,
            PageFlags { has_third_party_request: true, has_third_party_javascript: false, has_third_party_cookie: false },
            &["doubleclick.net"],
            vec![element("http://doubleclick.net/pixel.gif", ExtensionClass::Image, "doubleclick.net")],
            false,
        ));
        let summary = summarize(&records, &db, 100, "rs").unwrap();
        for row in CategoryRow::ALL_ROWS {
            let prevalence = summary.per_category[&row];
            assert!(prevalence.pct_third_party_js <= prevalence.pct_third_party_requests);
        }
    }
}
