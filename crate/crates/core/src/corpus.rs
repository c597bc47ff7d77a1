//! Corpus-level tables over many feature reports joined with store metadata.
//!
//! An app counts as obfuscated when its class names are. Aggregation state
//! is a [`CorpusAggregate`], which can be filled per partition and merged.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::FeatureReport;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("metadata CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("metadata CSV is missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("metadata JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DownloadBucket {
    Zero,
    Ten,
    Hundred,
    Thousand,
    TenThousand,
    HundredThousand,
    Million,
    TenMillion,
    HundredMillion,
}

impl DownloadBucket {
    pub const ALL: [DownloadBucket; 9] = [
        DownloadBucket::Zero,
        DownloadBucket::Ten,
        DownloadBucket::Hundred,
        DownloadBucket::Thousand,
        DownloadBucket::TenThousand,
        DownloadBucket::HundredThousand,
        DownloadBucket::Million,
        DownloadBucket::TenMillion,
        DownloadBucket::HundredMillion,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DownloadBucket::Zero => "0+",
            DownloadBucket::Ten => "10+",
            DownloadBucket::Hundred => "100+",
            DownloadBucket::Thousand => "1k+",
            DownloadBucket::TenThousand => "10k+",
            DownloadBucket::HundredThousand => "100k+",
            DownloadBucket::Million => "1M+",
            DownloadBucket::TenMillion => "10M+",
            DownloadBucket::HundredMillion => "100M+",
        }
    }
}

impl fmt::Display for DownloadBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DownloadBucket {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        DownloadBucket::ALL
            .into_iter()
            .find(|b| b.label() == s.trim())
            .ok_or_else(|| format!("unknown downloads bucket `{s}`"))
    }
}

impl Serialize for DownloadBucket {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for DownloadBucket {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Store metadata for one app. Dates stay raw until aggregation so that a
/// bad date only drops the app from the monthly series.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppMetadata {
    #[serde(default)]
    pub downloads_bucket: Option<DownloadBucket>,
    #[serde(default)]
    pub account_id: Option<String>,
    #[serde(default)]
    pub last_update: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusRecord {
    pub report: FeatureReport,
    /// `None` when the metadata has no entry for the app.
    pub metadata: Option<AppMetadata>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MetadataTable {
    pub rows: BTreeMap<String, AppMetadata>,
    /// One message per skipped row.
    pub warnings: Vec<String>,
}

fn non_empty(s: &str) -> Option<String> {
    let s = s.trim();
    (!s.is_empty()).then(|| s.to_string())
}

/// Reads `app_id,downloads_bucket,account_id,last_update`. Malformed rows are
/// skipped and reported; later duplicates of an app_id are skipped too.
pub fn read_metadata_csv<R: Read>(input: R) -> Result<MetadataTable, CorpusError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = reader.headers()?.clone();
    let col = |name: &'static str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or(CorpusError::MissingColumn(name))
    };
    let (id_col, bucket_col, account_col, date_col) =
        (col("app_id")?, col("downloads_bucket")?, col("account_id")?, col("last_update")?);
    let mut table = MetadataTable::default();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                table.warnings.push(format!("line {line}: {e}"));
                continue;
            }
        };
        let field = |c: usize| row.get(c).unwrap_or("");
        let Some(app_id) = non_empty(field(id_col)) else {
            table.warnings.push(format!("line {line}: empty app_id"));
            continue;
        };
        let downloads_bucket = match non_empty(field(bucket_col)) {
            None => None,
            Some(b) => match b.parse() {
                Ok(b) => Some(b),
                Err(e) => {
                    table.warnings.push(format!("line {line}: {e}"));
                    continue;
                }
            },
        };
        if table.rows.contains_key(&app_id) {
            table.warnings.push(format!("line {line}: duplicate app_id `{app_id}`"));
            continue;
        }
        table.rows.insert(
            app_id,
            AppMetadata {
                downloads_bucket,
                account_id: non_empty(field(account_col)),
                last_update: non_empty(field(date_col)),
            },
        );
    }
    Ok(table)
}

/// JSON sidecar: an object keyed by app_id.
pub fn read_metadata_json(bytes: &[u8]) -> Result<MetadataTable, CorpusError> {
    Ok(MetadataTable {
        rows: serde_json::from_slice(bytes)?,
        warnings: Vec::new(),
    })
}

/// How many leading package segments name a library scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScopeRule {
    #[serde(default = "default_max_segments")]
    pub max_segments: usize,
    /// Drop the last segment before capping, so `org.fmod.core` groups under
    /// `org.fmod`. A single-segment package is its own scope.
    #[serde(default = "default_drop_leaf")]
    pub drop_leaf: bool,
}

fn default_max_segments() -> usize {
    3
}

fn default_drop_leaf() -> bool {
    true
}

impl Default for ScopeRule {
    fn default() -> Self {
        ScopeRule {
            max_segments: default_max_segments(),
            drop_leaf: default_drop_leaf(),
        }
    }
}

impl ScopeRule {
    pub fn scope_of<'a>(&self, package: &'a str) -> &'a str {
        let depth = package.split('.').count();
        let keep = if self.drop_leaf { depth.saturating_sub(1) } else { depth };
        let keep = keep.min(self.max_segments).max(1);
        match package.match_indices('.').nth(keep - 1) {
            Some((i, _)) => &package[..i],
            None => package,
        }
    }
}

/// Apps-per-account brackets, each from its edge up to the next edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AccountEdges(pub Vec<u64>);

impl Default for AccountEdges {
    fn default() -> Self {
        AccountEdges(vec![1, 2, 10, 100, 250, 500])
    }
}

impl AccountEdges {
    fn bracket(&self, apps: u64) -> Option<usize> {
        self.0.iter().rposition(|e| apps >= *e)
    }

    /// `1` for a bracket holding a single value, otherwise `2+`-style.
    pub fn label(&self, i: usize) -> String {
        let e = self.0[i];
        match self.0.get(i + 1) {
            Some(next) if *next == e + 1 => e.to_string(),
            _ => format!("{e}+"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct Tally {
    apps: u64,
    /// Apps with a main-package view.
    rated: u64,
    main_flagged: u64,
    all_flagged: u64,
}

impl Tally {
    fn add(&mut self, report: &FeatureReport) {
        self.apps += 1;
        if let Some(main) = &report.main_package {
            self.rated += 1;
            self.main_flagged += u64::from(main.class_name_obfuscated);
        }
        self.all_flagged += u64::from(report.all_packages.class_name_obfuscated);
    }

    fn merge(&mut self, other: &Tally) {
        self.apps += other.apps;
        self.rated += other.rated;
        self.main_flagged += other.main_flagged;
        self.all_flagged += other.all_flagged;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct ScopeTally {
    packages: u64,
    apps: u64,
}

/// Mergeable aggregation state. `merge` is associative and commutative up
/// to the order of orphan candidates, which `finish` sorts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusAggregate {
    scope_rule: ScopeRule,
    apps: u64,
    metadata_missing: u64,
    missing_bucket: u64,
    missing_account: u64,
    missing_date: u64,
    bad_dates: u64,
    downloads: BTreeMap<DownloadBucket, Tally>,
    accounts: BTreeMap<String, Tally>,
    months: BTreeMap<(i32, u32), Tally>,
    scopes: BTreeMap<String, ScopeTally>,
    package_apps: BTreeMap<String, u64>,
    /// Apps without a flagged main view, with their obfuscated packages.
    orphan_candidates: Vec<(String, Vec<String>)>,
}

/// `YYYY-MM-DD`, optionally followed by a time part.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    let day = s.get(..10)?;
    let rest = &s[10..];
    if !(rest.is_empty() || rest.starts_with(['T', ' '])) {
        return None;
    }
    NaiveDate::parse_from_str(day, "%Y-%m-%d").ok()
}

impl CorpusAggregate {
    pub fn new(scope_rule: ScopeRule) -> Self {
        CorpusAggregate {
            scope_rule,
            ..Default::default()
        }
    }

    pub fn add(&mut self, record: &CorpusRecord) {
        let report = &record.report;
        self.apps += 1;

        match &record.metadata {
            None => self.metadata_missing += 1,
            Some(meta) => {
                match meta.downloads_bucket {
                    Some(b) => self.downloads.entry(b).or_default().add(report),
                    None => self.missing_bucket += 1,
                }
                match &meta.account_id {
                    Some(a) => self.accounts.entry(a.clone()).or_default().add(report),
                    None => self.missing_account += 1,
                }
                match meta.last_update.as_deref().map(parse_date) {
                    None => self.missing_date += 1,
                    Some(None) => self.bad_dates += 1,
                    Some(Some(d)) => self.months.entry((d.year(), d.month())).or_default().add(report),
                }
            }
        }

        let mut seen_scopes = BTreeSet::new();
        let mut obfuscated = Vec::new();
        for (package, detail) in &report.packages {
            *self.package_apps.entry(package.clone()).or_default() += 1;
            if !detail.flags.class_name_obfuscated {
                continue;
            }
            obfuscated.push(package.clone());
            let scope = self.scope_rule.scope_of(package);
            let tally = self.scopes.entry(scope.to_string()).or_default();
            tally.packages += 1;
            if seen_scopes.insert(scope) {
                tally.apps += 1;
            }
        }
        let main_flagged = report.main_package.is_some_and(|m| m.class_name_obfuscated);
        if !main_flagged && !obfuscated.is_empty() {
            self.orphan_candidates.push((report.app_id.clone(), obfuscated));
        }
    }

    pub fn merge(&mut self, other: CorpusAggregate) {
        self.apps += other.apps;
        self.metadata_missing += other.metadata_missing;
        self.missing_bucket += other.missing_bucket;
        self.missing_account += other.missing_account;
        self.missing_date += other.missing_date;
        self.bad_dates += other.bad_dates;
        for (k, v) in other.downloads {
            self.downloads.entry(k).or_default().merge(&v);
        }
        for (k, v) in other.accounts {
            self.accounts.entry(k).or_default().merge(&v);
        }
        for (k, v) in other.months {
            self.months.entry(k).or_default().merge(&v);
        }
        for (k, v) in other.scopes {
            let t = self.scopes.entry(k).or_default();
            t.packages += v.packages;
            t.apps += v.apps;
        }
        for (k, v) in other.package_apps {
            *self.package_apps.entry(k).or_default() += v;
        }
        self.orphan_candidates.extend(other.orphan_candidates);
    }

    pub fn finish(&self, options: &TableOptions) -> CorpusTables {
        let mut orphan_apps: Vec<String> = self
            .orphan_candidates
            .iter()
            .filter(|(_, pkgs)| pkgs.iter().any(|p| self.package_apps.get(p) == Some(&1)))
            .map(|(id, _)| id.clone())
            .collect();
        orphan_apps.sort();

        let mut scopes: Vec<ScopeStat> = self
            .scopes
            .iter()
            .map(|(scope, t)| ScopeStat {
                scope: scope.clone(),
                package_count: t.packages,
                unique_apps: t.apps,
            })
            .collect();
        scopes.sort_by(|a, b| {
            b.unique_apps
                .cmp(&a.unique_apps)
                .then(b.package_count.cmp(&a.package_count))
                .then_with(|| a.scope.cmp(&b.scope))
        });

        CorpusTables {
            apps: self.apps,
            skipped: Skipped {
                metadata_missing: self.metadata_missing,
                missing_bucket: self.missing_bucket,
                missing_account: self.missing_account,
                missing_date: self.missing_date,
                bad_dates: self.bad_dates,
            },
            scopes,
            downloads: self
                .downloads
                .iter()
                .map(|(b, t)| DownloadRow {
                    bucket: *b,
                    apps: t.apps,
                    null_main: t.apps - t.rated,
                    rated: t.rated,
                    flagged: t.main_flagged,
                    percent: percent(t.main_flagged, t.rated),
                })
                .collect(),
            accounts: self.account_rows(options),
            trend: self
                .months
                .iter()
                .map(|((y, m), t)| MonthRow {
                    month: format!("{y:04}-{m:02}"),
                    apps: t.apps,
                    all_flagged: t.all_flagged,
                    rated: t.rated,
                    main_flagged: t.main_flagged,
                    all_percent: percent(t.all_flagged, t.apps),
                    main_percent: percent(t.main_flagged, t.rated),
                })
                .collect(),
            orphans: OrphanBound {
                count: orphan_apps.len() as u64,
                percent: percent(orphan_apps.len() as u64, self.apps),
                apps: orphan_apps,
            },
        }
    }

    fn account_rows(&self, options: &TableOptions) -> Vec<AccountRow> {
        let edges = &options.account_edges;
        #[derive(Default)]
        struct Acc {
            accounts: u64,
            rates: Vec<f64>,
            flagged: u64,
            rated: u64,
        }
        let mut brackets: BTreeMap<usize, Acc> = BTreeMap::new();
        for t in self.accounts.values() {
            let Some(i) = edges.bracket(t.apps) else { continue };
            let acc = brackets.entry(i).or_default();
            acc.accounts += 1;
            acc.flagged += t.main_flagged;
            acc.rated += t.rated;
            if t.rated > 0 {
                acc.rates.push(t.main_flagged as f64 / t.rated as f64);
            }
        }
        brackets
            .into_iter()
            .map(|(i, acc)| {
                let macro_percent = (!acc.rates.is_empty())
                    .then(|| round2(100.0 * acc.rates.iter().sum::<f64>() / acc.rates.len() as f64));
                let micro_percent = percent(acc.flagged, acc.rated);
                AccountRow {
                    bucket: edges.label(i),
                    accounts: acc.accounts,
                    rated_accounts: acc.rates.len() as u64,
                    percent: if options.micro_accounts { micro_percent } else { macro_percent },
                    macro_percent,
                    micro_percent,
                }
            })
            .collect()
    }
}

/// Rounds to two decimals as the decimal rendering of `x` would.
fn round2(x: f64) -> f64 {
    format!("{x:.2}").parse().expect("formatted float parses")
}

fn percent(n: u64, d: u64) -> Option<f64> {
    (d > 0).then(|| round2(100.0 * n as f64 / d as f64))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableOptions {
    #[serde(default)]
    pub account_edges: AccountEdges,
    /// Report pooled rather than per-account averages in `percent`.
    #[serde(default)]
    pub micro_accounts: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeStat {
    pub scope: String,
    pub package_count: u64,
    pub unique_apps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownloadRow {
    pub bucket: DownloadBucket,
    pub apps: u64,
    /// Apps without a main-package view, left out of the rate.
    pub null_main: u64,
    pub rated: u64,
    pub flagged: u64,
    pub percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountRow {
    pub bucket: String,
    pub accounts: u64,
    /// Accounts with at least one app that has a main-package view.
    pub rated_accounts: u64,
    pub percent: Option<f64>,
    pub macro_percent: Option<f64>,
    pub micro_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthRow {
    pub month: String,
    pub apps: u64,
    pub all_flagged: u64,
    pub rated: u64,
    pub main_flagged: u64,
    pub all_percent: Option<f64>,
    pub main_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrphanBound {
    pub count: u64,
    /// Share of all apps in the corpus.
    pub percent: Option<f64>,
    pub apps: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub metadata_missing: u64,
    pub missing_bucket: u64,
    pub missing_account: u64,
    pub missing_date: u64,
    pub bad_dates: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusTables {
    pub apps: u64,
    pub skipped: Skipped,
    pub scopes: Vec<ScopeStat>,
    pub downloads: Vec<DownloadRow>,
    pub accounts: Vec<AccountRow>,
    pub trend: Vec<MonthRow>,
    pub orphans: OrphanBound,
}

fn opt(p: Option<f64>) -> String {
    p.map(|v| format!("{v:.2}")).unwrap_or_default()
}

fn render(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

impl CorpusTables {
    pub fn scopes_csv(&self) -> String {
        render(
            &["scope", "packages", "apps"],
            self.scopes
                .iter()
                .map(|s| vec![format!("{}.*", s.scope), s.package_count.to_string(), s.unique_apps.to_string()]),
        )
    }

    pub fn downloads_csv(&self) -> String {
        render(
            &["downloads", "apps", "null_main", "rated", "flagged", "percent"],
            self.downloads.iter().map(|r| {
                vec![
                    r.bucket.to_string(),
                    r.apps.to_string(),
                    r.null_main.to_string(),
                    r.rated.to_string(),
                    r.flagged.to_string(),
                    opt(r.percent),
                ]
            }),
        )
    }

    pub fn accounts_csv(&self) -> String {
        render(
            &["apps_per_account", "accounts", "rated_accounts", "percent"],
            self.accounts.iter().map(|r| {
                vec![
                    r.bucket.clone(),
                    r.accounts.to_string(),
                    r.rated_accounts.to_string(),
                    opt(r.percent),
                ]
            }),
        )
    }

    pub fn trend_csv(&self) -> String {
        render(
            &["month", "apps", "all_flagged", "all_percent", "rated", "main_flagged", "main_percent"],
            self.trend.iter().map(|r| {
                vec![
                    r.month.clone(),
                    r.apps.to_string(),
                    r.all_flagged.to_string(),
                    opt(r.all_percent),
                    r.rated.to_string(),
                    r.main_flagged.to_string(),
                    opt(r.main_percent),
                ]
            }),
        )
    }

    /// Two-column `month,percent` series for plotting.
    pub fn trend_series_csv(&self, main: bool) -> String {
        render(
            &["month", "percent"],
            self.trend.iter().filter_map(|r| {
                let p = if main { r.main_percent } else { r.all_percent };
                p.map(|p| vec![r.month.clone(), format!("{p:.2}")])
            }),
        )
    }

    pub fn orphans_csv(&self) -> String {
        render(
            &["apps", "orphan_apps", "percent"],
            [vec![self.apps.to_string(), self.orphans.count.to_string(), opt(self.orphans.percent)]],
        )
    }
}
