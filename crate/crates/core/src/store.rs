//! Append-only snapshot store and dataset manifests.
//!
//! Layout under the store root: one JSONL file per app beneath `reports/`,
//! addressed by the first two characters of the app id, plus `index.json`
//! mapping app ids to their files and known scan dates. Files are only ever
//! appended to; duplicate (app_id, scan_date) pairs are skipped on ingest.
//!
//! Concurrency: any number of readers over a shared `&Store`; ingestion
//! takes `&mut self` and is serialized by the borrow checker.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::{self, GroundTruthLabel, Label, ScanSnapshot};

/// Apps keyed by id, one snapshot each — the shape most operations consume.
pub type SnapshotMap = BTreeMap<String, ScanSnapshot>;

const INDEX_FILE: &str = "index.json";
const REPORTS_DIR: &str = "reports";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown app `{0}`")]
    UnknownApp(String),
    #[error("no snapshot of `{app_id}` on or before {as_of}")]
    NoSnapshotBefore { app_id: String, as_of: NaiveDate },
    #[error("corrupt store file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl StoreError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        StoreError::Io { path: path.to_owned(), source }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct IndexEntry {
    path: String,
    scan_dates: BTreeSet<DateTime<Utc>>,
}

/// Append-only store of scan snapshots keyed by (app_id, scan_date).
#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    index: BTreeMap<String, IndexEntry>,
}

/// Outcome of one ingest batch.
#[derive(Debug, Default)]
pub struct IngestReport {
    pub accepted: usize,
    pub duplicates: usize,
    /// Line-scoped parse failures and report inconsistencies.
    pub warnings: Vec<String>,
}

impl Store {
    /// Opens (or initializes) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Store, StoreError> {
        let root = root.into();
        fs::create_dir_all(root.join(REPORTS_DIR)).map_err(|e| StoreError::io(&root, e))?;
        let index_path = root.join(INDEX_FILE);
        let index = if index_path.exists() {
            let text =
                fs::read_to_string(&index_path).map_err(|e| StoreError::io(&index_path, e))?;
            serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
                path: index_path.clone(),
                reason: e.to_string(),
            })?
        } else {
            BTreeMap::new()
        };
        Ok(Store { root, index })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// All known app ids, sorted.
    pub fn app_ids(&self) -> Vec<String> {
        self.index.keys().cloned().collect()
    }

    pub fn contains(&self, app_id: &str) -> bool {
        self.index.contains_key(app_id)
    }

    /// Most recent known scan date of `app_id`, if any.
    pub fn latest_scan_date(&self, app_id: &str) -> Option<DateTime<Utc>> {
        self.index.get(app_id).and_then(|e| e.scan_dates.iter().next_back().copied())
    }

    /// Ingests one snapshot. Returns `false` when the (app_id, scan_date)
    /// pair is already stored.
    pub fn ingest_snapshot(&mut self, snapshot: &ScanSnapshot) -> Result<bool, StoreError> {
        let added = self.append_snapshot(snapshot)?;
        if added {
            self.flush_index()?;
        }
        Ok(added)
    }

    /// Ingests a JSONL stream, one report object per line. Parse failures are
    /// collected as warnings and do not abort the batch.
    pub fn ingest(&mut self, reader: impl BufRead) -> Result<IngestReport, StoreError> {
        let mut out = IngestReport::default();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| StoreError::io(&self.root, e))?;
            if line.trim().is_empty() {
                continue;
            }
            match report::parse_snapshot(&line) {
                Ok(parsed) => {
                    for w in &parsed.warnings {
                        out.warnings.push(format!(
                            "line {}: app {}: {w}",
                            lineno + 1,
                            parsed.snapshot.app_id
                        ));
                    }
                    if self.append_snapshot(&parsed.snapshot)? {
                        out.accepted += 1;
                    } else {
                        out.duplicates += 1;
                    }
                }
                Err(e) => out.warnings.push(format!("line {}: {e}", lineno + 1)),
            }
        }
        self.flush_index()?;
        Ok(out)
    }

    fn append_snapshot(&mut self, snapshot: &ScanSnapshot) -> Result<bool, StoreError> {
        if let Some(entry) = self.index.get(&snapshot.app_id) {
            if entry.scan_dates.contains(&snapshot.scan_date) {
                return Ok(false);
            }
        }
        let rel_path = match self.index.get(&snapshot.app_id) {
            Some(entry) => entry.path.clone(),
            None => relative_report_path(&snapshot.app_id),
        };
        let path = self.root.join(&rel_path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| StoreError::io(parent, e))?;
        }
        let mut file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| StoreError::io(&path, e))?;
        writeln!(file, "{}", snapshot.to_json()).map_err(|e| StoreError::io(&path, e))?;
        self.index
            .entry(snapshot.app_id.clone())
            .or_insert_with(|| IndexEntry { path: rel_path, scan_dates: BTreeSet::new() })
            .scan_dates
            .insert(snapshot.scan_date);
        Ok(true)
    }

    fn flush_index(&self) -> Result<(), StoreError> {
        let path = self.root.join(INDEX_FILE);
        let text = serde_json::to_string_pretty(&self.index).expect("index serializes");
        fs::write(&path, text).map_err(|e| StoreError::io(&path, e))
    }

    /// Full scan-report history of `app_id`, ordered by scan date.
    pub fn history(&self, app_id: &str) -> Result<AppHistory, StoreError> {
        let entry =
            self.index.get(app_id).ok_or_else(|| StoreError::UnknownApp(app_id.to_owned()))?;
        let path = self.root.join(&entry.path);
        let text = fs::read_to_string(&path).map_err(|e| StoreError::io(&path, e))?;
        let mut snapshots = Vec::new();
        let mut seen = BTreeSet::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed = report::parse_snapshot(line).map_err(|e| StoreError::Corrupt {
                path: path.clone(),
                reason: e.to_string(),
            })?;
            if parsed.snapshot.app_id == app_id && seen.insert(parsed.snapshot.scan_date) {
                snapshots.push(parsed.snapshot);
            }
        }
        snapshots.sort_by_key(|s| s.scan_date);
        Ok(AppHistory { app_id: app_id.to_owned(), snapshots })
    }

    /// Latest snapshot of `app_id` with scan_date on or before `as_of`
    /// (day granularity).
    pub fn snapshot_at(&self, app_id: &str, as_of: NaiveDate) -> Result<ScanSnapshot, StoreError> {
        let history = self.history(app_id)?;
        history
            .snapshots
            .into_iter()
            .filter(|s| s.scan_date.date_naive() <= as_of)
            .next_back()
            .ok_or_else(|| StoreError::NoSnapshotBefore { app_id: app_id.to_owned(), as_of })
    }

    /// `snapshot_at` over a set of apps, in sorted app order.
    pub fn snapshots_at<'a>(
        &self,
        app_ids: impl IntoIterator<Item = &'a str>,
        as_of: NaiveDate,
    ) -> Result<SnapshotMap, StoreError> {
        let mut map = BTreeMap::new();
        for id in app_ids {
            map.insert(id.to_owned(), self.snapshot_at(id, as_of)?);
        }
        Ok(map)
    }
}

fn relative_report_path(app_id: &str) -> String {
    let safe: String = app_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect();
    let prefix: String = safe.chars().take(2).collect();
    let prefix = if prefix.is_empty() { "__".to_owned() } else { prefix };
    format!("{REPORTS_DIR}/{prefix}/{safe}.jsonl")
}

/// Time-ordered snapshots of one app.
#[derive(Debug, Clone)]
pub struct AppHistory {
    pub app_id: String,
    /// Strictly increasing by scan date.
    pub snapshots: Vec<ScanSnapshot>,
}

/// Disagreement between a platform-supplied `positives_delta` and the delta
/// derived from adjacent stored `positives` values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaMismatch {
    /// Index of the later snapshot in the history.
    pub index: usize,
    pub scan_date: DateTime<Utc>,
    pub recorded: i64,
    pub derived: i64,
}

impl AppHistory {
    /// Differences of adjacent stored `positives` values
    /// (length = number of snapshots − 1).
    pub fn derived_positives_delta(&self) -> Vec<i64> {
        self.snapshots
            .windows(2)
            .map(|w| i64::from(w[1].positives) - i64::from(w[0].positives))
            .collect()
    }

    /// Platform-supplied deltas as stored, one per snapshot.
    pub fn recorded_positives_delta(&self) -> Vec<Option<i64>> {
        self.snapshots.iter().map(|s| s.positives_delta).collect()
    }

    /// Reports snapshots whose recorded delta disagrees with the derived one.
    /// The platform computes deltas against analyses we may never have seen,
    /// so both series are kept and compared rather than reconciled.
    pub fn delta_mismatches(&self) -> Vec<DeltaMismatch> {
        let derived = self.derived_positives_delta();
        self.snapshots
            .iter()
            .enumerate()
            .skip(1)
            .filter_map(|(i, s)| {
                let recorded = s.positives_delta?;
                let derived = derived[i - 1];
                (recorded != derived).then(|| DeltaMismatch {
                    index: i,
                    scan_date: s.scan_date,
                    recorded,
                    derived,
                })
            })
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: unknown label string `{value}`")]
    UnknownLabelString { row: usize, value: String },
    #[error("row {row}: duplicate app id `{app_id}`")]
    DuplicateAppId { row: usize, app_id: String },
    #[error("row {row}: malware_type given for a benign app")]
    MalwareTypeOnBenign { row: usize },
    #[error("row {row}: invalid dex_date `{value}`")]
    InvalidDexDate { row: usize, value: String },
    #[error("manifest is empty")]
    Empty,
    #[error("manifest is missing the `{0}` column")]
    MissingColumn(&'static str),
}

/// App ids with their ground-truth labels.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub name: String,
    entries: IndexMap<String, GroundTruthLabel>,
}

impl DatasetManifest {
    pub fn new(name: impl Into<String>) -> Self {
        DatasetManifest { name: name.into(), entries: IndexMap::new() }
    }

    pub fn insert(&mut self, app_id: impl Into<String>, label: GroundTruthLabel) {
        self.entries.insert(app_id.into(), label);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, app_id: &str) -> Option<&GroundTruthLabel> {
        self.entries.get(app_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &GroundTruthLabel)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn app_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Manifest restricted to `keep`, preserving entry order.
    pub fn restricted_to<'a>(&self, keep: impl IntoIterator<Item = &'a str>) -> DatasetManifest {
        let keep: BTreeSet<&str> = keep.into_iter().collect();
        DatasetManifest {
            name: self.name.clone(),
            entries: self
                .entries
                .iter()
                .filter(|(id, _)| keep.contains(id.as_str()))
                .map(|(id, l)| (id.clone(), l.clone()))
                .collect(),
        }
    }
}

/// Loads a manifest from CSV with header `app_id,label[,malware_type][,dex_date]`.
pub fn load_manifest(
    reader: impl std::io::Read,
    name: impl Into<String>,
) -> Result<DatasetManifest, ManifestError> {
    let mut csv_reader = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    let col = |name: &'static str| headers.iter().position(|h| h == name);
    let app_col = col("app_id").ok_or(ManifestError::MissingColumn("app_id"))?;
    let label_col = col("label").ok_or(ManifestError::MissingColumn("label"))?;
    let type_col = col("malware_type");
    let dex_col = col("dex_date");

    let mut manifest = DatasetManifest::new(name);
    for (i, record) in csv_reader.records().enumerate() {
        let row = i + 2; // 1-based, after the header
        let record = record?;
        let field = |idx: Option<usize>| {
            idx.and_then(|c| record.get(c)).map(str::trim).filter(|v| !v.is_empty())
        };
        let app_id = field(Some(app_col)).unwrap_or_default().to_owned();
        let label_str = field(Some(label_col)).unwrap_or_default();
        let label = match label_str.to_ascii_lowercase().as_str() {
            "malicious" => Label::Malicious,
            "benign" => Label::Benign,
            other => {
                return Err(ManifestError::UnknownLabelString { row, value: other.to_owned() })
            }
        };
        let malware_type = field(type_col).map(str::to_owned);
        if malware_type.is_some() && label == Label::Benign {
            return Err(ManifestError::MalwareTypeOnBenign { row });
        }
        let dex_date = field(dex_col)
            .map(|v| {
                v.parse::<NaiveDate>()
                    .map_err(|_| ManifestError::InvalidDexDate { row, value: v.to_owned() })
            })
            .transpose()?;
        if manifest.entries.contains_key(&app_id) {
            return Err(ManifestError::DuplicateAppId { row, app_id });
        }
        manifest.insert(app_id, GroundTruthLabel { label, malware_type, dex_date });
    }
    if manifest.is_empty() {
        return Err(ManifestError::Empty);
    }
    Ok(manifest)
}

/// Loads a manifest file, naming the dataset after the file stem.
pub fn load_manifest_file(path: impl AsRef<Path>) -> Result<DatasetManifest, ManifestError> {
    let path = path.as_ref();
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_owned();
    load_manifest(fs::File::open(path)?, name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn report_line(app: &str, date: &str, positives: u32) -> String {
        let scans: Vec<String> =
            (0..positives).map(|i| format!(r#""S{i:02}":{{"detected":true}}"#)).collect();
        format!(
            r#"{{"sha256":"{app}","scan_date":"{date}","first_seen":"2015-05-11","positives":{positives},"total":{positives},"scans":{{{}}}}}"#,
            scans.join(",")
        )
    }

    #[test]
    fn ingest_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path()).unwrap();
        let lines: Vec<String> = (1..=15)
            .map(|i| report_line("app", &format!("2019-01-{i:02}"), i))
            .collect();
        let body = lines.join("\n");

        let first = store.ingest(Cursor::new(body.clone())).unwrap();
        assert_eq!(first.accepted, 15);
        assert_eq!(first.duplicates, 0);

        let again = store.ingest(Cursor::new(body)).unwrap();
        assert_eq!(again.accepted, 0);
        assert_eq!(again.duplicates, 15);
        assert_eq!(store.history("app").unwrap().snapshots.len(), 15);
    }

    #[test]
    fn malformed_lines_are_collected_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path()).unwrap();
        let mut lines: Vec<String> =
            (1..=9).map(|i| report_line(&format!("app{i}"), "2019-01-01", i)).collect();
        lines.insert(4, "{not json".to_owned());
        let report = store.ingest(Cursor::new(lines.join("\n"))).unwrap();
        assert_eq!(report.accepted, 9);
        assert_eq!(report.warnings.len(), 1);
        assert!(report.warnings[0].starts_with("line 5:"));
    }

    #[test]
    fn history_is_insertion_order_independent() {
        let dates = ["2019-03-01", "2019-01-01", "2019-02-01", "2019-04-01"];
        let shuffled = ["2019-02-01", "2019-04-01", "2019-01-01", "2019-03-01"];
        let build = |order: &[&str]| {
            let dir = tempfile::tempdir().unwrap();
            let mut store = Store::open(dir.path()).unwrap();
            for (i, d) in order.iter().enumerate() {
                let parsed = report::parse_snapshot(&report_line("app", d, i as u32)).unwrap();
                store.ingest_snapshot(&parsed.snapshot).unwrap();
            }
            (dir, store.history("app").unwrap())
        };
        let (_d1, a) = build(&dates);
        let (_d2, b) = build(&shuffled);
        let dates_a: Vec<_> = a.snapshots.iter().map(|s| s.scan_date).collect();
        let dates_b: Vec<_> = b.snapshots.iter().map(|s| s.scan_date).collect();
        assert_eq!(dates_a, dates_b);
        assert!(dates_a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn store_round_trips_across_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let serialized_before;
        {
            let mut store = Store::open(dir.path()).unwrap();
            for i in 1..=3 {
                let parsed = report::parse_snapshot(&report_line(
                    "app",
                    &format!("2019-0{i}-01"),
                    i,
                ))
                .unwrap();
                store.ingest_snapshot(&parsed.snapshot).unwrap();
            }
            serialized_before = store
                .history("app")
                .unwrap()
                .snapshots
                .iter()
                .map(ScanSnapshot::to_json)
                .collect::<Vec<_>>();
        }
        let store = Store::open(dir.path()).unwrap();
        let serialized_after: Vec<_> =
            store.history("app").unwrap().snapshots.iter().map(ScanSnapshot::to_json).collect();
        assert_eq!(serialized_before, serialized_after);
    }

    #[test]
    fn snapshot_at_picks_latest_on_or_before() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path()).unwrap();
        for (d, p) in [("2019-06-07", 32), ("2019-06-21", 32), ("2019-07-05", 31)] {
            let parsed = report::parse_snapshot(&report_line("app", d, p)).unwrap();
            store.ingest_snapshot(&parsed.snapshot).unwrap();
        }
        let as_of = |s: &str| s.parse::<NaiveDate>().unwrap();
        let snap = store.snapshot_at("app", as_of("2019-06-30")).unwrap();
        assert_eq!(snap.scan_date.date_naive().to_string(), "2019-06-21");
        // boundary: as_of equals the earliest scan date
        let snap = store.snapshot_at("app", as_of("2019-06-07")).unwrap();
        assert_eq!(snap.scan_date.date_naive().to_string(), "2019-06-07");
        let err = store.snapshot_at("app", as_of("2019-06-01")).unwrap_err();
        assert!(matches!(err, StoreError::NoSnapshotBefore { .. }));
        let err = store.snapshot_at("ghost", as_of("2019-06-30")).unwrap_err();
        assert!(matches!(err, StoreError::UnknownApp(_)));
    }

    #[test]
    fn derived_deltas_are_adjacent_differences() {
        let positives = [39u32, 39, 31, 33, 34, 30, 32, 32, 31, 32, 33, 25, 30, 29, 29];
        let snapshots: Vec<ScanSnapshot> = positives
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                report::parse_snapshot(&report_line("app", &format!("2019-01-{:02}", i + 1), p))
                    .unwrap()
                    .snapshot
            })
            .collect();
        let history = AppHistory { app_id: "app".into(), snapshots };
        assert_eq!(
            history.derived_positives_delta(),
            vec![0, -8, 2, 1, -4, 2, 0, -1, 1, 1, -8, 5, -1, 0]
        );
        let single = AppHistory { app_id: "app".into(), snapshots: history.snapshots[..1].to_vec() };
        assert!(single.derived_positives_delta().is_empty());
        let constant: Vec<ScanSnapshot> = (1..=3)
            .map(|i| {
                report::parse_snapshot(&report_line("c", &format!("2019-01-0{i}"), 7))
                    .unwrap()
                    .snapshot
            })
            .collect();
        let constant = AppHistory { app_id: "c".into(), snapshots: constant };
        assert_eq!(constant.derived_positives_delta(), vec![0, 0]);
    }

    #[test]
    fn manifest_parses_labels_and_types() {
        let csv = "app_id,label,malware_type\nabc,malicious,Ransom\ndef,benign,\n";
        let manifest = load_manifest(Cursor::new(csv), "test").unwrap();
        assert_eq!(manifest.len(), 2);
        let abc = manifest.get("abc").unwrap();
        assert_eq!(abc.label, Label::Malicious);
        assert_eq!(abc.malware_type.as_deref(), Some("Ransom"));
        let def = manifest.get("def").unwrap();
        assert_eq!(def.label, Label::Benign);
        assert!(def.malware_type.is_none());
    }

    #[test]
    fn manifest_rejects_bad_rows() {
        let err = load_manifest(Cursor::new("app_id,label\nabc,suspicious\n"), "t").unwrap_err();
        assert!(matches!(err, ManifestError::UnknownLabelString { .. }));
        let err = load_manifest(Cursor::new("app_id,label\nabc,benign\nabc,malicious\n"), "t")
            .unwrap_err();
        assert!(matches!(err, ManifestError::DuplicateAppId { .. }));
        let err = load_manifest(
            Cursor::new("app_id,label,malware_type\nabc,benign,Trojan\n"),
            "t",
        )
        .unwrap_err();
        assert!(matches!(err, ManifestError::MalwareTypeOnBenign { .. }));
        let err = load_manifest(Cursor::new("app_id,label\n"), "t").unwrap_err();
        assert!(matches!(err, ManifestError::Empty));
    }

    #[test]
    fn manifest_of_one_hundred_rows() {
        let mut csv = String::from("app_id,label\n");
        for i in 0..10 {
            csv.push_str(&format!("mal{i:02},malicious\n"));
        }
        for i in 0..90 {
            csv.push_str(&format!("ben{i:02},benign\n"));
        }
        let manifest = load_manifest(Cursor::new(csv), "hand-labeled-2019").unwrap();
        assert_eq!(manifest.len(), 100);
        let malicious = manifest.iter().filter(|(_, l)| l.label == Label::Malicious).count();
        assert_eq!(malicious, 10);
    }
}
