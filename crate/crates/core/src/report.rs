//! Canonical in-memory representation and parsing of multi-scanner scan
//! reports.
//!
//! The on-disk JSON mirrors the field names of VirusTotal v2 file reports
//! (`scan_date`, `first_seen`, `positives`, `total`, `scans`,
//! `times_submitted`, `tags`) so that real exports ingest unmodified.
//! Snapshots are immutable after construction and safe to share across
//! threads.

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One scanner's ternary judgment on one app.
///
/// The numeric encoding is fixed and used verbatim in feature vectors:
/// 1 for malicious, 0 for benign, and -1 for unknown (scanner absent from
/// the report).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Malicious,
    Benign,
    Unknown,
}

impl Verdict {
    pub fn encoding(self) -> f64 {
        match self {
            Verdict::Malicious => 1.0,
            Verdict::Benign => 0.0,
            Verdict::Unknown => -1.0,
        }
    }
}

/// Binary app label, either assigned by a strategy or taken as ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    Malicious,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Malicious => write!(f, "malicious"),
            Label::Benign => write!(f, "benign"),
        }
    }
}

/// Ground-truth label for one app, optionally carrying the malware type
/// (e.g. "Trojan-SMS") when the app is malicious.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthLabel {
    pub label: Label,
    pub malware_type: Option<String>,
    pub dex_date: Option<NaiveDate>,
}

/// One scanner's entry in a scan report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScannerVerdict {
    pub detected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
}

/// One dated scan report of one app.
///
/// `verdicts` preserves the input iteration order so that downstream feature
/// layouts are deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSnapshot {
    /// Content hash of the app (sha256 preferred; sha1/md5 accepted).
    pub app_id: String,
    pub scan_date: DateTime<Utc>,
    /// Date the app first appeared on the platform.
    pub first_seen: DateTime<Utc>,
    /// Archive last-modified date, when known.
    pub dex_date: Option<DateTime<Utc>>,
    /// Number of scanners deeming the app malicious, as reported.
    pub positives: u32,
    /// Number of scanners included in the report, as reported.
    pub total: u32,
    /// Platform-supplied change in `positives` versus the previous analysis.
    pub positives_delta: Option<i64>,
    pub times_submitted: u64,
    pub verdicts: IndexMap<String, ScannerVerdict>,
    pub permissions: BTreeSet<String>,
    pub tags: BTreeSet<String>,
}

impl ScanSnapshot {
    /// Ternary verdict of `scanner` on this report.
    ///
    /// Malicious iff the scanner is present with `detected == true`, benign
    /// iff present with `detected == false`, unknown iff absent.
    pub fn verdict_of(&self, scanner: &str) -> Verdict {
        match self.verdicts.get(scanner) {
            Some(v) if v.detected => Verdict::Malicious,
            Some(_) => Verdict::Benign,
            None => Verdict::Unknown,
        }
    }

    /// Number of verdict entries with `detected == true`.
    pub fn detected_count(&self) -> u32 {
        self.verdicts.values().filter(|v| v.detected).count() as u32
    }

    /// Serializes the snapshot back to the wire JSON object.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&RawReport::from_snapshot(self))
            .expect("snapshot serialization cannot fail")
    }
}

/// Non-fatal inconsistency observed while parsing a report.
///
/// The platform is known to churn the scanner set between analyses, so count
/// mismatches are recorded rather than rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReportWarning {
    /// `positives` disagrees with the number of detected verdict entries.
    PositivesMismatch { reported: u32, detected: u32 },
    /// `total` disagrees with the number of verdict entries.
    TotalMismatch { reported: u32, entries: u32 },
    /// `positives` exceeds `total`.
    PositivesExceedTotal { positives: u32, total: u32 },
    /// `first_seen` is later than `scan_date`.
    FirstSeenAfterScan,
}

impl fmt::Display for ReportWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReportWarning::PositivesMismatch { reported, detected } => write!(
                f,
                "positives={reported} but {detected} verdict entries have detected=true"
            ),
            ReportWarning::TotalMismatch { reported, entries } => {
                write!(f, "total={reported} but report carries {entries} verdict entries")
            }
            ReportWarning::PositivesExceedTotal { positives, total } => {
                write!(f, "positives={positives} exceeds total={total}")
            }
            ReportWarning::FirstSeenAfterScan => write!(f, "first_seen is after scan_date"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("malformed JSON: {0}")]
    MalformedJson(#[from] serde_json::Error),
    #[error("missing required field `{0}`")]
    MissingRequiredField(&'static str),
    #[error("invalid timestamp `{0}`")]
    InvalidTimestamp(String),
}

/// A parsed snapshot together with the consistency warnings it raised.
#[derive(Debug, Clone)]
pub struct ParsedReport {
    pub snapshot: ScanSnapshot,
    pub warnings: Vec<ReportWarning>,
}

/// Parses a single JSON scan-report object.
///
/// Missing optional fields stay absent; a missing `first_seen` defaults to
/// `scan_date`. Count inconsistencies become [`ReportWarning`]s, not errors.
pub fn parse_snapshot(json: &str) -> Result<ParsedReport, ParseError> {
    let raw: RawReport = serde_json::from_str(json)?;
    raw.into_parsed()
}

/// Accepts RFC 3339 (`2019-09-27T00:00:00Z`), the space-separated form used
/// by real platform exports (`2019-09-27 14:03:11`), and bare dates
/// (`2019-09-27`, midnight UTC).
pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>, ParseError> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.with_timezone(&Utc));
    }
    if let Ok(naive) = NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S") {
        return Ok(naive.and_utc());
    }
    if let Ok(date) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(date.and_hms_opt(0, 0, 0).expect("midnight is valid").and_utc());
    }
    Err(ParseError::InvalidTimestamp(s.to_owned()))
}

pub(crate) fn format_timestamp(dt: &DateTime<Utc>) -> String {
    dt.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Wire representation of a scan report. Unknown keys in real exports are
/// ignored on input; output keys follow the declared order.
#[derive(Debug, Serialize, Deserialize)]
struct RawReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sha1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    md5: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    app_id: Option<String>,
    #[serde(default)]
    scan_date: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    first_seen: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dex_date: Option<String>,
    #[serde(default)]
    positives: Option<u32>,
    #[serde(default)]
    total: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    positives_delta: Option<i64>,
    #[serde(default)]
    times_submitted: Option<u64>,
    #[serde(default)]
    scans: IndexMap<String, ScannerVerdict>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    permissions: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    tags: BTreeSet<String>,
}

impl RawReport {
    fn from_snapshot(s: &ScanSnapshot) -> Self {
        RawReport {
            sha256: Some(s.app_id.clone()),
            sha1: None,
            md5: None,
            app_id: None,
            scan_date: Some(format_timestamp(&s.scan_date)),
            first_seen: Some(format_timestamp(&s.first_seen)),
            dex_date: s.dex_date.as_ref().map(format_timestamp),
            positives: Some(s.positives),
            total: Some(s.total),
            positives_delta: s.positives_delta,
            times_submitted: Some(s.times_submitted),
            scans: s.verdicts.clone(),
            permissions: s.permissions.clone(),
            tags: s.tags.clone(),
        }
    }

    fn into_parsed(self) -> Result<ParsedReport, ParseError> {
        let app_id = self
            .sha256
            .or(self.sha1)
            .or(self.md5)
            .or(self.app_id)
            .filter(|id| !id.is_empty())
            .ok_or(ParseError::MissingRequiredField("app_id"))?;
        let scan_date = parse_timestamp(
            self.scan_date
                .as_deref()
                .ok_or(ParseError::MissingRequiredField("scan_date"))?,
        )?;
        let first_seen = match self.first_seen.as_deref() {
            Some(s) => parse_timestamp(s)?,
            None => scan_date,
        };
        let dex_date = self.dex_date.as_deref().map(parse_timestamp).transpose()?;
        let positives = self.positives.ok_or(ParseError::MissingRequiredField("positives"))?;
        let total = self.total.ok_or(ParseError::MissingRequiredField("total"))?;

        let snapshot = ScanSnapshot {
            app_id,
            scan_date,
            first_seen,
            dex_date,
            positives,
            total,
            positives_delta: self.positives_delta,
            times_submitted: self.times_submitted.unwrap_or(0),
            verdicts: self.scans,
            permissions: self.permissions,
            tags: self.tags,
        };

        let mut warnings = Vec::new();
        let detected = snapshot.detected_count();
        if detected != snapshot.positives {
            warnings.push(ReportWarning::PositivesMismatch {
                reported: snapshot.positives,
                detected,
            });
        }
        let entries = snapshot.verdicts.len() as u32;
        if entries != snapshot.total {
            warnings.push(ReportWarning::TotalMismatch { reported: snapshot.total, entries });
        }
        if snapshot.positives > snapshot.total {
            warnings.push(ReportWarning::PositivesExceedTotal {
                positives: snapshot.positives,
                total: snapshot.total,
            });
        }
        if snapshot.first_seen > snapshot.scan_date {
            warnings.push(ReportWarning::FirstSeenAfterScan);
        }
        Ok(ParsedReport { snapshot, warnings })
    }
}
