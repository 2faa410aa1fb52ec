//! Classification metrics and scanner reliability analytics.
//!
//! Malicious is the positive class throughout. Zero-denominator metrics
//! return 0, matching common MCC tooling. All functions here are pure over
//! immutable inputs and freely parallelizable per app or scanner.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, NaiveDate, Utc};
use thiserror::Error;

use crate::report::{Label, ScanSnapshot, Verdict};
use crate::store::{AppHistory, DatasetManifest, SnapshotMap};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no prediction for app `{0}`")]
    MissingPrediction(String),
    #[error("no snapshot for app `{0}`")]
    MissingSnapshot(String),
    #[error("dataset is empty after applying the malware-type filter")]
    EmptyDatasetAfterFilter,
    #[error("no app qualifies for the certainty window")]
    NoQualifyingApps,
}

/// Binary confusion matrix with malicious as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub true_positives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
    pub false_negatives: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionMatrix {
            true_positives: tp,
            false_positives: fp,
            true_negatives: tn,
            false_negatives: fn_,
        }
    }

    pub fn count(&mut self, predicted: Label, truth: Label) {
        match (predicted, truth) {
            (Label::Malicious, Label::Malicious) => self.true_positives += 1,
            (Label::Malicious, Label::Benign) => self.false_positives += 1,
            (Label::Benign, Label::Benign) => self.true_negatives += 1,
            (Label::Benign, Label::Malicious) => self.false_negatives += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }

    /// Matthews correlation coefficient in [-1, 1]; 0 when any factor of the
    /// denominator is 0.
    pub fn mcc(&self) -> f64 {
        let (tp, fp, tn, fn_) = (
            self.true_positives as f64,
            self.false_positives as f64,
            self.true_negatives as f64,
            self.false_negatives as f64,
        );
        let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if denom == 0.0 {
            return 0.0;
        }
        (tp * tn - fp * fn_) / denom.sqrt()
    }

    /// TP / P; 0 when there are no positives.
    pub fn recall(&self) -> f64 {
        ratio(self.true_positives, self.true_positives + self.false_negatives)
    }

    /// TN / N; 0 when there are no negatives.
    pub fn specificity(&self) -> f64 {
        ratio(self.true_negatives, self.true_negatives + self.false_positives)
    }

    /// (TP + TN) / (P + N); 0 on an empty matrix.
    pub fn accuracy(&self) -> f64 {
        ratio(self.true_positives + self.true_negatives, self.total())
    }
}

fn ratio(num: u64, denom: u64) -> f64 {
    if denom == 0 {
        0.0
    } else {
        num as f64 / denom as f64
    }
}

/// Tallies predictions against ground truth. Every manifest app must be
/// predicted; extra predictions are ignored.
pub fn confusion(
    predicted: &BTreeMap<String, Label>,
    truth: &DatasetManifest,
) -> Result<ConfusionMatrix, MetricsError> {
    let mut cm = ConfusionMatrix::default();
    for (app_id, gt) in truth.iter() {
        let p = predicted
            .get(app_id)
            .ok_or_else(|| MetricsError::MissingPrediction(app_id.to_owned()))?;
        cm.count(*p, gt.label);
    }
    Ok(cm)
}

/// Fraction of the (optionally type-filtered) dataset the scanner labels in
/// agreement with ground truth.
///
/// A verdict counts as a detection only when the scanner is present with
/// `detected == true`; an absent scanner therefore counts as incorrect on
/// malicious apps and correct on benign ones.
pub fn scanner_correctness(
    snapshots: &SnapshotMap,
    truth: &DatasetManifest,
    scanner: &str,
    type_filter: Option<&str>,
) -> Result<f64, MetricsError> {
    let mut evaluated = 0u64;
    let mut correct = 0u64;
    for (app_id, gt) in truth.iter() {
        if let Some(wanted) = type_filter {
            if gt.malware_type.as_deref() != Some(wanted) {
                continue;
            }
        }
        let snapshot = snapshots
            .get(app_id)
            .ok_or_else(|| MetricsError::MissingSnapshot(app_id.to_owned()))?;
        let detected = snapshot.verdict_of(scanner) == Verdict::Malicious;
        let agrees = match gt.label {
            Label::Malicious => detected,
            Label::Benign => !detected,
        };
        evaluated += 1;
        if agrees {
            correct += 1;
        }
    }
    if evaluated == 0 {
        return Err(MetricsError::EmptyDatasetAfterFilter);
    }
    Ok(correct as f64 / evaluated as f64)
}

/// Scanners whose mean correctness across the given dates is at least
/// `min_avg` (default 0.90 in the calling tools).
///
/// The candidate set is the union of scanner names appearing in any snapshot.
pub fn correct_scanner_set(
    dated_snapshots: &BTreeMap<NaiveDate, SnapshotMap>,
    truth: &DatasetManifest,
    min_avg: f64,
) -> Result<BTreeSet<String>, MetricsError> {
    let mut scanners: BTreeSet<String> = BTreeSet::new();
    for snapshots in dated_snapshots.values() {
        for snapshot in snapshots.values() {
            scanners.extend(snapshot.verdicts.keys().cloned());
        }
    }
    let n_dates = dated_snapshots.len();
    if n_dates == 0 {
        return Ok(BTreeSet::new());
    }
    let mut kept = BTreeSet::new();
    for scanner in scanners {
        let mut sum = 0.0;
        for snapshots in dated_snapshots.values() {
            sum += scanner_correctness(snapshots, truth, &scanner, None)?;
        }
        if sum / n_dates as f64 >= min_avg {
            kept.insert(scanner);
        }
    }
    Ok(kept)
}

/// Which report attribute anchors the certainty window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertaintyAnchor {
    FirstSeen,
    DexDate,
}

impl CertaintyAnchor {
    fn of(self, snapshot: &ScanSnapshot) -> Option<DateTime<Utc>> {
        match self {
            CertaintyAnchor::FirstSeen => Some(snapshot.first_seen),
            CertaintyAnchor::DexDate => snapshot.dex_date,
        }
    }
}

/// Mean/std of per-app certainty across qualifying apps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertaintyStats {
    pub mean: f64,
    pub std: f64,
    pub n_apps: usize,
}

/// Fraction of an app's snapshots in which `scanner` keeps the verdict it
/// gave in the app's earliest stored snapshot, aggregated over apps whose
/// earliest snapshot lies within `max_gap` of the anchor date.
///
/// The earliest stored snapshot defines the initial verdict and is itself
/// counted, so a constant verdict sequence scores exactly 1.
pub fn scanner_certainty(
    histories: &[AppHistory],
    scanner: &str,
    anchor: CertaintyAnchor,
    max_gap: Duration,
) -> Result<CertaintyStats, MetricsError> {
    let mut per_app = Vec::new();
    for history in histories {
        let Some(earliest) = history.snapshots.first() else { continue };
        let Some(anchor_date) = anchor.of(earliest) else { continue };
        if earliest.scan_date - anchor_date > max_gap {
            continue;
        }
        let initial = earliest.verdict_of(scanner);
        let kept = history.snapshots.iter().filter(|s| s.verdict_of(scanner) == initial).count();
        per_app.push(kept as f64 / history.snapshots.len() as f64);
    }
    if per_app.is_empty() {
        return Err(MetricsError::NoQualifyingApps);
    }
    let n = per_app.len() as f64;
    let mean = per_app.iter().sum::<f64>() / n;
    let variance = per_app.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
    Ok(CertaintyStats { mean, std: variance.sqrt(), n_apps: per_app.len() })
}

/// Result of the `positives_delta == 0` stability criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StabilityReport {
    /// Scan date of the first snapshot whose derived delta from the previous
    /// snapshot is zero; absent when no zero delta exists or the history has
    /// fewer than two snapshots.
    pub date: Option<DateTime<Utc>>,
    /// Whether every later derived delta is also zero.
    pub stable_thereafter: bool,
}

/// First date on which the report appeared to stabilize, and whether it
/// actually stayed stable afterwards. Deltas are derived from adjacent
/// stored `positives` values, not from the platform-supplied field.
pub fn stability_date(history: &AppHistory) -> StabilityReport {
    let deltas = history.derived_positives_delta();
    match deltas.iter().position(|&d| d == 0) {
        Some(i) => StabilityReport {
            date: Some(history.snapshots[i + 1].scan_date),
            stable_thereafter: deltas[i + 1..].iter().all(|&d| d == 0),
        },
        None => StabilityReport { date: None, stable_thereafter: false },
    }
}

/// Per-scanner reliability summary combining correctness over dates and
/// types with certainty over report histories.
#[derive(Debug, Clone)]
pub struct ScannerProfile {
    pub scanner: String,
    pub correctness_by_date: BTreeMap<NaiveDate, f64>,
    pub correctness_by_type: BTreeMap<String, f64>,
    pub certainty_mean: f64,
    pub certainty_std: f64,
}

impl ScannerProfile {
    pub fn build(
        dated_snapshots: &BTreeMap<NaiveDate, SnapshotMap>,
        histories: &[AppHistory],
        truth: &DatasetManifest,
        scanner: &str,
        anchor: CertaintyAnchor,
        max_gap: Duration,
    ) -> Result<ScannerProfile, MetricsError> {
        let mut correctness_by_date = BTreeMap::new();
        for (date, snapshots) in dated_snapshots {
            correctness_by_date
                .insert(*date, scanner_correctness(snapshots, truth, scanner, None)?);
        }
        let types: BTreeSet<String> =
            truth.iter().filter_map(|(_, l)| l.malware_type.clone()).collect();
        let mut correctness_by_type = BTreeMap::new();
        if let Some(snapshots) = dated_snapshots.values().next_back() {
            for ty in types {
                let rate = scanner_correctness(snapshots, truth, scanner, Some(&ty))?;
                correctness_by_type.insert(ty, rate);
            }
        }
        let certainty = scanner_certainty(histories, scanner, anchor, max_gap)?;
        Ok(ScannerProfile {
            scanner: scanner.to_owned(),
            correctness_by_date,
            correctness_by_type,
            certainty_mean: certainty.mean,
            certainty_std: certainty.std,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::GroundTruthLabel;
    use crate::testutil::{manifest_from, snapshot, snapshot_with_verdicts};

    #[test]
    fn confusion_counts_standard_cases() {
        let mut truth = DatasetManifest::new("t");
        for i in 0..10 {
            truth.insert(
                format!("mal{i}"),
                GroundTruthLabel { label: Label::Malicious, malware_type: None, dex_date: None },
            );
        }
        for i in 0..90 {
            truth.insert(
                format!("ben{i}"),
                GroundTruthLabel { label: Label::Benign, malware_type: None, dex_date: None },
            );
        }
        let all_correct: BTreeMap<String, Label> = truth
            .iter()
            .map(|(id, gt)| (id.to_owned(), gt.label))
            .collect();
        let cm = confusion(&all_correct, &truth).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(10, 0, 90, 0));
        assert_eq!(cm.mcc(), 1.0);
    }

    #[test]
    fn missing_prediction_is_an_error() {
        let truth = manifest_from(&[("a", Label::Malicious)]);
        let err = confusion(&BTreeMap::new(), &truth).unwrap_err();
        assert!(matches!(err, MetricsError::MissingPrediction(app) if app == "a"));
    }

    #[test]
    fn mcc_matches_reported_table_values() {
        // recall 0.70 row: 7 of 10 malicious detected, all 90 benign clean
        let cm = ConfusionMatrix::new(7, 0, 90, 3);
        assert!((cm.mcc() - 0.823).abs() < 5e-4, "mcc={}", cm.mcc());
        assert!((cm.recall() - 0.70).abs() < 1e-12);
        let cm = ConfusionMatrix::new(6, 0, 90, 4);
        assert!((cm.mcc() - 0.758).abs() < 5e-4, "mcc={}", cm.mcc());
        let cm = ConfusionMatrix::new(8, 0, 90, 2);
        assert!((cm.recall() - 0.80).abs() < 1e-12);
    }

    #[test]
    fn zero_denominator_convention() {
        let cm = ConfusionMatrix::new(0, 0, 5, 0);
        assert_eq!(cm.mcc(), 0.0);
        assert_eq!(cm.recall(), 0.0);
        assert_eq!(cm.specificity(), 1.0);
        let empty = ConfusionMatrix::default();
        assert_eq!(empty.mcc(), 0.0);
        assert_eq!(empty.recall(), 0.0);
        assert_eq!(empty.specificity(), 0.0);
        assert_eq!(empty.accuracy(), 0.0);
    }

    #[test]
    fn correctness_counts_detections_against_truth() {
        let truth = manifest_from(&[
            ("a", Label::Malicious),
            ("b", Label::Malicious),
            ("c", Label::Malicious),
            ("d", Label::Malicious),
        ]);
        let mut snapshots = SnapshotMap::new();
        for (i, id) in ["a", "b", "c", "d"].iter().enumerate() {
            let detects = i < 3; // scanner misses app d
            snapshots
                .insert((*id).to_owned(), snapshot_with_verdicts(id, "2019-09-27", &[("S", detects)]));
        }
        assert_eq!(scanner_correctness(&snapshots, &truth, "S", None).unwrap(), 0.75);
        // absent scanner counts as not detected
        assert_eq!(scanner_correctness(&snapshots, &truth, "Ghost", None).unwrap(), 0.0);
    }

    #[test]
    fn correctness_respects_type_filter() {
        let mut truth = DatasetManifest::new("t");
        truth.insert(
            "a",
            GroundTruthLabel {
                label: Label::Malicious,
                malware_type: Some("Ransom".into()),
                dex_date: None,
            },
        );
        truth.insert(
            "b",
            GroundTruthLabel {
                label: Label::Malicious,
                malware_type: Some("Trojan".into()),
                dex_date: None,
            },
        );
        let mut snapshots = SnapshotMap::new();
        snapshots.insert("a".into(), snapshot_with_verdicts("a", "2019-09-27", &[("S", true)]));
        snapshots.insert("b".into(), snapshot_with_verdicts("b", "2019-09-27", &[("S", false)]));
        assert_eq!(scanner_correctness(&snapshots, &truth, "S", Some("Ransom")).unwrap(), 1.0);
        assert_eq!(scanner_correctness(&snapshots, &truth, "S", Some("Trojan")).unwrap(), 0.0);
        let err = scanner_correctness(&snapshots, &truth, "S", Some("Adware")).unwrap_err();
        assert!(matches!(err, MetricsError::EmptyDatasetAfterFilter));
    }

    #[test]
    fn correctness_is_permutation_invariant() {
        let truth = manifest_from(&[("a", Label::Malicious), ("b", Label::Benign)]);
        let mut fwd = SnapshotMap::new();
        fwd.insert("a".into(), snapshot_with_verdicts("a", "2019-09-27", &[("S", true)]));
        fwd.insert("b".into(), snapshot_with_verdicts("b", "2019-09-27", &[("S", false)]));
        let rev: SnapshotMap = fwd.iter().rev().map(|(k, v)| (k.clone(), v.clone())).collect();
        assert_eq!(
            scanner_correctness(&fwd, &truth, "S", None).unwrap(),
            scanner_correctness(&rev, &truth, "S", None).unwrap()
        );
    }

    #[test]
    fn scanner_set_uses_mean_across_dates() {
        let truth = manifest_from(&[("a", Label::Malicious)]);
        let mut dated = BTreeMap::new();
        // Good detects on both dates, Flaky only on the first.
        for (date, flaky) in [("2019-01-01", true), ("2019-06-01", false)] {
            let mut snapshots = SnapshotMap::new();
            snapshots.insert(
                "a".into(),
                snapshot_with_verdicts("a", date, &[("Good", true), ("Flaky", flaky)]),
            );
            dated.insert(date.parse().unwrap(), snapshots);
        }
        let set = correct_scanner_set(&dated, &truth, 0.90).unwrap();
        assert!(set.contains("Good"));
        assert!(!set.contains("Flaky")); // mean 0.5
    }

    #[test]
    fn certainty_worked_example() {
        // verdict sequence {malicious, benign, malicious, malicious} -> 0.75
        let snapshots: Vec<ScanSnapshot> = [true, false, true, true]
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                snapshot_with_verdicts("a", &format!("2019-01-{:02}", i + 1), &[("S", d)])
            })
            .collect();
        let history = AppHistory { app_id: "a".into(), snapshots };
        let stats =
            scanner_certainty(&[history], "S", CertaintyAnchor::FirstSeen, Duration::days(365))
                .unwrap();
        assert_eq!(stats.mean, 0.75);
        assert_eq!(stats.n_apps, 1);
    }

    #[test]
    fn certainty_of_constant_sequence_is_one() {
        let snapshots: Vec<ScanSnapshot> = (1..=5)
            .map(|i| snapshot_with_verdicts("a", &format!("2019-01-{i:02}"), &[("S", true)]))
            .collect();
        let history = AppHistory { app_id: "a".into(), snapshots };
        let stats =
            scanner_certainty(&[history], "S", CertaintyAnchor::FirstSeen, Duration::days(365))
                .unwrap();
        assert_eq!(stats.mean, 1.0);
        assert_eq!(stats.std, 0.0);
    }

    #[test]
    fn certainty_window_filters_apps() {
        // App whose earliest snapshot is 100 days after first_seen.
        let mut far = snapshot("far", "2019-04-11", 0, 60);
        far.first_seen = crate::report::parse_timestamp("2019-01-01").unwrap();
        let far = AppHistory { app_id: "far".into(), snapshots: vec![far] };
        // App scanned the day it was first seen.
        let mut near = snapshot("near", "2019-01-01", 0, 60);
        near.first_seen = crate::report::parse_timestamp("2019-01-01").unwrap();
        let near = AppHistory { app_id: "near".into(), snapshots: vec![near] };

        let histories = vec![far, near];
        let wide =
            scanner_certainty(&histories, "S", CertaintyAnchor::FirstSeen, Duration::days(365))
                .unwrap();
        let narrow =
            scanner_certainty(&histories, "S", CertaintyAnchor::FirstSeen, Duration::days(7))
                .unwrap();
        assert_eq!(wide.n_apps, 2);
        assert_eq!(narrow.n_apps, 1);
        let err = scanner_certainty(&[], "S", CertaintyAnchor::FirstSeen, Duration::days(7))
            .unwrap_err();
        assert!(matches!(err, MetricsError::NoQualifyingApps));
    }

    #[test]
    fn dex_date_anchor_skips_apps_without_dex_date() {
        let with = AppHistory {
            app_id: "w".into(),
            snapshots: vec![{
                let mut s = snapshot("w", "2019-01-02", 0, 60);
                s.dex_date = Some(crate::report::parse_timestamp("2019-01-01").unwrap());
                s
            }],
        };
        let without =
            AppHistory { app_id: "wo".into(), snapshots: vec![snapshot("wo", "2019-01-02", 0, 60)] };
        let stats = scanner_certainty(
            &[with, without],
            "S",
            CertaintyAnchor::DexDate,
            Duration::days(30),
        )
        .unwrap();
        assert_eq!(stats.n_apps, 1);
    }

    #[test]
    fn stability_on_fluctuating_history() {
        let positives = [39u32, 39, 31, 33, 34, 30, 32, 32, 31, 32, 33, 25, 30, 29, 29];
        let dates = [
            "2018-12-03", "2019-01-08", "2019-04-12", "2019-04-25", "2019-05-09", "2019-05-23",
            "2019-06-07", "2019-06-21", "2019-07-05", "2019-07-19", "2019-08-02", "2019-08-16",
            "2019-08-30", "2019-09-13", "2019-09-27",
        ];
        let snapshots: Vec<ScanSnapshot> = positives
            .iter()
            .zip(dates)
            .map(|(&p, d)| snapshot("app", d, p, 60))
            .collect();
        let report = stability_date(&AppHistory { app_id: "app".into(), snapshots });
        assert_eq!(report.date.unwrap().date_naive().to_string(), "2019-01-08");
        assert!(!report.stable_thereafter);
    }

    #[test]
    fn stability_boundaries() {
        let constant: Vec<ScanSnapshot> =
            (1..=3).map(|i| snapshot("c", &format!("2019-01-0{i}"), 5, 60)).collect();
        let report = stability_date(&AppHistory { app_id: "c".into(), snapshots: constant });
        assert_eq!(report.date.unwrap().date_naive().to_string(), "2019-01-02");
        assert!(report.stable_thereafter);

        let single = AppHistory { app_id: "s".into(), snapshots: vec![snapshot("s", "2019-01-01", 5, 60)] };
        let report = stability_date(&single);
        assert!(report.date.is_none());
    }

    #[test]
    fn stable_thereafter_implies_constant_positives() {
        let histories = [
            vec![5u32, 5, 5],
            vec![5, 4, 4, 4],
            vec![5, 5, 4],
            vec![3, 2, 1],
        ];
        for positives in histories {
            let snapshots: Vec<ScanSnapshot> = positives
                .iter()
                .enumerate()
                .map(|(i, &p)| snapshot("a", &format!("2019-01-{:02}", i + 1), p, 60))
                .collect();
            let history = AppHistory { app_id: "a".into(), snapshots };
            let report = stability_date(&history);
            if report.stable_thereafter {
                let date = report.date.unwrap();
                let from = history.snapshots.iter().position(|s| s.scan_date == date).unwrap();
                let p0 = history.snapshots[from].positives;
                assert!(history.snapshots[from..].iter().all(|s| s.positives == p0));
            }
        }
    }
}
