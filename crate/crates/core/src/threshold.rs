//! Brute-force search for the currently optimal count threshold, offline
//! over stored snapshots or online after refreshing reports through the
//! platform client.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::client::{ClientError, VtClient};
use crate::metrics::{confusion, ConfusionMatrix, MetricsError};
use crate::store::{DatasetManifest, SnapshotMap, Store, StoreError};
use crate::strategies::{apply_strategy, ThresholdStrategy};

/// Scoring function used to rank thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreMetric {
    #[default]
    Mcc,
    Accuracy,
}

impl ScoreMetric {
    pub fn score(self, cm: &ConfusionMatrix) -> f64 {
        match self {
            ScoreMetric::Mcc => cm.mcc(),
            ScoreMetric::Accuracy => cm.accuracy(),
        }
    }
}

impl FromStr for ScoreMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mcc" => Ok(ScoreMetric::Mcc),
            "accuracy" => Ok(ScoreMetric::Accuracy),
            other => Err(format!("unknown metric `{other}` (expected mcc or accuracy)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("sigma range is empty")]
    EmptyRange,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("every app failed to refresh; first failure: {first}")]
    AllRefreshesFailed { first: String },
}

/// Search outcome: the winning threshold plus the full score table for
/// inspection.
#[derive(Debug, Clone)]
pub struct ThresholdSearchResult {
    pub best_sigma: u32,
    pub best_score: f64,
    pub score_table: BTreeMap<u32, f64>,
}

/// Scores `CountAtLeast(sigma)` for every sigma in the range and returns the
/// best threshold. Ties go to the largest sigma.
pub fn find_optimal_threshold(
    snapshots: &SnapshotMap,
    truth: &DatasetManifest,
    metric: ScoreMetric,
    sigma_range: RangeInclusive<u32>,
) -> Result<ThresholdSearchResult, SearchError> {
    if truth.is_empty() || snapshots.is_empty() {
        return Err(SearchError::EmptyDataset);
    }
    if sigma_range.is_empty() {
        return Err(SearchError::EmptyRange);
    }
    for app_id in truth.app_ids() {
        if !snapshots.contains_key(app_id) {
            return Err(MetricsError::MissingSnapshot(app_id.to_owned()).into());
        }
    }

    let sigmas: Vec<u32> = sigma_range.collect();
    let score_table: BTreeMap<u32, f64> = sigmas
        .par_iter()
        .map(|&sigma| {
            let labels = apply_strategy(&ThresholdStrategy::CountAtLeast(sigma), snapshots);
            let cm = confusion(&labels, truth)?;
            Ok((sigma, metric.score(&cm)))
        })
        .collect::<Result<_, SearchError>>()?;

    // Ascending sweep with a >= update keeps the largest tied sigma.
    let mut best_sigma = *sigmas.first().expect("range is non-empty");
    let mut best_score = f64::NEG_INFINITY;
    for (&sigma, &score) in &score_table {
        if score >= best_score {
            best_score = score;
            best_sigma = sigma;
        }
    }
    Ok(ThresholdSearchResult { best_sigma, best_score, score_table })
}

/// Per-app outcome of the online refresh pass.
#[derive(Debug, Default)]
pub struct RefreshReport {
    pub refreshed: Vec<String>,
    /// (app_id, reason) for apps excluded from the search.
    pub failures: Vec<(String, String)>,
}

/// Online variant: for each app, issue a rescan, wait for the fresh report,
/// ingest it into the store, then run the offline search over the fresh
/// snapshots. Apps whose rescan or download fails are skipped and listed in
/// the refresh report.
pub fn refresh_and_find(
    client: &VtClient,
    store: &mut Store,
    truth: &DatasetManifest,
    metric: ScoreMetric,
    sigma_range: RangeInclusive<u32>,
) -> Result<(ThresholdSearchResult, RefreshReport), SearchError> {
    if truth.is_empty() {
        return Err(SearchError::EmptyDataset);
    }
    let mut report = RefreshReport::default();
    let mut fresh = SnapshotMap::new();
    for app_id in truth.app_ids() {
        let baseline = store.latest_scan_date(app_id);
        let outcome = client.rescan(app_id).and_then(|accepted| {
            if accepted {
                client.fetch_fresh_report(app_id, baseline)
            } else {
                Err(ClientError::RescanRefused { app_id: app_id.to_owned() })
            }
        });
        match outcome {
            Ok(snapshot) => {
                store.ingest_snapshot(&snapshot)?;
                fresh.insert(app_id.to_owned(), snapshot);
                report.refreshed.push(app_id.to_owned());
            }
            Err(e) => report.failures.push((app_id.to_owned(), e.to_string())),
        }
    }
    if fresh.is_empty() {
        let first = report
            .failures
            .first()
            .map(|(app, reason)| format!("{app}: {reason}"))
            .unwrap_or_else(|| "no apps in dataset".to_owned());
        return Err(SearchError::AllRefreshesFailed { first });
    }
    let truth = truth.restricted_to(report.refreshed.iter().map(String::as_str));
    let result = find_optimal_threshold(&fresh, &truth, metric, sigma_range)?;
    Ok((result, report))
}
