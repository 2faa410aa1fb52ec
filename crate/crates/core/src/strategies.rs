//! Threshold-based labeling strategies and the labeling interface shared by
//! all strategies, trained forests included.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::report::{Label, ScanSnapshot, Verdict};
use crate::store::SnapshotMap;

/// The ten scanners of the classic subset strategy, with its threshold of
/// two detections.
pub const DREBIN_SCANNERS: [&str; 10] = [
    "AVG",
    "Avira",
    "BitDefender",
    "ClamAV",
    "ESET-NOD32",
    "F-Secure",
    "Kaspersky",
    "McAfee",
    "Panda",
    "Sophos",
];

/// Anything that can label a scan snapshot as malicious or benign.
pub trait LabelingStrategy {
    fn label(&self, snapshot: &ScanSnapshot) -> Label;

    /// Short, stable name for result tables.
    fn name(&self) -> String;
}

/// Count-, ratio-, and subset-threshold labeling strategies.
#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdStrategy {
    /// Malicious iff `positives >= sigma`.
    CountAtLeast(u32),
    /// Malicious iff `total > 0` and `positives / total >= ratio`.
    RatioAtLeast(f64),
    /// Malicious iff at least `min_detections` of the listed scanners are
    /// present with a detection. Unknown verdicts never count.
    ScannerSubset { name: String, scanners: Vec<String>, min_detections: u32 },
}

impl ThresholdStrategy {
    /// The classic ten-scanner subset with a threshold of two.
    pub fn drebin() -> ThresholdStrategy {
        ThresholdStrategy::ScannerSubset {
            name: "drebin".to_owned(),
            scanners: DREBIN_SCANNERS.iter().map(|s| (*s).to_owned()).collect(),
            min_detections: 2,
        }
    }
}

impl LabelingStrategy for ThresholdStrategy {
    fn label(&self, snapshot: &ScanSnapshot) -> Label {
        let malicious = match self {
            ThresholdStrategy::CountAtLeast(sigma) => snapshot.positives >= *sigma,
            ThresholdStrategy::RatioAtLeast(ratio) => {
                snapshot.total > 0
                    && f64::from(snapshot.positives) / f64::from(snapshot.total) >= *ratio
            }
            ThresholdStrategy::ScannerSubset { scanners, min_detections, .. } => {
                let detections = scanners
                    .iter()
                    .filter(|s| snapshot.verdict_of(s) == Verdict::Malicious)
                    .count();
                detections as u32 >= *min_detections
            }
        };
        if malicious {
            Label::Malicious
        } else {
            Label::Benign
        }
    }

    fn name(&self) -> String {
        match self {
            ThresholdStrategy::CountAtLeast(sigma) => format!("vt>={sigma}"),
            ThresholdStrategy::RatioAtLeast(ratio) => format!("vt>={}%", ratio * 100.0),
            ThresholdStrategy::ScannerSubset { name, .. } => format!("subset:{name}"),
        }
    }
}

/// Labels every snapshot in the map; pure and pointwise.
pub fn apply_strategy<S: LabelingStrategy + ?Sized>(
    strategy: &S,
    snapshots: &SnapshotMap,
) -> BTreeMap<String, Label> {
    snapshots.iter().map(|(id, s)| (id.clone(), strategy.label(s))).collect()
}

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("unrecognized strategy spec `{0}` (expected vt>=N, vt>=P%, subset:drebin, or subset:FILE[:k=N])")]
    UnrecognizedSpec(String),
    #[error("count threshold {0} outside the supported range 1..=60")]
    ThresholdOutOfRange(u32),
    #[error("ratio threshold {0}% outside the supported range (0, 100]")]
    RatioOutOfRange(f64),
    #[error("subset threshold k={k} exceeds the {n} listed scanners")]
    SubsetThresholdTooLarge { k: u32, n: usize },
    #[error("scanner list `{path}` is empty")]
    EmptyScannerList { path: String },
    #[error("cannot read scanner list `{path}`: {source}")]
    ScannerListIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Parses a strategy spec string: `vt>=4`, `vt>=50%`, `subset:drebin`, or
/// `subset:FILE[:k=N]` where FILE lists one scanner per line.
pub fn parse_strategy(spec: &str) -> Result<ThresholdStrategy, StrategyError> {
    let spec = spec.trim();
    if let Some(rest) = spec.strip_prefix("vt>=") {
        if let Some(percent) = rest.strip_suffix('%') {
            let p: f64 = percent
                .trim()
                .parse()
                .map_err(|_| StrategyError::UnrecognizedSpec(spec.to_owned()))?;
            if p <= 0.0 || p > 100.0 {
                return Err(StrategyError::RatioOutOfRange(p));
            }
            return Ok(ThresholdStrategy::RatioAtLeast(p / 100.0));
        }
        let sigma: u32 =
            rest.trim().parse().map_err(|_| StrategyError::UnrecognizedSpec(spec.to_owned()))?;
        if !(1..=60).contains(&sigma) {
            return Err(StrategyError::ThresholdOutOfRange(sigma));
        }
        return Ok(ThresholdStrategy::CountAtLeast(sigma));
    }
    if let Some(rest) = spec.strip_prefix("subset:") {
        if rest == "drebin" {
            return Ok(ThresholdStrategy::drebin());
        }
        let (path, k) = match rest.rsplit_once(":k=") {
            Some((path, k)) => (
                path,
                k.parse::<u32>().map_err(|_| StrategyError::UnrecognizedSpec(spec.to_owned()))?,
            ),
            None => (rest, 1),
        };
        let scanners = load_scanner_list(Path::new(path))?;
        if k as usize > scanners.len() {
            return Err(StrategyError::SubsetThresholdTooLarge { k, n: scanners.len() });
        }
        let name = Path::new(path)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or(path)
            .to_owned();
        return Ok(ThresholdStrategy::ScannerSubset { name, scanners, min_detections: k });
    }
    Err(StrategyError::UnrecognizedSpec(spec.to_owned()))
}

/// One scanner name per line; blank lines and `#` comments ignored.
fn load_scanner_list(path: &Path) -> Result<Vec<String>, StrategyError> {
    let text = fs::read_to_string(path).map_err(|source| StrategyError::ScannerListIo {
        path: path.display().to_string(),
        source,
    })?;
    let scanners: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect();
    if scanners.is_empty() {
        return Err(StrategyError::EmptyScannerList { path: path.display().to_string() });
    }
    Ok(scanners)
}
