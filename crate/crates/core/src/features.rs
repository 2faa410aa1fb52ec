//! Feature extraction from scan snapshots — engineered and naive vectors —
//! plus importance-based feature selection.
//!
//! Schemas are serializable JSON documents (`{kind, scanners, permissions,
//! tags, as_of[, selected]}`) so trained models can reference the exact
//! layout they were built with. Extraction is a pure function of
//! (snapshot, schema).

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::report::ScanSnapshot;

/// Scanners found to stay at least 90% correct over the observation period;
/// their verdicts open the engineered feature vector.
pub const CORRECT_SCANNERS_2019: [&str; 11] = [
    "Avira",
    "CAT-QuickHeal",
    "DrWeb",
    "ESET-NOD32",
    "Fortinet",
    "Ikarus",
    "MAX",
    "McAfee",
    "NANO-Antivirus",
    "Sophos",
    "SymantecMobileInsight",
];

/// Scanner verdicts that survive importance-based selection of the naive
/// feature set on the reference corpora.
pub const SELECTED_NAIVE_SCANNERS: [&str; 17] = [
    "AhnLab-V3",
    "Avira",
    "CAT-QuickHeal",
    "Cyren",
    "DrWeb",
    "ESET-NOD32",
    "F-Secure",
    "Fortinet",
    "Ikarus",
    "K7GW",
    "MAX",
    "McAfee",
    "McAfee-GW-Edition",
    "NANO-Antivirus",
    "Sophos",
    "SymantecMobileInsight",
    "Trustlook",
];

/// Documented default vocabulary sizes; smaller observed vocabularies are
/// padded with reserved names up to these lengths.
pub const DEFAULT_PERMISSION_VOCAB_LEN: usize = 324;
pub const DEFAULT_TAG_VOCAB_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaKind {
    Engineered,
    Naive,
}

impl fmt::Display for SchemaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemaKind::Engineered => write!(f, "engineered"),
            SchemaKind::Naive => write!(f, "naive"),
        }
    }
}

/// Which date the report-age feature is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AsOfPolicy {
    /// Age at the snapshot's own scan date (reproducible stand-in for
    /// "today").
    SnapshotDate,
    /// Age at a fixed date, for replaying historical experiments.
    FixedDate(NaiveDate),
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("schema kind mismatch: expected {expected}, got {got}")]
    SchemaKindMismatch { expected: SchemaKind, got: SchemaKind },
    #[error("importances length {got} does not match schema length {expected}")]
    ImportanceLengthMismatch { expected: usize, got: usize },
    #[error("importance at index {0} is negative")]
    NegativeImportance(usize),
    #[error("no feature meets the selection threshold")]
    EmptySelection,
    #[error("duplicate entry `{0}` in schema vocabulary")]
    DuplicateVocabEntry(String),
    #[error("schema selection index {0} out of range")]
    SelectionOutOfRange(usize),
    #[error("schema I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Layout of a feature vector.
///
/// For `Engineered` schemas the base layout is: one verdict per scanner in
/// `scanners`, then report age in years, `times_submitted`, `positives`,
/// `total`, then one indicator per permission and per tag. For `Naive`
/// schemas it is one verdict per scanner in `scanners`. `selected`, when
/// present, projects the base layout down to the given indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub kind: SchemaKind,
    pub scanners: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub permissions: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
    pub as_of: AsOfPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected: Option<Vec<usize>>,
}

impl FeatureSchema {
    /// Engineered schema with the default correct-scanner list and reserved
    /// vocabulary padding.
    pub fn engineered_default() -> Self {
        Self::engineered(
            CORRECT_SCANNERS_2019.iter().map(|s| (*s).to_owned()).collect(),
            Vec::new(),
            Vec::new(),
            AsOfPolicy::SnapshotDate,
        )
    }

    /// Engineered schema over explicit vocabularies, padded to the
    /// documented default sizes.
    pub fn engineered(
        scanners: Vec<String>,
        mut permissions: Vec<String>,
        mut tags: Vec<String>,
        as_of: AsOfPolicy,
    ) -> Self {
        pad_vocab(&mut permissions, DEFAULT_PERMISSION_VOCAB_LEN, "__reserved_permission_");
        pad_vocab(&mut tags, DEFAULT_TAG_VOCAB_LEN, "__reserved_tag_");
        FeatureSchema { kind: SchemaKind::Engineered, scanners, permissions, tags, as_of, selected: None }
    }

    /// Naive schema over an explicit scanner universe.
    pub fn naive(scanners: Vec<String>, as_of: AsOfPolicy) -> Self {
        FeatureSchema {
            kind: SchemaKind::Naive,
            scanners,
            permissions: Vec::new(),
            tags: Vec::new(),
            as_of,
            selected: None,
        }
    }

    /// Naive schema restricted to the scanners that survive selection on the
    /// reference corpora.
    pub fn naive_selected_default() -> Self {
        Self::naive(
            SELECTED_NAIVE_SCANNERS.iter().map(|s| (*s).to_owned()).collect(),
            AsOfPolicy::SnapshotDate,
        )
    }

    /// Builds a schema from the union of scanners, permissions, and tags
    /// observed in `snapshots`, sorted for determinism.
    pub fn from_observed<'a>(
        kind: SchemaKind,
        snapshots: impl IntoIterator<Item = &'a ScanSnapshot>,
        as_of: AsOfPolicy,
    ) -> Self {
        let mut scanners = BTreeSet::new();
        let mut permissions = BTreeSet::new();
        let mut tags = BTreeSet::new();
        for snapshot in snapshots {
            scanners.extend(snapshot.verdicts.keys().cloned());
            permissions.extend(snapshot.permissions.iter().cloned());
            tags.extend(snapshot.tags.iter().cloned());
        }
        match kind {
            SchemaKind::Engineered => Self::engineered(
                CORRECT_SCANNERS_2019.iter().map(|s| (*s).to_owned()).collect(),
                permissions.into_iter().collect(),
                tags.into_iter().collect(),
                as_of,
            ),
            SchemaKind::Naive => Self::naive(scanners.into_iter().collect(), as_of),
        }
    }

    /// Length of the unprojected layout.
    pub fn base_len(&self) -> usize {
        match self.kind {
            SchemaKind::Engineered => {
                self.scanners.len() + 4 + self.permissions.len() + self.tags.len()
            }
            SchemaKind::Naive => self.scanners.len(),
        }
    }

    /// Length of extracted vectors (after projection, when selected).
    pub fn vector_len(&self) -> usize {
        match &self.selected {
            Some(kept) => kept.len(),
            None => self.base_len(),
        }
    }

    /// Human-readable feature names, aligned with extracted vectors.
    pub fn feature_names(&self) -> Vec<String> {
        let base: Vec<String> = match self.kind {
            SchemaKind::Naive => self.scanners.clone(),
            SchemaKind::Engineered => {
                let mut names = self.scanners.clone();
                names.push("age_years".to_owned());
                names.push("times_submitted".to_owned());
                names.push("positives".to_owned());
                names.push("total".to_owned());
                names.extend(self.permissions.iter().map(|p| format!("perm:{p}")));
                names.extend(self.tags.iter().map(|t| format!("tag:{t}")));
                names
            }
        };
        match &self.selected {
            Some(kept) => kept.iter().map(|&i| base[i].clone()).collect(),
            None => base,
        }
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        for vocab in [&self.scanners, &self.permissions, &self.tags] {
            let mut seen = BTreeSet::new();
            for entry in vocab {
                if !seen.insert(entry) {
                    return Err(FeatureError::DuplicateVocabEntry(entry.clone()));
                }
            }
        }
        if let Some(kept) = &self.selected {
            let base = self.base_len();
            if let Some(&bad) = kept.iter().find(|&&i| i >= base) {
                return Err(FeatureError::SelectionOutOfRange(bad));
            }
        }
        Ok(())
    }

    /// Stable identifier of the exact layout, for model/vector agreement
    /// checks.
    pub fn fingerprint(&self) -> u64 {
        let canonical = serde_json::to_string(self).expect("schema serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        u64::from_be_bytes(digest[..8].try_into().expect("digest is long enough"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, FeatureError> {
        let schema: FeatureSchema = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FeatureError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FeatureError> {
        Ok(std::fs::write(path, self.to_json())?)
    }
}

fn pad_vocab(vocab: &mut Vec<String>, target: usize, prefix: &str) {
    let mut i = 0;
    while vocab.len() < target {
        let name = format!("{prefix}{i:03}");
        if !vocab.contains(&name) {
            vocab.push(name);
        }
        i += 1;
    }
}

/// Extracted feature vector, tagged with the fingerprint of its schema.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub schema_id: u64,
}

/// Engineered layout: correct-scanner verdicts, report age in fractional
/// years, `times_submitted`, `positives`, `total`, permission indicators,
/// tag indicators.
pub fn engineered_vector(
    snapshot: &ScanSnapshot,
    schema: &FeatureSchema,
) -> Result<FeatureVector, FeatureError> {
    if schema.kind != SchemaKind::Engineered {
        return Err(FeatureError::SchemaKindMismatch {
            expected: SchemaKind::Engineered,
            got: schema.kind,
        });
    }
    let mut values = Vec::with_capacity(schema.base_len());
    for scanner in &schema.scanners {
        values.push(snapshot.verdict_of(scanner).encoding());
    }
    values.push(report_age_years(snapshot, schema.as_of));
    values.push(snapshot.times_submitted as f64);
    values.push(f64::from(snapshot.positives));
    values.push(f64::from(snapshot.total));
    for permission in &schema.permissions {
        values.push(if snapshot.permissions.contains(permission) { 1.0 } else { 0.0 });
    }
    for tag in &schema.tags {
        values.push(if snapshot.tags.contains(tag) { 1.0 } else { 0.0 });
    }
    Ok(project(values, schema))
}

/// Naive layout: one verdict per scanner in the universe.
pub fn naive_vector(
    snapshot: &ScanSnapshot,
    schema: &FeatureSchema,
) -> Result<FeatureVector, FeatureError> {
    if schema.kind != SchemaKind::Naive {
        return Err(FeatureError::SchemaKindMismatch {
            expected: SchemaKind::Naive,
            got: schema.kind,
        });
    }
    let values =
        schema.scanners.iter().map(|s| snapshot.verdict_of(s).encoding()).collect();
    Ok(project(values, schema))
}

/// Extracts by schema kind.
pub fn extract(
    snapshot: &ScanSnapshot,
    schema: &FeatureSchema,
) -> Result<FeatureVector, FeatureError> {
    match schema.kind {
        SchemaKind::Engineered => engineered_vector(snapshot, schema),
        SchemaKind::Naive => naive_vector(snapshot, schema),
    }
}

fn project(base: Vec<f64>, schema: &FeatureSchema) -> FeatureVector {
    let values = match &schema.selected {
        Some(kept) => kept.iter().map(|&i| base[i]).collect(),
        None => base,
    };
    FeatureVector { values, schema_id: schema.fingerprint() }
}

fn report_age_years(snapshot: &ScanSnapshot, as_of: AsOfPolicy) -> f64 {
    let as_of = match as_of {
        AsOfPolicy::SnapshotDate => snapshot.scan_date,
        AsOfPolicy::FixedDate(date) => {
            date.and_hms_opt(0, 0, 0).expect("midnight is valid").and_utc()
        }
    };
    let seconds = (as_of - snapshot.first_seen).num_seconds() as f64;
    (seconds / 86_400.0 / 365.25).max(0.0)
}

/// Counts the snapshot's permissions and tags missing from the schema
/// vocabularies; such entries are ignored during extraction.
pub fn unknown_vocab_entries(snapshot: &ScanSnapshot, schema: &FeatureSchema) -> (usize, usize) {
    let unknown_permissions = snapshot
        .permissions
        .iter()
        .filter(|p| !schema.permissions.contains(p))
        .count();
    let unknown_tags = snapshot.tags.iter().filter(|t| !schema.tags.contains(t)).count();
    (unknown_permissions, unknown_tags)
}

/// How the selection threshold is derived from the importances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdPolicy {
    /// Keep features with importance at least the mean importance.
    MeanImportance,
    /// Keep features with importance at least the given value.
    Fixed(f64),
}

/// Result of a selection: the reduced schema plus the old-to-new index map
/// (entry `new` holds the old index it came from).
#[derive(Debug, Clone)]
pub struct FeatureSelection {
    pub schema: FeatureSchema,
    pub index_map: Vec<usize>,
}

/// Keeps exactly the features whose importance meets the threshold.
///
/// Importances align with the schema's extracted vectors. Naive schemas
/// reduce to a restricted scanner universe; engineered schemas keep their
/// vocabularies and record the projection in `selected`.
pub fn select_features(
    schema: &FeatureSchema,
    importances: &[f64],
    policy: ThresholdPolicy,
) -> Result<FeatureSelection, FeatureError> {
    let len = schema.vector_len();
    if importances.len() != len {
        return Err(FeatureError::ImportanceLengthMismatch {
            expected: len,
            got: importances.len(),
        });
    }
    if let Some(bad) = importances.iter().position(|&v| v < 0.0) {
        return Err(FeatureError::NegativeImportance(bad));
    }
    let threshold = match policy {
        ThresholdPolicy::MeanImportance => importances.iter().sum::<f64>() / len as f64,
        ThresholdPolicy::Fixed(t) => t,
    };
    let kept_current: Vec<usize> =
        (0..len).filter(|&i| importances[i] >= threshold).collect();
    if kept_current.is_empty() {
        return Err(FeatureError::EmptySelection);
    }
    // Map through any existing projection back to base-layout indices.
    let kept_base: Vec<usize> = match &schema.selected {
        Some(old) => kept_current.iter().map(|&i| old[i]).collect(),
        None => kept_current.clone(),
    };
    let reduced = match schema.kind {
        SchemaKind::Naive => FeatureSchema {
            kind: SchemaKind::Naive,
            scanners: kept_base.iter().map(|&i| schema.scanners[i].clone()).collect(),
            permissions: Vec::new(),
            tags: Vec::new(),
            as_of: schema.as_of,
            selected: None,
        },
        SchemaKind::Engineered => {
            FeatureSchema { selected: Some(kept_base), ..schema.clone() }
        }
    };
    Ok(FeatureSelection { schema: reduced, index_map: kept_current })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{snapshot, snapshot_with_verdicts};

    #[test]
    fn default_engineered_layout_has_documented_length() {
        let schema = FeatureSchema::engineered_default();
        assert_eq!(schema.scanners.len(), 11);
        assert_eq!(schema.permissions.len(), 324);
        assert_eq!(schema.tags.len(), 32);
        assert_eq!(schema.vector_len(), 11 + 4 + 324 + 32);
        assert_eq!(schema.vector_len(), 371);
    }

    #[test]
    fn engineered_block_order_and_encodings() {
        let schema = FeatureSchema::engineered(
            vec!["Present".into(), "Absent".into()],
            vec!["android.permission.INTERNET".into(), "android.permission.SEND_SMS".into()],
            vec!["apk".into()],
            AsOfPolicy::SnapshotDate,
        );
        let mut snap = snapshot_with_verdicts("a", "2019-09-27", &[("Present", true)]);
        snap.positives = 1;
        snap.total = 1;
        snap.times_submitted = 7;
        snap.permissions.insert("android.permission.SEND_SMS".into());
        snap.tags.insert("apk".into());
        let vector = engineered_vector(&snap, &schema).unwrap();
        assert_eq!(vector.values.len(), schema.vector_len());
        assert_eq!(vector.values[0], 1.0); // Present detected
        assert_eq!(vector.values[1], -1.0); // Absent scanner encodes unknown
        assert_eq!(vector.values[2], 0.0); // age: first_seen == scan_date
        assert_eq!(vector.values[3], 7.0); // times_submitted
        assert_eq!(vector.values[4], 1.0); // positives
        assert_eq!(vector.values[5], 1.0); // total
        assert_eq!(vector.values[6], 0.0); // INTERNET not requested
        assert_eq!(vector.values[7], 1.0); // SEND_SMS requested
        let names = schema.feature_names();
        let apk = names.iter().position(|n| n == "tag:apk").unwrap();
        assert_eq!(vector.values[apk], 1.0);
    }

    #[test]
    fn age_is_one_year_after_one_year() {
        let schema = FeatureSchema::engineered_default();
        let mut snap = snapshot("a", "2019-09-27", 0, 10);
        snap.first_seen = crate::report::parse_timestamp("2018-09-27").unwrap();
        let vector = engineered_vector(&snap, &schema).unwrap();
        let age = vector.values[11];
        assert!((age - 1.0).abs() <= 1.0 / 365.25, "age={age}");
    }

    #[test]
    fn positives_entry_mirrors_snapshot_field() {
        let schema = FeatureSchema::engineered_default();
        for positives in [0u32, 3, 39] {
            let snap = snapshot("a", "2019-09-27", positives, 45);
            let vector = engineered_vector(&snap, &schema).unwrap();
            assert_eq!(vector.values[13], f64::from(positives));
        }
    }

    #[test]
    fn naive_vector_over_selected_universe() {
        let schema = FeatureSchema::naive_selected_default();
        assert_eq!(schema.vector_len(), 17);
        let empty = snapshot_with_verdicts("a", "2019-09-27", &[]);
        let vector = naive_vector(&empty, &schema).unwrap();
        assert!(vector.values.iter().all(|&v| v == -1.0));

        let two = FeatureSchema::naive(
            vec!["Hit".into(), "Clean".into()],
            AsOfPolicy::SnapshotDate,
        );
        let snap = snapshot_with_verdicts("a", "2019-09-27", &[("Hit", true), ("Clean", false)]);
        assert_eq!(naive_vector(&snap, &two).unwrap().values, vec![1.0, 0.0]);
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let engineered = FeatureSchema::engineered_default();
        let naive = FeatureSchema::naive_selected_default();
        let snap = snapshot("a", "2019-09-27", 0, 10);
        assert!(matches!(
            naive_vector(&snap, &engineered),
            Err(FeatureError::SchemaKindMismatch { .. })
        ));
        assert!(matches!(
            engineered_vector(&snap, &naive),
            Err(FeatureError::SchemaKindMismatch { .. })
        ));
    }

    #[test]
    fn verdict_map_order_does_not_change_vectors() {
        let schema = FeatureSchema::naive(
            vec!["A".into(), "B".into(), "C".into()],
            AsOfPolicy::SnapshotDate,
        );
        let fwd =
            snapshot_with_verdicts("a", "2019-09-27", &[("A", true), ("B", false), ("C", true)]);
        let rev =
            snapshot_with_verdicts("a", "2019-09-27", &[("C", true), ("B", false), ("A", true)]);
        assert_eq!(naive_vector(&fwd, &schema).unwrap(), naive_vector(&rev, &schema).unwrap());
    }

    #[test]
    fn selection_keeps_features_at_or_above_mean() {
        let schema = FeatureSchema::naive(
            vec!["A".into(), "B".into(), "C".into(), "D".into()],
            AsOfPolicy::SnapshotDate,
        );
        let selection =
            select_features(&schema, &[0.5, 0.3, 0.2, 0.0], ThresholdPolicy::MeanImportance)
                .unwrap();
        assert_eq!(selection.index_map, vec![0, 1]);
        assert_eq!(selection.schema.scanners, vec!["A".to_owned(), "B".to_owned()]);

        let all_equal =
            select_features(&schema, &[0.25; 4], ThresholdPolicy::MeanImportance).unwrap();
        assert_eq!(all_equal.index_map, vec![0, 1, 2, 3]);
    }

    #[test]
    fn selection_error_paths() {
        let schema = FeatureSchema::naive(vec!["A".into(), "B".into()], AsOfPolicy::SnapshotDate);
        assert!(matches!(
            select_features(&schema, &[0.1], ThresholdPolicy::MeanImportance),
            Err(FeatureError::ImportanceLengthMismatch { .. })
        ));
        assert!(matches!(
            select_features(&schema, &[0.1, -0.2], ThresholdPolicy::MeanImportance),
            Err(FeatureError::NegativeImportance(1))
        ));
        assert!(matches!(
            select_features(&schema, &[0.1, 0.2], ThresholdPolicy::Fixed(0.5)),
            Err(FeatureError::EmptySelection)
        ));
    }

    #[test]
    fn projection_through_index_map_equals_reduced_extraction() {
        let schema = FeatureSchema::engineered(
            vec!["S1".into(), "S2".into()],
            vec!["p1".into(), "p2".into()],
            vec!["t1".into()],
            AsOfPolicy::SnapshotDate,
        );
        let snap = snapshot_with_verdicts("a", "2019-09-27", &[("S1", true), ("S2", false)]);
        let full = engineered_vector(&snap, &schema).unwrap();
        let importances: Vec<f64> =
            (0..schema.vector_len()).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect();
        let selection =
            select_features(&schema, &importances, ThresholdPolicy::MeanImportance).unwrap();
        let reduced = engineered_vector(&snap, &selection.schema).unwrap();
        let projected: Vec<f64> =
            selection.index_map.iter().map(|&i| full.values[i]).collect();
        assert_eq!(reduced.values, projected);
        assert_eq!(selection.schema.feature_names().len(), reduced.values.len());
    }

    #[test]
    fn extraction_is_deterministic() {
        let schema = FeatureSchema::engineered_default();
        let snap = snapshot("a", "2019-09-27", 12, 40);
        assert_eq!(
            engineered_vector(&snap, &schema).unwrap(),
            engineered_vector(&snap, &schema).unwrap()
        );
    }

    #[test]
    fn schema_round_trips_through_json() {
        let schema = FeatureSchema::engineered_default();
        let parsed = FeatureSchema::from_json(&schema.to_json()).unwrap();
        assert_eq!(schema, parsed);
        assert_eq!(schema.fingerprint(), parsed.fingerprint());

        let fixed = FeatureSchema::naive(
            vec!["A".into()],
            AsOfPolicy::FixedDate("2019-09-27".parse().unwrap()),
        );
        let parsed = FeatureSchema::from_json(&fixed.to_json()).unwrap();
        assert_eq!(fixed, parsed);
        assert_ne!(fixed.fingerprint(), schema.fingerprint());
    }

    #[test]
    fn unknown_vocab_entries_are_counted() {
        let schema = FeatureSchema::engineered(
            vec!["S".into()],
            vec!["known.permission".into()],
            vec!["known-tag".into()],
            AsOfPolicy::SnapshotDate,
        );
        let mut snap = snapshot("a", "2019-09-27", 0, 5);
        snap.permissions.insert("known.permission".into());
        snap.permissions.insert("novel.permission".into());
        snap.tags.insert("novel-tag".into());
        let (unknown_permissions, unknown_tags) = unknown_vocab_entries(&snap, &schema);
        assert_eq!(unknown_permissions, 1);
        assert_eq!(unknown_tags, 1);
    }
}
