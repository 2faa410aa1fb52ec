//! Snapshot and manifest builders shared by unit tests.

use std::collections::BTreeSet;

use indexmap::IndexMap;

use crate::report::{parse_timestamp, GroundTruthLabel, Label, ScanSnapshot, ScannerVerdict};
use crate::store::DatasetManifest;

/// Fixed pool of scanner names used to synthesize verdict maps.
pub const SCANNER_POOL: [&str; 62] = [
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
    "AVG",
    "BitDefender",
    "ClamAV",
    "F-Secure",
    "Kaspersky",
    "Panda",
    "AhnLab-V3",
    "Cyren",
    "K7GW",
    "McAfee-GW-Edition",
    "Trustlook",
    "Ad-Aware",
    "AegisLab",
    "Alibaba",
    "Arcabit",
    "Avast-Mobile",
    "Babable",
    "Baidu",
    "Bkav",
    "CMC",
    "Comodo",
    "CrowdStrike",
    "Cylance",
    "Emsisoft",
    "Endgame",
    "FireEye",
    "GData",
    "Jiangmin",
    "K7AntiVirus",
    "Kingsoft",
    "MalwareBytes",
    "MicroWorld-eScan",
    "Microsoft",
    "Paloalto",
    "Qihoo-360",
    "Rising",
    "SUPERAntiSpyware",
    "SentinelOne",
    "Symantec",
    "Tencent",
    "TheHacker",
    "TotalDefense",
    "Trapmine",
    "TrendMicro",
    "VBA32",
    "VIPRE",
    "ViRobot",
    "Webroot",
    "Yandex",
    "Zillya",
    "Zoner",
];

/// Snapshot whose verdict map is synthesized from [`SCANNER_POOL`]: the first
/// `positives` scanners detect, the rest up to `total` do not. `first_seen`
/// defaults to the scan date.
pub fn snapshot(app_id: &str, scan_date: &str, positives: u32, total: u32) -> ScanSnapshot {
    assert!(total as usize <= SCANNER_POOL.len(), "scanner pool too small");
    let mut verdicts = IndexMap::new();
    for (i, name) in SCANNER_POOL.iter().take(total as usize).enumerate() {
        verdicts.insert(
            (*name).to_owned(),
            ScannerVerdict { detected: (i as u32) < positives, result: None, version: None },
        );
    }
    let scan_date = parse_timestamp(scan_date).unwrap();
    ScanSnapshot {
        app_id: app_id.to_owned(),
        scan_date,
        first_seen: scan_date,
        dex_date: None,
        positives,
        total,
        positives_delta: None,
        times_submitted: 1,
        verdicts,
        permissions: BTreeSet::new(),
        tags: BTreeSet::new(),
    }
}

/// Snapshot with an explicit verdict map.
pub fn snapshot_with_verdicts(
    app_id: &str,
    scan_date: &str,
    verdicts: &[(&str, bool)],
) -> ScanSnapshot {
    let mut map = IndexMap::new();
    for (name, detected) in verdicts {
        map.insert(
            (*name).to_owned(),
            ScannerVerdict { detected: *detected, result: None, version: None },
        );
    }
    let positives = verdicts.iter().filter(|(_, d)| *d).count() as u32;
    let total = verdicts.len() as u32;
    let scan_date = parse_timestamp(scan_date).unwrap();
    ScanSnapshot {
        app_id: app_id.to_owned(),
        scan_date,
        first_seen: scan_date,
        dex_date: None,
        positives,
        total,
        positives_delta: None,
        times_submitted: 1,
        verdicts: map,
        permissions: BTreeSet::new(),
        tags: BTreeSet::new(),
    }
}

pub fn manifest_from(entries: &[(&str, Label)]) -> DatasetManifest {
    let mut manifest = DatasetManifest::new("test");
    for (id, label) in entries {
        manifest.insert(
            (*id).to_owned(),
            GroundTruthLabel { label: *label, malware_type: None, dex_date: None },
        );
    }
    manifest
}
