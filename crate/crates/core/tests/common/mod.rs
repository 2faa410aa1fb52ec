//! Shared fixtures for the integration and acceptance suites.

use std::fmt::Write as _;

use labelforge::report::{parse_snapshot, ScanSnapshot};
use labelforge::store::Store;

/// Fixed pool of scanner names for synthesized verdict maps.
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

/// App id of the fluctuating-report fixture.
pub const TIME_TABLE_APP: &str = "5cfda85debe5e9a7341b4eeed01d92807ed29552";

pub const TIME_TABLE_DATES: [&str; 15] = [
    "2018-12-03",
    "2019-01-08",
    "2019-04-12",
    "2019-04-25",
    "2019-05-09",
    "2019-05-23",
    "2019-06-07",
    "2019-06-21",
    "2019-07-05",
    "2019-07-19",
    "2019-08-02",
    "2019-08-16",
    "2019-08-30",
    "2019-09-13",
    "2019-09-27",
];

pub const TIME_TABLE_POSITIVES: [u32; 15] =
    [39, 39, 31, 33, 34, 30, 32, 32, 31, 32, 33, 25, 30, 29, 29];

pub const TIME_TABLE_TOTALS: [u32; 15] =
    [60, 58, 57, 61, 61, 60, 61, 62, 60, 60, 61, 56, 60, 59, 59];

/// Platform-supplied deltas, as printed in the reports.
pub const TIME_TABLE_RECORDED_DELTAS: [i64; 15] =
    [2, 0, -8, 2, 1, -3, 2, 0, -1, 1, 1, -7, 5, -1, 0];

/// One report JSON line with a verdict map synthesized from the pool: the
/// first `positives` scanners detect, the rest up to `total` do not.
pub fn report_json(
    app_id: &str,
    scan_date: &str,
    first_seen: &str,
    positives: u32,
    total: u32,
    positives_delta: Option<i64>,
) -> String {
    assert!(total as usize <= SCANNER_POOL.len());
    let mut scans = String::new();
    for (i, name) in SCANNER_POOL.iter().take(total as usize).enumerate() {
        if i > 0 {
            scans.push(',');
        }
        let detected = (i as u32) < positives;
        write!(scans, r#""{name}":{{"detected":{detected}}}"#).unwrap();
    }
    let delta = positives_delta
        .map(|d| format!(r#""positives_delta":{d},"#))
        .unwrap_or_default();
    format!(
        r#"{{"sha256":"{app_id}","scan_date":"{scan_date}","first_seen":"{first_seen}",{delta}"positives":{positives},"total":{total},"times_submitted":3,"scans":{{{scans}}},"permissions":["android.permission.INTERNET"],"tags":["apk"]}}"#
    )
}

pub fn parse(line: &str) -> ScanSnapshot {
    parse_snapshot(line).expect("fixture line parses").snapshot
}

/// The fifteen-snapshot history of the fluctuating app, as JSONL.
pub fn time_table_jsonl() -> String {
    let mut out = String::new();
    for i in 0..15 {
        out.push_str(&report_json(
            TIME_TABLE_APP,
            TIME_TABLE_DATES[i],
            "2015-05-11",
            TIME_TABLE_POSITIVES[i],
            TIME_TABLE_TOTALS[i],
            Some(TIME_TABLE_RECORDED_DELTAS[i]),
        ));
        out.push('\n');
    }
    out
}

/// `positives` of the ten malicious apps on the two evaluation dates.
pub const HAND_LABELED_SEPT27: [u32; 10] = [0, 5, 7, 12, 7, 13, 10, 8, 6, 1];
pub const HAND_LABELED_NOV8: [u32; 10] = [0, 3, 7, 13, 6, 13, 12, 11, 1, 1];

pub fn hand_labeled_malicious_id(i: usize) -> String {
    format!("mal{i:02}")
}

pub fn hand_labeled_benign_id(i: usize) -> String {
    format!("ben{i:02}")
}

/// JSONL for the 100-app test dataset at both dates: ten malicious apps with
/// the fixed positives series, ninety benign apps with zero positives.
pub fn hand_labeled_jsonl() -> String {
    let mut out = String::new();
    for (date, positives) in
        [("2019-09-27", &HAND_LABELED_SEPT27), ("2019-11-08", &HAND_LABELED_NOV8)]
    {
        for (i, &p) in positives.iter().enumerate() {
            out.push_str(&report_json(
                &hand_labeled_malicious_id(i),
                date,
                "2019-06-01",
                p,
                60,
                None,
            ));
            out.push('\n');
        }
        for i in 0..90 {
            out.push_str(&report_json(&hand_labeled_benign_id(i), date, "2019-06-01", 0, 60, None));
            out.push('\n');
        }
    }
    out
}

pub fn hand_labeled_manifest_csv() -> String {
    let mut out = String::from("app_id,label,malware_type\n");
    for i in 0..10 {
        out.push_str(&format!("{},malicious,Trojan\n", hand_labeled_malicious_id(i)));
    }
    for i in 0..90 {
        out.push_str(&format!("{},benign,\n", hand_labeled_benign_id(i)));
    }
    out
}

/// Opens a store in `dir` and ingests the given JSONL content.
pub fn store_with(dir: &std::path::Path, jsonl: &str) -> Store {
    let mut store = Store::open(dir).expect("store opens");
    let report = store.ingest(std::io::Cursor::new(jsonl.to_owned())).expect("ingest succeeds");
    assert!(report.warnings.is_empty(), "fixture warnings: {:?}", report.warnings);
    store
}
