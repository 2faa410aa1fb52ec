//! Labeling toolkit for time-series antivirus scan reports.
//!
//! The crate ingests dated multi-scanner scan reports ("snapshots"), stores
//! them append-only per app, and derives malicious/benign labels for apps
//! through two families of strategies:
//!
//! * threshold-based voting over the `positives` count, a detection ratio,
//!   or a fixed scanner subset (see [`strategies`]), including a brute-force
//!   search for the currently optimal count threshold (see [`threshold`]);
//! * random forests trained on feature vectors extracted from the reports
//!   (see [`features`] and [`forest`]).
//!
//! Supporting pieces: scanner reliability analytics (correctness, certainty,
//! stability) in [`metrics`], a rate-limited HTTP client in [`client`], and a
//! history-preserving report service in [`service`].

pub mod cli;
pub mod client;
pub mod features;
pub mod forest;
pub mod metrics;
pub mod report;
pub mod service;
pub mod store;
pub mod strategies;
pub mod threshold;

#[cfg(test)]
pub(crate) mod testutil;
