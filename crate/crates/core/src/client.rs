//! Rate-limited client for a VirusTotal-compatible report API: rescan
//! requests, report downloads, and freshness polling.
//!
//! Endpoints: `POST {base}/apps/{id}/rescan` and
//! `GET {base}/apps/{id}/reports/latest`. The API key comes from the
//! `VT_API_KEY` environment variable and is sent as the `x-apikey` header
//! when present. Rescans and downloads draw from one shared quota pool.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::report::{self, ParseError, ScanSnapshot};

pub const API_KEY_ENV: &str = "VT_API_KEY";

/// Time source for the rate limiter and poll sleeps; swappable so tests can
/// run at compressed virtual time.
pub trait Clock: Send + Sync {
    /// Monotonic time since an arbitrary fixed origin.
    fn now(&self) -> Duration;
    fn sleep(&self, duration: Duration);
}

/// Wall-clock implementation.
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock { origin: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// Virtual clock whose `sleep` advances time instantly.
pub struct MockClock {
    now: Mutex<Duration>,
}

impl MockClock {
    pub fn new() -> Self {
        MockClock { now: Mutex::new(Duration::ZERO) }
    }

    pub fn advance(&self, by: Duration) {
        *self.now.lock().unwrap() += by;
    }
}

impl Default for MockClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MockClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, duration: Duration) {
        self.advance(duration);
    }
}

const MINUTE: Duration = Duration::from_secs(60);
const DAY: Duration = Duration::from_secs(24 * 60 * 60);

/// Shared rolling-window limiter over a daily and a per-minute quota.
///
/// When the minute window is full, `acquire` sleeps until a slot frees; when
/// the rolling 24-hour window is full it fails immediately, since waiting
/// out a day quota inside a call is never useful.
pub struct RateLimiter {
    daily_quota: usize,
    per_minute_quota: usize,
    clock: Arc<dyn Clock>,
    granted: Mutex<VecDeque<Duration>>,
}

impl RateLimiter {
    pub fn new(daily_quota: u32, per_minute_quota: u32, clock: Arc<dyn Clock>) -> Self {
        assert!(daily_quota > 0 && per_minute_quota > 0, "quotas must be positive");
        RateLimiter {
            daily_quota: daily_quota as usize,
            per_minute_quota: per_minute_quota as usize,
            clock,
            granted: Mutex::new(VecDeque::new()),
        }
    }

    /// Blocks until a slot within the per-minute window is available, or
    /// fails with [`ClientError::QuotaExhausted`] when the daily window is
    /// already full.
    pub fn acquire(&self) -> Result<(), ClientError> {
        loop {
            let wait = {
                let mut granted = self.granted.lock().unwrap();
                let now = self.clock.now();
                while granted.front().is_some_and(|&t| now.saturating_sub(t) >= DAY) {
                    granted.pop_front();
                }
                if granted.len() >= self.daily_quota {
                    return Err(ClientError::QuotaExhausted);
                }
                let in_minute = granted
                    .iter()
                    .rev()
                    .take_while(|&&t| now.saturating_sub(t) < MINUTE)
                    .count();
                if in_minute < self.per_minute_quota {
                    granted.push_back(now);
                    return Ok(());
                }
                let oldest_in_minute = granted[granted.len() - in_minute];
                (oldest_in_minute + MINUTE).saturating_sub(now)
            };
            self.clock.sleep(wait.max(Duration::from_millis(1)));
        }
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("quota exhausted")]
    QuotaExhausted,
    #[error("unauthorized (check {API_KEY_ENV})")]
    Unauthorized,
    #[error("app `{0}` not found")]
    NotFound(String),
    #[error("rescan of `{app_id}` refused by the server")]
    RescanRefused { app_id: String },
    #[error("report of `{app_id}` still stale after {attempts} poll attempts")]
    StaleAfterPolling { app_id: String, attempts: u32 },
    #[error("transport error: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("unexpected HTTP status {status}: {body}")]
    UnexpectedStatus { status: u16, body: String },
    #[error("malformed report: {0}")]
    Report(#[from] ParseError),
}

/// Client configuration. Defaults follow documented platform practice:
/// 20,000 requests per day, 4 per minute, and rescans that take around four
/// minutes to complete.
#[derive(Debug, Clone)]
pub struct ClientConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub daily_quota: u32,
    pub per_minute_quota: u32,
    pub rescan_poll_interval: Duration,
    pub max_poll_attempts: u32,
}

impl ClientConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        ClientConfig {
            base_url: base_url.into(),
            api_key: std::env::var(API_KEY_ENV).ok(),
            daily_quota: 20_000,
            per_minute_quota: 4,
            rescan_poll_interval: Duration::from_secs(240),
            max_poll_attempts: 10,
        }
    }
}

/// Blocking HTTP client with a shared rate limiter. Safe for concurrent
/// callers; all requests serialize through the limiter.
pub struct VtClient {
    config: ClientConfig,
    http: reqwest::blocking::Client,
    limiter: RateLimiter,
    clock: Arc<dyn Clock>,
}

impl VtClient {
    pub fn new(config: ClientConfig) -> Result<Self, ClientError> {
        Self::with_clock(config, Arc::new(SystemClock::new()))
    }

    pub fn with_clock(config: ClientConfig, clock: Arc<dyn Clock>) -> Result<Self, ClientError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()?;
        let limiter =
            RateLimiter::new(config.daily_quota, config.per_minute_quota, Arc::clone(&clock));
        Ok(VtClient { config, http, limiter, clock })
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    fn url(&self, suffix: &str) -> String {
        format!("{}/{}", self.config.base_url.trim_end_matches('/'), suffix)
    }

    fn send(
        &self,
        build: impl Fn(&reqwest::blocking::Client) -> reqwest::blocking::RequestBuilder,
    ) -> Result<reqwest::blocking::Response, ClientError> {
        self.limiter.acquire()?;
        let mut request = build(&self.http);
        if let Some(key) = &self.config.api_key {
            request = request.header("x-apikey", key);
        }
        Ok(request.send()?)
    }

    /// Issues a rescan request. Returns whether the server accepted it.
    pub fn rescan(&self, app_id: &str) -> Result<bool, ClientError> {
        let url = self.url(&format!("apps/{app_id}/rescan"));
        let response = self.send(|http| http.post(&url))?;
        match response.status().as_u16() {
            200 | 202 => Ok(true),
            409 => Ok(false),
            401 | 403 => Err(ClientError::Unauthorized),
            404 => Err(ClientError::NotFound(app_id.to_owned())),
            status => Err(ClientError::UnexpectedStatus {
                status,
                body: response.text().unwrap_or_default(),
            }),
        }
    }

    /// Downloads and parses the latest report of `app_id`.
    pub fn fetch_report(&self, app_id: &str) -> Result<ScanSnapshot, ClientError> {
        let url = self.url(&format!("apps/{app_id}/reports/latest"));
        let response = self.send(|http| http.get(&url))?;
        match response.status().as_u16() {
            200 => Ok(report::parse_snapshot(&response.text()?)?.snapshot),
            401 | 403 => Err(ClientError::Unauthorized),
            404 => Err(ClientError::NotFound(app_id.to_owned())),
            status => Err(ClientError::UnexpectedStatus {
                status,
                body: response.text().unwrap_or_default(),
            }),
        }
    }

    /// Fetches the latest report, polling every `rescan_poll_interval` until
    /// its scan date is newer than `newer_than` or `max_poll_attempts` is
    /// reached. With no baseline the first report wins.
    pub fn fetch_fresh_report(
        &self,
        app_id: &str,
        newer_than: Option<DateTime<Utc>>,
    ) -> Result<ScanSnapshot, ClientError> {
        let attempts = self.config.max_poll_attempts.max(1);
        for attempt in 0..attempts {
            if attempt > 0 {
                self.clock.sleep(self.config.rescan_poll_interval);
            }
            let snapshot = self.fetch_report(app_id)?;
            match newer_than {
                Some(baseline) if snapshot.scan_date <= baseline => continue,
                _ => return Ok(snapshot),
            }
        }
        Err(ClientError::StaleAfterPolling { app_id: app_id.to_owned(), attempts })
    }
}
