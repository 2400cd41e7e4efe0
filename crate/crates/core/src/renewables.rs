//! Client for the Renewables.ninja point API with a local file cache.
//!
//! The API token is read from `RENEWABLES_NINJA_TOKEN` and the cache
//! directory from `ECMARKET_CACHE_DIR` (default `.cache/renewables`).

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const TOKEN_ENV: &str = "RENEWABLES_NINJA_TOKEN";
pub const CACHE_ENV: &str = "ECMARKET_CACHE_DIR";
pub const DEFAULT_BASE_URL: &str = "https://www.renewables.ninja/api";

static CACHE_LOCK: Mutex<()> = Mutex::new(());

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenewableKind {
    Pv,
    Wind,
}

impl RenewableKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RenewableKind::Pv => "pv",
            RenewableKind::Wind => "wind",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenewablesQuery {
    pub lat: f64,
    pub lon: f64,
    pub year: i32,
    /// Installed capacity [MW]; the returned series is normalized by it.
    pub capacity: f64,
    pub kind: RenewableKind,
}

impl RenewablesQuery {
    fn expected_hours(&self) -> usize {
        let leap = chrono::NaiveDate::from_ymd_opt(self.year, 2, 29).is_some();
        if leap {
            8784
        } else {
            8760
        }
    }

    fn cache_name(&self) -> String {
        format!("{}_{:.4}_{:.4}_{}.json", self.kind.as_str(), self.lat, self.lon, self.year)
    }

    fn url(&self, base: &str) -> String {
        let kw = self.capacity * 1000.0;
        let common = format!(
            "lat={}&lon={}&date_from={y}-01-01&date_to={y}-12-31&dataset=merra2&capacity={kw}&format=json",
            self.lat,
            self.lon,
            y = self.year
        );
        match self.kind {
            RenewableKind::Pv => format!("{base}/data/pv?{common}&system_loss=0.1&tracking=0&tilt=35&azim=180"),
            RenewableKind::Wind => format!("{base}/data/wind?{common}&height=100&turbine=Vestas%20V90%202000"),
        }
    }
}

/// Minimal HTTP response seen by the client.
#[derive(Debug, Clone, PartialEq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// HTTP GET abstraction so tests can run without a network.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str, headers: &[(&str, String)]) -> Result<HttpResponse>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder().http_status_as_error(false).timeout_global(Some(timeout)).build();
        UreqTransport { agent: ureq::Agent::new_with_config(config) }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(120))
    }
}

impl Transport for UreqTransport {
    fn get(&self, url: &str, headers: &[(&str, String)]) -> Result<HttpResponse> {
        let mut request = self.agent.get(url);
        for (name, value) in headers {
            request = request.header(*name, value.as_str());
        }
        let mut response = request.call().map_err(|e| Error::Http(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response.body_mut().read_to_string().map_err(|e| Error::Http(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

/// Exponential backoff: waits `base_delay · 2^k` before retry k + 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 4, base_delay: Duration::from_secs(2) }
    }
}

pub struct NinjaClient {
    pub transport: Box<dyn Transport>,
    pub token: Option<String>,
    pub cache_dir: PathBuf,
    pub retry: RetryPolicy,
    pub base_url: String,
}

impl NinjaClient {
    /// Client configured from the environment with the real HTTP transport.
    pub fn from_env() -> Self {
        NinjaClient {
            transport: Box::new(UreqTransport::default()),
            token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()),
            cache_dir: std::env::var_os(CACHE_ENV).map_or_else(|| PathBuf::from(".cache/renewables"), PathBuf::from),
            retry: RetryPolicy::default(),
            base_url: DEFAULT_BASE_URL.into(),
        }
    }

    /// Hourly capacity factors for the query, from the cache when present.
    pub fn fetch(&self, query: &RenewablesQuery) -> Result<Vec<f64>> {
        if !(query.capacity > 0.0) {
            return Err(Error::Invalid(format!("capacity must be positive, got {}", query.capacity)));
        }
        let path = self.cache_dir.join(query.cache_name());
        if let Some(cached) = read_cache(&path)? {
            log::debug!("renewables cache hit {}", path.display());
            return Ok(cached);
        }
        let body = self.download(&query.url(&self.base_url))?;
        let cf = parse_response(&body, query)?;
        write_cache(&path, &cf)?;
        Ok(cf)
    }

    fn download(&self, url: &str) -> Result<String> {
        let mut headers = Vec::new();
        if let Some(token) = &self.token {
            headers.push(("Authorization", format!("Token {token}")));
        }
        let mut attempt = 0;
        loop {
            let outcome = self.transport.get(url, &headers);
            let retryable = match &outcome {
                Ok(r) if r.status == 200 => return Ok(outcome.expect("checked").body),
                Ok(r) => r.status == 429 || r.status >= 500,
                Err(_) => true,
            };
            let describe = match &outcome {
                Ok(r) => format!("HTTP {}: {}", r.status, r.body.chars().take(200).collect::<String>()),
                Err(e) => e.to_string(),
            };
            if !retryable || attempt >= self.retry.max_retries {
                return Err(Error::Http(format!("{describe} after {} attempt(s)", attempt + 1)));
            }
            let delay = self.retry.base_delay * 2u32.pow(attempt);
            log::warn!("renewables request failed ({describe}); retrying in {delay:?}");
            std::thread::sleep(delay);
            attempt += 1;
        }
    }
}

/// [`NinjaClient::fetch`] with a client configured from the environment.
pub fn fetch_renewables(lat: f64, lon: f64, year: i32, capacity: f64, kind: RenewableKind) -> Result<Vec<f64>> {
    NinjaClient::from_env().fetch(&RenewablesQuery { lat, lon, year, capacity, kind })
}

/// Writes a year of hourly wind and PV capacity factors in the renewables CSV
/// schema (`date,hour,wind_cf,pv_cf`). Hour k of the series maps to day
/// `k / 24`, hour `k % 24 + 1`, as returned by the service (UTC).
pub fn write_renewables_csv(year: i32, wind: &[f64], pv: &[f64], path: &Path) -> Result<()> {
    if wind.len() != pv.len() || wind.len() % 24 != 0 {
        return Err(Error::Invalid(format!("series lengths {} and {} are not whole matching days", wind.len(), pv.len())));
    }
    let start = chrono::NaiveDate::from_ymd_opt(year, 1, 1).ok_or_else(|| Error::Invalid(format!("bad year {year}")))?;
    let err = |e| crate::config::csv_error(path, e);
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(crate::history::RENEWABLE_HEADER).map_err(err)?;
    for (k, (a, b)) in wind.iter().zip(pv).enumerate() {
        let date = start + chrono::Days::new((k / 24) as u64);
        w.write_record([date.format("%Y-%m-%d").to_string(), (k % 24 + 1).to_string(), a.to_string(), b.to_string()])
            .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    capacity_factor: Vec<f64>,
}

fn read_cache(path: &Path) -> Result<Option<Vec<f64>>> {
    let _guard = CACHE_LOCK.lock().unwrap_or_else(|e| e.into_inner());
    match std::fs::read_to_string(path) {
        Ok(text) => Ok(Some(serde_json::from_str::<CacheFile>(&text)?.capacity_factor)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(path, e)),
    }
}

fn write_cache(path: &Path, cf: &[f64]) -> Result<()> {
    let _guard = CACHE_LOCK.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string(&CacheFile { capacity_factor: cf.to_vec() })?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_response(body: &str, query: &RenewablesQuery) -> Result<Vec<f64>> {
    let bad = |m: String| Error::Http(format!("malformed renewables response: {m}"));
    let value: serde_json::Value = serde_json::from_str(body).map_err(|e| bad(e.to_string()))?;
    let data = value.get("data").and_then(|d| d.as_object()).ok_or_else(|| bad("missing data object".into()))?;
    let mut points: Vec<(i64, f64)> = Vec::with_capacity(data.len());
    for (stamp, entry) in data {
        let t: i64 = stamp.parse().map_err(|_| bad(format!("bad timestamp {stamp:?}")))?;
        let e = entry
            .get("electricity")
            .and_then(|v| v.as_f64())
            .ok_or_else(|| bad(format!("no electricity value at {stamp}")))?;
        points.push((t, e));
    }
    points.sort_by_key(|p| p.0);
    let expected = query.expected_hours();
    if points.len() != expected {
        return Err(bad(format!("{} hourly values, expected {expected}", points.len())));
    }
    let kw = query.capacity * 1000.0;
    Ok(points.iter().map(|&(_, e)| (e / kw).clamp(0.0, 1.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    struct Scripted {
        calls: Arc<AtomicUsize>,
        failures: usize,
        status: u16,
        body: String,
    }

    impl Transport for Scripted {
        fn get(&self, _url: &str, headers: &[(&str, String)]) -> Result<HttpResponse> {
            assert!(headers.iter().any(|(n, v)| *n == "Authorization" && v == "Token secret"));
            let k = self.calls.fetch_add(1, Ordering::SeqCst);
            if k < self.failures {
                Ok(HttpResponse { status: self.status, body: "slow down".into() })
            } else {
                Ok(HttpResponse { status: 200, body: self.body.clone() })
            }
        }
    }

    fn body(hours: usize, capacity_kw: f64) -> String {
        let data: serde_json::Map<String, serde_json::Value> = (0..hours)
            .map(|h| {
                let stamp = 1_672_531_200_000i64 + 3_600_000 * h as i64;
                (stamp.to_string(), serde_json::json!({ "electricity": capacity_kw * ((h % 10) as f64 / 10.0) }))
            })
            .collect();
        serde_json::json!({ "data": data, "metadata": {} }).to_string()
    }

    fn client(dir: &Path, failures: usize, status: u16, hours: usize) -> (NinjaClient, Arc<AtomicUsize>) {
        let calls = Arc::new(AtomicUsize::new(0));
        let transport = Scripted { calls: calls.clone(), failures, status, body: body(hours, 30_000.0) };
        let client = NinjaClient {
            transport: Box::new(transport),
            token: Some("secret".into()),
            cache_dir: dir.to_path_buf(),
            retry: RetryPolicy { max_retries: 2, base_delay: Duration::ZERO },
            base_url: "http://test".into(),
        };
        (client, calls)
    }

    fn query() -> RenewablesQuery {
        RenewablesQuery { lat: 41.39, lon: 2.13, year: 2023, capacity: 30.0, kind: RenewableKind::Pv }
    }

    #[test]
    fn cache_serves_repeat_queries() {
        let dir = tempfile::tempdir().unwrap();
        let (c, calls) = client(dir.path(), 0, 200, 8760);
        let first = c.fetch(&query()).unwrap();
        assert_eq!(first.len(), 8760);
        assert_eq!(first[3], 0.3);
        let second = c.fetch(&query()).unwrap();
        assert_eq!(first, second);
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn rate_limit_retries_then_fails() {
        let dir = tempfile::tempdir().unwrap();
        let (c, calls) = client(dir.path(), 2, 429, 8760);
        assert!(c.fetch(&query()).is_ok());
        assert_eq!(calls.load(Ordering::SeqCst), 3);

        let dir = tempfile::tempdir().unwrap();
        let (c, calls) = client(dir.path(), 10, 429, 8760);
        assert!(matches!(c.fetch(&query()), Err(Error::Http(_))));
        assert_eq!(calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn client_errors_are_not_retried_and_lengths_checked() {
        let dir = tempfile::tempdir().unwrap();
        let (c, calls) = client(dir.path(), 1, 403, 8760);
        assert!(c.fetch(&query()).is_err());
        assert_eq!(calls.load(Ordering::SeqCst), 1);

        let (c, _) = client(dir.path(), 0, 200, 8000);
        assert!(c.fetch(&query()).is_err());
        let leap = RenewablesQuery { year: 2024, ..query() };
        let (c, _) = client(dir.path(), 0, 200, 8784);
        assert_eq!(c.fetch(&leap).unwrap().len(), 8784);
    }

    #[test]
    fn urls_name_the_technology() {
        assert!(query().url("http://x").starts_with("http://x/data/pv?lat=41.39&lon=2.13&date_from=2023-01-01"));
        let wind = RenewablesQuery { kind: RenewableKind::Wind, ..query() };
        assert!(wind.url("http://x").contains("/data/wind?") && wind.url("http://x").contains("capacity=30000"));
    }
}
