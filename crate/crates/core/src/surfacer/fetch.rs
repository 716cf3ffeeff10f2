//! Politeness-bounded page fetching.
//!
//! A [`Fetcher`] wraps a [`Transport`] and enforces the per-host minimum
//! delay and per-site fetch budget of a [`FetchPolicy`]. Requests to one host
//! are serialized (a host's slot stays locked for the whole request), while
//! different hosts proceed independently. Time comes from an injected
//! [`Clock`] so tests can run against a fake clock without real sleeps.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FetchError {
    #[error("fetch budget of {budget} exhausted for host {host}")]
    FetchBudgetExhausted { host: String, budget: usize },
    #[error("HTTP status {0}")]
    HttpError(u16),
    #[error("request timed out")]
    Timeout,
    #[error("invalid url {0:?}")]
    InvalidUrl(String),
    #[error("transport failure: {0}")]
    Transport(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchPolicy {
    pub min_delay_per_host: Duration,
    pub max_fetches_per_site: usize,
    pub timeout: Duration,
    pub user_agent: String,
}

impl Default for FetchPolicy {
    fn default() -> Self {
        Self {
            min_delay_per_host: Duration::from_secs(1),
            max_fetches_per_site: 5_000,
            timeout: Duration::from_secs(10),
            user_agent: concat!("deepsurf/", env!("CARGO_PKG_VERSION")).to_string(),
        }
    }
}

pub trait Clock: Send + Sync {
    /// Time elapsed since the clock's epoch.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

#[derive(Debug)]
pub struct SystemClock {
    epoch: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self {
            epoch: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.epoch.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Manually driven clock; `sleep` advances time instantly.
#[derive(Debug, Default)]
pub struct FakeClock {
    now: Mutex<Duration>,
}

impl FakeClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, d: Duration) {
        *self.now.lock().unwrap() += d;
    }
}

impl Clock for FakeClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        self.advance(d);
    }
}

/// Raw GET transport; politeness is applied by [`Fetcher`].
pub trait Transport: Send + Sync {
    fn get(&self, url: &Url, policy: &FetchPolicy) -> Result<String, FetchError>;
}

/// Plain HTTP/1.1 transport with at most five redirects.
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(policy: &FetchPolicy) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(policy.timeout))
            .max_redirects(5)
            .user_agent(policy.user_agent.as_str())
            .http_status_as_error(false)
            .build();
        Self {
            agent: config.into(),
        }
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &Url, _policy: &FetchPolicy) -> Result<String, FetchError> {
        let mut resp = self.agent.get(url.as_str()).call().map_err(|e| match e {
            ureq::Error::Timeout(_) => FetchError::Timeout,
            other => FetchError::Transport(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err(FetchError::HttpError(status));
        }
        resp.body_mut()
            .read_to_string()
            .map_err(|e| FetchError::Transport(e.to_string()))
    }
}

/// Anything that can return page text for a URL.
pub trait PageSource {
    fn fetch_page(&self, url: &str) -> Result<String, FetchError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FetchEvent {
    pub host: String,
    pub url: String,
    /// Issue time in milliseconds on the fetcher's clock.
    pub at_ms: f64,
    pub ok: bool,
}

#[derive(Debug, Default)]
struct HostSlot {
    last: Option<Duration>,
    count: usize,
}

pub struct Fetcher {
    transport: Arc<dyn Transport>,
    policy: FetchPolicy,
    clock: Arc<dyn Clock>,
    hosts: Mutex<BTreeMap<String, Arc<Mutex<HostSlot>>>>,
    log: Mutex<Vec<FetchEvent>>,
}

impl Fetcher {
    pub fn new(transport: Arc<dyn Transport>, policy: FetchPolicy, clock: Arc<dyn Clock>) -> Self {
        Self {
            transport,
            policy,
            clock,
            hosts: Mutex::new(BTreeMap::new()),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn policy(&self) -> &FetchPolicy {
        &self.policy
    }

    /// Fetches `url`, first waiting until the host's minimum delay has passed.
    pub fn fetch(&self, url: &str) -> Result<String, FetchError> {
        let parsed = Url::parse(url).map_err(|_| FetchError::InvalidUrl(url.to_string()))?;
        let host = host_key(&parsed);
        let slot = {
            let mut hosts = self.hosts.lock().unwrap();
            Arc::clone(hosts.entry(host.clone()).or_default())
        };
        let mut slot = slot.lock().unwrap();
        if slot.count >= self.policy.max_fetches_per_site {
            return Err(FetchError::FetchBudgetExhausted {
                host,
                budget: self.policy.max_fetches_per_site,
            });
        }
        if let Some(last) = slot.last {
            let elapsed = self.clock.now().saturating_sub(last);
            if elapsed < self.policy.min_delay_per_host {
                self.clock.sleep(self.policy.min_delay_per_host - elapsed);
            }
        }
        let issued = self.clock.now();
        slot.last = Some(issued);
        slot.count += 1;
        let result = self.transport.get(&parsed, &self.policy);
        self.log.lock().unwrap().push(FetchEvent {
            host,
            url: url.to_string(),
            at_ms: issued.as_nanos() as f64 / 1e6,
            ok: result.is_ok(),
        });
        result
    }

    pub fn fetches_made(&self) -> usize {
        self.log.lock().unwrap().len()
    }

    pub fn fetches_for(&self, host: &str) -> usize {
        self.hosts
            .lock()
            .unwrap()
            .get(host)
            .map_or(0, |s| s.lock().unwrap().count)
    }

    pub fn events(&self) -> Vec<FetchEvent> {
        self.log.lock().unwrap().clone()
    }

    /// Issue timestamps (ms) per host, in request order.
    pub fn timestamps_by_host(&self) -> BTreeMap<String, Vec<f64>> {
        let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for e in self.log.lock().unwrap().iter() {
            out.entry(e.host.clone()).or_default().push(e.at_ms);
        }
        out
    }
}

impl PageSource for Fetcher {
    fn fetch_page(&self, url: &str) -> Result<String, FetchError> {
        self.fetch(url)
    }
}

pub(crate) fn host_key(url: &Url) -> String {
    match (url.host_str(), url.port()) {
        (Some(h), Some(p)) => format!("{h}:{p}"),
        (Some(h), None) => h.to_string(),
        _ => String::new(),
    }
}
