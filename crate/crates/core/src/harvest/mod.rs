//! HTTP/HTTPS reachability probing and leaf-certificate harvesting.

mod http;
mod tls;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::net::{IpAddr, SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HarvestError {
    #[error("invalid domain name {0:?}")]
    InvalidDomainName(String),
    #[error("invalid probe configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeConfig {
    pub connect_timeout_ms: u64,
    pub handshake_timeout_ms: u64,
    pub max_concurrency: usize,
    pub retries: u32,
    pub http_port: u16,
    pub https_port: u16,
    /// Static name-to-address overrides consulted before DNS.
    pub resolve: BTreeMap<String, IpAddr>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            connect_timeout_ms: 5_000,
            handshake_timeout_ms: 10_000,
            max_concurrency: 32,
            retries: 1,
            http_port: 80,
            https_port: 443,
            resolve: BTreeMap::new(),
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<(), HarvestError> {
        if self.max_concurrency == 0 {
            return Err(HarvestError::InvalidConfig("max_concurrency must be at least 1".into()));
        }
        if self.connect_timeout_ms == 0 || self.handshake_timeout_ms == 0 {
            return Err(HarvestError::InvalidConfig("timeouts must be positive".into()));
        }
        Ok(())
    }

    fn connect_timeout(&self) -> Duration {
        Duration::from_millis(self.connect_timeout_ms)
    }

    fn io_timeout(&self) -> Duration {
        Duration::from_millis(self.handshake_timeout_ms)
    }
}

/// Result of probing one domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainRecord {
    pub domain: String,
    pub http_ok: bool,
    pub https_ok: bool,
    /// Unix seconds, UTC.
    pub harvest_time: i64,
    /// Leaf certificate exactly as presented. Present only when `https_ok`.
    pub cert_der: Option<Vec<u8>>,
    /// Certificates the server sent after the leaf.
    pub presented_chain_der: Option<Vec<Vec<u8>>>,
    pub tls_error: Option<String>,
}

impl DomainRecord {
    pub fn category(&self) -> Category {
        match (self.http_ok, self.https_ok) {
            (true, true) => Category::Both,
            (true, false) => Category::HttpOnly,
            (false, true) => Category::HttpsOnly,
            (false, false) => Category::Neither,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    HttpOnly,
    HttpsOnly,
    Both,
    Neither,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::HttpOnly => "http_only",
            Category::HttpsOnly => "https_only",
            Category::Both => "both",
            Category::Neither => "neither",
        })
    }
}

/// Per-category record counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub both: usize,
    pub https_only: usize,
    pub http_only: usize,
    pub neither: usize,
}

impl CategoryCounts {
    pub fn add(&mut self, c: Category) {
        match c {
            Category::Both => self.both += 1,
            Category::HttpsOnly => self.https_only += 1,
            Category::HttpOnly => self.http_only += 1,
            Category::Neither => self.neither += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.both + self.https_only + self.http_only + self.neither
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a DomainRecord>) -> Self {
        let mut c = CategoryCounts::default();
        for r in records {
            c.add(r.category());
        }
        c
    }
}

/// Lowercases and checks a DNS name: 1..=253 octets, labels of 1..=63
/// letters, digits or hyphens, no leading or trailing hyphen. One trailing
/// dot is accepted and removed.
pub fn validate_domain(name: &str) -> Result<String, HarvestError> {
    let lower = name.trim().to_ascii_lowercase();
    let bare = lower.strip_suffix('.').unwrap_or(&lower);
    let bad = || HarvestError::InvalidDomainName(name.to_string());
    if bare.is_empty() || bare.len() > 253 {
        return Err(bad());
    }
    for label in bare.split('.') {
        let ok = !label.is_empty()
            && label.len() <= 63
            && !label.starts_with('-')
            && !label.ends_with('-')
            && label.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-');
        if !ok {
            return Err(bad());
        }
    }
    Ok(bare.to_string())
}

fn resolve(domain: &str, port: u16, config: &ProbeConfig) -> Vec<SocketAddr> {
    if let Some(ip) = config.resolve.get(domain) {
        return vec![SocketAddr::new(*ip, port)];
    }
    match (domain, port).to_socket_addrs() {
        Ok(addrs) => addrs.collect(),
        Err(e) => {
            log::debug!("resolving {domain}: {e}");
            Vec::new()
        }
    }
}

fn connect(addrs: &[SocketAddr], config: &ProbeConfig) -> std::io::Result<TcpStream> {
    let mut last = std::io::Error::new(std::io::ErrorKind::NotFound, "name did not resolve");
    for addr in addrs {
        match TcpStream::connect_timeout(addr, config.connect_timeout()) {
            Ok(s) => {
                s.set_read_timeout(Some(config.io_timeout()))?;
                s.set_write_timeout(Some(config.io_timeout()))?;
                return Ok(s);
            }
            Err(e) => last = e,
        }
    }
    Err(last)
}

fn now() -> i64 {
    chrono::Utc::now().timestamp()
}

/// Probes one domain for HTTP and HTTPS. Network failures are recorded in
/// the returned record; only a malformed name is an error.
pub fn probe_domain(domain: &str, config: &ProbeConfig) -> Result<DomainRecord, HarvestError> {
    config.validate()?;
    let domain = validate_domain(domain)?;
    let harvest_time = now();
    let attempts = 1 + config.retries;

    let http_addrs = resolve(&domain, config.http_port, config);
    let http_ok = (0..attempts).any(|_| http::probe(&http_addrs, &domain, config));

    let https_addrs = resolve(&domain, config.https_port, config);
    let mut outcome = tls::TlsOutcome::default();
    for _ in 0..attempts {
        outcome = tls::probe(&https_addrs, &domain, config);
        if outcome.leaf.is_some() {
            break;
        }
    }
    let https_ok = outcome.leaf.is_some();
    Ok(DomainRecord {
        domain,
        http_ok,
        https_ok,
        harvest_time,
        cert_der: outcome.leaf,
        presented_chain_der: if https_ok { Some(outcome.chain) } else { None },
        tls_error: outcome.error,
    })
}

/// Probes every domain with at most `max_concurrency` probes in flight.
/// Each input yields exactly one record, handed to `sink` on the calling
/// thread together with its input index, in completion order. Invalid names
/// produce an unreachable record carrying the validation error.
pub fn probe_corpus<F>(domains: &[String], config: &ProbeConfig, mut sink: F) -> Result<CategoryCounts, HarvestError>
where
    F: FnMut(usize, DomainRecord),
{
    config.validate()?;
    let mut counts = CategoryCounts::default();
    if domains.is_empty() {
        return Ok(counts);
    }
    let next = AtomicUsize::new(0);
    let workers = config.max_concurrency.min(domains.len());
    let (tx, rx) = mpsc::channel::<(usize, DomainRecord)>();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(name) = domains.get(i) else { break };
                let record = probe_domain(name, config).unwrap_or_else(|e| DomainRecord {
                    domain: name.trim().to_ascii_lowercase(),
                    http_ok: false,
                    https_ok: false,
                    harvest_time: now(),
                    cert_der: None,
                    presented_chain_der: None,
                    tls_error: Some(e.to_string()),
                });
                if tx.send((i, record)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, record) in rx {
            counts.add(record.category());
            sink(i, record);
        }
    });
    Ok(counts)
}

/// Reads a domain list: one name per line, blank lines and `#` comments
/// skipped.
pub fn parse_domain_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}
