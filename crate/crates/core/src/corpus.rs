//! Append-only NDJSON corpus of probe records and the corpus-wide
//! duplicate index.
//!
//! Each line is one JSON object terminated by `\n`. A final line without its
//! terminator is the signature of an interrupted append: readers drop it and
//! [`CorpusWriter::open_append`] truncates it away before writing.

use crate::cert::parse_certificate;
use crate::harvest::DomainRecord;
use crate::par;
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("storage full while appending to corpus")]
    StorageFull,
    #[error("corpus I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("serializing record: {0}")]
    SerializationFailure(String),
    #[error("corrupt record on line {line}: {message}")]
    CorruptRecord { line: usize, message: String },
}

fn io_error(e: std::io::Error) -> CorpusError {
    if e.kind() == std::io::ErrorKind::StorageFull || e.raw_os_error() == Some(28) {
        CorpusError::StorageFull
    } else {
        CorpusError::Io(e)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct WireRecord {
    domain: String,
    http_ok: bool,
    https_ok: bool,
    harvest_time: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cert_der_b64: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chain_der_b64: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tls_error: Option<String>,
}

pub fn format_timestamp(secs: i64) -> String {
    DateTime::<Utc>::from_timestamp(secs, 0)
        .unwrap_or_default()
        .to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn parse_timestamp(text: &str) -> Option<i64> {
    DateTime::parse_from_rfc3339(text).ok().map(|t| t.timestamp())
}

/// One NDJSON line, without the terminator.
pub fn encode_record(record: &DomainRecord) -> Result<String, CorpusError> {
    let wire = WireRecord {
        domain: record.domain.clone(),
        http_ok: record.http_ok,
        https_ok: record.https_ok,
        harvest_time: format_timestamp(record.harvest_time),
        cert_der_b64: record.cert_der.as_ref().map(|d| B64.encode(d)),
        chain_der_b64: record
            .presented_chain_der
            .as_ref()
            .map(|c| c.iter().map(|d| B64.encode(d)).collect()),
        tls_error: record.tls_error.clone(),
    };
    serde_json::to_string(&wire).map_err(|e| CorpusError::SerializationFailure(e.to_string()))
}

pub fn decode_record(line: &str, line_no: usize) -> Result<DomainRecord, CorpusError> {
    let corrupt = |message: String| CorpusError::CorruptRecord { line: line_no, message };
    let wire: WireRecord = serde_json::from_str(line).map_err(|e| corrupt(e.to_string()))?;
    let harvest_time = parse_timestamp(&wire.harvest_time)
        .ok_or_else(|| corrupt(format!("bad harvest_time {:?}", wire.harvest_time)))?;
    let decode = |s: &str| B64.decode(s).map_err(|e| corrupt(format!("base64: {e}")));
    let cert_der = wire.cert_der_b64.as_deref().map(decode).transpose()?;
    let presented_chain_der = wire
        .chain_der_b64
        .map(|c| c.iter().map(|s| decode(s)).collect::<Result<Vec<_>, _>>())
        .transpose()?;
    if cert_der.is_some() && !wire.https_ok {
        return Err(corrupt("cert_der present but https_ok is false".into()));
    }
    Ok(DomainRecord {
        domain: wire.domain,
        http_ok: wire.http_ok,
        https_ok: wire.https_ok,
        harvest_time,
        cert_der,
        presented_chain_der,
        tls_error: wire.tls_error,
    })
}

/// Single-writer append handle.
pub struct CorpusWriter {
    file: File,
}

impl CorpusWriter {
    /// Creates or truncates `path`.
    pub fn create(path: &Path) -> Result<Self, CorpusError> {
        Ok(CorpusWriter { file: File::create(path)? })
    }

    /// Opens `path` for appending, creating it if needed. A trailing partial
    /// line left by an interrupted write is truncated first.
    pub fn open_append(path: &Path) -> Result<Self, CorpusError> {
        let mut file = OpenOptions::new().read(true).create(true).append(true).open(path)?;
        let len = file.metadata()?.len();
        if len > 0 {
            let mut content = Vec::with_capacity(len as usize);
            file.seek(SeekFrom::Start(0))?;
            file.read_to_end(&mut content)?;
            if content.last() != Some(&b'\n') {
                let keep = content.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
                log::warn!("dropping {} bytes of partial record at end of {}", content.len() - keep, path.display());
                file.set_len(keep as u64)?;
            }
        }
        Ok(CorpusWriter { file })
    }

    pub fn from_file(file: File) -> Self {
        CorpusWriter { file }
    }

    pub fn append(&mut self, record: &DomainRecord) -> Result<(), CorpusError> {
        let mut line = encode_record(record)?;
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(io_error)?;
        self.file.flush().map_err(io_error)
    }

    pub fn sync(&mut self) -> Result<(), CorpusError> {
        self.file.sync_all().map_err(io_error)
    }

    pub fn into_file(self) -> File {
        self.file
    }
}

/// Append one record to a corpus file.
pub fn append_record(writer: &mut CorpusWriter, record: &DomainRecord) -> Result<(), CorpusError> {
    writer.append(record)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadedCorpus {
    pub records: Vec<DomainRecord>,
    /// A trailing unterminated line was discarded.
    pub dropped_partial_tail: bool,
}

pub fn read_corpus<R: Read>(reader: R) -> Result<LoadedCorpus, CorpusError> {
    let mut reader = BufReader::new(reader);
    let mut out = LoadedCorpus::default();
    let mut line = String::new();
    let mut line_no = 0;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        line_no += 1;
        if !line.ends_with('\n') {
            log::warn!("ignoring unterminated final corpus line {line_no}");
            out.dropped_partial_tail = true;
            break;
        }
        let body = line.trim_end_matches(['\n', '\r']);
        if body.trim().is_empty() {
            continue;
        }
        out.records.push(decode_record(body, line_no)?);
    }
    Ok(out)
}

pub fn load_corpus(path: &Path) -> Result<LoadedCorpus, CorpusError> {
    read_corpus(File::open(path)?)
}

/// Corpus-wide occurrence maps behind the duplicate-certificate (F6) and
/// shared-serial (F7) features. Only the latest record per domain counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusIndex {
    /// fingerprint → domains presenting that exact certificate
    pub by_fingerprint: BTreeMap<String, BTreeSet<String>>,
    /// serial (decimal) → (domain, fingerprint) pairs
    pub by_serial: BTreeMap<String, BTreeSet<(String, String)>>,
    /// fingerprint → serial (decimal)
    pub serial_of: BTreeMap<String, String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("({domain}, {fingerprint}) is not part of the corpus index")]
pub struct IndexMismatch {
    pub domain: String,
    pub fingerprint: String,
}

/// The latest record per domain (by harvest time; later input wins ties),
/// in first-seen domain order.
pub fn latest_per_domain(records: &[DomainRecord]) -> Vec<&DomainRecord> {
    let mut chosen: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (pos, r) in records.iter().enumerate() {
        chosen
            .entry(r.domain.as_str())
            .and_modify(|e| {
                if r.harvest_time >= records[e.1].harvest_time {
                    e.1 = pos;
                }
            })
            .or_insert((pos, pos));
    }
    let mut picks: Vec<(usize, usize)> = chosen.into_values().collect();
    picks.sort_unstable();
    picks.into_iter().map(|(_, pos)| &records[pos]).collect()
}

pub fn build_corpus_index(records: &[DomainRecord]) -> CorpusIndex {
    let latest = latest_per_domain(records);
    let parsed = par::map_slice(&latest, |r| {
        let der = r.cert_der.as_ref()?;
        match parse_certificate(der) {
            Ok(c) => Some((r.domain.clone(), c.fingerprint, c.serial.to_string())),
            Err(e) => {
                log::warn!("{}: certificate not indexed: {e}", r.domain);
                None
            }
        }
    });
    let mut index = CorpusIndex::default();
    for (domain, fp, serial) in parsed.into_iter().flatten() {
        index.by_fingerprint.entry(fp.clone()).or_default().insert(domain.clone());
        index.by_serial.entry(serial.clone()).or_default().insert((domain, fp.clone()));
        index.serial_of.insert(fp, serial);
    }
    index
}

impl CorpusIndex {
    pub fn contains(&self, domain: &str, fingerprint: &str) -> bool {
        self.by_fingerprint
            .get(fingerprint)
            .is_some_and(|d| d.contains(domain))
    }

    /// `(F6, F7)` for the certificate `fingerprint` served by `domain`.
    pub fn duplicate_flags(&self, domain: &str, fingerprint: &str) -> Result<(bool, bool), IndexMismatch> {
        if !self.contains(domain, fingerprint) {
            return Err(IndexMismatch {
                domain: domain.to_string(),
                fingerprint: fingerprint.to_string(),
            });
        }
        let common_cert = self.by_fingerprint[fingerprint].len() >= 2;
        let common_serial = self
            .serial_of
            .get(fingerprint)
            .and_then(|s| self.by_serial.get(s))
            .is_some_and(|holders| holders.len() >= 2);
        Ok((common_cert, common_serial))
    }

    pub fn certificate_count(&self) -> usize {
        self.by_fingerprint.values().map(BTreeSet::len).sum()
    }
}
