//! The fifteen certificate features (F1–F15) for a domain and the
//! certificate it served.

mod bogus;
pub mod csv;
mod jaccard;

pub use bogus::{is_bogus_subject, BogusValueList, DEFAULT_BOGUS_VALUES};
pub use jaccard::{jaccard, jaccard_with, shingles, Shingle};

use crate::cert::{dn_equal, parse_certificate, verify_chain, AttributeType, CertificateSummary};
use crate::corpus::{latest_per_domain, CorpusIndex, IndexMismatch};
use crate::harvest::DomainRecord;
use crate::par;
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Stand-in for an absent name attribute.
pub const JUST_NONE: &str = "JustNone";

/// Validity periods longer than this many days set F8.
pub const LONG_VALIDITY_DAYS: u64 = 3 * 365;

const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureKind {
    Boolean,
    Categorical,
    Integer,
    Real,
}

impl FeatureKind {
    pub fn is_numeric(self) -> bool {
        matches!(self, FeatureKind::Integer | FeatureKind::Real)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureId {
    F1,
    F2,
    F3,
    F4,
    F5,
    F6,
    F7,
    F8,
    F9,
    F10,
    F11,
    F12,
    F13,
    F14,
    F15,
}

impl FeatureId {
    pub const ALL: [FeatureId; 15] = [
        FeatureId::F1,
        FeatureId::F2,
        FeatureId::F3,
        FeatureId::F4,
        FeatureId::F5,
        FeatureId::F6,
        FeatureId::F7,
        FeatureId::F8,
        FeatureId::F9,
        FeatureId::F10,
        FeatureId::F11,
        FeatureId::F12,
        FeatureId::F13,
        FeatureId::F14,
        FeatureId::F15,
    ];

    pub const BOOLEAN: [FeatureId; 8] = [
        FeatureId::F1,
        FeatureId::F2,
        FeatureId::F3,
        FeatureId::F4,
        FeatureId::F5,
        FeatureId::F6,
        FeatureId::F7,
        FeatureId::F8,
    ];

    /// Zero-based position.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn kind(self) -> FeatureKind {
        use FeatureId::*;
        match self {
            F1 | F2 | F3 | F4 | F5 | F6 | F7 | F8 => FeatureKind::Boolean,
            F9 | F10 | F11 | F12 => FeatureKind::Categorical,
            F13 | F14 => FeatureKind::Integer,
            F15 => FeatureKind::Real,
        }
    }

    /// Lowercase column name, e.g. `f7`.
    pub fn name(self) -> &'static str {
        ["f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8", "f9", "f10", "f11", "f12", "f13", "f14", "f15"]
            [self.index()]
    }

    pub fn description(self) -> &'static str {
        use FeatureId::*;
        match self {
            F1 => "md5WithRSAEncryption signature",
            F2 => "bogus subject value",
            F3 => "self-signed",
            F4 => "expired",
            F5 => "verification failed",
            F6 => "certificate shared with another domain",
            F7 => "serial shared with another certificate",
            F8 => "validity longer than 3 years",
            F9 => "issuer common name",
            F10 => "issuer organization",
            F11 => "issuer country",
            F12 => "subject country",
            F13 => "validity period in days",
            F14 => "serial number length",
            F15 => "host / common name similarity",
        }
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        FeatureId::ALL
            .into_iter()
            .find(|f| f.name() == lower)
            .ok_or_else(|| format!("unknown feature {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    /// Fraudulent (phishing or typosquatting).
    Pos,
    /// Legitimate.
    Neg,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Pos => "pos",
            Label::Neg => "neg",
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Pos
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pos" | "positive" | "1" => Ok(Label::Pos),
            "neg" | "negative" | "0" => Ok(Label::Neg),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Borrowed view of one feature value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValueRef<'a> {
    Bool(bool),
    Cat(&'a str),
    Int(u64),
    Real(f64),
}

impl ValueRef<'_> {
    /// Numeric reading: booleans as 0/1, categoricals have none.
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ValueRef::Bool(b) => Some(b as u8 as f64),
            ValueRef::Int(i) => Some(i as f64),
            ValueRef::Real(r) => Some(r),
            ValueRef::Cat(_) => None,
        }
    }
}

/// F1–F15 for one (domain, certificate) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub domain: String,
    pub f1_md5: bool,
    pub f2_bogus_subject: bool,
    pub f3_self_signed: bool,
    pub f4_expired: bool,
    pub f5_verification_failed: bool,
    pub f6_common_certificate: bool,
    pub f7_common_serial: bool,
    pub f8_validity_gt_3y: bool,
    pub f9_issuer_cn: String,
    pub f10_issuer_org: String,
    pub f11_issuer_country: String,
    pub f12_subject_country: String,
    pub f13_validity_days: u64,
    pub f14_serial_digit_count: u64,
    pub f15_name_similarity: f64,
    pub label: Option<Label>,
}

impl FeatureVector {
    /// All-false / `JustNone` / zero vector, useful as a starting point.
    pub fn blank(domain: impl Into<String>) -> Self {
        FeatureVector {
            domain: domain.into(),
            f1_md5: false,
            f2_bogus_subject: false,
            f3_self_signed: false,
            f4_expired: false,
            f5_verification_failed: false,
            f6_common_certificate: false,
            f7_common_serial: false,
            f8_validity_gt_3y: false,
            f9_issuer_cn: JUST_NONE.into(),
            f10_issuer_org: JUST_NONE.into(),
            f11_issuer_country: JUST_NONE.into(),
            f12_subject_country: JUST_NONE.into(),
            f13_validity_days: 0,
            f14_serial_digit_count: 1,
            f15_name_similarity: 0.0,
            label: None,
        }
    }

    pub fn value(&self, id: FeatureId) -> ValueRef<'_> {
        use FeatureId::*;
        match id {
            F1 => ValueRef::Bool(self.f1_md5),
            F2 => ValueRef::Bool(self.f2_bogus_subject),
            F3 => ValueRef::Bool(self.f3_self_signed),
            F4 => ValueRef::Bool(self.f4_expired),
            F5 => ValueRef::Bool(self.f5_verification_failed),
            F6 => ValueRef::Bool(self.f6_common_certificate),
            F7 => ValueRef::Bool(self.f7_common_serial),
            F8 => ValueRef::Bool(self.f8_validity_gt_3y),
            F9 => ValueRef::Cat(&self.f9_issuer_cn),
            F10 => ValueRef::Cat(&self.f10_issuer_org),
            F11 => ValueRef::Cat(&self.f11_issuer_country),
            F12 => ValueRef::Cat(&self.f12_subject_country),
            F13 => ValueRef::Int(self.f13_validity_days),
            F14 => ValueRef::Int(self.f14_serial_digit_count),
            F15 => ValueRef::Real(self.f15_name_similarity),
        }
    }

    pub fn boolean(&self, id: FeatureId) -> Option<bool> {
        match self.value(id) {
            ValueRef::Bool(b) => Some(b),
            _ => None,
        }
    }

    pub fn set_bool(&mut self, id: FeatureId, v: bool) {
        use FeatureId::*;
        match id {
            F1 => self.f1_md5 = v,
            F2 => self.f2_bogus_subject = v,
            F3 => self.f3_self_signed = v,
            F4 => self.f4_expired = v,
            F5 => self.f5_verification_failed = v,
            F6 => self.f6_common_certificate = v,
            F7 => self.f7_common_serial = v,
            F8 => self.f8_validity_gt_3y = v,
            other => panic!("{other} is not a boolean feature"),
        }
    }

    pub fn set_categorical(&mut self, id: FeatureId, v: String) {
        use FeatureId::*;
        match id {
            F9 => self.f9_issuer_cn = v,
            F10 => self.f10_issuer_org = v,
            F11 => self.f11_issuer_country = v,
            F12 => self.f12_subject_country = v,
            other => panic!("{other} is not a categorical feature"),
        }
    }

    /// Sets a numeric feature; integers are rounded and clamped at zero.
    pub fn set_numeric(&mut self, id: FeatureId, v: f64) {
        use FeatureId::*;
        match id {
            F13 => self.f13_validity_days = v.round().max(0.0) as u64,
            F14 => self.f14_serial_digit_count = v.round().max(0.0) as u64,
            F15 => self.f15_name_similarity = v,
            other => panic!("{other} is not a numeric feature"),
        }
    }

    /// Structural invariants that hold for vectors extracted from real
    /// certificates (synthetic vectors may violate the cross-feature ones).
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.f8_validity_gt_3y != (self.f13_validity_days > LONG_VALIDITY_DAYS) {
            return Err(format!("{}: f8 disagrees with f13={}", self.domain, self.f13_validity_days));
        }
        if self.f6_common_certificate && !self.f7_common_serial {
            return Err(format!("{}: f6 without f7", self.domain));
        }
        for (id, v) in [
            (FeatureId::F9, &self.f9_issuer_cn),
            (FeatureId::F10, &self.f10_issuer_org),
            (FeatureId::F11, &self.f11_issuer_country),
            (FeatureId::F12, &self.f12_subject_country),
        ] {
            if v.is_empty() {
                return Err(format!("{}: {id} is empty instead of {JUST_NONE}", self.domain));
            }
        }
        if !(0.0..=1.0).contains(&self.f15_name_similarity) {
            return Err(format!("{}: f15 out of range", self.domain));
        }
        Ok(())
    }
}

/// Lowercase, trim, drop one trailing dot, then drop one leading `*.` or
/// `www.`. Inner labels are left alone.
pub fn normalize_hostname(name: &str) -> String {
    let lower = name.trim().to_lowercase();
    let bare = lower.strip_suffix('.').unwrap_or(&lower);
    bare.strip_prefix("*.")
        .or_else(|| bare.strip_prefix("www."))
        .unwrap_or(bare)
        .to_string()
}

/// Decimal digits in the serial; zero has one digit.
pub fn serial_digit_count(serial: &BigUint) -> u64 {
    serial.to_str_radix(10).len() as u64
}

fn attr_or_none(value: Option<&str>) -> String {
    match value.map(str::trim) {
        Some(v) if !v.is_empty() => v.to_string(),
        _ => JUST_NONE.to_string(),
    }
}

/// Everything besides the certificate that extraction needs.
#[derive(Debug, Clone, Copy)]
pub struct ExtractContext<'a> {
    pub index: &'a CorpusIndex,
    pub trust_store: &'a [CertificateSummary],
    pub bogus: &'a BogusValueList,
    pub shingle: Shingle,
}

/// Computes F1–F15 for `cert` as served by `domain` at `harvest_time`.
pub fn extract_features(
    cert: &CertificateSummary,
    presented_chain: &[CertificateSummary],
    domain: &str,
    harvest_time: i64,
    ctx: &ExtractContext<'_>,
) -> Result<FeatureVector, IndexMismatch> {
    let (f6, f7) = ctx.index.duplicate_flags(domain, &cert.fingerprint)?;
    let validity_days = (cert.validity_seconds() / SECONDS_PER_DAY).max(0) as u64;
    let verdict = verify_chain(cert, presented_chain, ctx.trust_store, harvest_time);
    let subject_cn = attr_or_none(cert.subject.get(AttributeType::CommonName));
    Ok(FeatureVector {
        domain: domain.to_string(),
        f1_md5: cert.signature_algorithm.is_md5_rsa(),
        f2_bogus_subject: is_bogus_subject(&cert.subject, ctx.bogus),
        f3_self_signed: dn_equal(&cert.issuer, &cert.subject),
        f4_expired: harvest_time > cert.not_after,
        f5_verification_failed: !verdict.is_verified(),
        f6_common_certificate: f6,
        f7_common_serial: f7,
        f8_validity_gt_3y: validity_days > LONG_VALIDITY_DAYS,
        f9_issuer_cn: attr_or_none(cert.issuer.get(AttributeType::CommonName)),
        f10_issuer_org: attr_or_none(cert.issuer.get(AttributeType::Organization)),
        f11_issuer_country: attr_or_none(cert.issuer.get(AttributeType::Country)),
        f12_subject_country: attr_or_none(cert.subject.get(AttributeType::Country)),
        f13_validity_days: validity_days,
        f14_serial_digit_count: serial_digit_count(&cert.serial),
        f15_name_similarity: jaccard_with(&normalize_hostname(domain), &normalize_hostname(&subject_cn), ctx.shingle),
        label: None,
    })
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error(transparent)]
    IndexMismatch(#[from] IndexMismatch),
    #[error("{domain}: {message}")]
    BadCertificate { domain: String, message: String },
}

/// Extracts every record that carries a certificate (latest record per
/// domain), in parallel, preserving order. Records whose certificate does
/// not parse are reported and skipped.
pub fn extract_corpus(records: &[DomainRecord], ctx: &ExtractContext<'_>) -> Result<Vec<FeatureVector>, ExtractError> {
    let latest = latest_per_domain(records);
    let results = par::map_slice(&latest, |r| -> Option<Result<FeatureVector, ExtractError>> {
        let der = r.cert_der.as_ref()?;
        let cert = match parse_certificate(der) {
            Ok(c) => c,
            Err(e) => {
                log::warn!("{}: skipping unparseable certificate: {e}", r.domain);
                return None;
            }
        };
        let chain: Vec<CertificateSummary> = r
            .presented_chain_der
            .iter()
            .flatten()
            .filter_map(|d| parse_certificate(d).ok())
            .collect();
        Some(extract_features(&cert, &chain, &r.domain, r.harvest_time, ctx).map_err(ExtractError::from))
    });
    results.into_iter().flatten().collect()
}
