//! X.509 parsing into the handful of fields the features read, plus
//! self-signedness and chain verification.

pub(crate) mod der;
mod name;
mod verify;

pub use name::{dn_equal, Attribute, AttributeType, DistinguishedName};
pub use verify::{verify_chain, Verdict, VerificationOutcome};

use der::{Reader, Tlv};
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CertError {
    #[error("malformed certificate: {0}")]
    MalformedInput(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl From<der::DerError> for CertError {
    fn from(e: der::DerError) -> Self {
        CertError::MalformedInput(e.0)
    }
}

pub const MD5_WITH_RSA: &str = "1.2.840.113549.1.1.4";

const SIGNATURE_NAMES: &[(&str, &str)] = &[
    ("1.2.840.113549.1.1.2", "md2WithRSAEncryption"),
    (MD5_WITH_RSA, "md5WithRSAEncryption"),
    ("1.2.840.113549.1.1.5", "sha1WithRSAEncryption"),
    ("1.2.840.113549.1.1.10", "rsassaPss"),
    ("1.2.840.113549.1.1.11", "sha256WithRSAEncryption"),
    ("1.2.840.113549.1.1.12", "sha384WithRSAEncryption"),
    ("1.2.840.113549.1.1.13", "sha512WithRSAEncryption"),
    ("1.2.840.113549.1.1.14", "sha224WithRSAEncryption"),
    ("1.2.840.10040.4.3", "dsaWithSHA1"),
    ("1.2.840.10045.4.1", "ecdsa-with-SHA1"),
    ("1.2.840.10045.4.3.2", "ecdsa-with-SHA256"),
    ("1.2.840.10045.4.3.3", "ecdsa-with-SHA384"),
    ("1.2.840.10045.4.3.4", "ecdsa-with-SHA512"),
    ("1.3.101.112", "ED25519"),
    ("1.3.101.113", "ED448"),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureAlgorithm {
    pub oid: String,
    /// OpenSSL-style long name, or the dotted identifier when unknown.
    pub name: String,
}

impl SignatureAlgorithm {
    pub fn from_oid(oid: String) -> Self {
        let name = SIGNATURE_NAMES
            .iter()
            .find(|(o, _)| *o == oid)
            .map(|(_, n)| n.to_string())
            .unwrap_or_else(|| oid.clone());
        SignatureAlgorithm { oid, name }
    }

    pub fn is_md5_rsa(&self) -> bool {
        self.oid == MD5_WITH_RSA
    }
}

/// Parsed view of one certificate. `der` is authoritative; everything else
/// is derived from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateSummary {
    pub serial: BigUint,
    /// The encoded serial was negative and has been replaced by its magnitude.
    pub serial_was_negative: bool,
    pub signature_algorithm: SignatureAlgorithm,
    pub issuer: DistinguishedName,
    pub subject: DistinguishedName,
    pub not_before: i64,
    pub not_after: i64,
    pub spki_der: Vec<u8>,
    pub der: Vec<u8>,
    pub fingerprint: String,
}

impl CertificateSummary {
    /// Issuer name equals subject name (multiset comparison).
    pub fn is_self_issued(&self) -> bool {
        dn_equal(&self.issuer, &self.subject)
    }

    pub fn validity_seconds(&self) -> i64 {
        self.not_after - self.not_before
    }
}

/// Lowercase hex SHA-256 of the given bytes.
pub fn fingerprint(der: &[u8]) -> String {
    hex::encode(Sha256::digest(der))
}

const PEM_TAG: &str = "CERTIFICATE";

fn looks_like_pem(bytes: &[u8]) -> bool {
    let head = &bytes[..bytes.len().min(4096)];
    head.windows(11).any(|w| w == b"-----BEGIN ")
}

/// Parses a single certificate given as DER or as PEM text with exactly one
/// CERTIFICATE block.
pub fn parse_certificate(bytes: &[u8]) -> Result<CertificateSummary, CertError> {
    if looks_like_pem(bytes) {
        let blocks = pem::parse_many(bytes).map_err(|e| CertError::MalformedInput(format!("PEM: {e}")))?;
        let certs: Vec<_> = blocks.iter().filter(|b| b.tag() == PEM_TAG).collect();
        match certs.len() {
            1 => parse_der(certs[0].contents()),
            0 => Err(CertError::MalformedInput("no CERTIFICATE block in PEM input".into())),
            n => Err(CertError::MalformedInput(format!(
                "expected one CERTIFICATE block, found {n}"
            ))),
        }
    } else {
        parse_der(bytes)
    }
}

/// Parses every CERTIFICATE block of a PEM bundle (or a single DER blob).
pub fn parse_bundle(bytes: &[u8]) -> Result<Vec<CertificateSummary>, CertError> {
    if !looks_like_pem(bytes) {
        return parse_der(bytes).map(|c| vec![c]);
    }
    pem::parse_many(bytes)
        .map_err(|e| CertError::MalformedInput(format!("PEM: {e}")))?
        .iter()
        .filter(|b| b.tag() == PEM_TAG)
        .map(|b| parse_der(b.contents()))
        .collect()
}

/// Loads a trust store from a PEM bundle file.
pub fn load_trust_store(path: &Path) -> Result<Vec<CertificateSummary>, CertError> {
    let bytes = std::fs::read(path).map_err(|source| CertError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_bundle(&bytes)
}

fn parse_algorithm(tlv: Tlv<'_>) -> Result<String, CertError> {
    let mut r = tlv.expect(der::TAG_SEQUENCE, "AlgorithmIdentifier")?.reader();
    let oid = r.read_tag(der::TAG_OID, "algorithm")?;
    Ok(der::decode_oid(oid.content)?)
}

fn parse_name(tlv: Tlv<'_>) -> Result<DistinguishedName, CertError> {
    let mut rdns = tlv.expect(der::TAG_SEQUENCE, "Name")?.reader();
    let mut attributes = Vec::new();
    while !rdns.is_empty() {
        let mut set = rdns.read_tag(der::TAG_SET, "RelativeDistinguishedName")?.reader();
        while !set.is_empty() {
            let mut atv = set.read_tag(der::TAG_SEQUENCE, "AttributeTypeAndValue")?.reader();
            let oid = der::decode_oid(atv.read_tag(der::TAG_OID, "attribute type")?.content)?;
            let value = der::decode_string(atv.read()?);
            attributes.push(Attribute { oid, value });
        }
    }
    Ok(DistinguishedName::new(attributes))
}

fn parse_serial(tlv: Tlv<'_>) -> Result<(BigUint, bool), CertError> {
    let bytes = tlv.expect(der::TAG_INTEGER, "serialNumber")?.content;
    if bytes.is_empty() {
        return Err(CertError::MalformedInput("empty serial number".into()));
    }
    if bytes[0] & 0x80 == 0 {
        return Ok((BigUint::from_bytes_be(bytes), false));
    }
    // two's complement magnitude: invert and add one
    let inverted: Vec<u8> = bytes.iter().map(|b| !b).collect();
    let magnitude = BigUint::from_bytes_be(&inverted) + 1u32;
    log::warn!("negative serial number normalized to {magnitude}");
    Ok((magnitude, true))
}

fn parse_der(der_bytes: &[u8]) -> Result<CertificateSummary, CertError> {
    let mut outer = Reader::new(der_bytes);
    let cert = outer.read_tag(der::TAG_SEQUENCE, "Certificate")?;
    if !outer.is_empty() {
        return Err(CertError::MalformedInput("trailing bytes after certificate".into()));
    }
    let der_bytes = cert.raw;
    let mut c = cert.reader();
    let tbs = c.read_tag(der::TAG_SEQUENCE, "TBSCertificate")?;
    let signature_algorithm = SignatureAlgorithm::from_oid(parse_algorithm(c.read()?)?);
    c.read_tag(der::TAG_BIT_STRING, "signatureValue")?;

    let mut t = tbs.reader();
    t.read_optional(0xa0)?; // [0] EXPLICIT version
    let (serial, serial_was_negative) = parse_serial(t.read()?)?;
    t.read_tag(der::TAG_SEQUENCE, "signature")?;
    let issuer = parse_name(t.read()?)?;
    let validity = t
        .read()
        .and_then(|v| v.expect(der::TAG_SEQUENCE, "Validity"))
        .map_err(|e| CertError::MalformedInput(format!("missing validity: {}", e.0)))?;
    let mut v = validity.reader();
    let not_before = der::decode_time(v.read()?)?;
    let not_after = der::decode_time(v.read()?)?;
    if not_before > not_after {
        return Err(CertError::MalformedInput("notBefore is later than notAfter".into()));
    }
    let subject = parse_name(t.read()?)?;
    let spki = t.read_tag(der::TAG_SEQUENCE, "SubjectPublicKeyInfo")?;
    // issuerUniqueID, subjectUniqueID and extensions are not needed

    Ok(CertificateSummary {
        serial,
        serial_was_negative,
        signature_algorithm,
        issuer,
        subject,
        not_before,
        not_after,
        spki_der: spki.raw.to_vec(),
        der: der_bytes.to_vec(),
        fingerprint: fingerprint(der_bytes),
    })
}
