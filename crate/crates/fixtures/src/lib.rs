//! Test support: certificates minted with OpenSSL and a loopback farm of
//! HTTP/TLS servers that counts simultaneous connections.
//!
//! Nothing here depends on `certsieve` itself, so the certificates act as an
//! independent source of truth for the parser and feature extractor.

mod farm;

pub use farm::{Behavior, ConnStats, Farm, FarmDomain};

use openssl::asn1::{Asn1Integer, Asn1Time};
use openssl::bn::BigNum;
use openssl::ec::{EcGroup, EcKey};
use openssl::hash::MessageDigest;
use openssl::nid::Nid;
use openssl::pkey::{PKey, Private};
use openssl::rsa::Rsa;
use openssl::x509::{X509Name, X509NameBuilder, X509};
use std::sync::OnceLock;

/// Signature digest used when minting a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Digest {
    Md5,
    Sha1,
    Sha256,
}

impl Digest {
    fn message_digest(self) -> MessageDigest {
        match self {
            Digest::Md5 => MessageDigest::md5(),
            Digest::Sha1 => MessageDigest::sha1(),
            Digest::Sha256 => MessageDigest::sha256(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyKind {
    Rsa,
    EcP256,
}

const RSA_POOL: usize = 6;

fn rsa_pool() -> &'static Vec<PKey<Private>> {
    static POOL: OnceLock<Vec<PKey<Private>>> = OnceLock::new();
    POOL.get_or_init(|| {
        (0..RSA_POOL)
            .map(|_| PKey::from_rsa(Rsa::generate(2048).expect("rsa keygen")).expect("pkey"))
            .collect()
    })
}

/// One of a small pool of pre-generated keys; slot numbers wrap around.
pub fn pooled_key(kind: KeyKind, slot: usize) -> PKey<Private> {
    match kind {
        KeyKind::Rsa => rsa_pool()[slot % RSA_POOL].clone(),
        KeyKind::EcP256 => {
            static EC: OnceLock<Vec<PKey<Private>>> = OnceLock::new();
            let pool = EC.get_or_init(|| {
                let group = EcGroup::from_curve_name(Nid::X9_62_PRIME256V1).expect("p256");
                (0..RSA_POOL)
                    .map(|_| PKey::from_ec_key(EcKey::generate(&group).expect("ec")).expect("pkey"))
                    .collect()
            });
            pool[slot % RSA_POOL].clone()
        }
    }
}

/// A minted certificate together with its private key.
#[derive(Clone)]
pub struct Fixture {
    pub der: Vec<u8>,
    pub key: PKey<Private>,
    pub subject: Vec<(String, String)>,
}

impl Fixture {
    pub fn x509(&self) -> X509 {
        X509::from_der(&self.der).expect("fixture der")
    }

    pub fn pem(&self) -> String {
        String::from_utf8(self.x509().to_pem().expect("pem")).expect("utf8")
    }
}

impl std::fmt::Debug for Fixture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fixture")
            .field("subject", &self.subject)
            .field("der_len", &self.der.len())
            .finish()
    }
}

/// Builder for fixture certificates. Entries are given as OpenSSL short
/// names ("CN", "ST", ...) or dotted object identifiers.
#[derive(Debug, Clone)]
pub struct CertBuilder {
    subject: Vec<(String, String)>,
    serial: String,
    not_before: i64,
    not_after: i64,
    digest: Digest,
    key_kind: KeyKind,
    key_slot: usize,
}

/// 2009-09-01T00:00:00Z, the harvest month of the reference measurements.
pub const BASE_TIME: i64 = 1_251_763_200;
pub const DAY: i64 = 86_400;

impl CertBuilder {
    pub fn new(common_name: &str) -> Self {
        CertBuilder {
            subject: vec![("CN".into(), common_name.into())],
            serial: "1".into(),
            not_before: BASE_TIME,
            not_after: BASE_TIME + 365 * DAY,
            digest: Digest::Sha256,
            key_kind: KeyKind::Rsa,
            key_slot: 0,
        }
    }

    /// Subject with no entries at all.
    pub fn empty_subject() -> Self {
        let mut b = CertBuilder::new("");
        b.subject.clear();
        b
    }

    pub fn entry(mut self, field: &str, value: &str) -> Self {
        self.subject.push((field.into(), value.into()));
        self
    }

    /// Replaces the subject with the given ordered entries.
    pub fn subject(mut self, entries: &[(&str, &str)]) -> Self {
        self.subject = entries.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        self
    }

    /// Serial number in decimal; a leading '-' yields a negative encoding.
    pub fn serial(mut self, decimal: &str) -> Self {
        self.serial = decimal.into();
        self
    }

    pub fn validity(mut self, not_before: i64, not_after: i64) -> Self {
        self.not_before = not_before;
        self.not_after = not_after;
        self
    }

    pub fn validity_days(mut self, days: i64) -> Self {
        self.not_after = self.not_before + days * DAY;
        self
    }

    pub fn digest(mut self, digest: Digest) -> Self {
        self.digest = digest;
        self
    }

    pub fn key(mut self, kind: KeyKind, slot: usize) -> Self {
        self.key_kind = kind;
        self.key_slot = slot;
        self
    }

    fn name(entries: &[(String, String)]) -> X509Name {
        let mut nb = X509NameBuilder::new().expect("name builder");
        for (field, value) in entries {
            nb.append_entry_by_text(field, value)
                .unwrap_or_else(|e| panic!("name entry {field}={value}: {e}"));
        }
        nb.build()
    }

    fn serial_integer(&self) -> Asn1Integer {
        BigNum::from_dec_str(&self.serial)
            .and_then(|bn| bn.to_asn1_integer())
            .expect("serial")
    }

    fn build(self, issuer: Option<&Fixture>) -> Fixture {
        let key = pooled_key(self.key_kind, self.key_slot);
        let mut b = X509::builder().expect("x509 builder");
        b.set_version(2).expect("version");
        b.set_serial_number(&self.serial_integer()).expect("serial");
        let subject = Self::name(&self.subject);
        b.set_subject_name(&subject).expect("subject");
        match issuer {
            Some(ca) => b.set_issuer_name(&Self::name(&ca.subject)).expect("issuer"),
            None => b.set_issuer_name(&subject).expect("issuer"),
        }
        b.set_pubkey(&key).expect("pubkey");
        b.set_not_before(&Asn1Time::from_unix(self.not_before).expect("nb")).expect("nb");
        b.set_not_after(&Asn1Time::from_unix(self.not_after).expect("na")).expect("na");
        let signer = issuer.map(|ca| &ca.key).unwrap_or(&key);
        let md = self.digest.message_digest();
        b.sign(signer, md).expect("sign");
        let der = b.build().to_der().expect("der");
        Fixture {
            der,
            key,
            subject: self.subject,
        }
    }

    /// Issuer name equal to the subject, signed with the certificate's own key.
    pub fn self_signed(self) -> Fixture {
        self.build(None)
    }

    pub fn signed_by(self, ca: &Fixture) -> Fixture {
        self.build(Some(ca))
    }

    /// Issuer name copied from `issuer_entries` but signed with the
    /// certificate's own key (a forged or broken link).
    pub fn claiming_issuer(self, issuer_entries: &[(&str, &str)]) -> Fixture {
        let fake = Fixture {
            der: Vec::new(),
            key: pooled_key(self.key_kind, self.key_slot),
            subject: issuer_entries.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        };
        self.build(Some(&fake))
    }
}

/// Certificate authority fixture with a fixed subject.
pub fn test_root(name: &str, slot: usize) -> Fixture {
    CertBuilder::new(name)
        .entry("O", "Fixture Trust")
        .entry("C", "US")
        .serial("1000")
        .validity(BASE_TIME - 3650 * DAY, BASE_TIME + 3650 * DAY)
        .key(KeyKind::Rsa, slot)
        .self_signed()
}
