use super::{dn_equal, CertificateSummary};
use openssl::pkey::PKey;
use openssl::x509::X509;
use serde::{Deserialize, Serialize};
use std::fmt;

const MAX_PATH_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Verified,
    SelfSigned,
    UntrustedRoot,
    Expired,
    NotYetValid,
    BadSignature,
    MalformedChain,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationOutcome {
    pub verdict: Verdict,
    pub detail: String,
}

impl VerificationOutcome {
    fn new(verdict: Verdict, detail: impl Into<String>) -> Self {
        VerificationOutcome {
            verdict,
            detail: detail.into(),
        }
    }

    pub fn is_verified(&self) -> bool {
        self.verdict == Verdict::Verified
    }
}

/// Cryptographic check that `child` carries a valid signature by the key in
/// `issuer`'s SubjectPublicKeyInfo.
fn signed_by(child: &CertificateSummary, issuer: &CertificateSummary) -> bool {
    let Ok(key) = PKey::public_key_from_der(&issuer.spki_der) else {
        return false;
    };
    X509::from_der(&child.der)
        .and_then(|x| x.verify(&key))
        .unwrap_or(false)
}

enum PathEnd {
    Anchored,
    Untrusted(String),
    Malformed(String),
}

fn build_path<'a>(
    leaf: &'a CertificateSummary,
    presented: &'a [CertificateSummary],
    trust_store: &'a [CertificateSummary],
) -> (Vec<&'a CertificateSummary>, PathEnd) {
    let mut path = vec![leaf];
    loop {
        let current = *path.last().unwrap();
        if trust_store.iter().any(|t| t.fingerprint == current.fingerprint) {
            return (path, PathEnd::Anchored);
        }
        if path.len() > MAX_PATH_LEN {
            return (path, PathEnd::Malformed(format!("path longer than {MAX_PATH_LEN}")));
        }
        let trusted: Vec<&CertificateSummary> = trust_store
            .iter()
            .filter(|t| dn_equal(&t.subject, &current.issuer))
            .collect();
        if !trusted.is_empty() {
            let root = trusted
                .iter()
                .find(|t| signed_by(current, t))
                .unwrap_or(&trusted[0]);
            path.push(root);
            return (path, PathEnd::Anchored);
        }
        if current.is_self_issued() {
            return (
                path,
                PathEnd::Untrusted(format!("self-issued {} is not in the trust store", current.subject)),
            );
        }
        let Some(next) = presented.iter().find(|c| dn_equal(&c.subject, &current.issuer)) else {
            return (path, PathEnd::Untrusted(format!("no issuer found for {}", current.issuer)));
        };
        if path.iter().any(|p| p.fingerprint == next.fingerprint) {
            return (path, PathEnd::Malformed("issuer cycle in presented chain".into()));
        }
        path.push(next);
    }
}

/// Verifies `leaf` against a trust store at `at_time` (Unix seconds).
/// Failures are reported as verdicts, checked in the order: malformed chain,
/// self-signed leaf, untrusted root, validity window, signatures.
/// Hostname matching is not performed.
pub fn verify_chain(
    leaf: &CertificateSummary,
    presented_chain: &[CertificateSummary],
    trust_store: &[CertificateSummary],
    at_time: i64,
) -> VerificationOutcome {
    if leaf.is_self_issued() {
        return VerificationOutcome::new(Verdict::SelfSigned, format!("issuer equals subject ({})", leaf.subject));
    }
    let (path, end) = build_path(leaf, presented_chain, trust_store);
    match end {
        PathEnd::Malformed(d) => return VerificationOutcome::new(Verdict::MalformedChain, d),
        PathEnd::Untrusted(d) => return VerificationOutcome::new(Verdict::UntrustedRoot, d),
        PathEnd::Anchored => {}
    }
    if let Some(c) = path.iter().find(|c| at_time > c.not_after) {
        return VerificationOutcome::new(Verdict::Expired, format!("{} expired at {}", c.subject, c.not_after));
    }
    if let Some(c) = path.iter().find(|c| at_time < c.not_before) {
        return VerificationOutcome::new(
            Verdict::NotYetValid,
            format!("{} not valid before {}", c.subject, c.not_before),
        );
    }
    for pair in path.windows(2) {
        if !signed_by(pair[0], pair[1]) {
            return VerificationOutcome::new(
                Verdict::BadSignature,
                format!("signature on {} does not verify under {}", pair[0].subject, pair[1].subject),
            );
        }
    }
    VerificationOutcome::new(Verdict::Verified, format!("path of length {}", path.len()))
}
