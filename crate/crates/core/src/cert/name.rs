use serde::{Deserialize, Serialize};
use std::fmt;

/// Attribute types the features read, plus a few common neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttributeType {
    CommonName,
    Country,
    Locality,
    StateOrProvince,
    Organization,
    OrganizationalUnit,
    SerialNumber,
    Email,
}

const KNOWN: &[(AttributeType, &str, &str)] = &[
    (AttributeType::CommonName, "2.5.4.3", "CN"),
    (AttributeType::Country, "2.5.4.6", "C"),
    (AttributeType::Locality, "2.5.4.7", "L"),
    (AttributeType::StateOrProvince, "2.5.4.8", "ST"),
    (AttributeType::Organization, "2.5.4.10", "O"),
    (AttributeType::OrganizationalUnit, "2.5.4.11", "OU"),
    (AttributeType::SerialNumber, "2.5.4.5", "serialNumber"),
    (AttributeType::Email, "1.2.840.113549.1.9.1", "emailAddress"),
];

impl AttributeType {
    pub fn oid(self) -> &'static str {
        KNOWN.iter().find(|k| k.0 == self).map(|k| k.1).unwrap()
    }

    pub fn short_name(self) -> &'static str {
        KNOWN.iter().find(|k| k.0 == self).map(|k| k.2).unwrap()
    }

    pub fn from_oid(oid: &str) -> Option<Self> {
        KNOWN.iter().find(|k| k.1 == oid).map(|k| k.0)
    }
}

/// One `(type, value)` pair. Types are kept as dotted-decimal identifiers so
/// unknown attributes survive parsing unchanged.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Attribute {
    pub oid: String,
    pub value: String,
}

impl Attribute {
    pub fn kind(&self) -> Option<AttributeType> {
        AttributeType::from_oid(&self.oid)
    }

    pub fn label(&self) -> &str {
        self.kind().map(AttributeType::short_name).unwrap_or(&self.oid)
    }
}

/// Ordered attribute list of an issuer or subject name. Multi-valued RDNs
/// are flattened in encoding order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DistinguishedName {
    attributes: Vec<Attribute>,
}

impl DistinguishedName {
    pub fn new(attributes: Vec<Attribute>) -> Self {
        DistinguishedName { attributes }
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    /// First value of the given type; `None` when the type is absent.
    pub fn get(&self, kind: AttributeType) -> Option<&str> {
        self.get_oid(kind.oid())
    }

    pub fn get_oid(&self, oid: &str) -> Option<&str> {
        self.attributes
            .iter()
            .find(|a| a.oid == oid)
            .map(|a| a.value.as_str())
    }

    fn canonical(&self) -> Vec<(&str, &str)> {
        let mut v: Vec<(&str, &str)> = self
            .attributes
            .iter()
            .map(|a| (a.oid.as_str(), a.value.trim()))
            .collect();
        v.sort_unstable();
        v
    }
}

/// Multiset equality of `(type, trimmed value)` pairs; attribute order is
/// ignored, values compare byte-exactly.
pub fn dn_equal(a: &DistinguishedName, b: &DistinguishedName) -> bool {
    a.attributes.len() == b.attributes.len() && a.canonical() == b.canonical()
}

impl fmt::Display for DistinguishedName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.attributes.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}={}", a.label(), a.value)?;
        }
        Ok(())
    }
}
