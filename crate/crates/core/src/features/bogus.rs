use crate::cert::DistinguishedName;
use std::collections::BTreeSet;

/// Placeholder subject values typical of default certificate templates.
pub const DEFAULT_BOGUS_VALUES: &[&str] = &[
    "--",
    "somestate",
    "somecity",
    "someorganization",
    "someorganizationalunit",
    "localhost",
    "internet widgits pty ltd",
    "some-state",
    "default city",
    "example",
    "test",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BogusValueList {
    entries: BTreeSet<String>,
}

impl Default for BogusValueList {
    fn default() -> Self {
        BogusValueList::new(DEFAULT_BOGUS_VALUES.iter().copied()).expect("non-empty")
    }
}

impl BogusValueList {
    /// Entries are lowercased and trimmed. Returns `None` for an empty list.
    pub fn new<'a>(entries: impl IntoIterator<Item = &'a str>) -> Option<Self> {
        let entries: BTreeSet<String> = entries
            .into_iter()
            .map(|e| e.trim().to_lowercase())
            .filter(|e| !e.is_empty())
            .collect();
        (!entries.is_empty()).then_some(BogusValueList { entries })
    }

    /// One value per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Option<Self> {
        Self::new(text.lines().map(str::trim).filter(|l| !l.starts_with('#')))
    }

    pub fn contains(&self, value: &str) -> bool {
        self.entries.contains(&value.trim().to_lowercase())
    }

    pub fn entries(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(String::as_str)
    }
}

/// True when any subject attribute value is a known placeholder.
pub fn is_bogus_subject(subject: &DistinguishedName, bogus: &BogusValueList) -> bool {
    subject.attributes().iter().any(|a| bogus.contains(&a.value))
}
