use super::MlError;
use crate::features::csv::format_row;
use crate::features::{FeatureId, FeatureKind, FeatureVector, Label, ValueRef};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;

/// Which features a classifier sees. Feature kinds are fixed per feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    included: Vec<FeatureId>,
}

impl Default for FeatureSchema {
    /// F1–F4, F6–F12, F14 and F15; F5 and F13 are left out.
    fn default() -> Self {
        FeatureSchema {
            included: FeatureId::ALL
                .into_iter()
                .filter(|f| !matches!(f, FeatureId::F5 | FeatureId::F13))
                .collect(),
        }
    }
}

impl FeatureSchema {
    pub fn new(features: &[FeatureId]) -> Result<Self, MlError> {
        let set: BTreeSet<FeatureId> = features.iter().copied().collect();
        if set.is_empty() {
            return Err(MlError::SchemaError("schema includes no features".into()));
        }
        if set.len() != features.len() {
            return Err(MlError::SchemaError("duplicate feature in schema".into()));
        }
        Ok(FeatureSchema {
            included: set.into_iter().collect(),
        })
    }

    pub fn all() -> Self {
        FeatureSchema {
            included: FeatureId::ALL.to_vec(),
        }
    }

    pub fn included(&self) -> &[FeatureId] {
        &self.included
    }

    pub fn is_included(&self, id: FeatureId) -> bool {
        self.included.contains(&id)
    }

    pub fn kind(&self, id: FeatureId) -> FeatureKind {
        id.kind()
    }

    /// Short stable digest of the included features and their kinds.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"certsieve-schema-v1");
        for f in &self.included {
            h.update(format!("|{}:{:?}", f.name(), f.kind()).as_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }
}

/// Labeled feature vectors plus the schema a classifier trains on.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: FeatureSchema,
    rows: Vec<FeatureVector>,
}

impl Dataset {
    /// Every row must carry a label.
    pub fn new(schema: FeatureSchema, rows: Vec<FeatureVector>) -> Result<Self, MlError> {
        if let Some(r) = rows.iter().find(|r| r.label.is_none()) {
            return Err(MlError::MissingLabel(r.domain.clone()));
        }
        Ok(Dataset { schema, rows })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[FeatureVector] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<FeatureVector> {
        self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn label(&self, i: usize) -> Label {
        self.rows[i].label.expect("dataset rows are labeled")
    }

    pub fn count(&self, label: Label) -> usize {
        self.rows.iter().filter(|r| r.label == Some(label)).count()
    }

    pub fn with_schema(mut self, schema: FeatureSchema) -> Self {
        self.schema = schema;
        self
    }

    /// Rows sorted by domain, with the full CSV rendering as tie-breaker, so
    /// training does not depend on input order.
    pub fn canonical(&self) -> Dataset {
        let mut keyed: Vec<(String, &FeatureVector)> = self.rows.iter().map(|r| (format_row(r), r)).collect();
        keyed.sort_by(|a, b| a.1.domain.cmp(&b.1.domain).then_with(|| a.0.cmp(&b.0)));
        Dataset {
            schema: self.schema.clone(),
            rows: keyed.into_iter().map(|(_, r)| r.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Column {
    Bool(Vec<bool>),
    /// Codes index into a sorted vocabulary.
    Cat { codes: Vec<u32>, vocab: Vec<String> },
    Num(Vec<f64>),
}

/// Column-major encoding of a dataset's included features.
#[derive(Debug, Clone)]
pub(crate) struct Encoded {
    pub features: Vec<FeatureId>,
    pub columns: Vec<Column>,
    pub positive: Vec<bool>,
}

impl Encoded {
    pub fn new(ds: &Dataset) -> Self {
        let features = ds.schema().included().to_vec();
        let columns = features
            .iter()
            .map(|&f| match f.kind() {
                FeatureKind::Boolean => Column::Bool(
                    ds.rows().iter().map(|r| matches!(r.value(f), ValueRef::Bool(true))).collect(),
                ),
                FeatureKind::Categorical => {
                    let text = |r: &FeatureVector| match r.value(f) {
                        ValueRef::Cat(s) => s.to_string(),
                        _ => unreachable!(),
                    };
                    let vocab: Vec<String> = ds
                        .rows()
                        .iter()
                        .map(text)
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .collect();
                    let codes = ds
                        .rows()
                        .iter()
                        .map(|r| vocab.binary_search(&text(r)).unwrap() as u32)
                        .collect();
                    Column::Cat { codes, vocab }
                }
                FeatureKind::Integer | FeatureKind::Real => {
                    Column::Num(ds.rows().iter().map(|r| r.value(f).as_f64().unwrap()).collect())
                }
            })
            .collect();
        Encoded {
            features,
            columns,
            positive: ds.rows().iter().map(|r| r.label == Some(Label::Pos)).collect(),
        }
    }
}
