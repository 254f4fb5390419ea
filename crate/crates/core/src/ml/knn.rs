use super::dataset::FeatureSchema;
use super::MlError;
use crate::features::{FeatureId, FeatureVector, Label, ValueRef};
use serde::{Deserialize, Serialize};

/// Per-feature min/max fitted on training rows. Non-numeric features carry
/// an unused (0, 0) range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub schema_fingerprint: String,
    pub ranges: Vec<(f64, f64)>,
}

impl MinMax {
    pub fn fit<'a>(schema: &FeatureSchema, rows: impl IntoIterator<Item = &'a FeatureVector>) -> Self {
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); schema.included().len()];
        for r in rows {
            for (i, &f) in schema.included().iter().enumerate() {
                if f.kind().is_numeric() {
                    let x = r.value(f).as_f64().unwrap();
                    ranges[i].0 = ranges[i].0.min(x);
                    ranges[i].1 = ranges[i].1.max(x);
                }
            }
        }
        for r in &mut ranges {
            if r.0 > r.1 {
                *r = (0.0, 0.0);
            }
        }
        MinMax {
            schema_fingerprint: schema.fingerprint(),
            ranges,
        }
    }

    fn scale(&self, i: usize, x: f64) -> f64 {
        let (lo, hi) = self.ranges[i];
        if hi > lo {
            ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

fn feature_distance(f: FeatureId, i: usize, a: &FeatureVector, b: &FeatureVector, s: &MinMax) -> f64 {
    match (a.value(f), b.value(f)) {
        (ValueRef::Bool(x), ValueRef::Bool(y)) => (x != y) as u8 as f64,
        (ValueRef::Cat(x), ValueRef::Cat(y)) => (x != y) as u8 as f64,
        (x, y) => (s.scale(i, x.as_f64().unwrap()) - s.scale(i, y.as_f64().unwrap())).abs(),
    }
}

/// Mean per-feature distance over the schema's included features.
pub fn knn_distance(a: &FeatureVector, b: &FeatureVector, schema: &FeatureSchema, scaler: &MinMax) -> Result<f64, MlError> {
    if scaler.schema_fingerprint != schema.fingerprint() || scaler.ranges.len() != schema.included().len() {
        return Err(MlError::SchemaError("scaler was fitted for a different schema".into()));
    }
    let d: f64 = schema
        .included()
        .iter()
        .enumerate()
        .map(|(i, &f)| feature_distance(f, i, a, b, scaler))
        .sum();
    Ok(d / schema.included().len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Stored {
    Flag(bool),
    Text(String),
    Scaled(f64),
}

/// Stored training instances with numeric features pre-scaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub scaler: MinMax,
    features: Vec<FeatureId>,
    instances: Vec<(Vec<Stored>, Label)>,
}

impl KnnModel {
    pub(crate) fn fit(schema: &FeatureSchema, rows: &[&FeatureVector], k: usize) -> Self {
        let scaler = MinMax::fit(schema, rows.iter().copied());
        let features = schema.included().to_vec();
        let instances = rows
            .iter()
            .map(|r| (Self::encode(&features, &scaler, r), r.label.expect("labeled")))
            .collect();
        KnnModel {
            k,
            scaler,
            features,
            instances,
        }
    }

    fn encode(features: &[FeatureId], scaler: &MinMax, r: &FeatureVector) -> Vec<Stored> {
        features
            .iter()
            .enumerate()
            .map(|(i, &f)| match r.value(f) {
                ValueRef::Bool(b) => Stored::Flag(b),
                ValueRef::Cat(s) => Stored::Text(s.to_string()),
                v => Stored::Scaled(scaler.scale(i, v.as_f64().unwrap())),
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Positive fraction among the k nearest instances, widened to every
    /// instance tied with the k-th distance.
    pub fn score(&self, fv: &FeatureVector) -> f64 {
        let q = Self::encode(&self.features, &self.scaler, fv);
        let mut dist: Vec<(f64, bool)> = self
            .instances
            .iter()
            .map(|(inst, label)| {
                let d: f64 = inst
                    .iter()
                    .zip(&q)
                    .map(|pair| match pair {
                        (Stored::Flag(a), Stored::Flag(b)) => (a != b) as u8 as f64,
                        (Stored::Text(a), Stored::Text(b)) => (a != b) as u8 as f64,
                        (Stored::Scaled(a), Stored::Scaled(b)) => (a - b).abs(),
                        _ => 1.0,
                    })
                    .sum();
                (d, *label == Label::Pos)
            })
            .collect();
        let k = self.k.min(dist.len()).max(1);
        let (_, kth, _) = dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
        let radius = kth.0;
        let (near, pos) = dist
            .iter()
            .filter(|(d, _)| *d <= radius)
            .fold((0usize, 0usize), |(n, p), (_, is_pos)| (n + 1, p + *is_pos as usize));
        pos as f64 / near as f64
    }

    pub(crate) fn check(&self) -> Result<(), String> {
        if self.k == 0 || self.instances.is_empty() {
            return Err("knn model needs k ≥ 1 and stored instances".into());
        }
        if self.instances.iter().any(|(v, _)| v.len() != self.features.len()) {
            return Err("stored instance width differs from feature count".into());
        }
        Ok(())
    }
}
