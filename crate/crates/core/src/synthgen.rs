//! Synthetic labeled corpora drawn from independent per-feature marginals,
//! and the exact Bayes-optimal accuracy for boolean-only specs.

use crate::features::{FeatureId, FeatureKind, FeatureVector, Label, ValueRef};
use crate::ml::{Dataset, FeatureSchema};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

const SUM_TOLERANCE: f64 = 1e-9;
pub const MAX_ORACLE_FEATURES: usize = 20;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("spec {spec:?} does not cover {feature}")]
    SpecIncomplete { spec: String, feature: FeatureId },
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("no rows labeled {0}")]
    EmptyClass(Label),
    #[error("{0} features is too many to enumerate (limit {MAX_ORACLE_FEATURES})")]
    SubsetTooLarge(usize),
    #[error("{0} is not a boolean feature")]
    NotBoolean(FeatureId),
    #[error("spec parse error: {0}")]
    Parse(String),
}

/// Independent marginal distribution of every feature for one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSpec {
    pub name: String,
    pub label: Label,
    /// Probability of true.
    #[serde(default)]
    pub boolean: BTreeMap<FeatureId, f64>,
    /// Value → probability.
    #[serde(default)]
    pub categorical: BTreeMap<FeatureId, BTreeMap<String, f64>>,
    /// (value, probability) support points.
    #[serde(default)]
    pub numeric: BTreeMap<FeatureId, Vec<(f64, f64)>>,
}

const SHIPPED: &[(&str, &str)] = &[
    ("alexa", include_str!("../specs/alexa.toml")),
    ("com", include_str!("../specs/com.toml")),
    ("net", include_str!("../specs/net.toml")),
    ("phishing", include_str!("../specs/phishing.toml")),
    ("typosquatting", include_str!("../specs/typosquatting.toml")),
];

pub fn shipped_spec_names() -> impl Iterator<Item = &'static str> {
    SHIPPED.iter().map(|(n, _)| *n)
}

pub fn shipped_spec(name: &str) -> Option<MarginalSpec> {
    SHIPPED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| MarginalSpec::parse(text).expect("shipped spec is valid"))
}

fn check_probability(what: &str, p: f64) -> Result<(), SynthError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SynthError::InvalidSpec(format!("{what}: probability {p} outside [0, 1]")));
    }
    Ok(())
}

fn check_sum(what: &str, probs: impl Iterator<Item = f64>) -> Result<(), SynthError> {
    let s: f64 = probs.sum();
    if (s - 1.0).abs() > SUM_TOLERANCE {
        return Err(SynthError::InvalidSpec(format!("{what}: probabilities sum to {s}")));
    }
    Ok(())
}

impl MarginalSpec {
    pub fn parse(text: &str) -> Result<Self, SynthError> {
        let spec: MarginalSpec = toml::from_str(text).map_err(|e| SynthError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn render(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    /// Checks ranges, sums and that each feature sits in the table of its kind.
    pub fn validate(&self) -> Result<(), SynthError> {
        for (&f, &p) in &self.boolean {
            if f.kind() != FeatureKind::Boolean {
                return Err(SynthError::InvalidSpec(format!("{f} is not boolean")));
            }
            check_probability(f.name(), p)?;
        }
        for (&f, table) in &self.categorical {
            if f.kind() != FeatureKind::Categorical {
                return Err(SynthError::InvalidSpec(format!("{f} is not categorical")));
            }
            for (v, &p) in table {
                if v.is_empty() {
                    return Err(SynthError::InvalidSpec(format!("{f}: empty category")));
                }
                check_probability(f.name(), p)?;
            }
            check_sum(f.name(), table.values().copied())?;
        }
        for (&f, support) in &self.numeric {
            if !f.kind().is_numeric() {
                return Err(SynthError::InvalidSpec(format!("{f} is not numeric")));
            }
            for &(v, p) in support {
                check_probability(f.name(), p)?;
                let ok = match f.kind() {
                    FeatureKind::Integer => v.is_finite() && v >= 0.0 && v.fract() == 0.0,
                    _ => (0.0..=1.0).contains(&v),
                };
                if !ok {
                    return Err(SynthError::InvalidSpec(format!("{f}: support value {v} out of range")));
                }
            }
            check_sum(f.name(), support.iter().map(|s| s.1))?;
        }
        Ok(())
    }

    /// Fails unless every feature has a distribution.
    pub fn check_complete(&self) -> Result<(), SynthError> {
        for f in FeatureId::ALL {
            let present = match f.kind() {
                FeatureKind::Boolean => self.boolean.contains_key(&f),
                FeatureKind::Categorical => self.categorical.contains_key(&f),
                _ => self.numeric.contains_key(&f),
            };
            if !present {
                return Err(SynthError::SpecIncomplete {
                    spec: self.name.clone(),
                    feature: f,
                });
            }
        }
        Ok(())
    }

    fn boolean_p(&self, f: FeatureId) -> Result<f64, SynthError> {
        if f.kind() != FeatureKind::Boolean {
            return Err(SynthError::NotBoolean(f));
        }
        self.boolean.get(&f).copied().ok_or_else(|| SynthError::SpecIncomplete {
            spec: self.name.clone(),
            feature: f,
        })
    }

    /// Draws one row; each feature consumes exactly one uniform.
    pub fn sample_row(&self, domain: String, rng: &mut impl Rng) -> FeatureVector {
        let mut v = FeatureVector::blank(domain);
        for f in FeatureId::ALL {
            let u: f64 = rng.random();
            match f.kind() {
                FeatureKind::Boolean => v.set_bool(f, u < self.boolean[&f]),
                FeatureKind::Categorical => {
                    let table = &self.categorical[&f];
                    v.set_categorical(f, pick(table.iter().map(|(k, p)| (k, *p)), u).clone());
                }
                _ => v.set_numeric(f, *pick(self.numeric[&f].iter().map(|(x, p)| (x, *p)), u)),
            }
        }
        v.label = Some(self.label);
        v
    }
}

/// Inverse-CDF lookup; rounding slack falls on the last entry.
fn pick<'a, T>(mut items: impl Iterator<Item = (&'a T, f64)>, u: f64) -> &'a T {
    let mut acc = 0.0;
    let mut last = None;
    for (x, p) in items.by_ref() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = Some(x);
        if u < acc {
            return x;
        }
    }
    last.expect("distribution has support")
}

/// `n_per_class` rows from each spec. Row `i` draws from its own ChaCha
/// stream, so the output is independent of thread scheduling.
pub fn sample_corpus(pos: &MarginalSpec, neg: &MarginalSpec, n_per_class: usize, seed: u64) -> Result<Dataset, SynthError> {
    pos.check_complete()?;
    neg.check_complete()?;
    let mut pos = pos.clone();
    pos.label = Label::Pos;
    let mut neg = neg.clone();
    neg.label = Label::Neg;
    let rows = crate::par::map_range(2 * n_per_class, |i| {
        let (spec, j, tag) = if i < n_per_class {
            (&pos, i, "pos")
        } else {
            (&neg, i - n_per_class, "neg")
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        spec.sample_row(format!("{tag}-{j:07}.{}.synthetic", spec.name), &mut rng)
    });
    Ok(Dataset::new(FeatureSchema::default(), rows).expect("rows are labeled"))
}

/// Empirical marginals of the rows carrying `label`.
pub fn fit_marginals(ds: &Dataset, label: Label, name: &str) -> Result<MarginalSpec, SynthError> {
    let rows: Vec<&FeatureVector> = ds.rows().iter().filter(|r| r.label == Some(label)).collect();
    if rows.is_empty() {
        return Err(SynthError::EmptyClass(label));
    }
    let n = rows.len() as f64;
    let mut spec = MarginalSpec {
        name: name.to_string(),
        label,
        boolean: BTreeMap::new(),
        categorical: BTreeMap::new(),
        numeric: BTreeMap::new(),
    };
    for f in FeatureId::ALL {
        match f.kind() {
            FeatureKind::Boolean => {
                let t = rows.iter().filter(|r| r.boolean(f) == Some(true)).count();
                spec.boolean.insert(f, t as f64 / n);
            }
            FeatureKind::Categorical => {
                let mut counts: BTreeMap<String, usize> = BTreeMap::new();
                for r in &rows {
                    if let ValueRef::Cat(s) = r.value(f) {
                        *counts.entry(s.to_string()).or_default() += 1;
                    }
                }
                spec.categorical
                    .insert(f, counts.into_iter().map(|(k, c)| (k, c as f64 / n)).collect());
            }
            _ => {
                let mut values: Vec<f64> = rows.iter().map(|r| r.value(f).as_f64().unwrap()).collect();
                values.sort_by(f64::total_cmp);
                let mut support: Vec<(f64, f64)> = Vec::new();
                for v in values {
                    match support.last_mut() {
                        Some(last) if last.0 == v => last.1 += 1.0,
                        _ => support.push((v, 1.0)),
                    }
                }
                for s in &mut support {
                    s.1 /= n;
                }
                spec.numeric.insert(f, support);
            }
        }
    }
    Ok(spec)
}

/// Σ_x max(P_pos(x), P_neg(x)) / 2 over all 2^d outcomes of `subset`,
/// with equal class priors.
pub fn bayes_optimal_accuracy(pos: &MarginalSpec, neg: &MarginalSpec, subset: &[FeatureId]) -> Result<f64, SynthError> {
    if subset.len() > MAX_ORACLE_FEATURES {
        return Err(SynthError::SubsetTooLarge(subset.len()));
    }
    let pp: Vec<f64> = subset.iter().map(|&f| pos.boolean_p(f)).collect::<Result<_, _>>()?;
    let pn: Vec<f64> = subset.iter().map(|&f| neg.boolean_p(f)).collect::<Result<_, _>>()?;
    let mut total = 0.0;
    for x in 0u32..(1 << subset.len()) {
        let (mut a, mut b) = (1.0, 1.0);
        for i in 0..subset.len() {
            let bit = x >> i & 1 == 1;
            a *= if bit { pp[i] } else { 1.0 - pp[i] };
            b *= if bit { pn[i] } else { 1.0 - pn[i] };
        }
        total += a.max(b);
    }
    Ok(total / 2.0)
}

/// Label of the exact Bayes rule for a boolean outcome (ties → positive).
pub fn bayes_label(pos: &MarginalSpec, neg: &MarginalSpec, subset: &[FeatureId], fv: &FeatureVector) -> Result<Label, SynthError> {
    let (mut a, mut b) = (1.0, 1.0);
    for &f in subset {
        let (p, q) = (pos.boolean_p(f)?, neg.boolean_p(f)?);
        if fv.boolean(f) == Some(true) {
            a *= p;
            b *= q;
        } else {
            a *= 1.0 - p;
            b *= 1.0 - q;
        }
    }
    Ok(if a >= b { Label::Pos } else { Label::Neg })
}
