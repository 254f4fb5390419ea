//! Decision tree, bagged trees, random forest and k-nearest-neighbour
//! classifiers with stratified cross-validation.

mod cv;
mod dataset;
mod knn;
mod model_file;
mod tree;

pub use cv::{cross_validate, stratified_folds, Confusion, EvalReport, Metric, RowPrediction};
pub use dataset::{Dataset, FeatureSchema};
pub use knn::{knn_distance, KnnModel, MinMax};
pub use model_file::{load_model, parse_model, render_model, save_model, MODEL_FORMAT, MODEL_VERSION};
pub use tree::{DecisionTree, Node, Split, TreeParams};

use crate::features::{FeatureVector, Label};
use dataset::Encoded;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MlError {
    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),
    #[error("schema error: {0}")]
    SchemaError(String),
    #[error("too few rows: {0}")]
    TooFewRows(String),
    #[error("row {0:?} has no label")]
    MissingLabel(String),
    #[error("corrupt model: {0}")]
    CorruptModel(String),
    #[error("model format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },
    #[error("model file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Tree,
    BaggedTrees,
    Forest,
    Knn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Tree, ModelKind::BaggedTrees, ModelKind::Forest, ModelKind::Knn];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Tree => "tree",
            ModelKind::BaggedTrees => "bagged_trees",
            ModelKind::Forest => "forest",
            ModelKind::Knn => "knn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "tree" | "decision_tree" => Ok(ModelKind::Tree),
            "bagged_trees" | "bagging" | "bagged" => Ok(ModelKind::BaggedTrees),
            "forest" | "random_forest" => Ok(ModelKind::Forest),
            "knn" | "nearest_neighbor" => Ok(ModelKind::Knn),
            other => Err(format!("unknown classifier {other:?}")),
        }
    }
}

/// Features examined per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    /// ⌈√d⌉ of the d included features.
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, d: usize) -> Option<usize> {
        match self {
            MaxFeatures::All => None,
            MaxFeatures::Sqrt => Some((d as f64).sqrt().ceil() as usize),
            MaxFeatures::Count(n) => Some(n.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub k: usize,
}

impl Hyperparameters {
    pub fn defaults_for(kind: ModelKind) -> Self {
        Hyperparameters {
            max_depth: 12,
            min_leaf: 2,
            n_trees: match kind {
                ModelKind::Forest => 100,
                ModelKind::BaggedTrees => 50,
                _ => 1,
            },
            max_features: if kind == ModelKind::Forest {
                MaxFeatures::Sqrt
            } else {
                MaxFeatures::All
            },
            k: 5,
        }
    }

    fn validate(&self) -> Result<(), MlError> {
        if self.max_depth == 0 || self.min_leaf == 0 || self.n_trees == 0 || self.k == 0 {
            return Err(MlError::SchemaError(
                "max_depth, min_leaf, n_trees and k must all be positive".into(),
            ));
        }
        Ok(())
    }

    fn tree_params(&self, d: usize) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            max_features: self.max_features.resolve(d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    Tree(DecisionTree),
    Ensemble(Vec<DecisionTree>),
    Knn(KnnModel),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub score: f64,
}

impl Prediction {
    fn from_score(score: f64) -> Self {
        Prediction {
            label: if score >= 0.5 { Label::Pos } else { Label::Neg },
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
    pub schema: FeatureSchema,
    pub structure: Structure,
}

impl TrainedModel {
    pub fn schema_fingerprint(&self) -> String {
        self.schema.fingerprint()
    }

    /// Fails when `schema` is not the one the model was trained with.
    pub fn predict(&self, schema: &FeatureSchema, fv: &FeatureVector) -> Result<Prediction, MlError> {
        if schema.fingerprint() != self.schema_fingerprint() {
            return Err(MlError::SchemaError(format!(
                "vector schema {} differs from training schema {}",
                schema.fingerprint(),
                self.schema_fingerprint()
            )));
        }
        Ok(self.predict_unchecked(fv))
    }

    pub fn predict_unchecked(&self, fv: &FeatureVector) -> Prediction {
        Prediction::from_score(structure_score(&self.structure, fv))
    }

    pub fn predict_all(&self, schema: &FeatureSchema, rows: &[FeatureVector]) -> Result<Vec<Prediction>, MlError> {
        self.predict(schema, &FeatureVector::blank(""))?;
        Ok(crate::par::map_slice(rows, |r| self.predict_unchecked(r)))
    }

    /// Member trees of an ensemble (a single tree is its own member).
    pub fn trees(&self) -> &[DecisionTree] {
        match &self.structure {
            Structure::Tree(t) => std::slice::from_ref(t),
            Structure::Ensemble(m) => m,
            Structure::Knn(_) => &[],
        }
    }
}

fn structure_score(s: &Structure, fv: &FeatureVector) -> f64 {
    match s {
        Structure::Tree(t) => t.score(fv),
        Structure::Ensemble(members) => {
            let votes = members.iter().filter(|t| t.score(fv) >= 0.5).count();
            votes as f64 / members.len() as f64
        }
        Structure::Knn(k) => k.score(fv),
    }
}

/// Seeds of the ensemble members, drawn in order from the master seed.
pub fn member_seeds(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.next_u64()).collect()
}

/// Bootstrap sample of `n` row indices for one ensemble member.
pub fn bootstrap_indices(member_seed: u64, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(member_seed);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

fn split_rng(member_seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(member_seed);
    rng.set_stream(1);
    rng
}

/// Trains on `rows` of an already canonical dataset.
fn fit_rows(
    ds: &Dataset,
    enc: &Encoded,
    rows: &[usize],
    kind: ModelKind,
    hp: &Hyperparameters,
    seed: u64,
) -> Structure {
    let params = hp.tree_params(enc.columns.len());
    match kind {
        ModelKind::Tree => Structure::Tree(DecisionTree::grow(enc, rows, TreeParams { max_features: None, ..params }, None)),
        ModelKind::BaggedTrees | ModelKind::Forest => {
            let seeds = member_seeds(seed, hp.n_trees);
            let members = crate::par::map_slice(&seeds, |&s| {
                let sample: Vec<usize> = bootstrap_indices(s, rows.len()).into_iter().map(|i| rows[i]).collect();
                let mut rng = split_rng(s);
                DecisionTree::grow(enc, &sample, params, Some(&mut rng))
            });
            Structure::Ensemble(members)
        }
        ModelKind::Knn => {
            let subset: Vec<&FeatureVector> = rows.iter().map(|&i| &ds.rows()[i]).collect();
            Structure::Knn(KnnModel::fit(ds.schema(), &subset, hp.k))
        }
    }
}

/// Trains a classifier. Rows are put in canonical order first, so the result
/// depends only on the row multiset, the hyperparameters and the seed.
pub fn train(ds: &Dataset, kind: ModelKind, hp: &Hyperparameters, seed: u64) -> Result<TrainedModel, MlError> {
    hp.validate()?;
    for label in [Label::Pos, Label::Neg] {
        let n = ds.count(label);
        if n < 2 {
            return Err(MlError::DegenerateDataset(format!(
                "class {label} has {n} rows; at least 2 per class are required"
            )));
        }
    }
    let ds = ds.canonical();
    let enc = Encoded::new(&ds);
    let rows: Vec<usize> = (0..ds.len()).collect();
    Ok(TrainedModel {
        kind,
        hyperparameters: *hp,
        seed,
        schema: ds.schema().clone(),
        structure: fit_rows(&ds, &enc, &rows, kind, hp, seed),
    })
}
