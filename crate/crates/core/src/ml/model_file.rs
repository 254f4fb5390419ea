//! Versioned JSON model files.

use super::{FeatureSchema, Hyperparameters, MlError, ModelKind, Structure, TrainedModel};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MODEL_FORMAT: &str = "certsieve-model";
pub const MODEL_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u64,
    kind: ModelKind,
    seed: u64,
    hyperparameters: Hyperparameters,
    schema: FeatureSchema,
    schema_fingerprint: String,
    structure: Structure,
}

pub fn render_model(m: &TrainedModel) -> String {
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        kind: m.kind,
        seed: m.seed,
        hyperparameters: m.hyperparameters,
        schema: m.schema.clone(),
        schema_fingerprint: m.schema_fingerprint(),
        structure: m.structure.clone(),
    };
    serde_json::to_string(&file).expect("model serializes") + "\n"
}

pub fn parse_model(text: &str) -> Result<TrainedModel, MlError> {
    let corrupt = |m: String| MlError::CorruptModel(m);
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
    if value.get("format").and_then(|f| f.as_str()) != Some(MODEL_FORMAT) {
        return Err(corrupt("not a certsieve model file".into()));
    }
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| corrupt("missing version".into()))?;
    if version != MODEL_VERSION {
        return Err(MlError::VersionMismatch {
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?;
    if file.schema.fingerprint() != file.schema_fingerprint {
        return Err(corrupt("schema fingerprint does not match the schema".into()));
    }
    let shape_ok = match (&file.structure, file.kind) {
        (Structure::Tree(t), ModelKind::Tree) => t.check(),
        (Structure::Ensemble(m), ModelKind::BaggedTrees | ModelKind::Forest) if !m.is_empty() => {
            m.iter().try_for_each(|t| t.check())
        }
        (Structure::Knn(k), ModelKind::Knn) => k.check(),
        _ => Err(format!("structure does not fit a {} model", file.kind)),
    };
    shape_ok.map_err(corrupt)?;
    Ok(TrainedModel {
        kind: file.kind,
        hyperparameters: file.hyperparameters,
        seed: file.seed,
        schema: file.schema,
        structure: file.structure,
    })
}

pub fn save_model(m: &TrainedModel, path: &Path) -> Result<(), MlError> {
    std::fs::write(path, render_model(m)).map_err(|source| MlError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<TrainedModel, MlError> {
    let text = std::fs::read_to_string(path).map_err(|source| MlError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_model(&text)
}
