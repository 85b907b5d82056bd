//! Device ranking for a circuit, without compiling it.

use qpredict_core::features::{extract_features, schema_hash};
use qpredict_core::Circuit;

use crate::forest::ForestModel;

#[derive(Debug, thiserror::Error)]
pub enum PredictError {
    #[error("forest was trained on feature schema {found}, current schema is {expected}")]
    SchemaMismatch { found: String, expected: String },
    #[error("no roster device has {qubits} qubits")]
    NoFittingDevice { qubits: usize },
}

/// Fitting roster devices ranked by vote share, then fewer qubits, then id.
pub fn predict_device(c: &Circuit, f: &ForestModel) -> Result<Vec<(String, f64)>, PredictError> {
    let expected = schema_hash();
    if f.schema_hash != expected {
        return Err(PredictError::SchemaMismatch {
            found: f.schema_hash.clone(),
            expected,
        });
    }
    let features = extract_features(c);
    let ranked = f.rank(&features);
    if ranked.is_empty() {
        return Err(PredictError::NoFittingDevice {
            qubits: features.num_qubits,
        });
    }
    Ok(ranked)
}
