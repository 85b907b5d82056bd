//! Predict a device for a circuit, then compile it there with that device's
//! policy.

use qpredict_core::fom::FigureOfMerit;
use qpredict_core::passes::MappingState;
use qpredict_core::Circuit;
use qpredict_rl::compile::CompileMode;
use qpredict_rl::{compile_with_policy, CompileError};
use qpredict_select::{predict_device, PredictError};

use crate::bundle::Bundle;

#[derive(Clone, Debug)]
pub struct Prediction {
    pub device_id: String,
    /// Fitting devices by vote share.
    pub ranking: Vec<(String, f64)>,
    pub circuit: Circuit,
    pub mapping: MappingState,
    pub pass_log: Vec<String>,
    pub score: f64,
    pub used_fallback: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("bundle has no model for {0}")]
    UnknownFom(String),
    #[error("bundle has no device {0}")]
    UnknownDevice(String),
    #[error("circuit has {qubits} qubits but {device} has {available}")]
    TooLarge {
        qubits: usize,
        device: String,
        available: usize,
    },
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Compile(#[from] CompileError),
}

/// Ranks the roster for `c` with the FoM's forest and compiles greedily on
/// the top device.
pub fn predict_and_compile(
    c: &Circuit,
    bundle: &Bundle,
    fom: FigureOfMerit,
) -> Result<Prediction, PipelineError> {
    let forest = bundle
        .forest(&fom)
        .ok_or_else(|| PipelineError::UnknownFom(fom.id()))?;
    let ranking = predict_device(c, forest)?;
    let device_id = ranking[0].0.clone();
    let mut p = compile_on(c, bundle, fom, &device_id)?;
    p.ranking = ranking;
    Ok(p)
}

/// Compiles `c` on a chosen roster device with its policy.
pub fn compile_on(
    c: &Circuit,
    bundle: &Bundle,
    fom: FigureOfMerit,
    device_id: &str,
) -> Result<Prediction, PipelineError> {
    let d = bundle
        .device(device_id)
        .ok_or_else(|| PipelineError::UnknownDevice(device_id.to_string()))?;
    if c.num_qubits() > d.num_qubits() {
        return Err(PipelineError::TooLarge {
            qubits: c.num_qubits(),
            device: device_id.to_string(),
            available: d.num_qubits(),
        });
    }
    let policy = bundle
        .policy(&fom, device_id)
        .ok_or_else(|| PipelineError::UnknownFom(fom.id()))?;
    let out = compile_with_policy(c, policy, d, CompileMode::Greedy)?;
    Ok(Prediction {
        device_id: device_id.to_string(),
        ranking: Vec::new(),
        circuit: out.circuit,
        mapping: out.mapping,
        pass_log: out.actions.iter().map(|a| a.id().to_string()).collect(),
        score: out.score,
        used_fallback: out.used_fallback,
    })
}
