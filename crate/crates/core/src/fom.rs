//! Figures of merit: scalar scores in [0, 1] of compiled circuits, higher
//! being better.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::device::DeviceModel;
use crate::gate::GateOp;
use crate::metrics::compute_metrics;
use crate::passes::{is_executable, MappingState};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FomError {
    #[error("unknown figure of merit `{0}`")]
    Unknown(String),
    #[error("weights sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("weight for `{0}` is negative or not finite")]
    BadWeight(String),
}

/// Why a circuit scored zero without being evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZeroReason {
    DoesNotFit,
    NotExecutable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpectedFidelityReport {
    pub total: f64,
    /// Sum of the logs of every factor; `-inf` when the score is zero.
    pub log_total: f64,
    pub per_gate: Vec<(GateOp, f64)>,
    pub per_readout: Vec<(usize, f64)>,
    pub zero_reason: Option<ZeroReason>,
}

impl ExpectedFidelityReport {
    fn zero(reason: ZeroReason) -> Self {
        ExpectedFidelityReport {
            total: 0.0,
            log_total: f64::NEG_INFINITY,
            per_gate: Vec::new(),
            per_readout: Vec::new(),
            zero_reason: Some(reason),
        }
    }
}

fn gate_reason(c: &Circuit, d: &DeviceModel, ms: &MappingState) -> Option<ZeroReason> {
    if c.num_qubits() > d.num_qubits() {
        Some(ZeroReason::DoesNotFit)
    } else if !is_executable(c, d, ms) {
        Some(ZeroReason::NotExecutable)
    } else {
        None
    }
}

/// Product of calibrated gate and readout fidelities, accumulated as a sum
/// of logs.
pub fn expected_fidelity(c: &Circuit, d: &DeviceModel, ms: &MappingState) -> ExpectedFidelityReport {
    if let Some(r) = gate_reason(c, d, ms) {
        return ExpectedFidelityReport::zero(r);
    }
    let per_gate: Vec<(GateOp, f64)> = c
        .ops()
        .iter()
        .map(|op| {
            (
                *op,
                d.gate_fidelity(op).expect("executable circuits are calibrated"),
            )
        })
        .collect();
    let per_readout: Vec<(usize, f64)> = c
        .measurements()
        .iter()
        .map(|m| (m.qubit, d.readout_fidelity(m.qubit).expect("qubit in range")))
        .collect();
    let log_total: f64 = per_gate
        .iter()
        .map(|(_, f)| f.ln())
        .chain(per_readout.iter().map(|(_, f)| f.ln()))
        .sum();
    ExpectedFidelityReport {
        total: log_total.exp(),
        log_total,
        per_gate,
        per_readout,
        zero_reason: None,
    }
}

/// `1 - (two-qubit gates on the critical path) / (two-qubit gates)`, or 1
/// without two-qubit gates.
pub fn critical_depth_score(c: &Circuit) -> f64 {
    let m = compute_metrics(c);
    if m.two_qubit_count == 0 {
        1.0
    } else {
        1.0 - m.critical_path_two_qubit_count as f64 / m.two_qubit_count as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FigureOfMerit {
    ExpectedFidelity,
    CriticalDepth,
    /// Weights of expected fidelity and critical depth; they sum to 1.
    Combined {
        fidelity: f64,
        critical_depth: f64,
    },
}

impl FigureOfMerit {
    pub fn id(&self) -> String {
        match self {
            FigureOfMerit::ExpectedFidelity => "expected_fidelity".into(),
            FigureOfMerit::CriticalDepth => "critical_depth".into(),
            FigureOfMerit::Combined {
                fidelity,
                critical_depth,
            } => format!("combined:{fidelity}:{critical_depth}"),
        }
    }

    /// Score in [0, 1]; circuits that do not fit or are not executable
    /// on `d` score 0.
    pub fn score(&self, c: &Circuit, d: &DeviceModel, ms: &MappingState) -> f64 {
        if gate_reason(c, d, ms).is_some() {
            return 0.0;
        }
        match self {
            FigureOfMerit::ExpectedFidelity => expected_fidelity(c, d, ms).total,
            FigureOfMerit::CriticalDepth => critical_depth_score(c),
            FigureOfMerit::Combined {
                fidelity,
                critical_depth,
            } => fidelity * expected_fidelity(c, d, ms).total + critical_depth * critical_depth_score(c),
        }
    }
}

impl fmt::Display for FigureOfMerit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Builds a combined figure of merit from weights keyed by FoM id
/// (`expected_fidelity`, `critical_depth`).
pub fn weighted_combination(weights: &BTreeMap<String, f64>) -> Result<FigureOfMerit, FomError> {
    let (mut fid, mut cd) = (0.0, 0.0);
    for (k, &w) in weights {
        if !w.is_finite() || w < 0.0 {
            return Err(FomError::BadWeight(k.clone()));
        }
        match k.as_str() {
            "expected_fidelity" => fid += w,
            "critical_depth" => cd += w,
            _ => return Err(FomError::Unknown(k.clone())),
        }
    }
    if (fid + cd - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(FomError::NotNormalized(fid + cd));
    }
    Ok(FigureOfMerit::Combined {
        fidelity: fid,
        critical_depth: cd,
    })
}

impl FromStr for FigureOfMerit {
    type Err = FomError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "expected_fidelity" => Ok(FigureOfMerit::ExpectedFidelity),
            "critical_depth" => Ok(FigureOfMerit::CriticalDepth),
            _ => {
                let unknown = || FomError::Unknown(s.to_string());
                let rest = s.strip_prefix("combined:").ok_or_else(unknown)?;
                let (a, b) = rest.split_once(':').ok_or_else(unknown)?;
                let a: f64 = a.parse().map_err(|_| unknown())?;
                let b: f64 = b.parse().map_err(|_| unknown())?;
                let weights = BTreeMap::from([
                    ("expected_fidelity".to_string(), a),
                    ("critical_depth".to_string(), b),
                ]);
                weighted_combination(&weights)
            }
        }
    }
}
