//! Circuit descriptors used by the device classifier and the RL
//! observation.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit::Circuit;
use crate::fom::critical_depth_score;
use crate::gate::Gate;
use crate::metrics::compute_metrics;

pub const HISTOGRAM_LEN: usize = Gate::ALL.len();
/// Length of [`FeatureVector::to_vec`].
pub const FEATURE_DIM: usize = 7 + HISTOGRAM_LEN;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub num_qubits: usize,
    pub depth: usize,
    pub program_communication: f64,
    pub critical_depth_ratio: f64,
    pub entanglement_ratio: f64,
    pub parallelism: f64,
    pub liveness: f64,
    /// Gate counts in [`Gate::ALL`] order.
    pub gate_counts: [usize; HISTOGRAM_LEN],
}

impl FeatureVector {
    /// Numeric vector: qubits, depth, the five composites, then the
    /// histogram.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![
            self.num_qubits as f64,
            self.depth as f64,
            self.program_communication,
            self.critical_depth_ratio,
            self.entanglement_ratio,
            self.parallelism,
            self.liveness,
        ];
        v.extend(self.gate_counts.iter().map(|&n| n as f64));
        v
    }

    pub fn names() -> Vec<String> {
        let mut names: Vec<String> = [
            "num_qubits",
            "depth",
            "program_communication",
            "critical_depth_ratio",
            "entanglement_ratio",
            "parallelism",
            "liveness",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        names.extend(Gate::ALL.iter().map(|g| format!("count_{g}")));
        names
    }
}

/// Identifies the feature layout and formulas. Bump the version string
/// whenever a formula changes.
pub fn schema_hash() -> String {
    let text = format!("features-v1\n{}", FeatureVector::names().join("\n"));
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Computes the features of `c` over all of its declared qubits. Callers
/// that hold a device-sized circuit should pass [`Circuit::compacted`].
///
/// Depth and liveness count terminal measurements as one layer each, and
/// parallelism counts them as operations.
pub fn extract_features(c: &Circuit) -> FeatureVector {
    let n = c.num_qubits();
    let m = compute_metrics(c);

    let mut adjacent = vec![vec![false; n]; n];
    for op in c.ops() {
        if let [a, b] = op.qubits() {
            adjacent[*a][*b] = true;
            adjacent[*b][*a] = true;
        }
    }
    let degree_sum: usize = adjacent.iter().map(|r| r.iter().filter(|x| **x).count()).sum();
    let program_communication = if n > 1 {
        degree_sum as f64 / (n * (n - 1)) as f64
    } else {
        0.0
    };

    let n_e = m.two_qubit_count;
    // Derived from the score so the two agree bit for bit.
    let critical_depth_ratio = 1.0 - critical_depth_score(c);
    let entanglement_ratio = if c.gate_count() == 0 {
        0.0
    } else {
        n_e as f64 / c.gate_count() as f64
    };

    let nodes = c.gate_count() + c.measurements().len();
    let parallelism = if n <= 1 || m.depth == 0 {
        0.0
    } else {
        ((nodes as f64 / m.depth as f64 - 1.0) / (n - 1) as f64).clamp(0.0, 1.0)
    };

    // Each op or measurement occupies one layer on each of its qubits.
    let busy: usize = c.ops().iter().map(|op| op.qubits().len()).sum::<usize>() + c.measurements().len();
    let liveness = if m.depth == 0 {
        0.0
    } else {
        busy as f64 / (n * m.depth) as f64
    };

    let mut gate_counts = [0; HISTOGRAM_LEN];
    for op in c.ops() {
        gate_counts[op.gate().index()] += 1;
    }
    FeatureVector {
        num_qubits: n,
        depth: m.depth,
        program_communication,
        critical_depth_ratio,
        entanglement_ratio,
        parallelism,
        liveness,
        gate_counts,
    }
}
