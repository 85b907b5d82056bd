//! Gate vocabulary and single gate applications.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The supported gate vocabulary (a subset of `qelib1.inc`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gate {
    X,
    Y,
    Z,
    H,
    S,
    Sdg,
    T,
    Tdg,
    Sx,
    Rx,
    Ry,
    Rz,
    Cx,
    Cz,
    Swap,
    Rxx,
}

impl Gate {
    /// Every gate in a fixed order; feature histograms index into this.
    pub const ALL: [Gate; 16] = [
        Gate::X,
        Gate::Y,
        Gate::Z,
        Gate::H,
        Gate::S,
        Gate::Sdg,
        Gate::T,
        Gate::Tdg,
        Gate::Sx,
        Gate::Rx,
        Gate::Ry,
        Gate::Rz,
        Gate::Cx,
        Gate::Cz,
        Gate::Swap,
        Gate::Rxx,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Gate::X => "x",
            Gate::Y => "y",
            Gate::Z => "z",
            Gate::H => "h",
            Gate::S => "s",
            Gate::Sdg => "sdg",
            Gate::T => "t",
            Gate::Tdg => "tdg",
            Gate::Sx => "sx",
            Gate::Rx => "rx",
            Gate::Ry => "ry",
            Gate::Rz => "rz",
            Gate::Cx => "cx",
            Gate::Cz => "cz",
            Gate::Swap => "swap",
            Gate::Rxx => "rxx",
        }
    }

    pub fn index(self) -> usize {
        Gate::ALL.iter().position(|g| *g == self).unwrap()
    }

    pub fn num_qubits(self) -> usize {
        match self {
            Gate::Cx | Gate::Cz | Gate::Swap | Gate::Rxx => 2,
            _ => 1,
        }
    }

    pub fn num_params(self) -> usize {
        match self {
            Gate::Rx | Gate::Ry | Gate::Rz | Gate::Rxx => 1,
            _ => 0,
        }
    }

    pub fn is_rotation(self) -> bool {
        self.num_params() == 1
    }

    /// Gates whose matrix is diagonal in the computational basis.
    pub fn is_diagonal(self) -> bool {
        matches!(
            self,
            Gate::Z | Gate::S | Gate::Sdg | Gate::T | Gate::Tdg | Gate::Rz | Gate::Cz
        )
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unsupported gate `{0}`")]
pub struct UnknownGate(pub String);

impl FromStr for Gate {
    type Err = UnknownGate;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Gate::ALL
            .iter()
            .copied()
            .find(|g| g.name() == s)
            .ok_or_else(|| UnknownGate(s.to_string()))
    }
}

/// One gate applied to one or two qubits.
///
/// Arity and parameter count are fixed by the gate; the accessors return
/// slices of the right length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateOp {
    gate: Gate,
    qubits: [usize; 2],
    param: [f64; 1],
}

impl GateOp {
    /// Builds an op, checking arity, parameter count and distinct operands.
    pub fn new(gate: Gate, params: &[f64], qubits: &[usize]) -> Result<Self, OpError> {
        if qubits.len() != gate.num_qubits() {
            return Err(OpError::Arity {
                gate,
                expected: gate.num_qubits(),
                got: qubits.len(),
            });
        }
        if params.len() != gate.num_params() {
            return Err(OpError::Params {
                gate,
                expected: gate.num_params(),
                got: params.len(),
            });
        }
        if let Some(p) = params.iter().find(|p| !p.is_finite()) {
            return Err(OpError::NonFinite(gate, *p));
        }
        if qubits.len() == 2 && qubits[0] == qubits[1] {
            return Err(OpError::RepeatedQubit(gate, qubits[0]));
        }
        let mut qs = [0; 2];
        qs[..qubits.len()].copy_from_slice(qubits);
        let mut ps = [0.0];
        ps[..params.len()].copy_from_slice(params);
        Ok(GateOp {
            gate,
            qubits: qs,
            param: ps,
        })
    }

    pub fn one(gate: Gate, q: usize) -> Self {
        debug_assert_eq!(gate.num_qubits(), 1);
        debug_assert_eq!(gate.num_params(), 0);
        GateOp {
            gate,
            qubits: [q, 0],
            param: [0.0],
        }
    }

    pub fn rot(gate: Gate, theta: f64, q: usize) -> Self {
        debug_assert_eq!(gate.num_params(), 1);
        debug_assert_eq!(gate.num_qubits(), 1);
        GateOp {
            gate,
            qubits: [q, 0],
            param: [theta],
        }
    }

    pub fn two(gate: Gate, a: usize, b: usize) -> Self {
        debug_assert_eq!(gate.num_qubits(), 2);
        debug_assert_ne!(a, b);
        GateOp {
            gate,
            qubits: [a, b],
            param: [0.0],
        }
    }

    pub fn rxx(theta: f64, a: usize, b: usize) -> Self {
        debug_assert_ne!(a, b);
        GateOp {
            gate: Gate::Rxx,
            qubits: [a, b],
            param: [theta],
        }
    }

    pub fn gate(&self) -> Gate {
        self.gate
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits[..self.gate.num_qubits()]
    }

    pub fn params(&self) -> &[f64] {
        &self.param[..self.gate.num_params()]
    }

    /// Rotation angle for parameterised gates, 0 otherwise.
    pub fn angle(&self) -> f64 {
        self.param[0]
    }

    pub fn is_two_qubit(&self) -> bool {
        self.gate.num_qubits() == 2
    }

    pub fn acts_on(&self, q: usize) -> bool {
        self.qubits().contains(&q)
    }

    pub(crate) fn with_angle(mut self, theta: f64) -> Self {
        self.param[0] = theta;
        self
    }

    /// Same gate with its qubits relabelled through `f`.
    pub fn map_qubits(mut self, f: impl Fn(usize) -> usize) -> Self {
        for q in 0..self.gate.num_qubits() {
            self.qubits[q] = f(self.qubits[q]);
        }
        self
    }
}

impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.gate)?;
        if let [p] = self.params() {
            write!(f, "({p})")?;
        }
        let qs: Vec<String> = self.qubits().iter().map(|q| format!("q[{q}]")).collect();
        write!(f, " {}", qs.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OpError {
    #[error("{gate} takes {expected} qubit(s), got {got}")]
    Arity { gate: Gate, expected: usize, got: usize },
    #[error("{gate} takes {expected} parameter(s), got {got}")]
    Params { gate: Gate, expected: usize, got: usize },
    #[error("{0} has non-finite parameter {1}")]
    NonFinite(Gate, f64),
    #[error("{0} applied twice to qubit {1}")]
    RepeatedQubit(Gate, usize),
}
