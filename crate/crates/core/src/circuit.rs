//! The circuit intermediate representation shared by every pass.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::gate::{Gate, GateOp};

/// Terminal measurement of `qubit` into classical bit `clbit`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Measurement {
    pub qubit: usize,
    pub clbit: usize,
}

/// Ordered gate list over `num_qubits` qubits followed by terminal
/// measurements.
///
/// Measurements are kept apart from the gate list: a measured qubit is never
/// acted on again, so every measurement sits at the end of its wire.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Circuit {
    num_qubits: usize,
    ops: Vec<GateOp>,
    measurements: Vec<Measurement>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CircuitError {
    #[error("qubit {qubit} out of range for a {num_qubits}-qubit circuit")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("qubit {0} is measured twice")]
    DoubleMeasurement(usize),
    #[error("gate on qubit {0} after it was measured")]
    GateAfterMeasurement(usize),
    #[error(transparent)]
    Op(#[from] crate::gate::OpError),
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Self {
        Circuit {
            num_qubits,
            ops: Vec::new(),
            measurements: Vec::new(),
        }
    }

    /// Assembles a circuit from parts, checking every invariant.
    pub fn from_parts(
        num_qubits: usize,
        ops: Vec<GateOp>,
        measurements: Vec<Measurement>,
    ) -> Result<Self, CircuitError> {
        let c = Circuit {
            num_qubits,
            ops,
            measurements,
        };
        c.validate()?;
        Ok(c)
    }

    /// Same as [`Circuit::from_parts`] without validation, for passes that
    /// preserve the invariants by construction.
    pub(crate) fn from_parts_unchecked(
        num_qubits: usize,
        ops: Vec<GateOp>,
        measurements: Vec<Measurement>,
    ) -> Self {
        let c = Circuit {
            num_qubits,
            ops,
            measurements,
        };
        debug_assert_eq!(c.validate(), Ok(()));
        c
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        let n = self.num_qubits;
        for op in &self.ops {
            for &q in op.qubits() {
                if q >= n {
                    return Err(CircuitError::QubitOutOfRange {
                        qubit: q,
                        num_qubits: n,
                    });
                }
            }
            GateOp::new(op.gate(), op.params(), op.qubits())?;
        }
        let mut measured = vec![false; n];
        for m in &self.measurements {
            if m.qubit >= n {
                return Err(CircuitError::QubitOutOfRange {
                    qubit: m.qubit,
                    num_qubits: n,
                });
            }
            if std::mem::replace(&mut measured[m.qubit], true) {
                return Err(CircuitError::DoubleMeasurement(m.qubit));
            }
        }
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty() && self.measurements.is_empty()
    }

    /// Number of gates, |G|.
    pub fn gate_count(&self) -> usize {
        self.ops.len()
    }

    pub fn two_qubit_count(&self) -> usize {
        self.ops.iter().filter(|op| op.is_two_qubit()).count()
    }

    pub fn gate_counts(&self) -> BTreeMap<Gate, usize> {
        let mut counts = BTreeMap::new();
        for op in &self.ops {
            *counts.entry(op.gate()).or_insert(0) += 1;
        }
        counts
    }

    /// Appends a gate. Fails if it touches an out-of-range or measured qubit.
    pub fn push(&mut self, op: GateOp) -> Result<(), CircuitError> {
        for &q in op.qubits() {
            if q >= self.num_qubits {
                return Err(CircuitError::QubitOutOfRange {
                    qubit: q,
                    num_qubits: self.num_qubits,
                });
            }
            if self.measurements.iter().any(|m| m.qubit == q) {
                return Err(CircuitError::GateAfterMeasurement(q));
            }
        }
        self.ops.push(op);
        Ok(())
    }

    pub fn measure(&mut self, qubit: usize, clbit: usize) -> Result<(), CircuitError> {
        if qubit >= self.num_qubits {
            return Err(CircuitError::QubitOutOfRange {
                qubit,
                num_qubits: self.num_qubits,
            });
        }
        if self.measurements.iter().any(|m| m.qubit == qubit) {
            return Err(CircuitError::DoubleMeasurement(qubit));
        }
        self.measurements.push(Measurement { qubit, clbit });
        Ok(())
    }

    /// Measures every qubit `i` into classical bit `i`.
    pub fn measure_all(&mut self) {
        self.measurements = (0..self.num_qubits)
            .map(|q| Measurement { qubit: q, clbit: q })
            .collect();
    }

    /// Copy of the circuit with measurements removed.
    pub fn without_measurements(&self) -> Circuit {
        Circuit {
            num_qubits: self.num_qubits,
            ops: self.ops.clone(),
            measurements: Vec::new(),
        }
    }

    pub fn with_ops(&self, ops: Vec<GateOp>) -> Circuit {
        Circuit::from_parts_unchecked(self.num_qubits, ops, self.measurements.clone())
    }

    pub fn into_parts(self) -> (usize, Vec<GateOp>, Vec<Measurement>) {
        (self.num_qubits, self.ops, self.measurements)
    }

    /// Relabels qubit `q` to `map[q]` in a circuit of `num_qubits` qubits.
    pub fn relabel(&self, map: &[usize], num_qubits: usize) -> Circuit {
        let ops = self.ops.iter().map(|op| op.map_qubits(|q| map[q])).collect();
        let measurements = self
            .measurements
            .iter()
            .map(|m| Measurement {
                qubit: map[m.qubit],
                clbit: m.clbit,
            })
            .collect();
        Circuit::from_parts_unchecked(num_qubits, ops, measurements)
    }

    /// Qubits touched by any gate or measurement, ascending.
    pub fn active_qubits(&self) -> Vec<usize> {
        let mut used = vec![false; self.num_qubits];
        for op in &self.ops {
            for &q in op.qubits() {
                used[q] = true;
            }
        }
        for m in &self.measurements {
            used[m.qubit] = true;
        }
        (0..self.num_qubits).filter(|&q| used[q]).collect()
    }

    /// Circuit restricted to its active qubits, renumbered densely.
    pub fn compacted(&self) -> Circuit {
        let active = self.active_qubits();
        let mut map = vec![usize::MAX; self.num_qubits];
        for (i, &q) in active.iter().enumerate() {
            map[q] = i;
        }
        self.relabel(&map, active.len())
    }

    /// Stable content hash (hex SHA-256) over qubit count, ops and
    /// measurements. Parameters hash by bit pattern.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.num_qubits as u64).to_le_bytes());
        for op in &self.ops {
            h.update([op.gate().index() as u8]);
            for &q in op.qubits() {
                h.update((q as u64).to_le_bytes());
            }
            for &p in op.params() {
                h.update(p.to_bits().to_le_bytes());
            }
        }
        h.update([0xff]);
        for m in &self.measurements {
            h.update((m.qubit as u64).to_le_bytes());
            h.update((m.clbit as u64).to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Cheap 64-bit fingerprint used for memoisation.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.num_qubits.hash(&mut h);
        for op in &self.ops {
            op.gate().hash(&mut h);
            op.qubits().hash(&mut h);
            for p in op.params() {
                p.to_bits().hash(&mut h);
            }
        }
        self.measurements.hash(&mut h);
        h.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_checks_range_and_measurement() {
        let mut c = Circuit::new(2);
        assert!(c.push(GateOp::one(Gate::H, 2)).is_err());
        c.push(GateOp::one(Gate::H, 0)).unwrap();
        c.measure(0, 0).unwrap();
        assert_eq!(
            c.push(GateOp::one(Gate::X, 0)),
            Err(CircuitError::GateAfterMeasurement(0))
        );
        assert_eq!(c.measure(0, 1), Err(CircuitError::DoubleMeasurement(0)));
    }

    #[test]
    fn compaction_drops_idle_wires() {
        let mut c = Circuit::new(5);
        c.push(GateOp::two(Gate::Cx, 4, 1)).unwrap();
        c.measure(4, 0).unwrap();
        let k = c.compacted();
        assert_eq!(k.num_qubits(), 2);
        assert_eq!(k.ops()[0].qubits(), &[1, 0]);
        assert_eq!(k.measurements()[0].qubit, 1);
    }

    #[test]
    fn hash_distinguishes_params() {
        let mut a = Circuit::new(1);
        a.push(GateOp::rot(Gate::Rz, 0.5, 0)).unwrap();
        let mut b = Circuit::new(1);
        b.push(GateOp::rot(Gate::Rz, 0.25, 0)).unwrap();
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash(), a.clone().content_hash());
    }
}
