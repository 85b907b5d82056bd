//! Fixed-length observation of a compilation state.

use qpredict_core::features::extract_features;
use qpredict_core::Circuit;

use crate::env::CompilationStatus;

/// Qubits, depth, five composite features, three-way status one-hot and a
/// layout flag.
pub const OBS_DIM: usize = 11;

const QUBIT_SCALE: f64 = 128.0;
const DEPTH_SCALE: f64 = 10_000.0;

fn log_scaled(x: usize, scale: f64) -> f64 {
    ((1.0 + x as f64).ln() / (1.0 + scale).ln()).min(1.0)
}

/// Every entry lies in [0, 1]. Features are taken on the compacted circuit,
/// so placing a circuit on a larger device does not change them.
pub fn observe(c: &Circuit, status: CompilationStatus, has_layout: bool) -> [f64; OBS_DIM] {
    let f = extract_features(&c.compacted());
    let mut o = [0.0; OBS_DIM];
    o[0] = log_scaled(f.num_qubits, QUBIT_SCALE);
    o[1] = log_scaled(f.depth, DEPTH_SCALE);
    o[2] = f.program_communication;
    o[3] = f.critical_depth_ratio;
    o[4] = f.entanglement_ratio;
    o[5] = f.parallelism;
    o[6] = f.liveness;
    o[7 + status.index()] = 1.0;
    o[10] = if has_layout { 1.0 } else { 0.0 };
    o
}

#[cfg(test)]
mod tests {
    use super::*;
    use qpredict_core::{Gate, GateOp};

    #[test]
    fn observation_is_bounded_and_one_hot() {
        let mut c = Circuit::new(4);
        c.push(GateOp::one(Gate::H, 0)).unwrap();
        c.push(GateOp::two(Gate::Cx, 0, 3)).unwrap();
        let s = CompilationStatus {
            only_native: true,
            respects_topology: false,
        };
        let o = observe(&c, s, true);
        assert!(o.iter().all(|x| (0.0..=1.0).contains(x)));
        assert_eq!(&o[7..], &[0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn relabeling_onto_a_larger_register_is_invisible() {
        let mut c = Circuit::new(2);
        c.push(GateOp::two(Gate::Cx, 0, 1)).unwrap();
        let s = CompilationStatus {
            only_native: false,
            respects_topology: false,
        };
        let placed = c.relabel(&[5, 2], 8);
        assert_eq!(observe(&c, s, false), observe(&placed, s, false));
    }
}
