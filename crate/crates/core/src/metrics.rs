//! Structural circuit metrics: ASAP depth and two-qubit gates on the
//! critical path.

use std::collections::BTreeMap;

use crate::circuit::Circuit;
use crate::gate::Gate;

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct CircuitMetrics {
    /// ASAP layer count; terminal measurements occupy one layer each.
    pub depth: usize,
    pub gate_counts: BTreeMap<Gate, usize>,
    pub two_qubit_count: usize,
    /// Most two-qubit gates found on any dependency path of length `depth`.
    pub critical_path_two_qubit_count: usize,
}

pub fn compute_metrics(c: &Circuit) -> CircuitMetrics {
    let n = c.num_qubits();
    // Per wire: index of the last node touching it.
    let mut last: Vec<Option<usize>> = vec![None; n];
    let total = c.ops().len() + c.measurements().len();
    let mut layer = Vec::with_capacity(total);
    // Best two-qubit count over longest paths ending at each node.
    let mut best = Vec::with_capacity(total);

    let mut visit = |qubits: &[usize], two_qubit: bool, layer: &mut Vec<usize>, best: &mut Vec<usize>| {
        let mut l = 0;
        let mut b = 0;
        for &q in qubits {
            if let Some(p) = last[q] {
                let pl: usize = layer[p];
                let pb: usize = best[p];
                if pl > l {
                    l = pl;
                    b = pb;
                } else if pl == l {
                    b = b.max(pb);
                }
            }
        }
        let idx = layer.len();
        layer.push(l + 1);
        best.push(b + usize::from(two_qubit));
        for &q in qubits {
            last[q] = Some(idx);
        }
    };

    for op in c.ops() {
        visit(op.qubits(), op.is_two_qubit(), &mut layer, &mut best);
    }
    for m in c.measurements() {
        visit(&[m.qubit], false, &mut layer, &mut best);
    }

    let depth = layer.iter().copied().max().unwrap_or(0);
    let critical = layer
        .iter()
        .zip(&best)
        .filter(|(l, _)| **l == depth)
        .map(|(_, b)| *b)
        .max()
        .unwrap_or(0);
    CircuitMetrics {
        depth,
        gate_counts: c.gate_counts(),
        two_qubit_count: c.two_qubit_count(),
        critical_path_two_qubit_count: critical,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gate::GateOp;

    /// Enumerates every source-to-sink path of the wire DAG explicitly.
    fn enumerate_paths(c: &Circuit) -> (usize, usize) {
        let n = c.num_qubits();
        let mut nodes: Vec<(Vec<usize>, bool)> = c
            .ops()
            .iter()
            .map(|o| (o.qubits().to_vec(), o.is_two_qubit()))
            .collect();
        nodes.extend(c.measurements().iter().map(|m| (vec![m.qubit], false)));
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
        let mut has_pred = vec![false; nodes.len()];
        let mut last: Vec<Option<usize>> = vec![None; n];
        for (i, (qs, _)) in nodes.iter().enumerate() {
            for &q in qs {
                if let Some(p) = last[q] {
                    if !succ[p].contains(&i) {
                        succ[p].push(i);
                    }
                    has_pred[i] = true;
                }
                last[q] = Some(i);
            }
        }
        let mut best = (0, 0);
        fn walk(
            i: usize,
            len: usize,
            twoq: usize,
            nodes: &[(Vec<usize>, bool)],
            succ: &[Vec<usize>],
            best: &mut (usize, usize),
        ) {
            let len = len + 1;
            let twoq = twoq + usize::from(nodes[i].1);
            if succ[i].is_empty() {
                if len > best.0 || (len == best.0 && twoq > best.1) {
                    *best = (len, twoq);
                }
                return;
            }
            for &s in &succ[i] {
                walk(s, len, twoq, nodes, succ, best);
            }
        }
        for (i, &pred) in has_pred.iter().enumerate() {
            if !pred {
                walk(i, 0, 0, &nodes, &succ, &mut best);
            }
        }
        best
    }

    #[test]
    fn empty_circuit() {
        let m = compute_metrics(&Circuit::new(3));
        assert_eq!(m.depth, 0);
        assert_eq!(m.two_qubit_count, 0);
        assert_eq!(m.critical_path_two_qubit_count, 0);
    }

    #[test]
    fn linear_ghz() {
        let mut c = Circuit::new(4);
        c.push(GateOp::one(Gate::H, 0)).unwrap();
        for i in 0..3 {
            c.push(GateOp::two(Gate::Cx, i, i + 1)).unwrap();
        }
        assert_eq!(enumerate_paths(&c), (4, 3));
        let m = compute_metrics(&c);
        assert_eq!(
            (m.depth, m.two_qubit_count, m.critical_path_two_qubit_count),
            (4, 3, 3)
        );
    }

    #[test]
    fn disjoint_pairs() {
        let mut c = Circuit::new(4);
        c.push(GateOp::two(Gate::Cx, 0, 1)).unwrap();
        c.push(GateOp::two(Gate::Cx, 2, 3)).unwrap();
        assert_eq!(enumerate_paths(&c), (1, 1));
        let m = compute_metrics(&c);
        assert_eq!(
            (m.depth, m.two_qubit_count, m.critical_path_two_qubit_count),
            (1, 2, 1)
        );
    }

    #[test]
    fn measurements_add_a_layer() {
        let mut c = Circuit::new(2);
        c.push(GateOp::two(Gate::Cx, 0, 1)).unwrap();
        c.measure(1, 0).unwrap();
        assert_eq!(compute_metrics(&c).depth, 2);
    }

    #[test]
    fn matches_enumeration_on_small_random_circuits() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(1..=5);
            let mut c = Circuit::new(n);
            for _ in 0..rng.gen_range(0..12) {
                if n > 1 && rng.gen_bool(0.5) {
                    let a = rng.gen_range(0..n);
                    let mut b = rng.gen_range(0..n - 1);
                    if b >= a {
                        b += 1;
                    }
                    c.push(GateOp::two(Gate::Cx, a, b)).unwrap();
                } else {
                    c.push(GateOp::one(Gate::H, rng.gen_range(0..n))).unwrap();
                }
            }
            if rng.gen_bool(0.5) {
                c.measure_all();
            }
            let m = compute_metrics(&c);
            assert_eq!(enumerate_paths(&c), (m.depth, m.critical_path_two_qubit_count));
        }
    }
}
