//! Peephole optimisations.
//!
//! Most passes keep one stack of output indices per wire, so "the previous
//! gate on this wire" is the top of a stack and removals expose the gate
//! underneath. That way nested patterns such as `h x x h` collapse in a
//! single pass.

use std::f64::consts::PI;

use super::IDENTITY_EPSILON;
use crate::circuit::Circuit;
use crate::device::DeviceModel;
use crate::gate::{Gate, GateOp};

/// Maps an angle into (-pi, pi]. Rotations are 2pi periodic up to a
/// global phase.
pub fn normalize_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut t = theta - two_pi * (theta / two_pi).round();
    if t <= -PI {
        t += two_pi;
    }
    t
}

fn same_pair(a: &GateOp, b: &GateOp) -> bool {
    let (p, q) = (a.qubits(), b.qubits());
    p.len() == q.len() && p.iter().all(|x| q.contains(x))
}

/// Whether `b` undoes `a` (both on the same qubits).
pub fn is_inverse_pair(a: &GateOp, b: &GateOp) -> bool {
    use Gate::*;
    if !same_pair(a, b) {
        return false;
    }
    match (a.gate(), b.gate()) {
        (X, X) | (Y, Y) | (Z, Z) | (H, H) | (Cz, Cz) | (Swap, Swap) => true,
        (S, Sdg) | (Sdg, S) | (T, Tdg) | (Tdg, T) => true,
        (Cx, Cx) => a.qubits() == b.qubits(),
        (g, h) if g == h && g.is_rotation() => {
            normalize_angle(a.angle() + b.angle()).abs() < IDENTITY_EPSILON
        }
        _ => false,
    }
}

/// Merges two rotations about the same axis on the same qubits. `Some(None)`
/// means they cancel outright.
fn merge(a: &GateOp, b: &GateOp) -> Option<Option<GateOp>> {
    if a.gate() != b.gate() || !a.gate().is_rotation() || !same_pair(a, b) {
        return None;
    }
    let t = normalize_angle(a.angle() + b.angle());
    if t.abs() < IDENTITY_EPSILON {
        Some(None)
    } else {
        Some(Some(a.with_angle(t)))
    }
}

/// Output list with a per-wire stack of live entries.
struct Stacked {
    out: Vec<Option<GateOp>>,
    stacks: Vec<Vec<usize>>,
}

impl Stacked {
    fn new(n: usize) -> Self {
        Stacked {
            out: Vec::new(),
            stacks: vec![Vec::new(); n],
        }
    }

    /// Index of the gate directly before `op` on all of its wires, if one
    /// gate is.
    fn shared_top(&self, op: &GateOp) -> Option<usize> {
        let mut top = None;
        for &q in op.qubits() {
            let t = *self.stacks[q].last()?;
            if top.is_some_and(|x| x != t) {
                return None;
            }
            top = Some(t);
        }
        top.filter(|&t| same_pair(self.out[t].as_ref().unwrap(), op))
    }

    /// `depth`-th live gate back on wire `q` (0 is the top).
    fn nth_on(&self, q: usize, depth: usize) -> Option<(usize, GateOp)> {
        let s = &self.stacks[q];
        let i = *s.get(s.len().checked_sub(depth + 1)?)?;
        Some((i, self.out[i].unwrap()))
    }

    fn push(&mut self, op: GateOp) {
        let i = self.out.len();
        self.out.push(Some(op));
        for &q in op.qubits() {
            self.stacks[q].push(i);
        }
    }

    fn remove(&mut self, i: usize) {
        let op = self.out[i].take().unwrap();
        for &q in op.qubits() {
            let s = &mut self.stacks[q];
            let pos = s.iter().rposition(|&x| x == i).unwrap();
            s.remove(pos);
        }
    }

    fn finish(self, c: &Circuit) -> Circuit {
        c.with_ops(self.out.into_iter().flatten().collect())
    }
}

/// Removes adjacent gate pairs that multiply to the identity.
pub fn cancel_inverses(c: &Circuit) -> Circuit {
    let mut s = Stacked::new(c.num_qubits());
    for op in c.ops() {
        match s.shared_top(op) {
            Some(j) if is_inverse_pair(&s.out[j].unwrap(), op) => s.remove(j),
            _ => s.push(*op),
        }
    }
    s.finish(c)
}

/// Fuses adjacent rotations about the same axis and normalises every
/// rotation angle into (-pi, pi].
pub fn merge_rotations(c: &Circuit) -> Circuit {
    let mut s = Stacked::new(c.num_qubits());
    for op in c.ops() {
        let op = if op.gate().is_rotation() {
            op.with_angle(normalize_angle(op.angle()))
        } else {
            *op
        };
        match s.shared_top(&op).map(|j| (j, merge(&s.out[j].unwrap(), &op))) {
            Some((j, Some(None))) => s.remove(j),
            Some((j, Some(Some(m)))) => s.out[j] = Some(m),
            _ => s.push(op),
        }
    }
    s.finish(c)
}

/// Drops rotations whose angle is within `eps` of a multiple of 2pi.
pub fn drop_identity_rotations(c: &Circuit, eps: f64) -> Circuit {
    let ops = c
        .ops()
        .iter()
        .filter(|op| !(op.gate().is_rotation() && normalize_angle(op.angle()).abs() < eps))
        .copied()
        .collect();
    c.with_ops(ops)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Axis {
    X,
    Y,
    Z,
}

/// The Pauli basis in which `op` is block diagonal on qubit `q`, if any.
fn axis(op: &GateOp, q: usize) -> Option<Axis> {
    use Gate::*;
    match op.gate() {
        Z | S | Sdg | T | Tdg | Rz | Cz => Some(Axis::Z),
        X | Sx | Rx | Rxx => Some(Axis::X),
        Y | Ry => Some(Axis::Y),
        Cx if op.qubits()[0] == q => Some(Axis::Z),
        Cx => Some(Axis::X),
        H | Swap => None,
    }
}

/// Sufficient commutation test: on every shared qubit both gates are block
/// diagonal in the same Pauli basis.
pub fn commutes(a: &GateOp, b: &GateOp) -> bool {
    a.qubits()
        .iter()
        .filter(|q| b.acts_on(**q))
        .all(|&q| match (axis(a, q), axis(b, q)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        })
}

const COMMUTE_SCAN: usize = 64;

/// Cancels or merges a gate with an earlier partner it can be commuted
/// back to.
pub fn commute_cancel(c: &Circuit) -> Circuit {
    let mut out: Vec<Option<GateOp>> = Vec::with_capacity(c.ops().len());
    'next: for op in c.ops() {
        let mut seen = 0;
        for j in (0..out.len()).rev() {
            let Some(prev) = out[j] else { continue };
            if !op.qubits().iter().any(|&q| prev.acts_on(q)) {
                continue;
            }
            seen += 1;
            if seen > COMMUTE_SCAN {
                break;
            }
            if is_inverse_pair(&prev, op) {
                out[j] = None;
                continue 'next;
            }
            if let Some(m) = merge(&prev, op) {
                out[j] = m;
                continue 'next;
            }
            if !commutes(&prev, op) {
                break;
            }
        }
        out.push(Some(*op));
    }
    c.with_ops(out.into_iter().flatten().collect())
}

/// Removes diagonal gates that only precede measurements: they change
/// phases, not outcome probabilities.
pub fn remove_diag_before_measure(c: &Circuit) -> Circuit {
    let mut open = vec![false; c.num_qubits()];
    for m in c.measurements() {
        open[m.qubit] = true;
    }
    let mut keep = vec![true; c.ops().len()];
    for (i, op) in c.ops().iter().enumerate().rev() {
        if op.gate().is_diagonal() && op.qubits().iter().all(|&q| open[q]) {
            keep[i] = false;
        } else {
            for &q in op.qubits() {
                open[q] = false;
            }
        }
    }
    let ops = c
        .ops()
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(op, _)| *op)
        .collect();
    c.with_ops(ops)
}

const SWEEP_ROUNDS: usize = 32;

/// Runs the gate-set preserving passes until nothing changes.
pub fn peephole_sweep(c: &Circuit) -> Circuit {
    let mut cur = c.clone();
    for _ in 0..SWEEP_ROUNDS {
        let next = remove_diag_before_measure(&commute_cancel(&drop_identity_rotations(
            &merge_rotations(&cancel_inverses(&cur)),
            IDENTITY_EPSILON,
        )));
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

fn consolidate_once(c: &Circuit) -> Circuit {
    use Gate::*;
    let mut s = Stacked::new(c.num_qubits());
    for op in c.ops() {
        if let Some(j) = s.shared_top(op) {
            let prev = s.out[j].unwrap();
            if is_inverse_pair(&prev, op) {
                s.remove(j);
                continue;
            }
            if let Some(m) = merge(&prev, op) {
                match m {
                    Some(m) => s.out[j] = Some(m),
                    None => s.remove(j),
                }
                continue;
            }
            // cx(a,b) cx(b,a) cx(a,b) -> swap(a,b)
            if op.gate() == Cx && prev.gate() == Cx && prev.qubits()[0] == op.qubits()[1] {
                let (a, b) = (op.qubits()[0], op.qubits()[1]);
                let first = (s.nth_on(a, 1), s.nth_on(b, 1));
                if let (Some((i, f)), Some((k, _))) = first {
                    if i == k && f == *op {
                        s.remove(j);
                        s.out[i] = Some(GateOp::two(Swap, a, b));
                        continue;
                    }
                }
            }
        }
        // h(b) · {cx(a,b) | cz(a,b)} · h(b): the H pair conjugates the
        // two-qubit gate on b.
        if op.gate() == H {
            let b = op.qubits()[0];
            if let (Some((j, mid)), Some((i, pre))) = (s.nth_on(b, 0), s.nth_on(b, 1)) {
                let target_b = mid.gate() == Cx && mid.qubits()[1] == b;
                if pre.gate() == H && (target_b || mid.gate() == Cz) {
                    let a = if mid.qubits()[0] == b {
                        mid.qubits()[1]
                    } else {
                        mid.qubits()[0]
                    };
                    let new = if target_b {
                        GateOp::two(Cz, a, b)
                    } else {
                        GateOp::two(Cx, a, b)
                    };
                    s.out[j] = Some(new);
                    s.remove(i);
                    continue;
                }
            }
        }
        s.push(*op);
    }
    s.finish(c)
}

/// Rewrites short two-qubit runs with a fixed table: inverse pairs cancel,
/// rotations merge, three alternating CX become a SWAP and H-conjugated
/// CX/CZ swap roles. May leave the native set; the device argument keeps the
/// signature uniform with the other device-aware passes.
pub fn consolidate_2q_blocks(c: &Circuit, _d: &DeviceModel) -> Circuit {
    let mut cur = c.clone();
    loop {
        let next = consolidate_once(&cur);
        if next.gate_count() >= cur.gate_count() {
            return cur;
        }
        cur = next;
    }
}
