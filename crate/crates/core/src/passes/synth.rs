//! Rule-based basis translation.
//!
//! Two hand-written tables, one per native family. A rule may emit gates
//! that are themselves rewritten in a later round; rounds repeat until the
//! circuit is native.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use super::PassError;
use crate::circuit::Circuit;
use crate::device::DeviceModel;
use crate::gate::{Gate, GateOp};

/// Which decomposition table a native set selects.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleSet {
    /// Targets {rz, sx, x, cx}; `x` may be absent.
    RzSxCx,
    /// Targets {rx, rz, rxx}.
    RxRzRxx,
}

impl RuleSet {
    pub fn for_device(d: &DeviceModel) -> Option<RuleSet> {
        let has = |gs: &[Gate]| gs.iter().all(|&g| d.is_native(g));
        if has(&[Gate::Rz, Gate::Sx, Gate::Cx]) {
            Some(RuleSet::RzSxCx)
        } else if has(&[Gate::Rx, Gate::Rz, Gate::Rxx]) {
            Some(RuleSet::RxRzRxx)
        } else {
            None
        }
    }
}

const MAX_ROUNDS: usize = 8;

fn rz(t: f64, q: usize) -> GateOp {
    GateOp::rot(Gate::Rz, t, q)
}

fn rx(t: f64, q: usize) -> GateOp {
    GateOp::rot(Gate::Rx, t, q)
}

fn ry(t: f64, q: usize) -> GateOp {
    GateOp::rot(Gate::Ry, t, q)
}

fn g1(g: Gate, q: usize) -> GateOp {
    GateOp::one(g, q)
}

fn g2(g: Gate, a: usize, b: usize) -> GateOp {
    GateOp::two(g, a, b)
}

/// One rewrite step for `op`, or `None` if the table has no rule for it.
/// The result may still contain non-native gates.
pub fn rewrite(op: &GateOp, rules: RuleSet, x_native: bool) -> Option<Vec<GateOp>> {
    use Gate::*;
    let q = op.qubits()[0];
    let t = op.angle();
    let phase = |angle: f64| Some(vec![rz(angle, q)]);
    match op.gate() {
        Z => phase(PI),
        S => phase(FRAC_PI_2),
        Sdg => phase(-FRAC_PI_2),
        T => phase(FRAC_PI_4),
        Tdg => phase(-FRAC_PI_4),
        Swap => {
            let b = op.qubits()[1];
            Some(vec![g2(Cx, q, b), g2(Cx, b, q), g2(Cx, q, b)])
        }
        g => match rules {
            RuleSet::RzSxCx => match g {
                X if !x_native => Some(vec![g1(Sx, q), g1(Sx, q)]),
                Y => Some(vec![rz(PI, q), g1(X, q)]),
                H => Some(vec![rz(FRAC_PI_2, q), g1(Sx, q), rz(FRAC_PI_2, q)]),
                Rx => Some(vec![
                    rz(FRAC_PI_2, q),
                    g1(Sx, q),
                    rz(t + PI, q),
                    g1(Sx, q),
                    rz(FRAC_PI_2, q),
                ]),
                Ry => Some(vec![g1(Sx, q), rz(t + PI, q), g1(Sx, q), rz(PI, q)]),
                Cz => {
                    let b = op.qubits()[1];
                    Some(vec![g1(H, b), g2(Cx, q, b), g1(H, b)])
                }
                Rxx => {
                    let b = op.qubits()[1];
                    Some(vec![
                        g1(H, q),
                        g1(H, b),
                        g2(Cx, q, b),
                        rz(t, b),
                        g2(Cx, q, b),
                        g1(H, q),
                        g1(H, b),
                    ])
                }
                _ => None,
            },
            RuleSet::RxRzRxx => match g {
                X => Some(vec![rx(PI, q)]),
                Y => Some(vec![rz(PI, q), rx(PI, q)]),
                Sx => Some(vec![rx(FRAC_PI_2, q)]),
                H => Some(vec![rz(FRAC_PI_2, q), rx(FRAC_PI_2, q), rz(FRAC_PI_2, q)]),
                Ry => Some(vec![rz(-FRAC_PI_2, q), rx(t, q), rz(FRAC_PI_2, q)]),
                Cx => {
                    let b = op.qubits()[1];
                    Some(vec![
                        ry(FRAC_PI_2, q),
                        GateOp::rxx(FRAC_PI_2, q, b),
                        rx(-FRAC_PI_2, q),
                        rx(-FRAC_PI_2, b),
                        ry(-FRAC_PI_2, q),
                    ])
                }
                Cz => {
                    let b = op.qubits()[1];
                    Some(vec![
                        g1(H, q),
                        g1(H, b),
                        GateOp::rxx(FRAC_PI_2, q, b),
                        rx(-FRAC_PI_2, q),
                        rx(-FRAC_PI_2, b),
                        g1(H, q),
                        g1(H, b),
                    ])
                }
                _ => None,
            },
        },
    }
}

/// Rewrites `ops` until every gate is native on `d`.
pub(crate) fn lower_ops(ops: &[GateOp], d: &DeviceModel) -> Result<Vec<GateOp>, PassError> {
    if ops.iter().all(|op| d.is_native(op.gate())) {
        return Ok(ops.to_vec());
    }
    let no_rule = |g: Gate| PassError::NoDecomposition {
        gate: g,
        device: d.id().to_string(),
    };
    let first_foreign = |ops: &[GateOp]| ops.iter().find(|op| !d.is_native(op.gate())).map(|op| op.gate());
    let rules = RuleSet::for_device(d).ok_or_else(|| no_rule(first_foreign(ops).unwrap()))?;
    let x_native = d.is_native(Gate::X);
    let mut cur = ops.to_vec();
    for _ in 0..MAX_ROUNDS {
        let mut next = Vec::with_capacity(cur.len() * 3);
        let mut changed = false;
        for op in &cur {
            if d.is_native(op.gate()) {
                next.push(*op);
                continue;
            }
            let out = rewrite(op, rules, x_native).ok_or_else(|| no_rule(op.gate()))?;
            next.extend(out);
            changed = true;
        }
        cur = next;
        if !changed {
            return Ok(cur);
        }
    }
    match first_foreign(&cur) {
        Some(g) => Err(no_rule(g)),
        None => Ok(cur),
    }
}

/// Rewrites every gate of `c` into `d`'s native set. Native circuits come
/// back unchanged.
pub fn synthesize_to_native(c: &Circuit, d: &DeviceModel) -> Result<Circuit, PassError> {
    Ok(c.with_ops(lower_ops(c.ops(), d)?))
}

/// SWAP of `a` and `b` as native gates. Uses the `cx(a,b)` first
/// orientation; callers pick `a` and `b` to line up with neighbouring CX.
pub(crate) fn native_swap(a: usize, b: usize, d: &DeviceModel) -> Vec<GateOp> {
    let swap = [GateOp::two(Gate::Swap, a, b)];
    lower_ops(&swap, d).unwrap_or_else(|_| swap.to_vec())
}
