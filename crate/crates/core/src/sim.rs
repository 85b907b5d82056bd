//! Dense statevector simulation, used to check that compilation preserves
//! circuit semantics.

use num_complex::Complex64 as C;

use crate::circuit::Circuit;
use crate::gate::{Gate, GateOp};

pub const DEFAULT_QUBIT_CAP: usize = 12;
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("{qubits} qubits exceed the simulator cap of {cap}")]
    TooManyQubits { qubits: usize, cap: usize },
    #[error("layout has {got} entries, circuit has {expected} qubits")]
    LayoutSize { expected: usize, got: usize },
    #[error("layout sends qubit {0} outside the compiled circuit")]
    LayoutRange(usize),
}

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// Row-major 2x2 unitary.
pub fn matrix_1q(op: &GateOp) -> [C; 4] {
    let (z, o) = (c(0.0, 0.0), c(1.0, 0.0));
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let th = op.angle() / 2.0;
    let (cs, sn) = (th.cos(), th.sin());
    match op.gate() {
        Gate::X => [z, o, o, z],
        Gate::Y => [z, c(0.0, -1.0), c(0.0, 1.0), z],
        Gate::Z => [o, z, z, -o],
        Gate::H => [c(r, 0.0), c(r, 0.0), c(r, 0.0), c(-r, 0.0)],
        Gate::S => [o, z, z, c(0.0, 1.0)],
        Gate::Sdg => [o, z, z, c(0.0, -1.0)],
        Gate::T => [o, z, z, C::from_polar(1.0, std::f64::consts::FRAC_PI_4)],
        Gate::Tdg => [o, z, z, C::from_polar(1.0, -std::f64::consts::FRAC_PI_4)],
        Gate::Sx => [c(0.5, 0.5), c(0.5, -0.5), c(0.5, -0.5), c(0.5, 0.5)],
        Gate::Rx => [c(cs, 0.0), c(0.0, -sn), c(0.0, -sn), c(cs, 0.0)],
        Gate::Ry => [c(cs, 0.0), c(-sn, 0.0), c(sn, 0.0), c(cs, 0.0)],
        Gate::Rz => [C::from_polar(1.0, -th), z, z, C::from_polar(1.0, th)],
        g => panic!("{g} is not a single-qubit gate"),
    }
}

/// Row-major 4x4 unitary on basis |b a> where `a` is the op's first qubit
/// (low bit) and `b` its second.
pub fn matrix_2q(op: &GateOp) -> [[C; 4]; 4] {
    let (z, o) = (c(0.0, 0.0), c(1.0, 0.0));
    let mut m = [[z; 4]; 4];
    match op.gate() {
        Gate::Cx => {
            // control = first qubit (bit 0), target = second (bit 1)
            m[0][0] = o;
            m[2][2] = o;
            m[1][3] = o;
            m[3][1] = o;
        }
        Gate::Cz => {
            m[0][0] = o;
            m[1][1] = o;
            m[2][2] = o;
            m[3][3] = -o;
        }
        Gate::Swap => {
            m[0][0] = o;
            m[1][2] = o;
            m[2][1] = o;
            m[3][3] = o;
        }
        Gate::Rxx => {
            let th = op.angle() / 2.0;
            let (cs, sn) = (c(th.cos(), 0.0), c(0.0, -th.sin()));
            for i in 0..4 {
                m[i][i] = cs;
                m[i][3 - i] = sn;
            }
        }
        g => panic!("{g} is not a two-qubit gate"),
    }
    m
}

fn apply_1q(state: &mut [C], q: usize, u: &[C; 4]) {
    let bit = 1usize << q;
    for i in 0..state.len() {
        if i & bit == 0 {
            let (a0, a1) = (state[i], state[i | bit]);
            state[i] = u[0] * a0 + u[1] * a1;
            state[i | bit] = u[2] * a0 + u[3] * a1;
        }
    }
}

fn apply_2q(state: &mut [C], qa: usize, qb: usize, u: &[[C; 4]; 4]) {
    let (ba, bb) = (1usize << qa, 1usize << qb);
    for i in 0..state.len() {
        if i & ba == 0 && i & bb == 0 {
            let idx = [i, i | ba, i | bb, i | ba | bb];
            let v = idx.map(|k| state[k]);
            for (r, &k) in idx.iter().enumerate() {
                state[k] = (0..4).map(|s| u[r][s] * v[s]).sum();
            }
        }
    }
}

/// Applies `op` to a little-endian statevector (qubit k is bit k).
pub fn apply(state: &mut [C], op: &GateOp) {
    match op.qubits() {
        [q] => apply_1q(state, *q, &matrix_1q(op)),
        [a, b] => apply_2q(state, *a, *b, &matrix_2q(op)),
        _ => unreachable!(),
    }
}

/// Simulates the gate list of `c` from |0…0>. Measurements are ignored.
pub fn simulate_statevector(c: &Circuit) -> Result<Vec<C>, SimError> {
    simulate_with_cap(c, DEFAULT_QUBIT_CAP)
}

pub fn simulate_with_cap(c: &Circuit, cap: usize) -> Result<Vec<C>, SimError> {
    if c.num_qubits() > cap {
        return Err(SimError::TooManyQubits {
            qubits: c.num_qubits(),
            cap,
        });
    }
    let mut state = vec![C::new(0.0, 0.0); 1 << c.num_qubits()];
    state[0] = C::new(1.0, 0.0);
    for op in c.ops() {
        apply(&mut state, op);
    }
    Ok(state)
}

/// Full unitary of the gate list, column `j` being the image of basis
/// state `j`.
pub fn unitary(c: &Circuit) -> Result<Vec<Vec<C>>, SimError> {
    if c.num_qubits() > DEFAULT_QUBIT_CAP {
        return Err(SimError::TooManyQubits {
            qubits: c.num_qubits(),
            cap: DEFAULT_QUBIT_CAP,
        });
    }
    let dim = 1usize << c.num_qubits();
    Ok((0..dim)
        .map(|j| {
            let mut col = vec![C::new(0.0, 0.0); dim];
            col[j] = C::new(1.0, 0.0);
            for op in c.ops() {
                apply(&mut col, op);
            }
            col
        })
        .collect())
}

/// Whether two gate lists implement the same unitary up to global phase.
pub fn same_unitary(a: &Circuit, b: &Circuit, tol: f64) -> Result<bool, SimError> {
    if a.num_qubits() != b.num_qubits() {
        return Ok(false);
    }
    let (ua, ub) = (unitary(a)?, unitary(b)?);
    let mut phase = None;
    for (ca, cb) in ua.iter().zip(&ub) {
        for (x, y) in ca.iter().zip(cb) {
            if phase.is_none() && x.norm() > 0.1 {
                phase = Some(y / x);
            }
            if let Some(p) = phase {
                if (x * p - y).norm() > tol {
                    return Ok(false);
                }
            } else if y.norm() > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Checks that `compiled` realises `original` when logical qubit `i` ends up
/// on qubit `final_positions[i]` of `compiled`.
///
/// Idle wires of `compiled` are dropped before simulation, so only the
/// active region counts against the cap. States are compared up to a phase
/// per outcome of the measured qubits: with no measurements that is a
/// global phase, and diagonal gates right before a measurement become
/// invisible, as they are on hardware.
pub fn equivalent_up_to_layout(
    original: &Circuit,
    compiled: &Circuit,
    final_positions: &[usize],
) -> Result<bool, SimError> {
    equivalent_with_cap(original, compiled, final_positions, DEFAULT_QUBIT_CAP)
}

pub fn equivalent_with_cap(
    original: &Circuit,
    compiled: &Circuit,
    final_positions: &[usize],
    cap: usize,
) -> Result<bool, SimError> {
    let n = original.num_qubits();
    if final_positions.len() != n {
        return Err(SimError::LayoutSize {
            expected: n,
            got: final_positions.len(),
        });
    }
    if let Some(&p) = final_positions.iter().find(|&&p| p >= compiled.num_qubits()) {
        return Err(SimError::LayoutRange(p));
    }

    // Active region of the compiled circuit.
    let mut used = vec![false; compiled.num_qubits()];
    for op in compiled.ops() {
        for &q in op.qubits() {
            used[q] = true;
        }
    }
    for &p in final_positions {
        used[p] = true;
    }
    let mut compact = vec![usize::MAX; compiled.num_qubits()];
    let mut k = 0;
    for (q, u) in used.iter().enumerate() {
        if *u {
            compact[q] = k;
            k += 1;
        }
    }
    if k > cap {
        return Err(SimError::TooManyQubits { qubits: k, cap });
    }

    let expected = simulate_with_cap(&original.without_measurements(), cap)?;
    let compiled_small = compiled.without_measurements().relabel(&compact, k);
    let actual = simulate_with_cap(&compiled_small, cap)?;

    let target_bit: Vec<usize> = final_positions.iter().map(|&p| compact[p]).collect();
    let embed = |x: usize| -> usize {
        (0..n)
            .filter(|i| x >> i & 1 == 1)
            .map(|i| 1usize << target_bit[i])
            .sum()
    };
    let measured_mask: usize = original.measurements().iter().map(|m| 1usize << m.qubit).sum();

    let tol = EQUIVALENCE_TOLERANCE;
    let mut covered = vec![false; actual.len()];
    // Group logical basis states by the value of the measured bits.
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for x in 0..expected.len() {
        groups.entry(x & measured_mask).or_default().push(x);
    }
    for xs in groups.values() {
        let pivot = *xs
            .iter()
            .max_by(|&&a, &&b| expected[a].norm().total_cmp(&expected[b].norm()))
            .unwrap();
        let phase = if expected[pivot].norm() > tol {
            let r = actual[embed(pivot)] / expected[pivot];
            if (r.norm() - 1.0).abs() > tol.sqrt() {
                return Ok(false);
            }
            r / r.norm()
        } else {
            c(1.0, 0.0)
        };
        for &x in xs {
            let y = embed(x);
            covered[y] = true;
            if (actual[y] - phase * expected[x]).norm() > tol {
                return Ok(false);
            }
        }
    }
    Ok(actual
        .iter()
        .zip(&covered)
        .all(|(a, cov)| *cov || a.norm() <= tol))
}
