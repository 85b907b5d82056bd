//! Initial placement of logical qubits on physical qubits.

use super::{check_fits, MappingState, PassError};
use crate::circuit::Circuit;
use crate::device::DeviceModel;

/// Relabels `c` onto the device under `layout` and records it.
pub fn apply_layout(
    c: &Circuit,
    d: &DeviceModel,
    ms: &MappingState,
    layout: Vec<usize>,
) -> Result<(Circuit, MappingState), PassError> {
    if ms.layout.is_some() {
        return Err(PassError::LayoutAlreadySet);
    }
    check_fits(c, d)?;
    let placed = c.relabel(&layout, d.num_qubits());
    let ms = MappingState {
        layout: Some(layout),
        routing_permutation: Vec::new(),
        seed: ms.seed,
    };
    Ok((placed, ms))
}

/// Logical `i` on physical `i`.
pub fn trivial(c: &Circuit, d: &DeviceModel) -> Result<Vec<usize>, PassError> {
    check_fits(c, d)?;
    Ok((0..c.num_qubits()).collect())
}

/// Symmetric two-qubit gate counts between logical qubits.
pub fn interaction_weights(c: &Circuit) -> Vec<Vec<usize>> {
    let n = c.num_qubits();
    let mut w = vec![vec![0; n]; n];
    for op in c.ops() {
        if let [a, b] = op.qubits() {
            w[*a][*b] += 1;
            w[*b][*a] += 1;
        }
    }
    w
}

/// Greedily grows a connected region from the highest-degree qubit, always
/// adding the frontier qubit of highest degree. Logical qubits with more
/// interactions take the earlier (better connected) slots.
pub fn dense(c: &Circuit, d: &DeviceModel) -> Result<Vec<usize>, PassError> {
    check_fits(c, d)?;
    let n = c.num_qubits();
    let total = d.num_qubits();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut chosen = Vec::with_capacity(n);
    let mut taken = vec![false; total];
    let start = (0..total)
        .max_by_key(|&p| (d.degree(p), std::cmp::Reverse(p)))
        .unwrap();
    chosen.push(start);
    taken[start] = true;
    while chosen.len() < n {
        let links = |p: usize| d.neighbors(p).iter().filter(|&&q| taken[q]).count();
        let next = (0..total)
            .filter(|&p| !taken[p] && links(p) > 0)
            .max_by_key(|&p| (d.degree(p), links(p), std::cmp::Reverse(p)))
            .or_else(|| {
                (0..total)
                    .filter(|&p| !taken[p])
                    .max_by_key(|&p| (d.degree(p), std::cmp::Reverse(p)))
            })
            .unwrap();
        chosen.push(next);
        taken[next] = true;
    }
    let w = interaction_weights(c);
    let mut logical: Vec<usize> = (0..n).collect();
    logical.sort_by_key(|&l| std::cmp::Reverse(w[l].iter().sum::<usize>()));
    let mut layout = vec![0; n];
    for (slot, &l) in logical.iter().enumerate() {
        layout[l] = chosen[slot];
    }
    Ok(layout)
}

/// Sum over logical pairs of interaction weight times physical distance.
pub fn layout_cost(w: &[Vec<usize>], layout: &[usize], d: &DeviceModel) -> u64 {
    let mut cost = 0u64;
    for i in 0..layout.len() {
        for j in i + 1..layout.len() {
            if w[i][j] > 0 {
                cost += w[i][j] as u64 * u64::from(d.distance(layout[i], layout[j]));
            }
        }
    }
    cost
}

/// Like [`interaction_weights`] but each gate counts `RECENCY^k` for the
/// k-th two-qubit gate, so earlier interactions weigh more. Used only to
/// break ties.
fn early_weights(c: &Circuit) -> Vec<Vec<f64>> {
    const RECENCY: f64 = 0.9;
    let n = c.num_qubits();
    let mut w = vec![vec![0.0; n]; n];
    let mut f = 1.0;
    for op in c.ops() {
        if let [a, b] = op.qubits() {
            w[*a][*b] += f;
            w[*b][*a] += f;
            f *= RECENCY;
        }
    }
    w
}

/// Places the most interacting logical qubits first, each on the free
/// physical qubit that minimises weighted distance to its placed partners.
/// Ties go to qubits that interact earlier in the circuit.
pub fn interaction(c: &Circuit, d: &DeviceModel) -> Result<Vec<usize>, PassError> {
    check_fits(c, d)?;
    let n = c.num_qubits();
    let total = d.num_qubits();
    if n == 0 {
        return Ok(Vec::new());
    }
    let w = interaction_weights(c);
    let e = early_weights(c);
    let strength: Vec<(usize, f64)> = (0..n).map(|l| (w[l].iter().sum(), e[l].iter().sum())).collect();
    let by_weight = |a: (usize, f64, usize), b: (usize, f64, usize)| {
        a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(b.2.cmp(&a.2))
    };
    let mut pos: Vec<Option<usize>> = vec![None; n];
    let mut taken = vec![false; total];

    let first = (0..n)
        .max_by(|&a, &b| {
            by_weight(
                (strength[a].0, strength[a].1, a),
                (strength[b].0, strength[b].1, b),
            )
        })
        .unwrap();
    let centre = (0..total)
        .max_by_key(|&p| (d.degree(p), std::cmp::Reverse(p)))
        .unwrap();
    pos[first] = Some(centre);
    taken[centre] = true;
    let mut placed = vec![first];

    for _ in 1..n {
        let pull = |l: usize| {
            let count = placed.iter().map(|&m| w[l][m]).sum::<usize>();
            let early = placed.iter().map(|&m| e[l][m]).sum::<f64>();
            (count, early, strength[l].0, strength[l].1)
        };
        let l = (0..n)
            .filter(|&l| pos[l].is_none())
            .max_by(|&a, &b| {
                let (pa, pb) = (pull(a), pull(b));
                pa.0.cmp(&pb.0)
                    .then(pa.2.cmp(&pb.2))
                    .then(pa.1.total_cmp(&pb.1))
                    .then(pa.3.total_cmp(&pb.3))
                    .then(b.cmp(&a))
            })
            .unwrap();
        let key = |p: usize| {
            let cost: u64 = placed
                .iter()
                .map(|&m| w[l][m] as u64 * u64::from(d.distance(p, pos[m].unwrap())))
                .sum();
            let near = placed
                .iter()
                .map(|&m| d.distance(p, pos[m].unwrap()))
                .min()
                .unwrap_or(0);
            (cost, near, std::cmp::Reverse(d.degree(p)), p)
        };
        let p = (0..total).filter(|&p| !taken[p]).min_by_key(|&p| key(p)).unwrap();
        pos[l] = Some(p);
        taken[p] = true;
        placed.push(l);
    }
    Ok(pos.into_iter().map(Option::unwrap).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{line_device, superconducting_device};
    use crate::gate::{Gate, GateOp};

    fn injective(layout: &[usize], total: usize) -> bool {
        let mut seen = vec![false; total];
        layout
            .iter()
            .all(|&p| p < total && !std::mem::replace(&mut seen[p], true))
    }

    fn fig1a() -> Circuit {
        let mut c = Circuit::new(3);
        for (a, b) in [(2, 1), (1, 0), (2, 0)] {
            c.push(GateOp::two(Gate::Cx, a, b)).unwrap();
        }
        c
    }

    #[test]
    fn trivial_is_identity() {
        assert_eq!(trivial(&Circuit::new(3), &line_device(3)).unwrap(), vec![0, 1, 2]);
        assert!(trivial(&Circuit::new(4), &line_device(3)).is_err());
    }

    #[test]
    fn dense_never_splits_a_line() {
        let mut c = Circuit::new(2);
        c.push(GateOp::two(Gate::Cx, 0, 1)).unwrap();
        let mut l = dense(&c, &line_device(3)).unwrap();
        l.sort();
        assert!(l == vec![0, 1] || l == vec![1, 2], "{l:?}");
    }

    #[test]
    fn dense_region_is_connected() {
        let d = superconducting_device("sc-27q", 27, 9);
        let l = dense(&Circuit::new(9), &d).unwrap();
        assert!(injective(&l, 27));
        for (i, &p) in l.iter().enumerate().skip(1) {
            assert!(l[..i].iter().any(|&q| d.coupled(p, q)));
        }
    }

    /// Minimum cost over all placements, by exhaustive search.
    fn brute_force_min(w: &[Vec<usize>], d: &DeviceModel) -> u64 {
        fn go(w: &[Vec<usize>], d: &DeviceModel, cur: &mut Vec<usize>, best: &mut u64) {
            if cur.len() == w.len() {
                *best = (*best).min(layout_cost(w, cur, d));
                return;
            }
            for p in 0..d.num_qubits() {
                if !cur.contains(&p) {
                    cur.push(p);
                    go(w, d, cur, best);
                    cur.pop();
                }
            }
        }
        let mut best = u64::MAX;
        go(w, d, &mut Vec::new(), &mut best);
        best
    }

    #[test]
    fn interaction_on_fig1_line_is_optimal() {
        let c = fig1a();
        let d = line_device(3);
        let l = interaction(&c, &d).unwrap();
        let w = interaction_weights(&c);
        assert_eq!(layout_cost(&w, &l, &d), brute_force_min(&w, &d));
    }

    #[test]
    fn heaviest_pair_is_coupled() {
        let mut c = Circuit::new(3);
        for _ in 0..3 {
            c.push(GateOp::two(Gate::Cx, 0, 2)).unwrap();
        }
        c.push(GateOp::two(Gate::Cx, 0, 1)).unwrap();
        let d = line_device(3);
        let l = interaction(&c, &d).unwrap();
        assert!(d.coupled(l[0], l[2]));
        let w = interaction_weights(&c);
        assert_eq!(layout_cost(&w, &l, &d), brute_force_min(&w, &d));
    }

    #[test]
    fn layouts_are_injective() {
        let d = superconducting_device("sc-27q", 27, 9);
        let mut c = Circuit::new(12);
        for i in 0..11 {
            c.push(GateOp::two(Gate::Cx, i, (i * 5 + 3) % 12)).ok();
        }
        for l in [trivial(&c, &d), dense(&c, &d), interaction(&c, &d)] {
            assert!(injective(&l.unwrap(), 27));
        }
    }
}
