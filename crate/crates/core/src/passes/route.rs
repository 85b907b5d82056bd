//! SWAP insertion so that every two-qubit gate acts on a coupled pair.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layout::{apply_layout, dense, interaction};
use super::synth::native_swap;
use super::{MappingState, PassError};
use crate::circuit::{Circuit, Measurement};
use crate::device::{DeviceModel, UNREACHABLE};
use crate::gate::{Gate, GateOp};

/// Candidates tried by [`route_stochastic`].
pub const STOCHASTIC_CANDIDATES: usize = 8;
/// Upcoming two-qubit gates the lookahead heuristic looks at.
const EXTENDED_SET: usize = 20;
const EXTENDED_WEIGHT: f64 = 0.5;
const DECAY_STEP: f64 = 0.001;
/// Randomised initial layouts tried by [`map_sabre`] besides the
/// deterministic ones.
const SABRE_RANDOM_TRIALS: usize = 2;

/// Output buffer that tracks where each wire of the input currently lives.
struct Router<'a> {
    d: &'a DeviceModel,
    out: Vec<GateOp>,
    /// Wire -> physical qubit.
    at: Vec<usize>,
    /// Physical qubit -> wire.
    wire: Vec<usize>,
    swaps: usize,
}

impl<'a> Router<'a> {
    fn new(d: &'a DeviceModel) -> Self {
        let n = d.num_qubits();
        Router {
            d,
            out: Vec::new(),
            at: (0..n).collect(),
            wire: (0..n).collect(),
            swaps: 0,
        }
    }

    fn emit(&mut self, op: &GateOp) {
        let at = &self.at;
        self.out.push(op.map_qubits(|w| at[w]));
    }

    /// Emits a SWAP of physical `p` and `q`. If the last gate on either
    /// qubit is a CX on the same pair, the decomposition starts with that
    /// CX so the two can cancel later.
    fn swap(&mut self, p: usize, q: usize) {
        let last = self.out.iter().rev().find(|o| o.acts_on(p) || o.acts_on(q));
        let (a, b) = match last {
            Some(o) if o.gate() == Gate::Cx && o.acts_on(p) && o.acts_on(q) => (o.qubits()[0], o.qubits()[1]),
            _ => (p, q),
        };
        self.out.extend(native_swap(a, b, self.d));
        let (wp, wq) = (self.wire[p], self.wire[q]);
        self.wire.swap(p, q);
        self.at[wp] = q;
        self.at[wq] = p;
        self.swaps += 1;
    }

    /// Whether a SWAP on `p`, `q` would start by cancelling the CX just
    /// before it.
    fn swap_cancels(&self, p: usize, q: usize) -> bool {
        self.d.native_two_qubit_gate() == Gate::Cx
            && matches!(
                self.out.iter().rev().find(|o| o.acts_on(p) || o.acts_on(q)),
                Some(o) if o.gate() == Gate::Cx && o.acts_on(p) && o.acts_on(q)
            )
    }

    fn dist(&self, a: usize, b: usize) -> u32 {
        self.d.distance(self.at[a], self.at[b])
    }

    /// Moves `mover` along a shortest path until it neighbours `other`.
    fn bring_together(
        &mut self,
        other: usize,
        mover: usize,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(), PassError> {
        let d = self.d;
        if self.dist(other, mover) == UNREACHABLE {
            return Err(PassError::Disconnected(self.at[other], self.at[mover]));
        }
        let mut rng = rng;
        while self.dist(other, mover) > 1 {
            let here = self.at[mover];
            let target = self.at[other];
            let want = d.distance(here, target) - 1;
            let steps: Vec<usize> = d
                .neighbors(here)
                .iter()
                .copied()
                .filter(|&n| d.distance(n, target) == want)
                .collect();
            let next = match rng.as_deref_mut() {
                Some(r) => *steps.choose(r).unwrap(),
                None => *steps.iter().min().unwrap(),
            };
            self.swap(next, here);
        }
        Ok(())
    }

    fn finish(self, c: &Circuit, ms: &MappingState) -> (Circuit, MappingState, usize) {
        let measurements = c
            .measurements()
            .iter()
            .map(|m| Measurement {
                qubit: self.at[m.qubit],
                clbit: m.clbit,
            })
            .collect();
        let out = Circuit::from_parts_unchecked(self.d.num_qubits(), self.out, measurements);
        let mut ms = ms.clone();
        ms.compose_routing(&self.at);
        (out, ms, self.swaps)
    }
}

fn precheck(c: &Circuit, d: &DeviceModel, ms: &MappingState) -> Result<Circuit, PassError> {
    if ms.layout.is_none() {
        return Err(PassError::NoLayout);
    }
    super::check_fits(c, d)?;
    if c.num_qubits() == d.num_qubits() {
        Ok(c.clone())
    } else {
        let id: Vec<usize> = (0..c.num_qubits()).collect();
        Ok(c.relabel(&id, d.num_qubits()))
    }
}

fn greedy(
    c: &Circuit,
    d: &DeviceModel,
    ms: &MappingState,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<(Circuit, MappingState, usize), PassError> {
    let mut r = Router::new(d);
    for op in c.ops() {
        if let [a, b] = op.qubits() {
            let (mut keep, mut mover) = (*a, *b);
            if let Some(rng) = rng.as_deref_mut() {
                if rng.gen_bool(0.5) {
                    std::mem::swap(&mut keep, &mut mover);
                }
            }
            r.bring_together(keep, mover, rng.as_deref_mut())?;
        }
        r.emit(op);
    }
    Ok(r.finish(c, ms))
}

/// Moves the second qubit of each uncoupled gate along a shortest path
/// towards the first.
pub fn route_basic(
    c: &Circuit,
    d: &DeviceModel,
    ms: &MappingState,
) -> Result<(Circuit, MappingState), PassError> {
    let c = precheck(c, d, ms)?;
    let (c, ms, _) = greedy(&c, d, ms, None)?;
    Ok((c, ms))
}

/// Best of `k` candidates: the basic routing plus `k - 1` seeded random
/// variants that pick which qubit moves and which shortest path it takes.
pub fn route_stochastic(
    c: &Circuit,
    d: &DeviceModel,
    ms: &MappingState,
    k: usize,
) -> Result<(Circuit, MappingState), PassError> {
    let c = precheck(c, d, ms)?;
    let mut best = greedy(&c, d, ms, None)?;
    for i in 1..k {
        let mut rng = ChaCha8Rng::seed_from_u64(ms.seed.wrapping_add(i as u64));
        let cand = greedy(&c, d, ms, Some(&mut rng))?;
        if cand.2 < best.2 {
            best = cand;
        }
    }
    Ok((best.0, best.1))
}

fn lookahead(
    c: &Circuit,
    d: &DeviceModel,
    ms: &MappingState,
) -> Result<(Circuit, MappingState, usize), PassError> {
    let ops = c.ops();
    let n = c.num_qubits();
    // Dependency DAG over wires.
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); ops.len()];
    let mut pending = vec![0usize; ops.len()];
    let mut last: Vec<Option<usize>> = vec![None; n];
    for (i, op) in ops.iter().enumerate() {
        for &q in op.qubits() {
            if let Some(p) = last[q] {
                if !succ[p].contains(&i) {
                    succ[p].push(i);
                    pending[i] += 1;
                }
            }
            last[q] = Some(i);
        }
    }
    let mut front: Vec<usize> = (0..ops.len()).filter(|&i| pending[i] == 0).collect();
    let mut r = Router::new(d);
    let mut decay = vec![1.0f64; d.num_qubits()];
    let mut stalled = 0usize;
    let stall_limit = 2 * d.num_qubits() + 10;

    loop {
        // Run everything that can run.
        let mut progressed = true;
        while progressed {
            progressed = false;
            let mut i = 0;
            while i < front.len() {
                let g = front[i];
                let ready = match ops[g].qubits() {
                    [a, b] => r.dist(*a, *b) == 1,
                    _ => true,
                };
                if ready {
                    r.emit(&ops[g]);
                    front.swap_remove(i);
                    for &s in &succ[g] {
                        pending[s] -= 1;
                        if pending[s] == 0 {
                            front.push(s);
                        }
                    }
                    progressed = true;
                } else {
                    i += 1;
                }
            }
            if progressed {
                front.sort_unstable();
                decay.iter_mut().for_each(|x| *x = 1.0);
                stalled = 0;
            }
        }
        if front.is_empty() {
            break;
        }
        for &g in &front {
            if let [a, b] = ops[g].qubits() {
                if r.dist(*a, *b) == UNREACHABLE {
                    return Err(PassError::Disconnected(r.at[*a], r.at[*b]));
                }
            }
        }
        if stalled >= stall_limit {
            let g = front[0];
            let (a, b) = (ops[g].qubits()[0], ops[g].qubits()[1]);
            r.bring_together(a, b, None)?;
            continue;
        }

        // Upcoming two-qubit gates beyond the front layer.
        let mut extended = Vec::new();
        let mut seen = vec![false; ops.len()];
        let mut queue: std::collections::VecDeque<usize> = front.iter().copied().collect();
        while let Some(g) = queue.pop_front() {
            for &s in &succ[g] {
                if !std::mem::replace(&mut seen[s], true) {
                    if ops[s].is_two_qubit() {
                        extended.push(s);
                    }
                    if extended.len() >= EXTENDED_SET {
                        break;
                    }
                    queue.push_back(s);
                }
            }
            if extended.len() >= EXTENDED_SET {
                break;
            }
        }

        let mut candidates = Vec::new();
        for &g in &front {
            for &w in ops[g].qubits() {
                let p = r.at[w];
                for &q in d.neighbors(p) {
                    candidates.push((p.min(q), p.max(q)));
                }
            }
        }
        candidates.sort_unstable();
        candidates.dedup();

        let score = |(x, y): (usize, usize)| {
            let moved = |p: usize| {
                if p == x {
                    y
                } else if p == y {
                    x
                } else {
                    p
                }
            };
            let sum = |set: &[usize]| -> f64 {
                set.iter()
                    .map(|&g| {
                        let q = ops[g].qubits();
                        f64::from(d.distance(moved(r.at[q[0]]), moved(r.at[q[1]])))
                    })
                    .sum()
            };
            let mut h = sum(&front) / front.len() as f64;
            if !extended.is_empty() {
                h += EXTENDED_WEIGHT * sum(&extended) / extended.len() as f64;
            }
            h * decay[x].max(decay[y])
        };
        // Lowest score; among equal scores prefer a SWAP that cancels
        // against the preceding CX.
        let mut best = candidates[0];
        let mut best_key = (score(best), r.swap_cancels(best.0, best.1));
        for &cand in &candidates[1..] {
            let key = (score(cand), r.swap_cancels(cand.0, cand.1));
            let tied = (key.0 - best_key.0).abs() <= 1e-12;
            if key.0 < best_key.0 - 1e-12 || (tied && key.1 && !best_key.1) {
                best = cand;
                best_key = key;
            }
        }
        r.swap(best.0, best.1);
        decay[best.0] += DECAY_STEP;
        decay[best.1] += DECAY_STEP;
        stalled += 1;
    }
    Ok(r.finish(c, ms))
}

/// Front-layer routing: among SWAPs touching the current front layer, take
/// the one minimising mean distance of front gates plus a discounted mean
/// over the next gates.
pub fn route_lookahead(
    c: &Circuit,
    d: &DeviceModel,
    ms: &MappingState,
) -> Result<(Circuit, MappingState), PassError> {
    let c = precheck(c, d, ms)?;
    let (c, ms, _) = lookahead(&c, d, ms)?;
    Ok((c, ms))
}

fn reversed(c: &Circuit) -> Circuit {
    let ops: Vec<GateOp> = c.ops().iter().rev().copied().collect();
    Circuit::from_parts_unchecked(c.num_qubits(), ops, Vec::new())
}

/// Layout search plus routing in one action. Several initial layouts are
/// refined by a forward and a backward routing pass; the one that needs
/// the fewest SWAPs wins.
pub fn map_sabre(
    c: &Circuit,
    d: &DeviceModel,
    ms: &MappingState,
) -> Result<(Circuit, MappingState), PassError> {
    if ms.layout.is_some() {
        return Err(PassError::LayoutAlreadySet);
    }
    super::check_fits(c, d)?;
    let mut starts = vec![interaction(c, d)?, dense(c, d)?];
    let region = starts[1].clone();
    let mut rng = ChaCha8Rng::seed_from_u64(ms.seed);
    for _ in 0..SABRE_RANDOM_TRIALS {
        let mut l = region.clone();
        l.shuffle(&mut rng);
        starts.push(l);
    }
    let fresh = MappingState::with_seed(ms.seed);
    let mut best: Option<(Circuit, MappingState, usize)> = None;
    let mut consider = |cand: (Circuit, MappingState, usize)| {
        if best.as_ref().is_none_or(|b| cand.2 < b.2) {
            best = Some(cand);
        }
    };
    for start in starts {
        let (placed, ms0) = apply_layout(c, d, &fresh, start.clone())?;
        let forward = lookahead(&placed, d, &ms0)?;
        let l1 = forward.1.final_positions(c.num_qubits());
        consider(forward);
        let (back_placed, msb) = apply_layout(&reversed(c), d, &fresh, l1)?;
        let (_, msb, _) = lookahead(&back_placed, d, &msb)?;
        let l2 = msb.final_positions(c.num_qubits());
        let (placed, ms2) = apply_layout(c, d, &fresh, l2)?;
        consider(lookahead(&placed, d, &ms2)?);
    }
    let (c, ms, _) = best.expect("at least one trial");
    Ok((c, ms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{line_device, superconducting_device};
    use crate::passes::layout::trivial;
    use crate::passes::respects_topology;
    use crate::sim::equivalent_up_to_layout;

    fn cx(a: usize, b: usize) -> GateOp {
        GateOp::two(Gate::Cx, a, b)
    }

    fn placed_trivially(c: &Circuit, d: &DeviceModel) -> (Circuit, MappingState) {
        apply_layout(c, d, &MappingState::with_seed(3), trivial(c, d).unwrap()).unwrap()
    }

    fn random_circuit(seed: u64, n: usize, len: usize) -> Circuit {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = Circuit::new(n);
        for _ in 0..len {
            let a = rng.gen_range(0..n);
            let b = (a + rng.gen_range(1..n)) % n;
            if rng.gen_bool(0.6) {
                c.push(cx(a, b)).unwrap();
            } else {
                c.push(GateOp::rot(Gate::Ry, rng.gen_range(-3.0..3.0), a))
                    .unwrap();
            }
        }
        c.measure_all();
        c
    }

    #[test]
    fn fig1c_gets_one_swap_before_the_uncoupled_gate() {
        let mut c = Circuit::new(3);
        for (a, b) in [(2, 1), (1, 0), (2, 0)] {
            c.push(cx(a, b)).unwrap();
        }
        let d = line_device(3);
        let (p, ms) = placed_trivially(&c, &d);
        let (out, ms) = route_basic(&p, &d, &ms).unwrap();
        let expect = [cx(2, 1), cx(1, 0), cx(1, 0), cx(0, 1), cx(1, 0), cx(2, 1)];
        assert_eq!(out.ops(), &expect);
        assert_eq!(ms.final_positions(3), vec![1, 0, 2]);
        assert!(equivalent_up_to_layout(&c, &out, &ms.final_positions(3)).unwrap());
    }

    #[test]
    fn coupled_circuit_is_untouched() {
        let mut c = Circuit::new(3);
        c.push(cx(0, 1)).unwrap();
        c.push(cx(2, 1)).unwrap();
        let d = line_device(3);
        let (p, ms) = placed_trivially(&c, &d);
        for out in [
            route_basic(&p, &d, &ms).unwrap(),
            route_stochastic(&p, &d, &ms, 8).unwrap(),
            route_lookahead(&p, &d, &ms).unwrap(),
        ] {
            assert_eq!(out.0, p);
        }
    }

    #[test]
    fn routing_needs_a_layout() {
        let c = Circuit::new(2);
        let d = line_device(3);
        assert_eq!(
            route_basic(&c, &d, &MappingState::default()),
            Err(PassError::NoLayout)
        );
    }

    #[test]
    fn routers_preserve_semantics_and_respect_topology() {
        let d = superconducting_device("sc-8q", 8, 4);
        for seed in 0..30 {
            let c = random_circuit(seed, 2 + (seed as usize % 5), 14);
            let (p, ms) = placed_trivially(&c, &d);
            let outs = [
                route_basic(&p, &d, &ms).unwrap(),
                route_stochastic(&p, &d, &ms, 8).unwrap(),
                route_lookahead(&p, &d, &ms).unwrap(),
                map_sabre(&c, &d, &MappingState::with_seed(seed)).unwrap(),
            ];
            for (out, ms) in outs {
                assert!(respects_topology(&out, &d));
                let pos = ms.final_positions(c.num_qubits());
                assert!(equivalent_up_to_layout(&c, &out, &pos).unwrap(), "seed {seed}");
            }
        }
    }

    #[test]
    fn stochastic_is_deterministic_and_no_worse_than_basic() {
        let d = superconducting_device("sc-27q", 27, 9);
        let c = random_circuit(11, 9, 40);
        let (p, ms) = placed_trivially(&c, &d);
        let a = route_stochastic(&p, &d, &ms, 8).unwrap();
        assert_eq!(a, route_stochastic(&p, &d, &ms, 8).unwrap());
        let basic = route_basic(&p, &d, &ms).unwrap();
        assert!(a.0.two_qubit_count() <= basic.0.two_qubit_count());
    }
}
