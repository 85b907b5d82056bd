//! Deterministic benchmark circuit families.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit::Circuit;
use crate::gate::{Gate, GateOp};

pub const MIN_QUBITS: usize = 2;
pub const MAX_QUBITS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Ghz,
    Qft,
    Wstate,
    RandomCliffordT,
    EntanglingAnsatz,
    QaoaLike,
    AmplitudeEstimationLike,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Ghz,
        Family::Qft,
        Family::Wstate,
        Family::RandomCliffordT,
        Family::EntanglingAnsatz,
        Family::QaoaLike,
        Family::AmplitudeEstimationLike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Ghz => "ghz",
            Family::Qft => "qft",
            Family::Wstate => "wstate",
            Family::RandomCliffordT => "random-clifford-t",
            Family::EntanglingAnsatz => "entangling-ansatz",
            Family::QaoaLike => "qaoa-like",
            Family::AmplitudeEstimationLike => "amplitude-estimation-like",
        }
    }

    /// Every family but GHZ, which is held out of training.
    pub fn training() -> Vec<Family> {
        Family::ALL.into_iter().filter(|f| *f != Family::Ghz).collect()
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| CorpusError::UnknownFamily(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorpusError {
    #[error("unknown circuit family `{0}`")]
    UnknownFamily(String),
    #[error("qubit range {0}..={1} is not within 2..=32")]
    BadRange(usize, usize),
    #[error("a training corpus must not contain ghz circuits")]
    GhzInTraining,
    #[error("size step must be positive")]
    BadStep,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub families: Vec<Family>,
    pub min_qubits: usize,
    pub max_qubits: usize,
    /// Sizes are `min_qubits, min_qubits + step, …` up to `max_qubits`.
    pub step: usize,
    pub instances: usize,
    pub seed: u64,
    /// Training corpora may not contain GHZ.
    pub training: bool,
}

impl CorpusSpec {
    pub fn training(min_qubits: usize, max_qubits: usize, instances: usize, seed: u64) -> Self {
        CorpusSpec {
            families: Family::training(),
            min_qubits,
            max_qubits,
            step: 1,
            instances,
            seed,
            training: true,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.min_qubits < MIN_QUBITS || self.max_qubits > MAX_QUBITS || self.min_qubits > self.max_qubits {
            return Err(CorpusError::BadRange(self.min_qubits, self.max_qubits));
        }
        if self.step == 0 {
            return Err(CorpusError::BadStep);
        }
        if self.training && self.families.contains(&Family::Ghz) {
            return Err(CorpusError::GhzInTraining);
        }
        Ok(())
    }

    pub fn sizes(&self) -> impl Iterator<Item = usize> {
        (self.min_qubits..=self.max_qubits).step_by(self.step.max(1))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusEntry {
    /// `<family>-<n>q-<instance>`.
    pub name: String,
    pub family: Family,
    pub circuit: Circuit,
}

fn instance_rng(seed: u64, family: Family, n: usize, i: usize) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(family.name().as_bytes());
    h.update((n as u64).to_le_bytes());
    h.update((i as u64).to_le_bytes());
    let bytes: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(bytes)
}

/// Generates the corpus: for each family, size and instance, one circuit.
pub fn generate(spec: &CorpusSpec) -> Result<Vec<CorpusEntry>, CorpusError> {
    spec.validate()?;
    let mut out = Vec::new();
    for &family in &spec.families {
        for n in spec.sizes() {
            for i in 0..spec.instances {
                let mut rng = instance_rng(spec.seed, family, n, i);
                out.push(CorpusEntry {
                    name: format!("{family}-{n}q-{i}"),
                    family,
                    circuit: build(family, n, &mut rng),
                });
            }
        }
    }
    Ok(out)
}

/// One circuit of `family` on `n` qubits. Deterministic families ignore
/// `rng`.
pub fn build(family: Family, n: usize, rng: &mut ChaCha8Rng) -> Circuit {
    let mut b = Builder::new(n);
    match family {
        Family::Ghz => ghz(&mut b),
        Family::Qft => qft(&mut b),
        Family::Wstate => wstate(&mut b),
        Family::RandomCliffordT => random_clifford_t(&mut b, rng),
        Family::EntanglingAnsatz => entangling_ansatz(&mut b, rng),
        Family::QaoaLike => qaoa_like(&mut b, rng),
        Family::AmplitudeEstimationLike => {
            amplitude_estimation_like(&mut b, rng);
            return b.finish_measuring(0..n - 1);
        }
    }
    b.finish_measuring(0..n)
}

struct Builder {
    c: Circuit,
}

impl Builder {
    fn new(n: usize) -> Self {
        Builder { c: Circuit::new(n) }
    }

    fn n(&self) -> usize {
        self.c.num_qubits()
    }

    fn g(&mut self, g: Gate, q: usize) {
        self.c.push(GateOp::one(g, q)).expect("generator stays in range");
    }

    fn r(&mut self, g: Gate, t: f64, q: usize) {
        self.c
            .push(GateOp::rot(g, t, q))
            .expect("generator stays in range");
    }

    fn cx(&mut self, a: usize, b: usize) {
        self.c
            .push(GateOp::two(Gate::Cx, a, b))
            .expect("generator stays in range");
    }

    fn two(&mut self, g: Gate, a: usize, b: usize) {
        self.c
            .push(GateOp::two(g, a, b))
            .expect("generator stays in range");
    }

    /// diag(1, 1, 1, e^{i t}) up to global phase.
    fn cphase(&mut self, t: f64, a: usize, b: usize) {
        self.r(Gate::Rz, t / 2.0, a);
        self.cx(a, b);
        self.r(Gate::Rz, -t / 2.0, b);
        self.cx(a, b);
        self.r(Gate::Rz, t / 2.0, b);
    }

    /// Rotation ry(t) on `b` conditioned on `a`.
    fn cry(&mut self, t: f64, a: usize, b: usize) {
        self.r(Gate::Ry, t / 2.0, b);
        self.cx(a, b);
        self.r(Gate::Ry, -t / 2.0, b);
        self.cx(a, b);
    }

    /// exp(-i t/2 Z⊗Z).
    fn rzz(&mut self, t: f64, a: usize, b: usize) {
        self.cx(a, b);
        self.r(Gate::Rz, t, b);
        self.cx(a, b);
    }

    fn finish_measuring(mut self, qubits: std::ops::Range<usize>) -> Circuit {
        for (k, q) in qubits.enumerate() {
            self.c.measure(q, k).expect("each qubit measured once");
        }
        self.c
    }
}

fn ghz(b: &mut Builder) {
    b.g(Gate::H, 0);
    for i in 1..b.n() {
        b.cx(i - 1, i);
    }
}

fn qft(b: &mut Builder) {
    let n = b.n();
    for i in 0..n {
        b.g(Gate::H, i);
        for j in i + 1..n {
            b.cphase(PI / f64::from(1u32 << (j - i).min(30)), j, i);
        }
    }
    for i in 0..n / 2 {
        b.two(Gate::Swap, i, n - 1 - i);
    }
}

/// Equal superposition of the `n` single-excitation states, built by
/// handing amplitude down a chain.
fn wstate(b: &mut Builder) {
    let n = b.n();
    b.g(Gate::X, 0);
    for k in 0..n - 1 {
        let keep = 1.0 / ((n - k) as f64).sqrt();
        b.cry(2.0 * keep.acos(), k, k + 1);
        b.cx(k + 1, k);
    }
}

fn random_clifford_t(b: &mut Builder, rng: &mut ChaCha8Rng) {
    const ONE: [Gate; 7] = [Gate::H, Gate::S, Gate::Sdg, Gate::T, Gate::Tdg, Gate::X, Gate::Z];
    let n = b.n();
    // Entangling density varies per instance to spread the features.
    let p_cx = [0.05, 0.2, 0.45, 0.7][rng.gen_range(0..4)];
    for _ in 0..6 * n {
        let a = rng.gen_range(0..n);
        if rng.gen_bool(p_cx) {
            let t = (a + rng.gen_range(1..n)) % n;
            b.cx(a, t);
        } else {
            b.g(ONE[rng.gen_range(0..ONE.len())], a);
        }
    }
}

fn entangling_ansatz(b: &mut Builder, rng: &mut ChaCha8Rng) {
    let n = b.n();
    let reps = rng.gen_range(1..=3);
    let full = rng.gen_bool(0.3);
    let angle = |rng: &mut ChaCha8Rng| rng.gen_range(-PI..PI);
    for _ in 0..reps {
        for q in 0..n {
            b.r(Gate::Ry, angle(rng), q);
            b.r(Gate::Rz, angle(rng), q);
        }
        if full {
            for i in 0..n {
                for j in i + 1..n {
                    b.two(Gate::Cz, i, j);
                }
            }
        } else {
            for i in 0..n - 1 {
                b.cx(i, i + 1);
            }
        }
    }
    for q in 0..n {
        b.r(Gate::Ry, angle(rng), q);
    }
}

fn qaoa_like(b: &mut Builder, rng: &mut ChaCha8Rng) {
    let n = b.n();
    let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).filter(|(a, c)| a != c).collect();
    edges.dedup_by(|x, y| (x.0.min(x.1), x.0.max(x.1)) == (y.0.min(y.1), y.0.max(y.1)));
    for _ in 0..n / 2 {
        let a = rng.gen_range(0..n);
        let c = (a + rng.gen_range(1..n)) % n;
        let e = (a.min(c), a.max(c));
        if !edges.iter().any(|&(x, y)| (x.min(y), x.max(y)) == e) {
            edges.push(e);
        }
    }
    let layers = rng.gen_range(1..=2);
    for q in 0..n {
        b.g(Gate::H, q);
    }
    for _ in 0..layers {
        let gamma = rng.gen_range(0.1..PI);
        let beta = rng.gen_range(0.1..PI);
        for &(x, y) in &edges {
            b.rzz(gamma, x, y);
        }
        for q in 0..n {
            b.r(Gate::Rx, 2.0 * beta, q);
        }
    }
}

/// Counting register on qubits `0..n-1`, state qubit `n-1`: controlled
/// powers of a rotation followed by an inverse QFT on the counting qubits.
fn amplitude_estimation_like(b: &mut Builder, rng: &mut ChaCha8Rng) {
    let n = b.n();
    let m = n - 1;
    let theta = rng.gen_range(0.2..PI - 0.2);
    let target = n - 1;
    b.r(Gate::Ry, theta, target);
    for k in 0..m {
        b.g(Gate::H, k);
    }
    for k in 0..m {
        let power = f64::from(1u32 << k.min(30));
        b.cry(2.0 * theta * power, k, target);
    }
    for i in (0..m).rev() {
        for j in (i + 1..m).rev() {
            b.cphase(-PI / f64::from(1u32 << (j - i).min(30)), j, i);
        }
        b.g(Gate::H, i);
    }
}
