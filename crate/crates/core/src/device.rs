//! Target devices: technology, coupling graph, native gates and calibration.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::gate::{Gate, GateOp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Technology {
    Superconducting,
    IonTrap,
}

/// Calibrated success probabilities, dense per qubit and per ordered pair.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationTable {
    single_qubit: Vec<f64>,
    readout: Vec<f64>,
    /// `n * n` symmetric; zero where qubits are not coupled.
    two_qubit: Vec<f64>,
    n: usize,
}

impl CalibrationTable {
    pub fn single_qubit(&self, q: usize) -> f64 {
        self.single_qubit[q]
    }

    pub fn readout(&self, q: usize) -> f64 {
        self.readout[q]
    }

    pub fn two_qubit(&self, a: usize, b: usize) -> f64 {
        self.two_qubit[a * self.n + b]
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DeviceError {
    #[error("device file: {0}")]
    Io(String),
    #[error("device file is not valid: {0}")]
    Schema(String),
    #[error("device `{id}` failed validation:\n  - {}", .problems.join("\n  - "))]
    Invalid { id: String, problems: Vec<String> },
    #[error("gate {0} is not native on device `{1}`")]
    NonNative(Gate, String),
    #[error("qubits {0} and {1} are not coupled on device `{2}`")]
    Uncoupled(usize, usize, String),
    #[error("qubit {0} is out of range on device `{1}`")]
    QubitOutOfRange(usize, String),
}

/// A validated device. Distances over the coupling graph are precomputed.
#[derive(Clone, Debug)]
pub struct DeviceModel {
    id: String,
    technology: Technology,
    num_qubits: usize,
    coupling: Vec<(usize, usize)>,
    native_gates: BTreeSet<Gate>,
    calibration: CalibrationTable,
    /// Treat `rz` as a frame change with fidelity 1.
    rz_error_free: bool,
    adjacency: Vec<Vec<usize>>,
    distance: Vec<u32>,
}

impl PartialEq for DeviceModel {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.technology == other.technology
            && self.num_qubits == other.num_qubits
            && self.coupling == other.coupling
            && self.native_gates == other.native_gates
            && self.calibration == other.calibration
            && self.rz_error_free == other.rz_error_free
    }
}

impl fmt::Display for DeviceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} qubits)", self.id, self.num_qubits)
    }
}

pub const UNREACHABLE: u32 = u32::MAX;

impl DeviceModel {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn technology(&self) -> Technology {
        self.technology
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// Undirected coupling pairs, each `(a, b)` with `a < b`, sorted.
    pub fn coupling(&self) -> &[(usize, usize)] {
        &self.coupling
    }

    pub fn native_gates(&self) -> &BTreeSet<Gate> {
        &self.native_gates
    }

    pub fn is_native(&self, g: Gate) -> bool {
        self.native_gates.contains(&g)
    }

    pub fn calibration(&self) -> &CalibrationTable {
        &self.calibration
    }

    pub fn rz_error_free(&self) -> bool {
        self.rz_error_free
    }

    pub fn with_rz_error_free(mut self, yes: bool) -> Self {
        self.rz_error_free = yes;
        self
    }

    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.adjacency[q]
    }

    pub fn degree(&self, q: usize) -> usize {
        self.adjacency[q].len()
    }

    pub fn coupled(&self, a: usize, b: usize) -> bool {
        a != b && self.distance(a, b) == 1
    }

    /// Hop count between two qubits, [`UNREACHABLE`] if disconnected.
    pub fn distance(&self, a: usize, b: usize) -> u32 {
        self.distance[a * self.num_qubits + b]
    }

    pub fn is_complete(&self) -> bool {
        self.coupling.len() == self.num_qubits * (self.num_qubits.saturating_sub(1)) / 2
    }

    /// Native two-qubit gate of this device (the first in gate order).
    pub fn native_two_qubit_gate(&self) -> Gate {
        self.native_gates
            .iter()
            .copied()
            .find(|g| g.num_qubits() == 2)
            .expect("validated devices have a two-qubit gate")
    }

    /// Calibrated fidelity of `op` on the physical qubits it names.
    pub fn gate_fidelity(&self, op: &GateOp) -> Result<f64, DeviceError> {
        if !self.is_native(op.gate()) {
            return Err(DeviceError::NonNative(op.gate(), self.id.clone()));
        }
        if let Some(&q) = op.qubits().iter().find(|&&q| q >= self.num_qubits) {
            return Err(DeviceError::QubitOutOfRange(q, self.id.clone()));
        }
        match op.qubits() {
            [_] if op.gate() == Gate::Rz && self.rz_error_free => Ok(1.0),
            [q] => Ok(self.calibration.single_qubit(*q)),
            [a, b] => {
                if !self.coupled(*a, *b) {
                    return Err(DeviceError::Uncoupled(*a, *b, self.id.clone()));
                }
                Ok(self.calibration.two_qubit(*a, *b))
            }
            _ => unreachable!(),
        }
    }

    pub fn readout_fidelity(&self, q: usize) -> Result<f64, DeviceError> {
        if q >= self.num_qubits {
            return Err(DeviceError::QubitOutOfRange(q, self.id.clone()));
        }
        Ok(self.calibration.readout(q))
    }

    /// Hex SHA-256 of the serialized device; changes whenever anything a
    /// compiled result depends on changes.
    pub fn content_hash(&self) -> String {
        let text = serde_json::to_string(&self.to_file()).expect("device serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn to_file(&self) -> DeviceFile {
        let n = self.num_qubits;
        let coupling = if self.technology == Technology::IonTrap && self.is_complete() {
            CouplingSpec::Complete("complete".into())
        } else {
            CouplingSpec::Pairs(self.coupling.iter().map(|&(a, b)| [a, b]).collect())
        };
        DeviceFile {
            id: self.id.clone(),
            technology: self.technology,
            num_qubits: n,
            coupling,
            native_gates: self.native_gates.iter().map(|g| g.name().to_string()).collect(),
            calibration: CalibrationSpec {
                single_qubit: PerQubit::List(self.calibration.single_qubit.clone()),
                two_qubit: PerPair::List(
                    self.coupling
                        .iter()
                        .map(|&(a, b)| (a, b, self.calibration.two_qubit(a, b)))
                        .collect(),
                ),
                readout: PerQubit::List(self.calibration.readout.clone()),
            },
            rz_error_free: self.rz_error_free,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("device serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DeviceError> {
        let file: DeviceFile = serde_json::from_str(text).map_err(|e| DeviceError::Schema(e.to_string()))?;
        file.into_model()
    }
}

/// Reads and validates one device file.
pub fn load_device(path: impl AsRef<Path>) -> Result<DeviceModel, DeviceError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| DeviceError::Io(format!("{}: {e}", path.as_ref().display())))?;
    DeviceModel::from_json(&text)
}

/// On-disk device schema.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceFile {
    pub id: String,
    pub technology: Technology,
    pub num_qubits: usize,
    pub coupling: CouplingSpec,
    pub native_gates: Vec<String>,
    pub calibration: CalibrationSpec,
    #[serde(default)]
    pub rz_error_free: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CouplingSpec {
    /// The literal string `"complete"`.
    Complete(String),
    Pairs(Vec<[usize; 2]>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSpec {
    pub single_qubit: PerQubit,
    pub two_qubit: PerPair,
    pub readout: PerQubit,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerQubit {
    Uniform(f64),
    List(Vec<f64>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerPair {
    Uniform(f64),
    List(Vec<(usize, usize, f64)>),
}

fn probability_ok(p: f64) -> bool {
    p > 0.0 && p <= 1.0
}

impl DeviceFile {
    /// Validates the file, collecting every problem found.
    pub fn into_model(self) -> Result<DeviceModel, DeviceError> {
        let n = self.num_qubits;
        let mut problems = Vec::new();
        if n == 0 {
            problems.push("num_qubits must be positive".to_string());
        }

        let mut native = BTreeSet::new();
        for name in &self.native_gates {
            match name.parse::<Gate>() {
                Ok(g) => {
                    native.insert(g);
                }
                Err(e) => problems.push(e.to_string()),
            }
        }
        if !native.iter().any(|g| g.num_qubits() == 2) {
            problems.push("native gates include no two-qubit gate".into());
        }
        if !is_universal(&native) {
            problems.push("native gates are not a supported universal set".into());
        }

        let complete =
            || -> Vec<(usize, usize)> { (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect() };
        let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
        match &self.coupling {
            CouplingSpec::Complete(s) if s == "complete" => pairs.extend(complete()),
            CouplingSpec::Complete(s) => {
                problems.push(format!("coupling must be a pair list or \"complete\", got {s:?}"))
            }
            CouplingSpec::Pairs(list) => {
                for &[a, b] in list {
                    if a >= n || b >= n {
                        problems.push(format!("coupling ({a},{b}) references a qubit >= {n}"));
                    } else if a == b {
                        problems.push(format!("coupling ({a},{b}) is a self loop"));
                    } else {
                        pairs.insert((a.min(b), a.max(b)));
                    }
                }
            }
        }
        // Ion traps are all-to-all regardless of what the file lists.
        if self.technology == Technology::IonTrap {
            pairs.extend(complete());
        }

        let single = match &self.calibration.single_qubit {
            PerQubit::Uniform(p) => vec![*p; n],
            PerQubit::List(v) => {
                if v.len() != n {
                    problems.push(format!(
                        "single_qubit calibration has {} entries, expected {n}",
                        v.len()
                    ));
                }
                v.clone()
            }
        };
        let readout = match &self.calibration.readout {
            PerQubit::Uniform(p) => vec![*p; n],
            PerQubit::List(v) => {
                if v.len() != n {
                    problems.push(format!(
                        "readout calibration has {} entries, expected {n}",
                        v.len()
                    ));
                }
                v.clone()
            }
        };
        for (what, v) in [("single_qubit", &single), ("readout", &readout)] {
            for (q, p) in v.iter().enumerate() {
                if !probability_ok(*p) {
                    problems.push(format!("{what} fidelity {p} of qubit {q} is outside (0, 1]"));
                }
            }
        }
        let mut two = vec![0.0; n * n];
        match &self.calibration.two_qubit {
            PerPair::Uniform(p) => {
                if !probability_ok(*p) {
                    problems.push(format!("two_qubit fidelity {p} is outside (0, 1]"));
                }
                for &(a, b) in &pairs {
                    two[a * n + b] = *p;
                    two[b * n + a] = *p;
                }
            }
            PerPair::List(list) => {
                for &(a, b, p) in list {
                    if a >= n || b >= n || a == b {
                        problems.push(format!("two_qubit entry ({a},{b}) is not a valid pair"));
                        continue;
                    }
                    if !pairs.contains(&(a.min(b), a.max(b))) {
                        problems.push(format!("two_qubit entry ({a},{b}) is not a coupling pair"));
                        continue;
                    }
                    if !probability_ok(p) {
                        problems.push(format!("two_qubit fidelity {p} of ({a},{b}) is outside (0, 1]"));
                    }
                    two[a * n + b] = p;
                    two[b * n + a] = p;
                }
                for &(a, b) in &pairs {
                    if two[a * n + b] == 0.0 {
                        problems.push(format!("missing two_qubit calibration for pair ({a},{b})"));
                    }
                }
            }
        }

        if !problems.is_empty() {
            return Err(DeviceError::Invalid {
                id: self.id,
                problems,
            });
        }
        let coupling: Vec<(usize, usize)> = pairs.into_iter().collect();
        Ok(DeviceModel::assemble(
            self.id,
            self.technology,
            n,
            coupling,
            native,
            CalibrationTable {
                single_qubit: single,
                readout,
                two_qubit: two,
                n,
            },
            self.rz_error_free,
        ))
    }
}

/// Native sets for which the synthesis tables have a complete rule chain.
pub fn is_universal(native: &BTreeSet<Gate>) -> bool {
    let has = |g| native.contains(&g);
    let sc = has(Gate::Rz) && has(Gate::Sx) && (has(Gate::Cx) || has(Gate::Cz));
    let ion = has(Gate::Rz) && has(Gate::Rx) && has(Gate::Rxx);
    sc || ion
}

impl DeviceModel {
    fn assemble(
        id: String,
        technology: Technology,
        n: usize,
        coupling: Vec<(usize, usize)>,
        native_gates: BTreeSet<Gate>,
        calibration: CalibrationTable,
        rz_error_free: bool,
    ) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &coupling {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        let mut distance = vec![UNREACHABLE; n * n];
        let mut queue = VecDeque::new();
        for s in 0..n {
            distance[s * n + s] = 0;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                let du = distance[s * n + u];
                for &v in &adjacency[u] {
                    if distance[s * n + v] == UNREACHABLE {
                        distance[s * n + v] = du + 1;
                        queue.push_back(v);
                    }
                }
            }
        }
        DeviceModel {
            id,
            technology,
            num_qubits: n,
            coupling,
            native_gates,
            calibration,
            rz_error_free,
            adjacency,
            distance,
        }
    }

    /// Rebuilds the device with one calibration entry changed.
    pub fn with_single_qubit_fidelity(&self, q: usize, p: f64) -> Self {
        let mut cal = self.calibration.clone();
        cal.single_qubit[q] = p;
        DeviceModel::assemble(
            self.id.clone(),
            self.technology,
            self.num_qubits,
            self.coupling.clone(),
            self.native_gates.clone(),
            cal,
            self.rz_error_free,
        )
    }
}

/// Device-level exemplar calibration (1Q, 2Q, readout).
pub const EXEMPLAR_1Q: f64 = 0.997;
pub const EXEMPLAR_2Q: f64 = 0.982;
pub const EXEMPLAR_RO: f64 = 0.975;
/// Per-qubit fidelities are drawn from `[exemplar - JITTER, exemplar]`.
pub const CALIBRATION_JITTER: f64 = 0.005;

pub fn superconducting_native() -> BTreeSet<Gate> {
    [Gate::Rz, Gate::Sx, Gate::X, Gate::Cx].into_iter().collect()
}

pub fn ion_trap_native() -> BTreeSet<Gate> {
    [Gate::Rx, Gate::Rz, Gate::Rxx].into_iter().collect()
}

/// Serpentine rows of width `width`: consecutive indices are always
/// coupled, and neighbouring rows are bridged every fourth column, offset by
/// two on alternate rows so no qubit has more than three neighbours.
pub fn row_linked_grid(n: usize, width: usize) -> Vec<(usize, usize)> {
    let pos = |i: usize| {
        let (r, k) = (i / width, i % width);
        let col = if r % 2 == 0 { k } else { width - 1 - k };
        (r, col)
    };
    let mut index = std::collections::HashMap::new();
    for i in 0..n {
        index.insert(pos(i), i);
    }
    let mut pairs: BTreeSet<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    for i in 0..n {
        let (r, col) = pos(i);
        if col % 4 == if r % 2 == 0 { 0 } else { 2 } {
            if let Some(&j) = index.get(&(r + 1, col)) {
                pairs.insert((i.min(j), i.max(j)));
            }
        }
    }
    pairs.into_iter().collect()
}

fn jittered(rng: &mut ChaCha8Rng, exemplar: f64) -> f64 {
    exemplar - rng.gen_range(0.0..=CALIBRATION_JITTER)
}

/// Builds a device with deterministic calibration jitter seeded by its id.
pub fn synthetic_device(
    id: &str,
    technology: Technology,
    n: usize,
    coupling: Vec<(usize, usize)>,
) -> DeviceModel {
    let seed = u64::from_le_bytes(Sha256::digest(id.as_bytes())[..8].try_into().unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let single: Vec<f64> = (0..n).map(|_| jittered(&mut rng, EXEMPLAR_1Q)).collect();
    let readout: Vec<f64> = (0..n).map(|_| jittered(&mut rng, EXEMPLAR_RO)).collect();
    let mut two = vec![0.0; n * n];
    for &(a, b) in &coupling {
        let p = jittered(&mut rng, EXEMPLAR_2Q);
        two[a * n + b] = p;
        two[b * n + a] = p;
    }
    let native = match technology {
        Technology::Superconducting => superconducting_native(),
        Technology::IonTrap => ion_trap_native(),
    };
    DeviceModel::assemble(
        id.to_string(),
        technology,
        n,
        coupling,
        native,
        CalibrationTable {
            single_qubit: single,
            readout,
            two_qubit: two,
            n,
        },
        false,
    )
}

pub fn superconducting_device(id: &str, n: usize, width: usize) -> DeviceModel {
    synthetic_device(id, Technology::Superconducting, n, row_linked_grid(n, width))
}

pub fn ion_trap_device(id: &str, n: usize) -> DeviceModel {
    let coupling = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    synthetic_device(id, Technology::IonTrap, n, coupling)
}

/// Seven stand-in devices: superconducting with 8, 27, 80 and 127 qubits
/// and ion traps with 11, 25 and 32 qubits.
pub fn default_fleet() -> Vec<DeviceModel> {
    vec![
        superconducting_device("sc-8q", 8, 4),
        superconducting_device("sc-27q", 27, 9),
        superconducting_device("sc-80q", 80, 10),
        superconducting_device("sc-127q", 127, 14),
        ion_trap_device("ion-11q", 11),
        ion_trap_device("ion-25q", 25),
        ion_trap_device("ion-32q", 32),
    ]
}

/// `n` qubits on a line, uniform exemplar calibration.
pub fn line_device(n: usize) -> DeviceModel {
    let coupling: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    let mut two = vec![0.0; n * n];
    for &(a, b) in &coupling {
        two[a * n + b] = EXEMPLAR_2Q;
        two[b * n + a] = EXEMPLAR_2Q;
    }
    DeviceModel::assemble(
        format!("line-{n}q"),
        Technology::Superconducting,
        n,
        coupling,
        superconducting_native(),
        CalibrationTable {
            single_qubit: vec![EXEMPLAR_1Q; n],
            readout: vec![EXEMPLAR_RO; n],
            two_qubit: two,
            n,
        },
        false,
    )
}
