//! The compilation pass catalog.
//!
//! Every pass has the same shape: it takes a circuit, the target device and
//! the current mapping state and returns a new circuit and mapping state.
//! Before a layout is chosen the circuit's wires are logical qubits; layout
//! passes relabel the circuit onto physical qubits, after which wire `p` is
//! physical qubit `p` of the device.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit::{Circuit, CircuitError};
use crate::device::DeviceModel;
use crate::gate::Gate;

pub mod baseline;
pub mod layout;
pub mod opt;
pub mod route;
pub mod synth;

pub use baseline::{baseline_pipeline, BaselineLevel};
pub use synth::synthesize_to_native;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PassError {
    #[error("circuit has {circuit} qubits but device `{device}` only {available}")]
    TooLarge {
        circuit: usize,
        available: usize,
        device: String,
    },
    #[error("no rule rewrites `{gate}` into the native set of `{device}`")]
    NoDecomposition { gate: Gate, device: String },
    #[error("routing needs a layout")]
    NoLayout,
    #[error("a layout is already set")]
    LayoutAlreadySet,
    #[error("physical qubits {0} and {1} are not connected")]
    Disconnected(usize, usize),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Layout and routing bookkeeping carried along a compilation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct MappingState {
    /// Logical qubit `i` was placed on physical qubit `layout[i]`.
    pub layout: Option<Vec<usize>>,
    /// Data placed on physical qubit `p` now lives on
    /// `routing_permutation[p]`. Empty means the identity.
    pub routing_permutation: Vec<usize>,
    /// Seed for randomised passes.
    pub seed: u64,
}

impl MappingState {
    pub fn with_seed(seed: u64) -> Self {
        MappingState {
            seed,
            ..Default::default()
        }
    }

    /// Where each of the `n` logical qubits ends up in the compiled circuit.
    pub fn final_positions(&self, n: usize) -> Vec<usize> {
        match &self.layout {
            None => (0..n).collect(),
            Some(layout) => layout
                .iter()
                .map(|&p| self.routing_permutation.get(p).copied().unwrap_or(p))
                .collect(),
        }
    }

    /// Appends a routing permutation `pi` (wire `w` ends on `pi[w]`).
    pub(crate) fn compose_routing(&mut self, pi: &[usize]) {
        if self.routing_permutation.is_empty() {
            self.routing_permutation = pi.to_vec();
        } else {
            for p in self.routing_permutation.iter_mut() {
                *p = pi[*p];
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PassKind {
    Synthesis,
    Layout,
    Routing,
    CombinedMapping,
    OptPreserving,
    OptGeneral,
    Terminate,
}

impl PassKind {
    pub fn name(self) -> &'static str {
        match self {
            PassKind::Synthesis => "synthesis",
            PassKind::Layout => "layout",
            PassKind::Routing => "routing",
            PassKind::CombinedMapping => "combined-mapping",
            PassKind::OptPreserving => "opt-preserving",
            PassKind::OptGeneral => "opt-general",
            PassKind::Terminate => "terminate",
        }
    }
}

/// One entry of the action catalog.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassAction {
    SynthNative,
    LayoutTrivial,
    LayoutDense,
    LayoutInteraction,
    RouteBasic,
    RouteStochastic,
    RouteLookahead,
    MapSabre,
    MapDenseStochastic,
    CancelInverses,
    MergeRotations,
    DropIdentityRotations,
    CommuteCancel,
    RemoveDiagBeforeMeasure,
    PeepholeSweep,
    Consolidate2qBlocks,
    Terminate,
}

/// Rotations with |angle| below this are dropped.
pub const IDENTITY_EPSILON: f64 = 1e-10;

impl PassAction {
    pub const ALL: [PassAction; 17] = [
        PassAction::SynthNative,
        PassAction::LayoutTrivial,
        PassAction::LayoutDense,
        PassAction::LayoutInteraction,
        PassAction::RouteBasic,
        PassAction::RouteStochastic,
        PassAction::RouteLookahead,
        PassAction::MapSabre,
        PassAction::MapDenseStochastic,
        PassAction::CancelInverses,
        PassAction::MergeRotations,
        PassAction::DropIdentityRotations,
        PassAction::CommuteCancel,
        PassAction::RemoveDiagBeforeMeasure,
        PassAction::PeepholeSweep,
        PassAction::Consolidate2qBlocks,
        PassAction::Terminate,
    ];

    pub fn id(self) -> &'static str {
        match self {
            PassAction::SynthNative => "synth_native",
            PassAction::LayoutTrivial => "layout_trivial",
            PassAction::LayoutDense => "layout_dense",
            PassAction::LayoutInteraction => "layout_interaction",
            PassAction::RouteBasic => "route_basic",
            PassAction::RouteStochastic => "route_stochastic",
            PassAction::RouteLookahead => "route_lookahead",
            PassAction::MapSabre => "map_sabre",
            PassAction::MapDenseStochastic => "map_dense_stochastic",
            PassAction::CancelInverses => "cancel_inverses",
            PassAction::MergeRotations => "merge_rotations",
            PassAction::DropIdentityRotations => "drop_identity_rotations",
            PassAction::CommuteCancel => "commute_cancel",
            PassAction::RemoveDiagBeforeMeasure => "remove_diag_before_measure",
            PassAction::PeepholeSweep => "peephole_sweep",
            PassAction::Consolidate2qBlocks => "consolidate_2q_blocks",
            PassAction::Terminate => "terminate",
        }
    }

    pub fn kind(self) -> PassKind {
        use PassAction::*;
        match self {
            SynthNative => PassKind::Synthesis,
            LayoutTrivial | LayoutDense | LayoutInteraction => PassKind::Layout,
            RouteBasic | RouteStochastic | RouteLookahead => PassKind::Routing,
            MapSabre | MapDenseStochastic => PassKind::CombinedMapping,
            CancelInverses
            | MergeRotations
            | DropIdentityRotations
            | CommuteCancel
            | RemoveDiagBeforeMeasure
            | PeepholeSweep => PassKind::OptPreserving,
            Consolidate2qBlocks => PassKind::OptGeneral,
            Terminate => PassKind::Terminate,
        }
    }

    pub fn index(self) -> usize {
        PassAction::ALL.iter().position(|a| *a == self).unwrap()
    }

    pub fn from_id(id: &str) -> Option<PassAction> {
        PassAction::ALL.iter().copied().find(|a| a.id() == id)
    }

    /// Runs the pass. `Terminate` returns its input unchanged.
    pub fn apply(
        self,
        c: &Circuit,
        d: &DeviceModel,
        ms: &MappingState,
    ) -> Result<(Circuit, MappingState), PassError> {
        use PassAction::*;
        let keep = |c: Circuit| Ok((c, ms.clone()));
        match self {
            SynthNative => keep(synthesize_to_native(c, d)?),
            LayoutTrivial => layout::apply_layout(c, d, ms, layout::trivial(c, d)?),
            LayoutDense => layout::apply_layout(c, d, ms, layout::dense(c, d)?),
            LayoutInteraction => layout::apply_layout(c, d, ms, layout::interaction(c, d)?),
            RouteBasic => route::route_basic(c, d, ms),
            RouteStochastic => route::route_stochastic(c, d, ms, route::STOCHASTIC_CANDIDATES),
            RouteLookahead => route::route_lookahead(c, d, ms),
            MapSabre => route::map_sabre(c, d, ms),
            MapDenseStochastic => {
                let (c, ms) = layout::apply_layout(c, d, ms, layout::dense(c, d)?)?;
                route::route_stochastic(&c, d, &ms, route::STOCHASTIC_CANDIDATES)
            }
            CancelInverses => keep(opt::cancel_inverses(c)),
            MergeRotations => keep(opt::merge_rotations(c)),
            DropIdentityRotations => keep(opt::drop_identity_rotations(c, IDENTITY_EPSILON)),
            CommuteCancel => keep(opt::commute_cancel(c)),
            RemoveDiagBeforeMeasure => keep(opt::remove_diag_before_measure(c)),
            PeepholeSweep => keep(opt::peephole_sweep(c)),
            Consolidate2qBlocks => keep(opt::consolidate_2q_blocks(c, d)),
            Terminate => keep(c.clone()),
        }
    }
}

/// `id<TAB>kind` per action, one per line, in catalog order.
pub fn catalog_listing() -> String {
    PassAction::ALL
        .iter()
        .map(|a| format!("{}\t{}\n", a.id(), a.kind().name()))
        .collect()
}

/// Hash of the catalog listing; persisted policies record it so a changed
/// action space is detected on load.
pub fn catalog_hash() -> String {
    hex::encode(Sha256::digest(catalog_listing().as_bytes()))
}

/// Whether every gate is native on `d`.
pub fn is_native(c: &Circuit, d: &DeviceModel) -> bool {
    c.ops().iter().all(|op| d.is_native(op.gate()))
}

/// Whether every two-qubit gate acts on a coupled pair of `d`.
pub fn respects_topology(c: &Circuit, d: &DeviceModel) -> bool {
    c.num_qubits() <= d.num_qubits()
        && c.ops().iter().all(|op| match op.qubits() {
            [a, b] => d.coupled(*a, *b),
            _ => true,
        })
}

/// Native, placed and routed: ready to run on `d`.
pub fn is_executable(c: &Circuit, d: &DeviceModel, ms: &MappingState) -> bool {
    ms.layout.is_some() && is_native(c, d) && respects_topology(c, d)
}

pub(crate) fn check_fits(c: &Circuit, d: &DeviceModel) -> Result<(), PassError> {
    if c.num_qubits() > d.num_qubits() {
        return Err(PassError::TooLarge {
            circuit: c.num_qubits(),
            available: d.num_qubits(),
            device: d.id().to_string(),
        });
    }
    Ok(())
}
