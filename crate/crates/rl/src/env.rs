//! The compilation MDP: three states (non-native, native but unmapped,
//! executable), masked actions from the pass catalog, and a sparse reward
//! paid once at the end of an episode.

use qpredict_core::device::DeviceModel;
use qpredict_core::fom::FigureOfMerit;
use qpredict_core::passes::{is_native, respects_topology, MappingState, PassAction, PassError, PassKind};
use qpredict_core::Circuit;

pub const DEFAULT_MAX_STEPS: usize = 40;

/// `respects_topology` is only reported when `only_native` holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CompilationStatus {
    pub only_native: bool,
    pub respects_topology: bool,
}

impl CompilationStatus {
    pub fn executable(self) -> bool {
        self.only_native && self.respects_topology
    }

    /// 0 non-native, 1 native, 2 executable.
    pub fn index(self) -> usize {
        match (self.only_native, self.respects_topology) {
            (false, _) => 0,
            (true, false) => 1,
            (true, true) => 2,
        }
    }
}

pub fn compute_status(c: &Circuit, d: &DeviceModel, ms: &MappingState) -> CompilationStatus {
    let only_native = is_native(c, d);
    CompilationStatus {
        only_native,
        respects_topology: only_native && ms.layout.is_some() && respects_topology(c, d),
    }
}

/// Legal actions in a state, indexed like [`PassAction::ALL`].
///
/// Non-native circuits may be synthesised or consolidated. Native, unmapped
/// circuits may be placed (layout or combined mapping, only while no
/// layout exists), routed (only once a layout exists) or optimised.
/// Executable circuits may be optimised or terminated.
pub fn mask_for(status: CompilationStatus, has_layout: bool) -> [bool; PassAction::ALL.len()] {
    let mut mask = [false; PassAction::ALL.len()];
    for (i, a) in PassAction::ALL.iter().enumerate() {
        let k = a.kind();
        let opt = matches!(k, PassKind::OptPreserving | PassKind::OptGeneral);
        mask[i] = match status.index() {
            0 => k == PassKind::Synthesis || k == PassKind::OptGeneral,
            1 => {
                opt || (!has_layout && matches!(k, PassKind::Layout | PassKind::CombinedMapping))
                    || (has_layout && k == PassKind::Routing)
            }
            _ => opt || k == PassKind::Terminate,
        };
    }
    mask
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StepError {
    #[error("episode is already done")]
    Done,
    #[error("action `{0}` is masked in the current state")]
    Masked(&'static str),
    #[error(transparent)]
    Pass(#[from] PassError),
}

/// One compilation episode of a circuit on a device.
#[derive(Clone, Debug)]
pub struct Episode<'a> {
    pub circuit: Circuit,
    pub device: &'a DeviceModel,
    pub mapping: MappingState,
    pub status: CompilationStatus,
    pub steps_taken: usize,
    pub max_steps: usize,
    pub done: bool,
    pub fom: FigureOfMerit,
}

impl<'a> Episode<'a> {
    pub fn new(
        circuit: Circuit,
        device: &'a DeviceModel,
        fom: FigureOfMerit,
        max_steps: usize,
        seed: u64,
    ) -> Self {
        Episode::with_mapping(circuit, device, fom, max_steps, MappingState::with_seed(seed))
    }

    /// Starts from an existing mapping state, for circuits already placed.
    pub fn with_mapping(
        circuit: Circuit,
        device: &'a DeviceModel,
        fom: FigureOfMerit,
        max_steps: usize,
        mapping: MappingState,
    ) -> Self {
        let status = compute_status(&circuit, device, &mapping);
        Episode {
            circuit,
            device,
            mapping,
            status,
            steps_taken: 0,
            max_steps: max_steps.max(1),
            done: false,
            fom,
        }
    }

    pub fn mask(&self) -> Result<[bool; PassAction::ALL.len()], StepError> {
        if self.done {
            return Err(StepError::Done);
        }
        Ok(mask_for(self.status, self.mapping.layout.is_some()))
    }

    /// Score of the current circuit (0 if not executable).
    pub fn score(&self) -> f64 {
        self.fom.score(&self.circuit, self.device, &self.mapping)
    }

    /// Applies `a`. The reward is 0 unless the episode ends here, by
    /// `terminate` or by reaching `max_steps`, in which case it is the
    /// current score.
    pub fn step(&mut self, a: PassAction) -> Result<f64, StepError> {
        if !self.mask()?[a.index()] {
            return Err(StepError::Masked(a.id()));
        }
        if a != PassAction::Terminate {
            let (c, ms) = a.apply(&self.circuit, self.device, &self.mapping)?;
            self.set_state(c, ms);
        }
        self.steps_taken += 1;
        if a == PassAction::Terminate || self.steps_taken >= self.max_steps {
            Ok(self.finish_now())
        } else {
            Ok(0.0)
        }
    }

    /// Installs a precomputed successor state.
    pub fn set_state(&mut self, c: Circuit, ms: MappingState) {
        self.status = compute_status(&c, self.device, &ms);
        self.circuit = c;
        self.mapping = ms;
    }

    /// Ends the episode with timeout semantics: the current score.
    pub fn finish_now(&mut self) -> f64 {
        self.done = true;
        self.score()
    }
}
