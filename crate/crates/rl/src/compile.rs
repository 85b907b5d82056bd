//! Compiling a circuit by following a policy.

use qpredict_core::device::DeviceModel;
use qpredict_core::fom::{FigureOfMerit, FomError};
use qpredict_core::passes::{baseline_pipeline, BaselineLevel, MappingState, PassAction, PassError};
use qpredict_core::Circuit;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cache::TransitionCache;
use crate::env::{Episode, StepError};
use crate::obs::observe;
use crate::policy::{Mask, PolicyFile, PolicyNet, NUM_ACTIONS};

#[derive(Clone, Debug)]
pub struct CompileOutcome {
    pub circuit: Circuit,
    pub mapping: MappingState,
    /// Actions taken, ending with `terminate` when the policy chose it.
    pub actions: Vec<PassAction>,
    pub score: f64,
    /// The policy did not reach an executable circuit and the level-1
    /// baseline was used instead.
    pub used_fallback: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CompileError {
    #[error(transparent)]
    Pass(#[from] PassError),
    #[error("policy was trained for device {policy}, not {device}")]
    DeviceMismatch { policy: String, device: String },
    #[error(transparent)]
    Fom(#[from] FomError),
}

/// Chooses the next action among those enabled in `mask`, or `None` to
/// stop.
pub trait Chooser {
    fn choose(&mut self, ep: &Episode<'_>, mask: &Mask) -> Option<PassAction>;
}

pub struct Greedy<'n>(pub &'n PolicyNet);

impl Chooser for Greedy<'_> {
    fn choose(&mut self, ep: &Episode<'_>, mask: &Mask) -> Option<PassAction> {
        let o = observe(&ep.circuit, ep.status, ep.mapping.layout.is_some());
        self.0.greedy(&o, mask)
    }
}

/// Samples from the policy.
pub struct Sampled<'n, R>(pub &'n PolicyNet, pub R);

impl<R: Rng> Chooser for Sampled<'_, R> {
    fn choose(&mut self, ep: &Episode<'_>, mask: &Mask) -> Option<PassAction> {
        let o = observe(&ep.circuit, ep.status, ep.mapping.layout.is_some());
        self.0.sample(&o, mask, &mut self.1).map(|(a, _)| a)
    }
}

/// Uniform over enabled actions.
pub struct UniformRandom<R>(pub R);

impl<R: Rng> Chooser for UniformRandom<R> {
    fn choose(&mut self, _ep: &Episode<'_>, mask: &Mask) -> Option<PassAction> {
        let legal: Vec<usize> = (0..NUM_ACTIONS).filter(|&a| mask[a]).collect();
        if legal.is_empty() {
            return None;
        }
        Some(PassAction::ALL[legal[self.0.gen_range(0..legal.len())]])
    }
}

/// Runs `chooser` to the end of the episode. Actions seen to leave the
/// current state unchanged are withheld until the state changes, so a
/// deterministic chooser moves on to its next preference instead of
/// repeating a no-op. When nothing is left to choose, or a pass fails, the
/// episode ends with timeout semantics.
pub fn rollout(
    ep: &mut Episode<'_>,
    chooser: &mut impl Chooser,
    cache: &mut TransitionCache,
) -> (Vec<PassAction>, f64) {
    let mut actions = Vec::new();
    let mut noop = [false; NUM_ACTIONS];
    while !ep.done {
        let mut mask = ep.mask().expect("episode is running");
        for (m, n) in mask.iter_mut().zip(&noop) {
            *m &= !n;
        }
        let Some(a) = chooser.choose(ep, &mask) else {
            return (actions, ep.finish_now());
        };
        let before = (ep.circuit.fingerprint(), ep.mapping.clone());
        match ep.step_cached(a, cache) {
            Ok(r) => {
                actions.push(a);
                if ep.done {
                    return (actions, r);
                }
                if before == (ep.circuit.fingerprint(), ep.mapping.clone()) {
                    noop[a.index()] = true;
                } else {
                    noop = [false; NUM_ACTIONS];
                }
            }
            Err(StepError::Pass(e)) => {
                log::debug!("{} failed on {}: {e}", a.id(), ep.device.id());
                return (actions, ep.finish_now());
            }
            Err(e) => unreachable!("chooser picked an illegal action: {e}"),
        }
    }
    (actions, ep.score())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompileMode {
    /// Most probable legal action at every step.
    Greedy,
    /// Sampled legal actions, from a seeded generator.
    Sample(u64),
}

/// Compiles `c` for `d` with a trained policy. The episode starts from a
/// mapping state seeded with the policy's training seed, so compiles match
/// what the policy saw in training. If the policy does not reach an
/// executable circuit the level-1 baseline result is returned and flagged.
pub fn compile_with_policy(
    c: &Circuit,
    p: &PolicyFile,
    d: &DeviceModel,
    mode: CompileMode,
) -> Result<CompileOutcome, CompileError> {
    if p.device_id != d.id() {
        return Err(CompileError::DeviceMismatch {
            policy: p.device_id.clone(),
            device: d.id().to_string(),
        });
    }
    let fom: FigureOfMerit = p.fom.parse()?;
    let mut cache = TransitionCache::new(4096);
    run_policy(c, d, fom, &p.net, p.max_steps, mode, p.seed, true, &mut cache)
}

/// Rolls out `net` on `c`. Without `fallback` the raw episode result is
/// returned even when it is not executable.
#[allow(clippy::too_many_arguments)]
pub fn run_policy(
    c: &Circuit,
    d: &DeviceModel,
    fom: FigureOfMerit,
    net: &PolicyNet,
    max_steps: usize,
    mode: CompileMode,
    seed: u64,
    fallback: bool,
    cache: &mut TransitionCache,
) -> Result<CompileOutcome, CompileError> {
    if c.num_qubits() > d.num_qubits() {
        return Err(PassError::TooLarge {
            circuit: c.num_qubits(),
            available: d.num_qubits(),
            device: d.id().to_string(),
        }
        .into());
    }
    let mut ep = Episode::new(c.clone(), d, fom, max_steps, seed);
    let (actions, score) = match mode {
        CompileMode::Greedy => rollout(&mut ep, &mut Greedy(net), cache),
        CompileMode::Sample(s) => {
            let mut chooser = Sampled(net, ChaCha8Rng::seed_from_u64(s));
            rollout(&mut ep, &mut chooser, cache)
        }
    };
    if ep.status.executable() || !fallback {
        return Ok(CompileOutcome {
            circuit: ep.circuit,
            mapping: ep.mapping,
            actions,
            score,
            used_fallback: false,
        });
    }
    let (circuit, mapping) = baseline_pipeline(c, d, BaselineLevel::L1, seed)?;
    let score = fom.score(&circuit, d, &mapping);
    Ok(CompileOutcome {
        circuit,
        mapping,
        actions,
        score,
        used_fallback: true,
    })
}
