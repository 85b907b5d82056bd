//! Compilation as a Markov decision process: circuits move between
//! non-native, native and executable states under passes from the catalog,
//! and a policy learns which pass to apply next.

pub mod cache;
pub mod compile;
pub mod env;
pub mod obs;
pub mod oracle;
pub mod policy;
pub mod ppo;

pub use compile::{compile_with_policy, CompileError, CompileOutcome};
pub use env::{compute_status, CompilationStatus, Episode, StepError};
pub use policy::{PolicyError, PolicyFile, PolicyNet};
pub use ppo::{
    surrogate_gradient, surrogate_loss, train_policy, TrainConfig, TrainError, TrainReport, Transition,
};
