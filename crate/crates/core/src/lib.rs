//! Circuit representation, device models, the compilation pass catalog and
//! the figures of merit used to score compiled circuits.

pub mod circuit;
pub mod corpus;
pub mod device;
pub mod features;
pub mod fom;
pub mod gate;
pub mod metrics;
pub mod passes;
pub mod qasm;
pub mod sim;

pub use circuit::{Circuit, CircuitError, Measurement};
pub use device::{DeviceError, DeviceModel, Technology};
pub use gate::{Gate, GateOp};
