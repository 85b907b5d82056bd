//! Two fixed pass sequences used as reference compilers.

use serde::{Deserialize, Serialize};

use super::{check_fits, layout, opt, route, synth, MappingState, PassError};
use crate::circuit::Circuit;
use crate::device::DeviceModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineLevel {
    L1,
    L2,
}

/// L1: synthesise, trivial layout, basic routing, cancel inverses.
/// L2: merge rotations, synthesise, interaction layout, lookahead routing,
/// then the gate-set preserving sweep to a fixpoint.
pub fn baseline_pipeline(
    c: &Circuit,
    d: &DeviceModel,
    level: BaselineLevel,
    seed: u64,
) -> Result<(Circuit, MappingState), PassError> {
    check_fits(c, d)?;
    let ms = MappingState::with_seed(seed);
    match level {
        BaselineLevel::L1 => {
            let c = synth::synthesize_to_native(c, d)?;
            let (c, ms) = layout::apply_layout(&c, d, &ms, layout::trivial(&c, d)?)?;
            let (c, ms) = route::route_basic(&c, d, &ms)?;
            Ok((opt::cancel_inverses(&c), ms))
        }
        BaselineLevel::L2 => {
            let c = synth::synthesize_to_native(&opt::merge_rotations(c), d)?;
            let (c, ms) = layout::apply_layout(&c, d, &ms, layout::interaction(&c, d)?)?;
            let (c, ms) = route::route_lookahead(&c, d, &ms)?;
            Ok((opt::peephole_sweep(&c), ms))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::line_device;
    use crate::passes::is_executable;

    #[test]
    fn empty_circuit_stays_empty() {
        let d = line_device(3);
        for level in [BaselineLevel::L1, BaselineLevel::L2] {
            let (out, ms) = baseline_pipeline(&Circuit::new(2), &d, level, 0).unwrap();
            assert!(out.is_empty());
            assert!(is_executable(&out, &d, &ms));
        }
    }

    #[test]
    fn too_large_is_an_error() {
        let d = line_device(3);
        assert!(matches!(
            baseline_pipeline(&Circuit::new(5), &d, BaselineLevel::L1, 0),
            Err(PassError::TooLarge { .. })
        ));
    }
}
