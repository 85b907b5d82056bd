use std::f64::consts::FRAC_PI_2;

use qpredict_core::device::line_device;
use qpredict_core::passes::{
    baseline_pipeline, is_executable, layout, opt, route, synthesize_to_native, BaselineLevel, MappingState,
};
use qpredict_core::qasm::parse_qasm;
use qpredict_core::sim::equivalent_up_to_layout;
use qpredict_core::{Gate, GateOp};

const FIG1A: &str = "OPENQASM 2.0;
include \"qelib1.inc\";
qreg q[3];
x q[2];
x q[2];
h q[1];
rz(-pi/2) q[1];
cx q[2],q[1];
cx q[1],q[0];
cx q[2],q[0];
";

#[test]
fn line_device_compilation_matches_the_hand_derivation() {
    let original = parse_qasm(FIG1A).unwrap();
    let d = line_device(3);

    let c = synthesize_to_native(&original, &d).unwrap();
    let c = opt::peephole_sweep(&c);
    let (c, ms) = layout::apply_layout(&c, &d, &MappingState::default(), vec![0, 1, 2]).unwrap();
    let (c, ms) = route::route_basic(&c, &d, &ms).unwrap();
    let c = opt::cancel_inverses(&c);

    let cx = |a, b| GateOp::two(Gate::Cx, a, b);
    let expect = [
        GateOp::rot(Gate::Rz, FRAC_PI_2, 1),
        GateOp::one(Gate::Sx, 1),
        cx(2, 1),
        cx(0, 1),
        cx(1, 0),
        cx(2, 1),
    ];
    assert_eq!(c.ops(), &expect);
    assert!(is_executable(&c, &d, &ms));
    assert!(equivalent_up_to_layout(&original, &c, &ms.final_positions(3)).unwrap());
}

#[test]
fn l2_baseline_is_no_larger_than_the_hand_result() {
    let original = parse_qasm(FIG1A).unwrap();
    let d = line_device(3);
    let (c, ms) = baseline_pipeline(&original, &d, BaselineLevel::L2, 0).unwrap();
    assert!(is_executable(&c, &d, &ms));
    assert!(c.gate_count() <= 6, "{c:?}");
    assert!(equivalent_up_to_layout(&original, &c, &ms.final_positions(3)).unwrap());
}
