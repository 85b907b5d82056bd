use std::sync::OnceLock;

use qpredict::reports::IsolatedRow;
use qpredict::{
    compile_on, device_distribution_report, fom_cross_comparison, isolated_evaluations, predict_and_compile,
    run_benchmarks, train_bundle, Bundle, BundleConfig, IsolatedMode, PipelineError,
};
use qpredict_core::corpus::{generate, CorpusSpec, Family};
use qpredict_core::device::{ion_trap_device, line_device, superconducting_device};
use qpredict_core::fom::FigureOfMerit;
use qpredict_core::passes::{is_executable, MappingState};
use qpredict_core::qasm::parse_qasm;
use qpredict_core::{Circuit, Gate, GateOp};
use qpredict_select::{ForestConfig, Hyper, PredictError};

const FID: FigureOfMerit = FigureOfMerit::ExpectedFidelity;
const CD: FigureOfMerit = FigureOfMerit::CriticalDepth;

fn bundle() -> &'static Bundle {
    static B: OnceLock<(tempfile::TempDir, Bundle)> = OnceLock::new();
    &B.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let fleet = vec![
            line_device(3),
            ion_trap_device("ion-5q", 5),
            superconducting_device("sc-8q", 8, 4),
        ];
        let mut cfg = BundleConfig::desk(fleet, 6);
        cfg.corpus = CorpusSpec::training(2, 8, 2, 6);
        cfg.train.iterations = 10;
        cfg.forest = ForestConfig {
            grid: vec![Hyper {
                trees: 15,
                max_depth: None,
                min_leaf: 1,
            }],
            seed: 6,
            ..Default::default()
        };
        let (b, _) = train_bundle(dir.path(), &cfg).unwrap();
        (dir, b)
    })
    .1
}

fn eval_corpus() -> Vec<(String, Circuit)> {
    generate(&CorpusSpec {
        families: Family::ALL.to_vec(),
        min_qubits: 2,
        max_qubits: 8,
        step: 2,
        instances: 1,
        seed: 99,
        training: false,
    })
    .unwrap()
    .into_iter()
    .map(|e| (e.name, e.circuit))
    .collect()
}

fn fig1a() -> Circuit {
    parse_qasm("qreg q[3]; x q[2]; x q[2]; h q[1]; rz(-pi/2) q[1]; cx q[2],q[1]; cx q[1],q[0]; cx q[2],q[0];")
        .unwrap()
}

#[test]
fn worked_example_compiles_to_an_executable_circuit() {
    let b = bundle();
    for fom in [FID, CD] {
        let p = predict_and_compile(&fig1a(), b, fom).unwrap();
        let d = b.device(&p.device_id).unwrap();
        assert!(is_executable(&p.circuit, d, &p.mapping), "{}", p.device_id);
        assert_eq!(p.ranking[0].0, p.device_id);
        let shares: f64 = p.ranking.iter().map(|r| r.1).sum();
        assert!((shares - 1.0).abs() < 1e-9);
        assert_eq!(p.score, fom.score(&p.circuit, d, &p.mapping));
        assert!(!p.pass_log.is_empty());
    }
}

#[test]
fn every_prediction_is_executable() {
    let b = bundle();
    for (name, c) in eval_corpus() {
        for fom in [FID, CD] {
            let p = predict_and_compile(&c, b, fom).unwrap();
            let d = b.device(&p.device_id).unwrap();
            assert!(c.num_qubits() <= d.num_qubits());
            assert!(
                is_executable(&p.circuit, d, &p.mapping),
                "{name} on {}",
                p.device_id
            );
        }
    }
}

#[test]
fn oversized_or_unknown_targets_are_errors() {
    let b = bundle();
    let mut big = Circuit::new(200);
    big.push(GateOp::two(Gate::Cx, 0, 199)).unwrap();
    assert!(matches!(
        predict_and_compile(&big, b, FID),
        Err(PipelineError::Predict(PredictError::NoFittingDevice {
            qubits: 200
        }))
    ));
    let mut six = Circuit::new(6);
    six.push(GateOp::two(Gate::Cx, 0, 5)).unwrap();
    assert!(matches!(
        compile_on(&six, b, FID, "ion-5q"),
        Err(PipelineError::TooLarge {
            qubits: 6,
            available: 5,
            ..
        })
    ));
    assert!(matches!(
        compile_on(&six, b, FID, "nope"),
        Err(PipelineError::UnknownDevice(_))
    ));
    let combined: FigureOfMerit = "combined:0.5:0.5".parse().unwrap();
    assert!(matches!(
        predict_and_compile(&six, b, combined),
        Err(PipelineError::UnknownFom(_))
    ));
}

#[test]
fn already_executable_input_is_not_made_worse() {
    let b = bundle();
    let mut c = Circuit::new(3);
    c.push(GateOp::one(Gate::Sx, 0)).unwrap();
    c.push(GateOp::rot(Gate::Rz, 0.3, 1)).unwrap();
    c.push(GateOp::two(Gate::Cx, 0, 1)).unwrap();
    c.push(GateOp::two(Gate::Cx, 1, 2)).unwrap();
    c.push(GateOp::one(Gate::X, 2)).unwrap();
    let d = b.device("line-3q").unwrap();
    for fom in [FID, CD] {
        let seed = b.policy(&fom, "line-3q").unwrap().seed;
        let ms = MappingState {
            layout: Some(vec![0, 1, 2]),
            ..MappingState::with_seed(seed)
        };
        assert!(is_executable(&c, d, &ms));
        let input = fom.score(&c, d, &ms);
        let p = compile_on(&c, b, fom, "line-3q").unwrap();
        assert_eq!(p.score, fom.score(&p.circuit, d, &p.mapping));
        assert!(p.score >= input, "{}: {} < {input}", fom.id(), p.score);
    }
}

#[test]
fn benchmark_rows_cover_every_fitting_baseline() {
    let b = bundle();
    let corpus = eval_corpus();
    for fom in [FID, CD] {
        let r = run_benchmarks(&corpus, b, fom);
        assert!(r.failures.is_empty(), "{:?}", r.failures);
        assert_eq!(r.rows.len() + r.excluded.len(), corpus.len());
        for row in &r.rows {
            let fits = b.fleet.iter().filter(|d| row.qubits <= d.num_qubits()).count();
            assert_eq!(row.baselines.len(), 2 * fits, "{}", row.name);
            assert!((1..=row.baselines.len() + 1).contains(&row.rank));
            assert!(row.worst <= row.median && row.median <= row.best);
            assert!(row.score > 0.0 || row.best > 0.0);
        }
        assert!(r.rows.windows(2).all(|w| w[0].score <= w[1].score));
        let s = r.summary();
        assert!(s.top1 <= s.top3);
    }
}

#[test]
fn all_zero_benchmarks_are_excluded() {
    // Every two-qubit gate of a CX chain lies on the longest path.
    let mut chain = Circuit::new(3);
    chain.push(GateOp::two(Gate::Cx, 0, 1)).unwrap();
    chain.push(GateOp::two(Gate::Cx, 1, 2)).unwrap();
    let r = run_benchmarks(&[("chain".into(), chain)], bundle(), CD);
    assert!(r.rows.is_empty());
    assert_eq!(r.excluded, vec!["chain".to_string()]);
}

#[test]
fn reports_are_reproducible() {
    let b = bundle();
    let corpus = eval_corpus();
    let run = |dir: &std::path::Path| {
        run_benchmarks(&corpus, b, FID).write(dir).unwrap();
        let d = device_distribution_report(&corpus, b, FID).unwrap();
        qpredict::reports::write_report(dir, "dist.csv", &d.to_csv()).unwrap();
        let i = isolated_evaluations(&corpus, b, FID, IsolatedMode::FixedDevice).unwrap();
        qpredict::reports::write_report(dir, "iso.csv", &i.to_csv()).unwrap();
        let t = fom_cross_comparison(&corpus, &[(b, FID), (b, CD)]).unwrap();
        qpredict::reports::write_report(dir, "cross.csv", &t.to_csv()).unwrap();
    };
    let a = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    run(a.path());
    run(c.path());
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 6);
    for n in names {
        assert_eq!(
            std::fs::read(a.path().join(&n)).unwrap(),
            std::fs::read(c.path().join(&n)).unwrap(),
            "{n:?}"
        );
    }
}

#[test]
fn empty_corpus_gives_empty_reports() {
    let b = bundle();
    let r = run_benchmarks(&[], b, FID);
    assert!(r.rows.is_empty() && r.excluded.is_empty() && r.failures.is_empty());
    assert_eq!(r.summary().top3, 0.0);
    assert!(device_distribution_report(&[], b, FID).unwrap().groups.is_empty());
    for mode in [IsolatedMode::FixedDevice, IsolatedMode::FixedCompiler] {
        assert!(isolated_evaluations(&[], b, FID, mode).unwrap().rows.is_empty());
    }
    assert_eq!(
        fom_cross_comparison(&[], &[(b, FID), (b, CD)]).unwrap().circuits,
        0
    );
}

#[test]
fn fixed_compiler_rl_is_the_full_pipeline() {
    let r = isolated_evaluations(&eval_corpus(), bundle(), FID, IsolatedMode::FixedCompiler).unwrap();
    assert!(!r.rows.is_empty());
    assert!(r.rows.iter().all(|row: &IsolatedRow| row.rl == row.pipeline));
    assert_eq!(r.pipeline_at_least(|row| row.rl), 1.0);
}

#[test]
fn fixed_device_uses_the_largest_device() {
    let b = bundle();
    let r = isolated_evaluations(&eval_corpus(), b, CD, IsolatedMode::FixedDevice).unwrap();
    assert!(r.rows.iter().all(|row| row.device == "sc-8q"));
    // Circuits that fit only the largest device get the same result either way.
    for row in r
        .rows
        .iter()
        .filter(|row| row.name.contains("-6q") || row.name.contains("-8q"))
    {
        assert_eq!(row.rl, row.pipeline, "{}", row.name);
    }
}

#[test]
fn distribution_groups_by_number_of_fitting_devices() {
    let b = bundle();
    let corpus = eval_corpus();
    let r = device_distribution_report(&corpus, b, FID).unwrap();
    let total: usize = r.groups.values().flat_map(|g| g.values()).sum();
    assert_eq!(total, corpus.len());
    let only_big = &r.groups[&1];
    assert_eq!(only_big.keys().collect::<Vec<_>>(), ["sc-8q"]);
    assert_eq!(r.concentration()[&1], 1.0);
}

#[test]
fn identical_slots_give_a_symmetric_table() {
    let b = bundle();
    let t = fom_cross_comparison(&eval_corpus(), &[(b, FID), (b, FID)]).unwrap();
    assert_eq!(t.cells[0][1], t.cells[1][0]);
    assert_eq!(t.cells[0][0], t.cells[1][1]);
    assert!(!t.diagonal_dominates());
}
