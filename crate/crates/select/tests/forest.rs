use std::collections::BTreeMap;

use proptest::prelude::*;
use qpredict_core::device::{ion_trap_device, superconducting_device, DeviceModel};
use qpredict_core::features::{FeatureVector, HISTOGRAM_LEN};
use qpredict_core::gate::{Gate, GateOp};
use qpredict_core::Circuit;
use qpredict_select::forest::Node;
use qpredict_select::{
    predict_device, train_forest, ForestConfig, ForestError, ForestModel, Hyper, PredictError, TrainingSample,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fleet() -> Vec<DeviceModel> {
    vec![
        superconducting_device("sc-8q", 8, 4),
        ion_trap_device("ion-11q", 11),
        superconducting_device("sc-27q", 27, 6),
        superconducting_device("sc-127q", 127, 15),
    ]
}

fn features(num_qubits: usize, depth: usize, comm: f64) -> FeatureVector {
    FeatureVector {
        num_qubits,
        depth,
        program_communication: comm,
        critical_depth_ratio: 0.5,
        entanglement_ratio: 0.3,
        parallelism: 0.2,
        liveness: 0.7,
        gate_counts: [1; HISTOGRAM_LEN],
    }
}

fn sample(f: FeatureVector, label: &str, hash: String) -> TrainingSample {
    let per_device_scores = fleet()
        .iter()
        .map(|d| (d.id().to_string(), if d.id() == label { 0.9 } else { 0.1 }))
        .collect();
    TrainingSample {
        features: f,
        label: label.into(),
        per_device_scores,
        circuit_hash: hash,
    }
}

/// Labels determined by the qubit count: 5 → sc-8q, 10 → ion-11q.
fn separable(copies: usize) -> Vec<TrainingSample> {
    let mut v = Vec::new();
    for (n, label) in [(5, "sc-8q"), (10, "ion-11q")] {
        for i in 0..copies {
            v.push(sample(features(n, 20, 0.4), label, format!("{label}-{i:04}")));
        }
    }
    v
}

/// Varied features, labels mostly driven by depth and qubits.
fn noisy(n: usize, seed: u64) -> Vec<TrainingSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let q = rng.gen_range(2..12);
            let depth = rng.gen_range(1..200);
            let comm: f64 = rng.gen();
            let label = match (q > 8, depth > 100) {
                (true, _) => "ion-11q",
                (false, true) => "sc-27q",
                (false, false) => "sc-8q",
            };
            sample(features(q, depth, comm), label, format!("{i:05}"))
        })
        .collect()
}

fn small_grid(seed: u64) -> ForestConfig {
    ForestConfig {
        grid: vec![
            Hyper {
                trees: 10,
                max_depth: Some(4),
                min_leaf: 1,
            },
            Hyper {
                trees: 10,
                max_depth: None,
                min_leaf: 3,
            },
        ],
        seed,
        ..Default::default()
    }
}

fn ghz_like(n: usize) -> Circuit {
    let mut c = Circuit::new(n);
    c.push(GateOp::one(Gate::H, 0)).unwrap();
    for q in 1..n {
        c.push(GateOp::two(Gate::Cx, q - 1, q)).unwrap();
    }
    c
}

#[test]
fn separable_samples_are_classified_perfectly() {
    let (_, report) = train_forest(
        &separable(200),
        &fleet(),
        "expected_fidelity",
        &Default::default(),
    )
    .unwrap();
    assert_eq!(report.top1, 1.0);
    assert_eq!(report.top3, 1.0);
    assert_eq!(report.top3_score, 1.0);
    assert_eq!(report.train_size + report.test_size, 400);
    assert_eq!(report.test_size, 120);
}

#[test]
fn uninformative_features_give_chance_accuracy() {
    let labels = ["sc-8q", "ion-11q", "sc-27q"];
    let v: Vec<TrainingSample> = (0..300)
        .map(|i| sample(features(4, 10, 0.5), labels[i % 3], format!("{i:05}")))
        .collect();
    let (_, report) = train_forest(&v, &fleet(), "expected_fidelity", &small_grid(4)).unwrap();
    assert!((report.top1 - 1.0 / 3.0).abs() <= 0.15, "{}", report.top1);
}

#[test]
fn training_is_deterministic_per_seed() {
    let v = noisy(120, 1);
    let a = train_forest(&v, &fleet(), "expected_fidelity", &small_grid(9)).unwrap();
    let b = train_forest(&v, &fleet(), "expected_fidelity", &small_grid(9)).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    let c = train_forest(&v, &fleet(), "expected_fidelity", &small_grid(10)).unwrap();
    assert_ne!(a.0.trees, c.0.trees);
}

#[test]
fn learned_rule_generalises_on_noisy_data() {
    let (_, report) =
        train_forest(&noisy(300, 2), &fleet(), "expected_fidelity", &Default::default()).unwrap();
    assert!(report.top1 >= 0.9, "{report:?}");
    assert!(report.cv_accuracy >= 0.9, "{report:?}");
}

#[test]
fn single_depth_zero_tree_predicts_the_majority() {
    let mut v = separable(20);
    v.truncate(35);
    let cfg = ForestConfig {
        grid: vec![Hyper {
            trees: 1,
            max_depth: Some(0),
            min_leaf: 1,
        }],
        bootstrap: false,
        ..Default::default()
    };
    let (m, _) = train_forest(&v, &fleet(), "expected_fidelity", &cfg).unwrap();
    assert_eq!(m.trees.len(), 1);
    assert_eq!(m.trees[0].depth(), 0);
    for n in [2, 5, 8] {
        let ranked = predict_device(&ghz_like(n), &m).unwrap();
        assert_eq!(ranked[0], ("sc-8q".to_string(), 1.0));
    }
}

#[test]
fn memorised_sizes_rank_first_and_large_inputs_fit_one_device() {
    let (m, _) = train_forest(&separable(50), &fleet(), "expected_fidelity", &small_grid(0)).unwrap();
    assert_eq!(predict_device(&ghz_like(5), &m).unwrap()[0].0, "sc-8q");
    let ranked = predict_device(&ghz_like(90), &m).unwrap();
    assert_eq!(ranked.len(), 1);
    assert_eq!(ranked[0].0, "sc-127q");
    assert!(matches!(
        predict_device(&ghz_like(130), &m),
        Err(PredictError::NoFittingDevice { qubits: 130 })
    ));
}

#[test]
fn schema_mismatch_is_rejected() {
    let (mut m, _) = train_forest(&separable(20), &fleet(), "expected_fidelity", &small_grid(0)).unwrap();
    m.schema_hash = "0".repeat(64);
    assert!(matches!(
        predict_device(&ghz_like(3), &m),
        Err(PredictError::SchemaMismatch { .. })
    ));
}

#[test]
fn preconditions_are_checked() {
    let f = fleet();
    let fom = "expected_fidelity";
    let few = separable(4);
    assert!(matches!(
        train_forest(&few, &f, fom, &Default::default()),
        Err(ForestError::TooFewSamples(8))
    ));
    let one_label: Vec<TrainingSample> = separable(10).into_iter().take(10).collect();
    assert!(matches!(
        train_forest(&one_label, &f, fom, &Default::default()),
        Err(ForestError::DegenerateLabels)
    ));
    let mut unknown = separable(10);
    unknown[0].label = "nowhere".into();
    assert!(matches!(
        train_forest(&unknown, &f, fom, &Default::default()),
        Err(ForestError::UnknownLabel(_))
    ));
}

#[test]
fn forest_files_round_trip_and_reject_damage() {
    let (m, _) = train_forest(&noisy(80, 3), &fleet(), "critical_depth", &small_grid(2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("forest.json");
    m.save(&path).unwrap();
    let back = ForestModel::load(&path).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.fom, "critical_depth");
    let ids: Vec<(&str, usize)> = back
        .roster
        .iter()
        .map(|r| (r.id.as_str(), r.num_qubits))
        .collect();
    assert_eq!(
        ids,
        [("sc-8q", 8), ("ion-11q", 11), ("sc-27q", 27), ("sc-127q", 127)]
    );
    std::fs::write(&path, "{").unwrap();
    assert!(matches!(
        ForestModel::load(&path),
        Err(ForestError::Corrupt { .. })
    ));
}

#[test]
fn trees_are_well_formed() {
    let (m, _) = train_forest(&noisy(150, 4), &fleet(), "expected_fidelity", &Default::default()).unwrap();
    for t in &m.trees {
        for node in &t.nodes {
            match node {
                Node::Split { threshold, .. } => assert!(threshold.is_finite()),
                Node::Leaf { counts } => assert!(counts.iter().sum::<usize>() > 0),
            }
        }
        if let Some(d) = m.hyper.max_depth {
            assert!(t.depth() <= d);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Reordering the samples changes nothing.
    #[test]
    fn sample_order_does_not_matter(seed in any::<u64>(), shuffle_seed in any::<u64>()) {
        let v = noisy(60, seed);
        let mut w = v.clone();
        w.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        let a = train_forest(&v, &fleet(), "expected_fidelity", &small_grid(seed)).unwrap();
        let b = train_forest(&w, &fleet(), "expected_fidelity", &small_grid(seed)).unwrap();
        prop_assert_eq!(a.0, b.0);
    }

    /// Vote shares over the whole roster sum to one.
    #[test]
    fn vote_shares_sum_to_one(seed in any::<u64>(), q in 1..12usize, depth in 0..300usize, comm in 0.0..1.0f64) {
        let (m, _) = train_forest(&noisy(60, seed), &fleet(), "expected_fidelity", &small_grid(seed)).unwrap();
        let shares = m.vote_shares(&features(q, depth, comm).to_vec());
        prop_assert!((shares.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let ranked = m.rank(&features(q, depth, comm));
        let kept: BTreeMap<&str, usize> = m.roster.iter().map(|r| (r.id.as_str(), r.num_qubits)).collect();
        prop_assert!(ranked.iter().all(|(id, _)| kept[id.as_str()] >= q));
        prop_assert!(ranked.windows(2).all(|w| w[0].1 >= w[1].1));
    }
}
