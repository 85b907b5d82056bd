use std::collections::BTreeMap;
use std::path::Path;

use qpredict::{train_bundle, Bundle, BundleConfig, BundleError};
use qpredict_core::corpus::CorpusSpec;
use qpredict_core::device::{ion_trap_device, line_device, superconducting_device, DeviceModel};
use qpredict_core::fom::FigureOfMerit;
use qpredict_select::{ForestConfig, Hyper};

fn fleet() -> Vec<DeviceModel> {
    vec![
        line_device(3),
        ion_trap_device("ion-5q", 5),
        superconducting_device("sc-8q", 8, 4),
    ]
}

fn config(fleet: Vec<DeviceModel>) -> BundleConfig {
    let mut cfg = BundleConfig::desk(fleet, 4);
    cfg.corpus = CorpusSpec::training(2, 8, 1, 4);
    cfg.train.iterations = 3;
    cfg.train.episodes_per_batch = 16;
    cfg.forest = ForestConfig {
        grid: vec![Hyper {
            trees: 9,
            max_depth: Some(6),
            min_leaf: 1,
        }],
        seed: 4,
        ..Default::default()
    };
    cfg
}

/// Every file under `dir` with its contents.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn changed(a: &BTreeMap<String, Vec<u8>>, b: &BTreeMap<String, Vec<u8>>) -> Vec<String> {
    let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .filter(|k| a.get(*k) != b.get(*k))
        .cloned()
        .collect()
}

#[test]
fn rerun_is_a_byte_identical_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(fleet());
    let (first, summary) = train_bundle(dir.path(), &cfg).unwrap();
    assert_eq!(summary.policies_trained.len(), 6);
    assert_eq!(summary.forests_trained.len(), 2);
    assert!(summary.label_compiles > 0);
    let before = snapshot(dir.path());
    let (second, again) = train_bundle(dir.path(), &cfg).unwrap();
    assert!(again.did_nothing(), "{again:?}");
    assert_eq!(again.label_reuses, 0);
    assert!(changed(&before, &snapshot(dir.path())).is_empty());
    assert_eq!(first.manifest, second.manifest);

    let loaded = Bundle::load(dir.path()).unwrap();
    assert_eq!(loaded.manifest, first.manifest);
    let ids: Vec<&str> = loaded.fleet.iter().map(|d| d.id()).collect();
    assert_eq!(ids, ["ion-5q", "line-3q", "sc-8q"]);
    for fom in [FigureOfMerit::ExpectedFidelity, FigureOfMerit::CriticalDepth] {
        assert!(loaded.forest(&fom).is_some());
        for d in &loaded.fleet {
            assert_eq!(loaded.policy(&fom, d.id()), first.policy(&fom, d.id()));
        }
    }
    assert_eq!(loaded.largest_device().id(), "sc-8q");
}

#[test]
fn deleted_policy_is_the_only_one_retrained() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(fleet());
    train_bundle(dir.path(), &cfg).unwrap();
    let before = snapshot(dir.path());
    std::fs::remove_file(dir.path().join("policies/critical_depth/ion-5q.json")).unwrap();
    let (_, summary) = train_bundle(dir.path(), &cfg).unwrap();
    assert_eq!(
        summary.policies_trained,
        vec![("critical_depth".to_string(), "ion-5q".to_string())]
    );
    assert_eq!(summary.forests_trained, vec!["critical_depth".to_string()]);
    // Training is deterministic, so the rebuilt policy is identical and its
    // labels come from the store.
    assert_eq!(summary.label_compiles, 0);
    assert!(summary.label_reuses > 0);
    assert!(changed(&before, &snapshot(dir.path())).is_empty());
}

#[test]
fn added_device_trains_only_its_policies() {
    let dir = tempfile::tempdir().unwrap();
    train_bundle(dir.path(), &config(fleet())).unwrap();
    let before = snapshot(dir.path());
    let mut bigger = fleet();
    bigger.push(ion_trap_device("ion-7q", 7));
    let (bundle, summary) = train_bundle(dir.path(), &config(bigger)).unwrap();
    let mut trained = summary.policies_trained.clone();
    trained.sort();
    assert_eq!(
        trained,
        vec![
            ("critical_depth".to_string(), "ion-7q".to_string()),
            ("expected_fidelity".to_string(), "ion-7q".to_string()),
        ]
    );
    assert_eq!(summary.forests_trained.len(), 2);
    let fits = |n: usize| {
        qpredict_core::corpus::generate(&config(fleet()).corpus)
            .unwrap()
            .iter()
            .map(|e| (e.circuit.content_hash(), e.circuit.num_qubits()))
            .collect::<BTreeMap<_, _>>()
            .values()
            .filter(|&&q| q <= n)
            .count()
    };
    // Only the new device's compiles are new.
    assert_eq!(summary.label_compiles, 2 * fits(7));
    let after = snapshot(dir.path());
    let mut diff = changed(&before, &after);
    diff.sort();
    let mut expected = vec![
        "devices/ion-7q.json",
        "forests/critical_depth.json",
        "forests/expected_fidelity.json",
        "manifest.json",
        "policies/critical_depth/ion-7q.json",
        "policies/expected_fidelity/ion-7q.json",
        "store.ndjson",
    ];
    expected.sort();
    assert_eq!(diff, expected);
    assert_eq!(bundle.fleet.len(), 4);
    // The store only grew.
    assert!(after["store.ndjson"].starts_with(&before["store.ndjson"]));
}

#[test]
fn calibration_edit_invalidates_that_device_and_the_forests() {
    let dir = tempfile::tempdir().unwrap();
    train_bundle(dir.path(), &config(fleet())).unwrap();
    let mut edited = fleet();
    edited[1] = edited[1].with_single_qubit_fidelity(0, 0.97);
    let (_, summary) = train_bundle(dir.path(), &config(edited)).unwrap();
    let mut trained = summary.policies_trained.clone();
    trained.sort();
    assert_eq!(
        trained,
        vec![
            ("critical_depth".to_string(), "ion-5q".to_string()),
            ("expected_fidelity".to_string(), "ion-5q".to_string()),
        ]
    );
    assert_eq!(summary.forests_trained.len(), 2);
    // Every ion-5q label is recomputed for both FoMs; no other device's.
    let fits_ion: usize = qpredict_core::corpus::generate(&config(fleet()).corpus)
        .unwrap()
        .iter()
        .map(|e| (e.circuit.content_hash(), e.circuit.num_qubits()))
        .collect::<BTreeMap<_, _>>()
        .values()
        .filter(|&&q| q <= 5)
        .count();
    assert_eq!(summary.label_compiles, 2 * fits_ion);
}

#[test]
fn tampered_artifacts_are_reported_by_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(fleet());
    train_bundle(dir.path(), &cfg).unwrap();

    let forest = dir.path().join("forests/expected_fidelity.json");
    let text = std::fs::read_to_string(&forest).unwrap();
    std::fs::write(&forest, text.replacen("\"trees\"", "\"treez\"", 1)).unwrap();
    match Bundle::load(dir.path()) {
        Err(BundleError::Corrupt { path, .. }) => assert!(path.ends_with("expected_fidelity.json")),
        other => panic!("expected corruption, got {other:?}"),
    }
    match train_bundle(dir.path(), &cfg) {
        Err(BundleError::Corrupt { path, .. }) => assert!(path.ends_with("expected_fidelity.json")),
        other => panic!("expected corruption, got {:?}", other.map(|(_, s)| s)),
    }

    let dir = tempfile::tempdir().unwrap();
    train_bundle(dir.path(), &cfg).unwrap();
    let policy = dir.path().join("policies/expected_fidelity/sc-8q.json");
    std::fs::write(&policy, "{ not json").unwrap();
    match Bundle::load(dir.path()) {
        Err(BundleError::Corrupt { path, .. }) => assert!(path.ends_with("sc-8q.json")),
        other => panic!("expected corruption, got {other:?}"),
    }

    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        Bundle::load(dir.path()),
        Err(BundleError::Missing { .. })
    ));
}

#[test]
fn invalid_configurations_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut dup = fleet();
    dup.push(line_device(3));
    assert!(matches!(
        train_bundle(dir.path(), &config(dup)),
        Err(BundleError::Config(_))
    ));
    assert!(matches!(
        train_bundle(dir.path(), &config(Vec::new())),
        Err(BundleError::Config(_))
    ));
}
