//! Labelled training data: every circuit is compiled on every fitting device
//! with that device's policy, and the best device becomes the label.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use qpredict_core::device::DeviceModel;
use qpredict_core::features::{extract_features, FeatureVector};
use qpredict_core::fom::FigureOfMerit;
use qpredict_core::passes::catalog_hash;
use qpredict_core::Circuit;
use qpredict_rl::compile::CompileMode;
use qpredict_rl::{compile_with_policy, CompileError, PolicyFile};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::store::{ResultStore, StoreError, StoreKey, StoreRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub features: FeatureVector,
    pub label: String,
    /// Score on every fleet device; devices the circuit does not fit get 0.
    pub per_device_scores: BTreeMap<String, f64>,
    pub circuit_hash: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabelStats {
    /// Compiles run and written to the store.
    pub compiled: usize,
    /// Results taken from the store.
    pub reused: usize,
    /// Circuits left out, with the reason.
    pub excluded: Vec<(String, String)>,
}

#[derive(Debug, thiserror::Error)]
pub enum LabelError {
    #[error("no policy for device {0}")]
    MissingPolicy(String),
    #[error("policy for device {device} was trained for {found}, not {expected}")]
    PolicyMismatch {
        device: String,
        found: String,
        expected: String,
    },
    #[error("compiling circuit {circuit} for {device}: {source}")]
    Compile {
        circuit: String,
        device: String,
        source: CompileError,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Hash of a policy's serialised form, stored with each result so results
/// from a retrained policy are not mistaken for current ones.
pub fn policy_stamp(p: &PolicyFile) -> String {
    let text = serde_json::to_string(p).expect("policy serialises");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Orders candidates by higher score, then fewer qubits, then device id.
/// Entries are `(device id, qubits, score)`.
pub fn rank_by_score<'a>(entries: impl IntoIterator<Item = (&'a str, usize, f64)>) -> Vec<(String, f64)> {
    let mut v: Vec<(&str, usize, f64)> = entries.into_iter().collect();
    v.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.0.cmp(b.0))
    });
    v.into_iter().map(|(id, _, s)| (id.to_string(), s)).collect()
}

/// Compiles each circuit greedily on every device it fits, reusing results
/// already in `store` and appending new ones. Circuits that fit no device
/// are excluded and logged.
pub fn generate_labels(
    corpus: &[Circuit],
    fleet: &[DeviceModel],
    policies: &BTreeMap<String, PolicyFile>,
    fom: FigureOfMerit,
    store: &mut ResultStore,
) -> Result<(Vec<TrainingSample>, LabelStats), LabelError> {
    let fom_id = fom.id();
    let catalog = catalog_hash();
    let mut stamps = BTreeMap::new();
    let device_hashes: BTreeMap<&str, String> = fleet.iter().map(|d| (d.id(), d.content_hash())).collect();
    for d in fleet {
        let p = policies
            .get(d.id())
            .ok_or_else(|| LabelError::MissingPolicy(d.id().to_string()))?;
        if p.fom != fom_id || p.device_id != d.id() {
            return Err(LabelError::PolicyMismatch {
                device: d.id().to_string(),
                found: format!("{}/{}", p.device_id, p.fom),
                expected: format!("{}/{}", d.id(), fom_id),
            });
        }
        stamps.insert(d.id(), policy_stamp(p));
    }

    let mut stats = LabelStats::default();
    let mut samples = Vec::new();
    for c in corpus {
        let hash = c.content_hash();
        if !fleet.iter().any(|d| c.num_qubits() <= d.num_qubits()) {
            log::info!(
                "excluding circuit {hash}: {} qubits fit no device",
                c.num_qubits()
            );
            stats
                .excluded
                .push((hash, format!("{} qubits fit no device", c.num_qubits())));
            continue;
        }
        let mut scores = BTreeMap::new();
        for d in fleet {
            if c.num_qubits() > d.num_qubits() {
                scores.insert(d.id().to_string(), 0.0);
                continue;
            }
            let key = StoreKey {
                circuit_hash: hash.clone(),
                device_id: d.id().to_string(),
                device_hash: device_hashes[d.id()].clone(),
                fom_id: fom_id.clone(),
                catalog_hash: catalog.clone(),
                policy_stamp: stamps[d.id()].clone(),
            };
            let score = match store.get(&key) {
                Some(rec) => {
                    stats.reused += 1;
                    rec.score
                }
                None => {
                    let out = compile_with_policy(c, &policies[d.id()], d, CompileMode::Greedy).map_err(
                        |source| LabelError::Compile {
                            circuit: hash.clone(),
                            device: d.id().to_string(),
                            source,
                        },
                    )?;
                    store.insert(StoreRecord {
                        key,
                        score: out.score,
                        pass_log: out.actions.iter().map(|a| a.id().to_string()).collect(),
                        used_fallback: out.used_fallback,
                    })?;
                    stats.compiled += 1;
                    out.score
                }
            };
            scores.insert(d.id().to_string(), score);
        }
        let ranked = rank_by_score(fleet.iter().map(|d| (d.id(), d.num_qubits(), scores[d.id()])));
        samples.push(TrainingSample {
            features: extract_features(c),
            label: ranked[0].0.clone(),
            per_device_scores: scores,
            circuit_hash: hash,
        });
    }
    Ok((samples, stats))
}
