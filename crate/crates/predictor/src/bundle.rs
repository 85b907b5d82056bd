//! Trained artifacts on disk. Each artifact is recorded in the manifest with
//! a stamp of the inputs it was built from, so a rerun rebuilds exactly the
//! artifacts whose inputs changed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qpredict_core::corpus::{generate, CorpusError, CorpusSpec};
use qpredict_core::device::DeviceModel;
use qpredict_core::features::schema_hash;
use qpredict_core::fom::FigureOfMerit;
use qpredict_core::passes::catalog_hash;
use qpredict_core::Circuit;
use qpredict_rl::{train_policy, PolicyError, PolicyFile, TrainConfig, TrainError};
use qpredict_select::labels::policy_stamp;
use qpredict_select::{
    generate_labels, train_forest, ForestConfig, ForestError, ForestModel, Hyper, LabelError, ResultStore,
    StoreError,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const STORE: &str = "store.ndjson";

#[derive(Clone, Debug)]
pub struct BundleConfig {
    pub fleet: Vec<DeviceModel>,
    pub corpus: CorpusSpec,
    pub foms: Vec<FigureOfMerit>,
    pub train: TrainConfig,
    /// Policies train on the corpus circuits with at most this many qubits
    /// that fit the device. Labels use the whole corpus.
    pub rl_max_qubits: usize,
    pub forest: ForestConfig,
}

impl BundleConfig {
    /// Desk-scale settings: two instances per family and size from 2 to 32
    /// qubits, both figures of merit.
    pub fn desk(fleet: Vec<DeviceModel>, seed: u64) -> Self {
        BundleConfig {
            fleet,
            corpus: CorpusSpec::training(2, 32, 2, seed),
            foms: vec![FigureOfMerit::ExpectedFidelity, FigureOfMerit::CriticalDepth],
            train: TrainConfig {
                iterations: 200,
                seed,
                ..Default::default()
            },
            rl_max_qubits: 12,
            forest: ForestConfig {
                seed,
                ..Default::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub device_hash: String,
    /// Hash of everything the policy was trained from.
    pub inputs: String,
    /// Hash of the policy file.
    pub stamp: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestEntry {
    /// Hash of the corpus, forest settings, devices and policy stamps.
    pub inputs: String,
    /// Hash of the forest file.
    pub stamp: String,
    pub samples: usize,
    pub hyper: Hyper,
    pub top1: f64,
    pub top3: f64,
    pub top3_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub catalog_hash: String,
    pub schema_hash: String,
    pub corpus: CorpusSpec,
    pub corpus_hash: String,
    pub foms: Vec<String>,
    /// Roster: device id to device content hash.
    pub devices: BTreeMap<String, String>,
    /// FoM id to device id to policy.
    pub policies: BTreeMap<String, BTreeMap<String, PolicyEntry>>,
    pub forests: BTreeMap<String, ForestEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("bundle artifact {path} is unusable: {reason}")]
    Corrupt { path: String, reason: String },
    #[error("bundle has no {what}")]
    Missing { what: String },
    #[error("invalid bundle configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("training policy for {device}/{fom}: {source}")]
    Train {
        device: String,
        fom: String,
        source: TrainError,
    },
    #[error(transparent)]
    Labels(#[from] LabelError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("training forest for {fom}: {source}")]
    Forest { fom: String, source: ForestError },
}

/// What a `train_bundle` call actually did.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainSummary {
    /// `(fom, device)` pairs whose policy was trained.
    pub policies_trained: Vec<(String, String)>,
    pub forests_trained: Vec<String>,
    pub label_compiles: usize,
    pub label_reuses: usize,
    /// Held-out circuit hashes of each newly trained forest.
    pub held_out: BTreeMap<String, Vec<String>>,
}

impl TrainSummary {
    pub fn did_nothing(&self) -> bool {
        self.policies_trained.is_empty() && self.forests_trained.is_empty() && self.label_compiles == 0
    }
}

/// A loaded bundle. Every roster device has a policy for every FoM.
#[derive(Clone, Debug)]
pub struct Bundle {
    pub dir: PathBuf,
    pub manifest: Manifest,
    /// Roster in manifest order.
    pub fleet: Vec<DeviceModel>,
    pub policies: BTreeMap<String, BTreeMap<String, PolicyFile>>,
    pub forests: BTreeMap<String, ForestModel>,
}

fn sha(text: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(text.as_ref()))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> BundleError + '_ {
    move |source| BundleError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn corrupt(path: &Path, reason: impl ToString) -> BundleError {
    BundleError::Corrupt {
        path: path.display().to_string(),
        reason: reason.to_string(),
    }
}

/// Writes `text` unless the file already holds exactly it.
fn write_if_changed(path: &Path, text: &str) -> Result<(), BundleError> {
    if std::fs::read(path).ok().as_deref() == Some(text.as_bytes()) {
        return Ok(());
    }
    std::fs::write(path, text).map_err(io_err(path))
}

fn device_path(dir: &Path, id: &str) -> PathBuf {
    dir.join("devices").join(format!("{id}.json"))
}

fn policy_path(dir: &Path, fom: &str, device: &str) -> PathBuf {
    dir.join("policies").join(fom).join(format!("{device}.json"))
}

fn forest_path(dir: &Path, fom: &str) -> PathBuf {
    dir.join("forests").join(format!("{fom}.json"))
}

fn load_policy(path: &Path) -> Result<PolicyFile, BundleError> {
    PolicyFile::load(path).map_err(|e| match e {
        PolicyError::Io { source, .. } => io_err(path)(source),
        other => corrupt(path, other),
    })
}

fn load_forest(path: &Path) -> Result<ForestModel, BundleError> {
    ForestModel::load(path).map_err(|e| match e {
        ForestError::Io { source, .. } => io_err(path)(source),
        other => corrupt(path, other),
    })
}

fn file_stamp(path: &Path) -> Result<String, BundleError> {
    Ok(sha(std::fs::read(path).map_err(io_err(path))?))
}

/// Hash of the corpus contents, in order.
pub fn corpus_hash(circuits: &[Circuit]) -> String {
    let joined: Vec<String> = circuits.iter().map(Circuit::content_hash).collect();
    sha(joined.join("\n"))
}

fn read_manifest(dir: &Path) -> Result<Option<Manifest>, BundleError> {
    let path = dir.join(MANIFEST);
    match std::fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| corrupt(&path, e)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_err(&path)(e)),
    }
}

/// Builds or updates the bundle in `dir`. Artifacts whose recorded inputs
/// still match are reused; missing ones and those with changed inputs are
/// rebuilt. Policy changes invalidate the forests of their FoM.
pub fn train_bundle(
    dir: impl AsRef<Path>,
    cfg: &BundleConfig,
) -> Result<(Bundle, TrainSummary), BundleError> {
    let dir = dir.as_ref();
    if cfg.fleet.is_empty() || cfg.foms.is_empty() {
        return Err(BundleError::Config("fleet and FoM list must be nonempty".into()));
    }
    let mut ids: Vec<&str> = cfg.fleet.iter().map(|d| d.id()).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != cfg.fleet.len() {
        return Err(BundleError::Config("device ids must be unique".into()));
    }
    for sub in ["devices", "policies", "forests"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(io_err(&p))?;
    }
    let old = read_manifest(dir)?;
    let old_policies = old.as_ref().map(|m| m.policies.clone()).unwrap_or_default();
    let old_forests = old.as_ref().map(|m| m.forests.clone()).unwrap_or_default();

    let mut devices = BTreeMap::new();
    for d in &cfg.fleet {
        write_if_changed(&device_path(dir, d.id()), &d.to_json())?;
        devices.insert(d.id().to_string(), d.content_hash());
    }

    // Deterministic families repeat across instances; keep one copy so a
    // circuit cannot sit on both sides of the forest's split.
    let mut seen = std::collections::BTreeSet::new();
    let corpus: Vec<Circuit> = generate(&cfg.corpus)?
        .into_iter()
        .map(|e| e.circuit)
        .filter(|c| seen.insert(c.content_hash()))
        .collect();
    let chash = corpus_hash(&corpus);
    let train_text = serde_json::to_string(&cfg.train).expect("config serialises");
    let mut summary = TrainSummary::default();
    let mut policies: BTreeMap<String, BTreeMap<String, PolicyFile>> = BTreeMap::new();
    let mut policy_entries: BTreeMap<String, BTreeMap<String, PolicyEntry>> = BTreeMap::new();

    for fom in &cfg.foms {
        let fom_id = fom.id();
        let fdir = dir.join("policies").join(&fom_id);
        std::fs::create_dir_all(&fdir).map_err(io_err(&fdir))?;
        for d in &cfg.fleet {
            let dhash = &devices[d.id()];
            let inputs = sha(format!(
                "{}\n{fom_id}\n{dhash}\n{chash}\n{train_text}\n{}\n{}",
                catalog_hash(),
                cfg.rl_max_qubits,
                d.id()
            ));
            let path = policy_path(dir, &fom_id, d.id());
            let prior = old_policies
                .get(&fom_id)
                .and_then(|m| m.get(d.id()))
                .filter(|e| e.inputs == inputs && path.exists());
            let policy = match prior {
                Some(entry) => {
                    let p = load_policy(&path)?;
                    if policy_stamp(&p) != entry.stamp {
                        return Err(corrupt(&path, "policy does not match its manifest stamp"));
                    }
                    p
                }
                None => {
                    let fits: Vec<Circuit> = corpus
                        .iter()
                        .filter(|c| c.num_qubits() <= d.num_qubits().min(cfg.rl_max_qubits))
                        .cloned()
                        .collect();
                    log::info!(
                        "training {} policy for {} on {} circuits",
                        fom_id,
                        d.id(),
                        fits.len()
                    );
                    let (p, _) =
                        train_policy(&fits, d, *fom, &cfg.train).map_err(|source| BundleError::Train {
                            device: d.id().to_string(),
                            fom: fom_id.clone(),
                            source,
                        })?;
                    p.save(&path).map_err(|e| corrupt(&path, e))?;
                    summary
                        .policies_trained
                        .push((fom_id.clone(), d.id().to_string()));
                    p
                }
            };
            policy_entries.entry(fom_id.clone()).or_default().insert(
                d.id().to_string(),
                PolicyEntry {
                    device_hash: dhash.clone(),
                    inputs,
                    stamp: policy_stamp(&policy),
                },
            );
            policies
                .entry(fom_id.clone())
                .or_default()
                .insert(d.id().to_string(), policy);
        }
    }

    let mut store = ResultStore::open(dir.join(STORE))?;
    let forest_text = format!("{:?}", cfg.forest);
    let mut forests = BTreeMap::new();
    let mut forest_entries = BTreeMap::new();
    for fom in &cfg.foms {
        let fom_id = fom.id();
        let stamps: Vec<String> = cfg
            .fleet
            .iter()
            .map(|d| {
                format!(
                    "{} {} {}",
                    d.id(),
                    devices[d.id()],
                    policy_entries[&fom_id][d.id()].stamp
                )
            })
            .collect();
        let inputs = sha(format!(
            "{}\n{fom_id}\n{chash}\n{forest_text}\n{}",
            schema_hash(),
            stamps.join("\n")
        ));
        let path = forest_path(dir, &fom_id);
        // Labels depend on the policies, so any retrained policy retrains
        // its FoM's forest even when it came out identical.
        let retrained = summary.policies_trained.iter().any(|(f, _)| *f == fom_id);
        let prior = old_forests
            .get(&fom_id)
            .filter(|e| !retrained && e.inputs == inputs && path.exists());
        let (model, entry) = match prior {
            Some(entry) => {
                if file_stamp(&path)? != entry.stamp {
                    return Err(corrupt(&path, "forest does not match its manifest stamp"));
                }
                (load_forest(&path)?, entry.clone())
            }
            None => {
                let (samples, stats) =
                    generate_labels(&corpus, &cfg.fleet, &policies[&fom_id], *fom, &mut store)?;
                summary.label_compiles += stats.compiled;
                summary.label_reuses += stats.reused;
                log::info!(
                    "{fom_id}: {} labelled samples ({} compiles, {} reused)",
                    samples.len(),
                    stats.compiled,
                    stats.reused
                );
                let (model, report) =
                    train_forest(&samples, &cfg.fleet, &fom_id, &cfg.forest).map_err(|source| {
                        BundleError::Forest {
                            fom: fom_id.clone(),
                            source,
                        }
                    })?;
                model.save(&path).map_err(|e| corrupt(&path, e))?;
                summary.forests_trained.push(fom_id.clone());
                summary
                    .held_out
                    .insert(fom_id.clone(), report.test_hashes.clone());
                let entry = ForestEntry {
                    inputs,
                    stamp: file_stamp(&path)?,
                    samples: samples.len(),
                    hyper: report.hyper,
                    top1: report.top1,
                    top3: report.top3,
                    top3_score: report.top3_score,
                };
                (model, entry)
            }
        };
        forests.insert(fom_id.clone(), model);
        forest_entries.insert(fom_id, entry);
    }

    let manifest = Manifest {
        format_version: BUNDLE_FORMAT_VERSION,
        catalog_hash: catalog_hash(),
        schema_hash: schema_hash(),
        corpus: cfg.corpus.clone(),
        corpus_hash: chash,
        foms: cfg.foms.iter().map(FigureOfMerit::id).collect(),
        devices,
        policies: policy_entries,
        forests: forest_entries,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    write_if_changed(&dir.join(MANIFEST), &text)?;
    let mut fleet = cfg.fleet.clone();
    fleet.sort_by(|a, b| a.id().cmp(b.id()));
    let bundle = Bundle {
        dir: dir.to_path_buf(),
        manifest,
        fleet,
        policies,
        forests,
    };
    Ok((bundle, summary))
}

impl Bundle {
    /// Loads a bundle, checking every artifact against its manifest stamp.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, BundleError> {
        let dir = dir.as_ref();
        let manifest = read_manifest(dir)?.ok_or_else(|| BundleError::Missing {
            what: format!("manifest in {}", dir.display()),
        })?;
        let mpath = dir.join(MANIFEST);
        if manifest.format_version != BUNDLE_FORMAT_VERSION {
            return Err(corrupt(
                &mpath,
                format!("unsupported format version {}", manifest.format_version),
            ));
        }
        if manifest.catalog_hash != catalog_hash() {
            return Err(corrupt(&mpath, "pass catalog has changed since training"));
        }
        if manifest.schema_hash != schema_hash() {
            return Err(corrupt(&mpath, "feature schema has changed since training"));
        }
        let mut fleet = Vec::new();
        for (id, hash) in &manifest.devices {
            let path = device_path(dir, id);
            let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
            let d = DeviceModel::from_json(&text).map_err(|e| corrupt(&path, e))?;
            if d.id() != id || &d.content_hash() != hash {
                return Err(corrupt(&path, "device does not match its manifest stamp"));
            }
            fleet.push(d);
        }
        let mut policies = BTreeMap::new();
        let mut forests = BTreeMap::new();
        for fom in &manifest.foms {
            let entries = manifest.policies.get(fom).ok_or_else(|| BundleError::Missing {
                what: format!("policies for {fom}"),
            })?;
            let mut per = BTreeMap::new();
            for id in manifest.devices.keys() {
                let entry = entries.get(id).ok_or_else(|| BundleError::Missing {
                    what: format!("policy for {id}/{fom}"),
                })?;
                let path = policy_path(dir, fom, id);
                let p = load_policy(&path)?;
                if policy_stamp(&p) != entry.stamp {
                    return Err(corrupt(&path, "policy does not match its manifest stamp"));
                }
                per.insert(id.clone(), p);
            }
            policies.insert(fom.clone(), per);
            let entry = manifest.forests.get(fom).ok_or_else(|| BundleError::Missing {
                what: format!("forest for {fom}"),
            })?;
            let path = forest_path(dir, fom);
            if file_stamp(&path)? != entry.stamp {
                return Err(corrupt(&path, "forest does not match its manifest stamp"));
            }
            forests.insert(fom.clone(), load_forest(&path)?);
        }
        Ok(Bundle {
            dir: dir.to_path_buf(),
            manifest,
            fleet,
            policies,
            forests,
        })
    }

    pub fn device(&self, id: &str) -> Option<&DeviceModel> {
        self.fleet.iter().find(|d| d.id() == id)
    }

    pub fn policy(&self, fom: &FigureOfMerit, device: &str) -> Option<&PolicyFile> {
        self.policies.get(&fom.id())?.get(device)
    }

    pub fn forest(&self, fom: &FigureOfMerit) -> Option<&ForestModel> {
        self.forests.get(&fom.id())
    }

    /// Largest roster device; ties go to the lower id.
    pub fn largest_device(&self) -> &DeviceModel {
        self.fleet
            .iter()
            .max_by(|a, b| a.num_qubits().cmp(&b.num_qubits()).then(b.id().cmp(a.id())))
            .expect("roster is nonempty")
    }
}
