//! Append-only record of compile results, one JSON object per line.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Identifies one compile. `policy_stamp` is a hash of the policy file, so
/// retraining a policy invalidates its earlier results.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StoreKey {
    pub circuit_hash: String,
    pub device_id: String,
    /// Content hash of the device model, calibration included.
    pub device_hash: String,
    pub fom_id: String,
    pub catalog_hash: String,
    pub policy_stamp: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreRecord {
    #[serde(flatten)]
    pub key: StoreKey,
    pub score: f64,
    pub pass_log: Vec<String>,
    pub used_fallback: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("cannot access result store {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("corrupt result store {path}, line {line}: {reason}")]
    Corrupt {
        path: String,
        line: usize,
        reason: String,
    },
}

/// Records are kept in memory and, when the store has a path, appended to
/// its file as they arrive. The first record for a key wins.
#[derive(Debug, Default)]
pub struct ResultStore {
    path: Option<PathBuf>,
    records: Vec<StoreRecord>,
    index: HashMap<StoreKey, usize>,
}

impl ResultStore {
    pub fn in_memory() -> Self {
        ResultStore::default()
    }

    /// Opens `path`, loading any existing records. A missing file is an
    /// empty store.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let shown = path.display().to_string();
        let mut store = ResultStore {
            path: Some(path.clone()),
            ..Default::default()
        };
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(store),
            Err(source) => return Err(StoreError::Io { path: shown, source }),
        };
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| StoreError::Io {
                path: shown.clone(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: StoreRecord = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                path: shown.clone(),
                line: i + 1,
                reason: e.to_string(),
            })?;
            store.remember(rec);
        }
        Ok(store)
    }

    fn remember(&mut self, rec: StoreRecord) -> bool {
        if self.index.contains_key(&rec.key) {
            return false;
        }
        self.index.insert(rec.key.clone(), self.records.len());
        self.records.push(rec);
        true
    }

    pub fn get(&self, key: &StoreKey) -> Option<&StoreRecord> {
        self.index.get(key).map(|&i| &self.records[i])
    }

    /// Adds `rec` unless its key is present. Returns whether it was added.
    pub fn insert(&mut self, rec: StoreRecord) -> Result<bool, StoreError> {
        if self.index.contains_key(&rec.key) {
            return Ok(false);
        }
        if let Some(path) = &self.path {
            let io = |source| StoreError::Io {
                path: path.display().to_string(),
                source,
            };
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(io)?;
            let line = serde_json::to_string(&rec).expect("record serialises");
            writeln!(f, "{line}").map_err(io)?;
        }
        Ok(self.remember(rec))
    }

    pub fn records(&self) -> &[StoreRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(c: &str, score: f64) -> StoreRecord {
        StoreRecord {
            key: StoreKey {
                circuit_hash: c.into(),
                device_id: "sc-8q".into(),
                device_hash: "ef".into(),
                fom_id: "expected_fidelity".into(),
                catalog_hash: "ab".into(),
                policy_stamp: "cd".into(),
            },
            score,
            pass_log: vec!["synth_native".into(), "terminate".into()],
            used_fallback: false,
        }
    }

    #[test]
    fn records_round_trip_through_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.ndjson");
        let mut s = ResultStore::open(&path).unwrap();
        assert!(s.is_empty());
        assert!(s.insert(rec("a", 0.1 + 0.2)).unwrap());
        assert!(s.insert(rec("b", 1.0 / 3.0)).unwrap());
        assert!(!s.insert(rec("a", 0.5)).unwrap());
        let back = ResultStore::open(&path).unwrap();
        assert_eq!(back.records(), s.records());
        assert_eq!(back.get(&rec("a", 0.0).key).unwrap().score, 0.1 + 0.2);
    }

    #[test]
    fn corrupt_lines_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.ndjson");
        std::fs::write(
            &path,
            format!("{}\n{{oops\n", serde_json::to_string(&rec("a", 0.5)).unwrap()),
        )
        .unwrap();
        assert!(matches!(
            ResultStore::open(&path),
            Err(StoreError::Corrupt { line: 2, .. })
        ));
    }
}
