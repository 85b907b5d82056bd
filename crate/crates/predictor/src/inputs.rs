//! Reading circuits and fleets from disk and writing generated corpora.

use std::path::{Path, PathBuf};

use qpredict_core::corpus::CorpusEntry;
use qpredict_core::device::{default_fleet, DeviceModel};
use qpredict_core::qasm::{parse_qasm, serialize_qasm, QasmError};
use qpredict_core::{Circuit, DeviceError};

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{source}")]
    Qasm { path: String, source: QasmError },
    #[error("{path}: {source}")]
    Device { path: String, source: DeviceError },
    #[error("{0} contains no {1} files")]
    Empty(String, &'static str),
    #[error("device id {0} appears twice in the fleet")]
    DuplicateDevice(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> InputError + '_ {
    move |source| InputError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_qasm_file(path: impl AsRef<Path>) -> Result<Circuit, InputError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_qasm(&text).map_err(|source| InputError::Qasm {
        path: path.display().to_string(),
        source,
    })
}

/// Files under `dir` with the given extension, recursively, in path order.
fn files_with_extension(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, InputError> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(io_err(&d))? {
            let path = entry.map_err(io_err(&d))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == ext) {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Every `.qasm` file under `dir`, named by its path relative to `dir`
/// without the extension.
pub fn read_qasm_tree(dir: impl AsRef<Path>) -> Result<Vec<(String, Circuit)>, InputError> {
    let dir = dir.as_ref();
    files_with_extension(dir, "qasm")?
        .into_iter()
        .map(|p| {
            let rel = p.strip_prefix(dir).unwrap_or(&p).with_extension("");
            let name = rel.to_string_lossy().replace('\\', "/");
            Ok((name, read_qasm_file(&p)?))
        })
        .collect()
}

/// Writes each entry to `dir/<family>/<n>q/<name>.qasm`. Returns the number
/// of files written.
pub fn write_corpus_tree(dir: impl AsRef<Path>, entries: &[CorpusEntry]) -> Result<usize, InputError> {
    let dir = dir.as_ref();
    for e in entries {
        let sub = dir
            .join(e.family.name())
            .join(format!("{}q", e.circuit.num_qubits()));
        std::fs::create_dir_all(&sub).map_err(io_err(&sub))?;
        let path = sub.join(format!("{}.qasm", e.name));
        std::fs::write(&path, serialize_qasm(&e.circuit)).map_err(io_err(&path))?;
    }
    Ok(entries.len())
}

/// `default` names the built-in seven-device fleet; anything else is a
/// directory of device JSON files.
pub fn load_fleet(spec: &str) -> Result<Vec<DeviceModel>, InputError> {
    if spec == "default" {
        return Ok(default_fleet());
    }
    let dir = Path::new(spec);
    let files = files_with_extension(dir, "json")?;
    if files.is_empty() {
        return Err(InputError::Empty(spec.to_string(), "device"));
    }
    let mut fleet: Vec<DeviceModel> = Vec::new();
    for p in files {
        let text = std::fs::read_to_string(&p).map_err(io_err(&p))?;
        let d = DeviceModel::from_json(&text).map_err(|source| InputError::Device {
            path: p.display().to_string(),
            source,
        })?;
        if fleet.iter().any(|o| o.id() == d.id()) {
            return Err(InputError::DuplicateDevice(d.id().to_string()));
        }
        fleet.push(d);
    }
    Ok(fleet)
}
