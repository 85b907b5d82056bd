//! Analysis reports: FoM cross-comparison, device distribution and the
//! isolated evaluations of the two learned components.

use std::collections::BTreeMap;
use std::path::Path;

use qpredict_core::fom::FigureOfMerit;
use qpredict_core::passes::{baseline_pipeline, BaselineLevel};
use qpredict_core::Circuit;
use qpredict_rl::compile::CompileMode;
use qpredict_rl::{compile_with_policy, CompileError};
use qpredict_select::rank_by_score;
use serde::Serialize;

use crate::bundle::Bundle;
use crate::pipeline::{compile_on, predict_and_compile, PipelineError};

/// Cell `(i, j)` is the mean score under `foms[j]` of the pipeline trained
/// for `foms[i]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossTable {
    pub foms: Vec<String>,
    pub cells: Vec<Vec<f64>>,
    /// Circuits every slot could compile.
    pub circuits: usize,
}

impl CrossTable {
    /// Each diagonal cell strictly exceeds every other cell in its column.
    pub fn diagonal_dominates(&self) -> bool {
        let n = self.foms.len();
        (0..n).all(|j| (0..n).all(|i| i == j || self.cells[j][j] > self.cells[i][j]))
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["trained_for".to_string()];
        header.extend(self.foms.iter().map(|f| format!("scored_{f}")));
        w.write_record(&header).expect("in-memory write");
        for (f, row) in self.foms.iter().zip(&self.cells) {
            let mut rec = vec![f.clone()];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Runs the pipeline of each `(bundle, fom)` slot on the corpus and scores
/// every result under every slot's FoM on the device it was compiled for.
pub fn fom_cross_comparison(
    corpus: &[(String, Circuit)],
    slots: &[(&Bundle, FigureOfMerit)],
) -> Result<CrossTable, PipelineError> {
    let n = slots.len();
    let mut sums = vec![vec![0.0; n]; n];
    let mut circuits = 0;
    'circuits: for (_, c) in corpus {
        let mut rows = Vec::with_capacity(n);
        for (bundle, fom) in slots {
            match predict_and_compile(c, bundle, *fom) {
                Ok(p) => {
                    let d = bundle.device(&p.device_id).expect("predicted a roster device");
                    rows.push(
                        slots
                            .iter()
                            .map(|(_, g)| g.score(&p.circuit, d, &p.mapping))
                            .collect::<Vec<f64>>(),
                    );
                }
                Err(PipelineError::Predict(qpredict_select::PredictError::NoFittingDevice { .. })) => {
                    continue 'circuits
                }
                Err(e) => return Err(e),
            }
        }
        for (i, row) in rows.iter().enumerate() {
            for (j, s) in row.iter().enumerate() {
                sums[i][j] += s;
            }
        }
        circuits += 1;
    }
    let cells = sums
        .into_iter()
        .map(|r| r.into_iter().map(|s| s / circuits.max(1) as f64).collect())
        .collect();
    Ok(CrossTable {
        foms: slots.iter().map(|(_, f)| f.id()).collect(),
        cells,
        circuits,
    })
}

/// For each number of fitting devices, how often each device was best.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DistributionReport {
    pub fom: String,
    pub groups: BTreeMap<usize, BTreeMap<String, usize>>,
}

impl DistributionReport {
    /// Share of the most frequent device in each group.
    pub fn concentration(&self) -> BTreeMap<usize, f64> {
        self.groups
            .iter()
            .map(|(&k, counts)| {
                let total: usize = counts.values().sum();
                let top = counts.values().copied().max().unwrap_or(0);
                (k, top as f64 / total.max(1) as f64)
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["fitting_devices", "device", "best_count"])
            .expect("in-memory write");
        for (k, counts) in &self.groups {
            for (d, n) in counts {
                w.write_record([k.to_string(), d.clone(), n.to_string()])
                    .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Compiles each benchmark on every fitting device with its policy and
/// records the best device, grouped by how many devices fit.
pub fn device_distribution_report(
    corpus: &[(String, Circuit)],
    bundle: &Bundle,
    fom: FigureOfMerit,
) -> Result<DistributionReport, PipelineError> {
    let mut report = DistributionReport {
        fom: fom.id(),
        ..Default::default()
    };
    for (_, c) in corpus {
        let mut scored = Vec::new();
        for d in bundle.fleet.iter().filter(|d| c.num_qubits() <= d.num_qubits()) {
            let policy = bundle
                .policy(&fom, d.id())
                .ok_or_else(|| PipelineError::UnknownFom(fom.id()))?;
            let out = compile_with_policy(c, policy, d, CompileMode::Greedy)?;
            scored.push((d.id(), d.num_qubits(), out.score));
        }
        if scored.is_empty() {
            continue;
        }
        let fits = scored.len();
        let best = rank_by_score(scored).remove(0).0;
        *report.groups.entry(fits).or_default().entry(best).or_default() += 1;
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum IsolatedMode {
    /// Baselines and the policy all on the largest device.
    FixedDevice,
    /// Baselines and the policy on the predicted device.
    FixedCompiler,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsolatedRow {
    pub name: String,
    pub device: String,
    pub pipeline: f64,
    pub l1: f64,
    pub l2: f64,
    pub rl: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsolatedReport {
    pub mode: IsolatedMode,
    pub fom: String,
    pub rows: Vec<IsolatedRow>,
    pub skipped: Vec<String>,
}

impl IsolatedReport {
    /// Fraction of rows where the full pipeline is at least the given
    /// column.
    pub fn pipeline_at_least(&self, col: impl Fn(&IsolatedRow) -> f64) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| r.pipeline >= col(r)).count() as f64 / self.rows.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["benchmark", "device", "pipeline", "l1", "l2", "rl"])
            .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.name.clone(),
                r.device.clone(),
                r.pipeline.to_string(),
                r.l1.to_string(),
                r.l2.to_string(),
                r.rl.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

pub fn isolated_evaluations(
    corpus: &[(String, Circuit)],
    bundle: &Bundle,
    fom: FigureOfMerit,
    mode: IsolatedMode,
) -> Result<IsolatedReport, PipelineError> {
    let mut report = IsolatedReport {
        mode,
        fom: fom.id(),
        rows: Vec::new(),
        skipped: Vec::new(),
    };
    for (name, c) in corpus {
        let full = match predict_and_compile(c, bundle, fom) {
            Ok(p) => p,
            Err(PipelineError::Predict(qpredict_select::PredictError::NoFittingDevice { .. })) => {
                report.skipped.push(name.clone());
                continue;
            }
            Err(e) => return Err(e),
        };
        let device = match mode {
            IsolatedMode::FixedDevice => bundle.largest_device().id().to_string(),
            IsolatedMode::FixedCompiler => full.device_id.clone(),
        };
        let d = bundle.device(&device).expect("roster device");
        if c.num_qubits() > d.num_qubits() {
            report.skipped.push(name.clone());
            continue;
        }
        let level = |l: BaselineLevel| -> Result<f64, PipelineError> {
            let (compiled, ms) = baseline_pipeline(c, d, l, 0).map_err(CompileError::from)?;
            Ok(fom.score(&compiled, d, &ms))
        };
        let rl = match mode {
            IsolatedMode::FixedCompiler => full.score,
            IsolatedMode::FixedDevice => compile_on(c, bundle, fom, &device)?.score,
        };
        report.rows.push(IsolatedRow {
            name: name.clone(),
            device,
            pipeline: full.score,
            l1: level(BaselineLevel::L1)?,
            l2: level(BaselineLevel::L2)?,
            rl,
        });
    }
    Ok(report)
}

/// Writes `text` to `dir/name`, creating `dir`.
pub fn write_report(dir: &Path, name: &str, text: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), text)
}
