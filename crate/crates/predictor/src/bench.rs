//! Benchmark harness: the pipeline against both baseline levels on every
//! fitting device.

use std::path::Path;

use qpredict_core::fom::FigureOfMerit;
use qpredict_core::passes::{baseline_pipeline, BaselineLevel};
use qpredict_core::Circuit;
use serde::Serialize;

use crate::bundle::Bundle;
use crate::pipeline::predict_and_compile;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaselineScore {
    pub device: String,
    pub level: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkRow {
    pub name: String,
    pub qubits: usize,
    pub device: String,
    pub score: f64,
    /// L1 and L2 on every fitting device.
    pub baselines: Vec<BaselineScore>,
    pub best: f64,
    pub median: f64,
    pub worst: f64,
    /// 1 + number of baselines scoring strictly higher.
    pub rank: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchmarkReport {
    pub fom: String,
    /// Sorted by pipeline score, then name.
    pub rows: Vec<BenchmarkRow>,
    /// Benchmarks where the pipeline and every baseline scored 0.
    pub excluded: Vec<String>,
    pub failures: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchmarkSummary {
    pub fom: String,
    pub rows: usize,
    pub excluded: usize,
    pub failures: usize,
    pub top1: f64,
    pub top3: f64,
    /// Over rows whose best baseline is positive.
    pub max_improvement: f64,
    pub mean_improvement: f64,
}

/// Median of a nonempty slice; even lengths average the middle pair.
pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        (s[m - 1] + s[m]) / 2.0
    }
}

/// Scores of both baseline levels on every bundle device that fits `c`.
pub fn baseline_scores(
    c: &Circuit,
    bundle: &Bundle,
    fom: FigureOfMerit,
) -> Result<Vec<BaselineScore>, String> {
    let mut out = Vec::new();
    for d in bundle.fleet.iter().filter(|d| c.num_qubits() <= d.num_qubits()) {
        for (level, name) in [(BaselineLevel::L1, "L1"), (BaselineLevel::L2, "L2")] {
            let (compiled, ms) =
                baseline_pipeline(c, d, level, 0).map_err(|e| format!("{name} on {}: {e}", d.id()))?;
            out.push(BaselineScore {
                device: d.id().to_string(),
                level: name.to_string(),
                score: fom.score(&compiled, d, &ms),
            });
        }
    }
    Ok(out)
}

pub fn run_benchmarks(corpus: &[(String, Circuit)], bundle: &Bundle, fom: FigureOfMerit) -> BenchmarkReport {
    let mut report = BenchmarkReport {
        fom: fom.id(),
        ..Default::default()
    };
    for (name, c) in corpus {
        let p = match predict_and_compile(c, bundle, fom) {
            Ok(p) => p,
            Err(e) => {
                report.failures.push((name.clone(), e.to_string()));
                continue;
            }
        };
        let baselines = match baseline_scores(c, bundle, fom) {
            Ok(b) => b,
            Err(e) => {
                report.failures.push((name.clone(), e));
                continue;
            }
        };
        let scores: Vec<f64> = baselines.iter().map(|b| b.score).collect();
        if p.score == 0.0 && scores.iter().all(|&s| s == 0.0) {
            report.excluded.push(name.clone());
            continue;
        }
        report.rows.push(BenchmarkRow {
            name: name.clone(),
            qubits: c.num_qubits(),
            device: p.device_id,
            score: p.score,
            best: scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            median: median(&scores),
            worst: scores.iter().copied().fold(f64::INFINITY, f64::min),
            rank: 1 + scores.iter().filter(|&&s| s > p.score).count(),
            baselines,
        });
    }
    report
        .rows
        .sort_by(|a, b| a.score.total_cmp(&b.score).then(a.name.cmp(&b.name)));
    report
}

impl BenchmarkReport {
    /// Fraction of rows ranked within the top `k`.
    pub fn top_k(&self, k: usize) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| r.rank <= k).count() as f64 / self.rows.len() as f64
    }

    /// Pipeline score over the best baseline, for rows with a positive best.
    pub fn improvements(&self) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.best > 0.0)
            .map(|r| r.score / r.best)
            .collect()
    }

    pub fn summary(&self) -> BenchmarkSummary {
        let imp = self.improvements();
        BenchmarkSummary {
            fom: self.fom.clone(),
            rows: self.rows.len(),
            excluded: self.excluded.len(),
            failures: self.failures.len(),
            top1: self.top_k(1),
            top3: self.top_k(3),
            max_improvement: imp.iter().copied().fold(0.0, f64::max),
            mean_improvement: if imp.is_empty() {
                0.0
            } else {
                imp.iter().sum::<f64>() / imp.len() as f64
            },
        }
    }

    /// Plot data, one row per benchmark in score order: the pipeline score
    /// and the best, median and worst baseline.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "benchmark",
            "qubits",
            "device",
            "predictor_score",
            "best_baseline",
            "median_baseline",
            "worst_baseline",
            "rank",
            "baselines",
        ])
        .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.name.clone(),
                r.qubits.to_string(),
                r.device.clone(),
                r.score.to_string(),
                r.best.to_string(),
                r.median.to_string(),
                r.worst.to_string(),
                r.rank.to_string(),
                r.baselines.len().to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// Every baseline score, one row per (benchmark, device, level).
    pub fn baselines_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["benchmark", "device", "level", "score"])
            .expect("in-memory write");
        for r in &self.rows {
            for b in &r.baselines {
                w.write_record([&r.name, &b.device, &b.level, &b.score.to_string()])
                    .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// Writes `<fom>_benchmarks.csv`, `<fom>_baselines.csv` and
    /// `<fom>_summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}_benchmarks.csv", self.fom)), self.to_csv())?;
        std::fs::write(
            dir.join(format!("{}_baselines.csv", self.fom)),
            self.baselines_csv(),
        )?;
        let mut summary = serde_json::to_value(self.summary()).expect("summary serialises");
        summary["excluded_benchmarks"] = serde_json::json!(self.excluded);
        summary["failed_benchmarks"] = serde_json::json!(self.failures);
        std::fs::write(
            dir.join(format!("{}_summary.json", self.fom)),
            serde_json::to_string_pretty(&summary).expect("summary serialises"),
        )
    }
}
