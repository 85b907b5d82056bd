use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use qpredict::reports::write_report;
use qpredict::{
    compile_on, device_distribution_report, fom_cross_comparison, isolated_evaluations, load_fleet,
    predict_and_compile, read_qasm_file, read_qasm_tree, run_benchmarks, train_bundle, write_corpus_tree,
    Bundle, BundleConfig, BundleError, InputError, IsolatedMode, PipelineError, Prediction,
};
use qpredict_core::corpus::{generate, CorpusError, CorpusSpec, Family};
use qpredict_core::fom::{FigureOfMerit, FomError};
use qpredict_core::passes::catalog_listing;
use qpredict_core::qasm::serialize_qasm;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "qpredict",
    version,
    about = "Predict a device for a quantum circuit and compile it there"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a circuit corpus as OpenQASM files under DIR/<family>/<n>q/.
    Corpus {
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated families; defaults to every family but ghz.
        #[arg(long, value_delimiter = ',')]
        families: Vec<Family>,
        #[arg(long, default_value_t = 2)]
        min_qubits: usize,
        #[arg(long, default_value_t = 32)]
        max_qubits: usize,
        #[arg(long, default_value_t = 1)]
        step: usize,
        #[arg(long, default_value_t = 1)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train policies and forests into a bundle directory, reusing whatever
    /// is already up to date.
    Train {
        /// `default` or a directory of device JSON files.
        #[arg(long, default_value = "default")]
        fleet: String,
        /// Figure of merit to train for; repeatable. Defaults to
        /// expected_fidelity and critical_depth.
        #[arg(long)]
        fom: Vec<FigureOfMerit>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Override the number of policy training iterations.
        #[arg(long)]
        iterations: Option<usize>,
        /// Corpus instances per family and size.
        #[arg(long)]
        instances: Option<usize>,
        /// Largest training circuit.
        #[arg(long)]
        max_qubits: Option<usize>,
    },
    /// Predict the best device and compile; prints a JSON summary.
    Predict {
        #[arg(long)]
        qasm: PathBuf,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value = "expected_fidelity")]
        fom: FigureOfMerit,
        /// Also write the compiled circuit here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compile on a given device, or the predicted one; prints OpenQASM.
    Compile {
        #[arg(long)]
        qasm: PathBuf,
        #[arg(long)]
        device: Option<String>,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value = "expected_fidelity")]
        fom: FigureOfMerit,
        /// Write the circuit here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every circuit under a directory against both baselines on every
    /// fitting device.
    Bench {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value = "expected_fidelity")]
        fom: FigureOfMerit,
        #[arg(long)]
        report_dir: PathBuf,
    },
    /// Analysis reports as CSV.
    Report {
        kind: ReportKind,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        bundle: PathBuf,
        /// Ignored by fom-compare, which uses every FoM in the bundle.
        #[arg(long, default_value = "expected_fidelity")]
        fom: FigureOfMerit,
        #[arg(long)]
        report_dir: PathBuf,
    },
    /// List the pass catalog.
    Passes,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    DeviceDistribution,
    IsolatedMl,
    IsolatedRl,
    FomCompare,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
        Err(_) => ExitCode::from(3),
    }
}

/// The error chain, skipping causes already spelled out by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut parts: Vec<String> = Vec::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !parts.last().is_some_and(|p| p.contains(&msg)) {
            parts.push(msg);
        }
    }
    parts.join(": ")
}

/// 2 for bad or missing input data, 3 for anything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    let data = e.chain().any(|c| {
        c.is::<InputError>()
            || c.is::<BundleError>()
            || c.is::<PipelineError>()
            || c.is::<CorpusError>()
            || c.is::<FomError>()
            || c.is::<std::io::Error>()
    });
    if data {
        2
    } else {
        3
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Corpus {
            out,
            families,
            min_qubits,
            max_qubits,
            step,
            instances,
            seed,
        } => {
            let mut spec = CorpusSpec::training(min_qubits, max_qubits, instances, seed);
            spec.step = step;
            if !families.is_empty() {
                spec.training = !families.contains(&Family::Ghz);
                spec.families = families;
            }
            let entries = generate(&spec)?;
            let n = write_corpus_tree(&out, &entries)?;
            println!("{}", json!({"written": n, "dir": out.display().to_string()}));
        }
        Cmd::Train {
            fleet,
            fom,
            seed,
            out,
            iterations,
            instances,
            max_qubits,
        } => {
            let mut cfg = BundleConfig::desk(load_fleet(&fleet)?, seed);
            if !fom.is_empty() {
                cfg.foms = fom;
            }
            if let Some(i) = iterations {
                cfg.train.iterations = i;
            }
            if let Some(i) = instances {
                cfg.corpus.instances = i;
            }
            if let Some(q) = max_qubits {
                cfg.corpus.max_qubits = q;
            }
            let (bundle, summary) = train_bundle(&out, &cfg)?;
            let forests: serde_json::Map<_, _> = bundle
                .manifest
                .forests
                .iter()
                .map(|(f, e)| {
                    (
                        f.clone(),
                        json!({"samples": e.samples, "top1": e.top1, "top3": e.top3, "top3_score": e.top3_score}),
                    )
                })
                .collect();
            println!(
                "{}",
                json!({
                    "bundle": out.display().to_string(),
                    "policies_trained": summary.policies_trained,
                    "forests_trained": summary.forests_trained,
                    "label_compiles": summary.label_compiles,
                    "label_reuses": summary.label_reuses,
                    "forests": forests,
                })
            );
        }
        Cmd::Predict {
            qasm,
            bundle,
            fom,
            out,
        } => {
            let c = read_qasm_file(&qasm)?;
            let b = Bundle::load(&bundle)?;
            let p = predict_and_compile(&c, &b, fom)?;
            if let Some(path) = out {
                write_file(&path, &serialize_qasm(&p.circuit))?;
            }
            println!("{}", summary_json(&p, fom));
        }
        Cmd::Compile {
            qasm,
            device,
            bundle,
            fom,
            out,
        } => {
            let c = read_qasm_file(&qasm)?;
            let b = Bundle::load(&bundle)?;
            let p = match device {
                Some(id) => compile_on(&c, &b, fom, &id)?,
                None => predict_and_compile(&c, &b, fom)?,
            };
            let text = serialize_qasm(&p.circuit);
            match out {
                Some(path) => write_file(&path, &text)?,
                None => print!("{text}"),
            }
            eprintln!("{}", summary_json(&p, fom));
        }
        Cmd::Bench {
            corpus,
            bundle,
            fom,
            report_dir,
        } => {
            let circuits = read_corpus(&corpus)?;
            let b = Bundle::load(&bundle)?;
            let report = run_benchmarks(&circuits, &b, fom);
            report
                .write(&report_dir)
                .with_context(|| format!("writing reports to {}", report_dir.display()))?;
            println!("{}", serde_json::to_string(&report.summary())?);
        }
        Cmd::Report {
            kind,
            corpus,
            bundle,
            fom,
            report_dir,
        } => {
            let circuits = read_corpus(&corpus)?;
            let b = Bundle::load(&bundle)?;
            let (name, text, summary) = match kind {
                ReportKind::DeviceDistribution => {
                    let r = device_distribution_report(&circuits, &b, fom)?;
                    let conc = serde_json::to_value(r.concentration())?;
                    (
                        format!("{}_device_distribution.csv", fom.id()),
                        r.to_csv(),
                        json!({"concentration": conc}),
                    )
                }
                ReportKind::IsolatedMl | ReportKind::IsolatedRl => {
                    let (mode, tag) = match kind {
                        ReportKind::IsolatedRl => (IsolatedMode::FixedDevice, "isolated_rl"),
                        _ => (IsolatedMode::FixedCompiler, "isolated_ml"),
                    };
                    let r = isolated_evaluations(&circuits, &b, fom, mode)?;
                    let summary = json!({
                        "rows": r.rows.len(),
                        "skipped": r.skipped,
                        "pipeline_at_least_l1": r.pipeline_at_least(|x| x.l1),
                        "pipeline_at_least_l2": r.pipeline_at_least(|x| x.l2),
                        "pipeline_at_least_rl": r.pipeline_at_least(|x| x.rl),
                    });
                    (format!("{}_{tag}.csv", fom.id()), r.to_csv(), summary)
                }
                ReportKind::FomCompare => {
                    let foms = b
                        .manifest
                        .foms
                        .iter()
                        .map(|f| f.parse::<FigureOfMerit>())
                        .collect::<Result<Vec<_>, _>>()?;
                    if foms.len() < 2 {
                        bail!(BundleError::Missing {
                            what: "second figure of merit to compare against".into()
                        });
                    }
                    let slots: Vec<_> = foms.iter().map(|f| (&b, *f)).collect();
                    let t = fom_cross_comparison(&circuits, &slots)?;
                    let summary = json!({
                        "foms": t.foms,
                        "cells": t.cells,
                        "circuits": t.circuits,
                        "diagonal_dominates": t.diagonal_dominates(),
                    });
                    ("fom_compare.csv".to_string(), t.to_csv(), summary)
                }
            };
            write_report(&report_dir, &name, &text)
                .with_context(|| format!("writing {}", report_dir.join(&name).display()))?;
            println!("{summary}");
        }
        Cmd::Passes => print!("{}", catalog_listing()),
    }
    Ok(())
}

fn read_corpus(dir: &Path) -> Result<Vec<(String, qpredict_core::Circuit)>> {
    let circuits = read_qasm_tree(dir)?;
    if circuits.is_empty() {
        log::warn!("{} contains no .qasm files", dir.display());
    }
    Ok(circuits)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn summary_json(p: &Prediction, fom: FigureOfMerit) -> serde_json::Value {
    json!({
        "fom": fom.id(),
        "device": p.device_id,
        "ranking": p.ranking,
        "score": p.score,
        "pass_log": p.pass_log,
        "used_fallback": p.used_fallback,
    })
}
