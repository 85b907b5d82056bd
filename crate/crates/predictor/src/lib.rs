//! Predict-then-compile pipeline: trained bundles, the benchmark harness and
//! the analysis reports.

pub mod bench;
pub mod bundle;
pub mod inputs;
pub mod pipeline;
pub mod reports;

pub use bench::{run_benchmarks, BenchmarkReport, BenchmarkRow, BenchmarkSummary};
pub use bundle::{train_bundle, Bundle, BundleConfig, BundleError, Manifest, TrainSummary};
pub use inputs::{load_fleet, read_qasm_file, read_qasm_tree, write_corpus_tree, InputError};
pub use pipeline::{compile_on, predict_and_compile, PipelineError, Prediction};
pub use reports::{
    device_distribution_report, fom_cross_comparison, isolated_evaluations, CrossTable, DistributionReport,
    IsolatedMode, IsolatedReport,
};
