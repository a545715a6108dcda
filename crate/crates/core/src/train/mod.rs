//! Training, metrics, the mode ablation, inference timing and style export.

mod ablation;
mod bench;
mod config;
mod export;
mod fit;
mod metrics;

pub use ablation::{row_label, run_ablation, AblationRow, AblationRun, AblationTable};
pub use bench::{bench_inference, device_description, BenchConfig, BenchRow, BenchTable};
pub use config::{validate_intervals, TrainConfig, EVAL_INTERVALS};
pub use export::{export_st, linear_slope, st_csv};
pub use fit::{train, train_model, EpochLog, TrainOutcome};
pub use metrics::{
    cumulative_accuracy, evaluate, evaluate_ca, evaluate_mae, interval_result, mae, predict_dataset, sig6,
    EvalReport, IntervalResult, Timings, CA_THRESHOLDS,
};
