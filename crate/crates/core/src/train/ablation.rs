//! Four-way comparison of the transfer variants on one dataset.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::Result;
use crate::exec::Exec;
use crate::model::DaaMode;
use crate::train::{evaluate, sig6, train, TrainConfig};

/// Row label used in ablation tables.
pub fn row_label(mode: DaaMode) -> &'static str {
    match mode {
        DaaMode::None => "w/o DAA",
        DaaMode::SingleTemplate => "single channel",
        DaaMode::MultiTemplate => "multi-channel",
        DaaMode::Binary => "Binary mapping",
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRun {
    pub seed: u64,
    pub mae: f64,
    pub ca7: f64,
    pub final_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub daa_mode: DaaMode,
    pub runs: Vec<AblationRun>,
    pub mean_mae: f64,
    pub mean_ca7: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub seeds: Vec<u64>,
    pub interval: usize,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, mode: DaaMode) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.daa_mode == mode)
    }
}

/// Trains and evaluates every mode once per seed. Template rows draw their
/// templates from the run's seed, so each seed is a fresh template draw.
pub fn run_ablation(
    train_set: &Dataset,
    test_set: &Dataset,
    base: &TrainConfig,
    seeds: &[u64],
    exec: Exec,
) -> Result<AblationTable> {
    let interval = 1;
    let mut rows = Vec::with_capacity(DaaMode::ALL.len());
    for mode in DaaMode::ALL {
        let mut runs = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let cfg = TrainConfig {
                seed,
                daa_mode: mode,
                ..base.clone()
            };
            let out = train(&cfg, train_set, exec)?;
            let report = evaluate(&out.model, test_set, &[interval], exec)?;
            log::info!(
                "ablation {:<15} seed {seed}: mae {:.3} ({:.0}s)",
                row_label(mode),
                report.mae,
                out.seconds
            );
            runs.push(AblationRun {
                seed,
                mae: report.mae,
                ca7: report.ca["7"],
                final_loss: sig6(out.history.last().map_or(f64::NAN, |h| h.loss)),
            });
        }
        let k = runs.len().max(1) as f64;
        rows.push(AblationRow {
            label: row_label(mode).to_string(),
            daa_mode: mode,
            mean_mae: sig6(runs.iter().map(|r| r.mae).sum::<f64>() / k),
            mean_ca7: sig6(runs.iter().map(|r| r.ca7).sum::<f64>() / k),
            runs,
        });
    }
    Ok(AblationTable {
        seeds: seeds.to_vec(),
        interval,
        rows,
    })
}
