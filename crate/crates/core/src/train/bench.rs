//! Inference timing of the transfer plus decoder, encoder excluded.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{build_delta_stack, style_ages, DaaModel, FeatureMap, TemplateStats};
use crate::nn::{Graph, Scalar, Tensor};
use crate::train::sig6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub interval: usize,
    pub k: usize,
    pub median_ms: f64,
    /// Median absolute deviation of the repetitions.
    pub mad_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    pub reps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub device: String,
    /// The style table is computed once before timing starts.
    pub style_table_precomputed: bool,
    pub encoder_included: bool,
    pub rows: Vec<BenchRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub reps: usize,
    pub warmup: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { reps: 100, warmup: 5 }
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// One timed pass: statistics of `E`, the delta stack at `ages` and the
/// decoder, on a single execution context.
fn transfer_and_decode<T: Scalar>(
    model: &DaaModel<T>,
    styles: &TemplateStats,
    e: &Tensor<T>,
    ages: &[usize],
) -> Result<f64> {
    let mut g = Graph::inference(model.params()).with_exec(Exec::Sequential);
    let ev = g.input(e.clone());
    let fm = FeatureMap::from_features(&mut g, ev, model.config().eps)?;
    let stats = styles.select(&mut g, ages)?;
    let stack = build_delta_stack(&mut g, &fm, stats, ages)?;
    let out = model.decode_stack(&mut g, &stack)?;
    Ok(g.value(out.age).item().as_f64())
}

pub fn bench_inference<T: Scalar>(
    model: &DaaModel<T>,
    image: &Tensor<T>,
    intervals: &[usize],
    cfg: &BenchConfig,
    device: &str,
) -> Result<BenchTable> {
    if cfg.reps == 0 {
        return Err(Error::config("bench_reps", "must be positive"));
    }
    let styles = model.frozen_styles()?;
    let e = {
        let mut g = Graph::inference(model.params()).with_exec(Exec::Sequential);
        let fm = model.encode(&mut g, image)?;
        g.value(fm.e).clone()
    };
    let mut rows = Vec::with_capacity(intervals.len());
    for &d in intervals {
        let ages = style_ages(d)?;
        for _ in 0..cfg.warmup {
            transfer_and_decode(model, &styles, &e, &ages)?;
        }
        let mut ms = Vec::with_capacity(cfg.reps);
        for _ in 0..cfg.reps {
            let t = Instant::now();
            let y = transfer_and_decode(model, &styles, &e, &ages)?;
            ms.push(t.elapsed().as_secs_f64() * 1e3);
            std::hint::black_box(y);
        }
        ms.sort_by(f64::total_cmp);
        let med = median(&ms);
        let mut dev: Vec<f64> = ms.iter().map(|v| (v - med).abs()).collect();
        dev.sort_by(f64::total_cmp);
        rows.push(BenchRow {
            interval: d,
            k: ages.len(),
            median_ms: sig6(med),
            mad_ms: sig6(median(&dev)),
            min_ms: sig6(ms[0]),
            max_ms: sig6(ms[ms.len() - 1]),
            reps: cfg.reps,
        });
    }
    Ok(BenchTable {
        device: device.to_string(),
        style_table_precomputed: true,
        encoder_included: false,
        rows,
    })
}

/// Short description of the host used in benchmark tables.
pub fn device_description(threads: usize) -> String {
    format!("cpu ({} {}), {threads} thread(s)", std::env::consts::OS, std::env::consts::ARCH)
}
