//! MAE, CA(n) and the evaluation report.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{style_ages, DaaModel, DecodePath};
use crate::nn::Scalar;

/// CA thresholds reported by [`evaluate`].
pub const CA_THRESHOLDS: [u32; 3] = [3, 5, 7];

/// Rounds to six significant digits; every float written to reports and
/// CSV files goes through here.
pub fn sig6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check(pred, truth)?;
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

/// Percentage of samples with absolute error strictly below `n`.
pub fn cumulative_accuracy(pred: &[f64], truth: &[f64], n: f64) -> Result<f64> {
    check(pred, truth)?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| (*p - *t).abs() < n).count();
    Ok(100.0 * hits as f64 / pred.len() as f64)
}

fn check(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.is_empty() {
        return Err(Error::EmptyDataset("test set"));
    }
    if pred.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

pub fn predict_dataset<T: Scalar>(
    model: &DaaModel<T>,
    data: &Dataset,
    interval: usize,
    path: DecodePath,
    exec: Exec,
) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("test set"));
    }
    let images: Vec<_> = data.samples.iter().map(|s| s.image.cast::<T>()).collect();
    let refs: Vec<_> = images.iter().collect();
    model.predict_batch(&refs, interval, path, exec)
}

fn labels(data: &Dataset) -> Vec<f64> {
    data.samples.iter().map(|s| s.age as f64).collect()
}

pub fn evaluate_mae<T: Scalar>(model: &DaaModel<T>, data: &Dataset, interval: usize, exec: Exec) -> Result<f64> {
    let pred = predict_dataset(model, data, interval, DecodePath::Explicit, exec)?;
    mae(&pred, &labels(data))
}

pub fn evaluate_ca<T: Scalar>(
    model: &DaaModel<T>,
    data: &Dataset,
    n: f64,
    interval: usize,
    exec: Exec,
) -> Result<f64> {
    let pred = predict_dataset(model, data, interval, DecodePath::Explicit, exec)?;
    cumulative_accuracy(&pred, &labels(data), n)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalResult {
    pub interval: usize,
    /// Number of style ages used.
    pub k: usize,
    pub mae: f64,
    /// CA(n) in percent, keyed by `n`.
    pub ca: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    /// Wall-clock seconds per stage, e.g. `"eval.interval_1"`.
    pub seconds: BTreeMap<String, f64>,
}

impl Timings {
    pub fn record(&mut self, stage: &str, secs: f64) {
        self.seconds.insert(stage.to_string(), sig6(secs));
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub daa_mode: String,
    pub samples: usize,
    /// MAE and CA at the first requested interval.
    pub mae: f64,
    pub ca: BTreeMap<String, f64>,
    pub intervals: Vec<IntervalResult>,
    /// Kept out of the serialized report so reports are reproducible; the
    /// command line tool writes them to a separate file.
    #[serde(skip)]
    pub timings: Timings,
}

pub fn interval_result(pred: &[f64], truth: &[f64], interval: usize) -> Result<IntervalResult> {
    let mut ca = BTreeMap::new();
    for n in CA_THRESHOLDS {
        ca.insert(n.to_string(), sig6(cumulative_accuracy(pred, truth, n as f64)?));
    }
    Ok(IntervalResult {
        interval,
        k: style_ages(interval)?.len(),
        mae: sig6(mae(pred, truth)?),
        ca,
    })
}

/// Evaluates MAE and CA(3, 5, 7) at every interval (a no-DAA model has no
/// style ages, so its single result is reported for each interval).
pub fn evaluate<T: Scalar>(
    model: &DaaModel<T>,
    data: &Dataset,
    intervals: &[usize],
    exec: Exec,
) -> Result<EvalReport> {
    crate::train::validate_intervals(intervals)?;
    let truth = labels(data);
    let mut timings = Timings::default();
    let mut results = Vec::with_capacity(intervals.len());
    for &d in intervals {
        let t = Instant::now();
        let pred = predict_dataset(model, data, d, DecodePath::Explicit, exec)?;
        timings.record(&format!("eval.interval_{d}"), t.elapsed().as_secs_f64());
        let mut r = interval_result(&pred, &truth, d)?;
        if model.mode() == crate::model::DaaMode::None {
            r.k = 0;
        }
        results.push(r);
    }
    Ok(EvalReport {
        daa_mode: model.mode().as_str().to_string(),
        samples: data.len(),
        mae: results[0].mae,
        ca: results[0].ca.clone(),
        intervals: results,
        timings,
    })
}
