use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::model::DaaModel;
use crate::nn::Scalar;
use crate::train::sig6;

/// `age,s,t` rows for all 100 style ages.
pub fn st_csv<T: Scalar>(model: &DaaModel<T>) -> Result<String> {
    let (s, t) = model.style_values()?;
    let mut out = String::from("age,s,t\n");
    for (age, (s, t)) in s.iter().zip(&t).enumerate() {
        writeln!(out, "{age},{},{}", sig6(*s), sig6(*t)).expect("write to string");
    }
    Ok(out)
}

pub fn export_st<T: Scalar>(model: &DaaModel<T>, path: &Path) -> Result<()> {
    std::fs::write(path, st_csv(model)?)?;
    Ok(())
}

/// Least-squares slope of `y` against `x`.
pub fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
