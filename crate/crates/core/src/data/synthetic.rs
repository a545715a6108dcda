//! Procedural "aging texture" images. Each image is a smooth random field
//! plus an oriented sinusoid whose frequency grows with age, renormalized so
//! its global mean rises and its global std falls linearly with age.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::model::NUM_AGES;
use crate::nn::Tensor;
use crate::rng::{stream_rng, streams};

pub const IMAGE_CHANNELS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub image_size: usize,
    /// Target mean `mean_base + mean_slope * age`.
    pub mean_base: f64,
    pub mean_slope: f64,
    /// Target std `max(std_base - std_slope * age, std_floor)`.
    pub std_base: f64,
    pub std_slope: f64,
    pub std_floor: f64,
    /// Texture frequency is `base_freq * (1 + texture_freq_gain * age)`
    /// cycles per image width.
    pub texture_freq_gain: f64,
    pub base_freq: f64,
    /// Weight of the texture relative to the smooth field before
    /// renormalization.
    pub texture_weight: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_train: 2000,
            n_test: 500,
            image_size: 128,
            mean_base: 0.2,
            mean_slope: 0.006,
            std_base: 0.3,
            std_slope: 0.002,
            std_floor: 0.05,
            texture_freq_gain: 0.02,
            base_freq: 4.0,
            texture_weight: 0.6,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive, got {v}")))
            }
        };
        positive("std_floor", self.std_floor)?;
        positive("mean_slope", self.mean_slope)?;
        positive("std_slope", self.std_slope)?;
        positive("base_freq", self.base_freq)?;
        if self.std_base < self.std_floor {
            return Err(Error::config(
                "std_floor",
                format!("floor {} exceeds std_base {}", self.std_floor, self.std_base),
            ));
        }
        for (key, v) in [
            ("mean_base", self.mean_base),
            ("texture_freq_gain", self.texture_freq_gain),
            ("texture_weight", self.texture_weight),
        ] {
            if !v.is_finite() || (key != "mean_base" && v < 0.0) {
                return Err(Error::config(key, format!("invalid value {v}")));
            }
        }
        if self.image_size < 8 {
            return Err(Error::config("image_size", "must be at least 8"));
        }
        Ok(())
    }

    pub fn target_mean(&self, age: usize) -> f64 {
        self.mean_base + self.mean_slope * age as f64
    }

    pub fn target_std(&self, age: usize) -> f64 {
        (self.std_base - self.std_slope * age as f64).max(self.std_floor)
    }

    pub fn texture_freq(&self, age: usize) -> f64 {
        self.base_freq * (1.0 + self.texture_freq_gain * age as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn stream(self) -> u64 {
        match self {
            Split::Train => streams::DATA_TRAIN,
            Split::Test => streams::DATA_TEST,
        }
    }
}

/// Sample `index` of a split; a pure function of `(spec, split, index)`.
pub fn gen_sample(spec: &SyntheticSpec, split: Split, index: usize) -> Sample {
    let mut rng = stream_rng(spec.seed, split.stream(), index as u64);
    let age = rng.random_range(0..NUM_AGES);
    Sample {
        index,
        age,
        image: render(spec, age, &mut rng),
    }
}

fn render<R: Rng>(spec: &SyntheticSpec, age: usize, rng: &mut R) -> Tensor<f32> {
    let s = spec.image_size;
    let inv = 1.0 / s as f64;

    // smooth field: a few low-frequency waves, shared across channels with
    // per-channel gains
    let waves: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(0.3..1.0),
            )
        })
        .collect();
    let gains: Vec<f64> = (0..IMAGE_CHANNELS).map(|_| rng.random_range(0.7..1.3)).collect();
    let theta = rng.random_range(0.0..PI);
    let phase = rng.random_range(0.0..2.0 * PI);
    let freq = spec.texture_freq(age);
    let (ct, st) = (theta.cos(), theta.sin());

    let plane = s * s;
    let mut raw = vec![0f64; IMAGE_CHANNELS * plane];
    for y in 0..s {
        for x in 0..s {
            let (u, v) = (x as f64 * inv, y as f64 * inv);
            let field: f64 = waves
                .iter()
                .map(|&(fx, fy, ph, amp)| amp * (2.0 * PI * (fx * u + fy * v) + ph).cos())
                .sum();
            let tex = (2.0 * PI * freq * (ct * u + st * v) + phase).sin();
            for (c, &gain) in gains.iter().enumerate() {
                raw[c * plane + y * s + x] = gain * field + spec.texture_weight * tex;
            }
        }
    }

    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let std = (raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let (tm, ts) = (spec.target_mean(age), spec.target_std(age));
    let k = if std > 0.0 { ts / std } else { 0.0 };
    let data = raw.iter().map(|&v| ((v - mean) * k + tm) as f32).collect();
    Tensor::new(&[IMAGE_CHANNELS, s, s], data).expect("image shape")
}

pub fn gen_split(spec: &SyntheticSpec, split: Split, exec: Exec) -> Result<Dataset> {
    spec.validate()?;
    let n = match split {
        Split::Train => spec.n_train,
        Split::Test => spec.n_test,
    };
    let samples = exec::map_range(exec, n, |i| gen_sample(spec, split, i));
    Ok(Dataset::from_samples(samples))
}

/// `(train, test)` sets.
pub fn gen_synthetic(spec: &SyntheticSpec, exec: Exec) -> Result<(Dataset, Dataset)> {
    Ok((gen_split(spec, Split::Train, exec)?, gen_split(spec, Split::Test, exec)?))
}

/// Mean and population std over every pixel of an image.
pub fn image_stats(image: &Tensor<f32>) -> (f64, f64) {
    let d = image.data();
    let n = d.len() as f64;
    let mean = d.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = d.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            n_train: 6,
            n_test: 3,
            image_size: 32,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn pure_per_index() {
        let spec = small();
        let a = gen_sample(&spec, Split::Train, 4);
        let b = gen_sample(&spec, Split::Train, 4);
        assert_eq!(a, b);
        assert_ne!(gen_sample(&spec, Split::Test, 4).image, a.image);
    }

    #[test]
    fn hits_targets() {
        let spec = small();
        for i in 0..10 {
            let s = gen_sample(&spec, Split::Train, i);
            let (m, sd) = image_stats(&s.image);
            assert!((m - spec.target_mean(s.age)).abs() < 1e-3);
            assert!((sd - spec.target_std(s.age)).abs() < 1e-3);
        }
    }

    #[test]
    fn bad_floor() {
        let spec = SyntheticSpec {
            std_floor: 0.0,
            ..small()
        };
        match spec.validate() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "std_floor"),
            other => panic!("{other:?}"),
        }
    }
}
