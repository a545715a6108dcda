//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Every key has a default (see [`KEYS`]); unknown keys are rejected so a
//! typo never silently falls back to a default. [`RunConfig::render`] writes
//! the fully resolved configuration back in the same format.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::data::{AugmentConfig, SyntheticSpec};
use crate::error::{Error, Result};
use crate::model::{EncoderConfig, EncoderVariant};
use crate::train::{validate_intervals, BenchConfig, TrainConfig};

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "training seed: initialization, shuffling, augmentation, template draws"),
    ("data_seed", "seed of the synthetic dataset"),
    ("n_train", "number of training samples"),
    ("n_test", "number of test samples"),
    ("image_size", "image side in pixels; also the encoder input size"),
    ("mean_base", "target image mean at age 0"),
    ("mean_slope", "increase of the target image mean per year"),
    ("std_base", "target image std at age 0"),
    ("std_slope", "decrease of the target image std per year"),
    ("std_floor", "lower bound of the target image std"),
    ("texture_freq_gain", "relative growth of the texture frequency per year"),
    ("base_freq", "texture frequency at age 0, cycles per image width"),
    ("texture_weight", "texture amplitude relative to the smooth field"),
    ("epochs", "training epochs"),
    ("batch_size", "samples per optimizer step"),
    ("base_lr", "initial learning rate of the cosine schedule"),
    ("weight_decay", "L2 weight decay"),
    ("encoder", "tiny | c3ae-plain-like | resnet18-like"),
    ("encoder_channels", "output channels of the tiny encoder"),
    ("daa_mode", "none | single-template | multi-template | binary"),
    ("code_norm", "age code normalization: none | column-standardize | scale-to-unit"),
    ("eval_intervals", "comma-separated style-age intervals, each dividing 100"),
    ("augment", "enable training augmentation (true | false)"),
    ("augment_flip_prob", "probability of a horizontal flip"),
    ("augment_scale_range", "scale drawn from [1 - r, 1 + r]"),
    ("augment_rotate_degrees", "rotation drawn from [-r, r] degrees"),
    ("augment_translate_pixels", "shift drawn from [-r, r] pixels per axis"),
    ("out_dir", "run directory"),
    ("data_dir", "directory holding train.daad and test.daad (empty: the run directory)"),
    ("ablation_seeds", "comma-separated seeds of the ablation runs"),
    ("bench_reps", "timed repetitions per interval"),
    ("bench_warmup", "untimed warmup repetitions per interval"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data: SyntheticSpec,
    pub train: TrainConfig,
    pub encoder: EncoderVariant,
    pub encoder_channels: usize,
    pub out_dir: PathBuf,
    pub data_dir: Option<PathBuf>,
    pub ablation_seeds: Vec<u64>,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cfg = Self {
            data: SyntheticSpec::default(),
            train: TrainConfig::default(),
            encoder: EncoderVariant::Tiny,
            encoder_channels: 32,
            out_dir: PathBuf::from("runs/desk"),
            data_dir: None,
            ablation_seeds: vec![0, 1, 2],
            bench: BenchConfig::default(),
        };
        cfg.sync_encoder();
        cfg
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| parse_num(key, v))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("expected true or false, got `{value}`"))),
    }
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn encoder_name(v: EncoderVariant) -> &'static str {
    match v {
        EncoderVariant::Tiny | EncoderVariant::Custom => "tiny",
        EncoderVariant::Resnet18Like => "resnet18-like",
        EncoderVariant::C3aePlainLike => "c3ae-plain-like",
    }
}

fn code_norm_name(n: crate::model::CodeNorm) -> &'static str {
    use crate::model::CodeNorm;
    match n {
        CodeNorm::None => "none",
        CodeNorm::ColumnStandardize => "column-standardize",
        CodeNorm::ScaleUnit => "scale-to-unit",
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}", no + 1), format!("expected `key = value`, got `{line}`"))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Applies one setting. The encoder input follows `image_size`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let d = &mut self.data;
        let t = &mut self.train;
        let a = &mut t.augment;
        match key {
            "seed" => t.seed = parse_num(key, value)?,
            "data_seed" => d.seed = parse_num(key, value)?,
            "n_train" => d.n_train = parse_num(key, value)?,
            "n_test" => d.n_test = parse_num(key, value)?,
            "image_size" => d.image_size = parse_num(key, value)?,
            "mean_base" => d.mean_base = parse_num(key, value)?,
            "mean_slope" => d.mean_slope = parse_num(key, value)?,
            "std_base" => d.std_base = parse_num(key, value)?,
            "std_slope" => d.std_slope = parse_num(key, value)?,
            "std_floor" => d.std_floor = parse_num(key, value)?,
            "texture_freq_gain" => d.texture_freq_gain = parse_num(key, value)?,
            "base_freq" => d.base_freq = parse_num(key, value)?,
            "texture_weight" => d.texture_weight = parse_num(key, value)?,
            "epochs" => t.epochs = parse_num(key, value)?,
            "batch_size" => t.batch_size = parse_num(key, value)?,
            "base_lr" => t.base_lr = parse_num(key, value)?,
            "weight_decay" => t.weight_decay = parse_num(key, value)?,
            "encoder" => self.encoder = value.parse()?,
            "encoder_channels" => self.encoder_channels = parse_num(key, value)?,
            "daa_mode" => t.daa_mode = value.parse()?,
            "code_norm" => t.code_norm = value.parse()?,
            "eval_intervals" => t.eval_intervals = parse_list(key, value)?,
            "augment" => a.enabled = parse_bool(key, value)?,
            "augment_flip_prob" => a.flip_prob = parse_num(key, value)?,
            "augment_scale_range" => a.scale_range = parse_num(key, value)?,
            "augment_rotate_degrees" => a.rotate_degrees = parse_num(key, value)?,
            "augment_translate_pixels" => a.translate_pixels = parse_num(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "data_dir" => self.data_dir = (!value.is_empty()).then(|| PathBuf::from(value)),
            "ablation_seeds" => self.ablation_seeds = parse_list(key, value)?,
            "bench_reps" => self.bench.reps = parse_num(key, value)?,
            "bench_warmup" => self.bench.warmup = parse_num(key, value)?,
            other => return Err(Error::config(other, "unknown key")),
        }
        self.sync_encoder();
        Ok(())
    }

    fn sync_encoder(&mut self) {
        let mut enc = EncoderConfig::preset(self.encoder, self.encoder_channels);
        enc.input_size = self.data.image_size;
        self.train.encoder = enc;
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.train.validate()?;
        validate_intervals(&self.train.eval_intervals)?;
        if self.ablation_seeds.is_empty() {
            return Err(Error::config("ablation_seeds", "needs at least one seed"));
        }
        if self.bench.reps == 0 {
            return Err(Error::config("bench_reps", "must be positive"));
        }
        Ok(())
    }

    /// Directory of the dataset containers.
    pub fn data_dir(&self) -> &Path {
        self.data_dir.as_deref().unwrap_or(&self.out_dir)
    }

    pub fn augment(&self) -> &AugmentConfig {
        &self.train.augment
    }

    /// Resolved values in [`KEYS`] order.
    pub fn values(&self) -> Vec<(&'static str, String)> {
        let (d, t) = (&self.data, &self.train);
        let a = &t.augment;
        let vals = [
            t.seed.to_string(),
            d.seed.to_string(),
            d.n_train.to_string(),
            d.n_test.to_string(),
            d.image_size.to_string(),
            d.mean_base.to_string(),
            d.mean_slope.to_string(),
            d.std_base.to_string(),
            d.std_slope.to_string(),
            d.std_floor.to_string(),
            d.texture_freq_gain.to_string(),
            d.base_freq.to_string(),
            d.texture_weight.to_string(),
            t.epochs.to_string(),
            t.batch_size.to_string(),
            t.base_lr.to_string(),
            t.weight_decay.to_string(),
            encoder_name(self.encoder).to_string(),
            self.encoder_channels.to_string(),
            t.daa_mode.as_str().to_string(),
            code_norm_name(t.code_norm).to_string(),
            join(&t.eval_intervals),
            a.enabled.to_string(),
            a.flip_prob.to_string(),
            a.scale_range.to_string(),
            a.rotate_degrees.to_string(),
            a.translate_pixels.to_string(),
            self.out_dir.display().to_string(),
            self.data_dir.as_ref().map_or(String::new(), |p| p.display().to_string()),
            join(&self.ablation_seeds),
            self.bench.reps.to_string(),
            self.bench.warmup.to_string(),
        ];
        KEYS.iter().map(|(k, _)| *k).zip(vals).collect()
    }

    /// The resolved configuration as a parseable document.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for ((key, value), (_, doc)) in self.values().into_iter().zip(KEYS) {
            writeln!(out, "# {doc}\n{key} = {value}").expect("write to string");
        }
        out
    }
}
