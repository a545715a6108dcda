//! The age model: face encoder, binary-code style mapping, delta transfers
//! and the shared delta-age decoder.

mod codes;
mod decoder;
mod encoder;
mod templates;
mod transfer;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use codes::{age_to_binary, BinaryCodeMatrix, CodeNorm, StyleTable, CODE_BITS, MAPPING_WIDTHS, NUM_AGES};
pub use decoder::{
    build_delta_stack, predict_from_deltas, style_ages, Decoded, DeltaStack, StyleStats, HEAD_CHANNELS,
};
pub use encoder::{ConvStage, EncoderConfig, EncoderVariant};
pub use templates::{daa_template_stats, draw_templates, feature_stats, TemplateMode, TemplateStats};
pub use transfer::{adain, daa_binary, daa_multi, daa_single, FeatureMap};

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::nn::weights::{self, assign_matching};
use crate::nn::{Graph, ParamStore, Scalar, Tensor, Var, STATS_EPS};
use crate::rng::{stream_rng, streams};

use codes::MappingParams;
use decoder::HeadParams;
use encoder::EncoderParams;

/// Which style statistics drive the delta transfer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DaaMode {
    /// Direct regression from the encoder features, no transfer.
    None,
    /// Per-channel statistics of one template image per age.
    SingleTemplate,
    /// Shared all-channel statistics of one template image per age.
    MultiTemplate,
    /// Learned statistics from the binary-code mapping.
    Binary,
}

impl DaaMode {
    pub const ALL: [DaaMode; 4] = [
        DaaMode::None,
        DaaMode::SingleTemplate,
        DaaMode::MultiTemplate,
        DaaMode::Binary,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DaaMode::None => "none",
            DaaMode::SingleTemplate => "single-template",
            DaaMode::MultiTemplate => "multi-template",
            DaaMode::Binary => "binary",
        }
    }

    pub fn template_mode(self) -> Option<TemplateMode> {
        match self {
            DaaMode::SingleTemplate => Some(TemplateMode::Single),
            DaaMode::MultiTemplate => Some(TemplateMode::Multi),
            _ => None,
        }
    }
}

impl std::str::FromStr for DaaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "single-template" | "single" => Ok(Self::SingleTemplate),
            "multi-template" | "multi" => Ok(Self::MultiTemplate),
            "binary" => Ok(Self::Binary),
            other => Err(Error::config("daa_mode", format!("unknown mode `{other}`"))),
        }
    }
}

/// Offset added to the direct-regression output so every mode starts from
/// the mean style age.
pub const AGE_PRIOR: f64 = 49.5;

/// Architecture descriptor; embedded in weight files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub mode: DaaMode,
    pub code_norm: CodeNorm,
    pub eps: f64,
    pub mapping_widths: Vec<usize>,
    pub head_channels: usize,
}

impl ModelConfig {
    pub fn new(encoder: EncoderConfig, mode: DaaMode) -> Self {
        Self {
            encoder,
            mode,
            code_norm: CodeNorm::ColumnStandardize,
            eps: STATS_EPS,
            mapping_widths: MAPPING_WIDTHS.to_vec(),
            head_channels: HEAD_CHANNELS,
        }
    }
}

/// How the decoder evaluates the delta stack.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DecodePath {
    /// Materialize `K x C x h x w` and convolve every slice.
    #[default]
    Explicit,
    /// Exploit linearity of the head convolution; identical up to rounding.
    Fused,
}

/// Graph handles of one forward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    pub features: FeatureMap,
    pub age: Var,
    /// Delta ages per style age (absent in direct-regression mode).
    pub deltas: Option<Var>,
    pub ages: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct DaaModel<T: Scalar> {
    config: ModelConfig,
    params: ParamStore<T>,
    codes: Tensor<T>,
    encoder: EncoderParams,
    mapping: Option<MappingParams>,
    head: HeadParams,
}

const TEMPLATE_MU: &str = "template.mu";
const TEMPLATE_SIGMA: &str = "template.sigma";

impl<T: Scalar> DaaModel<T> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.encoder.validate()?;
        if config.mapping_widths != MAPPING_WIDTHS || config.head_channels != HEAD_CHANNELS {
            return Err(Error::config(
                "architecture",
                "mapping widths are fixed at 16/32/2 and head channels at 64",
            ));
        }
        if config.eps < 0.0 {
            return Err(Error::config("eps", "must be non-negative"));
        }
        let mut rng = stream_rng(seed, streams::INIT, 0);
        let mut params = ParamStore::new();
        let encoder = EncoderParams::init(&config.encoder, &mut params, &mut rng)?;
        let mapping = match config.mode {
            DaaMode::Binary => Some(MappingParams::init(&mut params, &mut rng)?),
            _ => None,
        };
        let head = HeadParams::init(&mut params, config.encoder.out_channels(), &mut rng)?;
        if let Some(tm) = config.mode.template_mode() {
            let c = config.encoder.out_channels();
            let shape = match tm {
                TemplateMode::Single => vec![NUM_AGES, c],
                TemplateMode::Multi => vec![NUM_AGES],
            };
            params.insert_buffer(TEMPLATE_MU, Tensor::zeros(&shape))?;
            params.insert_buffer(TEMPLATE_SIGMA, Tensor::full(&shape, T::one()))?;
        }
        let codes = BinaryCodeMatrix::build(config.code_norm).normalized.cast();
        Ok(Self {
            config,
            params,
            codes,
            encoder,
            mapping,
            head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn mode(&self) -> DaaMode {
        self.config.mode
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn eps(&self) -> T {
        T::from_f64(self.config.eps)
    }

    /// Checks that an image is `3 x H x W` (or `1 x 3 x H x W`) for this encoder.
    fn image_shape_ok(&self, shape: &[usize]) -> Result<()> {
        let s = self.config.encoder.input_size;
        let want = [self.config.encoder.in_channels, s, s];
        let ok = shape == want || (shape.len() == 4 && shape[0] == 1 && shape[1..] == want);
        if !ok {
            return Err(Error::Dimension(format!(
                "image shape {shape:?} does not match encoder input {want:?}"
            )));
        }
        Ok(())
    }

    pub fn encode(&self, g: &mut Graph<'_, T>, image: &Tensor<T>) -> Result<FeatureMap> {
        self.image_shape_ok(image.shape())?;
        let s = self.config.encoder.input_size;
        let x = g.input(image.clone().reshape(&[1, self.config.encoder.in_channels, s, s])?);
        let e = self.encoder.forward(g, x)?;
        FeatureMap::from_features(g, e, self.config.eps)
    }

    /// Learned `(S, T)` for all 100 style ages (binary mode only).
    pub fn style_table(&self, g: &mut Graph<'_, T>) -> Result<StyleTable> {
        let mapping = self
            .mapping
            .as_ref()
            .ok_or_else(|| Error::Contract(format!("{} model has no style mapping", self.mode().as_str())))?;
        let z0 = g.input(self.codes.clone());
        mapping.forward(g, z0)
    }

    /// Style statistics of the selected ages.
    pub fn style_stats(&self, g: &mut Graph<'_, T>, ages: &[usize]) -> Result<StyleStats> {
        match self.mode() {
            DaaMode::Binary => {
                let table = self.style_table(g)?;
                Ok(StyleStats::Shared {
                    mu: g.gather(table.t, ages)?,
                    sigma: g.gather(table.s, ages)?,
                })
            }
            DaaMode::SingleTemplate | DaaMode::MultiTemplate => {
                let stats = self.template_stats()?;
                stats.select(g, ages)
            }
            DaaMode::None => Err(Error::Contract("direct-regression model has no style statistics".into())),
        }
    }

    pub fn forward(
        &self,
        g: &mut Graph<'_, T>,
        image: &Tensor<T>,
        interval: usize,
        path: DecodePath,
    ) -> Result<Forward> {
        let fm = self.encode(g, image)?;
        if self.mode() == DaaMode::None {
            let s = g.shape(fm.e).to_vec();
            let e4 = g.reshape(fm.e, &[1, s[0], s[1], s[2]])?;
            let out = self.head.apply(g, e4)?;
            let age = g.affine_const(out, T::one(), T::from_f64(AGE_PRIOR))?;
            return Ok(Forward {
                features: fm,
                age,
                deltas: None,
                ages: Vec::new(),
            });
        }
        let ages = style_ages(interval)?;
        let stats = self.style_stats(g, &ages)?;
        let decoded = match path {
            DecodePath::Explicit => {
                let stack = build_delta_stack(g, &fm, stats, &ages)?;
                self.head.decode(g, &stack)?
            }
            DecodePath::Fused => self.head.decode_fused(g, &fm, stats, &ages)?,
        };
        Ok(Forward {
            features: fm,
            age: decoded.age,
            deltas: Some(decoded.deltas),
            ages,
        })
    }

    /// Decodes an already built delta stack with this model's head.
    pub fn decode_stack(&self, g: &mut Graph<'_, T>, stack: &DeltaStack) -> Result<Decoded> {
        self.head.decode(g, stack)
    }

    /// Age estimate for one image.
    pub fn predict(&self, image: &Tensor<T>, interval: usize, path: DecodePath) -> Result<f64> {
        let mut g = Graph::inference(&self.params).with_exec(Exec::Sequential);
        let f = self.forward(&mut g, image, interval, path)?;
        Ok(g.value(f.age).item().as_f64())
    }

    /// Independent predictions for a batch of images, in input order.
    pub fn predict_batch(
        &self,
        images: &[&Tensor<T>],
        interval: usize,
        path: DecodePath,
        exec: Exec,
    ) -> Result<Vec<f64>> {
        exec::map_range(exec, images.len(), |i| self.predict(images[i], interval, path))
            .into_iter()
            .collect()
    }

    /// `(S, T)` values of the learned style table.
    pub fn style_values(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut g = Graph::inference(&self.params);
        let table = self.style_table(&mut g)?;
        Ok((g.value(table.s).to_f64_vec(), g.value(table.t).to_f64_vec()))
    }

    /// Style statistics of all 100 ages as plain numbers: the learned
    /// table (as shared statistics, `mu = T`, `sigma = S`) or the template
    /// buffers. Used when the table is computed once ahead of inference.
    pub fn frozen_styles(&self) -> Result<TemplateStats> {
        match self.mode() {
            DaaMode::Binary => {
                let (s, t) = self.style_values()?;
                TemplateStats::from_flat(TemplateMode::Multi, self.config.encoder.out_channels(), t, s)
            }
            DaaMode::None => Err(Error::Contract("direct-regression model has no style statistics".into())),
            _ => self.template_stats(),
        }
    }

    // ---- templates ----------------------------------------------------

    pub fn template_stats(&self) -> Result<TemplateStats> {
        let mode = self
            .mode()
            .template_mode()
            .ok_or_else(|| Error::Contract("model does not use templates".into()))?;
        let mu = self.params.by_name(TEMPLATE_MU).expect("template buffer").value.to_f64_vec();
        let sigma = self.params.by_name(TEMPLATE_SIGMA).expect("template buffer").value.to_f64_vec();
        TemplateStats::from_flat(mode, self.config.encoder.out_channels(), mu, sigma)
    }

    pub fn set_template_stats(&mut self, stats: &TemplateStats) -> Result<()> {
        if self.mode().template_mode() != Some(stats.mode) {
            return Err(Error::Contract(format!(
                "{:?} statistics do not fit a {} model",
                stats.mode,
                self.mode().as_str()
            )));
        }
        let (mu, sigma) = stats.flat();
        for (name, vals) in [(TEMPLATE_MU, mu), (TEMPLATE_SIGMA, sigma)] {
            let id = self.params.id(name).expect("template buffer");
            let p = self.params.get_mut(id);
            if p.value.len() != vals.len() {
                return Err(Error::Dimension(format!(
                    "template statistics have {} values, buffer holds {}",
                    vals.len(),
                    p.value.len()
                )));
            }
            for (d, v) in p.value.data_mut().iter_mut().zip(vals) {
                *d = T::from_f64(v);
            }
        }
        Ok(())
    }

    /// Recomputes template statistics from one template image per style age
    /// using the current encoder weights.
    pub fn refresh_templates(&mut self, templates: &[&Tensor<T>], exec: Exec) -> Result<()> {
        let mode = self
            .mode()
            .template_mode()
            .ok_or_else(|| Error::Contract("model does not use templates".into()))?;
        let stats = templates::compute_template_stats(self, templates, mode, exec)?;
        self.set_template_stats(&stats)
    }

    // ---- persistence --------------------------------------------------

    pub fn architecture(&self) -> serde_json::Value {
        serde_json::to_value(&self.config).expect("config serializes")
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        weights::encode_weights(&self.params, &self.architecture())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (loaded, arch) = weights::decode_weights::<T>(bytes)?;
        let config: ModelConfig = serde_json::from_value(arch)
            .map_err(|e| Error::format(16, format!("bad architecture descriptor: {e}")))?;
        let mut model = Self::new(config, 0)?;
        assign_matching(&mut model.params, &loaded)?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Same model in another precision.
    pub fn cast<U: Scalar>(&self) -> DaaModel<U> {
        let params = self.params.cast();
        DaaModel {
            config: self.config.clone(),
            encoder: EncoderParams::bind(&params, &self.config.encoder).expect("same layout"),
            mapping: self.mapping.as_ref().map(|_| MappingParams::bind(&params).expect("same layout")),
            head: HeadParams::bind(&params).expect("same layout"),
            codes: self.codes.cast(),
            params,
        }
    }
}
