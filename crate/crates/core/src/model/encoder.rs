use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Graph, ParamId, ParamStore, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderVariant {
    Tiny,
    Resnet18Like,
    C3aePlainLike,
    Custom,
}

impl std::str::FromStr for EncoderVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tiny" => Ok(Self::Tiny),
            "resnet18-like" => Ok(Self::Resnet18Like),
            "c3ae-plain-like" => Ok(Self::C3aePlainLike),
            other => Err(Error::config("encoder", format!("unknown variant `{other}`"))),
        }
    }
}

/// One 3x3 convolution followed by ReLU.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvStage {
    pub channels: usize,
    pub stride: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub variant: EncoderVariant,
    pub in_channels: usize,
    pub input_size: usize,
    pub stages: Vec<ConvStage>,
}

const fn stage(channels: usize, stride: usize) -> ConvStage {
    ConvStage { channels, stride }
}

impl EncoderConfig {
    /// Four stride-2 blocks `16 -> 32 -> 32 -> C`: `3x128x128 -> Cx8x8`.
    pub fn tiny(channels: usize) -> Self {
        Self {
            variant: EncoderVariant::Tiny,
            in_channels: 3,
            input_size: 128,
            stages: vec![stage(16, 2), stage(32, 2), stage(32, 2), stage(channels, 2)],
        }
    }

    /// Plain 32-channel stack with a `32x8x8` output.
    pub fn c3ae_plain_like() -> Self {
        Self {
            variant: EncoderVariant::C3aePlainLike,
            in_channels: 3,
            input_size: 128,
            stages: vec![stage(32, 2), stage(32, 2), stage(32, 2), stage(32, 2)],
        }
    }

    /// 3x3 stem without max pooling, then four widening stride-2 stages
    /// ending in `512x8x8`.
    pub fn resnet18_like() -> Self {
        Self {
            variant: EncoderVariant::Resnet18Like,
            in_channels: 3,
            input_size: 128,
            stages: vec![
                stage(64, 1),
                stage(64, 2),
                stage(128, 2),
                stage(256, 2),
                stage(512, 2),
            ],
        }
    }

    pub fn preset(variant: EncoderVariant, channels: usize) -> Self {
        match variant {
            EncoderVariant::Tiny | EncoderVariant::Custom => Self::tiny(channels),
            EncoderVariant::Resnet18Like => Self::resnet18_like(),
            EncoderVariant::C3aePlainLike => Self::c3ae_plain_like(),
        }
    }

    pub fn custom(input_size: usize, stages: Vec<ConvStage>) -> Self {
        Self {
            variant: EncoderVariant::Custom,
            in_channels: 3,
            input_size,
            stages,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.stages.last().map_or(self.in_channels, |s| s.channels)
    }

    /// Spatial size of the feature map (`h == w`).
    pub fn out_size(&self) -> usize {
        self.stages
            .iter()
            .fold(self.input_size, |s, st| (s + 2 - 3) / st.stride + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::config("encoder", "needs at least one stage"));
        }
        if self.stages.iter().any(|s| s.channels == 0 || s.stride == 0) {
            return Err(Error::config("encoder", "stage channels and strides must be positive"));
        }
        if self.input_size == 0 {
            return Err(Error::config("input_size", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub(crate) struct EncoderParams {
    stages: Vec<(ParamId, ParamId, usize)>,
}

impl EncoderParams {
    pub(crate) fn init<T: Scalar, R: Rng>(
        cfg: &EncoderConfig,
        store: &mut ParamStore<T>,
        rng: &mut R,
    ) -> Result<Self> {
        let mut cin = cfg.in_channels;
        let mut stages = Vec::with_capacity(cfg.stages.len());
        for (i, st) in cfg.stages.iter().enumerate() {
            let w = store.insert_he(
                &format!("encoder.block{i}.conv.weight"),
                &[st.channels, cin, 3, 3],
                cin * 9,
                rng,
            )?;
            let b = store.insert_zeros(&format!("encoder.block{i}.conv.bias"), &[st.channels])?;
            stages.push((w, b, st.stride));
            cin = st.channels;
        }
        Ok(Self { stages })
    }

    pub(crate) fn bind(store: &ParamStore<impl Scalar>, cfg: &EncoderConfig) -> Result<Self> {
        let mut stages = Vec::new();
        for (i, st) in cfg.stages.iter().enumerate() {
            let w = lookup(store, &format!("encoder.block{i}.conv.weight"))?;
            let b = lookup(store, &format!("encoder.block{i}.conv.bias"))?;
            stages.push((w, b, st.stride));
        }
        Ok(Self { stages })
    }

    /// `1 x 3 x H x W -> C x h x w`.
    pub(crate) fn forward<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        x: crate::nn::Var,
    ) -> Result<crate::nn::Var> {
        let mut h = x;
        for &(w, b, stride) in &self.stages {
            let (w, b) = (g.param(w), g.param(b));
            let c = g.conv2d(h, w, Some(b), stride, 1)?;
            h = g.relu(c)?;
        }
        let s = g.shape(h).to_vec();
        g.reshape(h, &s[1..])
    }
}

pub(crate) fn lookup(store: &ParamStore<impl Scalar>, name: &str) -> Result<ParamId> {
    store
        .id(name)
        .ok_or_else(|| Error::Contract(format!("missing parameter `{name}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_output_shapes() {
        let t = EncoderConfig::tiny(32);
        assert_eq!((t.out_channels(), t.out_size()), (32, 8));
        let r = EncoderConfig::resnet18_like();
        assert_eq!((r.out_channels(), r.out_size()), (512, 8));
        let c = EncoderConfig::c3ae_plain_like();
        assert_eq!((c.out_channels(), c.out_size()), (32, 8));
        let m = EncoderConfig::custom(16, vec![stage(4, 2), stage(2, 1)]);
        assert_eq!((m.out_channels(), m.out_size()), (2, 8));
    }
}
