//! Delta stacks and the shared age decoder head (conv, ReLU, GAP, FC).

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::codes::NUM_AGES;
use crate::model::encoder::lookup;
use crate::model::transfer::{daa_multi, daa_single, FeatureMap};
use crate::nn::{Graph, ParamId, ParamStore, Scalar, Var};

/// Style ages `[0, d, 2d, ...]` used at sampling interval `d`.
pub fn style_ages(interval: usize) -> Result<Vec<usize>> {
    if interval == 0 || !NUM_AGES.is_multiple_of(interval) {
        return Err(Error::config(
            "interval",
            format!("{interval} does not divide {NUM_AGES}"),
        ));
    }
    Ok((0..NUM_AGES).step_by(interval).collect())
}

/// `(1/K) * sum_k (age_k - delta_k)`.
pub fn predict_from_deltas(ages: &[usize], deltas: &[f64]) -> f64 {
    assert_eq!(ages.len(), deltas.len());
    ages.iter()
        .zip(deltas)
        .map(|(&a, &d)| a as f64 - d)
        .sum::<f64>()
        / ages.len() as f64
}

/// Style statistics for the `K` selected style ages.
#[derive(Clone, Copy, Debug)]
pub enum StyleStats {
    /// One `(mu, sigma)` pair per age shared by all channels; both `[K]`.
    Shared { mu: Var, sigma: Var },
    /// Per-channel statistics; both `[K, C]`.
    PerChannel { mu: Var, sigma: Var },
}

/// `K x C x h x w` feature differences, slice `k` against `ages[k]`.
#[derive(Clone, Debug)]
pub struct DeltaStack {
    pub deltas: Var,
    pub ages: Vec<usize>,
}

pub fn build_delta_stack<T: Scalar>(
    g: &mut Graph<'_, T>,
    fm: &FeatureMap,
    stats: StyleStats,
    ages: &[usize],
) -> Result<DeltaStack> {
    if ages.is_empty() {
        return Err(Error::Contract("delta stack needs at least one style age".into()));
    }
    let c = fm.channels(g);
    let mut slices = Vec::with_capacity(ages.len());
    for k in 0..ages.len() {
        let d = match stats {
            StyleStats::Shared { mu, sigma } => {
                let (m, s) = (g.gather(mu, &[k])?, g.gather(sigma, &[k])?);
                daa_multi(g, fm, m, s)?
            }
            StyleStats::PerChannel { mu, sigma } => {
                let row: Vec<usize> = (k * c..(k + 1) * c).collect();
                let (m, s) = (g.gather(mu, &row)?, g.gather(sigma, &row)?);
                daa_single(g, fm, m, s)?
            }
        };
        slices.push(d);
    }
    Ok(DeltaStack {
        deltas: g.stack(&slices)?,
        ages: ages.to_vec(),
    })
}

/// Decoder output: the age estimate (`[1]`) and one delta age per style age.
#[derive(Clone, Copy, Debug)]
pub struct Decoded {
    pub age: Var,
    pub deltas: Var,
}

pub const HEAD_CHANNELS: usize = 64;

#[derive(Clone, Debug)]
pub(crate) struct HeadParams {
    conv_w: ParamId,
    conv_b: ParamId,
    fc_w: ParamId,
    fc_b: ParamId,
}

impl HeadParams {
    pub(crate) fn init<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        in_channels: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            conv_w: store.insert_he(
                "head.conv.weight",
                &[HEAD_CHANNELS, in_channels, 3, 3],
                in_channels * 9,
                rng,
            )?,
            conv_b: store.insert_zeros("head.conv.bias", &[HEAD_CHANNELS])?,
            fc_w: store.insert_he("head.fc.weight", &[1, HEAD_CHANNELS], HEAD_CHANNELS, rng)?,
            fc_b: store.insert_zeros("head.fc.bias", &[1])?,
        })
    }

    pub(crate) fn bind(store: &ParamStore<impl Scalar>) -> Result<Self> {
        Ok(Self {
            conv_w: lookup(store, "head.conv.weight")?,
            conv_b: lookup(store, "head.conv.bias")?,
            fc_w: lookup(store, "head.fc.weight")?,
            fc_b: lookup(store, "head.fc.bias")?,
        })
    }

    /// Pooled activations `N x 64 -> [N]` scalar outputs.
    fn regress<T: Scalar>(&self, g: &mut Graph<'_, T>, pooled: Var) -> Result<Var> {
        let (w, b) = (g.param(self.fc_w), g.param(self.fc_b));
        let out = g.linear(pooled, w, Some(b))?;
        let n = g.shape(out)[0];
        g.reshape(out, &[n])
    }

    /// Head applied to every slice of an `N x C x h x w` tensor: conv,
    /// bias + ReLU + GAP, regression.
    pub(crate) fn apply<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var) -> Result<Var> {
        let (w, b) = (g.param(self.conv_w), g.param(self.conv_b));
        let pre = g.conv2d(x, w, None, 1, 1)?;
        let pooled = g.bias_relu_gap(pre, b)?;
        self.regress(g, pooled)
    }

    /// Decodes a materialized delta stack.
    pub(crate) fn decode<T: Scalar>(&self, g: &mut Graph<'_, T>, stack: &DeltaStack) -> Result<Decoded> {
        let deltas = self.apply(g, stack.deltas)?;
        finish_age(g, deltas, &stack.ages)
    }

    /// Same result as building the stack and calling [`Self::decode`], but
    /// uses linearity of the convolution: with `n = (E - mu) / sigma`,
    /// `conv(delta_y) = sum_c a_yc conv_c(n) + b_yc conv_c(1) - conv(sigma n + mu)`,
    /// so only a handful of convolutions are needed for all `K` style ages.
    pub(crate) fn decode_fused<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        fm: &FeatureMap,
        stats: StyleStats,
        ages: &[usize],
    ) -> Result<Decoded> {
        let shape = g.shape(fm.e).to_vec();
        let (c, h, w) = (shape[0], shape[1], shape[2]);
        let k = ages.len();
        let one = g.constant(&[1], T::one());
        let zero = g.constant(&[1], T::zero());
        let normed = g.affine_norm(fm.e, fm.mu, fm.sigma, one, zero)?;
        let rebuilt = g.affine_norm(fm.e, fm.mu, fm.sigma, fm.sigma, fm.mu)?;
        let ones = g.constant(&[c, h, w], T::one());
        let conv_w = g.param(self.conv_w);
        let plane = HEAD_CHANNELS * h * w;

        let rebuilt4 = g.reshape(rebuilt, &[1, c, h, w])?;
        let base = g.conv2d(rebuilt4, conv_w, None, 1, 1)?;
        let base = g.reshape(base, &[1, plane])?;
        let neg = g.constant(&[k], -T::one());

        let (basis, coeff) = match stats {
            StyleStats::Shared { mu, sigma } => {
                let n4 = g.reshape(normed, &[1, c, h, w])?;
                let ones4 = g.reshape(ones, &[1, c, h, w])?;
                let a = g.conv2d(n4, conv_w, None, 1, 1)?;
                let b = g.conv2d(ones4, conv_w, None, 1, 1)?;
                let a = g.reshape(a, &[1, plane])?;
                let b = g.reshape(b, &[1, plane])?;
                (g.concat(&[a, b, base])?, g.concat_cols(&[sigma, mu, neg])?)
            }
            StyleStats::PerChannel { mu, sigma } => {
                let gs = g.conv2d_split(normed, conv_w, 1, 1)?;
                let hs = g.conv2d_split(ones, conv_w, 1, 1)?;
                let gs = g.reshape(gs, &[c, plane])?;
                let hs = g.reshape(hs, &[c, plane])?;
                (g.concat(&[gs, hs, base])?, g.concat_cols(&[sigma, mu, neg])?)
            }
        };
        let conv_b = g.param(self.conv_b);
        let pooled = g.mix_relu_gap(coeff, basis, conv_b)?;
        let deltas = self.regress(g, pooled)?;
        finish_age(g, deltas, ages)
    }
}

fn finish_age<T: Scalar>(g: &mut Graph<'_, T>, deltas: Var, ages: &[usize]) -> Result<Decoded> {
    let mean_age = ages.iter().sum::<usize>() as f64 / ages.len() as f64;
    let m = g.mean(deltas)?;
    let age = g.affine_const(m, -T::one(), T::from_f64(mean_age))?;
    Ok(Decoded { age, deltas })
}
