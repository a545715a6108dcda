//! Train-time augmentation: horizontal flip followed by one affine warp
//! (scale, rotation, translation about the image centre) with bilinear
//! sampling and edge clamping.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub enabled: bool,
    pub flip_prob: f64,
    /// Scale factor drawn from `[1 - scale_range, 1 + scale_range]`.
    pub scale_range: f64,
    pub rotate_degrees: f64,
    pub translate_pixels: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            flip_prob: 0.5,
            scale_range: 0.1,
            rotate_degrees: 10.0,
            translate_pixels: 8.0,
        }
    }
}

impl AugmentConfig {
    pub fn identity() -> Self {
        Self {
            enabled: true,
            flip_prob: 0.0,
            scale_range: 0.0,
            rotate_degrees: 0.0,
            translate_pixels: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::config("augment_flip_prob", "must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.scale_range) {
            return Err(Error::config("augment_scale_range", "must lie in [0, 1)"));
        }
        for (key, v) in [
            ("augment_rotate_degrees", self.rotate_degrees),
            ("augment_translate_pixels", self.translate_pixels),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(key, "must be a non-negative number"));
            }
        }
        Ok(())
    }
}

/// One drawn transform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Warp {
    pub flip: bool,
    pub scale: f64,
    pub angle: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Warp {
    pub const IDENTITY: Warp = Warp {
        flip: false,
        scale: 1.0,
        angle: 0.0,
        tx: 0.0,
        ty: 0.0,
    };

    pub fn draw<R: Rng>(cfg: &AugmentConfig, rng: &mut R) -> Self {
        let sym = |rng: &mut R, r: f64| if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 };
        let flip = rng.random::<f64>() < cfg.flip_prob;
        let scale = 1.0 + sym(rng, cfg.scale_range);
        let angle = sym(rng, cfg.rotate_degrees).to_radians();
        let tx = sym(rng, cfg.translate_pixels);
        let ty = sym(rng, cfg.translate_pixels);
        Self {
            flip,
            scale,
            angle,
            tx,
            ty,
        }
    }

    fn is_affine_identity(&self) -> bool {
        self.scale == 1.0 && self.angle == 0.0 && self.tx == 0.0 && self.ty == 0.0
    }
}

pub fn hflip(image: &Tensor<f32>) -> Tensor<f32> {
    let s = image.shape();
    let (h, w) = (s[1], s[2]);
    let src = image.data();
    let mut out = vec![0f32; src.len()];
    for (row_out, row_in) in out.chunks_mut(w).zip(src.chunks(w)) {
        for x in 0..w {
            row_out[x] = row_in[w - 1 - x];
        }
    }
    debug_assert_eq!(out.len() % (h * w), 0);
    Tensor::new(s, out).expect("same shape")
}

/// Applies `warp` to a `C x H x W` image. Output pixel `p` samples the
/// source at `A^-1 (p - c - t) + c`, where `A` scales and rotates about the
/// centre `c`.
pub fn apply_warp(image: &Tensor<f32>, warp: &Warp) -> Tensor<f32> {
    let flipped = if warp.flip { hflip(image) } else { image.clone() };
    if warp.is_affine_identity() {
        return flipped;
    }
    let shape = flipped.shape().to_vec();
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (cos, sin) = (warp.angle.cos(), warp.angle.sin());
    let inv_s = 1.0 / warp.scale;
    let src = flipped.data();
    let mut out = vec![0f32; src.len()];
    let clamp = |v: f64, hi: usize| v.clamp(0.0, (hi - 1) as f64);
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 - cx - warp.tx;
            let dy = y as f64 - cy - warp.ty;
            // inverse rotation, inverse scale
            let sx = clamp((cos * dx + sin * dy) * inv_s + cx, w);
            let sy = clamp((-sin * dx + cos * dy) * inv_s + cy, h);
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = ((sx - x0 as f64) as f32, (sy - y0 as f64) as f32);
            for ch in 0..c {
                let p = &src[ch * h * w..(ch + 1) * h * w];
                let top = p[y0 * w + x0] * (1.0 - fx) + p[y0 * w + x1] * fx;
                let bot = p[y1 * w + x0] * (1.0 - fx) + p[y1 * w + x1] * fx;
                out[ch * h * w + y * w + x] = top * (1.0 - fy) + bot * fy;
            }
        }
    }
    Tensor::new(&shape, out).expect("same shape")
}

/// Draws and applies a transform; returns the input untouched when
/// augmentation is disabled.
pub fn augment<R: Rng>(image: &Tensor<f32>, cfg: &AugmentConfig, rng: &mut R) -> Tensor<f32> {
    if !cfg.enabled {
        return image.clone();
    }
    apply_warp(image, &Warp::draw(cfg, rng))
}
