use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::nn::{ParamStore, Scalar};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            weight_decay: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction and L2 weight decay folded into the gradient.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    // Indexed like the parameter store; `None` for buffers.
    first: Vec<Option<Vec<T>>>,
    second: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &ParamStore<T>, config: AdamConfig) -> Self {
        let slots = |_| {
            params
                .iter()
                .map(|p| p.trainable.then(|| vec![T::zero(); p.value.len()]))
                .collect::<Vec<_>>()
        };
        Self {
            config,
            step: 0,
            first: slots(()),
            second: slots(()),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update using the gradients stored on `params`, then
    /// clears them. Every trainable parameter must carry a gradient.
    pub fn step(&mut self, params: &mut ParamStore<T>, lr: f64) -> Result<()> {
        if params.len() != self.first.len() {
            return Err(Error::Contract(
                "optimizer state does not match the parameter store".into(),
            ));
        }
        if let Some(p) = params.iter().find(|p| p.trainable && p.grad.is_none()) {
            return Err(Error::Contract(format!(
                "parameter `{}` has no gradient",
                p.name
            )));
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let (b1, b2) = (T::from_f64(c.beta1), T::from_f64(c.beta2));
        let (one, wd, eps) = (T::one(), T::from_f64(c.weight_decay), T::from_f64(c.eps));
        let step_size = T::from_f64(lr / bc1);
        let inv_bc2 = T::from_f64(1.0 / bc2);
        for (i, p) in params.iter_mut().enumerate() {
            if !p.trainable {
                continue;
            }
            let grad = p.grad.take().expect("checked above");
            let m = self.first[i].as_mut().expect("trainable slot");
            let v = self.second[i].as_mut().expect("trainable slot");
            for (((w, &g), m), v) in p
                .value
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                let g = g + wd * *w;
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                *w = *w - step_size * *m / ((*v * inv_bc2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// `base_lr * 0.5 * (1 + cos(pi * epoch / total_epochs))`.
pub fn cosine_lr(epoch: usize, total_epochs: usize, base_lr: f64) -> Result<f64> {
    if epoch >= total_epochs {
        return Err(Error::Range(format!(
            "epoch {epoch} outside [0, {total_epochs})"
        )));
    }
    Ok(base_lr * 0.5 * (1.0 + (PI * epoch as f64 / total_epochs as f64).cos()))
}
