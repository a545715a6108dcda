//! The training loop.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::data::{augment, Dataset};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::model::{draw_templates, DaaModel, DecodePath};
use crate::nn::{cosine_lr, Adam, AdamConfig, Graph, Tensor, SMOOTH_L1_BETA};
use crate::rng::{derive_seed, stream_rng, streams};
use crate::train::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    /// Mean per-sample smooth-L1 loss over the epoch.
    pub loss: f64,
    /// Mean absolute error of the training predictions seen during the epoch.
    pub train_mae: f64,
}

pub struct TrainOutcome {
    pub model: DaaModel<f32>,
    pub history: Vec<EpochLog>,
    /// Training-set positions of the template images (template modes only).
    pub templates: Option<Vec<usize>>,
    pub seconds: f64,
}

/// Loss and parameter gradients of a single sample, scaled by `weight`.
struct SampleGrad {
    loss: f64,
    pred: f64,
    grads: Vec<Option<Vec<f32>>>,
}

fn sample_grad(
    model: &DaaModel<f32>,
    image: &Tensor<f32>,
    age: usize,
    weight: f32,
) -> Result<SampleGrad> {
    let mut g = Graph::new(model.params()).with_exec(Exec::Sequential);
    let f = model.forward(&mut g, image, 1, DecodePath::Fused)?;
    let target = g.input(Tensor::scalar(age as f32));
    let l = g.smooth_l1(f.age, target, SMOOTH_L1_BETA as f32)?;
    let loss = g.value(l).item() as f64;
    let pred = g.value(f.age).item() as f64;
    let scaled = g.scale(l, weight)?;
    let grads = g.backward(scaled)?;
    Ok(SampleGrad {
        loss,
        pred,
        grads: grads.param_grads(model.params()),
    })
}

/// Position of the first non-finite parameter, if any.
fn first_non_finite(model: &DaaModel<f32>) -> Option<(usize, String)> {
    model
        .params()
        .iter()
        .enumerate()
        .find(|(_, p)| !p.value.is_finite())
        .map(|(i, p)| (i, p.name.clone()))
}

/// Trains a fresh model initialized from `cfg.seed`.
pub fn train(cfg: &TrainConfig, data: &Dataset, exec: Exec) -> Result<TrainOutcome> {
    cfg.validate()?;
    let model = DaaModel::new(cfg.model_config(), cfg.seed)?;
    train_model(model, cfg, data, exec)
}

/// Trains `model` in place following `cfg`; returns the trained model.
pub fn train_model(
    mut model: DaaModel<f32>,
    cfg: &TrainConfig,
    data: &Dataset,
    exec: Exec,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset("training set"));
    }
    let start = Instant::now();
    let templates = match model.mode().template_mode() {
        Some(_) => {
            let mut rng = stream_rng(cfg.seed, streams::TEMPLATES, 0);
            Some(draw_templates(&data.ages(), &mut rng)?)
        }
        None => None,
    };
    let adam_cfg = AdamConfig {
        weight_decay: cfg.weight_decay,
        ..AdamConfig::default()
    };
    let mut adam = Adam::new(model.params(), adam_cfg);
    let mut history = Vec::with_capacity(cfg.epochs);
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..cfg.epochs {
        let lr = cosine_lr(epoch, cfg.epochs, cfg.base_lr)?;
        let mut rng = stream_rng(cfg.seed, streams::SHUFFLE, epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);

        if let Some(t) = &templates {
            // template statistics follow the encoder, refreshed once per epoch
            let imgs: Vec<&Tensor<f32>> = t.iter().map(|&i| &data.samples[i].image).collect();
            model.refresh_templates(&imgs, exec)?;
        }
        let (mut loss_sum, mut err_sum) = (0.0, 0.0);
        for batch in order.chunks(cfg.batch_size) {
            let weight = 1.0 / batch.len() as f32;
            let results = exec::map_range(exec, batch.len(), |j| {
                let pos = batch[j];
                let s = &data.samples[pos];
                let seed = derive_seed(cfg.seed, streams::AUGMENT, ((epoch as u64) << 32) | pos as u64);
                let mut arng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let image = augment(&s.image, &cfg.augment, &mut arng);
                sample_grad(&model, &image, s.age, weight)
            });
            let store = model.params_mut();
            store.zero_grads();
            for (j, r) in results.into_iter().enumerate() {
                let r = r?;
                loss_sum += r.loss;
                err_sum += (r.pred - data.samples[batch[j]].age as f64).abs();
                for (id, g) in store.ids().collect::<Vec<_>>().into_iter().zip(r.grads) {
                    if let Some(g) = g {
                        store.accumulate_grad(id, &g)?;
                    }
                }
            }
            adam.step(model.params_mut(), lr)?;
            if let Some((i, name)) = first_non_finite(&model) {
                log::error!("parameter `{name}` became non-finite in epoch {epoch}");
                return Err(Error::NonFinite {
                    op: "adam_step",
                    node: i,
                });
            }
        }
        let log = EpochLog {
            epoch,
            lr,
            loss: loss_sum / n as f64,
            train_mae: err_sum / n as f64,
        };
        log::info!(
            "epoch {:>3}  lr {:.3e}  loss {:.4}  train mae {:.3}",
            epoch,
            lr,
            log.loss,
            log.train_mae
        );
        history.push(log);
    }
    if let Some(t) = &templates {
        let imgs: Vec<&Tensor<f32>> = t.iter().map(|&i| &data.samples[i].image).collect();
        model.refresh_templates(&imgs, exec)?;
    }
    Ok(TrainOutcome {
        model,
        history,
        templates,
        seconds: start.elapsed().as_secs_f64(),
    })
}
