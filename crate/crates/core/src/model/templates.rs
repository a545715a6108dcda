//! Per-age statistics taken from one template image per style age.

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::model::codes::NUM_AGES;
use crate::model::decoder::StyleStats;
use crate::model::DaaModel;
use crate::nn::{Graph, Scalar, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TemplateMode {
    /// `(mu_c, sigma_c)` per channel.
    Single,
    /// One `(mu_g, sigma_g)` pair over the whole feature map.
    Multi,
}

/// Template statistics for all 100 style ages. `mu` and `sigma` are
/// row-major `[100, C]` in single mode and `[100]` in multi mode.
#[derive(Clone, Debug, PartialEq)]
pub struct TemplateStats {
    pub mode: TemplateMode,
    pub channels: usize,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl TemplateStats {
    fn width(mode: TemplateMode, channels: usize) -> usize {
        match mode {
            TemplateMode::Single => channels,
            TemplateMode::Multi => 1,
        }
    }

    pub fn from_flat(mode: TemplateMode, channels: usize, mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        let want = NUM_AGES * Self::width(mode, channels);
        if mu.len() != want || sigma.len() != want {
            return Err(Error::Dimension(format!(
                "template statistics need {want} values, got {} and {}",
                mu.len(),
                sigma.len()
            )));
        }
        Ok(Self {
            mode,
            channels,
            mu,
            sigma,
        })
    }

    pub fn flat(&self) -> (Vec<f64>, Vec<f64>) {
        (self.mu.clone(), self.sigma.clone())
    }

    /// Statistics of one age: `C` values in single mode, one in multi mode.
    pub fn age(&self, age: usize) -> (&[f64], &[f64]) {
        let w = Self::width(self.mode, self.channels);
        let r = age * w..(age + 1) * w;
        (&self.mu[r.clone()], &self.sigma[r])
    }

    /// Style statistics of `ages` as constant graph inputs (not trained).
    pub fn select<T: Scalar>(&self, g: &mut Graph<'_, T>, ages: &[usize]) -> Result<StyleStats> {
        if let Some(&bad) = ages.iter().find(|&&a| a >= NUM_AGES) {
            return Err(Error::MissingTemplate(bad));
        }
        let w = Self::width(self.mode, self.channels);
        let pick = |src: &[f64]| -> Vec<f64> {
            ages.iter()
                .flat_map(|&a| src[a * w..(a + 1) * w].iter().copied())
                .collect()
        };
        let shape: Vec<usize> = match self.mode {
            TemplateMode::Single => vec![ages.len(), w],
            TemplateMode::Multi => vec![ages.len()],
        };
        let mu = g.input(Tensor::from_f64(&shape, &pick(&self.mu))?);
        let sigma = g.input(Tensor::from_f64(&shape, &pick(&self.sigma))?);
        Ok(match self.mode {
            TemplateMode::Single => StyleStats::PerChannel { mu, sigma },
            TemplateMode::Multi => StyleStats::Shared { mu, sigma },
        })
    }
}

/// Statistics of one feature map `E` (`C x h x w`) computed with the same
/// graph ops the transfer uses, so a template equal to the input reproduces
/// the input's statistics exactly.
pub fn feature_stats<T: Scalar>(
    g: &mut Graph<'_, T>,
    e: Var,
    mode: TemplateMode,
    eps: T,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (mu, sigma) = match mode {
        TemplateMode::Single => (g.channel_mean(e)?, g.channel_std(e, eps)?),
        TemplateMode::Multi => (g.global_mean(e)?, g.global_std(e, eps)?),
    };
    Ok((g.value(mu).to_f64_vec(), g.value(sigma).to_f64_vec()))
}

/// Builds statistics from feature maps, one per style age `0..=99`.
pub fn daa_template_stats<T: Scalar>(
    features: &[Option<&Tensor<T>>],
    mode: TemplateMode,
    eps: T,
) -> Result<TemplateStats> {
    let mut mu = Vec::new();
    let mut sigma = Vec::new();
    let mut channels = 0;
    for age in 0..NUM_AGES {
        let e = features
            .get(age)
            .copied()
            .flatten()
            .ok_or(Error::MissingTemplate(age))?;
        let params = crate::nn::ParamStore::new();
        let mut g = Graph::inference(&params);
        let v = g.input(e.clone());
        channels = e.shape()[0];
        let (m, s) = feature_stats(&mut g, v, mode, eps)?;
        mu.extend(m);
        sigma.extend(s);
    }
    TemplateStats::from_flat(mode, channels, mu, sigma)
}

/// Encodes the template images with the model's current encoder and
/// collects their statistics.
pub(crate) fn compute_template_stats<T: Scalar>(
    model: &DaaModel<T>,
    templates: &[&Tensor<T>],
    mode: TemplateMode,
    exec: Exec,
) -> Result<TemplateStats> {
    if templates.len() < NUM_AGES {
        return Err(Error::MissingTemplate(templates.len()));
    }
    let features = exec::map_range(exec, NUM_AGES, |age| -> Result<Tensor<T>> {
        let mut g = Graph::inference(model.params()).with_exec(Exec::Sequential);
        let fm = model.encode(&mut g, templates[age])?;
        Ok(g.value(fm.e).clone())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let refs: Vec<Option<&Tensor<T>>> = features.iter().map(Some).collect();
    daa_template_stats(&refs, mode, model.eps())
}

/// Picks one training index per age `0..=99` uniformly at random among the
/// samples carrying that label. Ages without any sample are an error.
pub fn draw_templates<R: rand::Rng>(labels: &[usize], rng: &mut R) -> Result<Vec<usize>> {
    let mut by_age: Vec<Vec<usize>> = vec![Vec::new(); NUM_AGES];
    for (i, &a) in labels.iter().enumerate() {
        if a < NUM_AGES {
            by_age[a].push(i);
        }
    }
    by_age
        .iter()
        .enumerate()
        .map(|(age, idx)| {
            if idx.is_empty() {
                Err(Error::MissingTemplate(age))
            } else {
                Ok(idx[rng.random_range(0..idx.len())])
            }
        })
        .collect()
}
