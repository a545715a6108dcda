//! Style transfer on encoder features: AdaIN and the delta transfers.
//!
//! All operations act on a [`FeatureMap`] `E` (`C x h x w`) with its
//! per-channel mean `mu` and standard deviation `sigma`. With style
//! statistics `(mu_y, sigma_y)` the delta transfer is
//!
//! ```text
//! delta_c = (sigma_y - sigma_c) * (E_c - mu_c) / sigma_c + mu_y - mu_c
//! ```
//!
//! which is AdaIN towards `y` minus AdaIN of `E` onto itself. Style
//! statistics are either per channel (`[C]`) or one pair shared by every
//! channel (`[1]`).

use crate::error::Result;
use crate::nn::{Graph, Scalar, Var};

/// Encoder output with its channel statistics.
#[derive(Clone, Copy, Debug)]
pub struct FeatureMap {
    pub e: Var,
    pub mu: Var,
    pub sigma: Var,
}

impl FeatureMap {
    /// Attaches channel statistics to a `C x h x w` feature.
    pub fn from_features<T: Scalar>(g: &mut Graph<'_, T>, e: Var, eps: f64) -> Result<Self> {
        let mu = g.channel_mean(e)?;
        let sigma = g.channel_std(e, T::from_f64(eps))?;
        Ok(Self { e, mu, sigma })
    }

    pub fn channels<T: Scalar>(&self, g: &Graph<'_, T>) -> usize {
        g.shape(self.e)[0]
    }
}

/// `sigma_y * (E - mu) / sigma + mu_y`.
pub fn adain<T: Scalar>(
    g: &mut Graph<'_, T>,
    fm: &FeatureMap,
    mu_y: Var,
    sigma_y: Var,
) -> Result<Var> {
    g.affine_norm(fm.e, fm.mu, fm.sigma, sigma_y, mu_y)
}

/// Delta transfer with per-channel style statistics.
pub fn daa_single<T: Scalar>(
    g: &mut Graph<'_, T>,
    fm: &FeatureMap,
    mu_y: Var,
    sigma_y: Var,
) -> Result<Var> {
    delta(g, fm, mu_y, sigma_y)
}

/// Delta transfer with one `(mu_g, sigma_g)` pair shared by all channels.
pub fn daa_multi<T: Scalar>(
    g: &mut Graph<'_, T>,
    fm: &FeatureMap,
    mu_g: Var,
    sigma_g: Var,
) -> Result<Var> {
    delta(g, fm, mu_g, sigma_g)
}

/// Delta transfer driven by a learned style pair `(s_y, t_y)`; the same
/// formula as [`daa_multi`] with `sigma_g = s_y`, `mu_g = t_y`.
pub fn daa_binary<T: Scalar>(
    g: &mut Graph<'_, T>,
    fm: &FeatureMap,
    s_y: Var,
    t_y: Var,
) -> Result<Var> {
    daa_multi(g, fm, t_y, s_y)
}

fn delta<T: Scalar>(g: &mut Graph<'_, T>, fm: &FeatureMap, mu_y: Var, sigma_y: Var) -> Result<Var> {
    let scale = g.sub(sigma_y, fm.sigma)?;
    let shift = g.sub(mu_y, fm.mu)?;
    g.affine_norm(fm.e, fm.mu, fm.sigma, scale, shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{ParamStore, Tensor};

    fn feature(g: &mut Graph<'_, f64>, c: usize, eps: f64) -> FeatureMap {
        let e = g.input(Tensor::from_fn(&[c, 2, 2], |i| ((i * 7 % 5) as f64) * 0.8 - 1.1 + i as f64 * 0.05));
        FeatureMap::from_features(g, e, eps).unwrap()
    }

    #[test]
    fn identity_and_shift() {
        let ps = ParamStore::new();
        let mut g = Graph::new(&ps);
        let fm = feature(&mut g, 2, 0.0);
        let same = adain(&mut g, &fm, fm.mu, fm.sigma).unwrap();
        assert!(g.value(same).max_abs_diff(g.value(fm.e)) < 1e-12);

        let one = g.constant(&[1], 1.0);
        let mu1 = g.add(fm.mu, one).unwrap();
        let shifted = adain(&mut g, &fm, mu1, fm.sigma).unwrap();
        let want = g.add(fm.e, one).unwrap();
        assert!(g.value(shifted).max_abs_diff(g.value(want)) < 1e-12);
    }

    #[test]
    fn zero_delta_is_exact() {
        let ps = ParamStore::new();
        let mut g = Graph::new(&ps);
        let fm = feature(&mut g, 3, 1e-5);
        let d = daa_single(&mut g, &fm, fm.mu, fm.sigma).unwrap();
        assert!(g.value(d).data().iter().all(|&v| v == 0.0));

        let c = g.constant(&[1], 0.75);
        let mu_c = g.add(fm.mu, c).unwrap();
        let d = daa_single(&mut g, &fm, mu_c, fm.sigma).unwrap();
        assert!(g.value(d).data().iter().all(|&v| (v - 0.75).abs() < 1e-12));
    }

    #[test]
    fn binary_is_multi() {
        let ps = ParamStore::new();
        let mut g = Graph::new(&ps);
        let fm = feature(&mut g, 3, 1e-5);
        let s = g.constant(&[1], 0.4);
        let t = g.constant(&[1], -0.3);
        let a = daa_binary(&mut g, &fm, s, t).unwrap();
        let b = daa_multi(&mut g, &fm, t, s).unwrap();
        assert_eq!(g.value(a), g.value(b));
    }
}
