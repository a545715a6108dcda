//! Dense tensors, reverse-mode differentiation, layer primitives, the
//! smooth-L1 loss and the Adam optimizer.

pub mod conv;
mod graph;
mod optim;
mod param;
mod scalar;
mod tensor;
pub mod weights;

pub use graph::{Gradients, Graph, Var};
pub use optim::{cosine_lr, Adam, AdamConfig};
pub use param::{ParamId, ParamStore, Parameter};
pub use scalar::{gemm, Scalar};
pub use tensor::Tensor;

/// Statistics regularizer added under every square root.
pub const STATS_EPS: f64 = 1e-5;

/// Transition point of the smooth-L1 loss.
pub const SMOOTH_L1_BETA: f64 = 1.0;

#[cfg(test)]
mod tests {
    use super::*;

    fn g64() -> ParamStore<f64> {
        ParamStore::new()
    }

    #[test]
    fn sum_and_square_gradients() {
        let ps = g64();
        let mut g = Graph::new(&ps);
        let x = g.leaf(Tensor::from_f64(&[3], &[1.0, -2.0, 0.5]).unwrap());
        let s = g.sum(x).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[1.0, 1.0, 1.0]);

        let mut g = Graph::new(&ps);
        let x = g.leaf(Tensor::from_f64(&[2], &[1.0, 2.0]).unwrap());
        let sq = g.mul(x, x).unwrap();
        let s = g.sum(sq).unwrap();
        assert_eq!(g.backward(s).unwrap().get(x).unwrap(), &[2.0, 4.0]);
    }

    #[test]
    fn reused_parameter_accumulates() {
        let mut ps = g64();
        let id = ps.insert("w", Tensor::scalar(3.0)).unwrap();
        let mut g = Graph::new(&ps);
        let w = g.param(id);
        let w_again = g.param(id);
        assert_eq!(w, w_again);
        let two = g.add(w, w).unwrap(); // 2w
        let y = g.mul(two, w).unwrap(); // 2w^2
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.param(id).unwrap(), &[12.0]);
    }

    #[test]
    fn backward_needs_scalar() {
        let ps = g64();
        let mut g = Graph::new(&ps);
        let x = g.leaf(Tensor::from_f64(&[2], &[1.0, 2.0]).unwrap());
        assert!(matches!(g.backward(x), Err(crate::Error::Contract(_))));
    }

    #[test]
    fn relu_values_and_subgradient() {
        let ps = g64();
        let mut g = Graph::new(&ps);
        let x = g.leaf(Tensor::from_f64(&[3], &[-1.0, 0.0, 2.0]).unwrap());
        let r = g.relu(x).unwrap();
        assert_eq!(g.value(r).data(), &[0.0, 0.0, 2.0]);
        let s = g.sum(r).unwrap();
        assert_eq!(g.backward(s).unwrap().get(x).unwrap(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn conv_examples() {
        let ps = g64();
        let mut g = Graph::new(&ps);
        let x = g.input(Tensor::from_f64(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0]).unwrap());
        let w = g.input(Tensor::full(&[1, 1, 2, 2], 1.0));
        let y = g.conv2d(x, w, None, 1, 0).unwrap();
        assert_eq!(g.value(y).data(), &[10.0]);

        let img = Tensor::from_fn(&[1, 1, 3, 3], |i| i as f64 * 1.5 - 2.0);
        let x = g.input(img.clone());
        let one = g.input(Tensor::full(&[1, 1, 1, 1], 1.0));
        let y = g.conv2d(x, one, None, 1, 0).unwrap();
        assert_eq!(g.value(y), &img);

        let w3 = g.input(Tensor::zeros(&[2, 1, 2, 2]));
        assert!(g.conv2d(x, w3, None, 1, 0).is_ok());
        let wbad = g.input(Tensor::zeros(&[2, 3, 1, 1]));
        assert!(matches!(g.conv2d(x, wbad, None, 1, 0), Err(crate::Error::Dimension(_))));
    }

    #[test]
    fn fully_connected_examples() {
        let ps = g64();
        let mut g = Graph::new(&ps);
        let x = g.input(Tensor::from_f64(&[1, 2], &[1.0, 2.0]).unwrap());
        let w = g.input(Tensor::from_f64(&[1, 2], &[3.0, 4.0]).unwrap());
        let b = g.input(Tensor::scalar(5.0));
        let y = g.linear(x, w, Some(b)).unwrap();
        assert_eq!(g.value(y).data(), &[16.0]);

        let x = g.input(Tensor::from_f64(&[2, 2], &[1.0, 0.0, 1.0, 2.0]).unwrap());
        let eye = g.input(Tensor::from_f64(&[2, 2], &[1.0, 0.0, 0.0, 1.0]).unwrap());
        let y = g.linear(x, eye, None).unwrap();
        assert_eq!(g.value(y).data(), &[1.0, 0.0, 1.0, 2.0]);
        let bad = g.input(Tensor::zeros(&[2, 3]));
        assert!(g.linear(x, bad, None).is_err());
    }

    #[test]
    fn pooling_examples() {
        let ps = g64();
        let mut g = Graph::new(&ps);
        let x = g.input(Tensor::from_f64(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0]).unwrap());
        let p = g.global_avg_pool(x).unwrap();
        assert_eq!(g.value(p).data(), &[2.5]);
        let x = g.input(Tensor::from_f64(&[1, 2, 1, 1], &[7.0, -3.0]).unwrap());
        let p = g.global_avg_pool(x).unwrap();
        assert_eq!(g.value(p).data(), &[7.0, -3.0]);
    }

    #[test]
    fn statistics_examples() {
        let ps = g64();
        let mut g = Graph::new(&ps);
        let c = g.input(Tensor::full(&[1, 2, 2], 5.0));
        let (m, s) = (g.channel_mean(c).unwrap(), g.channel_std(c, 1e-5).unwrap());
        assert_eq!(g.value(m).item(), 5.0);
        assert_eq!(g.value(s).item(), 1e-5f64.sqrt());

        let x = g.input(Tensor::from_f64(&[1, 2, 2], &[1.0, 3.0, 1.0, 3.0]).unwrap());
        let (m, s) = (g.channel_mean(x).unwrap(), g.channel_std(x, 0.0).unwrap());
        assert_eq!((g.value(m).item(), g.value(s).item()), (2.0, 1.0));

        let y = g.input(Tensor::from_f64(&[2, 1, 1], &[0.0, 2.0]).unwrap());
        let (m, s) = (g.global_mean(y).unwrap(), g.global_std(y, 0.0).unwrap());
        assert_eq!((g.value(m).item(), g.value(s).item()), (1.0, 1.0));
        assert!(g.channel_std(y, -1.0).is_err());
    }

    #[test]
    fn smooth_l1_examples() {
        let ps = g64();
        let mut g = Graph::new(&ps);
        let p = g.input(Tensor::from_f64(&[1], &[0.5]).unwrap());
        let t = g.input(Tensor::from_f64(&[1], &[0.0]).unwrap());
        let l = g.smooth_l1(p, t, 1.0).unwrap();
        assert_eq!(g.value(l).item(), 0.125);
        let p3 = g.input(Tensor::from_f64(&[1], &[3.0]).unwrap());
        let l = g.smooth_l1(p3, t, 1.0).unwrap();
        assert_eq!(g.value(l).item(), 2.5);
        let l = g.smooth_l1(t, t, 1.0).unwrap();
        assert_eq!(g.value(l).item(), 0.0);
        let two = g.input(Tensor::zeros(&[2]));
        assert!(matches!(g.smooth_l1(two, t, 1.0), Err(crate::Error::Dimension(_))));
    }

    #[test]
    fn smooth_l1_gradient_is_clipped() {
        let ps = g64();
        let mut g = Graph::new(&ps);
        let p = g.leaf(Tensor::from_f64(&[4], &[10.0, -10.0, 0.5, 0.0]).unwrap());
        let t = g.input(Tensor::zeros(&[4]));
        let l = g.smooth_l1(p, t, 1.0).unwrap();
        let gr = g.backward(l).unwrap();
        assert_eq!(gr.get(p).unwrap(), &[0.25, -0.25, 0.125, 0.0]);
    }

    #[test]
    fn non_finite_forward_is_reported() {
        let ps = g64();
        let mut g = Graph::new(&ps);
        let x = g.input(Tensor::from_f64(&[1], &[f64::MAX]).unwrap());
        let err = g.affine_const(x, 10.0, 0.0).unwrap_err();
        assert!(matches!(err, crate::Error::NonFinite { op: "affine_const", .. }));
    }
}
