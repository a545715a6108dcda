//! Reverse-mode automatic differentiation over tensor-valued nodes.
//!
//! A [`Graph`] records every op applied during a forward pass. Parameters are
//! borrowed from a [`ParamStore`] rather than copied, so building a graph
//! per sample is cheap and independent graphs can be evaluated on different
//! threads against the same store. [`Graph::backward`] walks the record in
//! reverse and returns a [`Gradients`] table.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::nn::conv::{self, ConvGeom};
use crate::nn::{gemm, ParamId, ParamStore, Scalar, Tensor};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Value<T> {
    Owned(Tensor<T>),
    Param(ParamId),
}

enum Op<T> {
    Input,
    Param,
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeom,
        cols: Vec<T>,
    },
    Conv2dSplit {
        x: Var,
        w: Var,
        geom: ConvGeom,
        cols: Vec<T>,
    },
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    MatMul {
        a: Var,
        b: Var,
    },
    Relu(Var),
    GlobalAvgPool(Var),
    ChannelMean(Var),
    ChannelStd {
        x: Var,
        mean: Vec<T>,
    },
    GlobalMean(Var),
    GlobalStd {
        x: Var,
        mean: T,
    },
    AffineNorm {
        x: Var,
        mu: Var,
        sigma: Var,
        scale: Var,
        shift: Var,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AffineConst {
        x: Var,
        a: T,
    },
    Sum(Var),
    Mean(Var),
    SmoothL1 {
        pred: Var,
        target: Var,
        beta: T,
    },
    Reshape(Var),
    Concat0(Vec<Var>),
    ConcatCols(Vec<Var>),
    Gather {
        x: Var,
        idx: Vec<usize>,
    },
    Column {
        x: Var,
        j: usize,
    },
    BiasReluGap {
        x: Var,
        b: Var,
    },
    MixReluGap {
        coeff: Var,
        basis: Var,
        b: Var,
        channels: usize,
    },
    AddChannelBias {
        x: Var,
        b: Var,
    },
}

impl<T> Op<T> {
    fn parents(&self) -> Vec<Var> {
        match self {
            Op::Input | Op::Param => vec![],
            Op::Conv2d { x, w, b, .. } | Op::Linear { x, w, b } => {
                let mut v = vec![*x, *w];
                v.extend(b.iter().copied());
                v
            }
            Op::Conv2dSplit { x, w, .. } => vec![*x, *w],
            Op::MatMul { a, b } => vec![*a, *b],
            Op::Relu(x)
            | Op::GlobalAvgPool(x)
            | Op::ChannelMean(x)
            | Op::GlobalMean(x)
            | Op::Sum(x)
            | Op::Mean(x)
            | Op::Reshape(x) => vec![*x],
            Op::ChannelStd { x, .. }
            | Op::GlobalStd { x, .. }
            | Op::AffineConst { x, .. }
            | Op::Gather { x, .. }
            | Op::Column { x, .. } => vec![*x],
            Op::AffineNorm {
                x,
                mu,
                sigma,
                scale,
                shift,
            } => vec![*x, *mu, *sigma, *scale, *shift],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::SmoothL1 { pred, target, .. } => vec![*pred, *target],
            Op::Concat0(v) | Op::ConcatCols(v) => v.clone(),
            Op::AddChannelBias { x, b } | Op::BiasReluGap { x, b } => vec![*x, *b],
            Op::MixReluGap { coeff, basis, b, .. } => vec![*coeff, *basis, *b],
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param => "param",
            Op::Conv2d { .. } => "conv2d",
            Op::Conv2dSplit { .. } => "conv2d_split",
            Op::Linear { .. } => "fully_connected",
            Op::MatMul { .. } => "matmul",
            Op::Relu(_) => "relu",
            Op::GlobalAvgPool(_) => "global_avg_pool",
            Op::ChannelMean(_) => "channel_mean",
            Op::ChannelStd { .. } => "channel_std",
            Op::GlobalMean(_) => "global_mean",
            Op::GlobalStd { .. } => "global_std",
            Op::AffineNorm { .. } => "affine_norm",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::AffineConst { .. } => "affine_const",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
            Op::SmoothL1 { .. } => "smooth_l1",
            Op::Reshape(_) => "reshape",
            Op::Concat0(_) => "concat",
            Op::ConcatCols(_) => "concat_cols",
            Op::Gather { .. } => "gather",
            Op::Column { .. } => "column",
            Op::AddChannelBias { .. } => "add_channel_bias",
            Op::BiasReluGap { .. } => "bias_relu_gap",
            Op::MixReluGap { .. } => "mix_relu_gap",
        }
    }
}

struct Node<T> {
    value: Value<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Recorded forward computation.
pub struct Graph<'p, T: Scalar> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
    param_vars: HashMap<ParamId, Var>,
    train: bool,
    exec: Exec,
}

impl<'p, T: Scalar> Graph<'p, T> {
    /// Graph whose parameter nodes require gradients.
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            param_vars: HashMap::new(),
            train: true,
            exec: Exec::default(),
        }
    }

    /// Graph for pure evaluation: nothing requires gradients, so no
    /// backward caches are kept.
    pub fn inference(params: &'p ParamStore<T>) -> Self {
        Self {
            train: false,
            ..Self::new(params)
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        match &self.nodes[v.0].value {
            Value::Owned(t) => t,
            Value::Param(id) => self.params.value(*id),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn data(&self, v: Var) -> &[T] {
        self.value(v).data()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                op: op.name(),
                node: self.nodes.len(),
            });
        }
        let needs_grad = op.parents().iter().any(|p| self.nodes[p.0].needs_grad);
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Constant input (no gradient).
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(t),
            op: Op::Input,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Free leaf that receives a gradient. Used by tests and probes.
    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(t),
            op: Op::Input,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, shape: &[usize], value: T) -> Var {
        self.input(Tensor::full(shape, value))
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        let needs_grad = self.train && self.params.get(id).trainable;
        self.nodes.push(Node {
            value: Value::Param(id),
            op: Op::Param,
            needs_grad,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars.insert(id, v);
        v
    }

    pub fn param_by_name(&mut self, name: &str) -> Result<Var> {
        let id = self
            .params
            .id(name)
            .ok_or_else(|| Error::Contract(format!("unknown parameter `{name}`")))?;
        Ok(self.param(id))
    }

    // ---- layers -------------------------------------------------------

    pub fn conv2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: usize,
    ) -> Result<Var> {
        let geom = ConvGeom::new(self.shape(x), self.shape(w), stride, pad)?;
        if let Some(b) = b {
            if self.shape(b) != [geom.cout] {
                return Err(Error::Dimension(format!(
                    "conv2d bias shape {:?}, expected [{}]",
                    self.shape(b),
                    geom.cout
                )));
            }
        }
        let keep = self.nodes[w.0].needs_grad;
        let (out, cols) = conv::conv_forward(
            &geom,
            self.data(x),
            self.data(w),
            b.map(|b| self.data(b)),
            keep,
            self.exec,
        );
        let t = Tensor::new(&[geom.n, geom.cout, geom.oh, geom.ow], out)?;
        self.push(t, Op::Conv2d { x, w, b, geom, cols })
    }

    /// Per-input-channel convolution of a `C x H x W` tensor without bias.
    /// Output `C x C_out x H' x W'`; summing the first axis yields the plain
    /// convolution.
    pub fn conv2d_split(&mut self, x: Var, w: Var, stride: usize, pad: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 {
            return Err(Error::Dimension(format!("conv2d_split expects C x H x W, got {s:?}")));
        }
        let geom = ConvGeom::new(&[1, s[0], s[1], s[2]], self.shape(w), stride, pad)?;
        let (out, cols) = conv::conv_split_forward(&geom, self.data(x), self.data(w));
        let t = Tensor::new(&[geom.cin, geom.cout, geom.oh, geom.ow], out)?;
        self.push(t, Op::Conv2dSplit { x, w, geom, cols })
    }

    /// `y = x W^T + b` for `x: N x D_in`, `W: D_out x D_in`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xs, ws) = (self.shape(x), self.shape(w));
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] {
            return Err(Error::Dimension(format!(
                "fully_connected: input {xs:?} incompatible with weight {ws:?}"
            )));
        }
        let (n, din, dout) = (xs[0], xs[1], ws[0]);
        if let Some(b) = b {
            if self.shape(b) != [dout] {
                return Err(Error::Dimension(format!(
                    "fully_connected bias shape {:?}, expected [{dout}]",
                    self.shape(b)
                )));
            }
        }
        let mut out = vec![T::zero(); n * dout];
        if let Some(b) = b {
            let bd = self.data(b);
            for row in out.chunks_mut(dout) {
                row.copy_from_slice(bd);
            }
        }
        gemm(n, din, dout, T::one(), self.data(x), false, self.data(w), true, T::one(), &mut out);
        self.push(Tensor::new(&[n, dout], out)?, Op::Linear { x, w, b })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::Dimension(format!("matmul: {sa:?} x {sb:?}")));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![T::zero(); m * n];
        gemm(m, k, n, T::one(), self.data(a), false, self.data(b), false, T::zero(), &mut out);
        self.push(Tensor::new(&[m, n], out)?, Op::MatMul { a, b })
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let out = Tensor::new(
            v.shape(),
            v.data().iter().map(|&a| if a > T::zero() { a } else { T::zero() }).collect(),
        )?;
        self.push(out, Op::Relu(x))
    }

    /// `N x C x h x w -> N x C`.
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 4 {
            return Err(Error::Dimension(format!("global_avg_pool expects 4-d, got {s:?}")));
        }
        let plane = s[2] * s[3];
        let inv = T::one() / T::from_f64(plane as f64);
        let out: Vec<T> = self
            .data(x)
            .chunks(plane)
            .map(|c| c.iter().copied().sum::<T>() * inv)
            .collect();
        self.push(Tensor::new(&[s[0], s[1]], out)?, Op::GlobalAvgPool(x))
    }

    // ---- statistics ---------------------------------------------------

    /// Per-channel spatial mean of a `C x ...` tensor.
    pub fn channel_mean(&mut self, x: Var) -> Result<Var> {
        let (c, plane) = channel_split(self.shape(x))?;
        let inv = T::one() / T::from_f64(plane as f64);
        let out: Vec<T> = self
            .data(x)
            .chunks(plane)
            .map(|ch| ch.iter().copied().sum::<T>() * inv)
            .collect();
        self.push(Tensor::new(&[c], out)?, Op::ChannelMean(x))
    }

    /// Per-channel `sqrt(population variance + eps)`.
    pub fn channel_std(&mut self, x: Var, eps: T) -> Result<Var> {
        check_eps(eps)?;
        let (c, plane) = channel_split(self.shape(x))?;
        let inv = T::one() / T::from_f64(plane as f64);
        let mut mean = Vec::with_capacity(c);
        let mut out = Vec::with_capacity(c);
        for ch in self.data(x).chunks(plane) {
            let m = ch.iter().copied().sum::<T>() * inv;
            let var = ch.iter().map(|&v| (v - m) * (v - m)).sum::<T>() * inv;
            mean.push(m);
            out.push((var + eps).sqrt());
        }
        self.push(Tensor::new(&[c], out)?, Op::ChannelStd { x, mean })
    }

    /// Mean over every element, shape `[1]`.
    pub fn global_mean(&mut self, x: Var) -> Result<Var> {
        let d = self.data(x);
        // same arithmetic as the per-channel reduction, so C = 1 agrees bitwise
        let inv = T::one() / T::from_f64(d.len() as f64);
        let m = d.iter().copied().sum::<T>() * inv;
        self.push(Tensor::scalar(m), Op::GlobalMean(x))
    }

    /// `sqrt(variance + eps)` over every element, shape `[1]`.
    pub fn global_std(&mut self, x: Var, eps: T) -> Result<Var> {
        check_eps(eps)?;
        let d = self.data(x);
        let inv = T::one() / T::from_f64(d.len() as f64);
        let mean = d.iter().copied().sum::<T>() * inv;
        let var = d.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv;
        self.push(Tensor::scalar((var + eps).sqrt()), Op::GlobalStd { x, mean })
    }

    /// `scale_c * (x_c - mu_c) / sigma_c + shift_c` on a `C x ...` tensor.
    /// `scale` and `shift` are per channel (`[C]`) or shared (`[1]`).
    pub fn affine_norm(
        &mut self,
        x: Var,
        mu: Var,
        sigma: Var,
        scale: Var,
        shift: Var,
    ) -> Result<Var> {
        let (c, plane) = channel_split(self.shape(x))?;
        for (name, v, allow_shared) in [
            ("mu", mu, false),
            ("sigma", sigma, false),
            ("scale", scale, true),
            ("shift", shift, true),
        ] {
            let n = self.value(v).len();
            if !(n == c || (allow_shared && n == 1)) {
                return Err(Error::Dimension(format!(
                    "affine_norm: {name} has {n} values for {c} channels"
                )));
            }
        }
        let (xd, md, sd) = (self.data(x), self.data(mu), self.data(sigma));
        let (scd, shd) = (self.data(scale), self.data(shift));
        let mut out = Vec::with_capacity(xd.len());
        for ch in 0..c {
            let a = bcast(scd, ch);
            let b = bcast(shd, ch);
            let (m, s) = (md[ch], sd[ch]);
            out.extend(
                xd[ch * plane..(ch + 1) * plane]
                    .iter()
                    .map(|&v| a * ((v - m) / s) + b),
            );
        }
        let t = Tensor::new(self.shape(x), out)?;
        self.push(
            t,
            Op::AffineNorm {
                x,
                mu,
                sigma,
                scale,
                shift,
            },
        )
    }

    // ---- elementwise --------------------------------------------------

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(T, T) -> T, op: Op<T>) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let shape = if va.shape() == vb.shape() || vb.len() == 1 {
            va.shape().to_vec()
        } else if va.len() == 1 {
            vb.shape().to_vec()
        } else {
            return Err(Error::Dimension(format!(
                "{}: shapes {:?} and {:?} do not match",
                op.name(),
                va.shape(),
                vb.shape()
            )));
        };
        let n: usize = shape.iter().product();
        let out = (0..n)
            .map(|i| f(bcast(va.data(), i), bcast(vb.data(), i)))
            .collect();
        self.push(Tensor::new(&shape, out)?, op)
    }

    /// Elementwise sum; either side may be a single value broadcast over the other.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// `a * x + b` with constant `a`, `b`.
    pub fn affine_const(&mut self, x: Var, a: T, b: T) -> Result<Var> {
        let v = self.value(x);
        let out = Tensor::new(v.shape(), v.data().iter().map(|&e| a * e + b).collect())?;
        self.push(out, Op::AffineConst { x, a })
    }

    pub fn scale(&mut self, x: Var, a: T) -> Result<Var> {
        self.affine_const(x, a, T::zero())
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.data(x).iter().copied().sum::<T>();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let d = self.data(x);
        let s = d.iter().copied().sum::<T>() / T::from_f64(d.len() as f64);
        self.push(Tensor::scalar(s), Op::Mean(x))
    }

    /// Mean smooth-L1 loss: `0.5 d^2 / beta` if `|d| < beta`, else `|d| - 0.5 beta`.
    pub fn smooth_l1(&mut self, pred: Var, target: Var, beta: T) -> Result<Var> {
        if self.shape(pred) != self.shape(target) {
            return Err(Error::Dimension(format!(
                "smooth_l1: prediction {:?} vs target {:?}",
                self.shape(pred),
                self.shape(target)
            )));
        }
        if beta <= T::zero() {
            return Err(Error::Contract("smooth_l1 beta must be positive".into()));
        }
        let loss = smooth_l1_value(self.data(pred), self.data(target), beta);
        self.push(Tensor::scalar(loss), Op::SmoothL1 { pred, target, beta })
    }

    // ---- shape plumbing -----------------------------------------------

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).clone().reshape(shape)?;
        self.push(t, Op::Reshape(x))
    }

    /// Concatenates along the first axis; trailing dims must agree.
    pub fn concat(&mut self, xs: &[Var]) -> Result<Var> {
        let first = xs
            .first()
            .ok_or_else(|| Error::Contract("concat of zero tensors".into()))?;
        let tail = self.shape(*first)[1..].to_vec();
        let mut rows = 0;
        let mut out = Vec::new();
        for &v in xs {
            let s = self.shape(v);
            if s[1..] != tail[..] {
                return Err(Error::Dimension(format!("concat: {s:?} vs trailing {tail:?}")));
            }
            rows += s[0];
            out.extend_from_slice(self.data(v));
        }
        let mut shape = vec![rows];
        shape.extend(tail);
        self.push(Tensor::new(&shape, out)?, Op::Concat0(xs.to_vec()))
    }

    /// Stacks equally shaped tensors along a new leading axis.
    pub fn stack(&mut self, xs: &[Var]) -> Result<Var> {
        let first = xs
            .first()
            .ok_or_else(|| Error::Contract("stack of zero tensors".into()))?;
        let inner = self.shape(*first).to_vec();
        let mut out = Vec::with_capacity(xs.len() * self.value(*first).len());
        for &v in xs {
            if self.shape(v) != inner.as_slice() {
                return Err(Error::Dimension(format!(
                    "stack: {:?} vs {inner:?}",
                    self.shape(v)
                )));
            }
            out.extend_from_slice(self.data(v));
        }
        let mut shape = vec![xs.len()];
        shape.extend(inner);
        // Stacking is concatenation of `[1, ...]` views.
        self.push(Tensor::new(&shape, out)?, Op::Concat0(xs.to_vec()))
    }

    /// Concatenates 2-d (or 1-d, treated as a column) tensors along columns.
    pub fn concat_cols(&mut self, xs: &[Var]) -> Result<Var> {
        let first = xs
            .first()
            .ok_or_else(|| Error::Contract("concat_cols of zero tensors".into()))?;
        let rows = self.shape(*first)[0];
        let mut widths = Vec::with_capacity(xs.len());
        for &v in xs {
            let s = self.shape(v);
            let w = match s.len() {
                1 => 1,
                2 => s[1],
                _ => return Err(Error::Dimension(format!("concat_cols: {s:?}"))),
            };
            if s[0] != rows {
                return Err(Error::Dimension(format!("concat_cols: {s:?} has {} rows, want {rows}", s[0])));
            }
            widths.push(w);
        }
        let total: usize = widths.iter().sum();
        let mut out = vec![T::zero(); rows * total];
        let mut off = 0;
        for (&v, &w) in xs.iter().zip(&widths) {
            let d = self.data(v);
            for r in 0..rows {
                out[r * total + off..r * total + off + w].copy_from_slice(&d[r * w..(r + 1) * w]);
            }
            off += w;
        }
        self.push(Tensor::new(&[rows, total], out)?, Op::ConcatCols(xs.to_vec()))
    }

    /// Picks flat elements by index, output shape `[idx.len()]`.
    pub fn gather(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let d = self.data(x);
        if let Some(&bad) = idx.iter().find(|&&i| i >= d.len()) {
            return Err(Error::Range(format!("gather index {bad} out of {}", d.len())));
        }
        if idx.is_empty() {
            return Err(Error::Contract("gather with no indices".into()));
        }
        let out = idx.iter().map(|&i| d[i]).collect();
        self.push(Tensor::new(&[idx.len()], out)?, Op::Gather { x, idx: idx.to_vec() })
    }

    /// Column `j` of a 2-d tensor.
    pub fn column(&mut self, x: Var, j: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 2 || j >= s[1] {
            return Err(Error::Dimension(format!("column {j} of {s:?}")));
        }
        let out = self.data(x).chunks(s[1]).map(|r| r[j]).collect();
        self.push(Tensor::new(&[s[0]], out)?, Op::Column { x, j })
    }

    /// Adds `b[c]` to every element of channel `c` of an `N x C x ...` tensor.
    pub fn add_channel_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() < 2 || self.shape(b) != [s[1]] {
            return Err(Error::Dimension(format!(
                "add_channel_bias: {s:?} with bias {:?}",
                self.shape(b)
            )));
        }
        let plane: usize = s[2..].iter().product();
        let bd = self.data(b);
        let mut out = self.data(x).to_vec();
        for (i, ch) in out.chunks_mut(plane).enumerate() {
            let add = bd[i % s[1]];
            ch.iter_mut().for_each(|v| *v = *v + add);
        }
        self.push(Tensor::new(&s, out)?, Op::AddChannelBias { x, b })
    }

    /// `mean_p relu(x[n, c, p] + b[c])`: bias, ReLU and global average
    /// pooling of an `N x C x h x w` tensor in one step, `-> N x C`.
    pub fn bias_relu_gap(&mut self, x: Var, b: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 4 || self.shape(b) != [s[1]] {
            return Err(Error::Dimension(format!(
                "bias_relu_gap: {s:?} with bias {:?}",
                self.shape(b)
            )));
        }
        let plane = s[2] * s[3];
        let mut out = vec![T::zero(); s[0] * s[1]];
        relu_gap_rows(self.data(x), self.data(b), plane, &mut out);
        self.push(Tensor::new(&[s[0], s[1]], out)?, Op::BiasReluGap { x, b })
    }

    /// `bias_relu_gap(reshape(coeff x basis, [K, C, plane]), b)` without
    /// materializing the `K x (C * plane)` product: rows are formed in
    /// blocks and reduced immediately, and recomputed during backward.
    /// `coeff` is `K x M`, `basis` is `M x (C * plane)`, `b` is `[C]`.
    pub fn mix_relu_gap(&mut self, coeff: Var, basis: Var, b: Var) -> Result<Var> {
        let (sc, sb) = (self.shape(coeff).to_vec(), self.shape(basis).to_vec());
        let channels = self.shape(b).first().copied().unwrap_or(0);
        if sc.len() != 2
            || sb.len() != 2
            || sc[1] != sb[0]
            || self.shape(b).len() != 1
            || channels == 0
            || sb[1] % channels != 0
        {
            return Err(Error::Dimension(format!(
                "mix_relu_gap: {sc:?} x {sb:?} with bias {:?}",
                self.shape(b)
            )));
        }
        let (k, m, l) = (sc[0], sc[1], sb[1]);
        let plane = l / channels;
        let (cd, bd, bias) = (self.data(coeff), self.data(basis), self.data(b));
        let mut out = vec![T::zero(); k * channels];
        let block = mix_block(m, k);
        let mut pre = vec![T::zero(); block * l];
        for r0 in (0..k).step_by(block) {
            let rows = block.min(k - r0);
            let pre = &mut pre[..rows * l];
            mix_rows(&cd[r0 * m..(r0 + rows) * m], bd, m, l, pre);
            relu_gap_rows(pre, bias, plane, &mut out[r0 * channels..(r0 + rows) * channels]);
        }
        self.push(
            Tensor::new(&[k, channels], out)?,
            Op::MixReluGap {
                coeff,
                basis,
                b,
                channels,
            },
        )
    }

    // ---- backward -----------------------------------------------------

    /// Propagates `d loss / d node` for every node that requires a gradient.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut acc = Accum {
            grads: (0..self.nodes.len()).map(|_| None).collect(),
            nodes: &self.nodes,
            params: self.params,
        };
        if self.nodes[loss.0].needs_grad {
            acc.grads[loss.0] = Some(vec![T::one()]);
        }
        for i in (0..=loss.0).rev() {
            let Some(g) = acc.grads[i].take() else { continue };
            self.backward_node(i, &g, &mut acc)?;
            acc.grads[i] = Some(g);
        }
        Ok(Gradients {
            grads: acc.grads,
            param_vars: self.param_vars.clone(),
        })
    }

    fn backward_node(&self, i: usize, g: &[T], acc: &mut Accum<'_, T>) -> Result<()> {
        match &self.nodes[i].op {
            Op::Input | Op::Param => {}
            Op::Conv2d { x, w, b, geom, cols } => {
                if let Some(dx) = acc.buf(*x) {
                    conv::conv_backward_input(geom, self.data(*w), g, dx, self.exec);
                }
                let db = match b {
                    Some(b) if acc.wants(*b) => {
                        let mut db = vec![T::zero(); geom.cout];
                        conv::conv_backward_weight(geom, cols, g, None, Some(&mut db));
                        Some((*b, db))
                    }
                    _ => None,
                };
                if let Some((b, db)) = db {
                    acc.add(b, &db);
                }
                if let Some(dw) = acc.buf(*w) {
                    conv::conv_backward_weight(geom, cols, g, Some(dw), None);
                }
            }
            Op::Conv2dSplit { x, w, geom, cols } => {
                let wd = self.data(*w);
                if let Some(dx) = acc.buf(*x) {
                    conv::conv_split_backward(geom, wd, cols, g, Some(dx), None);
                }
                if let Some(dw) = acc.buf(*w) {
                    conv::conv_split_backward(geom, wd, cols, g, None, Some(dw));
                }
            }
            Op::Linear { x, w, b } => {
                let xs = self.shape(*x);
                let (n, din) = (xs[0], xs[1]);
                let dout = self.shape(*w)[0];
                if let Some(dx) = acc.buf(*x) {
                    gemm(n, dout, din, T::one(), g, false, self.data(*w), false, T::one(), dx);
                }
                if let Some(dw) = acc.buf(*w) {
                    gemm(dout, n, din, T::one(), g, true, self.data(*x), false, T::one(), dw);
                }
                if let Some(b) = b {
                    if let Some(db) = acc.buf(*b) {
                        for row in g.chunks(dout) {
                            for (d, &v) in db.iter_mut().zip(row) {
                                *d = *d + v;
                            }
                        }
                    }
                }
            }
            Op::MatMul { a, b } => {
                let (m, k) = (self.shape(*a)[0], self.shape(*a)[1]);
                let n = self.shape(*b)[1];
                if let Some(da) = acc.buf(*a) {
                    gemm(m, n, k, T::one(), g, false, self.data(*b), true, T::one(), da);
                }
                if let Some(db) = acc.buf(*b) {
                    gemm(k, m, n, T::one(), self.data(*a), true, g, false, T::one(), db);
                }
            }
            Op::Relu(x) => {
                let xd = self.data(*x);
                if let Some(dx) = acc.buf(*x) {
                    for ((d, &v), &gi) in dx.iter_mut().zip(xd).zip(g) {
                        if v > T::zero() {
                            *d = *d + gi;
                        }
                    }
                }
            }
            Op::GlobalAvgPool(x) => {
                let s = self.shape(*x);
                let plane = s[2] * s[3];
                let inv = T::one() / T::from_f64(plane as f64);
                if let Some(dx) = acc.buf(*x) {
                    for (ch, &gi) in dx.chunks_mut(plane).zip(g) {
                        ch.iter_mut().for_each(|d| *d = *d + gi * inv);
                    }
                }
            }
            Op::ChannelMean(x) => {
                let (_, plane) = channel_split(self.shape(*x))?;
                let inv = T::one() / T::from_f64(plane as f64);
                if let Some(dx) = acc.buf(*x) {
                    for (ch, &gi) in dx.chunks_mut(plane).zip(g) {
                        ch.iter_mut().for_each(|d| *d = *d + gi * inv);
                    }
                }
            }
            Op::ChannelStd { x, mean } => {
                let (_, plane) = channel_split(self.shape(*x))?;
                let n = T::from_f64(plane as f64);
                let sigma = self.nodes[i].value_owned();
                let xd = self.data(*x);
                if let Some(dx) = acc.buf(*x) {
                    for c in 0..mean.len() {
                        let f = g[c] / (n * sigma[c]);
                        let m = mean[c];
                        for (d, &v) in dx[c * plane..(c + 1) * plane]
                            .iter_mut()
                            .zip(&xd[c * plane..(c + 1) * plane])
                        {
                            *d = *d + f * (v - m);
                        }
                    }
                }
            }
            Op::GlobalMean(x) | Op::Mean(x) => {
                let len = self.value(*x).len();
                let f = g[0] / T::from_f64(len as f64);
                if let Some(dx) = acc.buf(*x) {
                    dx.iter_mut().for_each(|d| *d = *d + f);
                }
            }
            Op::GlobalStd { x, mean } => {
                let xd = self.data(*x);
                let sigma = self.nodes[i].value_owned()[0];
                let f = g[0] / (T::from_f64(xd.len() as f64) * sigma);
                if let Some(dx) = acc.buf(*x) {
                    for (d, &v) in dx.iter_mut().zip(xd) {
                        *d = *d + f * (v - *mean);
                    }
                }
            }
            Op::AffineNorm {
                x,
                mu,
                sigma,
                scale,
                shift,
            } => self.backward_affine_norm(g, *x, *mu, *sigma, *scale, *shift, acc)?,
            Op::Add(a, b) => {
                acc.add_reduced(*a, g, |_| T::one());
                acc.add_reduced(*b, g, |_| T::one());
            }
            Op::Sub(a, b) => {
                acc.add_reduced(*a, g, |_| T::one());
                acc.add_reduced(*b, g, |_| -T::one());
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (self.data(*a), self.data(*b));
                acc.add_reduced(*a, g, |k| bcast(bd, k));
                acc.add_reduced(*b, g, |k| bcast(ad, k));
            }
            Op::AffineConst { x, a } => {
                if let Some(dx) = acc.buf(*x) {
                    for (d, &gi) in dx.iter_mut().zip(g) {
                        *d = *d + *a * gi;
                    }
                }
            }
            Op::Sum(x) => {
                if let Some(dx) = acc.buf(*x) {
                    dx.iter_mut().for_each(|d| *d = *d + g[0]);
                }
            }
            Op::SmoothL1 { pred, target, beta } => {
                let (p, t) = (self.data(*pred), self.data(*target));
                let n = T::from_f64(p.len() as f64);
                let dl: Vec<T> = p
                    .iter()
                    .zip(t)
                    .map(|(&a, &b)| g[0] * smooth_l1_slope(a - b, *beta) / n)
                    .collect();
                if let Some(dp) = acc.buf(*pred) {
                    dp.iter_mut().zip(&dl).for_each(|(d, &v)| *d = *d + v);
                }
                if let Some(dt) = acc.buf(*target) {
                    dt.iter_mut().zip(&dl).for_each(|(d, &v)| *d = *d - v);
                }
            }
            Op::Reshape(x) => {
                if let Some(dx) = acc.buf(*x) {
                    dx.iter_mut().zip(g).for_each(|(d, &v)| *d = *d + v);
                }
            }
            Op::Concat0(xs) => {
                let mut off = 0;
                for &v in xs {
                    let len = self.value(v).len();
                    if let Some(dx) = acc.buf(v) {
                        dx.iter_mut()
                            .zip(&g[off..off + len])
                            .for_each(|(d, &e)| *d = *d + e);
                    }
                    off += len;
                }
            }
            Op::ConcatCols(xs) => {
                let rows = self.shape(xs[0])[0];
                let total = g.len() / rows;
                let mut off = 0;
                for &v in xs {
                    let w = self.value(v).len() / rows;
                    if let Some(dx) = acc.buf(v) {
                        for r in 0..rows {
                            for c in 0..w {
                                dx[r * w + c] = dx[r * w + c] + g[r * total + off + c];
                            }
                        }
                    }
                    off += w;
                }
            }
            Op::Gather { x, idx } => {
                if let Some(dx) = acc.buf(*x) {
                    for (&k, &gi) in idx.iter().zip(g) {
                        dx[k] = dx[k] + gi;
                    }
                }
            }
            Op::Column { x, j } => {
                let cols = self.shape(*x)[1];
                if let Some(dx) = acc.buf(*x) {
                    for (r, &gi) in g.iter().enumerate() {
                        dx[r * cols + j] = dx[r * cols + j] + gi;
                    }
                }
            }
            Op::BiasReluGap { x, b } => {
                let s = self.shape(*x);
                let plane = s[2] * s[3];
                let mut dpre = vec![T::zero(); self.value(*x).len()];
                relu_gap_backward_rows(self.data(*x), self.data(*b), plane, g, &mut dpre);
                if let Some(db) = acc.buf(*b) {
                    accumulate_bias(&dpre, plane, db);
                }
                acc.add(*x, &dpre);
            }
            Op::MixReluGap {
                coeff,
                basis,
                b,
                channels,
            } => {
                let (k, m) = (self.shape(*coeff)[0], self.shape(*coeff)[1]);
                let l = self.shape(*basis)[1];
                let plane = l / channels;
                let (cd, bd, bias) = (self.data(*coeff), self.data(*basis), self.data(*b));
                let mut dcoeff = acc.wants(*coeff).then(|| vec![T::zero(); k * m]);
                let mut dbasis = acc.wants(*basis).then(|| vec![T::zero(); m * l]);
                let mut dbias = acc.wants(*b).then(|| vec![T::zero(); *channels]);
                let block = mix_block(m, k);
                let mut pre = vec![T::zero(); block * l];
                let mut dpre = vec![T::zero(); block * l];
                for r0 in (0..k).step_by(block) {
                    let rows = block.min(k - r0);
                    let crow = &cd[r0 * m..(r0 + rows) * m];
                    let (pre, dpre) = (&mut pre[..rows * l], &mut dpre[..rows * l]);
                    mix_rows(crow, bd, m, l, pre);
                    dpre.fill(T::zero());
                    let grow = &g[r0 * channels..(r0 + rows) * channels];
                    relu_gap_backward_rows(pre, bias, plane, grow, dpre);
                    if let Some(dc) = dcoeff.as_mut() {
                        let dc = &mut dc[r0 * m..(r0 + rows) * m];
                        if m <= SMALL_MIX {
                            for (dcr, dpr) in dc.chunks_mut(m).zip(dpre.chunks(l)) {
                                for (d, brow) in dcr.iter_mut().zip(bd.chunks(l)) {
                                    *d = dot(dpr, brow);
                                }
                            }
                        } else {
                            gemm(rows, l, m, T::one(), dpre, false, bd, true, T::zero(), dc);
                        }
                    }
                    if let Some(dbs) = dbasis.as_mut() {
                        if m <= SMALL_MIX {
                            for (cr, dpr) in crow.chunks(m).zip(dpre.chunks(l)) {
                                for (&c, dbr) in cr.iter().zip(dbs.chunks_mut(l)) {
                                    axpy(c, dpr, dbr);
                                }
                            }
                        } else {
                            gemm(m, rows, l, T::one(), crow, true, dpre, false, T::one(), dbs);
                        }
                    }
                    if let Some(db) = dbias.as_mut() {
                        accumulate_bias(dpre, plane, db);
                    }
                }
                if let Some(d) = dcoeff {
                    acc.add(*coeff, &d);
                }
                if let Some(d) = dbasis {
                    acc.add(*basis, &d);
                }
                if let Some(d) = dbias {
                    acc.add(*b, &d);
                }
            }
            Op::AddChannelBias { x, b } => {
                let s = self.shape(*x);
                let c = s[1];
                let plane: usize = s[2..].iter().product();
                if let Some(dx) = acc.buf(*x) {
                    dx.iter_mut().zip(g).for_each(|(d, &v)| *d = *d + v);
                }
                if let Some(db) = acc.buf(*b) {
                    for (k, ch) in g.chunks(plane).enumerate() {
                        db[k % c] = db[k % c] + ch.iter().copied().sum::<T>();
                    }
                }
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn backward_affine_norm(
        &self,
        g: &[T],
        x: Var,
        mu: Var,
        sigma: Var,
        scale: Var,
        shift: Var,
        acc: &mut Accum<'_, T>,
    ) -> Result<()> {
        let (c, plane) = channel_split(self.shape(x))?;
        let (xd, md, sd) = (self.data(x), self.data(mu), self.data(sigma));
        let scd = self.data(scale);
        // Per channel: sum(g * n) and sum(g), with n = (x - mu) / sigma.
        let mut gn = vec![T::zero(); c];
        let mut gs = vec![T::zero(); c];
        for ch in 0..c {
            let (m, s) = (md[ch], sd[ch]);
            let r = ch * plane..(ch + 1) * plane;
            for (&gi, &v) in g[r.clone()].iter().zip(&xd[r]) {
                gn[ch] = gn[ch] + gi * ((v - m) / s);
                gs[ch] = gs[ch] + gi;
            }
        }
        if let Some(dx) = acc.buf(x) {
            for ch in 0..c {
                let f = bcast(scd, ch) / sd[ch];
                for (d, &gi) in dx[ch * plane..(ch + 1) * plane]
                    .iter_mut()
                    .zip(&g[ch * plane..(ch + 1) * plane])
                {
                    *d = *d + f * gi;
                }
            }
        }
        if let Some(dm) = acc.buf(mu) {
            for ch in 0..c {
                dm[ch] = dm[ch] - bcast(scd, ch) / sd[ch] * gs[ch];
            }
        }
        if let Some(dsig) = acc.buf(sigma) {
            for ch in 0..c {
                dsig[ch] = dsig[ch] - bcast(scd, ch) / sd[ch] * gn[ch];
            }
        }
        if let Some(dsc) = acc.buf(scale) {
            reduce_into(dsc, &gn);
        }
        if let Some(dsh) = acc.buf(shift) {
            reduce_into(dsh, &gs);
        }
        Ok(())
    }
}

impl<T: Scalar> Node<T> {
    fn value_owned(&self) -> &[T] {
        match &self.value {
            Value::Owned(t) => t.data(),
            Value::Param(_) => unreachable!("op nodes own their values"),
        }
    }
}

/// Adds per-channel sums into a `[C]` or shared `[1]` gradient slot.
fn reduce_into<T: Scalar>(dst: &mut [T], per_channel: &[T]) {
    if dst.len() == 1 {
        dst[0] = dst[0] + per_channel.iter().copied().sum::<T>();
    } else {
        for (d, &v) in dst.iter_mut().zip(per_channel) {
            *d = *d + v;
        }
    }
}

#[inline]
fn bcast<T: Copy>(d: &[T], i: usize) -> T {
    if d.len() == 1 {
        d[0]
    } else {
        d[i]
    }
}

fn channel_split(shape: &[usize]) -> Result<(usize, usize)> {
    if shape.len() < 2 {
        return Err(Error::Dimension(format!(
            "channel statistics need C x ... input, got {shape:?}"
        )));
    }
    Ok((shape[0], shape[1..].iter().product()))
}

fn check_eps<T: Scalar>(eps: T) -> Result<()> {
    if eps < T::zero() {
        return Err(Error::Contract("eps must be non-negative".into()));
    }
    Ok(())
}

pub(crate) fn smooth_l1_value<T: Scalar>(pred: &[T], target: &[T], beta: T) -> T {
    let half = T::from_f64(0.5);
    let total = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let d = (p - t).abs();
            if d < beta {
                half * d * d / beta
            } else {
                d - half * beta
            }
        })
        .sum::<T>();
    total / T::from_f64(pred.len() as f64)
}

fn smooth_l1_slope<T: Scalar>(d: T, beta: T) -> T {
    if d.abs() < beta {
        d / beta
    } else {
        d.signum()
    }
}

/// Inner dimensions up to this size are mixed row by row with plain loops;
/// larger ones go through blocked GEMM.
const SMALL_MIX: usize = 8;

fn mix_block(m: usize, k: usize) -> usize {
    if m <= SMALL_MIX { 1 } else { 16.min(k) }
}

/// `out = coeff (rows x m) * basis (m x l)`.
fn mix_rows<T: Scalar>(coeff: &[T], basis: &[T], m: usize, l: usize, out: &mut [T]) {
    let rows = coeff.len() / m;
    if m <= SMALL_MIX {
        for (cr, o) in coeff.chunks(m).zip(out.chunks_mut(l)) {
            o.fill(T::zero());
            for (&c, brow) in cr.iter().zip(basis.chunks(l)) {
                axpy(c, brow, o);
            }
        }
    } else {
        gemm(rows, m, l, T::one(), coeff, false, basis, false, T::zero(), out);
    }
}

fn axpy<T: Scalar>(a: T, x: &[T], y: &mut [T]) {
    for (y, &x) in y.iter_mut().zip(x) {
        *y = *y + a * x;
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: T = ca.remainder().iter().zip(cb.remainder()).map(|(&x, &y)| x * y).sum();
    for (xa, xb) in ca.zip(cb) {
        for j in 0..8 {
            acc[j] = acc[j] + xa[j] * xb[j];
        }
    }
    acc.iter().copied().sum::<T>() + tail
}

/// Sum of `f(x)` over a slice with eight independent accumulators, so the
/// loop is not bound by add latency. Fixed order, hence deterministic.
fn lane_sum<T: Scalar>(x: &[T], f: impl Fn(T) -> T) -> T {
    let mut acc = [T::zero(); 8];
    let chunks = x.chunks_exact(8);
    let tail: T = chunks.remainder().iter().map(|&v| f(v)).sum();
    for c in chunks {
        for j in 0..8 {
            acc[j] = acc[j] + f(c[j]);
        }
    }
    acc.iter().copied().sum::<T>() + tail
}

/// `out[r, c] = mean_p relu(x[r, c, p] + b[c])` for rows of `C * plane`.
fn relu_gap_rows<T: Scalar>(x: &[T], b: &[T], plane: usize, out: &mut [T]) {
    let c = b.len();
    let inv = T::one() / T::from_f64(plane as f64);
    for (i, (o, ch)) in out.iter_mut().zip(x.chunks(plane)).enumerate() {
        let bias = b[i % c];
        *o = lane_sum(ch, |v| (v + bias).max(T::zero())) * inv;
    }
}

/// Gradient of [`relu_gap_rows`] w.r.t. its pre-activation input, written
/// into `dx` (same layout as `x`).
fn relu_gap_backward_rows<T: Scalar>(x: &[T], b: &[T], plane: usize, g: &[T], dx: &mut [T]) {
    let c = b.len();
    let inv = T::one() / T::from_f64(plane as f64);
    for (i, (ch, dch)) in x.chunks(plane).zip(dx.chunks_mut(plane)).enumerate() {
        let bias = b[i % c];
        let gi = g[i] * inv;
        for (&v, d) in ch.iter().zip(dch) {
            if v + bias > T::zero() {
                *d = gi;
            }
        }
    }
}

fn accumulate_bias<T: Scalar>(d: &[T], plane: usize, db: &mut [T]) {
    let c = db.len();
    for (i, ch) in d.chunks(plane).enumerate() {
        db[i % c] = db[i % c] + lane_sum(ch, |v| v);
    }
}

struct Accum<'a, T: Scalar> {
    grads: Vec<Option<Vec<T>>>,
    nodes: &'a [Node<T>],
    params: &'a ParamStore<T>,
}

impl<T: Scalar> Accum<'_, T> {
    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn buf(&mut self, v: Var) -> Option<&mut [T]> {
        if !self.nodes[v.0].needs_grad {
            return None;
        }
        let len = match &self.nodes[v.0].value {
            Value::Owned(t) => t.len(),
            Value::Param(id) => self.params.value(*id).len(),
        };
        Some(
            self.grads[v.0]
                .get_or_insert_with(|| vec![T::zero(); len])
                .as_mut_slice(),
        )
    }

    fn add(&mut self, v: Var, g: &[T]) {
        if let Some(d) = self.buf(v) {
            d.iter_mut().zip(g).for_each(|(a, &b)| *a = *a + b);
        }
    }

    /// Accumulates `g[k] * factor(k)` into `v`, summing when `v` was broadcast.
    fn add_reduced(&mut self, v: Var, g: &[T], factor: impl Fn(usize) -> T) {
        if let Some(d) = self.buf(v) {
            if d.len() == g.len() {
                for (k, (a, &b)) in d.iter_mut().zip(g).enumerate() {
                    *a = *a + b * factor(k);
                }
            } else {
                let s = g.iter().enumerate().map(|(k, &b)| b * factor(k)).sum::<T>();
                d[0] = d[0] + s;
            }
        }
    }
}

/// Result of [`Graph::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
    param_vars: HashMap<ParamId, Var>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads[v.0].as_deref()
    }

    pub fn param(&self, id: ParamId) -> Option<&[T]> {
        self.param_vars.get(&id).and_then(|v| self.get(*v))
    }

    /// Gradients of every parameter in store order; `None` where a parameter
    /// did not take part in the computation.
    pub fn param_grads(&self, store: &ParamStore<T>) -> Vec<Option<Vec<T>>> {
        store.ids().map(|id| self.param(id).map(|g| g.to_vec())).collect()
    }

    pub fn accumulate_into(&self, store: &mut ParamStore<T>) -> Result<()> {
        let ids: Vec<ParamId> = store.ids().collect();
        for id in ids {
            if let Some(g) = self.param(id) {
                store.accumulate_grad(id, g)?;
            }
        }
        Ok(())
    }
}
