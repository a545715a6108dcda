//! im2col based convolution kernels shared by the graph ops.

use crate::error::{Error, Result};
use crate::exec;
use crate::nn::{gemm, Scalar};

/// Shape bookkeeping for a square-kernel 2-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub n: usize,
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    pub fn new(input: &[usize], weight: &[usize], stride: usize, pad: usize) -> Result<Self> {
        if input.len() != 4 || weight.len() != 4 {
            return Err(Error::Dimension(format!(
                "conv2d expects 4-d input and weight, got {input:?} and {weight:?}"
            )));
        }
        let (n, cin, h, w) = (input[0], input[1], input[2], input[3]);
        let (cout, wcin, kh, kw) = (weight[0], weight[1], weight[2], weight[3]);
        if wcin != cin {
            return Err(Error::Dimension(format!(
                "conv2d input has {cin} channels, weight expects {wcin}"
            )));
        }
        if kh != kw {
            return Err(Error::Dimension(format!("non-square kernel {kh}x{kw}")));
        }
        if stride == 0 {
            return Err(Error::Contract("conv2d stride must be >= 1".into()));
        }
        if kh > h + 2 * pad || kw > w + 2 * pad {
            return Err(Error::Dimension(format!(
                "kernel {kh} larger than padded input {}x{}",
                h + 2 * pad,
                w + 2 * pad
            )));
        }
        Ok(Self {
            n,
            cin,
            h,
            w,
            cout,
            k: kh,
            stride,
            pad,
            oh: (h + 2 * pad - kh) / stride + 1,
            ow: (w + 2 * pad - kw) / stride + 1,
        })
    }

    /// Rows of the column matrix (`cin * k * k`).
    pub fn patch(&self) -> usize {
        self.cin * self.k * self.k
    }

    pub fn out_plane(&self) -> usize {
        self.oh * self.ow
    }

    pub fn in_image(&self) -> usize {
        self.cin * self.h * self.w
    }

    pub fn cols_len(&self) -> usize {
        self.patch() * self.out_plane()
    }
}

/// Unfolds one `cin x h x w` image into a `(cin*k*k) x (oh*ow)` matrix.
pub fn im2col<T: Scalar>(g: &ConvGeom, x: &[T], cols: &mut [T]) {
    let plane = g.out_plane();
    for c in 0..g.cin {
        let xc = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (c * g.k + ki) * g.k + kj;
                let dst = &mut cols[row * plane..(row + 1) * plane];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    let line = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    if iy < 0 || iy >= g.h as isize {
                        line.fill(T::zero());
                        continue;
                    }
                    let src = &xc[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        *v = if ix < 0 || ix >= g.w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the image.
pub fn col2im<T: Scalar>(g: &ConvGeom, cols: &[T], dx: &mut [T]) {
    let plane = g.out_plane();
    for c in 0..g.cin {
        let dxc = &mut dx[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (c * g.k + ki) * g.k + kj;
                let src = &cols[row * plane..(row + 1) * plane];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut dxc[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in 0..g.ow {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] = dst[ix as usize] + src[oy * g.ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Forward convolution. Returns the output and, when `keep_cols`, the
/// column matrices of every image (needed for the weight gradient).
pub fn conv_forward<T: Scalar>(
    g: &ConvGeom,
    x: &[T],
    w: &[T],
    b: Option<&[T]>,
    keep_cols: bool,
    exec: exec::Exec,
) -> (Vec<T>, Vec<T>) {
    let out_img = g.cout * g.out_plane();
    let mut out = vec![T::zero(); g.n * out_img];
    let mut cols = if keep_cols {
        vec![T::zero(); g.n * g.cols_len()]
    } else {
        Vec::new()
    };
    let run = |i: usize, o: &mut [T], c: &mut [T]| {
        im2col(g, &x[i * g.in_image()..(i + 1) * g.in_image()], c);
        gemm(g.cout, g.patch(), g.out_plane(), T::one(), w, false, c, false, T::zero(), o);
        if let Some(b) = b {
            for (co, row) in o.chunks_mut(g.out_plane()).enumerate() {
                for v in row {
                    *v = *v + b[co];
                }
            }
        }
    };
    if keep_cols {
        exec::zip_chunks_mut(exec, &mut out, out_img, &mut cols, g.cols_len(), |i, o, c| {
            run(i, o, c)
        });
    } else {
        exec::chunks_mut(exec, &mut out, out_img, |i, o| {
            let mut c = vec![T::zero(); g.cols_len()];
            run(i, o, &mut c)
        });
    }
    (out, cols)
}

/// Input gradient of a convolution.
pub fn conv_backward_input<T: Scalar>(
    g: &ConvGeom,
    w: &[T],
    dout: &[T],
    dx: &mut [T],
    exec: exec::Exec,
) {
    let out_img = g.cout * g.out_plane();
    exec::chunks_mut(exec, dx, g.in_image(), |i, dxi| {
        let mut dcols = vec![T::zero(); g.cols_len()];
        gemm(
            g.patch(),
            g.cout,
            g.out_plane(),
            T::one(),
            w,
            true,
            &dout[i * out_img..(i + 1) * out_img],
            false,
            T::zero(),
            &mut dcols,
        );
        col2im(g, &dcols, dxi);
    });
}

/// Weight (and bias) gradient of a convolution, accumulated in image order.
pub fn conv_backward_weight<T: Scalar>(
    g: &ConvGeom,
    cols: &[T],
    dout: &[T],
    dw: Option<&mut [T]>,
    db: Option<&mut [T]>,
) {
    let out_img = g.cout * g.out_plane();
    if let Some(dw) = dw {
        for i in 0..g.n {
            gemm(
                g.cout,
                g.out_plane(),
                g.patch(),
                T::one(),
                &dout[i * out_img..(i + 1) * out_img],
                false,
                &cols[i * g.cols_len()..(i + 1) * g.cols_len()],
                true,
                T::one(),
                dw,
            );
        }
    }
    if let Some(db) = db {
        for i in 0..g.n {
            for (co, row) in dout[i * out_img..(i + 1) * out_img]
                .chunks(g.out_plane())
                .enumerate()
            {
                db[co] = db[co] + row.iter().copied().sum::<T>();
            }
        }
    }
}

/// Per-input-channel convolution of a single image: output
/// `cin x cout x oh x ow`, where slice `c` is the contribution of input
/// channel `c` alone. Summing over the first axis gives the plain
/// bias-free convolution.
pub fn conv_split_forward<T: Scalar>(g: &ConvGeom, x: &[T], w: &[T]) -> (Vec<T>, Vec<T>) {
    debug_assert_eq!(g.n, 1);
    let kk = g.k * g.k;
    let plane = g.out_plane();
    let mut cols = vec![T::zero(); g.cols_len()];
    im2col(g, x, &mut cols);
    let mut out = vec![T::zero(); g.cin * g.cout * plane];
    for c in 0..g.cin {
        T::gemm_raw(
            g.cout,
            kk,
            plane,
            T::one(),
            &w[c * kk..],
            g.patch() as isize,
            1,
            &cols[c * kk * plane..(c + 1) * kk * plane],
            plane as isize,
            1,
            T::zero(),
            &mut out[c * g.cout * plane..(c + 1) * g.cout * plane],
            plane as isize,
            1,
        );
    }
    (out, cols)
}

pub fn conv_split_backward<T: Scalar>(
    g: &ConvGeom,
    w: &[T],
    cols: &[T],
    dout: &[T],
    dx: Option<&mut [T]>,
    dw: Option<&mut [T]>,
) {
    let kk = g.k * g.k;
    let plane = g.out_plane();
    let block = g.cout * plane;
    if let Some(dw) = dw {
        for c in 0..g.cin {
            T::gemm_raw(
                g.cout,
                plane,
                kk,
                T::one(),
                &dout[c * block..(c + 1) * block],
                plane as isize,
                1,
                &cols[c * kk * plane..(c + 1) * kk * plane],
                1,
                plane as isize,
                T::one(),
                &mut dw[c * kk..],
                g.patch() as isize,
                1,
            );
        }
    }
    if let Some(dx) = dx {
        let mut dcols = vec![T::zero(); g.cols_len()];
        for c in 0..g.cin {
            T::gemm_raw(
                kk,
                g.cout,
                plane,
                T::one(),
                &w[c * kk..],
                1,
                g.patch() as isize,
                &dout[c * block..(c + 1) * block],
                plane as isize,
                1,
                T::zero(),
                &mut dcols[c * kk * plane..(c + 1) * kk * plane],
                plane as isize,
                1,
            );
        }
        col2im(g, &dcols, dx);
    }
}
