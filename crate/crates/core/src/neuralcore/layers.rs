//! The six layer types and their forward/backward kernels.
//!
//! Parallelism is arranged so every output cell has a single writer and all
//! reductions run in a fixed order: results are bit-identical for any rayon
//! thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::neuralcore::tensor::Tensor;
use crate::neuralcore::NetError;
use crate::scalar::{cast, Real};
use crate::seed::Prng;

/// Zero padding per edge. `symmetric(h, w)` matches the usual (ph, pw)
/// convention; the height-preserving convolution over a 2-row input uses an
/// asymmetric (1, 0) vertical pad.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Padding {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl Padding {
    pub fn symmetric(h: usize, w: usize) -> Self {
        Padding {
            top: h,
            bottom: h,
            left: w,
            right: w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    Conv2d {
        out_channels: usize,
        kernel: (usize, usize),
        padding: Padding,
    },
    ReLU,
    Dropout {
        rate: f64,
    },
    Flatten,
    Linear {
        out_features: usize,
    },
    Softmax,
}

impl LayerSpec {
    /// Output shape for a (batch-free) input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NetError> {
        match self {
            LayerSpec::Conv2d {
                out_channels,
                kernel,
                padding,
            } => {
                let [_, h, w]: [usize; 3] = input
                    .try_into()
                    .map_err(|_| NetError::InvalidSpec(format!("Conv2d input {input:?}")))?;
                let oh = (h + padding.top + padding.bottom)
                    .checked_sub(kernel.0 - 1)
                    .filter(|&v| v > 0);
                let ow = (w + padding.left + padding.right)
                    .checked_sub(kernel.1 - 1)
                    .filter(|&v| v > 0);
                match (oh, ow) {
                    (Some(oh), Some(ow)) => Ok(vec![*out_channels, oh, ow]),
                    _ => Err(NetError::InvalidSpec(format!(
                        "Conv2d kernel {kernel:?} too large for input {input:?}"
                    ))),
                }
            }
            LayerSpec::ReLU | LayerSpec::Dropout { .. } | LayerSpec::Softmax => {
                Ok(input.to_vec())
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Linear { out_features } => {
                if input.len() != 1 {
                    return Err(NetError::InvalidSpec(format!(
                        "Linear expects a flat input, got {input:?}"
                    )));
                }
                Ok(vec![*out_features])
            }
        }
    }

    /// Shapes of this layer's parameter tensors (weight then bias).
    pub fn param_shapes(&self, input: &[usize]) -> Vec<Vec<usize>> {
        match self {
            LayerSpec::Conv2d {
                out_channels,
                kernel,
                ..
            } => vec![
                vec![*out_channels, input[0], kernel.0, kernel.1],
                vec![*out_channels],
            ],
            LayerSpec::Linear { out_features } => {
                vec![vec![*out_features, input[0]], vec![*out_features]]
            }
            _ => vec![],
        }
    }
}

/// What the backward pass needs from the forward pass, per layer.
#[derive(Debug, Clone)]
pub enum LayerCache<T: Real> {
    Conv2d { input: Tensor<T> },
    ReLU { input: Tensor<T> },
    /// Scaled keep mask (0 or 1/(1-rate)); `None` in eval mode (identity).
    Dropout { mask: Option<Vec<T>> },
    Flatten { in_shape: Vec<usize> },
    Linear { input: Tensor<T> },
    Softmax { output: Tensor<T> },
}

#[inline]
fn axpy<T: Real>(y: &mut [T], a: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

/// Dot product with eight fixed-order accumulator lanes; vectorizes without
/// changing the summation order between runs.
#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [T::zero(); 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let ac = &a[c * 8..c * 8 + 8];
        let bc = &b[c * 8..c * 8 + 8];
        for l in 0..8 {
            lanes[l] = lanes[l] + ac[l] * bc[l];
        }
    }
    let mut acc = T::zero();
    for l in 0..8 {
        acc = acc + lanes[l];
    }
    for i in chunks * 8..a.len() {
        acc = acc + a[i] * b[i];
    }
    acc
}

/// Column range [lo, hi) of the output that keeps x indices in bounds for a
/// given kernel column offset.
#[inline]
fn col_range(ow: usize, iw: usize, left_pad: usize, kx: usize) -> (usize, usize) {
    let lo = left_pad.saturating_sub(kx);
    let hi = (iw + left_pad).saturating_sub(kx).min(ow);
    (lo, hi.max(lo))
}

pub(crate) struct ConvDims {
    pub ic: usize,
    pub ih: usize,
    pub iw: usize,
    pub oc: usize,
    pub oh: usize,
    pub ow: usize,
    pub kh: usize,
    pub kw: usize,
    pub pad: Padding,
}

impl ConvDims {
    pub fn from(x: &[usize], oc: usize, kernel: (usize, usize), pad: Padding) -> Self {
        let (ic, ih, iw) = (x[1], x[2], x[3]);
        ConvDims {
            ic,
            ih,
            iw,
            oc,
            oh: ih + pad.top + pad.bottom - kernel.0 + 1,
            ow: iw + pad.left + pad.right - kernel.1 + 1,
            kh: kernel.0,
            kw: kernel.1,
            pad,
        }
    }
}

/// Cross-correlation with zero padding, stride 1, parallel over the batch.
pub(crate) fn conv2d_forward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    d: &ConvDims,
) -> Tensor<T> {
    let n = x.shape()[0];
    let mut out = Tensor::zeros(&[n, d.oc, d.oh, d.ow]);
    let in_per = d.ic * d.ih * d.iw;
    let out_per = d.oc * d.oh * d.ow;
    let wd = w.data();
    let bd = b.data();
    out.data_mut()
        .par_chunks_mut(out_per)
        .zip(x.data().par_chunks(in_per))
        .for_each(|(o_ex, x_ex)| {
            for o in 0..d.oc {
                let bias = bd[o];
                o_ex[o * d.oh * d.ow..(o + 1) * d.oh * d.ow].fill(bias);
                for i in 0..d.ic {
                    for ky in 0..d.kh {
                        for r in 0..d.oh {
                            let ri = r as isize + ky as isize - d.pad.top as isize;
                            if ri < 0 || ri >= d.ih as isize {
                                continue;
                            }
                            let x_row = &x_ex[(i * d.ih + ri as usize) * d.iw..][..d.iw];
                            let y_row = &mut o_ex[(o * d.oh + r) * d.ow..][..d.ow];
                            for kx in 0..d.kw {
                                let (lo, hi) = col_range(d.ow, d.iw, d.pad.left, kx);
                                if lo >= hi {
                                    continue;
                                }
                                let wv = wd[((o * d.ic + i) * d.kh + ky) * d.kw + kx];
                                let xs = lo + kx - d.pad.left;
                                axpy(&mut y_row[lo..hi], wv, &x_row[xs..xs + hi - lo]);
                            }
                        }
                    }
                }
            }
        });
    out
}

/// Returns (dw, db, dx). Weight/bias gradients parallelize over output
/// channels, the input gradient over the batch; each sums in example order.
pub(crate) fn conv2d_backward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    g: &Tensor<T>,
    d: &ConvDims,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let n = x.shape()[0];
    let in_per = d.ic * d.ih * d.iw;
    let out_per = d.oc * d.oh * d.ow;
    let xd = x.data();
    let gd = g.data();
    let wd = w.data();

    let mut dw = Tensor::zeros(&[d.oc, d.ic, d.kh, d.kw]);
    let mut db = Tensor::zeros(&[d.oc]);
    let w_per = d.ic * d.kh * d.kw;
    dw.data_mut()
        .par_chunks_mut(w_per)
        .zip(db.data_mut().par_chunks_mut(1))
        .enumerate()
        .for_each(|(o, (dw_o, db_o))| {
            for ex in 0..n {
                let x_ex = &xd[ex * in_per..(ex + 1) * in_per];
                let g_ex = &gd[ex * out_per..(ex + 1) * out_per];
                for r in 0..d.oh {
                    let g_row = &g_ex[(o * d.oh + r) * d.ow..][..d.ow];
                    let mut row_sum = T::zero();
                    for &v in g_row {
                        row_sum = row_sum + v;
                    }
                    db_o[0] = db_o[0] + row_sum;
                    for i in 0..d.ic {
                        for ky in 0..d.kh {
                            let ri = r as isize + ky as isize - d.pad.top as isize;
                            if ri < 0 || ri >= d.ih as isize {
                                continue;
                            }
                            let x_row = &x_ex[(i * d.ih + ri as usize) * d.iw..][..d.iw];
                            for kx in 0..d.kw {
                                let (lo, hi) = col_range(d.ow, d.iw, d.pad.left, kx);
                                if lo >= hi {
                                    continue;
                                }
                                let xs = lo + kx - d.pad.left;
                                let acc = dot(&g_row[lo..hi], &x_row[xs..xs + hi - lo]);
                                let idx = (i * d.kh + ky) * d.kw + kx;
                                dw_o[idx] = dw_o[idx] + acc;
                            }
                        }
                    }
                }
            }
        });

    let mut dx = Tensor::zeros(&[n, d.ic, d.ih, d.iw]);
    dx.data_mut()
        .par_chunks_mut(in_per)
        .zip(gd.par_chunks(out_per))
        .for_each(|(dx_ex, g_ex)| {
            for o in 0..d.oc {
                for i in 0..d.ic {
                    for ky in 0..d.kh {
                        for r in 0..d.oh {
                            let ri = r as isize + ky as isize - d.pad.top as isize;
                            if ri < 0 || ri >= d.ih as isize {
                                continue;
                            }
                            let g_row = &g_ex[(o * d.oh + r) * d.ow..][..d.ow];
                            let dx_row = &mut dx_ex[(i * d.ih + ri as usize) * d.iw..][..d.iw];
                            for kx in 0..d.kw {
                                let (lo, hi) = col_range(d.ow, d.iw, d.pad.left, kx);
                                if lo >= hi {
                                    continue;
                                }
                                let wv = wd[((o * d.ic + i) * d.kh + ky) * d.kw + kx];
                                let xs = lo + kx - d.pad.left;
                                axpy(&mut dx_row[xs..xs + hi - lo], wv, &g_row[lo..hi]);
                            }
                        }
                    }
                }
            }
        });

    (dw, db, dx)
}

pub(crate) fn linear_forward<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let n = x.shape()[0];
    let fin = x.shape()[1];
    let fout = w.shape()[0];
    let mut out = Tensor::zeros(&[n, fout]);
    let wd = w.data();
    let bd = b.data();
    out.data_mut()
        .par_chunks_mut(fout)
        .zip(x.data().par_chunks(fin))
        .for_each(|(o_row, x_row)| {
            for o in 0..fout {
                o_row[o] = dot(&wd[o * fin..(o + 1) * fin], x_row) + bd[o];
            }
        });
    out
}

pub(crate) fn linear_backward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    g: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let n = x.shape()[0];
    let fin = x.shape()[1];
    let fout = w.shape()[0];
    let xd = x.data();
    let gd = g.data();
    let wd = w.data();

    let mut dw = Tensor::zeros(&[fout, fin]);
    let mut db = Tensor::zeros(&[fout]);
    dw.data_mut()
        .par_chunks_mut(fin)
        .zip(db.data_mut().par_chunks_mut(1))
        .enumerate()
        .for_each(|(o, (dw_row, db_o))| {
            for ex in 0..n {
                let gv = gd[ex * fout + o];
                db_o[0] = db_o[0] + gv;
                axpy(dw_row, gv, &xd[ex * fin..(ex + 1) * fin]);
            }
        });

    let mut dx = Tensor::zeros(&[n, fin]);
    dx.data_mut()
        .par_chunks_mut(fin)
        .zip(gd.par_chunks(fout))
        .for_each(|(dx_row, g_row)| {
            for o in 0..fout {
                axpy(dx_row, g_row[o], &wd[o * fin..(o + 1) * fin]);
            }
        });

    (dw, db, dx)
}

pub(crate) fn relu_forward<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let data = x.data().iter().map(|&v| v.max(T::zero())).collect();
    Tensor::from_vec(x.shape(), data)
}

pub(crate) fn relu_backward<T: Real>(input: &Tensor<T>, g: &Tensor<T>) -> Tensor<T> {
    let data = input
        .data()
        .iter()
        .zip(g.data())
        .map(|(&xi, &gi)| if xi > T::zero() { gi } else { T::zero() })
        .collect();
    Tensor::from_vec(g.shape(), data)
}

/// Inverted dropout: keep with probability 1-rate and scale by 1/(1-rate),
/// so eval mode is the identity. Mask elements are drawn in element order.
pub(crate) fn dropout_mask<T: Real>(numel: usize, rate: f64, rng: &mut Prng) -> Vec<T> {
    let keep_scale: T = cast(1.0 / (1.0 - rate));
    (0..numel)
        .map(|_| {
            if rng.gen::<f64>() < rate {
                T::zero()
            } else {
                keep_scale
            }
        })
        .collect()
}

pub(crate) fn apply_mask<T: Real>(x: &Tensor<T>, mask: &[T]) -> Tensor<T> {
    let data = x.data().iter().zip(mask).map(|(&v, &m)| v * m).collect();
    Tensor::from_vec(x.shape(), data)
}

/// Numerically-stabilized row softmax (max subtraction).
pub(crate) fn softmax_forward<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let k = x.shape()[x.shape().len() - 1];
    let mut out = x.clone();
    for row in out.data_mut().chunks_mut(k) {
        let m = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            sum = sum + *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    out
}

pub(crate) fn softmax_backward<T: Real>(output: &Tensor<T>, g: &Tensor<T>) -> Tensor<T> {
    let k = output.shape()[output.shape().len() - 1];
    let mut dx = Tensor::zeros(g.shape());
    for ((dx_row, y_row), g_row) in dx
        .data_mut()
        .chunks_mut(k)
        .zip(output.data().chunks(k))
        .zip(g.data().chunks(k))
    {
        let mut inner = T::zero();
        for (y, gv) in y_row.iter().zip(g_row) {
            inner = inner + *y * *gv;
        }
        for ((dxv, y), gv) in dx_row.iter_mut().zip(y_row).zip(g_row) {
            *dxv = *y * (*gv - inner);
        }
    }
    dx
}

/// He-style fan-in uniform init: U(-sqrt(6/fan_in), sqrt(6/fan_in)) for
/// weights, zero for biases. Elements drawn in row-major order.
pub(crate) fn init_params<T: Real>(
    layer: &LayerSpec,
    input: &[usize],
    rng: &mut Prng,
) -> Vec<Tensor<T>> {
    layer
        .param_shapes(input)
        .into_iter()
        .enumerate()
        .map(|(i, shape)| {
            if i == 1 {
                return Tensor::zeros(&shape);
            }
            let fan_in: usize = shape[1..].iter().product();
            let limit = (6.0 / fan_in as f64).sqrt();
            let data = (0..shape.iter().product::<usize>())
                .map(|_| cast(rng.gen_range(-limit..limit)))
                .collect();
            Tensor::from_vec(&shape, data)
        })
        .collect()
}
