//! Strided 2-D convolution over channel-last batches, lowered to GEMM via im2col.
//!
//! Output element `(n, i, j, k)` is
//! `bias[k] + Σ_{y,x,z} filters[y, x, z, k] · input[n, i·s + y − pad_top, j·s + x − pad_left, z]`
//! with out-of-range input taps reading zero. This is the cross-correlation
//! form; a flipped kernel gives the textbook convolution and training learns
//! either equally.

use serde::{Deserialize, Serialize};

use super::gemm::{gemm, Mat};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Padding {
    /// Zero-pad so that `out = ceil(in / stride)`; the odd pixel goes bottom/right.
    Same,
    /// No padding: `out = (in − k) / stride + 1`.
    Valid,
}

/// Resolved spatial bookkeeping for one convolution call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub out_c: usize,
    pub stride: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub pad_top: usize,
    pub pad_left: usize,
}

fn same_out_and_pad(input: usize, kernel: usize, stride: usize) -> (usize, usize) {
    let out = input.div_ceil(stride);
    let total = ((out - 1) * stride + kernel).saturating_sub(input);
    (out, total / 2)
}

/// Output height/width for a `kernel` × `kernel` filter; used for shape inference.
pub fn conv_output_hw(h: usize, w: usize, kernel: usize, stride: usize, padding: Padding) -> Option<(usize, usize)> {
    if stride == 0 || kernel == 0 {
        return None;
    }
    match padding {
        Padding::Same => Some((h.div_ceil(stride), w.div_ceil(stride))),
        Padding::Valid if h >= kernel && w >= kernel => {
            Some(((h - kernel) / stride + 1, (w - kernel) / stride + 1))
        }
        Padding::Valid => None,
    }
}

impl ConvGeometry {
    pub fn resolve(input_shape: &[usize], filter_shape: &[usize], stride: usize, padding: Padding) -> Result<Self> {
        let (batch, in_h, in_w, in_c) = match *input_shape {
            [h, w, c] => (1, h, w, c),
            [n, h, w, c] => (n, h, w, c),
            _ => {
                return Err(Error::Shape(format!(
                    "conv input must be (H,W,C) or (N,H,W,C), got {input_shape:?}"
                )))
            }
        };
        let [kernel_h, kernel_w, f_in, out_c] = *filter_shape else {
            return Err(Error::Shape(format!(
                "conv filters must be (KH,KW,C_in,C_out), got {filter_shape:?}"
            )));
        };
        if f_in != in_c {
            return Err(Error::Shape(format!(
                "input has {in_c} channels but filters expect {f_in}"
            )));
        }
        if stride == 0 {
            return Err(Error::InvalidArgument("stride must be at least 1".into()));
        }
        if kernel_h == 0 || kernel_w == 0 || out_c == 0 || in_h == 0 || in_w == 0 {
            return Err(Error::Shape("conv extents must be non-zero".into()));
        }
        let (out_h, out_w, pad_top, pad_left) = match padding {
            Padding::Same => {
                let (oh, pt) = same_out_and_pad(in_h, kernel_h, stride);
                let (ow, pl) = same_out_and_pad(in_w, kernel_w, stride);
                (oh, ow, pt, pl)
            }
            Padding::Valid => {
                if in_h < kernel_h || in_w < kernel_w {
                    return Err(Error::Shape(format!(
                        "valid conv: {kernel_h}x{kernel_w} kernel larger than {in_h}x{in_w} input"
                    )));
                }
                ((in_h - kernel_h) / stride + 1, (in_w - kernel_w) / stride + 1, 0, 0)
            }
        };
        Ok(ConvGeometry {
            batch,
            in_h,
            in_w,
            in_c,
            kernel_h,
            kernel_w,
            out_c,
            stride,
            out_h,
            out_w,
            pad_top,
            pad_left,
        })
    }

    fn patch_len(&self) -> usize {
        self.kernel_h * self.kernel_w * self.in_c
    }

    fn rows(&self) -> usize {
        self.batch * self.out_h * self.out_w
    }

    /// Input coordinate for output row/col `o` and tap `t`, if inside the image.
    #[inline]
    fn tap(o: usize, t: usize, stride: usize, pad: usize, extent: usize) -> Option<usize> {
        (o * stride + t).checked_sub(pad).filter(|&v| v < extent)
    }

    fn im2col(&self, input: &[f64]) -> Vec<f64> {
        let plen = self.patch_len();
        let mut cols = vec![0.0; self.rows() * plen];
        let row_span = self.kernel_w * self.in_c;
        let mut row = 0;
        for n in 0..self.batch {
            let image = &input[n * self.in_h * self.in_w * self.in_c..];
            for oy in 0..self.out_h {
                for ox in 0..self.out_w {
                    let patch = &mut cols[row * plen..(row + 1) * plen];
                    for ky in 0..self.kernel_h {
                        let Some(iy) = Self::tap(oy, ky, self.stride, self.pad_top, self.in_h) else {
                            continue;
                        };
                        let dst = &mut patch[ky * row_span..(ky + 1) * row_span];
                        for kx in 0..self.kernel_w {
                            let Some(ix) = Self::tap(ox, kx, self.stride, self.pad_left, self.in_w) else {
                                continue;
                            };
                            let src = (iy * self.in_w + ix) * self.in_c;
                            dst[kx * self.in_c..(kx + 1) * self.in_c]
                                .copy_from_slice(&image[src..src + self.in_c]);
                        }
                    }
                    row += 1;
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &[f64]) -> Vec<f64> {
        let plen = self.patch_len();
        let mut out = vec![0.0; self.batch * self.in_h * self.in_w * self.in_c];
        let row_span = self.kernel_w * self.in_c;
        let mut row = 0;
        for n in 0..self.batch {
            let image = &mut out[n * self.in_h * self.in_w * self.in_c..];
            for oy in 0..self.out_h {
                for ox in 0..self.out_w {
                    let patch = &cols[row * plen..(row + 1) * plen];
                    for ky in 0..self.kernel_h {
                        let Some(iy) = Self::tap(oy, ky, self.stride, self.pad_top, self.in_h) else {
                            continue;
                        };
                        let src = &patch[ky * row_span..(ky + 1) * row_span];
                        for kx in 0..self.kernel_w {
                            let Some(ix) = Self::tap(ox, kx, self.stride, self.pad_left, self.in_w) else {
                                continue;
                            };
                            let dst = (iy * self.in_w + ix) * self.in_c;
                            for (d, s) in image[dst..dst + self.in_c]
                                .iter_mut()
                                .zip(&src[kx * self.in_c..(kx + 1) * self.in_c])
                            {
                                *d += s;
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
        out
    }

    fn output_shape(&self, batched: bool) -> Vec<usize> {
        if batched {
            vec![self.batch, self.out_h, self.out_w, self.out_c]
        } else {
            vec![self.out_h, self.out_w, self.out_c]
        }
    }
}

/// State kept from the forward pass for [`conv2d_backward`].
#[derive(Debug, Clone)]
pub struct ConvCache {
    geometry: ConvGeometry,
    input_shape: Vec<usize>,
    cols: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor,
    pub filters: Tensor,
    pub bias: Tensor,
}

/// Pre-activation convolution plus per-filter bias.
pub fn conv2d_forward(
    input: &Tensor,
    filters: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: Padding,
) -> Result<(Tensor, ConvCache)> {
    let g = ConvGeometry::resolve(input.shape(), filters.shape(), stride, padding)?;
    if bias.shape() != [g.out_c] {
        return Err(Error::Shape(format!(
            "bias shape {:?} does not match {} filters",
            bias.shape(),
            g.out_c
        )));
    }
    let cols = g.im2col(input.data());
    let rows = g.rows();
    let mut out = Vec::with_capacity(rows * g.out_c);
    for _ in 0..rows {
        out.extend_from_slice(bias.data());
    }
    gemm(
        Mat::new(&cols, rows, g.patch_len()),
        Mat::new(filters.data(), g.patch_len(), g.out_c),
        1.0,
        &mut out,
    );
    let out = Tensor::from_vec(&g.output_shape(input.rank() == 4), out)?;
    Ok((out, ConvCache { geometry: g, input_shape: input.shape().to_vec(), cols }))
}

pub fn conv2d_backward(grad_out: &Tensor, filters: &Tensor, cache: &ConvCache) -> Result<ConvGrads> {
    let g = &cache.geometry;
    let rows = g.rows();
    if grad_out.len() != rows * g.out_c {
        return Err(Error::Shape(format!(
            "conv gradient has shape {:?}, forward produced {:?}",
            grad_out.shape(),
            g.output_shape(true)
        )));
    }
    let plen = g.patch_len();
    let go = Mat::new(grad_out.data(), rows, g.out_c);

    let mut grad_filters = vec![0.0; plen * g.out_c];
    gemm(Mat::new(&cache.cols, rows, plen).t(), go, 0.0, &mut grad_filters);

    let mut grad_bias = vec![0.0; g.out_c];
    for r in grad_out.data().chunks_exact(g.out_c) {
        for (b, v) in grad_bias.iter_mut().zip(r) {
            *b += v;
        }
    }

    let mut grad_cols = vec![0.0; rows * plen];
    gemm(go, Mat::new(filters.data(), plen, g.out_c).t(), 0.0, &mut grad_cols);
    let grad_input = g.col2im(&grad_cols);

    Ok(ConvGrads {
        input: Tensor::from_vec(&cache.input_shape, grad_input)?,
        filters: Tensor::from_vec(filters.shape(), grad_filters)?,
        bias: Tensor::from_vec(&[g.out_c], grad_bias)?,
    })
}
