//! Fully connected layer: `out = x · W + b` with `W` shaped `(in, out)`.

use super::gemm::{gemm, Mat};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Tensor,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Splits an input of shape `(in,)` or `(N, in)` into `(N, in)`.
fn batch_dims(shape: &[usize]) -> Result<(usize, usize)> {
    match *shape {
        [d] => Ok((1, d)),
        [n, d] => Ok((n, d)),
        _ => Err(Error::Shape(format!("dense input must be (D) or (N,D), got {shape:?}"))),
    }
}

pub fn fc_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<(Tensor, DenseCache)> {
    let (n, d_in) = batch_dims(input.shape())?;
    let [w_in, d_out] = *weights.shape() else {
        return Err(Error::Shape(format!("dense weights must be (in,out), got {:?}", weights.shape())));
    };
    if w_in != d_in || bias.shape() != [d_out] {
        return Err(Error::Shape(format!(
            "dense layer {w_in}->{d_out} (bias {:?}) cannot take input of width {d_in}",
            bias.shape()
        )));
    }
    let mut out = Vec::with_capacity(n * d_out);
    for _ in 0..n {
        out.extend_from_slice(bias.data());
    }
    gemm(Mat::new(input.data(), n, d_in), Mat::new(weights.data(), d_in, d_out), 1.0, &mut out);
    let shape: Vec<usize> = if input.rank() == 1 { vec![d_out] } else { vec![n, d_out] };
    Ok((Tensor::from_vec(&shape, out)?, DenseCache { input: input.clone() }))
}

pub fn fc_backward(grad_out: &Tensor, weights: &Tensor, cache: &DenseCache) -> Result<DenseGrads> {
    let (n, d_in) = batch_dims(cache.input.shape())?;
    let d_out = weights.shape()[1];
    if grad_out.len() != n * d_out {
        return Err(Error::Shape(format!(
            "dense gradient {:?} does not match output ({n}, {d_out})",
            grad_out.shape()
        )));
    }
    let go = Mat::new(grad_out.data(), n, d_out);
    let mut gw = vec![0.0; d_in * d_out];
    gemm(Mat::new(cache.input.data(), n, d_in).t(), go, 0.0, &mut gw);
    let mut gb = vec![0.0; d_out];
    for row in grad_out.data().chunks_exact(d_out) {
        for (b, v) in gb.iter_mut().zip(row) {
            *b += v;
        }
    }
    let mut gx = vec![0.0; n * d_in];
    gemm(go, Mat::new(weights.data(), d_in, d_out).t(), 0.0, &mut gx);
    Ok(DenseGrads {
        input: Tensor::from_vec(cache.input.shape(), gx)?,
        weights: Tensor::from_vec(&[d_in, d_out], gw)?,
        bias: Tensor::from_vec(&[d_out], gb)?,
    })
}
