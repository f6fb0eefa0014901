//! Cross-channel local response normalization.
//!
//! `out[.., c] = in[.., c] / (k + alpha · Σ_{c' ∈ window(c)} in[.., c']²)^beta`,
//! where the window spans `n` channels centred on `c`, clipped at the edges.
//! The last tensor axis is the channel axis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrnParams {
    pub k: f64,
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LrnParams {
    fn default() -> Self {
        LrnParams { k: 2.0, n: 5, alpha: 1e-4, beta: 0.75 }
    }
}

impl LrnParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) {
            return Err(Error::InvalidArgument(format!("LRN k must be positive, got {}", self.k)));
        }
        if self.n.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("LRN window n must be odd, got {}", self.n)));
        }
        if !(self.alpha >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidArgument("LRN alpha must be non-negative and beta finite".into()));
        }
        Ok(())
    }

    fn window(&self, c: usize, channels: usize) -> std::ops::Range<usize> {
        let half = self.n / 2;
        c.saturating_sub(half)..(c + half + 1).min(channels)
    }
}

#[derive(Debug, Clone)]
pub struct LrnCache {
    params: LrnParams,
    input: Tensor,
    /// `k + alpha · Σ window²` per element.
    denom_base: Vec<f64>,
}

pub fn lrn_forward(input: &Tensor, params: LrnParams) -> Result<(Tensor, LrnCache)> {
    params.validate()?;
    let channels = *input.shape().last().ok_or_else(|| Error::Shape("LRN input has no axes".into()))?;
    let mut out = vec![0.0; input.len()];
    let mut denom_base = vec![0.0; input.len()];
    let mut squares = vec![0.0; channels];
    for ((x, y), s) in input
        .data()
        .chunks_exact(channels)
        .zip(out.chunks_exact_mut(channels))
        .zip(denom_base.chunks_exact_mut(channels))
    {
        for (sq, v) in squares.iter_mut().zip(x) {
            *sq = v * v;
        }
        for c in 0..channels {
            let sum: f64 = squares[params.window(c, channels)].iter().sum();
            s[c] = params.k + params.alpha * sum;
            y[c] = x[c] * s[c].powf(-params.beta);
        }
    }
    let out = Tensor::from_vec(input.shape(), out)?;
    Ok((out, LrnCache { params, input: input.clone(), denom_base }))
}

/// Gradient of the loss with respect to the LRN input.
///
/// With `s_c = k + α Σ_{window(c)} x²`, `∂out_c/∂x_j = δ_cj s_c^{-β} − 2αβ x_c x_j s_c^{-β-1}`
/// for `j` in `window(c)`; the window relation is symmetric.
pub fn lrn_backward(grad_out: &Tensor, cache: &LrnCache) -> Result<Tensor> {
    if grad_out.shape() != cache.input.shape() {
        return Err(Error::Shape(format!(
            "LRN gradient shape {:?} does not match input {:?}",
            grad_out.shape(),
            cache.input.shape()
        )));
    }
    let p = cache.params;
    let channels = *cache.input.shape().last().unwrap();
    let mut grad_in = vec![0.0; grad_out.len()];
    let mut cross = vec![0.0; channels];
    for (((x, s), g), gi) in cache
        .input
        .data()
        .chunks_exact(channels)
        .zip(cache.denom_base.chunks_exact(channels))
        .zip(grad_out.data().chunks_exact(channels))
        .zip(grad_in.chunks_exact_mut(channels))
    {
        for c in 0..channels {
            cross[c] = g[c] * x[c] * s[c].powf(-p.beta - 1.0);
        }
        for j in 0..channels {
            let coupled: f64 = cross[p.window(j, channels)].iter().sum();
            gi[j] = g[j] * s[j].powf(-p.beta) - 2.0 * p.alpha * p.beta * x[j] * coupled;
        }
    }
    Tensor::from_vec(grad_out.shape(), grad_in)
}
