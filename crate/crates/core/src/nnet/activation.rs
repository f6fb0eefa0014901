//! ReLU, softmax and the fused softmax cross-entropy loss.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn relu_forward(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    out
}

/// Passes gradient where the forward input was strictly positive.
pub fn relu_backward(grad_out: &Tensor, input: &Tensor) -> Result<Tensor> {
    if grad_out.shape() != input.shape() {
        return Err(Error::Shape(format!(
            "relu gradient {:?} does not match input {:?}",
            grad_out.shape(),
            input.shape()
        )));
    }
    let data = grad_out
        .data()
        .iter()
        .zip(input.data())
        .map(|(&g, &x)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::from_vec(input.shape(), data)
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Softmax over the last axis.
pub fn softmax_forward(logits: &Tensor) -> Result<Tensor> {
    let width = *logits.shape().last().ok_or_else(|| Error::Shape("softmax of empty shape".into()))?;
    let mut out = logits.clone();
    out.data_mut().chunks_exact_mut(width).for_each(softmax_in_place);
    Ok(out)
}

/// Vector-Jacobian product of softmax given its output `probs`.
pub fn softmax_backward(grad_out: &Tensor, probs: &Tensor) -> Result<Tensor> {
    if grad_out.shape() != probs.shape() {
        return Err(Error::Shape("softmax gradient does not match output".into()));
    }
    let width = *probs.shape().last().unwrap();
    let mut out = Vec::with_capacity(probs.len());
    for (g, p) in grad_out.data().chunks_exact(width).zip(probs.data().chunks_exact(width)) {
        let dot: f64 = g.iter().zip(p).map(|(a, b)| a * b).sum();
        out.extend(g.iter().zip(p).map(|(gi, pi)| pi * (gi - dot)));
    }
    Tensor::from_vec(probs.shape(), out)
}

/// Cross-entropy of `softmax(logits)` against `label`.
///
/// Returns `(−ln p[label], p − onehot(label))`.
pub fn softmax_cross_entropy(logits: &Tensor, label: usize) -> Result<(f64, Tensor)> {
    let width = logits.len();
    if logits.rank() != 1 {
        return Err(Error::Shape(format!("logits must be a vector, got {:?}", logits.shape())));
    }
    if label >= width {
        return Err(Error::InvalidArgument(format!("label {label} out of range 0..{width}")));
    }
    let mut grad = logits.clone();
    softmax_in_place(grad.data_mut());
    let loss = -grad.data()[label].ln();
    grad.data_mut()[label] -= 1.0;
    Ok((loss, grad))
}

/// Batched form over `(N, K)` logits: returns the *summed* loss and per-row gradients.
pub fn softmax_cross_entropy_batch(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let [n, width] = *logits.shape() else {
        return Err(Error::Shape(format!("batched logits must be (N,K), got {:?}", logits.shape())));
    };
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} rows", labels.len())));
    }
    let mut grad = logits.clone();
    let mut loss = 0.0;
    for (row, &label) in grad.data_mut().chunks_exact_mut(width).zip(labels) {
        if label >= width {
            return Err(Error::InvalidArgument(format!("label {label} out of range 0..{width}")));
        }
        softmax_in_place(row);
        loss -= row[label].ln();
        row[label] -= 1.0;
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln8() {
        let (loss, grad) = softmax_cross_entropy(&Tensor::filled(&[8], 0.3), 2).unwrap();
        assert!((loss - 8f64.ln()).abs() < 1e-12);
        assert!((loss - 2.0794).abs() < 1e-4);
        for (i, &g) in grad.data().iter().enumerate() {
            let expected = 0.125 - if i == 2 { 1.0 } else { 0.0 };
            assert!((g - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        assert!(matches!(
            softmax_cross_entropy(&Tensor::zeros(&[8]), 8),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn relu_values_and_mask() {
        let x = Tensor::from_vec(&[3], vec![-3.0, 2.0, 0.0]).unwrap();
        assert_eq!(relu_forward(&x).data(), &[0.0, 2.0, 0.0]);
        let g = relu_backward(&Tensor::filled(&[3], 1.5), &x).unwrap();
        assert_eq!(g.data(), &[0.0, 1.5, 0.0]);
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let x = Tensor::from_vec(&[3], vec![1000.0, 1000.0, -1000.0]).unwrap();
        let p = softmax_forward(&x).unwrap();
        assert!(p.all_finite());
        assert!((p.data()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn batch_matches_single() {
        let logits = Tensor::from_vec(&[2, 4], vec![0.1, -0.2, 0.5, 1.0, 2.0, 0.0, -1.0, 0.3]).unwrap();
        let (sum, g) = softmax_cross_entropy_batch(&logits, &[3, 0]).unwrap();
        let (l0, g0) = softmax_cross_entropy(&Tensor::from_vec(&[4], logits.data()[..4].to_vec()).unwrap(), 3).unwrap();
        let (l1, g1) = softmax_cross_entropy(&Tensor::from_vec(&[4], logits.data()[4..].to_vec()).unwrap(), 0).unwrap();
        assert!((sum - (l0 + l1)).abs() < 1e-15);
        assert_eq!(&g.data()[..4], g0.data());
        assert_eq!(&g.data()[4..], g1.data());
    }
}
