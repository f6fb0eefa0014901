use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::activation::{relu_backward, relu_forward, softmax_backward, softmax_forward};
use super::conv::{conv2d_backward, conv2d_forward, conv_output_hw, ConvCache, Padding};
use super::dense::{fc_backward, fc_forward, DenseCache};
use super::lrn::{lrn_backward, lrn_forward, LrnCache, LrnParams};
use crate::error::{Error, Result};
use crate::labels::OrientationClass;
use crate::tensor::Tensor;

/// Side length of the square network input.
pub const INPUT_SIZE: usize = 32;
pub const INPUT_CHANNELS: usize = 3;
pub const NUM_CLASSES: usize = 8;

/// Hyperparameters of one layer; learnable tensors live in [`Layer`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    Conv { kernel: usize, filters: usize, stride: usize, padding: Padding },
    Lrn(LrnParams),
    Relu,
    Flatten,
    Fc { units: usize },
    Softmax,
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::Lrn(_) => "lrn",
            LayerSpec::Relu => "relu",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Fc { .. } => "fc",
            LayerSpec::Softmax => "softmax",
        }
    }
}

/// The layer stack used for orientation estimation: two strided conv blocks
/// with LRN, then 384 and 192 unit dense layers and an 8-way softmax. No pooling.
pub fn paper_layer_specs() -> Vec<LayerSpec> {
    let conv = LayerSpec::Conv { kernel: 5, filters: 64, stride: 2, padding: Padding::Same };
    let lrn = LayerSpec::Lrn(LrnParams::default());
    vec![
        conv.clone(),
        lrn.clone(),
        LayerSpec::Relu,
        conv,
        lrn,
        LayerSpec::Relu,
        LayerSpec::Flatten,
        LayerSpec::Fc { units: 384 },
        LayerSpec::Relu,
        LayerSpec::Fc { units: 192 },
        LayerSpec::Relu,
        LayerSpec::Fc { units: NUM_CLASSES },
        LayerSpec::Softmax,
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    /// Conv: `[filters (K,K,C_in,C_out), bias (C_out)]`; Fc: `[weights (in,out), bias (out)]`.
    pub params: Vec<Tensor>,
    /// Per-sample shapes, without a batch axis.
    pub input_shape: Vec<usize>,
    pub output_shape: Vec<usize>,
}

/// Per-layer state captured by [`OrientationModel::forward_train`].
#[derive(Debug, Clone)]
pub enum LayerCache {
    Conv(ConvCache),
    Lrn(LrnCache),
    Relu(Tensor),
    Flatten(Vec<usize>),
    Fc(DenseCache),
    Softmax(Tensor),
}

/// Gradients aligned with [`OrientationModel::layers`]' `params`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<Tensor>>);

impl Gradients {
    pub fn zeros_like(model: &OrientationModel) -> Self {
        Gradients(
            model
                .layers
                .iter()
                .map(|l| l.params.iter().map(|p| Tensor::zeros(p.shape())).collect())
                .collect(),
        )
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().flatten().zip(other.0.iter().flatten()) {
            a.add_scaled(b, 1.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.0.iter_mut().flatten().for_each(|t| t.scale(factor));
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().flatten().all(Tensor::all_finite)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probs: Tensor,
    pub class: usize,
}

impl Prediction {
    pub fn orientation(&self) -> Result<OrientationClass> {
        OrientationClass::new(self.class)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrientationModel {
    pub input_shape: Vec<usize>,
    pub layers: Vec<Layer>,
    pub seed: u64,
    /// Set once the model has been through [`super::train`].
    pub trained: bool,
}

fn shape_err(i: usize, spec: &LayerSpec, shape: &[usize]) -> Error {
    Error::Shape(format!("layer {i} ({}) cannot take input shape {shape:?}", spec.kind_name()))
}

fn infer_output_shape(i: usize, spec: &LayerSpec, input: &[usize]) -> Result<Vec<usize>> {
    match spec {
        LayerSpec::Conv { kernel, filters, stride, padding } => match *input {
            [h, w, _] => conv_output_hw(h, w, *kernel, *stride, *padding)
                .map(|(oh, ow)| vec![oh, ow, *filters])
                .ok_or_else(|| shape_err(i, spec, input)),
            _ => Err(shape_err(i, spec, input)),
        },
        LayerSpec::Lrn(p) => {
            p.validate()?;
            Ok(input.to_vec())
        }
        LayerSpec::Relu | LayerSpec::Softmax => Ok(input.to_vec()),
        LayerSpec::Flatten => Ok(vec![input.iter().product()]),
        LayerSpec::Fc { units } => match *input {
            [_] if *units > 0 => Ok(vec![*units]),
            _ => Err(shape_err(i, spec, input)),
        },
    }
}

impl OrientationModel {
    /// Builds a model from a layer list, running shape inference and seeded
    /// He initialisation (weights ~ N(0, sqrt(2 / fan_in)), biases zero).
    pub fn from_specs(input_shape: &[usize], specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shape = input_shape.to_vec();
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let output_shape = infer_output_shape(i, spec, &shape)?;
            let params = match spec {
                LayerSpec::Conv { kernel, filters, .. } => {
                    let in_c = shape[2];
                    let fan_in = kernel * kernel * in_c;
                    vec![
                        he_normal(&[*kernel, *kernel, in_c, *filters], fan_in, &mut rng),
                        Tensor::zeros(&[*filters]),
                    ]
                }
                LayerSpec::Fc { units } => {
                    vec![he_normal(&[shape[0], *units], shape[0], &mut rng), Tensor::zeros(&[*units])]
                }
                _ => Vec::new(),
            };
            layers.push(Layer { spec: spec.clone(), params, input_shape: shape, output_shape: output_shape.clone() });
            shape = output_shape;
        }
        Ok(OrientationModel { input_shape: input_shape.to_vec(), layers, seed, trained: false })
    }

    pub fn output_shape(&self) -> &[usize] {
        self.layers.last().map_or(&self.input_shape, |l| &l.output_shape)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().flat_map(|l| &l.params).map(Tensor::len).sum()
    }

    /// Number of leading layers run during training: a trailing softmax is
    /// folded into the cross-entropy loss instead.
    pub fn trainable_depth(&self) -> usize {
        match self.layers.last() {
            Some(Layer { spec: LayerSpec::Softmax, .. }) => self.layers.len() - 1,
            _ => self.layers.len(),
        }
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        let s = input.shape();
        let ok = s == self.input_shape.as_slice() || (s.len() == self.input_shape.len() + 1 && s[1..] == self.input_shape[..]);
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "model expects input {:?} (optionally batched), got {s:?}",
                self.input_shape
            )))
        }
    }

    fn layer_forward(layer: &Layer, x: &Tensor, batched: bool) -> Result<(Tensor, LayerCache)> {
        Ok(match &layer.spec {
            LayerSpec::Conv { stride, padding, .. } => {
                let (y, c) = conv2d_forward(x, &layer.params[0], &layer.params[1], *stride, *padding)?;
                (y, LayerCache::Conv(c))
            }
            LayerSpec::Lrn(p) => {
                let (y, c) = lrn_forward(x, *p)?;
                (y, LayerCache::Lrn(c))
            }
            LayerSpec::Relu => (relu_forward(x), LayerCache::Relu(x.clone())),
            LayerSpec::Flatten => {
                let shape = x.shape().to_vec();
                let y = if batched {
                    let n = shape[0];
                    x.clone().reshape(&[n, x.len() / n])?
                } else {
                    x.clone().reshape(&[x.len()])?
                };
                (y, LayerCache::Flatten(shape))
            }
            LayerSpec::Fc { .. } => {
                let (y, c) = fc_forward(x, &layer.params[0], &layer.params[1])?;
                (y, LayerCache::Fc(c))
            }
            LayerSpec::Softmax => {
                let y = softmax_forward(x)?;
                (y.clone(), LayerCache::Softmax(y))
            }
        })
    }

    /// Full inference pass. Accepts a single input or a batch with a leading axis.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let batched = input.rank() == self.input_shape.len() + 1;
        let mut x = input.clone();
        for layer in &self.layers {
            x = Self::layer_forward(layer, &x, batched)?.0;
        }
        Ok(x)
    }

    /// Runs the first [`Self::trainable_depth`] layers, keeping caches for backprop.
    /// Returns logits when the model ends in softmax.
    pub fn forward_train(&self, input: &Tensor) -> Result<(Tensor, Vec<LayerCache>)> {
        self.check_input(input)?;
        let batched = input.rank() == self.input_shape.len() + 1;
        let depth = self.trainable_depth();
        let mut caches = Vec::with_capacity(depth);
        let mut x = input.clone();
        for layer in &self.layers[..depth] {
            let (y, cache) = Self::layer_forward(layer, &x, batched)?;
            caches.push(cache);
            x = y;
        }
        Ok((x, caches))
    }

    /// Backpropagates `grad` (gradient w.r.t. the output of the last cached
    /// layer) and returns the input gradient plus parameter gradients.
    pub fn backward(&self, caches: &[LayerCache], grad: Tensor) -> Result<(Tensor, Gradients)> {
        if caches.len() > self.layers.len() {
            return Err(Error::InvalidArgument(format!(
                "{} caches for a {}-layer model",
                caches.len(),
                self.layers.len()
            )));
        }
        let mut grads = Gradients::zeros_like(self);
        let mut g = grad;
        for i in (0..caches.len()).rev() {
            let layer = &self.layers[i];
            let missing = || Error::InvalidArgument(format!("missing {} cache for layer {i}", layer.spec.kind_name()));
            g = match (&layer.spec, &caches[i]) {
                (LayerSpec::Conv { .. }, LayerCache::Conv(c)) => {
                    let r = conv2d_backward(&g, &layer.params[0], c)?;
                    grads.0[i] = vec![r.filters, r.bias];
                    r.input
                }
                (LayerSpec::Lrn(_), LayerCache::Lrn(c)) => lrn_backward(&g, c)?,
                (LayerSpec::Relu, LayerCache::Relu(x)) => relu_backward(&g, x)?,
                (LayerSpec::Flatten, LayerCache::Flatten(shape)) => g.reshape(shape)?,
                (LayerSpec::Fc { .. }, LayerCache::Fc(c)) => {
                    let r = fc_backward(&g, &layer.params[0], c)?;
                    grads.0[i] = vec![r.weights, r.bias];
                    r.input
                }
                (LayerSpec::Softmax, LayerCache::Softmax(p)) => softmax_backward(&g, p)?,
                _ => return Err(missing()),
            };
        }
        Ok((g, grads))
    }

    /// Plain SGD: `θ ← θ − lr · ∇θ`.
    pub fn apply_sgd(&mut self, grads: &Gradients, learning_rate: f64) {
        for (p, g) in self.layers.iter_mut().flat_map(|l| l.params.iter_mut()).zip(grads.0.iter().flatten()) {
            p.add_scaled(g, -learning_rate);
        }
    }

    /// Class distribution and argmax (lowest index on ties) for one input.
    pub fn predict(&self, image: &Tensor) -> Result<Prediction> {
        if image.shape() != self.input_shape.as_slice() {
            return Err(Error::Shape(format!(
                "predict expects a single {:?} image, got {:?}",
                self.input_shape,
                image.shape()
            )));
        }
        let probs = self.forward(image)?;
        let class = probs.argmax();
        Ok(Prediction { probs, class })
    }

    /// Argmax class for every row of a batch.
    pub fn classify_batch(&self, batch: &Tensor) -> Result<Vec<usize>> {
        let out = self.forward(batch)?;
        let width = *out.shape().last().unwrap();
        out.data()
            .chunks_exact(width)
            .map(|row| Tensor::from_vec(&[width], row.to_vec()).map(|t| t.argmax()))
            .collect()
    }
}

fn he_normal(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let std = (2.0 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("finite positive std");
    let len = shape.iter().product();
    let data = (0..len).map(|_| normal.sample(rng)).collect();
    Tensor::from_vec(shape, data).expect("length matches shape")
}

/// The orientation network on 32×32×3 inputs, initialised from `seed`.
pub fn build_paper_model(seed: u64) -> OrientationModel {
    OrientationModel::from_specs(&[INPUT_SIZE, INPUT_SIZE, INPUT_CHANNELS], &paper_layer_specs(), seed)
        .expect("the built-in layer stack is shape-consistent")
}
