//! Feed-forward CNN engine: layers, model, SGD training and model files.

mod activation;
mod conv;
mod dense;
mod gemm;
mod io;
mod lrn;
mod model;
mod train;

pub use activation::{
    relu_backward, relu_forward, softmax_backward, softmax_cross_entropy, softmax_cross_entropy_batch,
    softmax_forward,
};
pub use conv::{conv2d_backward, conv2d_forward, conv_output_hw, ConvCache, ConvGeometry, ConvGrads, Padding};
pub use dense::{fc_backward, fc_forward, DenseCache, DenseGrads};
pub use io::{load_model, model_from_bytes, model_to_bytes, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use lrn::{lrn_backward, lrn_forward, LrnCache, LrnParams};
pub use model::{
    build_paper_model, paper_layer_specs, Gradients, Layer, LayerCache, LayerSpec, OrientationModel, Prediction,
    INPUT_CHANNELS, INPUT_SIZE, NUM_CLASSES,
};
pub use train::{
    accuracy_on, batch_tensor, fine_tune, minibatch_gradient, predict_samples, train, StepRecord, TrainConfig,
    TrainReport,
};
