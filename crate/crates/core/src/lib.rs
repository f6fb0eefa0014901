//! Human body-orientation estimation and orientation-aware robot repositioning.
//!
//! The crate is split along the pipeline:
//!
//! * [`nnet`]: a small CNN engine (conv, LRN, ReLU, dense, softmax) with SGD
//!   training and a binary model format.
//! * [`labels`]: joint geometry to continuous orientation angle to 8-way class.
//! * [`data`]: synthetic figure renderer, crop/resize, dataset files, splits.
//! * [`eval`]: confusion matrix, accuracy, mean orientation error.
//! * [`planner`]: occupancy grids and the candidate-utility repositioning planner.
//! * [`sim`]: a deterministic follow / dwell / reposition / face-check simulator.
//!
//! Data-parallel loops go through [`parallel`], which uses rayon when the
//! `parallel` feature is on and plain iteration otherwise. Results are
//! identical in both modes.

// `!(x > 0.0)` style checks are there to reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod binio;
pub mod data;
pub mod error;
pub mod eval;
pub mod labels;
pub mod nnet;
pub mod parallel;
pub mod planner;
pub mod sim;
pub mod tensor;

pub use error::{Error, Result};
pub use labels::{OrientationAngle, OrientationClass};
pub use tensor::Tensor;
