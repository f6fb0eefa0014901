//! Labeled image samples: synthetic generation, crop/resize, splitting and files.

mod io;
mod render;
mod resize;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use io::{dataset_from_bytes, dataset_to_bytes, load_dataset, save_dataset, DATASET_MAGIC, DATASET_VERSION};
pub use render::{generate_synthetic, render_figure, Palette, StyleParams, BODY_JOINTS};
pub use resize::{crop_and_resize, CropBox};

use crate::error::{Error, Result};
use crate::labels::{OrientationClass, JointTriple, NUM_CLASSES};

/// Channel-last RGB image with `f32` values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Image {
    pub const CHANNELS: usize = 3;

    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width * Self::CHANNELS {
            return Err(Error::Shape(format!(
                "{height}x{width}x3 image needs {} values, got {}",
                height * width * Self::CHANNELS,
                data.len()
            )));
        }
        Ok(Image { height, width, data })
    }

    pub fn filled(height: usize, width: usize, rgb: [f32; 3]) -> Self {
        let data = (0..height * width).flat_map(|_| rgb).collect();
        Image { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.height, self.width, Self::CHANNELS]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> [f32; 3] {
        let i = (y * self.width + x) * Self::CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Converts to an `(H, W, 3)` network input tensor.
    pub fn to_tensor(&self) -> crate::Tensor {
        crate::Tensor::from_vec(&self.shape(), self.data.iter().map(|&v| f64::from(v)).collect())
            .expect("image buffer matches its shape")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub image: Image,
    pub label: OrientationClass,
    /// Continuous orientation in degrees, when known.
    pub true_angle: Option<f64>,
    pub joints: Option<JointTriple>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Synthetic,
    Imported,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub provenance: Provenance,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_histogram(&self) -> [usize; NUM_CLASSES] {
        let mut h = [0; NUM_CLASSES];
        for s in &self.samples {
            h[s.label.index()] += 1;
        }
        h
    }

    /// Seeded shuffle, then the first `round(len · val_fraction)` samples become
    /// the validation set. Returns `(train, val)`.
    pub fn split(&self, val_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(val_fraction > 0.0 && val_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "validation fraction must lie in (0, 1), got {val_fraction}"
            )));
        }
        let mut order: Vec<usize> = (0..self.samples.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_val = (self.samples.len() as f64 * val_fraction).round() as usize;
        let pick = |idx: &[usize]| Dataset {
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
            provenance: self.provenance,
            seed: self.seed,
        };
        Ok((pick(&order[n_val..]), pick(&order[..n_val])))
    }
}
