//! Dataset ingestion, splits and deterministic batching.
//!
//! MNIST comes from the published IDX files, CIFAR-10 from its binary
//! batches. Pixels are stored as `byte / 255` in `[N, C, H, W]` layout.

mod loader;
pub mod synth;

pub use loader::{load_cifar10, load_mnist};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::tensor::Tensor;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: bad magic {got:#010x}, expected {expected:#010x}")]
    BadMagic { path: String, got: u32, expected: u32 },
    #[error("{path}: truncated, expected {expected} bytes, got {got}")]
    Truncated {
        path: String,
        expected: usize,
        got: usize,
    },
    #[error("{path}: {detail}")]
    CountMismatch { path: String, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetName {
    Mnist,
    Cifar10,
}

impl DatasetName {
    pub fn label(self) -> &'static str {
        match self {
            DatasetName::Mnist => "mnist",
            DatasetName::Cifar10 => "cifar10",
        }
    }

    /// `[C, H, W]` of one image.
    pub fn image_shape(self) -> [usize; 3] {
        match self {
            DatasetName::Mnist => [1, 28, 28],
            DatasetName::Cifar10 => [3, 32, 32],
        }
    }

    pub fn pixels_per_image(self) -> usize {
        let [c, h, w] = self.image_shape();
        c * h * w
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mnist" => Some(DatasetName::Mnist),
            "cifar10" | "cifar-10" | "cifar" => Some(DatasetName::Cifar10),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Images with labels for one split, pixels in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: DatasetName,
    pub split: Split,
    images: Vec<f32>,
    labels: Vec<u8>,
}

impl Dataset {
    pub(crate) fn from_bytes(name: DatasetName, split: Split, pixels: &[u8], labels: Vec<u8>) -> Self {
        debug_assert_eq!(pixels.len(), labels.len() * name.pixels_per_image());
        // exact byte/255 normalization via lookup table
        let lut: Vec<f32> = (0..256).map(|b| b as f32 / 255.0).collect();
        Self {
            name,
            split,
            images: pixels.iter().map(|&b| lut[b as usize]).collect(),
            labels,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, index: usize) -> u8 {
        self.labels[index]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Copy of image `index` as a `[C, H, W]` tensor.
    pub fn image(&self, index: usize) -> Tensor<f32> {
        let n = self.name.pixels_per_image();
        Tensor::new(
            self.name.image_shape().to_vec(),
            self.images[index * n..(index + 1) * n].to_vec(),
        )
    }

    /// Carves a seeded validation split out of a shuffled index permutation;
    /// `val_fraction` of the images go to the validation set.
    pub fn split_train_val(&self, val_fraction: f64, seed: u64) -> (Dataset, Dataset) {
        assert!((0.0..1.0).contains(&val_fraction));
        let mut order: Vec<usize> = (0..self.len()).collect();
        let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x517c_c1b7_2722_0a95);
        order.shuffle(&mut rng);
        let val_n = (self.len() as f64 * val_fraction).round() as usize;
        let (train_idx, val_idx) = order.split_at(self.len() - val_n);
        (
            self.subset_from(train_idx, Split::Train),
            self.subset_from(val_idx, Split::Val),
        )
    }

    /// New dataset holding the given indices, in order.
    pub fn subset_from(&self, indices: &[usize], split: Split) -> Dataset {
        let n = self.name.pixels_per_image();
        let mut images = Vec::with_capacity(indices.len() * n);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            images.extend_from_slice(&self.images[i * n..(i + 1) * n]);
            labels.push(self.labels[i]);
        }
        Dataset {
            name: self.name,
            split,
            images,
            labels,
        }
    }

    /// First `count` images, for reduced-scale runs.
    pub fn take(&self, count: usize) -> Dataset {
        let count = count.min(self.len());
        let indices: Vec<usize> = (0..count).collect();
        self.subset_from(&indices, self.split)
    }

    pub fn class_histogram(&self) -> [usize; 10] {
        let mut hist = [0usize; 10];
        for &l in &self.labels {
            hist[l as usize] += 1;
        }
        hist
    }
}

/// Deterministic batching: the epoch permutation derives from (seed, epoch).
#[derive(Debug, Clone, Copy)]
pub struct BatchConfig {
    pub batch_size: usize,
    pub seed: u64,
    pub drop_last: bool,
}

/// Index batches for one epoch; the union covers the dataset exactly once
/// (modulo `drop_last`).
pub fn epoch_batches(n: usize, config: &BatchConfig, epoch: usize) -> Vec<Vec<usize>> {
    assert!(
        config.batch_size >= 1 && config.batch_size <= n,
        "batch size {} out of range for {n} samples",
        config.batch_size
    );
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng =
        ChaCha12Rng::seed_from_u64(config.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ epoch as u64);
    order.shuffle(&mut rng);
    let mut out = Vec::new();
    for chunk in order.chunks(config.batch_size) {
        if chunk.len() < config.batch_size && config.drop_last {
            break;
        }
        out.push(chunk.to_vec());
    }
    out
}
