//! Loss functions, their exact gradients, training loops and
//! compression-ratio accounting.

mod trainer;

pub use trainer::{
    evaluate_accuracy, train_autoencoder, train_classifier, EpochStats, TrainLog,
    TrainedAutoencoder,
};

use thiserror::Error;

use crate::data::DatasetName;
use crate::models::{Classifier, ForwardCache, ModelError, Network, OutputGrad};
use crate::nn::{NnError, ParamSet};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("loss shapes differ: {0:?} vs {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
    #[error("reconstruction outside (0,1): value {0}")]
    OutOfRange(f64),
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("gamma {0} outside (0,1)")]
    BadGamma(f64),
}

/// Which reconstruction term the combined loss uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconstructionKind {
    Mse,
    Bce,
}

/// Weighting between semantic and reconstruction terms.
#[derive(Debug, Clone, Copy)]
pub struct LossConfig {
    pub gamma: f64,
    pub reconstruction: ReconstructionKind,
}

impl LossConfig {
    /// Per-dataset defaults: MNIST pairs BCE with gamma 0.5, CIFAR-10 pairs
    /// MSE with gamma 0.1.
    pub fn defaults_for(dataset: DatasetName) -> Self {
        match dataset {
            DatasetName::Mnist => Self {
                gamma: 0.5,
                reconstruction: ReconstructionKind::Bce,
            },
            DatasetName::Cifar10 => Self {
                gamma: 0.1,
                reconstruction: ReconstructionKind::Mse,
            },
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(TrainError::BadGamma(self.gamma));
        }
        Ok(())
    }
}

/// Optimizer and schedule settings.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub lr: f32,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// MNIST: lr 0.001, batch 256. CIFAR-10: lr 0.001, batch 128.
    pub fn defaults_for(dataset: DatasetName) -> Self {
        match dataset {
            DatasetName::Mnist => Self {
                lr: 0.001,
                batch_size: 256,
                max_epochs: 60,
                early_stop_patience: 10,
                seed: 0,
            },
            DatasetName::Cifar10 => Self {
                lr: 0.001,
                batch_size: 128,
                max_epochs: 110,
                early_stop_patience: 10,
                seed: 0,
            },
        }
    }
}

fn check_same_shape<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<(), TrainError> {
    if a.shape() != b.shape() {
        return Err(TrainError::ShapeMismatch(
            a.shape().to_vec(),
            b.shape().to_vec(),
        ));
    }
    Ok(())
}

/// Mean squared error over all elements.
pub fn loss_mse<T: Scalar>(s: &Tensor<T>, s_hat: &Tensor<T>) -> Result<T, TrainError> {
    check_same_shape(s, s_hat)?;
    let n = T::from_f64(s.len() as f64);
    let mut acc = T::zero();
    for (&a, &b) in s.data().iter().zip(s_hat.data()) {
        let d = b - a;
        acc += d * d;
    }
    Ok(acc / n)
}

/// Gradient of [`loss_mse`] w.r.t. `s_hat`: `2 (s_hat - s) / N`.
pub fn mse_grad<T: Scalar>(s: &Tensor<T>, s_hat: &Tensor<T>) -> Tensor<T> {
    let scale = T::from_f64(2.0 / s.len() as f64);
    Tensor::from_fn(s.shape().to_vec(), |i| {
        scale * (s_hat.data()[i] - s.data()[i])
    })
}

const LOG_CLAMP: f64 = 1e-12;

/// Binary cross-entropy, mean over elements, with log arguments clamped at
/// 1e-12. Rejects predictions outside `[0, 1]`.
pub fn loss_bce<T: Scalar>(s: &Tensor<T>, s_hat: &Tensor<T>) -> Result<T, TrainError> {
    check_same_shape(s, s_hat)?;
    let clamp = T::from_f64(LOG_CLAMP);
    let one = T::one();
    let mut acc = T::zero();
    for (&y, &p) in s.data().iter().zip(s_hat.data()) {
        if p < T::zero() || p > one {
            return Err(TrainError::OutOfRange(p.to_f64s()));
        }
        acc += y * p.max(clamp).ln() + (one - y) * (one - p).max(clamp).ln();
    }
    Ok(-acc / T::from_f64(s.len() as f64))
}

/// Semantic loss: MSE between penultimate classifier features of the
/// original and the reconstruction. Requires a trained classifier.
pub fn loss_semantic(
    s: &Tensor<f32>,
    s_hat: &Tensor<f32>,
    classifier: &Classifier,
) -> Result<f32, TrainError> {
    let fs = classifier.penultimate_features(s)?;
    let fh = classifier.penultimate_features(s_hat)?;
    Ok(loss_mse(&fs, &fh)?)
}

/// Semantic loss and its gradient w.r.t. the reconstruction, given the
/// original's precomputed features. Gradients flow into `s_hat` only; the
/// classifier parameters receive none.
pub fn semantic_loss_and_grad<T: Scalar>(
    s_features: &Tensor<T>,
    s_hat: &Tensor<T>,
    network: &Network,
    params: &ParamSet<T>,
    penultimate_stage: usize,
) -> Result<(T, Tensor<T>), TrainError> {
    let cache: ForwardCache<T> = network.forward_cached(params, s_hat)?;
    let fh = cache.stage_output(penultimate_stage);
    let loss = loss_mse(s_features, fh)?;
    let gfeat = mse_grad(s_features, fh);
    let (grad_input, _) = network.backward(
        params,
        &cache,
        OutputGrad::PostActivation(gfeat),
        penultimate_stage,
        false,
    )?;
    Ok((loss, grad_input))
}

/// Weighted combination `gamma * L_SE + (1 - gamma) * L_recon`.
pub fn loss_combined(
    s: &Tensor<f32>,
    s_hat: &Tensor<f32>,
    config: &LossConfig,
    classifier: &Classifier,
) -> Result<f32, TrainError> {
    config.validate()?;
    let recon = match config.reconstruction {
        ReconstructionKind::Mse => loss_mse(s, s_hat)?,
        ReconstructionKind::Bce => loss_bce(s, s_hat)?,
    };
    let sem = loss_semantic(s, s_hat, classifier)?;
    Ok(config.gamma as f32 * sem + (1.0 - config.gamma as f32) * recon)
}

/// Source pixels per transmitted code scalar.
///
/// MNIST: `C*W*H / z_dims`. CIFAR-10: `C*W*H / (z_dims * 6 * 6)`. For the
/// CIFAR widths 32/12/8 this evaluates to 2.67/7.11/10.67, which differs
/// from the rounded 3/6/12 grid those widths are usually paired with; the
/// exact quotient is what gets reported.
pub fn compression_ratio(dataset: DatasetName, z_dims: usize) -> f64 {
    let [c, h, w] = dataset.image_shape();
    let source = (c * h * w) as f64;
    match dataset {
        DatasetName::Mnist => source / z_dims as f64,
        DatasetName::Cifar10 => source / (z_dims as f64 * 36.0),
    }
}

/// Numerically stable cross-entropy of logits against a class label.
pub fn cross_entropy<T: Scalar>(logits: &Tensor<T>, label: u8) -> T {
    let max = logits
        .data()
        .iter()
        .copied()
        .fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for &z in logits.data() {
        sum += (z - max).exp();
    }
    sum.ln() + max - logits.data()[label as usize]
}

/// Gradient of [`cross_entropy`] w.r.t. the logits: `softmax - onehot`.
pub fn cross_entropy_grad<T: Scalar>(logits: &Tensor<T>, label: u8) -> Tensor<T> {
    let max = logits
        .data()
        .iter()
        .copied()
        .fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.data().iter().map(|&z| (z - max).exp()).collect();
    let sum = exps.iter().fold(T::zero(), |a, &b| a + b);
    Tensor::from_fn(logits.shape().to_vec(), |i| {
        let p = exps[i] / sum;
        if i == label as usize {
            p - T::one()
        } else {
            p
        }
    })
}
