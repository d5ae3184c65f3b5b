//! End-to-end simulator for semantic image transmission.
//!
//! A convolutional autoencoder turns images into compact latent codes; the
//! quantized decoder parameters and codes are spliced into a frame,
//! LDPC-coded, BPSK-modulated and pushed through AWGN, slow-fading or
//! multipath channels; the receiver rebuilds its decoder from the received
//! bytes alone and reconstructs the image. Quality is tracked with PSNR,
//! SSIM and a classifier-based recognition-rate ratio across SNR and
//! compression sweeps.
//!
//! Crate layout:
//! - [`tensor`], [`nn`]: a small differentiable layer engine (conv2d, its
//!   transpose, linear, ReLU/sigmoid, Adam) with canonical parameter bytes.
//! - [`data`]: MNIST/CIFAR-10 binary ingestion, splits and batching.
//! - [`models`]: the fixed encoder/decoder architectures and the auxiliary
//!   classifier that provides semantic features.
//! - [`training`]: losses (reconstruction + semantic), training loops,
//!   compression-ratio accounting.
//! - [`phy`]: quantization, frame splicing, LDPC, BPSK, channels, MMSE
//!   equalization and the full transmit chain.
//! - [`metrics`]: PSNR, SSIM, recognition-rate ratio and the semantic
//!   service index.

pub mod data;
pub mod metrics;
pub mod models;
pub mod phy;
pub mod training;
pub mod nn;
pub mod tensor;

pub use tensor::{Scalar, Tensor};
