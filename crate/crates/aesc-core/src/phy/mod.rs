//! The coded transmission pipeline: uniform quantization, frame splicing,
//! LDPC coding, BPSK modulation, channel models (AWGN / slow Rayleigh
//! fading / multipath tapped delay line), MMSE equalization and the
//! end-to-end transmit chain.

mod channel;
mod equalizer;
mod frame;
mod ldpc;
mod link;
mod modem;
mod quant;

pub use channel::{apply_channel, noise_sigma2, ChannelConfig, ChannelFamily, ChannelState, Tap};
pub use equalizer::{equalize_mmse, EqualizedStream};
pub use frame::{splice, unsplice, Frame, FrameHeader, FRAME_HEADER_LEN, FRAME_MAGIC};
pub use ldpc::LdpcCode;
pub use link::{transmit, transport_bytes, LinkReport, ReceivedFrame, TransportStats};
pub use modem::{demod_llr_awgn, demod_llr_fading, modulate_bpsk};
pub use quant::{dequantize, quantize, QuantSpec};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhyError {
    #[error("quantizer bits must be 8 or 16, got {0}")]
    BadBits(u8),
    #[error("non-finite values cannot be quantized")]
    NonFinite,
    #[error("multipath channel requires at least one tap")]
    EmptyTaps,
    #[error("tap powers must sum to 1 (got {0})")]
    TapPowerNotUnit(f64),
    #[error("noise variance must be positive")]
    BadNoiseVariance,
    #[error("frame: {0}")]
    FrameMalformed(String),
    #[error("frame integrity check failed (stored {stored:#010x}, computed {computed:#010x})")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("payload of {0} bytes exceeds the u32 length field")]
    PayloadTooLarge(usize),
    #[error("LDPC construction failed for seed {seed} after {attempts} attempts")]
    LdpcConstruction { seed: u64, attempts: usize },
    #[error("LLR block length {got} does not match code length {expected}")]
    BadBlockLength { got: usize, expected: usize },
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
}
