//! End-to-end link: bytes -> LDPC blocks -> BPSK -> channel -> LLRs ->
//! decoded bytes, and the full semantic frame chain on top of it.
//!
//! The receiver side of [`transmit`] rebuilds the decoder parameter set
//! purely from the received frame (model id, z_dims, quantization specs and
//! payload bytes); the transmitter's parameter set is consulted only to
//! report the received-parameter error.

use crate::models::{code_shape, AutoencoderSpec, ModelId, SemanticCode};
use crate::nn::ParamSet;
use crate::phy::{
    apply_channel, demod_llr_awgn, demod_llr_fading, dequantize, equalize_mmse, modulate_bpsk,
    quantize, splice, unsplice, ChannelConfig, ChannelState, LdpcCode, PhyError,
};

/// Bit-level statistics of one transport.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportStats {
    /// Hard-decision bit error rate on coded bits, before decoding.
    pub pre_ber: f64,
    /// Info-bit error rate after decoding, over the payload bits.
    pub post_ber: f64,
    pub blocks: usize,
    pub failed_blocks: usize,
    pub coded_bits: usize,
    pub payload_bits: usize,
}

fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    let mut bits = Vec::with_capacity(bytes.len() * 8);
    for &b in bytes {
        for i in (0..8).rev() {
            bits.push(b >> i & 1);
        }
    }
    bits
}

fn bits_to_bytes(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | (b & 1) << (7 - i))
        })
        .collect()
}

/// Carries an opaque byte payload across the coded, modulated channel.
///
/// Payload bits are zero-padded up to a whole number of LDPC blocks; the
/// returned bytes have the payload's length regardless of decoding success.
pub fn transport_bytes(
    payload: &[u8],
    channel: &ChannelConfig,
    ldpc: &LdpcCode,
    frame_seed: u64,
) -> Result<(Vec<u8>, TransportStats), PhyError> {
    assert!(!payload.is_empty(), "cannot transport an empty payload");
    let payload_bits = payload.len() * 8;
    let mut info_bits = bytes_to_bits(payload);
    let blocks = payload_bits.div_ceil(ldpc.k);
    info_bits.resize(blocks * ldpc.k, 0);

    let mut coded = Vec::with_capacity(blocks * ldpc.n);
    for block in info_bits.chunks(ldpc.k) {
        coded.extend(ldpc.encode(block));
    }

    let symbols = modulate_bpsk(&coded);
    let out = apply_channel(&symbols, channel, frame_seed)?;
    let llrs = match &out.state {
        ChannelState::Awgn => demod_llr_awgn(&out.received, out.sigma2),
        ChannelState::Fading(h) => demod_llr_fading(&out.received, *h, out.sigma2),
        ChannelState::Multipath(taps) => {
            let eq = equalize_mmse(&out.received, taps, out.sigma2, symbols.len())?;
            demod_llr_fading(
                &eq.symbols,
                num_complex::Complex64::new(eq.gain, 0.0),
                eq.noise_var,
            )
        }
    };

    let pre_errors = llrs
        .iter()
        .zip(&coded)
        .filter(|(&l, &b)| (l < 0.0) as u8 != b)
        .count();

    let mut decoded_bits = Vec::with_capacity(blocks * ldpc.k);
    let mut failed_blocks = 0usize;
    for block_llrs in llrs.chunks(ldpc.n) {
        let (bits, ok, _) = ldpc.decode(block_llrs)?;
        if !ok {
            failed_blocks += 1;
        }
        decoded_bits.extend(bits);
    }

    let post_errors = decoded_bits[..payload_bits]
        .iter()
        .zip(&info_bits[..payload_bits])
        .filter(|(a, b)| a != b)
        .count();

    let received = bits_to_bytes(&decoded_bits[..payload_bits]);
    Ok((
        received,
        TransportStats {
            pre_ber: pre_errors as f64 / coded.len() as f64,
            post_ber: post_errors as f64 / payload_bits as f64,
            blocks,
            failed_blocks,
            coded_bits: coded.len(),
            payload_bits,
        },
    ))
}

/// Frame delivered to the semantic receiver. `decoder_params` is `None`
/// for code-only frames (decoder amortized across a session).
#[derive(Debug, Clone)]
pub struct ReceivedFrame {
    pub code: SemanticCode,
    pub decoder_params: Option<ParamSet<f32>>,
}

/// Outcome of one semantic frame transmission.
#[derive(Debug, Clone)]
pub struct LinkReport {
    pub transport: TransportStats,
    pub crc_ok: bool,
    /// Frame rejected after channel decoding; the image counts as failed.
    pub outage: bool,
    pub frame_bytes: usize,
    /// MSE of the delivered decoder parameters against the transmitted ones.
    pub param_mse: Option<f64>,
}

/// Full chain: quantize -> splice -> code -> channel -> decode -> unsplice.
///
/// The semantic code is quantized to 8 bits, the decoder parameters to
/// `param_bits`. Passing `None` for the parameters sends a code-only frame
/// (the receiver is assumed to hold the decoder already). On CRC failure the
/// frame is an outage: no payload is delivered and the caller scores the
/// image as failed.
pub fn transmit(
    code: &SemanticCode,
    decoder_params: Option<&ParamSet<f32>>,
    param_bits: u8,
    channel: &ChannelConfig,
    ldpc: &LdpcCode,
    frame_seed: u64,
) -> Result<(Option<ReceivedFrame>, LinkReport), PhyError> {
    let (code_bytes, code_quant) = quantize(&code.values, 8)?;
    let (param_bytes, param_quant) = match decoder_params {
        Some(params) => quantize(&params.concat_values(), param_bits)?,
        None => (
            Vec::new(),
            crate::phy::QuantSpec {
                bits: param_bits,
                min_val: 0.0,
                max_val: 0.0,
            },
        ),
    };
    let spliced = splice(
        code.model_id.dataset_tag(),
        code.model_id.z_dims as u32,
        &code_bytes,
        &code_quant,
        &param_bytes,
        &param_quant,
    )?;
    let frame_bytes = spliced.len();

    let (received, transport) = transport_bytes(&spliced, channel, ldpc, frame_seed)?;

    let frame = match unsplice(&received) {
        Ok(frame) => frame,
        Err(PhyError::CrcMismatch { .. }) | Err(PhyError::FrameMalformed(_)) => {
            return Ok((
                None,
                LinkReport {
                    transport,
                    crc_ok: false,
                    outage: true,
                    frame_bytes,
                    param_mse: None,
                },
            ));
        }
        Err(e) => return Err(e),
    };

    // Receiver-side reconstruction from frame contents alone.
    let model_id = ModelId::from_tag(frame.header.model_id, frame.header.z_dims as usize)
        .ok_or_else(|| {
            PhyError::FrameMalformed(format!("unknown model tag {}", frame.header.model_id))
        })?;
    let spec = AutoencoderSpec::build(model_id.dataset, model_id.z_dims)
        .map_err(|e| PhyError::FrameMalformed(format!("architecture: {e}")))?;
    let template = spec.decoder.param_template();

    let code_values = dequantize(&frame.code_payload, &frame.header.code_quant)?;
    let shape = code_shape(model_id.dataset, model_id.z_dims);
    if code_values.len() != shape.iter().product::<usize>() {
        return Err(PhyError::FrameMalformed(format!(
            "code payload carries {} values, architecture wants {shape:?}",
            code_values.len()
        )));
    }

    let (received_params, param_mse) = if frame.param_payload.is_empty() {
        (None, None)
    } else {
        let param_values = dequantize(&frame.param_payload, &frame.header.param_quant)?;
        if param_values.len() != template.total_scalars() {
            return Err(PhyError::FrameMalformed(format!(
                "parameter payload carries {} values, architecture wants {}",
                param_values.len(),
                template.total_scalars()
            )));
        }
        let mse = decoder_params.map(|sent| {
            let sent = sent.concat_values();
            sent.data()
                .iter()
                .zip(param_values.data())
                .map(|(&a, &b)| ((a - b) as f64).powi(2))
                .sum::<f64>()
                / sent.len() as f64
        });
        (Some(template.from_flat_values(param_values.data())?), mse)
    };

    Ok((
        Some(ReceivedFrame {
            code: SemanticCode {
                values: code_values.into_reshaped(shape),
                model_id,
            },
            decoder_params: received_params,
        }),
        LinkReport {
            transport,
            crc_ok: true,
            outage: false,
            frame_bytes,
            param_mse,
        },
    ))
}
