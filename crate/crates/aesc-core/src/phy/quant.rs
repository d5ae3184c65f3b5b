//! Uniform min-max quantization to 8- or 16-bit codes.

use crate::phy::PhyError;
use crate::tensor::Tensor;

/// Per-tensor quantization range and width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantSpec {
    pub bits: u8,
    pub min_val: f32,
    pub max_val: f32,
}

impl QuantSpec {
    pub fn levels(&self) -> u32 {
        (1u32 << self.bits) - 1
    }

    /// Worst-case reconstruction error per element: half a step of the
    /// `2^bits - 1`-level endpoint-anchored grid.
    pub fn max_error(&self) -> f64 {
        (self.max_val as f64 - self.min_val as f64) / (2.0 * self.levels() as f64)
    }

    pub fn bytes_per_value(&self) -> usize {
        self.bits as usize / 8
    }
}

/// Quantizes `q = round((v - min) / (max - min) * (2^bits - 1))`, returning
/// the code bytes (little-endian u16 per value for 16-bit) and the spec.
///
/// A constant tensor degenerates to all-zero codes and dequantizes back to
/// the constant exactly.
pub fn quantize(t: &Tensor<f32>, bits: u8) -> Result<(Vec<u8>, QuantSpec), PhyError> {
    if bits != 8 && bits != 16 {
        return Err(PhyError::BadBits(bits));
    }
    if !t.all_finite() {
        return Err(PhyError::NonFinite);
    }
    let (min_val, max_val) = t.min_max();
    let spec = QuantSpec {
        bits,
        min_val,
        max_val,
    };
    let range = (max_val - min_val) as f64;
    let levels = spec.levels() as f64;
    let mut out = Vec::with_capacity(t.len() * spec.bytes_per_value());
    for &v in t.data() {
        let q = if range == 0.0 {
            0u32
        } else {
            (((v - min_val) as f64 / range * levels).round() as i64).clamp(0, levels as i64) as u32
        };
        match bits {
            8 => out.push(q as u8),
            _ => out.extend_from_slice(&(q as u16).to_le_bytes()),
        }
    }
    Ok((out, spec))
}

/// Inverse of [`quantize`]: `v = min + q * (max - min) / (2^bits - 1)`.
pub fn dequantize(codes: &[u8], spec: &QuantSpec) -> Result<Tensor<f32>, PhyError> {
    if spec.bits != 8 && spec.bits != 16 {
        return Err(PhyError::BadBits(spec.bits));
    }
    let width = spec.bytes_per_value();
    if codes.is_empty() || codes.len() % width != 0 {
        return Err(PhyError::FrameMalformed(format!(
            "quantized payload of {} bytes is not a multiple of {width}",
            codes.len()
        )));
    }
    let range = (spec.max_val - spec.min_val) as f64;
    let levels = spec.levels() as f64;
    let step = if range == 0.0 { 0.0 } else { range / levels };
    let values: Vec<f32> = codes
        .chunks_exact(width)
        .map(|c| {
            let q = match spec.bits {
                8 => c[0] as u32,
                _ => u16::from_le_bytes(c.try_into().unwrap()) as u32,
            };
            (spec.min_val as f64 + q as f64 * step) as f32
        })
        .collect();
    let n = values.len();
    Ok(Tensor::new(vec![n], values))
}
