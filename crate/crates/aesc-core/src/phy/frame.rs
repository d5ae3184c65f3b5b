//! Frame splicing: the deterministic byte layout carrying quantized decoder
//! parameters and the quantized semantic code, CRC-protected.
//!
//! Wire layout (little-endian):
//!
//! ```text
//! magic "SFRM" u32 | version u16 | model_id u16 | z_dims u32
//! code_bits u8 | param_bits u8
//! code quant min/max f32 x2 | param quant min/max f32 x2
//! code_len u32 | param_len u32
//! code payload | param payload | CRC32 (IEEE) u32
//! ```
//!
//! The CRC covers header and payloads; trailing padding (from channel-code
//! block alignment) is outside the frame and ignored by the parser.

use crate::phy::{PhyError, QuantSpec};

pub const FRAME_MAGIC: [u8; 4] = *b"SFRM";
pub const FRAME_HEADER_LEN: usize = 38;
const FRAME_VERSION: u16 = 1;

/// Parsed header fields.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameHeader {
    pub model_id: u16,
    pub z_dims: u32,
    pub code_quant: QuantSpec,
    pub param_quant: QuantSpec,
    pub code_len: u32,
    pub param_len: u32,
}

/// A parsed frame: header plus raw quantized payloads.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub header: FrameHeader,
    pub code_payload: Vec<u8>,
    pub param_payload: Vec<u8>,
}

impl Frame {
    /// Total spliced length in bytes, including CRC.
    pub fn wire_len(&self) -> usize {
        FRAME_HEADER_LEN + self.code_payload.len() + self.param_payload.len() + 4
    }
}

/// Splices quantized payloads into the frame bitstream.
pub fn splice(
    model_id: u16,
    z_dims: u32,
    code_payload: &[u8],
    code_quant: &QuantSpec,
    param_payload: &[u8],
    param_quant: &QuantSpec,
) -> Result<Vec<u8>, PhyError> {
    if code_payload.len() > u32::MAX as usize || param_payload.len() > u32::MAX as usize {
        return Err(PhyError::PayloadTooLarge(
            code_payload.len().max(param_payload.len()),
        ));
    }
    let mut buf = Vec::with_capacity(FRAME_HEADER_LEN + code_payload.len() + param_payload.len() + 4);
    buf.extend_from_slice(&FRAME_MAGIC);
    buf.extend_from_slice(&FRAME_VERSION.to_le_bytes());
    buf.extend_from_slice(&model_id.to_le_bytes());
    buf.extend_from_slice(&z_dims.to_le_bytes());
    buf.push(code_quant.bits);
    buf.push(param_quant.bits);
    buf.extend_from_slice(&code_quant.min_val.to_le_bytes());
    buf.extend_from_slice(&code_quant.max_val.to_le_bytes());
    buf.extend_from_slice(&param_quant.min_val.to_le_bytes());
    buf.extend_from_slice(&param_quant.max_val.to_le_bytes());
    buf.extend_from_slice(&(code_payload.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(param_payload.len() as u32).to_le_bytes());
    debug_assert_eq!(buf.len(), FRAME_HEADER_LEN);
    buf.extend_from_slice(code_payload);
    buf.extend_from_slice(param_payload);
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

/// Parses and integrity-checks a frame. `bytes` may carry trailing padding.
pub fn unsplice(bytes: &[u8]) -> Result<Frame, PhyError> {
    if bytes.len() < FRAME_HEADER_LEN + 4 {
        return Err(PhyError::FrameMalformed(format!(
            "{} bytes is shorter than header + CRC",
            bytes.len()
        )));
    }
    if bytes[0..4] != FRAME_MAGIC {
        return Err(PhyError::FrameMalformed("bad magic".to_string()));
    }
    let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
    if version != FRAME_VERSION {
        return Err(PhyError::FrameMalformed(format!("unknown version {version}")));
    }
    let model_id = u16::from_le_bytes(bytes[6..8].try_into().unwrap());
    let z_dims = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let code_bits = bytes[12];
    let param_bits = bytes[13];
    let f = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let code_quant = QuantSpec {
        bits: code_bits,
        min_val: f(14),
        max_val: f(18),
    };
    let param_quant = QuantSpec {
        bits: param_bits,
        min_val: f(22),
        max_val: f(26),
    };
    let code_len = u32::from_le_bytes(bytes[30..34].try_into().unwrap());
    let param_len = u32::from_le_bytes(bytes[34..38].try_into().unwrap());

    let total = FRAME_HEADER_LEN + code_len as usize + param_len as usize + 4;
    if bytes.len() < total {
        return Err(PhyError::FrameMalformed(format!(
            "declared {total} bytes, stream carries {}",
            bytes.len()
        )));
    }
    let body = &bytes[..total - 4];
    let stored = u32::from_le_bytes(bytes[total - 4..total].try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(PhyError::CrcMismatch { stored, computed });
    }
    let code_start = FRAME_HEADER_LEN;
    let param_start = code_start + code_len as usize;
    Ok(Frame {
        header: FrameHeader {
            model_id,
            z_dims,
            code_quant,
            param_quant,
            code_len,
            param_len,
        },
        code_payload: bytes[code_start..param_start].to_vec(),
        param_payload: bytes[param_start..param_start + param_len as usize].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_quant(bits: u8) -> QuantSpec {
        QuantSpec {
            bits,
            min_val: -0.5,
            max_val: 1.5,
        }
    }

    #[test]
    fn splice_unsplice_roundtrip() {
        let code: Vec<u8> = (0..40).collect();
        let params: Vec<u8> = (0..200).map(|i| (i * 7 % 251) as u8).collect();
        let spliced = splice(1, 40, &code, &sample_quant(8), &params, &sample_quant(8)).unwrap();
        assert_eq!(spliced.len(), FRAME_HEADER_LEN + 40 + 200 + 4);
        let frame = unsplice(&spliced).unwrap();
        assert_eq!(frame.code_payload, code);
        assert_eq!(frame.param_payload, params);
        assert_eq!(frame.header.model_id, 1);
        assert_eq!(frame.header.z_dims, 40);
        assert_eq!(frame.wire_len(), spliced.len());
    }

    #[test]
    fn trailing_padding_is_ignored() {
        let spliced = splice(2, 8, &[1, 2, 3], &sample_quant(8), &[9; 10], &sample_quant(16)).unwrap();
        let mut padded = spliced.clone();
        padded.extend_from_slice(&[0u8; 61]);
        let frame = unsplice(&padded).unwrap();
        assert_eq!(frame.code_payload, vec![1, 2, 3]);
        assert_eq!(frame.header.param_quant.bits, 16);
    }

    #[test]
    fn corrupt_header_byte_fails_crc() {
        let mut spliced = splice(1, 40, &[5; 16], &sample_quant(8), &[7; 32], &sample_quant(8)).unwrap();
        spliced[9] ^= 0x10; // inside z_dims
        assert!(matches!(unsplice(&spliced), Err(PhyError::CrcMismatch { .. })));
    }

    #[test]
    fn corrupt_payload_byte_fails_crc() {
        let mut spliced = splice(1, 40, &[5; 16], &sample_quant(8), &[7; 32], &sample_quant(8)).unwrap();
        let idx = FRAME_HEADER_LEN + 20;
        spliced[idx] ^= 0x01;
        assert!(matches!(unsplice(&spliced), Err(PhyError::CrcMismatch { .. })));
    }

    #[test]
    fn short_streams_are_parse_errors() {
        assert!(matches!(unsplice(&[]), Err(PhyError::FrameMalformed(_))));
        assert!(matches!(unsplice(&[0u8; 20]), Err(PhyError::FrameMalformed(_))));
    }
}
