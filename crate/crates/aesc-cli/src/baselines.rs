//! Baseline transports: direct pixel transmission and an external
//! compression codec driven over stdin/stdout.

use std::io::Write;
use std::process::{Command, Stdio};

use aesc_core::phy::{transport_bytes, LdpcCode};
use aesc_core::tensor::Tensor;

use crate::config::ExperimentConfig;
use crate::experiment::{derive_seed, PointOutcome};
use crate::HarnessError;

/// `round(v * 255)` per pixel; exact for byte-derived pixel values.
pub fn image_to_bytes(image: &Tensor<f32>) -> Vec<u8> {
    image
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

pub fn bytes_to_image(bytes: &[u8], shape: &[usize]) -> Tensor<f32> {
    Tensor::new(
        shape.to_vec(),
        bytes.iter().map(|&b| b as f32 / 255.0).collect(),
    )
}

/// Direct transmission: 8-bit pixels through the same coded channel, no
/// compression and no integrity gate (bit errors surface as pixel noise).
pub fn direct_transmission(
    cfg: &ExperimentConfig,
    images: &[Tensor<f32>],
    ldpc: &LdpcCode,
    snr_db: f64,
) -> Result<PointOutcome, HarnessError> {
    let channel = cfg.channel_at(snr_db);
    let mut reconstructions = Vec::with_capacity(images.len());
    let mut ber_pre_sum = 0.0;
    let mut ber_post_sum = 0.0;
    let mut bits_sum = 0.0;
    for (i, image) in images.iter().enumerate() {
        let payload = image_to_bytes(image);
        let seed = derive_seed(cfg.seed, 0xD1EC, i as u64);
        let (received, stats) = transport_bytes(&payload, &channel, ldpc, seed)?;
        ber_pre_sum += stats.pre_ber;
        ber_post_sum += stats.post_ber;
        bits_sum += (payload.len() * 8) as f64;
        reconstructions.push(Some(bytes_to_image(&received, image.shape())));
    }
    Ok(PointOutcome {
        outages: 0,
        frames: images.len(),
        reconstructions,
        ber_pre_sum,
        ber_post_sum,
        bits_sum,
    })
}

/// External codec subprocess.
///
/// Contract: `<cmd..> encode --width W --height H --channels C --quality Q`
/// reads raw image bytes on stdin (row-major; interleaved RGB for color) and
/// writes the compressed stream on stdout; `decode` with the same geometry
/// flags inverts it. A non-zero exit or wrong-sized output is a failure.
pub struct CodecCommand {
    argv: Vec<String>,
    quality: u8,
}

impl CodecCommand {
    pub fn new(argv: Vec<String>, quality: u8) -> Self {
        Self { argv, quality }
    }

    pub fn display(&self) -> String {
        self.argv.join(" ")
    }

    fn run(&self, mode: &str, shape: &[usize], input: &[u8]) -> Result<Option<Vec<u8>>, HarnessError> {
        let (c, h, w) = (shape[0], shape[1], shape[2]);
        let mut cmd = Command::new(&self.argv[0]);
        cmd.args(&self.argv[1..])
            .arg(mode)
            .args(["--width", &w.to_string()])
            .args(["--height", &h.to_string()])
            .args(["--channels", &c.to_string()])
            .args(["--quality", &self.quality.to_string()])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null());
        let mut child = cmd
            .spawn()
            .map_err(|_| HarnessError::CodecUnavailable(self.display()))?;
        child
            .stdin
            .take()
            .expect("piped stdin")
            .write_all(input)
            .ok();
        let out = child.wait_with_output().map_err(|_| {
            HarnessError::CodecUnavailable(self.display())
        })?;
        if !out.status.success() || out.stdout.is_empty() {
            return Ok(None);
        }
        Ok(Some(out.stdout))
    }

    /// Planar [C,H,W] -> interleaved HWC bytes for the codec side.
    fn interleave(image: &Tensor<f32>) -> Vec<u8> {
        let (c, h, w) = (image.shape()[0], image.shape()[1], image.shape()[2]);
        let planar = image_to_bytes(image);
        let mut out = vec![0u8; planar.len()];
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    out[(y * w + x) * c + ch] = planar[(ch * h + y) * w + x];
                }
            }
        }
        out
    }

    fn deinterleave(bytes: &[u8], shape: &[usize]) -> Tensor<f32> {
        let (c, h, w) = (shape[0], shape[1], shape[2]);
        let mut planar = vec![0u8; bytes.len()];
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    planar[(ch * h + y) * w + x] = bytes[(y * w + x) * c + ch];
                }
            }
        }
        bytes_to_image(&planar, shape)
    }

    pub fn encode(&self, image: &Tensor<f32>) -> Result<Option<Vec<u8>>, HarnessError> {
        self.run("encode", image.shape(), &Self::interleave(image))
    }

    pub fn decode(&self, compressed: &[u8], shape: &[usize]) -> Result<Option<Tensor<f32>>, HarnessError> {
        let expected = shape.iter().product::<usize>();
        match self.run("decode", shape, compressed)? {
            Some(bytes) if bytes.len() == expected => Ok(Some(Self::deinterleave(&bytes, shape))),
            _ => Ok(None),
        }
    }
}

/// Compressed bytes through the same coded channel; any codec decode failure
/// after channel errors is an outage. Returns the outcome and the measured
/// compression ratio (raw bytes / compressed bytes, averaged).
pub fn external_codec_transmission(
    cfg: &ExperimentConfig,
    codec: &CodecCommand,
    images: &[Tensor<f32>],
    ldpc: &LdpcCode,
    snr_db: f64,
) -> Result<(PointOutcome, f64), HarnessError> {
    let channel = cfg.channel_at(snr_db);
    let mut reconstructions = Vec::with_capacity(images.len());
    let mut outages = 0usize;
    let mut ber_pre_sum = 0.0;
    let mut ber_post_sum = 0.0;
    let mut bits_sum = 0.0;
    let mut ratio_sum = 0.0;
    for (i, image) in images.iter().enumerate() {
        let raw_len = image.len();
        let Some(compressed) = codec.encode(image)? else {
            // encoder refused this image; count as outage
            outages += 1;
            reconstructions.push(None);
            continue;
        };
        ratio_sum += raw_len as f64 / compressed.len() as f64;
        let seed = derive_seed(cfg.seed, 0xC0DE, i as u64);
        let (received, stats) = transport_bytes(&compressed, &channel, ldpc, seed)?;
        ber_pre_sum += stats.pre_ber;
        ber_post_sum += stats.post_ber;
        bits_sum += (compressed.len() * 8) as f64;
        match codec.decode(&received, image.shape())? {
            Some(reconstructed) => reconstructions.push(Some(reconstructed)),
            None => {
                outages += 1;
                reconstructions.push(None);
            }
        }
    }
    let measured_cr = ratio_sum / images.len() as f64;
    Ok((
        PointOutcome {
            outages,
            frames: images.len(),
            reconstructions,
            ber_pre_sum,
            ber_post_sum,
            bits_sum,
        },
        measured_cr,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_byte_roundtrip_is_exact() {
        let image = Tensor::new(
            vec![1, 2, 2],
            vec![0.0, 37.0 / 255.0, 128.0 / 255.0, 1.0],
        );
        let bytes = image_to_bytes(&image);
        assert_eq!(bytes, vec![0, 37, 128, 255]);
        assert_eq!(bytes.len(), image.len());
        let back = bytes_to_image(&bytes, image.shape());
        assert_eq!(back.data(), image.data());
    }

    #[test]
    fn interleave_roundtrip() {
        let image = Tensor::from_fn(vec![3, 4, 5], |i| (i % 251) as f32 / 255.0);
        let hwc = CodecCommand::interleave(&image);
        let back = CodecCommand::deinterleave(&hwc, image.shape());
        assert_eq!(back.data(), image.data());
    }

    #[test]
    fn missing_codec_binary_reports_unavailable() {
        let codec = CodecCommand::new(vec!["nonexistent-codec-binary-xyz".into()], 60);
        let image = Tensor::filled(vec![1, 28, 28], 0.5);
        assert!(matches!(
            codec.encode(&image),
            Err(HarnessError::CodecUnavailable(_))
        ));
    }
}
