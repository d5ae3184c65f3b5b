//! BPSK mapping and coherent LLR demodulation.
//!
//! Sign convention: bit 0 maps to +1, so a positive LLR argues for bit 0.

use num_complex::Complex64;

/// Bit 0 -> +1, bit 1 -> -1 (unit symbol power).
pub fn modulate_bpsk(bits: &[u8]) -> Vec<Complex64> {
    bits.iter()
        .map(|&b| Complex64::new(if b == 0 { 1.0 } else { -1.0 }, 0.0))
        .collect()
}

/// AWGN LLR: `2 Re(y) / sigma2`.
pub fn demod_llr_awgn(received: &[Complex64], sigma2: f64) -> Vec<f32> {
    assert!(sigma2 > 0.0, "noise variance must be positive");
    received.iter().map(|y| (2.0 * y.re / sigma2) as f32).collect()
}

/// Coherent LLR with known channel gain: `2 Re(conj(h) y) / sigma2`.
pub fn demod_llr_fading(received: &[Complex64], h: Complex64, sigma2: f64) -> Vec<f32> {
    assert!(sigma2 > 0.0, "noise variance must be positive");
    received
        .iter()
        .map(|y| (2.0 * (h.conj() * y).re / sigma2) as f32)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bpsk_mapping() {
        let syms = modulate_bpsk(&[0, 1]);
        assert_eq!(syms[0], Complex64::new(1.0, 0.0));
        assert_eq!(syms[1], Complex64::new(-1.0, 0.0));
        assert!(syms.iter().all(|s| (s.norm_sqr() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn small_noise_gives_confident_llr() {
        let llr = demod_llr_awgn(&[Complex64::new(1.0, 0.0)], 1e-6);
        assert!(llr[0] > 1e5); // strongly bit 0
        let llr = demod_llr_awgn(&[Complex64::new(-1.0, 0.2)], 1e-6);
        assert!(llr[0] < -1e5);
    }

    #[test]
    fn coherent_demod_corrects_sign_flip() {
        // h = -1 flips the constellation; conjugate weighting restores it
        let h = Complex64::new(-1.0, 0.0);
        let tx = Complex64::new(1.0, 0.0); // bit 0
        let rx = h * tx;
        let llr = demod_llr_fading(&[rx], h, 0.5);
        assert!(llr[0] > 0.0);
    }
}
