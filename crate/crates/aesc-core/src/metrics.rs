//! Image fidelity and semantic-recovery metrics: PSNR, single-scale SSIM,
//! recognition-rate ratio and the semantic service index.

use thiserror::Error;

use crate::models::{Classifier, ModelError};
use crate::tensor::Tensor;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("metric inputs differ in shape: {0:?} vs {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
    #[error("image {0}x{1} is smaller than the 11x11 SSIM window")]
    TooSmall(usize, usize),
    #[error("degenerate batch: original accuracy is zero")]
    ZeroOriginalAccuracy,
    #[error("semantic service denominator maps to zero")]
    ZeroDenominator,
    #[error("batch sizes differ: {0} originals vs {1} reconstructions")]
    BatchMismatch(usize, usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Per-point quality summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRecord {
    /// Peak signal-to-noise ratio in dB; infinite for identical images.
    pub psnr_db: f64,
    pub ssim: f64,
    pub rr_ratio: f64,
    pub ss_index: f64,
    pub outage: bool,
}

fn check_shapes(a: &Tensor<f32>, b: &Tensor<f32>) -> Result<(), MetricError> {
    if a.shape() != b.shape() {
        return Err(MetricError::ShapeMismatch(
            a.shape().to_vec(),
            b.shape().to_vec(),
        ));
    }
    Ok(())
}

/// `10 log10(1 / MSE)` for unit-range images; +inf when the images match.
pub fn psnr(a: &Tensor<f32>, b: &Tensor<f32>) -> Result<f64, MetricError> {
    check_shapes(a, b)?;
    let mse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| ((x - y) as f64).powi(2))
        .sum::<f64>()
        / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable Gaussian filter, valid positions only: output is
/// `(h - 10) x (w - 10)`.
fn gaussian_filter_valid(plane: &[f64], h: usize, w: usize, kernel: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            let mut acc = 0.0;
            for (i, &kv) in kernel.iter().enumerate() {
                acc += kv * plane[y * w + x + i];
            }
            horiz[y * ow + x] = acc;
        }
    }
    let oh = h - SSIM_WINDOW + 1;
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (i, &kv) in kernel.iter().enumerate() {
                acc += kv * horiz[(y + i) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 1; averaged over valid window positions and
/// channels.
pub fn ssim(a: &Tensor<f32>, b: &Tensor<f32>) -> Result<f64, MetricError> {
    check_shapes(a, b)?;
    let (c, h, w) = match a.shape() {
        [c, h, w] => (*c, *h, *w),
        [h, w] => (1, *h, *w),
        other => {
            return Err(MetricError::ShapeMismatch(
                other.to_vec(),
                vec![0, 0, 0],
            ))
        }
    };
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(MetricError::TooSmall(h, w));
    }
    let kernel = gaussian_kernel();
    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);

    let mut total = 0.0;
    for ch in 0..c {
        let plane_a: Vec<f64> = a.data()[ch * h * w..(ch + 1) * h * w]
            .iter()
            .map(|&v| v as f64)
            .collect();
        let plane_b: Vec<f64> = b.data()[ch * h * w..(ch + 1) * h * w]
            .iter()
            .map(|&v| v as f64)
            .collect();
        let aa: Vec<f64> = plane_a.iter().map(|v| v * v).collect();
        let bb: Vec<f64> = plane_b.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = plane_a.iter().zip(&plane_b).map(|(x, y)| x * y).collect();

        let mu_a = gaussian_filter_valid(&plane_a, h, w, &kernel);
        let mu_b = gaussian_filter_valid(&plane_b, h, w, &kernel);
        let m_aa = gaussian_filter_valid(&aa, h, w, &kernel);
        let m_bb = gaussian_filter_valid(&bb, h, w, &kernel);
        let m_ab = gaussian_filter_valid(&ab, h, w, &kernel);

        let mut acc = 0.0;
        for i in 0..mu_a.len() {
            let (ua, ub) = (mu_a[i], mu_b[i]);
            let va = m_aa[i] - ua * ua;
            let vb = m_bb[i] - ub * ub;
            let cov = m_ab[i] - ua * ub;
            acc += ((2.0 * ua * ub + c1) * (2.0 * cov + c2))
                / ((ua * ua + ub * ub + c1) * (va + vb + c2));
        }
        total += acc / mu_a.len() as f64;
    }
    Ok(total / c as f64)
}

/// Classifier accuracy on reconstructions divided by accuracy on originals.
///
/// A `None` reconstruction is an outage and counts as misclassified.
pub fn recognition_rate_ratio(
    originals: &[Tensor<f32>],
    reconstructions: &[Option<Tensor<f32>>],
    labels: &[u8],
    classifier: &Classifier,
) -> Result<f64, MetricError> {
    if originals.len() != reconstructions.len() {
        return Err(MetricError::BatchMismatch(
            originals.len(),
            reconstructions.len(),
        ));
    }
    assert_eq!(originals.len(), labels.len(), "labels must pair with images");
    let mut orig_correct = 0usize;
    let mut recon_correct = 0usize;
    for ((s, s_hat), &label) in originals.iter().zip(reconstructions).zip(labels) {
        if classifier.classify(s)? == label {
            orig_correct += 1;
        }
        if let Some(s_hat) = s_hat {
            if classifier.classify(s_hat)? == label {
                recon_correct += 1;
            }
        }
    }
    if orig_correct == 0 {
        return Err(MetricError::ZeroOriginalAccuracy);
    }
    Ok(recon_correct as f64 / orig_correct as f64)
}

/// Mapping applied to task scores before the service ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StMapping {
    Identity,
    Sigmoid,
}

impl StMapping {
    fn apply(self, v: f64) -> f64 {
        match self {
            StMapping::Identity => v,
            StMapping::Sigmoid => 1.0 / (1.0 + (-v).exp()),
        }
    }
}

/// Semantic service index: `map(ST(reconstructed)) / map(ST(original))`,
/// clamped to [0, 1].
pub fn semantic_service(
    st_original: f64,
    st_reconstructed: f64,
    mapping: StMapping,
) -> Result<f64, MetricError> {
    let denom = mapping.apply(st_original);
    if denom == 0.0 {
        return Err(MetricError::ZeroDenominator);
    }
    Ok((mapping.apply(st_reconstructed) / denom).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn image(h: usize, w: usize, f: impl Fn(usize, usize) -> f32) -> Tensor<f32> {
        Tensor::from_fn(vec![1, h, w], |i| f(i / w, i % w))
    }

    #[test]
    fn psnr_closed_forms() {
        let a = image(16, 16, |_, _| 0.5);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);

        let zero = image(16, 16, |_, _| 0.0);
        let one = image(16, 16, |_, _| 1.0);
        assert_abs_diff_eq!(psnr(&zero, &one).unwrap(), 0.0, epsilon = 1e-12);

        // MSE 0.01 -> 20 dB (up to f32 pixel representation)
        let b = image(16, 16, |_, _| 0.6);
        assert_abs_diff_eq!(psnr(&a, &b).unwrap(), 20.0, epsilon = 1e-5);
    }

    #[test]
    fn psnr_and_ssim_are_symmetric() {
        let a = image(16, 16, |y, x| ((y * 31 + x * 17) % 97) as f32 / 96.0);
        let b = image(16, 16, |y, x| ((y * 13 + x * 29) % 89) as f32 / 88.0);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        assert_abs_diff_eq!(ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn ssim_identity_is_one() {
        let a = image(20, 20, |y, x| ((y * 7 + x) % 11) as f32 / 10.0);
        assert_abs_diff_eq!(ssim(&a, &a).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn ssim_of_inverted_checkerboard_is_negative() {
        let a = image(16, 16, |y, x| ((y / 2 + x / 2) % 2) as f32);
        let b = a.map(|v| 1.0 - v);
        assert!(ssim(&a, &b).unwrap() < 0.0);
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = image(8, 8, |_, _| 0.5);
        assert!(matches!(ssim(&a, &a), Err(MetricError::TooSmall(8, 8))));
    }

    /// Brute-force windowed SSIM with an explicit 2-D kernel; independent of
    /// the separable implementation above.
    fn ssim_bruteforce(a: &Tensor<f32>, b: &Tensor<f32>) -> f64 {
        let (h, w) = (a.shape()[1], a.shape()[2]);
        let k1d = gaussian_kernel();
        let mut k2d = [[0.0f64; SSIM_WINDOW]; SSIM_WINDOW];
        for i in 0..SSIM_WINDOW {
            for j in 0..SSIM_WINDOW {
                k2d[i][j] = k1d[i] * k1d[j];
            }
        }
        let c1 = 1e-4;
        let c2 = 9e-4;
        let mut acc = 0.0;
        let mut count = 0usize;
        for y in 0..=h - SSIM_WINDOW {
            for x in 0..=w - SSIM_WINDOW {
                let (mut ua, mut ub, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..SSIM_WINDOW {
                    for j in 0..SSIM_WINDOW {
                        let va = a.data()[(y + i) * w + x + j] as f64;
                        let vb = b.data()[(y + i) * w + x + j] as f64;
                        let kv = k2d[i][j];
                        ua += kv * va;
                        ub += kv * vb;
                        saa += kv * va * va;
                        sbb += kv * vb * vb;
                        sab += kv * va * vb;
                    }
                }
                let (va, vb, cov) = (saa - ua * ua, sbb - ub * ub, sab - ua * ub);
                acc += ((2.0 * ua * ub + c1) * (2.0 * cov + c2))
                    / ((ua * ua + ub * ub + c1) * (va + vb + c2));
                count += 1;
            }
        }
        acc / count as f64
    }

    #[test]
    fn separable_ssim_matches_bruteforce_oracle() {
        for seed in 0..4u64 {
            let a = image(18, 22, |y, x| {
                (((y * 37 + x * 11) as u64 * (seed + 3)) % 101) as f32 / 100.0
            });
            let b = image(18, 22, |y, x| {
                (((y * 23 + x * 41) as u64 * (seed + 7)) % 103) as f32 / 102.0
            });
            assert_abs_diff_eq!(
                ssim(&a, &b).unwrap(),
                ssim_bruteforce(&a, &b),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn semantic_service_cases() {
        assert_eq!(semantic_service(0.9, 0.9, StMapping::Identity).unwrap(), 1.0);
        assert_eq!(semantic_service(0.9, 0.45, StMapping::Identity).unwrap(), 0.5);
        assert_eq!(semantic_service(0.9, 0.0, StMapping::Identity).unwrap(), 0.0);
        assert!(matches!(
            semantic_service(0.0, 0.5, StMapping::Identity),
            Err(MetricError::ZeroDenominator)
        ));
        // sigmoid mapping is monotone in the reconstructed score
        let mut prev = 0.0;
        for i in 0..20 {
            let st = -5.0 + i as f64 * 0.5;
            let v = semantic_service(4.0, st, StMapping::Sigmoid).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }
}
