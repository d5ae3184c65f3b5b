//! Linear MMSE FIR equalizer for the tapped-delay-line channel, designed
//! from the known taps and noise variance.

use num_complex::Complex64;

use crate::phy::{PhyError, Tap};

/// Equalized symbols plus the effective scalar channel they see.
///
/// The equalizer output decomposes as `z = gain * x + e` with
/// `E|e|^2 = gain - gain^2`, so downstream LLRs treat it as a flat channel
/// with gain `gain` and that residual variance.
#[derive(Debug, Clone)]
pub struct EqualizedStream {
    pub symbols: Vec<Complex64>,
    pub gain: f64,
    pub noise_var: f64,
}

const MIN_EQUALIZER_LEN: usize = 16;
const RIDGE: f64 = 1e-9;

/// Designs and applies the MMSE equalizer.
///
/// Filter length is `4 * (max_delay + 1)`, floored at 16 so short channels
/// still get enough taps to cancel their inverse-response tail; the decision
/// delay is half the filter length. `n_symbols` is the transmitted stream
/// length (the received stream carries the convolution tail). `sigma2` is
/// the per-real-dimension noise variance; each complex sample carries twice
/// that in total.
pub fn equalize_mmse(
    received: &[Complex64],
    taps: &[Tap],
    sigma2: f64,
    n_symbols: usize,
) -> Result<EqualizedStream, PhyError> {
    if taps.is_empty() {
        return Err(PhyError::EmptyTaps);
    }
    if sigma2 <= 0.0 {
        return Err(PhyError::BadNoiseVariance);
    }
    let max_delay = taps.iter().map(|t| t.delay).max().unwrap();
    let mut h = vec![Complex64::new(0.0, 0.0); max_delay + 1];
    for t in taps {
        h[t.delay] += t.gain;
    }

    let len = (4 * (max_delay + 1)).max(MIN_EQUALIZER_LEN);
    let delay = len / 2;

    // R(i, j) = sum_m h(m) conj(h(m + j - i)) + sigma2 I ; p(i) = h(d - i)
    let mut r = vec![Complex64::new(0.0, 0.0); len * len];
    for i in 0..len {
        for j in 0..len {
            let lag = j as isize - i as isize;
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, &hm) in h.iter().enumerate() {
                let m2 = m as isize + lag;
                if m2 >= 0 && (m2 as usize) < h.len() {
                    acc += hm * h[m2 as usize].conj();
                }
            }
            if i == j {
                acc += 2.0 * sigma2 + RIDGE;
            }
            r[i * len + j] = acc;
        }
    }
    let mut p = vec![Complex64::new(0.0, 0.0); len];
    for (i, pi) in p.iter_mut().enumerate() {
        let idx = delay as isize - i as isize;
        if idx >= 0 && (idx as usize) < h.len() {
            *pi = h[idx as usize];
        }
    }

    let w = solve_hermitian(&mut r, &mut p.clone(), len)?;

    // gain = w^H p (real and positive for an MMSE solution)
    let gain: f64 = w
        .iter()
        .zip(&p)
        .map(|(wi, pi)| (wi.conj() * pi).re)
        .sum();
    let noise_var = (gain - gain * gain).max(1e-12);

    // z(m) = sum_i conj(w_i) r(m + delay - i), aligned to the transmit index
    let mut symbols = Vec::with_capacity(n_symbols);
    for m in 0..n_symbols {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, wi) in w.iter().enumerate() {
            let idx = m as isize + delay as isize - i as isize;
            if idx >= 0 && (idx as usize) < received.len() {
                acc += wi.conj() * received[idx as usize];
            }
        }
        symbols.push(acc);
    }
    Ok(EqualizedStream {
        symbols,
        gain,
        noise_var,
    })
}

/// Gaussian elimination with partial pivoting on a dense complex system.
fn solve_hermitian(a: &mut [Complex64], b: &mut [Complex64], n: usize) -> Result<Vec<Complex64>, PhyError> {
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| {
                a[r1 * n + col]
                    .norm_sqr()
                    .partial_cmp(&a[r2 * n + col].norm_sqr())
                    .unwrap()
            })
            .unwrap();
        if a[pivot_row * n + col].norm_sqr() < 1e-30 {
            return Err(PhyError::BadNoiseVariance);
        }
        if pivot_row != col {
            for j in 0..n {
                a.swap(col * n + j, pivot_row * n + j);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / pivot;
            for j in col..n {
                let v = a[col * n + j];
                a[row * n + j] -= factor * v;
            }
            let bv = b[col];
            b[row] -= factor * bv;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for j in row + 1..n {
            acc -= a[row * n + j] * x[j];
        }
        x[row] = acc / a[row * n + row];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::{apply_channel, modulate_bpsk, ChannelConfig};

    fn unit_tap() -> Vec<Tap> {
        vec![Tap {
            gain: Complex64::new(1.0, 0.0),
            delay: 0,
        }]
    }

    fn two_tap() -> Vec<Tap> {
        // (1, 0.5) normalized to unit power
        let norm = (1.0f64 + 0.25).sqrt();
        vec![
            Tap {
                gain: Complex64::new(1.0 / norm, 0.0),
                delay: 0,
            },
            Tap {
                gain: Complex64::new(0.5 / norm, 0.0),
                delay: 1,
            },
        ]
    }

    #[test]
    fn single_unit_tap_is_identity() {
        // a flat channel needs no equalization: output == received within 1e-6
        let bits: Vec<u8> = (0..64).map(|i| (i * 7 % 3 == 0) as u8).collect();
        let x = modulate_bpsk(&bits);
        let out = apply_channel(&x, &ChannelConfig::multipath(100.0, unit_tap(), 3), 3).unwrap();
        let eq = equalize_mmse(&out.received, &unit_tap(), out.sigma2, x.len()).unwrap();
        for (z, y) in eq.symbols.iter().zip(&out.received) {
            assert!((z - y).norm() < 1e-6, "z = {z}, y = {y}");
        }
        assert!((eq.gain - 1.0).abs() < 1e-6);
    }

    #[test]
    fn noiseless_two_tap_channel_recovers_symbols() {
        let bits: Vec<u8> = (0..256).map(|i| ((i * 2654435761usize) >> 7 & 1) as u8).collect();
        let x = modulate_bpsk(&bits);
        let cfg = ChannelConfig::multipath(120.0, two_tap(), 5);
        let out = apply_channel(&x, &cfg, 5).unwrap();
        let eq = equalize_mmse(&out.received, &two_tap(), out.sigma2.max(1e-12), x.len()).unwrap();
        // interior symbols (edge symbols lack full equalizer support)
        for (i, (z, x)) in eq.symbols.iter().zip(&x).enumerate() {
            if i >= 8 && i < 248 {
                assert!((z / eq.gain - x).norm() < 1e-2, "symbol {i}: {z} vs {x}");
            }
        }
    }

    #[test]
    fn matches_dense_normal_equation_oracle() {
        // independent check: solve min ||C w - e_d|| by explicit normal
        // equations over the real field and compare equalized output
        let taps = two_tap();
        let h = [taps[0].gain.re, taps[1].gain.re];
        let len = 16usize;
        let delay = len / 2;
        let sigma2 = 1e-9;

        // C is (len + 1) x len with C[m][i] = h[m - i]
        let rows = len + h.len() - 1;
        let mut c = vec![vec![0.0f64; len]; rows];
        for i in 0..len {
            for (m, &hm) in h.iter().enumerate() {
                c[i + m][i] = hm;
            }
        }
        // normal equations (C^T C + sigma2 I) w = C^T e_d
        let mut a = vec![vec![0.0f64; len]; len];
        let mut b = vec![0.0f64; len];
        for i in 0..len {
            for j in 0..len {
                for row in c.iter() {
                    a[i][j] += row[i] * row[j];
                }
            }
            a[i][i] += sigma2;
            b[i] = c[delay][i];
        }
        // plain Gaussian elimination
        for col in 0..len {
            let piv = (col..len).max_by(|&r1, &r2| a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap()).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in col + 1..len {
                let f = a[row][col] / a[col][col];
                for j in col..len {
                    a[row][j] -= f * a[col][j];
                }
                b[row] -= f * b[col];
            }
        }
        let mut w_oracle = vec![0.0f64; len];
        for row in (0..len).rev() {
            let mut acc = b[row];
            for j in row + 1..len {
                acc -= a[row][j] * w_oracle[j];
            }
            w_oracle[row] = acc / a[row][row];
        }

        // drive a short noiseless stream through both paths
        let bits: Vec<u8> = (0..80).map(|i| (i % 3 == 1) as u8).collect();
        let x = modulate_bpsk(&bits);
        let out = apply_channel(&x, &ChannelConfig::multipath(200.0, taps.clone(), 2), 2).unwrap();
        let eq = equalize_mmse(&out.received, &taps, sigma2, x.len()).unwrap();
        for m in 8..72 {
            let mut oracle = 0.0f64;
            for (i, wi) in w_oracle.iter().enumerate() {
                let idx = m as isize + delay as isize - i as isize;
                if idx >= 0 && (idx as usize) < out.received.len() {
                    oracle += wi * out.received[idx as usize].re;
                }
            }
            assert!(
                (eq.symbols[m].re - oracle).abs() < 1e-6,
                "symbol {m}: {} vs oracle {oracle}",
                eq.symbols[m].re
            );
        }
    }

    #[test]
    fn equalizer_beats_matched_filter_on_random_three_tap_channels() {
        for seed in 0..6u64 {
            // random 3-tap unit-power channel
            let mut g = [0.9, 0.4 + 0.01 * seed as f64, 0.2];
            let norm: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            g.iter_mut().for_each(|v| *v /= norm);
            let taps: Vec<Tap> = g
                .iter()
                .enumerate()
                .map(|(d, &v)| Tap {
                    gain: Complex64::new(v, 0.0),
                    delay: d,
                })
                .collect();
            let bits: Vec<u8> = (0..2000).map(|i| ((i as u64 * 0x9E3779B9 + seed) >> 13 & 1) as u8).collect();
            let x = modulate_bpsk(&bits);
            let cfg = ChannelConfig::multipath(12.0, taps.clone(), seed);
            let out = apply_channel(&x, &cfg, seed).unwrap();

            let eq = equalize_mmse(&out.received, &taps, out.sigma2, x.len()).unwrap();
            let mse_eq: f64 = eq
                .symbols
                .iter()
                .zip(&x)
                .map(|(z, x)| (z / eq.gain - x).norm_sqr())
                .sum::<f64>()
                / x.len() as f64;
            // raw received-as-estimate (matched filter on the cursor tap)
            let mse_raw: f64 = out
                .received
                .iter()
                .zip(&x)
                .map(|(y, x)| (y / g[0] - x).norm_sqr())
                .sum::<f64>()
                / x.len() as f64;
            assert!(
                mse_eq < mse_raw,
                "seed {seed}: equalized {mse_eq} vs raw {mse_raw}"
            );
        }
    }
}
