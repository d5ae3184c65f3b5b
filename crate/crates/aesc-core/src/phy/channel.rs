//! Channel models: AWGN, slow Rayleigh fading (one gain per frame) and a
//! multipath tapped delay line.
//!
//! Noise convention: `sigma2 = 10^(-SNRdB / 10)` is the noise variance per
//! real dimension (the classical N0/2), so each complex sample picks up
//! `N(0, sigma2)` independently on both axes and the coherent BPSK LLR is
//! exactly `2 Re(y) / sigma2`. The fading gain keeps unit average power
//! (`E|h|^2 = 1`), as does the multipath tap profile.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::phy::PhyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelFamily {
    Awgn,
    SlowRayleigh,
    MultipathTdl,
}

impl ChannelFamily {
    pub fn label(self) -> &'static str {
        match self {
            ChannelFamily::Awgn => "awgn",
            ChannelFamily::SlowRayleigh => "slow_rayleigh",
            ChannelFamily::MultipathTdl => "multipath_tdl",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "awgn" => Some(ChannelFamily::Awgn),
            "slow_rayleigh" | "rayleigh" | "slow_fading" => Some(ChannelFamily::SlowRayleigh),
            "multipath_tdl" | "multipath" => Some(ChannelFamily::MultipathTdl),
            _ => None,
        }
    }
}

/// One path of the tapped delay line: complex gain at an integer symbol delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub gain: Complex64,
    pub delay: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub family: ChannelFamily,
    pub snr_db: f64,
    /// Multipath profile; must carry unit total power.
    pub taps: Vec<Tap>,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn awgn(snr_db: f64, seed: u64) -> Self {
        Self {
            family: ChannelFamily::Awgn,
            snr_db,
            taps: Vec::new(),
            seed,
        }
    }

    pub fn slow_rayleigh(snr_db: f64, seed: u64) -> Self {
        Self {
            family: ChannelFamily::SlowRayleigh,
            snr_db,
            taps: Vec::new(),
            seed,
        }
    }

    pub fn multipath(snr_db: f64, taps: Vec<Tap>, seed: u64) -> Self {
        Self {
            family: ChannelFamily::MultipathTdl,
            snr_db,
            taps,
            seed,
        }
    }

    pub fn sigma2(&self) -> f64 {
        noise_sigma2(self.snr_db)
    }
}

/// `sigma2 = 10^(-snr_db / 10)` for unit-power symbols.
pub fn noise_sigma2(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Channel state information handed to the receiver (assumed known).
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelState {
    Awgn,
    Fading(Complex64),
    Multipath(Vec<Tap>),
}

/// Received stream plus the realized channel state.
#[derive(Debug, Clone)]
pub struct ChannelOutput {
    pub received: Vec<Complex64>,
    pub state: ChannelState,
    pub sigma2: f64,
}

/// Complex sample with the given variance per real dimension.
fn complex_normal_per_dim(rng: &mut ChaCha12Rng, variance: f64) -> Complex64 {
    let scale = variance.sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * scale, im * scale)
}

fn validate_taps(taps: &[Tap]) -> Result<(), PhyError> {
    if taps.is_empty() {
        return Err(PhyError::EmptyTaps);
    }
    let power: f64 = taps.iter().map(|t| t.gain.norm_sqr()).sum();
    if (power - 1.0).abs() > 1e-6 {
        return Err(PhyError::TapPowerNotUnit(power));
    }
    Ok(())
}

/// Pushes a symbol stream through the configured channel.
///
/// Slow fading draws one `h ~ CN(0, 1)` per call (per frame); the multipath
/// impulse response is constant across the stream. Multipath output carries
/// the full convolution tail (`len + max_delay` samples).
pub fn apply_channel(symbols: &[Complex64], config: &ChannelConfig, seed: u64) -> Result<ChannelOutput, PhyError> {
    let sigma2 = config.sigma2();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let (mut received, state) = match config.family {
        ChannelFamily::Awgn => (symbols.to_vec(), ChannelState::Awgn),
        ChannelFamily::SlowRayleigh => {
            // h drawn before any noise so the noise stream aligns with AWGN;
            // E|h|^2 = 1 means 0.5 per dimension
            let h = complex_normal_per_dim(&mut rng, 0.5);
            (symbols.iter().map(|&x| h * x).collect(), ChannelState::Fading(h))
        }
        ChannelFamily::MultipathTdl => {
            validate_taps(&config.taps)?;
            let max_delay = config.taps.iter().map(|t| t.delay).max().unwrap();
            let mut out = vec![Complex64::new(0.0, 0.0); symbols.len() + max_delay];
            for tap in &config.taps {
                for (i, &x) in symbols.iter().enumerate() {
                    out[i + tap.delay] += tap.gain * x;
                }
            }
            (out, ChannelState::Multipath(config.taps.clone()))
        }
    };
    for y in &mut received {
        *y += complex_normal_per_dim(&mut rng, sigma2);
    }
    Ok(ChannelOutput {
        received,
        state,
        sigma2,
    })
}
