//! AWGN injection, energy bookkeeping and blind SNR estimation.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::baseband::SymbolModel;
use crate::impairment::ImpairedFrame;
use crate::{seed, Error, Result};

/// Estimates outside this range are clamped; above the ceiling the
/// compensation terms are negligible anyway.
pub const SNR_CLAMP_DB: (f64, f64) = (-5.0, 40.0);

#[derive(Debug, Clone)]
pub struct NoisyFrame {
    pub samples: Vec<Complex64>,
    pub device_id: u32,
    pub frame_id: u32,
    /// Injected SNR in dB; `None` for noiseless frames.
    pub true_snr_db: Option<f64>,
    pub noise_seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct EnergyReport {
    /// Mean sample power `(1/L_N) * sum ||y_i||^2`.
    pub p_squared: f64,
    /// SNR recorded on the frame, NaN when unknown.
    pub snr_db_used: f64,
}

impl NoisyFrame {
    /// Wrap an impaired frame without adding noise.
    pub fn noiseless(frame: &ImpairedFrame) -> Self {
        NoisyFrame {
            samples: frame.samples.clone(),
            device_id: frame.device_id,
            frame_id: frame.frame_id,
            true_snr_db: None,
            noise_seed: 0,
        }
    }
}

/// Add circularly-symmetric complex Gaussian noise with total power
/// `10^(-0.1*snr_db) * sum ||x_i||^2`, split evenly between I and Q.
pub fn add_awgn(frame: &ImpairedFrame, snr_db: f64, noise_seed: u64) -> Result<NoisyFrame> {
    if frame.samples.is_empty() {
        return Err(Error::EmptyFrame);
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "snr_db must be finite, got {snr_db}"
        )));
    }

    let l = frame.samples.len() as f64;
    let signal_power: f64 = frame.samples.iter().map(|c| c.norm_sqr()).sum();
    let per_sample_var = 10f64.powf(-0.1 * snr_db) * signal_power / l;
    let comp_std = (per_sample_var / 2.0).sqrt();

    let mut rng = seed::rng(noise_seed, "awgn", &[frame.device_id as u64, frame.frame_id as u64]);
    let samples = frame
        .samples
        .iter()
        .map(|&c| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            c + Complex64::new(re * comp_std, im * comp_std)
        })
        .collect();

    Ok(NoisyFrame {
        samples,
        device_id: frame.device_id,
        frame_id: frame.frame_id,
        true_snr_db: Some(snr_db),
        noise_seed,
    })
}

/// Mean sample power of the frame.
pub fn measure_p_squared(frame: &NoisyFrame) -> EnergyReport {
    EnergyReport {
        p_squared: mean_power(&frame.samples),
        snr_db_used: frame.true_snr_db.unwrap_or(f64::NAN),
    }
}

pub(crate) fn mean_power(samples: &[Complex64]) -> f64 {
    samples.iter().map(|c| c.norm_sqr()).sum::<f64>() / samples.len().max(1) as f64
}

/// Divide the frame by `P = sqrt(p_squared)` so mean power becomes 1.
pub fn normalize_energy(frame: &NoisyFrame) -> Result<(NoisyFrame, EnergyReport)> {
    if frame.samples.is_empty() {
        return Err(Error::EmptyFrame);
    }
    let report = measure_p_squared(frame);
    if report.p_squared <= 0.0 {
        return Err(Error::ZeroEnergyFrame);
    }
    let inv_p = 1.0 / report.p_squared.sqrt();
    let mut out = frame.clone();
    for s in &mut out.samples {
        *s *= inv_p;
    }
    Ok((out, report))
}

/// Blind M2/M4 moment SNR estimate in dB, clamped to [-5, 40].
///
/// Assumes a near-constant-envelope signal (kurtosis 1) in complex
/// Gaussian noise: `S = sqrt(2*M2^2 - M4)`, `N = M2 - S`.
/// Accuracy is about +/-1 dB for true SNR in [0, 30] dB at L_N >= 1e4.
pub fn estimate_snr(frame: &NoisyFrame, model: &SymbolModel) -> Result<f64> {
    let min = 4 * model.symbol_len();
    if frame.samples.len() < min {
        return Err(Error::FrameTooShort {
            len: frame.samples.len(),
            min,
        });
    }
    let l = frame.samples.len() as f64;
    let m2: f64 = frame.samples.iter().map(|c| c.norm_sqr()).sum::<f64>() / l;
    let m4: f64 = frame.samples.iter().map(|c| c.norm_sqr().powi(2)).sum::<f64>() / l;

    let s_sq = 2.0 * m2 * m2 - m4;
    let (lo, hi) = SNR_CLAMP_DB;
    if s_sq <= 0.0 {
        return Ok(lo);
    }
    let s = s_sq.sqrt();
    let n = m2 - s;
    if n <= 0.0 {
        return Ok(hi);
    }
    Ok((10.0 * (s / n).log10()).clamp(lo, hi))
}
