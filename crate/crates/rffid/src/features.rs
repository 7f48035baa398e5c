//! CPSD/SCPSD feature extraction.
//!
//! The cross power spectral density of a received block against its ideal
//! reference is `abs(fft(block) . conj(fft(conj(ideal))))` per bin; squaring
//! it makes the noise contribution additive. A frame's feature is the mean
//! of the per-symbol SCPSDs, one value per bin (length `L_s`).

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::baseband::{ideal_symbol_spectra, IdealFrame, SymbolModel};
use crate::channel::{normalize_energy, NoisyFrame};
use crate::{Error, Result};

/// One SCPSD row with labels.
#[derive(Debug, Clone)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub device_id: u32,
    pub frame_id: u32,
    /// SNR recorded on the source frame, NaN when noiseless/unknown.
    pub snr_db: f64,
    pub normalized: bool,
    /// Set once the anti-noise compensation has been applied.
    pub compensated: bool,
}

/// Ideal per-bin spectra shared by extraction and compensation.
#[derive(Debug, Clone)]
pub struct SpectralContext {
    pub x_sq: Vec<f64>,
    pub x_conj_sq: Vec<f64>,
    pub symbol_len: usize,
}

impl SpectralContext {
    pub fn new(model: &SymbolModel) -> Self {
        let s = ideal_symbol_spectra(model);
        SpectralContext {
            x_sq: s.x_sq,
            x_conj_sq: s.x_conj_sq,
            symbol_len: model.symbol_len(),
        }
    }
}

/// `abs(fft(block) . conj(fft(conj(ideal))))` per bin.
pub fn cpsd(block: &[Complex64], ideal: &[Complex64]) -> Result<Vec<f64>> {
    if block.len() != ideal.len() {
        return Err(Error::LengthMismatch {
            expected: ideal.len(),
            actual: block.len(),
        });
    }
    let fft = FftPlanner::new().plan_fft_forward(block.len());
    Ok(cpsd_with(&fft, block, ideal))
}

fn cpsd_with(fft: &Arc<dyn Fft<f64>>, block: &[Complex64], ideal: &[Complex64]) -> Vec<f64> {
    let mut b = block.to_vec();
    fft.process(&mut b);
    let mut i: Vec<Complex64> = ideal.iter().map(|c| c.conj()).collect();
    fft.process(&mut i);
    // conj(fft(conj(ideal)))[k] multiplied in: |B[k] * conj(I')[k]|
    b.iter().zip(&i).map(|(y, x)| (y * x.conj()).norm()).collect()
}

/// Mean per-symbol SCPSD of a frame.
///
/// With `normalize` set the frame passes through energy normalization
/// first, which makes the feature invariant to any positive scaling of the
/// received samples.
pub fn scpsd_frame(
    frame: &NoisyFrame,
    ideal: &IdealFrame,
    ctx: &SpectralContext,
    normalize: bool,
) -> Result<FeatureVector> {
    let l = ctx.symbol_len;
    let n_sym = ideal.n_symbols();
    if frame.samples.len() != ideal.samples.len() || ideal.samples.len() != n_sym * l {
        return Err(Error::LengthMismatch {
            expected: n_sym * l,
            actual: frame.samples.len(),
        });
    }
    if n_sym == 0 {
        return Err(Error::EmptyFrame);
    }

    let work;
    let samples = if normalize {
        let (norm, _) = normalize_energy(frame)?;
        work = norm;
        &work.samples
    } else {
        &frame.samples
    };

    let fft = FftPlanner::new().plan_fft_forward(l);
    let mut acc = vec![0.0f64; l];
    for j in 0..n_sym {
        let block = &samples[j * l..(j + 1) * l];
        let ideal_block = &ideal.samples[j * l..(j + 1) * l];
        let c = cpsd_with(&fft, block, ideal_block);
        for (a, v) in acc.iter_mut().zip(&c) {
            *a += v * v;
        }
    }
    for a in &mut acc {
        *a /= n_sym as f64;
    }

    Ok(FeatureVector {
        values: acc,
        device_id: frame.device_id,
        frame_id: frame.frame_id,
        snr_db: frame.true_snr_db.unwrap_or(f64::NAN),
        normalized: normalize,
        compensated: false,
    })
}

/// Extract one feature row per frame, in input order. Extraction is pure,
/// so the result is independent of the parallel schedule.
pub fn scpsd_dataset(
    frames: &[NoisyFrame],
    ideals: &[IdealFrame],
    ctx: &SpectralContext,
    normalize: bool,
) -> Result<Vec<FeatureVector>> {
    if frames.len() != ideals.len() {
        return Err(Error::LengthMismatch {
            expected: ideals.len(),
            actual: frames.len(),
        });
    }
    frames
        .par_iter()
        .zip(ideals.par_iter())
        .map(|(f, i)| {
            scpsd_frame(f, i, ctx, normalize).map_err(|e| Error::Frame {
                frame_id: f.frame_id,
                source: Box::new(e),
            })
        })
        .collect()
}
