//! Anti-noise compensation.
//!
//! Noise changes a normalized SCPSD in two closed-form ways: the frame
//! energy grows as `P^2 = a * 10^(-b*SNR) + c`, and every bin gains an
//! additive floor `L_s * 10^(-0.1*SNR) * ||X'||^2`. Fitting the first and
//! subtracting the second restores a noisy feature toward its high-SNR
//! form without retraining the classifier.

use std::collections::BTreeMap;

use crate::features::{FeatureVector, SpectralContext};
use crate::{Error, Result};

/// Valid SNR range for prediction and compensation.
pub const FIT_RANGE_DB: (f64, f64) = (-5.0, 40.0);

const GN_MAX_ITERATIONS: usize = 100;
const GN_STEP_TOLERANCE: f64 = 1e-10;

/// Coefficients of `P^2 = a * 10^(-b*SNR) + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub rms_residual: f64,
}

impl EnergyFit {
    /// Whether the coefficients sit in the physically expected regime
    /// (b near 0.1, c near 1).
    pub fn in_expected_regime(&self) -> bool {
        (0.05..=0.15).contains(&self.b) && (0.9..=1.1).contains(&self.c)
    }
}

/// Which coefficients the pipeline compensates with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    /// Arithmetic mean of per-device fits.
    Averaged,
    /// Single fit over the pooled points of all devices.
    Pooled,
}

/// Per-device fits plus the averaged and pooled alternatives.
#[derive(Debug, Clone)]
pub struct PopulationFit {
    pub per_device: BTreeMap<u32, EnergyFit>,
    pub averaged: EnergyFit,
    pub pooled: EnergyFit,
    pub mode: FitMode,
}

impl PopulationFit {
    /// The fit selected by `mode`.
    pub fn effective(&self) -> &EnergyFit {
        match self.mode {
            FitMode::Averaged => &self.averaged,
            FitMode::Pooled => &self.pooled,
        }
    }
}

/// Least-squares fit of `p^2 = a * 10^(-b*snr) + c` by Gauss-Newton from
/// (1, 0.1, 1); converges when the parameter step drops below 1e-10.
///
/// All-equal p^2 degenerates to `a = 0, b = 0.1, c = mean`.
pub fn fit_energy_curve(points: &[(f64, f64)]) -> Result<EnergyFit> {
    let mut snrs: Vec<f64> = points.iter().map(|p| p.0).collect();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if snrs.len() < 3 {
        return Err(Error::TooFewSnrLevels {
            min: 3,
            got: snrs.len(),
        });
    }
    if let Some(&(snr, p)) = points.iter().find(|&&(_, p)| p <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "p_squared must be positive, got {p} at {snr} dB"
        )));
    }

    let mean_p: f64 = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let max_dev = points
        .iter()
        .map(|p| (p.1 - mean_p).abs())
        .fold(0.0, f64::max);
    if max_dev <= 1e-12 * mean_p.abs().max(1.0) {
        return Ok(EnergyFit {
            a: 0.0,
            b: 0.1,
            c: mean_p,
            rms_residual: 0.0,
        });
    }

    let ln10 = std::f64::consts::LN_10;
    let (mut a, mut b, mut c) = (1.0f64, 0.1f64, 1.0f64);

    for iteration in 0..GN_MAX_ITERATIONS {
        // Normal equations J^T J delta = -J^T r for r_i = model_i - y_i.
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for &(snr, y) in points {
            let e = 10f64.powf(-b * snr);
            let r = a * e + c - y;
            let j = [e, -a * snr * ln10 * e, 1.0];
            for (row, &ji) in j.iter().enumerate() {
                for (col, &jk) in j.iter().enumerate() {
                    jtj[row][col] += ji * jk;
                }
                jtr[row] += ji * r;
            }
        }
        let delta = solve3(&jtj, &[-jtr[0], -jtr[1], -jtr[2]]).ok_or_else(|| {
            Error::FitDidNotConverge {
                iterations: iteration,
                rms_residual: rms_residual(points, a, b, c),
            }
        })?;
        a += delta[0];
        b += delta[1];
        c += delta[2];

        let step = (delta[0].powi(2) + delta[1].powi(2) + delta[2].powi(2)).sqrt();
        if step < GN_STEP_TOLERANCE {
            return Ok(EnergyFit {
                a: a.max(0.0),
                b,
                c,
                rms_residual: rms_residual(points, a, b, c),
            });
        }
    }
    Err(Error::FitDidNotConverge {
        iterations: GN_MAX_ITERATIONS,
        rms_residual: rms_residual(points, a, b, c),
    })
}

fn rms_residual(points: &[(f64, f64)], a: f64, b: f64, c: f64) -> f64 {
    let ss: f64 = points
        .iter()
        .map(|&(snr, y)| (a * 10f64.powf(-b * snr) + c - y).powi(2))
        .sum();
    (ss / points.len() as f64).sqrt()
}

fn solve3(m: &[[f64; 3]; 3], rhs: &[f64; 3]) -> Option<[f64; 3]> {
    let mut aug = [[0.0f64; 4]; 3];
    for i in 0..3 {
        aug[i][..3].copy_from_slice(&m[i]);
        aug[i][3] = rhs[i];
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))?;
        if aug[pivot][col].abs() < 1e-300 {
            return None;
        }
        aug.swap(col, pivot);
        for row in 0..3 {
            if row != col {
                let f = aug[row][col] / aug[col][col];
                for k in col..4 {
                    aug[row][k] -= f * aug[col][k];
                }
            }
        }
    }
    Some([aug[0][3] / aug[0][0], aug[1][3] / aug[1][1], aug[2][3] / aug[2][2]])
}

/// Fit every device, then average the coefficients arithmetically; also
/// compute the single pooled fit over all points.
pub fn fit_population(
    energy_samples: &[(u32, f64, f64)],
    mode: FitMode,
) -> Result<PopulationFit> {
    let mut by_device: BTreeMap<u32, Vec<(f64, f64)>> = BTreeMap::new();
    for &(device, snr, p_sq) in energy_samples {
        by_device.entry(device).or_default().push((snr, p_sq));
    }
    if by_device.is_empty() {
        return Err(Error::InvalidArgument("no energy samples".into()));
    }

    let mut per_device = BTreeMap::new();
    for (device, points) in &by_device {
        let fit = fit_energy_curve(points).map_err(|e| Error::Device {
            device_id: *device,
            source: Box::new(e),
        })?;
        per_device.insert(*device, fit);
    }

    let n = per_device.len() as f64;
    let averaged = EnergyFit {
        a: per_device.values().map(|f| f.a).sum::<f64>() / n,
        b: per_device.values().map(|f| f.b).sum::<f64>() / n,
        c: per_device.values().map(|f| f.c).sum::<f64>() / n,
        rms_residual: per_device.values().map(|f| f.rms_residual).sum::<f64>() / n,
    };

    let all_points: Vec<(f64, f64)> = energy_samples.iter().map(|&(_, s, p)| (s, p)).collect();
    let pooled = fit_energy_curve(&all_points)?;

    Ok(PopulationFit {
        per_device,
        averaged,
        pooled,
        mode,
    })
}

/// `a * 10^(-b*snr) + c` for snr in [-5, 40] dB.
pub fn predict_p_squared(fit: &EnergyFit, snr_db: f64) -> Result<f64> {
    let (lo, hi) = FIT_RANGE_DB;
    if !(lo..=hi).contains(&snr_db) {
        return Err(Error::SnrOutOfRange {
            snr_db,
            lo,
            hi,
        });
    }
    Ok(fit.a * 10f64.powf(-fit.b * snr_db) + fit.c)
}

/// Per-bin additive noise floor coefficient `L_s * 10^(-0.1*snr_db)`.
pub fn noise_offset(symbol_len: usize, snr_db: f64) -> f64 {
    symbol_len as f64 * 10f64.powf(-0.1 * snr_db)
}

/// Restore a normalized SCPSD toward its high-SNR form:
/// `out[k] = feature[k] * P_hat^2 - noise_offset * ||X'[k]||^2`,
/// with negative bins clipped to 0.
pub fn compensate(
    feature: &FeatureVector,
    snr_db: f64,
    fit: &EnergyFit,
    ctx: &SpectralContext,
) -> Result<FeatureVector> {
    if !feature.normalized {
        return Err(Error::NotNormalized);
    }
    if feature.values.len() != ctx.x_conj_sq.len() {
        return Err(Error::LengthMismatch {
            expected: ctx.x_conj_sq.len(),
            actual: feature.values.len(),
        });
    }
    let p_sq = predict_p_squared(fit, snr_db)?;
    let offset = noise_offset(ctx.symbol_len, snr_db);

    let values = feature
        .values
        .iter()
        .zip(&ctx.x_conj_sq)
        .map(|(v, xp)| (v * p_sq - offset * xp).max(0.0))
        .collect();

    Ok(FeatureVector {
        values,
        compensated: true,
        ..feature.clone()
    })
}
