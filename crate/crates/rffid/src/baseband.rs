//! Ideal O-QPSK baseband frame synthesis.
//!
//! Symbols are circular shifts of a single half-sine-shaped chip sequence,
//! so every symbol shares one magnitude spectrum. Even chips ride the I
//! rail, odd chips the Q rail delayed by half a chip; the half-chip offset
//! is folded into the base sequence by circular continuation so each symbol
//! block is exactly `L_s` samples.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::{Error, Result};

/// IEEE 802.15.4 (2.4 GHz) 32-chip PN sequence for data symbol 0.
const IEEE_802_15_4_CHIPS: [u8; 32] = [
    1, 1, 0, 1, 1, 0, 0, 1, 1, 1, 0, 0, 0, 0, 1, 1, 0, 1, 0, 1, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 1,
    0,
];

/// Symbol-level description of the waveform: chip layout plus the unit
/// mean-power base chip sequence all symbols are circular shifts of.
#[derive(Debug, Clone)]
pub struct SymbolModel {
    pub samples_per_symbol: usize,
    pub chips_per_symbol: usize,
    pub samples_per_chip: usize,
    pub base_chip_sequence: Vec<Complex64>,
}

impl SymbolModel {
    /// Symbol length `L_s` in samples.
    pub fn symbol_len(&self) -> usize {
        self.samples_per_symbol
    }

    /// Waveform of one symbol: the base sequence rotated right by
    /// `index * samples_per_chip` samples.
    pub fn symbol_waveform(&self, index: usize) -> Result<Vec<Complex64>> {
        if index >= self.chips_per_symbol {
            return Err(Error::SymbolIndexOutOfRange {
                index,
                limit: self.chips_per_symbol,
            });
        }
        let l = self.samples_per_symbol;
        let shift = index * self.samples_per_chip;
        Ok((0..l)
            .map(|n| self.base_chip_sequence[(n + l - shift) % l])
            .collect())
    }
}

/// One noiseless frame: `N_sym` concatenated symbol blocks.
#[derive(Debug, Clone)]
pub struct IdealFrame {
    pub samples: Vec<Complex64>,
    pub symbol_indices: Vec<usize>,
    pub sample_rate: f64,
}

impl IdealFrame {
    pub fn n_symbols(&self) -> usize {
        self.symbol_indices.len()
    }
}

/// Magnitude-squared spectra of the base symbol, `‖X_S‖²` and `‖X_S'‖²`,
/// where `X' = conj(fft(conj(x)))`.
#[derive(Debug, Clone)]
pub struct SymbolSpectra {
    pub x_sq: Vec<f64>,
    pub x_conj_sq: Vec<f64>,
}

/// Build a half-sine-pulse O-QPSK symbol model with unit mean power.
///
/// For 32 chips per symbol the standard 802.15.4 PN sequence is used;
/// other lengths take chips from a fixed maximal LFSR so circular shifts
/// stay distinguishable.
pub fn make_symbol_model(samples_per_chip: usize, chips_per_symbol: usize) -> Result<SymbolModel> {
    if samples_per_chip < 1 {
        return Err(Error::InvalidArgument(format!(
            "samples_per_chip must be >= 1, got {samples_per_chip}"
        )));
    }
    if chips_per_symbol < 2 {
        return Err(Error::InvalidArgument(format!(
            "chips_per_symbol must be >= 2, got {chips_per_symbol}"
        )));
    }

    let chips = chip_bits(chips_per_symbol);
    let l = samples_per_chip * chips_per_symbol;
    let r = samples_per_chip;

    // Each chip contributes a half-sine pulse spanning 2 chip periods,
    // placed circularly; even chips on I, odd chips on Q.
    let mut seq = vec![Complex64::new(0.0, 0.0); l];
    for (k, &bit) in chips.iter().enumerate() {
        let amp = if bit == 1 { 1.0 } else { -1.0 };
        for m in 0..2 * r {
            let pulse = amp * (std::f64::consts::PI * m as f64 / (2.0 * r as f64)).sin();
            let n = (k * r + m) % l;
            if k % 2 == 0 {
                seq[n].re += pulse;
            } else {
                seq[n].im += pulse;
            }
        }
    }

    let mean_power = seq.iter().map(|c| c.norm_sqr()).sum::<f64>() / l as f64;
    let scale = 1.0 / mean_power.sqrt();
    for c in &mut seq {
        *c *= scale;
    }

    Ok(SymbolModel {
        samples_per_symbol: l,
        chips_per_symbol,
        samples_per_chip,
        base_chip_sequence: seq,
    })
}

fn chip_bits(n: usize) -> Vec<u8> {
    if n == 32 {
        return IEEE_802_15_4_CHIPS.to_vec();
    }
    // 7-bit maximal LFSR (x^7 + x^6 + 1), fixed seed.
    let mut state: u8 = 0b101_0110;
    let mut bits = Vec::with_capacity(n);
    for _ in 0..n {
        let out = state & 1;
        let fb = ((state >> 6) ^ (state >> 5)) & 1;
        state = ((state << 1) | fb) & 0x7f;
        bits.push(out);
    }
    bits
}

/// Concatenate the symbol waveforms selected by `symbol_indices`.
pub fn synthesize_frame(
    model: &SymbolModel,
    symbol_indices: &[usize],
    sample_rate: f64,
) -> Result<IdealFrame> {
    let mut samples = Vec::with_capacity(symbol_indices.len() * model.samples_per_symbol);
    for &idx in symbol_indices {
        samples.extend(model.symbol_waveform(idx)?);
    }
    Ok(IdealFrame {
        samples,
        symbol_indices: symbol_indices.to_vec(),
        sample_rate,
    })
}

/// Squared magnitude spectra of the base symbol and of its conjugate
/// transform counterpart. By construction `‖X'[k]‖ = ‖X[(L−k) mod L]‖`.
pub fn ideal_symbol_spectra(model: &SymbolModel) -> SymbolSpectra {
    let x = fft(&model.base_chip_sequence);
    let x_prime = conj_transform_spectrum(&model.base_chip_sequence);
    SymbolSpectra {
        x_sq: x.iter().map(|c| c.norm_sqr()).collect(),
        x_conj_sq: x_prime.iter().map(|c| c.norm_sqr()).collect(),
    }
}

/// Forward FFT of a complex slice.
pub(crate) fn fft(data: &[Complex64]) -> Vec<Complex64> {
    let mut buf = data.to_vec();
    FftPlanner::new()
        .plan_fft_forward(data.len())
        .process(&mut buf);
    buf
}

/// `X' = conj(fft(conj(x)))`.
pub(crate) fn conj_transform_spectrum(data: &[Complex64]) -> Vec<Complex64> {
    let conj: Vec<Complex64> = data.iter().map(|c| c.conj()).collect();
    fft(&conj).into_iter().map(|c| c.conj()).collect()
}
