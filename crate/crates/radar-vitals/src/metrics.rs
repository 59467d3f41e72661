//! Calibration and demodulation quality metrics: relative DC errors,
//! displacement RMSE, normalized spectra, and spectral rate estimation.

use serde::{Deserialize, Serialize};

use crate::demod::PhaseSeries;
use crate::fft;
use crate::signal_model::IqSeries;
use crate::{Error, Result};

pub use crate::fft::highpass;

/// Normalized one-sided magnitude spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub freq_hz: Vec<f64>,
    /// Magnitudes scaled so the peak is exactly 1.
    pub amplitude_norm: Vec<f64>,
    pub resolution_hz: f64,
}

/// One benchmark observation: a single (algorithm, sweep point, trial).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub algorithm: String,
    pub snr_db: Option<f64>,
    pub window_length_s: Option<f64>,
    pub e_i: Option<f64>,
    pub e_q: Option<f64>,
    pub rmse_mm: Option<f64>,
    pub rr_error_bpm: Option<f64>,
    pub seed: u64,
}

/// Relative DC-offset removal errors (e_i, e_q): the per-sample removed
/// amount over the true offset magnitude, averaged. 1.0 means perfect
/// removal, 0.0 means nothing was removed; over-subtraction can exceed 1
/// and is reported as-is (|1 − e| is the unambiguous companion).
pub fn dc_relative_error(
    raw: &IqSeries,
    calibrated: &IqSeries,
    true_dc_i: &[f64],
    true_dc_q: &[f64],
) -> Result<(f64, f64)> {
    if raw.len() != calibrated.len()
        || true_dc_i.len() != raw.len()
        || true_dc_q.len() != raw.len()
    {
        return Err(Error::invalid("dc_relative_error: length mismatch"));
    }
    let e_i = channel_relative_error(&raw.i, &calibrated.i, true_dc_i)?;
    let e_q = channel_relative_error(&raw.q, &calibrated.q, true_dc_q)?;
    Ok((e_i, e_q))
}

fn channel_relative_error(raw: &[f64], calibrated: &[f64], true_dc: &[f64]) -> Result<f64> {
    const EPS: f64 = 1e-12;
    let mut acc = 0.0;
    let mut count = 0usize;
    for k in 0..raw.len() {
        if true_dc[k].abs() <= EPS {
            continue;
        }
        acc += (raw[k] - calibrated[k]).abs() / true_dc[k].abs();
        count += 1;
    }
    if count == 0 {
        return Err(Error::invalid("true DC is zero everywhere; relative error undefined"));
    }
    Ok(acc / count as f64)
}

/// Displacement RMSE in millimeters over the intersection of the two valid
/// ranges, after removing the mean difference (phase is only recovered up to
/// an additive constant).
pub fn displacement_rmse(estimate: &PhaseSeries, truth: &PhaseSeries) -> Result<f64> {
    if estimate.sample_rate_hz != truth.sample_rate_hz {
        return Err(Error::invalid("sample-rate mismatch"));
    }
    let lo = estimate.valid_range.start.max(truth.valid_range.start);
    let hi = estimate.valid_range.end.min(truth.valid_range.end);
    if lo >= hi {
        return Err(Error::invalid("empty valid-range intersection"));
    }
    let diffs: Vec<f64> = (lo..hi)
        .map(|k| estimate.displacement_m[k] - truth.displacement_m[k])
        .collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let msq = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / diffs.len() as f64;
    Ok(msq.sqrt() * 1000.0)
}

/// Sweep-protocol RMSE: both phases are detrended with a sharp 0.1 Hz
/// high-pass before comparison, so integrator drift below the vital-sign
/// band does not dominate the score.
pub fn detrended_displacement_rmse(estimate: &PhaseSeries, truth: &PhaseSeries) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::invalid("length mismatch"));
    }
    let est = fft::highpass(&estimate.displacement_m, estimate.sample_rate_hz, 0.1);
    let tru = fft::highpass(&truth.displacement_m, truth.sample_rate_hz, 0.1);
    let lo = estimate.valid_range.start.max(truth.valid_range.start);
    let hi = estimate.valid_range.end.min(truth.valid_range.end);
    if lo >= hi {
        return Err(Error::invalid("empty valid-range intersection"));
    }
    let diffs: Vec<f64> = (lo..hi).map(|k| est[k] - tru[k]).collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let msq = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / diffs.len() as f64;
    Ok(msq.sqrt() * 1000.0)
}

/// Mean-removed, Hann-windowed magnitude spectrum normalized to unit peak.
pub fn spectrum(series: &[f64], sample_rate_hz: f64) -> Result<SpectrumResult> {
    let n = series.len();
    if n < 8 {
        return Err(Error::invalid("spectrum needs at least 8 samples"));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let windowed: Vec<f64> = series
        .iter()
        .enumerate()
        .map(|(k, v)| (v - mean) * hann(k, n))
        .collect();
    let mags = fft::real_spectrum_magnitude(&windowed);
    let peak = mags.iter().fold(0.0f64, |a, &b| a.max(b));
    if peak <= 0.0 {
        return Err(Error::invalid("all-zero input has no spectrum"));
    }
    let resolution_hz = sample_rate_hz / n as f64;
    Ok(SpectrumResult {
        freq_hz: (0..mags.len()).map(|k| k as f64 * resolution_hz).collect(),
        amplitude_norm: mags.iter().map(|m| m / peak).collect(),
        resolution_hz,
    })
}

fn hann(k: usize, n: usize) -> f64 {
    use std::f64::consts::PI;
    0.5 - 0.5 * (2.0 * PI * k as f64 / (n - 1) as f64).cos()
}

/// Spectral-peak rate estimate in events per minute over `band_hz`,
/// refined by log-parabolic interpolation across the peak bin.
pub fn estimate_rate(series: &PhaseSeries, band_hz: (f64, f64)) -> Result<f64> {
    let r = series.valid_range.clone();
    let segment = &series.displacement_m[r];
    estimate_rate_from_samples(segment, series.sample_rate_hz, band_hz)
}

pub fn estimate_rate_from_samples(
    samples: &[f64],
    sample_rate_hz: f64,
    band_hz: (f64, f64),
) -> Result<f64> {
    let (lo, hi) = band_hz;
    if !(0.0 < lo && lo < hi && hi <= sample_rate_hz / 2.0) {
        return Err(Error::invalid("band must satisfy 0 < low < high <= Nyquist"));
    }
    if (samples.len() as f64 / sample_rate_hz) * lo < 3.0 {
        return Err(Error::invalid("record too short for the requested band"));
    }
    let spec = spectrum(samples, sample_rate_hz)?;
    let mut best: Option<usize> = None;
    for (k, &f) in spec.freq_hz.iter().enumerate() {
        if f < lo || f > hi {
            continue;
        }
        if best.is_none_or(|b| spec.amplitude_norm[k] > spec.amplitude_norm[b]) {
            best = Some(k);
        }
    }
    let peak = best.ok_or_else(|| Error::invalid("band contains no spectral bins"))?;
    let mut freq = spec.freq_hz[peak];
    if peak > 0 && peak + 1 < spec.amplitude_norm.len() {
        let (a, b, c) = (
            spec.amplitude_norm[peak - 1],
            spec.amplitude_norm[peak],
            spec.amplitude_norm[peak + 1],
        );
        if a > 0.0 && b > 0.0 && c > 0.0 {
            let (la, lb, lc) = (a.ln(), b.ln(), c.ln());
            let denom = la - 2.0 * lb + lc;
            if denom.abs() > 1e-300 {
                let delta = 0.5 * (la - lc) / denom;
                if delta.abs() <= 1.0 {
                    freq += delta * spec.resolution_hz;
                }
            }
        }
    }
    Ok(60.0 * freq)
}
