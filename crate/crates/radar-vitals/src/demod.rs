//! Phase demodulators: HADCM plus the ATAN, MDACM, and ACAA references.
//!
//! All demodulators return a [`PhaseSeries`] trimmed by one second at each
//! edge (Hilbert periodic-extension artifacts, one-sided derivative
//! endpoints) and anchored so the phase at `valid_range.start` is exactly 0.

use std::f64::consts::PI;
use std::ops::Range;

use crate::fft;
use crate::signal_model::IqSeries;
use crate::{Error, Result};

pub use crate::fft::hilbert;

/// Demodulated (or ground-truth) phase with its displacement equivalent.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSeries {
    pub phase_rad: Vec<f64>,
    pub sample_rate_hz: f64,
    /// Chest displacement λ·phase/(4π), meters.
    pub displacement_m: Vec<f64>,
    /// Index range unaffected by edge artifacts.
    pub valid_range: Range<usize>,
}

/// Seconds trimmed from each edge of a demodulated series.
pub const EDGE_TRIM_S: f64 = 1.0;

impl PhaseSeries {
    /// Wrap a raw demodulated phase: trim `EDGE_TRIM_S` per edge, subtract
    /// the value at the first valid sample, attach displacement.
    pub fn from_demodulated(mut phase: Vec<f64>, sample_rate_hz: f64, wavelength_m: f64) -> Self {
        let n = phase.len();
        let trim = (EDGE_TRIM_S * sample_rate_hz).ceil() as usize;
        let valid = if n > 2 * trim { trim..n - trim } else { 0..n };
        let anchor = phase[valid.start];
        for v in phase.iter_mut() {
            *v -= anchor;
        }
        let scale = wavelength_m / (4.0 * PI);
        let displacement_m = phase.iter().map(|&p| p * scale).collect();
        PhaseSeries { phase_rad: phase, sample_rate_hz, displacement_m, valid_range: valid }
    }

    /// Wrap a ground-truth phase: the whole record is valid and no anchoring
    /// is applied.
    pub fn ground_truth(phase: Vec<f64>, sample_rate_hz: f64, wavelength_m: f64) -> Self {
        let scale = wavelength_m / (4.0 * PI);
        let displacement_m = phase.iter().map(|&p| p * scale).collect();
        let n = phase.len();
        PhaseSeries { phase_rad: phase, sample_rate_hz, displacement_m, valid_range: 0..n }
    }

    pub fn len(&self) -> usize {
        self.phase_rad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phase_rad.is_empty()
    }
}

/// Central-difference derivative, one-sided at the two endpoints.
pub fn differentiate(x: &[f64], dt: f64) -> Vec<f64> {
    let n = x.len();
    assert!(n >= 3, "differentiate needs at least 3 samples");
    assert!(dt > 0.0);
    let mut d = vec![0.0; n];
    d[0] = (x[1] - x[0]) / dt;
    d[n - 1] = (x[n - 1] - x[n - 2]) / dt;
    for k in 1..n - 1 {
        d[k] = (x[k + 1] - x[k - 1]) / (2.0 * dt);
    }
    d
}

fn trapezoid_cumulative(rate: &[f64], dt: f64) -> Vec<f64> {
    let mut p = vec![0.0; rate.len()];
    for k in 1..rate.len() {
        p[k] = p[k - 1] + (rate[k] + rate[k - 1]) * dt / 2.0;
    }
    p
}

/// Integrate a phase rate with the exact midpoint rule on two interleaved
/// chains (p[k] = p[k-2] + 2·dt·rate[k-1]), then align the odd chain to the
/// even one by its mean offset. Unlike the trapezoid, this scheme applies no
/// implicit smoothing to the rate sequence.
fn interleaved_cumulative(rate: &[f64], dt: f64) -> Vec<f64> {
    let m = rate.len();
    let mut p = vec![0.0; m];
    for k in 2..m {
        p[k] = p[k - 2] + 2.0 * dt * rate[k - 1];
    }
    let n_even = m.div_ceil(2);
    let n_odd = m / 2;
    let pairs = (n_even - 1).min(n_odd);
    if pairs > 0 {
        let mut offset = 0.0;
        for k in 0..pairs {
            let even_mid = (p[2 * k] + p[2 * k + 2]) / 2.0;
            offset += even_mid - p[2 * k + 1];
        }
        offset /= pairs as f64;
        for k in 0..n_odd {
            p[2 * k + 1] += offset;
        }
    }
    p
}

// ---------------------------------------------------------------------------
// ATAN
// ---------------------------------------------------------------------------

/// Arctangent demodulation with 2π unwrapping. No DC handling: its DC
/// sensitivity is exactly what the benchmarks measure.
pub fn atan_demod(iq: &IqSeries, wavelength_m: f64) -> Result<PhaseSeries> {
    let n = iq.len();
    let mut phase = Vec::with_capacity(n);
    let mut offset = 0.0;
    let mut prev_raw = 0.0;
    for k in 0..n {
        let (i, q) = (iq.i[k], iq.q[k]);
        if i == 0.0 && q == 0.0 {
            return Err(Error::DegenerateQuadrature(format!("I=Q=0 at sample {k}")));
        }
        let raw = q.atan2(i);
        if k > 0 {
            let jump = raw - prev_raw;
            if jump > PI {
                offset -= 2.0 * PI;
            } else if jump < -PI {
                offset += 2.0 * PI;
            }
        }
        prev_raw = raw;
        phase.push(raw + offset);
    }
    Ok(PhaseSeries::from_demodulated(phase, iq.sample_rate_hz, wavelength_m))
}

// ---------------------------------------------------------------------------
// MDACM
// ---------------------------------------------------------------------------

/// Differentiate-and-cross-multiply with instantaneous-power normalization,
/// trapezoid-integrated.
pub fn mdacm_demod(iq: &IqSeries, wavelength_m: f64) -> Result<PhaseSeries> {
    let n = iq.len();
    if n < 3 {
        return Err(Error::invalid("mdacm needs at least 3 samples"));
    }
    let dt = iq.dt();
    let di = differentiate(&iq.i, dt);
    let dq = differentiate(&iq.q, dt);
    let r2_max = iq
        .i
        .iter()
        .zip(&iq.q)
        .map(|(i, q)| i * i + q * q)
        .fold(0.0f64, f64::max);
    let eps = 1e-12 * r2_max;
    let mut rate = Vec::with_capacity(n);
    for k in 0..n {
        let r2 = iq.i[k] * iq.i[k] + iq.q[k] * iq.q[k];
        if r2 <= eps {
            return Err(Error::DegenerateQuadrature(format!(
                "|I|^2+|Q|^2 vanished at sample {k}"
            )));
        }
        rate.push((iq.i[k] * dq[k] - iq.q[k] * di[k]) / r2);
    }
    let phase = trapezoid_cumulative(&rate, dt);
    Ok(PhaseSeries::from_demodulated(phase, iq.sample_rate_hz, wavelength_m))
}

// ---------------------------------------------------------------------------
// ACAA
// ---------------------------------------------------------------------------

/// Adjacent chord angle accumulation with the default 3-sample chord
/// smoothing.
pub fn acaa_demod(iq: &IqSeries, wavelength_m: f64) -> Result<PhaseSeries> {
    acaa_demod_with(iq, wavelength_m, 3)
}

/// ACAA with configurable chord smoothing width (1 disables smoothing).
///
/// Chords of the (optionally boxcar-summed) trajectory are turned into
/// signed angles via `atan2(cross, dot)` and accumulated: on a circle this
/// telescopes to the swept central angle regardless of the center, hence the
/// DC independence. Near motion reversals both chords shrink and point
/// nearly opposite; the gated correction folds the spurious ±π turn back.
pub fn acaa_demod_with(iq: &IqSeries, wavelength_m: f64, smooth_width: usize) -> Result<PhaseSeries> {
    let n = iq.len();
    if n < 3 {
        return Err(Error::invalid("acaa needs at least 3 samples"));
    }
    let (is, qs): (Vec<f64>, Vec<f64>) = if smooth_width > 1 {
        (boxcar_sum(&iq.i, smooth_width), boxcar_sum(&iq.q, smooth_width))
    } else {
        (iq.i.clone(), iq.q.clone())
    };
    let vx: Vec<f64> = is.windows(2).map(|w| w[1] - w[0]).collect();
    let vy: Vec<f64> = qs.windows(2).map(|w| w[1] - w[0]).collect();
    let mags: Vec<f64> = vx.iter().zip(&vy).map(|(x, y)| x.hypot(*y)).collect();
    let mut sorted = mags.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2]) / 2.0
    };
    let eps = 1e-6 * med.max(1e-300);

    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    let mut prev: Option<usize> = None;
    let mut any = false;
    for k in 0..vx.len() {
        if mags[k] <= eps {
            out[k + 1] = acc;
            continue;
        }
        any = true;
        if let Some(p) = prev {
            let cross = vx[p] * vy[k] - vy[p] * vx[k];
            let dot = vx[p] * vx[k] + vy[p] * vy[k];
            let mut d = cross.atan2(dot);
            if dot < 0.0 && (mags[k] < 0.6 * med || mags[p] < 0.6 * med) && d != 0.0 {
                d -= PI * d.signum();
            }
            acc += d;
        }
        out[k + 1] = acc;
        prev = Some(k);
    }
    if !any {
        return Err(Error::StationaryTrajectory(
            "all chords below the degenerate-chord threshold".into(),
        ));
    }
    Ok(PhaseSeries::from_demodulated(out, iq.sample_rate_hz, wavelength_m))
}

/// Centered boxcar sum (no normalization — chord directions are unaffected
/// by a common positive scale). Edges replicate the boundary sample so that
/// a constant offset shifts every sum by exactly `width × offset`, keeping
/// the chords — and therefore the whole output — translation-invariant.
fn boxcar_sum(x: &[f64], width: usize) -> Vec<f64> {
    let half = width as isize / 2;
    let n = x.len() as isize;
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for d in -half..=half {
                let j = (i + d).clamp(0, n - 1);
                acc += x[j as usize];
            }
            acc
        })
        .collect()
}

// ---------------------------------------------------------------------------
// HADCM
// ---------------------------------------------------------------------------

/// Denominator strategy for the HADCM rate ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenominatorMode {
    /// Default: normalize both channels by their estimated amplitudes and
    /// divide by the instantaneous trajectory power relative to its mean,
    /// floored at `floor_frac`. Tracks the same quantity as the Hilbert
    /// cross term (which is analytically constant for narrowband signals)
    /// but stays exact for the wideband phase excursions of a
    /// several-wavelength chest sweep, where the quadrature of cos(p(t))
    /// stops being sin(p(t)) and the literal cross term ripples.
    CalibratedPower,
    /// Literal Hilbert cross term I_H·Q − I·Q_H stabilized by a moving
    /// median (1 s window).
    HilbertMedian,
    /// Literal pointwise Hilbert cross term, unstabilized.
    HilbertRaw,
}

/// HADCM tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct HadcmConfig {
    /// Band-limited upsampling before differentiation (CalibratedPower mode
    /// only); keeps the per-step phase small enough for the arcsine
    /// correction to stay well-conditioned.
    pub upsample_factor: usize,
    pub denominator: DenominatorMode,
    /// Lower clamp on the normalized instantaneous power.
    pub floor_frac: f64,
    /// Moving-median window for `HilbertMedian`, seconds.
    pub median_window_s: f64,
    /// Channel amplitude estimates from calibration; the RMS trajectory
    /// radius stands in for both when absent.
    pub amp_i: Option<f64>,
    pub amp_q: Option<f64>,
}

impl Default for HadcmConfig {
    fn default() -> Self {
        HadcmConfig {
            upsample_factor: 4,
            denominator: DenominatorMode::CalibratedPower,
            floor_frac: 0.2,
            median_window_s: 1.0,
            amp_i: None,
            amp_q: None,
        }
    }
}

/// HADCM with default configuration.
pub fn hadcm(iq: &IqSeries, wavelength_m: f64) -> Result<PhaseSeries> {
    hadcm_with(iq, wavelength_m, &HadcmConfig::default())
}

/// Hilbert-assisted differentiate-and-cross-multiply demodulation of a
/// DC-calibrated record.
pub fn hadcm_with(iq: &IqSeries, wavelength_m: f64, cfg: &HadcmConfig) -> Result<PhaseSeries> {
    if iq.len() < 4 {
        return Err(Error::invalid("hadcm needs at least 4 samples"));
    }
    match cfg.denominator {
        DenominatorMode::CalibratedPower => hadcm_calibrated_power(iq, wavelength_m, cfg),
        DenominatorMode::HilbertMedian | DenominatorMode::HilbertRaw => {
            hadcm_hilbert(iq, wavelength_m, cfg)
        }
    }
}

/// Total unwrapped-angle range swept by a trajectory, radians.
fn winding_span(i: &[f64], q: &[f64]) -> f64 {
    let mut prev = q[0].atan2(i[0]);
    let mut acc = prev;
    let (mut lo, mut hi) = (prev, prev);
    for k in 1..i.len() {
        let raw = q[k].atan2(i[k]);
        let mut d = raw - prev;
        while d > PI {
            d -= 2.0 * PI;
        }
        while d < -PI {
            d += 2.0 * PI;
        }
        acc += d;
        prev = raw;
        lo = lo.min(acc);
        hi = hi.max(acc);
    }
    hi - lo
}

fn hadcm_calibrated_power(iq: &IqSeries, wavelength_m: f64, cfg: &HadcmConfig) -> Result<PhaseSeries> {
    // Fallback when calibration supplied no amplitudes: the RMS trajectory
    // radius. Exact for balanced channels on any arc — even a sub-wavelength
    // one, where a per-channel estimate is unidentifiable.
    let common = || {
        let p: f64 = iq.i.iter().zip(&iq.q).map(|(a, b)| a * a + b * b).sum::<f64>()
            / iq.len() as f64;
        p.sqrt()
    };
    let amp_i = cfg.amp_i.filter(|a| *a > 0.0).unwrap_or_else(common);
    let amp_q = cfg.amp_q.filter(|a| *a > 0.0).unwrap_or_else(common);
    if amp_i <= 0.0 || amp_q <= 0.0 {
        return Err(Error::DegenerateQuadrature("zero channel amplitude".into()));
    }
    let norm_i: Vec<f64> = iq.i.iter().map(|v| v / amp_i).collect();
    let mut norm_q: Vec<f64> = iq.q.iter().map(|v| v / amp_q).collect();

    // Constant phase imbalance leaves the normalized pair non-orthogonal:
    // Q_n = sin(u + delta) with u the I-channel phase. Over a full rotation
    // mean(I_n·Q_n) → sin(delta)/2, so a Gram-Schmidt step restores exact
    // quadrature. On a sub-wavelength arc the oscillatory terms never
    // average out and the estimate is meaningless, so the correction only
    // fires when the trajectory actually winds through ≥ 2π.
    let nf = iq.len() as f64;
    let m_iq = norm_i.iter().zip(&norm_q).map(|(a, b)| a * b).sum::<f64>() / nf;
    let sin_delta = 2.0 * m_iq;
    if sin_delta.abs() < 0.5 && winding_span(&norm_i, &norm_q) >= 2.0 * PI {
        let cos_delta = (1.0 - sin_delta * sin_delta).sqrt();
        for (q, &i) in norm_q.iter_mut().zip(&norm_i) {
            *q = (*q - sin_delta * i) / cos_delta;
        }
    }

    let factor = cfg.upsample_factor.max(1);
    let iu = fft::upsample(&norm_i, factor);
    let qu = fft::upsample(&norm_q, factor);
    let dtu = iq.dt() / factor as f64;
    let di = differentiate(&iu, dtu);
    let dq = differentiate(&qu, dtu);

    let m = iu.len();
    let mut r2 = Vec::with_capacity(m);
    for k in 0..m {
        r2.push(iu[k] * iu[k] + qu[k] * qu[k]);
    }
    let mean_r2 = r2.iter().sum::<f64>() / m as f64;
    if mean_r2 <= 0.0 {
        return Err(Error::DegenerateQuadrature("trajectory power vanished".into()));
    }

    let mut rate = Vec::with_capacity(m);
    for k in 0..m {
        let num = iu[k] * dq[k] - qu[k] * di[k];
        let den = (r2[k] / mean_r2).max(cfg.floor_frac);
        // the discrete cross product measures sin(Δp); arcsine undoes the
        // compression before integration
        let s = (num * dtu / den).clamp(-1.0, 1.0);
        rate.push(s.asin() / dtu);
    }

    let fine = interleaved_cumulative(&rate, dtu);
    let phase: Vec<f64> = fine.iter().step_by(factor).copied().collect();
    Ok(PhaseSeries::from_demodulated(phase, iq.sample_rate_hz, wavelength_m))
}

fn hadcm_hilbert(iq: &IqSeries, wavelength_m: f64, cfg: &HadcmConfig) -> Result<PhaseSeries> {
    let n = iq.len();
    let dt = iq.dt();
    let di = differentiate(&iq.i, dt);
    let dq = differentiate(&iq.q, dt);
    let raw = hilbert_cross_term(&iq.i, &iq.q);
    let den: Vec<f64> = match cfg.denominator {
        DenominatorMode::HilbertMedian => {
            let w = ((cfg.median_window_s * iq.sample_rate_hz).round() as usize).max(1);
            moving_median(&raw, w)
        }
        _ => raw,
    };
    let scale = den.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
    let eps = 1e-9 * scale.max(1e-300);
    let mut rate = Vec::with_capacity(n);
    for k in 0..n {
        if den[k].abs() <= eps {
            return Err(Error::DegenerateQuadrature(format!(
                "denominator vanished at sample {k} after stabilization"
            )));
        }
        rate.push((iq.i[k] * dq[k] - iq.q[k] * di[k]) / den[k]);
    }
    let phase = trapezoid_cumulative(&rate, dt);
    Ok(PhaseSeries::from_demodulated(phase, iq.sample_rate_hz, wavelength_m))
}

/// The cross term I_H·Q − I·Q_H built from the Hilbert-transformed channels.
/// For narrowband constant-amplitude quadrature pairs this is analytically
/// constant (= A_I·A_Q·cos(φ_I−φ_Q)).
pub fn hilbert_cross_term(i: &[f64], q: &[f64]) -> Vec<f64> {
    let ih = fft::hilbert(i);
    let qh = fft::hilbert(q);
    (0..i.len()).map(|k| ih[k] * q[k] - i[k] * qh[k]).collect()
}

fn moving_median(x: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    let n = x.len();
    (0..n)
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half + 1).min(n);
            let mut w: Vec<f64> = x[lo..hi].to_vec();
            w.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if w.len() % 2 == 1 {
                w[w.len() / 2]
            } else {
                (w[w.len() / 2 - 1] + w[w.len() / 2]) / 2.0
            }
        })
        .collect()
}
