//! Time-varying DC offset estimation and removal.
//!
//! Primary method: peak-valley calibration — every adjacent (peak, valley)
//! pair of a channel brackets the carrier excursion symmetrically, so their
//! midpoint value is a local DC sample. Samples are averaged over
//! non-overlapping windows and expanded back to the sample grid.
//!
//! Baseline: algebraic (Kåsa) least-squares circle fitting of the I/Q
//! scatter, per window or whole-record.

use crate::fft::upsample;
use crate::signal_model::IqSeries;
use crate::{Error, Result};

/// Alternating local extrema of one channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtremaSet {
    pub peak_indices: Vec<usize>,
    pub valley_indices: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumKind {
    Peak,
    Valley,
}

impl ExtremaSet {
    /// All extrema merged in index order. Alternation is guaranteed by
    /// construction in [`find_extrema`].
    pub fn merged(&self) -> Vec<(usize, ExtremumKind)> {
        let mut out: Vec<(usize, ExtremumKind)> = self
            .peak_indices
            .iter()
            .map(|&i| (i, ExtremumKind::Peak))
            .chain(self.valley_indices.iter().map(|&i| (i, ExtremumKind::Valley)))
            .collect();
        out.sort_by_key(|&(i, _)| i);
        out
    }
}

/// One local DC observation from an adjacent extrema pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcSample {
    /// Fractional sample index at the pair midpoint.
    pub time_index: f64,
    pub dc_value: f64,
}

/// Linearly interpolated percentile of an unsorted slice (p in [0, 100]).
fn percentile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (h - lo as f64)
}

fn median(values: &[f64]) -> f64 {
    percentile(values, 50.0)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Centered moving average with zero padding outside the record (matches a
/// 'same'-mode convolution with a uniform kernel).
pub(crate) fn smooth_moving_average(x: &[f64], width: usize) -> Vec<f64> {
    let half = width as isize / 2;
    (0..x.len() as isize)
        .map(|i| {
            let mut acc = 0.0;
            for d in -half..=half {
                let j = i + d;
                if j >= 0 && (j as usize) < x.len() {
                    acc += x[j as usize];
                }
            }
            acc / width as f64
        })
        .collect()
}

/// Default prominence threshold: 0.3 × the robust (10th–90th percentile)
/// range of the detection series.
pub fn default_prominence(channel: &[f64]) -> f64 {
    0.3 * (percentile(channel, 90.0) - percentile(channel, 10.0))
}

/// Find alternating local extrema with at least `min_prominence`.
///
/// Prominence is computed by exhaustive search: walk away from the candidate
/// in both directions while samples stay below it (above, for valleys) and
/// measure the drop to the higher of the two side minima. Consecutive
/// same-kind survivors are deduplicated keeping the more extreme one, which
/// enforces strict peak/valley alternation.
pub fn find_extrema(channel: &[f64], min_prominence: f64) -> Result<ExtremaSet> {
    if channel.len() < 3 {
        return Err(Error::invalid("need at least 3 samples for extrema search"));
    }
    if min_prominence < 0.0 {
        return Err(Error::invalid("min_prominence must be non-negative"));
    }
    let n = channel.len();
    let mut survivors: Vec<(usize, f64)> = Vec::new(); // (index, sign): +1 peak, -1 valley
    for i in 1..n - 1 {
        let sign = if channel[i] > channel[i - 1] && channel[i] >= channel[i + 1] {
            1.0
        } else if channel[i] < channel[i - 1] && channel[i] <= channel[i + 1] {
            -1.0
        } else {
            continue;
        };
        if prominence_at(channel, i, sign) < min_prominence {
            continue;
        }
        match survivors.last_mut() {
            Some(&mut (last_i, last_sign)) if last_sign == sign => {
                if sign * channel[i] > sign * channel[last_i] {
                    *survivors.last_mut().unwrap() = (i, sign);
                }
            }
            _ => survivors.push((i, sign)),
        }
    }
    let peaks: Vec<usize> = survivors.iter().filter(|&&(_, s)| s > 0.0).map(|&(i, _)| i).collect();
    let valleys: Vec<usize> = survivors.iter().filter(|&&(_, s)| s < 0.0).map(|&(i, _)| i).collect();
    if peaks.is_empty() || valleys.is_empty() {
        return Err(Error::InsufficientExtrema(format!(
            "found {} peaks, {} valleys",
            peaks.len(),
            valleys.len()
        )));
    }
    Ok(ExtremaSet { peak_indices: peaks, valley_indices: valleys })
}

fn prominence_at(x: &[f64], i: usize, sign: f64) -> f64 {
    let v = sign * x[i];
    let mut left = v;
    let mut j = i;
    while j > 0 && sign * x[j - 1] <= v {
        j -= 1;
        left = left.min(sign * x[j]);
    }
    let mut right = v;
    let mut j = i;
    while j + 1 < x.len() && sign * x[j + 1] <= v {
        j += 1;
        right = right.min(sign * x[j]);
    }
    v - left.max(right)
}

/// Midpoint DC samples from every adjacent alternating extrema pair, values
/// read directly from `channel`.
pub fn peak_valley_dc_samples(channel: &[f64], extrema: &ExtremaSet) -> Result<Vec<DcSample>> {
    let merged = extrema.merged();
    if merged.len() < 2 {
        return Err(Error::InsufficientExtrema("fewer than two extrema to pair".into()));
    }
    Ok(merged
        .windows(2)
        .map(|pair| DcSample {
            time_index: (pair[0].0 + pair[1].0) as f64 / 2.0,
            dc_value: (channel[pair[0].0] + channel[pair[1].0]) / 2.0,
        })
        .collect())
}

/// Per-channel DC estimate aligned to non-overlapping windows.
#[derive(Debug, Clone, PartialEq)]
pub struct DcEstimate {
    pub window_length_s: f64,
    pub window_values_i: Vec<f64>,
    pub window_values_q: Vec<f64>,
    pub num_samples: usize,
    pub sample_rate_hz: f64,
}

/// How a window-aligned DC estimate is expanded to the sample grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpansionMode {
    /// Linear interpolation between window-center values (default; avoids
    /// step discontinuities that would spike the demodulator derivatives).
    LinearInterp,
    /// Constant value across each window.
    PiecewiseConstant,
}

fn window_length_samples(window_length_s: f64, sample_rate_hz: f64) -> usize {
    ((window_length_s * sample_rate_hz).round() as usize).max(1)
}

pub fn num_windows(num_samples: usize, window_length_s: f64, sample_rate_hz: f64) -> usize {
    let wlen = window_length_samples(window_length_s, sample_rate_hz);
    num_samples.div_ceil(wlen)
}

/// Average DC samples into consecutive non-overlapping windows. Windows with
/// no samples inherit the previous window's value; a leading empty window
/// falls back to the global mean of all DC samples.
pub fn windowed_dc(
    dc_samples: &[DcSample],
    window_length_s: f64,
    num_samples: usize,
    sample_rate_hz: f64,
) -> Result<Vec<f64>> {
    if dc_samples.is_empty() {
        return Err(Error::invalid("no DC samples to window"));
    }
    if !(window_length_s > 0.0) {
        return Err(Error::invalid("window_length_s must be positive"));
    }
    let wlen = window_length_samples(window_length_s, sample_rate_hz);
    let nw = num_samples.div_ceil(wlen);
    let global = mean(&dc_samples.iter().map(|s| s.dc_value).collect::<Vec<_>>());
    let mut prev = global;
    let mut out = Vec::with_capacity(nw);
    for w in 0..nw {
        let lo = (w * wlen) as f64;
        let hi = ((w + 1) * wlen) as f64;
        let vals: Vec<f64> = dc_samples
            .iter()
            .filter(|s| s.time_index >= lo && s.time_index < hi)
            .map(|s| s.dc_value)
            .collect();
        if !vals.is_empty() {
            prev = mean(&vals);
        }
        out.push(prev);
    }
    Ok(out)
}

impl DcEstimate {
    pub fn new(
        window_length_s: f64,
        window_values_i: Vec<f64>,
        window_values_q: Vec<f64>,
        num_samples: usize,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        let nw = num_windows(num_samples, window_length_s, sample_rate_hz);
        if window_values_i.len() != nw || window_values_q.len() != nw {
            return Err(Error::invalid(format!(
                "expected {nw} window values, got {}/{}",
                window_values_i.len(),
                window_values_q.len()
            )));
        }
        Ok(DcEstimate {
            window_length_s,
            window_values_i,
            window_values_q,
            num_samples,
            sample_rate_hz,
        })
    }

    /// Expand both channels to per-sample DC trajectories.
    pub fn expand(&self, mode: ExpansionMode) -> (Vec<f64>, Vec<f64>) {
        (
            expand_windows(&self.window_values_i, self.window_length_s, self.num_samples, self.sample_rate_hz, mode),
            expand_windows(&self.window_values_q, self.window_length_s, self.num_samples, self.sample_rate_hz, mode),
        )
    }
}

fn expand_windows(
    window_values: &[f64],
    window_length_s: f64,
    num_samples: usize,
    sample_rate_hz: f64,
    mode: ExpansionMode,
) -> Vec<f64> {
    let wlen = window_length_samples(window_length_s, sample_rate_hz);
    match mode {
        ExpansionMode::PiecewiseConstant => (0..num_samples)
            .map(|k| window_values[(k / wlen).min(window_values.len() - 1)])
            .collect(),
        ExpansionMode::LinearInterp => {
            let centers: Vec<f64> = (0..window_values.len())
                .map(|w| (w * wlen) as f64 + wlen as f64 / 2.0)
                .collect();
            (0..num_samples)
                .map(|k| interp(k as f64, &centers, window_values))
                .collect()
        }
    }
}

/// Piecewise-linear interpolation with constant extrapolation at both ends
/// (xs strictly increasing).
fn interp(x: f64, xs: &[f64], ys: &[f64]) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    let j = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[j - 1], xs[j]);
    let frac = (x - x0) / (x1 - x0);
    ys[j - 1] * (1.0 - frac) + ys[j] * frac
}

/// Subtract the per-sample expansion of a DC estimate from both channels.
pub fn calibrate(iq: &IqSeries, dc: &DcEstimate, mode: ExpansionMode) -> Result<IqSeries> {
    if dc.num_samples != iq.len() {
        return Err(Error::invalid(format!(
            "DC estimate covers {} samples, record has {}",
            dc.num_samples,
            iq.len()
        )));
    }
    let (dc_i, dc_q) = dc.expand(mode);
    let i = iq.i.iter().zip(&dc_i).map(|(v, d)| v - d).collect();
    let q = iq.q.iter().zip(&dc_q).map(|(v, d)| v - d).collect();
    IqSeries::new(i, q, iq.sample_rate_hz)
}

// ---------------------------------------------------------------------------
// High-level peak-valley pipeline
// ---------------------------------------------------------------------------

/// Tuning for the end-to-end peak-valley estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakValleyConfig {
    /// Non-overlapping averaging window in seconds.
    pub window_s: f64,
    /// Prominence threshold; `None` derives [`default_prominence`] from the
    /// detection series.
    pub min_prominence: Option<f64>,
    /// Run extrema detection on a 5-sample moving average of the channel.
    /// Extremum values are still refined on the raw series.
    pub presmooth: bool,
    /// Band-limited upsampling factor used when refining extremum values;
    /// 1 disables refinement and reads values from the detection series.
    pub upsample_factor: usize,
    /// Discard extrema pairs whose half-swing is below this fraction of the
    /// median pair amplitude (guards against noise ripples surviving the
    /// prominence test).
    pub pair_filter_frac: f64,
    pub expansion: ExpansionMode,
}

impl Default for PeakValleyConfig {
    fn default() -> Self {
        PeakValleyConfig {
            window_s: 2.0,
            min_prominence: None,
            presmooth: true,
            upsample_factor: 4,
            pair_filter_frac: 0.8,
            expansion: ExpansionMode::LinearInterp,
        }
    }
}

/// Result of fitting one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDcFit {
    /// Per-sample DC estimate ready to subtract.
    pub dc: Vec<f64>,
    /// Median half peak-to-valley swing: the channel's carrier amplitude
    /// estimate. `None` when the channel had insufficient extrema and the
    /// whole-record mean fallback was used.
    pub amplitude: Option<f64>,
}

/// Internal: refined (midpoint, dc, amplitude) triples for one channel.
fn refined_pairs(
    channel: &[f64],
    cfg: &PeakValleyConfig,
) -> Option<Vec<(f64, f64, f64)>> {
    let detection: Vec<f64>;
    let det: &[f64] = if cfg.presmooth {
        detection = smooth_moving_average(channel, 5);
        &detection
    } else {
        channel
    };
    let prom = cfg.min_prominence.unwrap_or_else(|| default_prominence(det));
    let extrema = find_extrema(det, prom).ok()?;
    let merged = extrema.merged();
    if merged.len() < 2 {
        return None;
    }

    let factor = cfg.upsample_factor.max(1);
    let fine; // refined series and its index scale
    let values: Vec<f64> = if factor > 1 {
        fine = upsample(channel, factor);
        // Decide the refinement direction from the raw sample against the
        // raw mean, not from the detected kind: presmoothing attenuates (and
        // near its nulls sign-flips) carrier oscillations faster than the
        // kernel passband, so the smoothed extremum kind is unreliable while
        // the raw side of the mean is not.
        let channel_mean = mean(channel);
        merged
            .iter()
            .map(|&(i, _)| {
                let kind = if channel[i] >= channel_mean {
                    ExtremumKind::Peak
                } else {
                    ExtremumKind::Valley
                };
                refine_extremum(&fine, i * factor, factor, kind)
            })
            .collect()
    } else {
        merged.iter().map(|&(i, _)| det[i]).collect()
    };

    let mut pairs: Vec<(f64, f64, f64)> = Vec::with_capacity(merged.len() - 1);
    for w in 0..merged.len() - 1 {
        let (i1, _) = merged[w];
        let (i2, _) = merged[w + 1];
        let (v1, v2) = (values[w], values[w + 1]);
        pairs.push(((i1 + i2) as f64 / 2.0, (v1 + v2) / 2.0, (v1 - v2).abs() / 2.0));
    }

    // amplitude-based pair filter against the median swing
    let amps: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    let reference = median(&amps);
    let kept: Vec<(f64, f64, f64)> = pairs
        .iter()
        .copied()
        .filter(|p| p.2 >= cfg.pair_filter_frac * reference)
        .collect();
    Some(if kept.is_empty() { pairs } else { kept })
}

/// Search the upsampled series around a coarse extremum and polish the value
/// with a vertex-clamped parabola.
fn refine_extremum(fine: &[f64], coarse: usize, factor: usize, kind: ExtremumKind) -> f64 {
    let lo = coarse.saturating_sub(factor).max(1);
    let hi = (coarse + factor).min(fine.len().saturating_sub(2));
    if lo > hi {
        return fine[coarse.min(fine.len() - 1)];
    }
    let mut best = lo;
    for j in lo..=hi {
        let better = match kind {
            ExtremumKind::Peak => fine[j] > fine[best],
            ExtremumKind::Valley => fine[j] < fine[best],
        };
        if better {
            best = j;
        }
    }
    parabolic_value(fine, best)
}

/// Parabola vertex value through (i-1, i, i+1), clamped to the neighborhood
/// so a degenerate fit can never overshoot.
fn parabolic_value(x: &[f64], i: usize) -> f64 {
    if i < 1 || i + 1 >= x.len() {
        return x[i];
    }
    let (a, b, c) = (x[i - 1], x[i], x[i + 1]);
    let d = a - 2.0 * b + c;
    if d.abs() < 1e-300 {
        return b;
    }
    let v = b - (a - c) * (a - c) / (8.0 * d);
    let g = (b - a).abs().max((b - c).abs());
    v.clamp(b - g, b + g)
}

/// Fit one channel with the full peak-valley pipeline. Never fails: channels
/// without usable extrema fall back to whole-record mean subtraction.
pub fn peak_valley_channel_dc(channel: &[f64], sample_rate_hz: f64, cfg: &PeakValleyConfig) -> ChannelDcFit {
    let n = channel.len();
    let Some(pairs) = refined_pairs(channel, cfg) else {
        return ChannelDcFit { dc: vec![mean(channel); n], amplitude: None };
    };
    let amps: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    let amplitude = Some(median(&amps));
    let samples: Vec<DcSample> = pairs
        .iter()
        .map(|&(m, v, _)| DcSample { time_index: m, dc_value: v })
        .collect();
    let wv = windowed_dc(&samples, cfg.window_s, n, sample_rate_hz)
        .expect("pairs are non-empty");
    let dc = expand_windows(&wv, cfg.window_s, n, sample_rate_hz, cfg.expansion);
    ChannelDcFit { dc, amplitude }
}

/// Coverage-only variant for relative-error benchmarks: windows that contain
/// no extrema pair remove nothing (estimate 0), and no interpolation is done
/// across window boundaries.
pub fn peak_valley_coverage_dc(channel: &[f64], sample_rate_hz: f64, cfg: &PeakValleyConfig) -> Vec<f64> {
    let n = channel.len();
    let Some(pairs) = refined_pairs(channel, cfg) else {
        return vec![0.0; n];
    };
    let wlen = window_length_samples(cfg.window_s, sample_rate_hz);
    let nw = n.div_ceil(wlen);
    let mut dc = vec![0.0; n];
    for w in 0..nw {
        let lo = (w * wlen) as f64;
        let hi = ((w + 1) * wlen) as f64;
        let vals: Vec<f64> = pairs
            .iter()
            .filter(|p| p.0 >= lo && p.0 < hi)
            .map(|p| p.1)
            .collect();
        if !vals.is_empty() {
            let v = mean(&vals);
            for item in dc.iter_mut().take(((w + 1) * wlen).min(n)).skip(w * wlen) {
                *item = v;
            }
        }
    }
    dc
}

/// Outcome of calibrating a full record.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationInfo {
    pub dc_i: Vec<f64>,
    pub dc_q: Vec<f64>,
    pub amp_i: Option<f64>,
    pub amp_q: Option<f64>,
}

/// Peak-valley calibrate both channels; returns the calibrated record plus
/// the per-channel DC trajectories and amplitude estimates.
pub fn calibrate_peak_valley(iq: &IqSeries, cfg: &PeakValleyConfig) -> Result<(IqSeries, CalibrationInfo)> {
    let fit_i = peak_valley_channel_dc(&iq.i, iq.sample_rate_hz, cfg);
    let fit_q = peak_valley_channel_dc(&iq.q, iq.sample_rate_hz, cfg);
    let i = iq.i.iter().zip(&fit_i.dc).map(|(v, d)| v - d).collect();
    let q = iq.q.iter().zip(&fit_q.dc).map(|(v, d)| v - d).collect();
    let calibrated = IqSeries::new(i, q, iq.sample_rate_hz)?;
    Ok((
        calibrated,
        CalibrationInfo {
            dc_i: fit_i.dc,
            dc_q: fit_q.dc,
            amp_i: fit_i.amplitude,
            amp_q: fit_q.amplitude,
        },
    ))
}

// ---------------------------------------------------------------------------
// Circle-fitting baseline
// ---------------------------------------------------------------------------

/// Center of the algebraic least-squares circle through the I/Q scatter
/// (Kåsa formulation: minimize Σ(‖s−c‖²−r²)² via the linear normal
/// equations).
pub fn circle_fit_dc(iq: &IqSeries) -> Result<(f64, f64)> {
    circle_fit_points(&iq.i, &iq.q)
}

pub(crate) fn circle_fit_points(i: &[f64], q: &[f64]) -> Result<(f64, f64)> {
    if i.len() < 3 {
        return Err(Error::DegenerateCircleFit("need at least 3 points".into()));
    }
    let mi = mean(i);
    let mq = mean(q);
    let (mut suu, mut svv, mut suv) = (0.0, 0.0, 0.0);
    let (mut suuu, mut svvv, mut suvv, mut svuu) = (0.0, 0.0, 0.0, 0.0);
    for (&a, &b) in i.iter().zip(q) {
        let u = a - mi;
        let v = b - mq;
        suu += u * u;
        svv += v * v;
        suv += u * v;
        suuu += u * u * u;
        svvv += v * v * v;
        suvv += u * v * v;
        svuu += v * u * u;
    }
    let det = suu * svv - suv * suv;
    let norm = suu * svv;
    if norm <= 0.0 || det < 1e-3 * norm {
        return Err(Error::DegenerateCircleFit(
            "near-collinear scatter: normal equations ill-conditioned".into(),
        ));
    }
    let b1 = 0.5 * (suuu + suvv);
    let b2 = 0.5 * (svvv + svuu);
    let cx = (svv * b1 - suv * b2) / det;
    let cy = (suu * b2 - suv * b1) / det;
    Ok((cx + mi, cy + mq))
}

/// Per-window circle-fit DC removal with a fit-quality gate: windows whose
/// scatter is degenerate, or whose RMS radial residual exceeds
/// `resid_max` × the mean radius, remove nothing.
pub fn circle_fit_windowed_dc(
    iq: &IqSeries,
    window_s: f64,
    resid_max: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = iq.len();
    let wlen = window_length_samples(window_s, iq.sample_rate_hz);
    let mut dc_i = vec![0.0; n];
    let mut dc_q = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let end = (start + wlen).min(n);
        if let Ok((cx, cy)) = circle_fit_points(&iq.i[start..end], &iq.q[start..end]) {
            let dists: Vec<f64> = (start..end)
                .map(|k| ((iq.i[k] - cx).powi(2) + (iq.q[k] - cy).powi(2)).sqrt())
                .collect();
            let radius = mean(&dists);
            let resid =
                (dists.iter().map(|d| (d - radius) * (d - radius)).sum::<f64>() / dists.len() as f64).sqrt();
            if radius > 0.0 && resid <= resid_max * radius {
                for k in start..end {
                    dc_i[k] = cx;
                    dc_q[k] = cy;
                }
            }
        }
        start = end;
    }
    (dc_i, dc_q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::PI;

    fn sine(freq: f64, fs: f64, duration: f64) -> Vec<f64> {
        let n = (duration * fs).round() as usize;
        (0..n).map(|k| (2.0 * PI * freq * k as f64 / fs).sin()).collect()
    }

    #[test]
    fn find_extrema_counts_sinusoid_extrema() {
        let x = sine(0.3, 20.0, 10.0);
        let e = find_extrema(&x, 0.5).unwrap();
        assert_eq!(e.peak_indices.len(), 3);
        assert_eq!(e.valley_indices.len(), 3);
        // extrema sit at the quarter-period offsets of the 0.3 Hz tone
        assert!((e.peak_indices[0] as f64 / 20.0 - 1.0 / 1.2).abs() < 0.06);
    }

    #[test]
    fn find_extrema_rejects_constant_sequence() {
        assert!(matches!(
            find_extrema(&[1.0; 100], 0.1),
            Err(Error::InsufficientExtrema(_))
        ));
    }

    #[test]
    fn find_extrema_is_noise_robust_at_matched_prominence() {
        // detection runs on the presmoothed series, as in the pipeline; raw
        // per-sample prominence would let noise bumps through
        let clean = sine(0.3, 20.0, 10.0);
        let clean_ext = find_extrema(&clean, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // 10 dB SNR on a unit sinusoid: sigma^2 = 0.5 / 10
        let sigma = (0.5f64 / 10.0).sqrt();
        let noisy: Vec<f64> = clean
            .iter()
            .map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let smoothed = smooth_moving_average(&noisy, 5);
        let noisy_ext = find_extrema(&smoothed, 0.5).unwrap();
        assert_eq!(noisy_ext.peak_indices.len(), clean_ext.peak_indices.len());
        assert_eq!(noisy_ext.valley_indices.len(), clean_ext.valley_indices.len());
    }

    #[test]
    fn alternation_holds_on_noisy_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = sine(0.3, 20.0, 30.0)
            .iter()
            .map(|v| v + 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        if let Ok(e) = find_extrema(&x, 0.4) {
            let merged = e.merged();
            for pair in merged.windows(2) {
                assert_ne!(pair[0].1, pair[1].1, "two consecutive extrema of the same kind");
            }
        }
    }

    #[test]
    fn dc_samples_recover_constant_offset_exactly() {
        let x: Vec<f64> = sine(0.3, 20.0, 20.0).iter().map(|v| v + 1.75).collect();
        let e = find_extrema(&x, 0.5).unwrap();
        let samples = peak_valley_dc_samples(&x, &e).unwrap();
        assert!(!samples.is_empty());
        for s in samples {
            // sampled sinusoid: peak/valley values differ from ±1 by the same
            // grid offset, so midpoints stay within that second-order error
            assert!((s.dc_value - 1.75).abs() < 2e-2);
        }
    }

    #[test]
    fn dc_samples_track_linear_ramp() {
        let fs = 20.0;
        let n = 1200;
        let x: Vec<f64> = (0..n)
            .map(|k| (2.0 * PI * 0.3 * k as f64 / fs).sin() + 1.0 + 2.0 * k as f64 / n as f64)
            .collect();
        let e = find_extrema(&x, 0.5).unwrap();
        let samples = peak_valley_dc_samples(&x, &e).unwrap();
        let slope = 2.0 / n as f64; // per sample
        let half_period = fs / 0.3 / 2.0;
        for s in samples {
            let truth = 1.0 + slope * s.time_index;
            assert!(
                (s.dc_value - truth).abs() < half_period * slope + 2e-2,
                "at {}: {} vs {}",
                s.time_index,
                s.dc_value,
                truth
            );
        }
    }

    #[test]
    fn windowed_dc_constant_input() {
        let samples: Vec<DcSample> = (0..30)
            .map(|k| DcSample { time_index: k as f64 * 40.0, dc_value: 2.5 })
            .collect();
        let wv = windowed_dc(&samples, 2.0, 1200, 20.0).unwrap();
        assert_eq!(wv.len(), 30);
        assert!(wv.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn windowed_dc_window_count_for_60s_record() {
        let samples = vec![DcSample { time_index: 10.0, dc_value: 1.0 }];
        let wv = windowed_dc(&samples, 2.0, 1200, 20.0).unwrap();
        assert_eq!(wv.len(), 30);
    }

    #[test]
    fn windowed_dc_matches_brute_force_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<DcSample> = (0..200)
            .map(|_| DcSample {
                time_index: rng.gen_range(0.0..1200.0),
                dc_value: rng.gen_range(1.0..3.0),
            })
            .collect();
        let wv = windowed_dc(&samples, 3.0, 1200, 20.0).unwrap();
        let wlen = 60.0;
        let mut prev: Option<f64> = None;
        for (w, &got) in wv.iter().enumerate() {
            let in_window: Vec<f64> = samples
                .iter()
                .filter(|s| s.time_index >= w as f64 * wlen && s.time_index < (w + 1) as f64 * wlen)
                .map(|s| s.dc_value)
                .collect();
            let want = if in_window.is_empty() {
                prev.unwrap_or_else(|| {
                    samples.iter().map(|s| s.dc_value).sum::<f64>() / samples.len() as f64
                })
            } else {
                in_window.iter().sum::<f64>() / in_window.len() as f64
            };
            assert!((got - want).abs() < 1e-12);
            prev = Some(got);
        }
    }

    #[test]
    fn calibrate_with_zero_estimate_is_identity() {
        let iq = IqSeries::new(sine(0.3, 20.0, 10.0), sine(0.3, 20.0, 10.0), 20.0).unwrap();
        let nw = num_windows(iq.len(), 2.0, 20.0);
        let dc = DcEstimate::new(2.0, vec![0.0; nw], vec![0.0; nw], iq.len(), 20.0).unwrap();
        let out = calibrate(&iq, &dc, ExpansionMode::LinearInterp).unwrap();
        assert_eq!(out, iq);
    }

    #[test]
    fn calibrate_exact_constant_dc_centers_trajectory() {
        let fs = 20.0;
        let n = 1200;
        let i: Vec<f64> = (0..n).map(|k| (2.0 * PI * 0.25 * k as f64 / fs).cos() + 2.0).collect();
        let q: Vec<f64> = (0..n).map(|k| (2.0 * PI * 0.25 * k as f64 / fs).sin() + 1.5).collect();
        let iq = IqSeries::new(i, q, fs).unwrap();
        let nw = num_windows(n, 2.0, fs);
        let dc = DcEstimate::new(2.0, vec![2.0; nw], vec![1.5; nw], n, fs).unwrap();
        let out = calibrate(&iq, &dc, ExpansionMode::PiecewiseConstant).unwrap();
        let ci = out.i.iter().sum::<f64>() / n as f64;
        let cq = out.q.iter().sum::<f64>() / n as f64;
        assert!(ci.abs() < 1e-12 && cq.abs() < 1e-12, "centroid ({ci}, {cq})");
    }

    #[test]
    fn peak_valley_exactness_on_stationary_sinusoid() {
        // constant DC, constant amplitude, noise-free, >=1 oscillation per
        // window: per-window estimate error must be tiny
        let fs = 20.0;
        let n = 1200;
        let x: Vec<f64> = (0..n).map(|k| (2.0 * PI * 0.5 * k as f64 / fs).sin() + 2.25).collect();
        let cfg = PeakValleyConfig { presmooth: false, ..PeakValleyConfig::default() };
        let fit = peak_valley_channel_dc(&x, fs, &cfg);
        for &v in &fit.dc {
            assert!((v - 2.25).abs() < 1e-9, "dc {v}");
        }
        assert!((fit.amplitude.unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn peak_valley_estimate_is_amplitude_independent() {
        let fs = 20.0;
        let n = 1200;
        let base: Vec<f64> = (0..n).map(|k| (2.0 * PI * 0.5 * k as f64 / fs).sin()).collect();
        let cfg = PeakValleyConfig { presmooth: false, ..PeakValleyConfig::default() };
        let a: Vec<f64> = base.iter().map(|v| v + 2.0).collect();
        let b: Vec<f64> = base.iter().map(|v| 3.7 * v + 2.0).collect();
        let fa = peak_valley_channel_dc(&a, fs, &cfg);
        let fb = peak_valley_channel_dc(&b, fs, &cfg);
        for (x, y) in fa.dc.iter().zip(&fb.dc) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn peak_valley_falls_back_to_mean_without_extrema() {
        let x = vec![4.0; 300];
        let fit = peak_valley_channel_dc(&x, 20.0, &PeakValleyConfig::default());
        assert!(fit.amplitude.is_none());
        assert!(fit.dc.iter().all(|&v| v == 4.0));
    }

    #[test]
    fn circle_fit_recovers_exact_center() {
        let n = 100;
        let i: Vec<f64> = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).cos() + 2.0).collect();
        let q: Vec<f64> = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).sin() + 1.5).collect();
        let iq = IqSeries::new(i, q, 20.0).unwrap();
        let (cx, cy) = circle_fit_dc(&iq).unwrap();
        assert!((cx - 2.0).abs() < 1e-9 && (cy - 1.5).abs() < 1e-9);
    }

    #[test]
    fn circle_fit_rejects_collinear_points() {
        let i: Vec<f64> = (0..50).map(|k| k as f64).collect();
        let q: Vec<f64> = (0..50).map(|k| 2.0 * k as f64 + 1.0).collect();
        let iq = IqSeries::new(i, q, 20.0).unwrap();
        assert!(matches!(circle_fit_dc(&iq), Err(Error::DegenerateCircleFit(_))));
    }

    #[test]
    fn circle_fit_matches_grid_search_on_noisy_circle() {
        let n = 180;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sigma = 0.05;
        let mut i = Vec::with_capacity(n);
        let mut q = Vec::with_capacity(n);
        for k in 0..n {
            let th = 2.0 * PI * k as f64 / n as f64;
            i.push(th.cos() + 2.0 + sigma * rng.sample::<f64, _>(StandardNormal));
            q.push(th.sin() + 1.5 + sigma * rng.sample::<f64, _>(StandardNormal));
        }
        let iq = IqSeries::new(i.clone(), q.clone(), 20.0).unwrap();
        let (cx, cy) = circle_fit_dc(&iq).unwrap();

        // brute-force minimizer of the same algebraic objective
        let objective = |a: f64, b: f64| {
            // optimal r^2 for fixed center is the mean squared distance
            let msd: f64 = i
                .iter()
                .zip(&q)
                .map(|(x, y)| (x - a).powi(2) + (y - b).powi(2))
                .sum::<f64>()
                / n as f64;
            i.iter()
                .zip(&q)
                .map(|(x, y)| ((x - a).powi(2) + (y - b).powi(2) - msd).powi(2))
                .sum::<f64>()
        };
        let mut best = (cx, cy, objective(cx, cy));
        let mut span = 0.1;
        let mut center = (2.0, 1.5);
        for _ in 0..4 {
            for a in 0..41 {
                for b in 0..41 {
                    let x = center.0 - span + 2.0 * span * a as f64 / 40.0;
                    let y = center.1 - span + 2.0 * span * b as f64 / 40.0;
                    let v = objective(x, y);
                    if v < best.2 {
                        best = (x, y, v);
                    }
                }
            }
            center = (best.0, best.1);
            span /= 10.0;
        }
        assert!(
            ((cx - best.0).powi(2) + (cy - best.1).powi(2)).sqrt() < 1e-3,
            "closed form ({cx},{cy}) vs search ({},{})",
            best.0,
            best.1
        );
    }

    #[test]
    fn coverage_dc_leaves_empty_windows_untouched() {
        // single burst of oscillation at the start: later windows get 0
        let fs = 20.0;
        let n = 800;
        let x: Vec<f64> = (0..n)
            .map(|k| {
                if k < 200 {
                    (2.0 * PI * 0.5 * k as f64 / fs).sin() + 2.0
                } else {
                    2.0
                }
            })
            .collect();
        let cfg = PeakValleyConfig { presmooth: false, window_s: 2.0, ..PeakValleyConfig::default() };
        let dc = peak_valley_coverage_dc(&x, fs, &cfg);
        assert!(dc[..160].iter().any(|&v| v != 0.0));
        assert!(dc[400..].iter().all(|&v| v == 0.0));
    }
}
