//! Shared FFT plumbing: analytic signal, band-limited resampling, spectra.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

fn fft_forward(buf: &mut [Complex<f64>]) {
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(buf.len()).process(buf);
}

fn fft_inverse(buf: &mut [Complex<f64>]) {
    let n = buf.len();
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n).process(buf);
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Imaginary part of the analytic signal of `x`.
///
/// Frequency-domain construction: zero the negative-frequency bins, double
/// the positive ones, leave DC (and Nyquist, for even lengths) unscaled.
pub fn hilbert(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_forward(&mut buf);
    if n > 1 {
        let half = n / 2;
        let upper = if n % 2 == 0 { half } else { half + 1 };
        for v in buf.iter_mut().take(upper).skip(1) {
            *v *= 2.0;
        }
        for v in buf.iter_mut().skip(half + 1) {
            *v = Complex::new(0.0, 0.0);
        }
    }
    fft_inverse(&mut buf);
    buf.iter().map(|v| v.im).collect()
}

/// Band-limited upsampling by an integer factor via spectral zero-padding.
///
/// The non-negative half spectrum of `x` is copied (scaled by `factor`) into
/// a `factor * n` point spectrum, conjugate symmetry is restored, and the
/// longer inverse transform is taken. Sample `k * factor` reproduces `x[k]`
/// up to the usual periodic-extension edge error.
pub fn upsample(x: &[f64], factor: usize) -> Vec<f64> {
    let n = x.len();
    if factor <= 1 || n == 0 {
        return x.to_vec();
    }
    let mut spec: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_forward(&mut spec);
    let m = n * factor;
    let half = n / 2;
    let mut long = vec![Complex::new(0.0, 0.0); m];
    let scale = factor as f64;
    for k in 0..=half {
        long[k] = spec[k] * scale;
        if k > 0 && k < m - k {
            long[m - k] = spec[k].conj() * scale;
        }
    }
    fft_inverse(&mut long);
    long.iter().map(|v| v.re).collect()
}

/// Zero every spectral bin strictly below `cutoff_hz` (including DC) and
/// return the real inverse transform. A sharp detrender for sweep metrics.
pub fn highpass(x: &[f64], sample_rate_hz: f64, cutoff_hz: f64) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_forward(&mut buf);
    let df = sample_rate_hz / n as f64;
    for (k, v) in buf.iter_mut().enumerate() {
        let freq = if k <= n / 2 { k as f64 } else { (n - k) as f64 } * df;
        if freq < cutoff_hz {
            *v = Complex::new(0.0, 0.0);
        }
    }
    fft_inverse(&mut buf);
    buf.iter().map(|v| v.re).collect()
}

/// Magnitudes of the non-negative frequency bins of `x`.
pub fn real_spectrum_magnitude(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_forward(&mut buf);
    buf.iter().take(n / 2 + 1).map(|v| v.norm()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn hilbert_of_cosine_is_sine() {
        // quadrature-pair oracle on an integer-period tone
        let n = 400;
        let x: Vec<f64> = (0..n).map(|k| (2.0 * PI * 5.0 * k as f64 / n as f64).cos()).collect();
        let h = hilbert(&x);
        for (k, &hv) in h.iter().enumerate() {
            let want = (2.0 * PI * 5.0 * k as f64 / n as f64).sin();
            assert!((hv - want).abs() < 1e-9, "bin {k}: {hv} vs {want}");
        }
    }

    #[test]
    fn hilbert_of_constant_is_zero() {
        let h = hilbert(&[3.25; 37]);
        assert!(h.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn upsample_interpolates_tone_through_original_samples() {
        let n = 200;
        let x: Vec<f64> = (0..n).map(|k| (2.0 * PI * 3.0 * k as f64 / n as f64).sin()).collect();
        let u = upsample(&x, 4);
        assert_eq!(u.len(), 4 * n);
        for k in 0..n {
            assert!((u[4 * k] - x[k]).abs() < 1e-9);
        }
        // midpoints of a band-limited tone must land on the continuous tone
        for k in 0..n - 1 {
            let want = (2.0 * PI * 3.0 * (k as f64 + 0.5) / n as f64).sin();
            assert!((u[4 * k + 2] - want).abs() < 1e-9);
        }
    }

    #[test]
    fn highpass_removes_dc_and_keeps_fast_tone() {
        let n = 600;
        let fs = 20.0;
        let x: Vec<f64> = (0..n)
            .map(|k| 5.0 + (2.0 * PI * 1.0 * k as f64 / fs).sin())
            .collect();
        let y = highpass(&x, fs, 0.1);
        let mean = y.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-9);
        for k in 0..n {
            let want = (2.0 * PI * 1.0 * k as f64 / fs).sin();
            assert!((y[k] - want).abs() < 1e-9);
        }
    }
}
