//! Experiment orchestration: Monte-Carlo sweeps, trace-file demodulation,
//! and CSV/JSON report emission.
//!
//! Trials are embarrassingly parallel; each one derives its own seed from
//! `base_seed + trial`, and results are merged in (sweep point, trial)
//! order, so parallel execution never changes output bytes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write as _};
use std::path::{Path, PathBuf};

use crate::calibration::{
    calibrate_peak_valley, circle_fit_dc, circle_fit_windowed_dc, peak_valley_coverage_dc,
    PeakValleyConfig,
};
use crate::demod::{acaa_demod, atan_demod, hadcm_with, mdacm_demod, HadcmConfig, PhaseSeries};
use crate::metrics::{
    dc_relative_error, detrended_displacement_rmse, estimate_rate, spectrum, MetricsRow,
    SpectrumResult,
};
use crate::signal_model::{synthesize, IqSeries, VitalSignScenario};
use crate::{Error, Result};

/// RMS radial residual gate for per-window circle fits, as a fraction of the
/// fitted radius. Windows failing the gate remove nothing.
pub const CIRCLE_FIT_RESIDUAL_MAX: f64 = 0.15;

/// Spectral band used for respiration-rate estimates, Hz.
pub const RESPIRATION_BAND_HZ: (f64, f64) = (0.08, 0.6);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Atan,
    Mdacm,
    Acaa,
    Hadcm,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Atan => "atan",
            Algorithm::Mdacm => "mdacm",
            Algorithm::Acaa => "acaa",
            Algorithm::Hadcm => "hadcm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMethod {
    PeakValley,
    CircleFit,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationSpec {
    pub method: CalibrationMethod,
    pub window_s: f64,
    /// Extrema prominence override; derived from the data when absent.
    pub prominence: Option<f64>,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        CalibrationSpec { method: CalibrationMethod::PeakValley, window_s: 2.0, prominence: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub window_lengths: Option<Vec<f64>>,
    pub snr_values_db: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scenario: VitalSignScenario,
    pub sweep: SweepSpec,
    pub trials: usize,
    pub algorithms: Vec<Algorithm>,
    pub calibration: CalibrationSpec,
    pub output_dir: PathBuf,
    pub base_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: VitalSignScenario::default(),
            sweep: SweepSpec::default(),
            trials: 100,
            algorithms: vec![Algorithm::Atan, Algorithm::Mdacm, Algorithm::Acaa, Algorithm::Hadcm],
            calibration: CalibrationSpec::default(),
            output_dir: PathBuf::from("out"),
            base_seed: 0,
        }
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be >= 1"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::invalid("algorithms must be non-empty"));
        }
        Ok(())
    }
}

/// Per-(algorithm × sweep point) aggregate statistics. Only the fields
/// relevant to the sweep kind are populated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub algorithm: String,
    pub snr_db: Option<f64>,
    pub window_length_s: Option<f64>,
    pub rmse_mm_mean: Option<f64>,
    pub rmse_mm_std: Option<f64>,
    pub e_i_mean: Option<f64>,
    pub e_i_std: Option<f64>,
    pub e_q_mean: Option<f64>,
    pub e_q_std: Option<f64>,
    /// Mean |1 − e|: distance from perfect removal, immune to the
    /// over-subtraction ambiguity of e itself.
    pub abs_dev_e_i_mean: Option<f64>,
    pub abs_dev_e_q_mean: Option<f64>,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<MetricsRow>,
    pub aggregates: Vec<AggregateRow>,
    pub config_echo: ExperimentConfig,
    pub tool_version: String,
    /// True when any sweep point lost more than 20% of its trials.
    pub degraded: bool,
    /// Human-readable descriptions of failed trials (truncated).
    pub failures: Vec<String>,
}

fn tool_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

fn peak_valley_config(cal: &CalibrationSpec, noisy: bool) -> PeakValleyConfig {
    PeakValleyConfig {
        window_s: cal.window_s,
        min_prominence: cal.prominence,
        presmooth: noisy,
        ..PeakValleyConfig::default()
    }
}

/// Run one demodulator under the benchmark protocol: DC-sensitive baselines
/// (ATAN, ACAA) read the raw record, the cross-multiply family (MDACM,
/// HADCM) reads the peak-valley-calibrated record.
fn run_algorithm(
    algorithm: Algorithm,
    raw: &IqSeries,
    calibrated: &IqSeries,
    amps: (Option<f64>, Option<f64>),
    wavelength_m: f64,
) -> Result<PhaseSeries> {
    match algorithm {
        Algorithm::Atan => atan_demod(raw, wavelength_m),
        Algorithm::Acaa => acaa_demod(raw, wavelength_m),
        Algorithm::Mdacm => mdacm_demod(calibrated, wavelength_m),
        Algorithm::Hadcm => {
            let cfg = HadcmConfig { amp_i: amps.0, amp_q: amps.1, ..HadcmConfig::default() };
            hadcm_with(calibrated, wavelength_m, &cfg)
        }
    }
}

/// Displacement-RMSE sweep across SNR points.
pub fn run_snr_sweep(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let snrs = config
        .sweep
        .snr_values_db
        .as_ref()
        .ok_or_else(|| Error::invalid("snr sweep requires sweep.snr_values_db"))?;
    if snrs.is_empty() {
        return Err(Error::invalid("sweep.snr_values_db must be non-empty"));
    }

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut degraded = false;
    for &snr in snrs {
        let results: Vec<std::result::Result<Vec<MetricsRow>, String>> = (0..config.trials)
            .into_par_iter()
            .map(|trial| snr_trial(config, snr, trial).map_err(|e| format!("snr {snr} trial {trial}: {e}")))
            .collect();
        let mut failed = 0usize;
        for r in results {
            match r {
                Ok(mut trial_rows) => rows.append(&mut trial_rows),
                Err(msg) => {
                    failed += 1;
                    if failures.len() < 20 {
                        failures.push(msg);
                    }
                }
            }
        }
        if failed * 5 > config.trials {
            degraded = true;
        }
    }
    let aggregates = compute_aggregates(&rows);
    Ok(ExperimentReport {
        rows,
        aggregates,
        config_echo: config.clone(),
        tool_version: tool_version(),
        degraded,
        failures,
    })
}

fn snr_trial(config: &ExperimentConfig, snr: f64, trial: usize) -> Result<Vec<MetricsRow>> {
    let seed = config.base_seed.wrapping_add(trial as u64);
    let scenario = VitalSignScenario {
        seed,
        snr_db: Some(snr),
        ..config.scenario.clone()
    };
    let synth = synthesize(&scenario)?;
    let (calibrated, amps) = match config.calibration.method {
        CalibrationMethod::PeakValley => {
            let cfg = peak_valley_config(&config.calibration, scenario.snr_db.is_some());
            let (cal, info) = calibrate_peak_valley(&synth.iq, &cfg)?;
            (cal, (info.amp_i, info.amp_q))
        }
        CalibrationMethod::CircleFit => {
            let (cx, cy) = circle_fit_dc(&synth.iq)?;
            let i = synth.iq.i.iter().map(|v| v - cx).collect();
            let q = synth.iq.q.iter().map(|v| v - cy).collect();
            (IqSeries::new(i, q, synth.iq.sample_rate_hz)?, (None, None))
        }
        CalibrationMethod::None => (synth.iq.clone(), (None, None)),
    };

    let true_rate = 60.0 * scenario.resp_freq_hz;
    let mut out = Vec::with_capacity(config.algorithms.len());
    for &algorithm in &config.algorithms {
        let est = run_algorithm(algorithm, &synth.iq, &calibrated, amps, scenario.wavelength_m)?;
        let rmse = detrended_displacement_rmse(&est, &synth.truth)?;
        let rr_error = estimate_rate(&est, RESPIRATION_BAND_HZ)
            .ok()
            .map(|r| (r - true_rate).abs());
        out.push(MetricsRow {
            algorithm: algorithm.name().to_string(),
            snr_db: Some(snr),
            window_length_s: None,
            e_i: None,
            e_q: None,
            rmse_mm: Some(rmse),
            rr_error_bpm: rr_error,
            seed,
        });
    }
    Ok(out)
}

/// DC-removal quality sweep across window lengths:
/// peak-valley and per-window circle fitting are scored with the relative
/// error (e_i, e_q) against the true DC trajectories.
pub fn run_window_sweep(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let windows = config
        .sweep
        .window_lengths
        .as_ref()
        .ok_or_else(|| Error::invalid("window sweep requires sweep.window_lengths"))?;
    if windows.is_empty() {
        return Err(Error::invalid("sweep.window_lengths must be non-empty"));
    }

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut degraded = false;
    for &window_s in windows {
        let results: Vec<std::result::Result<Vec<MetricsRow>, String>> = (0..config.trials)
            .into_par_iter()
            .map(|trial| {
                window_trial(config, window_s, trial)
                    .map_err(|e| format!("window {window_s} trial {trial}: {e}"))
            })
            .collect();
        let mut failed = 0usize;
        for r in results {
            match r {
                Ok(mut trial_rows) => rows.append(&mut trial_rows),
                Err(msg) => {
                    failed += 1;
                    if failures.len() < 20 {
                        failures.push(msg);
                    }
                }
            }
        }
        if failed * 5 > config.trials {
            degraded = true;
        }
    }
    let aggregates = compute_aggregates(&rows);
    Ok(ExperimentReport {
        rows,
        aggregates,
        config_echo: config.clone(),
        tool_version: tool_version(),
        degraded,
        failures,
    })
}

fn window_trial(config: &ExperimentConfig, window_s: f64, trial: usize) -> Result<Vec<MetricsRow>> {
    let seed = config.base_seed.wrapping_add(trial as u64);
    let scenario = VitalSignScenario { seed, ..config.scenario.clone() };
    let synth = synthesize(&scenario)?;
    let iq = &synth.iq;
    let fs = iq.sample_rate_hz;

    // coverage semantics on both sides: windows without a usable estimate
    // remove nothing, so e measures exactly what each method removed
    let pv_cfg = PeakValleyConfig {
        window_s,
        min_prominence: config.calibration.prominence,
        presmooth: scenario.snr_db.is_some(),
        ..PeakValleyConfig::default()
    };
    let pv_dc_i = peak_valley_coverage_dc(&iq.i, fs, &pv_cfg);
    let pv_dc_q = peak_valley_coverage_dc(&iq.q, fs, &pv_cfg);
    let (cf_dc_i, cf_dc_q) = circle_fit_windowed_dc(iq, window_s, CIRCLE_FIT_RESIDUAL_MAX);

    let subtract = |dc_i: &[f64], dc_q: &[f64]| -> Result<IqSeries> {
        IqSeries::new(
            iq.i.iter().zip(dc_i).map(|(v, d)| v - d).collect(),
            iq.q.iter().zip(dc_q).map(|(v, d)| v - d).collect(),
            fs,
        )
    };

    let mut out = Vec::with_capacity(2);
    for (label, dc_i, dc_q) in [
        ("peak_valley", &pv_dc_i, &pv_dc_q),
        ("circle_fit", &cf_dc_i, &cf_dc_q),
    ] {
        let calibrated = subtract(dc_i, dc_q)?;
        let (e_i, e_q) = dc_relative_error(iq, &calibrated, &synth.dc_i, &synth.dc_q)?;
        out.push(MetricsRow {
            algorithm: label.to_string(),
            snr_db: scenario.snr_db,
            window_length_s: Some(window_s),
            e_i: Some(e_i),
            e_q: Some(e_q),
            rmse_mm: None,
            rr_error_bpm: None,
            seed,
        });
    }
    Ok(out)
}

/// Group rows by (algorithm, snr, window) in first-seen order and attach
/// mean/std statistics. Stddev is the sample (n−1) form, 0 for singletons.
pub fn compute_aggregates(rows: &[MetricsRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<(String, Option<u64>, Option<u64>)> = Vec::new();
    let mut groups: Vec<Vec<&MetricsRow>> = Vec::new();
    for row in rows {
        let key = (
            row.algorithm.clone(),
            row.snr_db.map(f64::to_bits),
            row.window_length_s.map(f64::to_bits),
        );
        match keys.iter().position(|k| *k == key) {
            Some(idx) => groups[idx].push(row),
            None => {
                keys.push(key);
                groups.push(vec![row]);
            }
        }
    }
    groups
        .iter()
        .map(|group| {
            let first = group[0];
            let stats = |f: fn(&MetricsRow) -> Option<f64>| {
                let vals: Vec<f64> = group.iter().filter_map(|r| f(r)).collect();
                if vals.is_empty() {
                    return (None, None);
                }
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let std = if vals.len() > 1 {
                    (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                        / (vals.len() - 1) as f64)
                        .sqrt()
                } else {
                    0.0
                };
                (Some(mean), Some(std))
            };
            let (rmse_mean, rmse_std) = stats(|r| r.rmse_mm);
            let (e_i_mean, e_i_std) = stats(|r| r.e_i);
            let (e_q_mean, e_q_std) = stats(|r| r.e_q);
            let (abs_i, _) = stats(|r| r.e_i.map(|e| (1.0 - e).abs()));
            let (abs_q, _) = stats(|r| r.e_q.map(|e| (1.0 - e).abs()));
            AggregateRow {
                algorithm: first.algorithm.clone(),
                snr_db: first.snr_db,
                window_length_s: first.window_length_s,
                rmse_mm_mean: rmse_mean,
                rmse_mm_std: rmse_std,
                e_i_mean,
                e_i_std,
                e_q_mean,
                e_q_std,
                abs_dev_e_i_mean: abs_i,
                abs_dev_e_q_mean: abs_q,
                trials: group.len(),
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Trace files
// ---------------------------------------------------------------------------

pub const TRACE_HEADER: &str = "t_s,i,q";

/// Write a record as a `t_s,i,q` CSV trace (LF line endings, shortest
/// round-trip decimals).
pub fn write_trace(path: &Path, iq: &IqSeries) -> Result<()> {
    let mut body = String::with_capacity(iq.len() * 24);
    body.push_str(TRACE_HEADER);
    body.push('\n');
    let dt = iq.dt();
    for k in 0..iq.len() {
        writeln!(body, "{},{},{}", k as f64 * dt, iq.i[k], iq.q[k])
            .expect("string write cannot fail");
    }
    std::fs::write(path, body)?;
    Ok(())
}

/// Parse a `t_s,i,q` trace. The sample rate is inferred from the median Δt;
/// any Δt deviating from it by more than 1% is rejected.
pub fn read_trace(path: &Path) -> Result<IqSeries> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or(Error::Parse { line: 1, message: "empty file".into() })?
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    if header.trim_end() != TRACE_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header '{TRACE_HEADER}', got '{header}'"),
        });
    }
    let mut t = Vec::new();
    let mut i = Vec::new();
    let mut q = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line.map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 columns, got {}", fields.len()),
            });
        }
        let mut parsed = [0.0f64; 3];
        for (slot, field) in parsed.iter_mut().zip(&fields) {
            *slot = field.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("non-numeric value '{field}'"),
            })?;
        }
        if let Some(&last) = t.last() {
            if parsed[0] <= last {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-monotone time {} after {}", parsed[0], last),
                });
            }
        }
        t.push(parsed[0]);
        i.push(parsed[1]);
        q.push(parsed[2]);
    }
    if t.len() < 2 {
        return Err(Error::Parse {
            line: t.len() + 1,
            message: format!("need at least 2 samples, got {}", t.len()),
        });
    }
    let mut dts: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    dts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_dt = if dts.len() % 2 == 1 {
        dts[dts.len() / 2]
    } else {
        (dts[dts.len() / 2 - 1] + dts[dts.len() / 2]) / 2.0
    };
    for w in t.windows(2) {
        let dt = w[1] - w[0];
        if (dt - median_dt).abs() > 0.01 * median_dt {
            return Err(Error::invalid(format!(
                "sample-rate jitter above 1%: dt {dt} vs median {median_dt}"
            )));
        }
    }
    IqSeries::new(i, q, 1.0 / median_dt)
}

/// Full offline analysis of one trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceAnalysis {
    pub phase: PhaseSeries,
    pub spectrum: SpectrumResult,
    pub rate_bpm: f64,
}

/// Demodulate a recorded trace: parse, calibrate, run the selected
/// demodulator, and estimate the respiration rate.
pub fn demodulate_trace(
    input_path: &Path,
    algorithm: Algorithm,
    calibration: &CalibrationSpec,
    wavelength_m: f64,
) -> Result<TraceAnalysis> {
    let iq = read_trace(input_path)?;
    analyze_record(&iq, algorithm, calibration, wavelength_m)
}

/// In-process counterpart of [`demodulate_trace`] (used for round-trip
/// checks and by the CLI after synthesis).
pub fn analyze_record(
    iq: &IqSeries,
    algorithm: Algorithm,
    calibration: &CalibrationSpec,
    wavelength_m: f64,
) -> Result<TraceAnalysis> {
    let (calibrated, amps) = match calibration.method {
        CalibrationMethod::PeakValley => {
            let cfg = peak_valley_config(calibration, true);
            let (cal, info) = calibrate_peak_valley(iq, &cfg)?;
            (cal, (info.amp_i, info.amp_q))
        }
        CalibrationMethod::CircleFit => {
            let (cx, cy) = circle_fit_dc(iq)?;
            let i = iq.i.iter().map(|v| v - cx).collect();
            let q = iq.q.iter().map(|v| v - cy).collect();
            (IqSeries::new(i, q, iq.sample_rate_hz)?, (None, None))
        }
        CalibrationMethod::None => (iq.clone(), (None, None)),
    };
    let phase = run_algorithm(algorithm, iq, &calibrated, amps, wavelength_m)?;
    let valid = phase.valid_range.clone();
    let spec = spectrum(&phase.displacement_m[valid], phase.sample_rate_hz)?;
    let rate_bpm = estimate_rate(&phase, RESPIRATION_BAND_HZ)?;
    Ok(TraceAnalysis { phase, spectrum: spec, rate_bpm })
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

fn fmt_opt(v: Option<f64>, missing: &str) -> String {
    match v {
        Some(v) => format!("{v}"),
        None => missing.to_string(),
    }
}

/// Per-trial rows as CSV text.
pub fn rows_csv(report: &ExperimentReport) -> String {
    let mut out = String::new();
    out.push_str("algorithm,snr_db,window_length_s,e_i,e_q,rmse_mm,rr_error_bpm,seed\n");
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.algorithm,
            fmt_opt(r.snr_db, "none"),
            fmt_opt(r.window_length_s, "n/a"),
            fmt_opt(r.e_i, "n/a"),
            fmt_opt(r.e_q, "n/a"),
            fmt_opt(r.rmse_mm, "n/a"),
            fmt_opt(r.rr_error_bpm, "n/a"),
            r.seed
        )
        .expect("string write cannot fail");
    }
    out
}

/// Aggregates as CSV text; the column set follows the sweep kind.
pub fn aggregates_csv(report: &ExperimentReport) -> String {
    let snr_shaped = report.aggregates.iter().any(|a| a.rmse_mm_mean.is_some());
    let mut out = String::new();
    if snr_shaped {
        out.push_str("algorithm,snr_db,rmse_mm_mean,rmse_mm_std,trials\n");
        for a in &report.aggregates {
            writeln!(
                out,
                "{},{},{},{},{}",
                a.algorithm,
                fmt_opt(a.snr_db, "none"),
                fmt_opt(a.rmse_mm_mean, "n/a"),
                fmt_opt(a.rmse_mm_std, "n/a"),
                a.trials
            )
            .expect("string write cannot fail");
        }
    } else {
        out.push_str(
            "algorithm,window_length_s,e_i_mean,e_i_std,e_q_mean,e_q_std,abs_dev_e_i_mean,abs_dev_e_q_mean,trials\n",
        );
        for a in &report.aggregates {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                a.algorithm,
                fmt_opt(a.window_length_s, "n/a"),
                fmt_opt(a.e_i_mean, "n/a"),
                fmt_opt(a.e_i_std, "n/a"),
                fmt_opt(a.e_q_mean, "n/a"),
                fmt_opt(a.e_q_std, "n/a"),
                fmt_opt(a.abs_dev_e_i_mean, "n/a"),
                fmt_opt(a.abs_dev_e_q_mean, "n/a"),
                a.trials
            )
            .expect("string write cannot fail");
        }
    }
    out
}

/// Write the report to `out_dir` in the requested format. CSV emits
/// `rows.csv`, `aggregates.csv`, and a `config.json` echo; JSON emits a
/// single `report.json` with everything embedded.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    match format {
        ReportFormat::Csv => {
            std::fs::write(out_dir.join("rows.csv"), rows_csv(report))?;
            std::fs::write(out_dir.join("aggregates.csv"), aggregates_csv(report))?;
            let config = serde_json::to_string_pretty(&report.config_echo)
                .map_err(|e| Error::Serialize(e.to_string()))?;
            let mut f = std::fs::File::create(out_dir.join("config.json"))?;
            f.write_all(config.as_bytes())?;
            f.write_all(b"\n")?;
        }
        ReportFormat::Json => {
            let body = serde_json::to_string_pretty(report)
                .map_err(|e| Error::Serialize(e.to_string()))?;
            let mut f = std::fs::File::create(out_dir.join("report.json"))?;
            f.write_all(body.as_bytes())?;
            f.write_all(b"\n")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_model::DcProfile;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            trials: 4,
            sweep: SweepSpec { snr_values_db: Some(vec![20.0, 30.0]), window_lengths: None },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn snr_sweep_produces_expected_row_and_aggregate_counts() {
        let report = run_snr_sweep(&small_config()).unwrap();
        assert_eq!(report.rows.len(), 2 * 4 * 4); // snrs × trials × algorithms
        assert_eq!(report.aggregates.len(), 2 * 4);
        assert!(!report.degraded);
    }

    #[test]
    fn snr_sweep_is_deterministic_across_runs() {
        let a = run_snr_sweep(&small_config()).unwrap();
        let b = run_snr_sweep(&small_config()).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(rows_csv(&a), rows_csv(&b));
    }

    #[test]
    fn clean_scenario_hadcm_recovers_below_0_05_mm() {
        let config = ExperimentConfig {
            trials: 1,
            sweep: SweepSpec { snr_values_db: None, window_lengths: None },
            scenario: VitalSignScenario {
                dc_i: DcProfile::Constant { value: 2.0 },
                dc_q: DcProfile::Constant { value: 1.5 },
                ..VitalSignScenario::default()
            },
            ..ExperimentConfig::default()
        };
        let synth = synthesize(&config.scenario).unwrap();
        let cfg = peak_valley_config(&config.calibration, false);
        let (cal, info) = calibrate_peak_valley(&synth.iq, &cfg).unwrap();
        let h = hadcm_with(
            &cal,
            config.scenario.wavelength_m,
            &HadcmConfig { amp_i: info.amp_i, amp_q: info.amp_q, ..HadcmConfig::default() },
        )
        .unwrap();
        let rmse = crate::metrics::displacement_rmse(&h, &synth.truth).unwrap();
        assert!(rmse < 0.05, "rmse {rmse} mm");
    }

    #[test]
    fn window_sweep_noise_free_constant_dc_is_nearly_perfect() {
        let config = ExperimentConfig {
            trials: 2,
            sweep: SweepSpec { window_lengths: Some(vec![2.0]), snr_values_db: None },
            scenario: VitalSignScenario {
                dc_i: DcProfile::Constant { value: 2.0 },
                dc_q: DcProfile::Constant { value: 1.5 },
                ..VitalSignScenario::default()
            },
            ..ExperimentConfig::default()
        };
        let report = run_window_sweep(&config).unwrap();
        let pv = report
            .aggregates
            .iter()
            .find(|a| a.algorithm == "peak_valley")
            .unwrap();
        assert!((pv.e_i_mean.unwrap() - 1.0).abs() < 1e-2, "e_i {:?}", pv.e_i_mean);
        assert!((pv.e_q_mean.unwrap() - 1.0).abs() < 1e-2);
    }

    #[test]
    fn aggregates_match_recomputation_from_rows() {
        let report = run_snr_sweep(&small_config()).unwrap();
        let again = compute_aggregates(&report.rows);
        assert_eq!(report.aggregates, again);
        for a in &report.aggregates {
            let vals: Vec<f64> = report
                .rows
                .iter()
                .filter(|r| r.algorithm == a.algorithm && r.snr_db == a.snr_db)
                .filter_map(|r| r.rmse_mm)
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((mean - a.rmse_mm_mean.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_round_trip_preserves_pipeline_output() {
        let scenario = VitalSignScenario {
            dc_i: DcProfile::Constant { value: 2.0 },
            dc_q: DcProfile::Constant { value: 1.5 },
            snr_db: Some(25.0),
            seed: 7,
            ..VitalSignScenario::default()
        };
        let synth = synthesize(&scenario).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_trace(&path, &synth.iq).unwrap();
        let spec = CalibrationSpec::default();
        let from_file = demodulate_trace(&path, Algorithm::Hadcm, &spec, 0.005).unwrap();
        let in_process = analyze_record(&synth.iq, Algorithm::Hadcm, &spec, 0.005).unwrap();
        for (a, b) in from_file
            .phase
            .phase_rad
            .iter()
            .zip(&in_process.phase.phase_rad)
        {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn truncated_trace_is_rejected_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.csv");
        std::fs::write(&path, "t_s,i,q\n0.0,1.0,2.0\n").unwrap();
        match read_trace(&path) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("at least 2")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_trace_lines_are_located() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "t_s,i,q\n0.0,1.0,2.0\n0.05,oops,2.0\n").unwrap();
        match read_trace(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn jittery_trace_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("jitter.csv");
        let mut body = String::from("t_s,i,q\n");
        for k in 0..50 {
            let t = k as f64 * 0.05 + if k == 25 { 0.02 } else { 0.0 };
            body.push_str(&format!("{t},1.0,0.5\n"));
        }
        std::fs::write(&path, body).unwrap();
        assert!(matches!(read_trace(&path), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn empty_report_emits_header_only_csv() {
        let report = ExperimentReport {
            rows: vec![],
            aggregates: vec![],
            config_echo: ExperimentConfig::default(),
            tool_version: tool_version(),
            degraded: false,
            failures: vec![],
        };
        let csv = rows_csv(&report);
        assert_eq!(csv, "algorithm,snr_db,window_length_s,e_i,e_q,rmse_mm,rr_error_bpm,seed\n");
    }

    #[test]
    fn json_report_round_trips() {
        let report = run_snr_sweep(&ExperimentConfig {
            trials: 2,
            sweep: SweepSpec { snr_values_db: Some(vec![25.0]), window_lengths: None },
            ..ExperimentConfig::default()
        })
        .unwrap();
        let body = serde_json::to_string(&report).unwrap();
        let parsed: ExperimentReport = serde_json::from_str(&body).unwrap();
        assert_eq!(parsed.rows, report.rows);
        assert_eq!(compute_aggregates(&parsed.rows), parsed.aggregates);
    }

}
