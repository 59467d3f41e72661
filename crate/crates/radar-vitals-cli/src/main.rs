use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

use radar_vitals::harness::{
    analyze_record, emit_report, read_trace, run_snr_sweep, run_window_sweep, write_trace,
    Algorithm, ExperimentConfig, ReportFormat,
};
use radar_vitals::signal_model::synthesize;

#[derive(Parser)]
#[command(name = "radar-vitals", version, about = "Radar vital-sign DSP experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Atan,
    Mdacm,
    Acaa,
    Hadcm,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Atan => Algorithm::Atan,
            AlgorithmArg::Mdacm => Algorithm::Mdacm,
            AlgorithmArg::Acaa => Algorithm::Acaa,
            AlgorithmArg::Hadcm => Algorithm::Hadcm,
        }
    }
}

#[derive(clap::Args)]
struct CommonArgs {
    /// TOML experiment config; defaults apply for any omitted field.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the base seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one I/Q record and write it as a t_s,i,q trace.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Monte-Carlo sweep of DC-removal quality over window lengths.
    SweepWindow {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Monte-Carlo sweep of displacement RMSE over SNR points.
    SweepSnr {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Demodulate a recorded trace file and estimate the respiration rate.
    Demod {
        #[command(flatten)]
        common: CommonArgs,
        /// Input trace file (t_s,i,q CSV).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "hadcm")]
        algorithm: AlgorithmArg,
    },
}

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig, String> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            toml::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.base_seed = seed;
        config.scenario.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output_dir = out.clone();
    }
    Ok(config)
}

fn run() -> Result<ExitCode, String> {
    let cli = Cli::parse();
    match cli.command {
        Command::Synth { common } => {
            let config = load_config(&common)?;
            let synth = synthesize(&config.scenario).map_err(|e| e.to_string())?;
            std::fs::create_dir_all(&config.output_dir)
                .map_err(|e| format!("cannot create {}: {e}", config.output_dir.display()))?;
            let trace_path = config.output_dir.join("trace.csv");
            write_trace(&trace_path, &synth.iq).map_err(|e| e.to_string())?;
            let echo = match common.format {
                Format::Json => serde_json::to_string_pretty(&config.scenario)
                    .map_err(|e| e.to_string())?,
                Format::Csv => serde_json::to_string_pretty(&config.scenario)
                    .map_err(|e| e.to_string())?,
            };
            std::fs::write(config.output_dir.join("scenario.json"), echo + "\n")
                .map_err(|e| e.to_string())?;
            println!(
                "wrote {} ({} samples at {} Hz, seed {})",
                trace_path.display(),
                synth.iq.len(),
                synth.iq.sample_rate_hz,
                config.scenario.seed
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::SweepWindow { common } => {
            let mut config = load_config(&common)?;
            if config.sweep.window_lengths.is_none() {
                config.sweep.window_lengths = Some(vec![1.0, 2.0, 3.0, 4.0]);
            }
            let report = run_window_sweep(&config).map_err(|e| e.to_string())?;
            emit_report(&report, common.format.into(), &config.output_dir)
                .map_err(|e| e.to_string())?;
            finish_sweep(&report, &config)
        }
        Command::SweepSnr { common } => {
            let mut config = load_config(&common)?;
            if config.sweep.snr_values_db.is_none() {
                config.sweep.snr_values_db = Some(vec![10.0, 15.0, 20.0, 25.0, 30.0]);
            }
            let report = run_snr_sweep(&config).map_err(|e| e.to_string())?;
            emit_report(&report, common.format.into(), &config.output_dir)
                .map_err(|e| e.to_string())?;
            finish_sweep(&report, &config)
        }
        Command::Demod { common, input, algorithm } => {
            let config = load_config(&common)?;
            let iq = read_trace(&input).map_err(|e| e.to_string())?;
            let analysis = analyze_record(
                &iq,
                algorithm.into(),
                &config.calibration,
                config.scenario.wavelength_m,
            )
            .map_err(|e| e.to_string())?;
            std::fs::create_dir_all(&config.output_dir)
                .map_err(|e| format!("cannot create {}: {e}", config.output_dir.display()))?;
            match common.format {
                Format::Csv => {
                    let mut body = String::from("t_s,displacement_m\n");
                    let dt = 1.0 / analysis.phase.sample_rate_hz;
                    for k in analysis.phase.valid_range.clone() {
                        body.push_str(&format!(
                            "{},{}\n",
                            k as f64 * dt,
                            analysis.phase.displacement_m[k]
                        ));
                    }
                    std::fs::write(config.output_dir.join("displacement.csv"), body)
                        .map_err(|e| e.to_string())?;
                }
                Format::Json => {
                    let valid = analysis.phase.valid_range.clone();
                    let body = serde_json::json!({
                        "rate_bpm": analysis.rate_bpm,
                        "sample_rate_hz": analysis.phase.sample_rate_hz,
                        "valid_range": [valid.start, valid.end],
                        "displacement_m": &analysis.phase.displacement_m[valid],
                        "spectrum": analysis.spectrum,
                    });
                    std::fs::write(
                        config.output_dir.join("demod.json"),
                        serde_json::to_string_pretty(&body).map_err(|e| e.to_string())? + "\n",
                    )
                    .map_err(|e| e.to_string())?;
                }
            }
            println!("estimated rate: {:.2} bpm", analysis.rate_bpm);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn finish_sweep(
    report: &radar_vitals::harness::ExperimentReport,
    config: &ExperimentConfig,
) -> Result<ExitCode, String> {
    println!(
        "{} rows, {} aggregates -> {}",
        report.rows.len(),
        report.aggregates.len(),
        config.output_dir.display()
    );
    if report.degraded {
        eprintln!("warning: degraded run ({} recorded failures)", report.failures.len());
        for f in &report.failures {
            eprintln!("  {f}");
        }
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
