//! Small Monte-Carlo SNR sweep; prints the mean RMSE table.
//!
//! Uses 10 trials per point so it finishes in seconds; the benchmark
//! configuration uses 100.

use radar_vitals::harness::{run_snr_sweep, ExperimentConfig, SweepSpec};

fn main() -> radar_vitals::Result<()> {
    let config = ExperimentConfig {
        sweep: SweepSpec {
            snr_values_db: Some(vec![10.0, 20.0, 30.0]),
            ..Default::default()
        },
        trials: 10,
        base_seed: 1,
        ..Default::default()
    };
    let report = run_snr_sweep(&config)?;

    println!("algorithm   snr (dB)   rmse mean (mm)   rmse std");
    for agg in &report.aggregates {
        println!(
            "{:<11} {:<10} {:<16.3} {:.3}",
            agg.algorithm,
            agg.snr_db.unwrap(),
            agg.rmse_mm_mean.unwrap(),
            agg.rmse_mm_std.unwrap(),
        );
    }
    if report.degraded {
        println!("warning: some sweep points lost more than 20% of their trials");
    }
    Ok(())
}
