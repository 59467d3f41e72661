//! Small window-length sweep: peak-valley vs circle-fit DC-removal quality.

use radar_vitals::harness::{run_window_sweep, ExperimentConfig, SweepSpec};
use radar_vitals::signal_model::VitalSignScenario;

fn main() -> radar_vitals::Result<()> {
    let config = ExperimentConfig {
        scenario: VitalSignScenario { snr_db: Some(15.0), ..Default::default() },
        sweep: SweepSpec {
            window_lengths: Some(vec![1.0, 2.0, 4.0]),
            ..Default::default()
        },
        trials: 10,
        base_seed: 5,
        ..Default::default()
    };
    let report = run_window_sweep(&config)?;

    println!("method       window (s)   e_I mean   e_Q mean");
    for agg in &report.aggregates {
        println!(
            "{:<12} {:<12} {:<10.3} {:.3}",
            agg.algorithm,
            agg.window_length_s.unwrap(),
            agg.e_i_mean.unwrap(),
            agg.e_q_mean.unwrap(),
        );
    }
    Ok(())
}
