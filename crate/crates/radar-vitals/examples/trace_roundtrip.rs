//! Write a trace CSV, read it back, demodulate it, and report the
//! respiration rate and spectral peak.

use radar_vitals::harness::{
    demodulate_trace, write_trace, Algorithm, CalibrationSpec,
};
use radar_vitals::signal_model::{synthesize, VitalSignScenario};

fn main() -> radar_vitals::Result<()> {
    let scenario = VitalSignScenario {
        resp_freq_hz: 16.0 / 60.0,
        snr_db: Some(20.0),
        seed: 9,
        ..Default::default()
    };
    let out = synthesize(&scenario)?;

    let dir = std::env::temp_dir().join("radar-vitals-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("trace.csv");
    write_trace(&path, &out.iq)?;
    println!("wrote {} samples to {}", out.iq.len(), path.display());

    let analysis = demodulate_trace(
        &path,
        Algorithm::Hadcm,
        &CalibrationSpec::default(),
        scenario.wavelength_m,
    )?;

    let peak = analysis
        .spectrum
        .amplitude_norm
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| analysis.spectrum.freq_hz[k])
        .unwrap();
    println!("spectral peak    {peak:.3} Hz (truth {:.3} Hz)", scenario.resp_freq_hz);
    println!("respiration rate {:.2} bpm (truth {:.2})", analysis.rate_bpm, scenario.resp_freq_hz * 60.0);
    Ok(())
}
