//! Compare peak-valley and circle-fit DC removal on a drifting-DC record.

use radar_vitals::calibration::{
    circle_fit_windowed_dc, peak_valley_coverage_dc, PeakValleyConfig,
};
use radar_vitals::metrics::dc_relative_error;
use radar_vitals::signal_model::{synthesize, VitalSignScenario};
use radar_vitals::IqSeries;

fn main() -> radar_vitals::Result<()> {
    let scenario = VitalSignScenario { snr_db: Some(15.0), seed: 3, ..Default::default() };
    let out = synthesize(&scenario)?;
    let fs = out.iq.sample_rate_hz;

    println!("method       window   e_I      e_Q");
    for window_s in [1.0, 2.0, 4.0] {
        let cfg = PeakValleyConfig { window_s, ..Default::default() };
        let pv_i = peak_valley_coverage_dc(&out.iq.i, fs, &cfg);
        let pv_q = peak_valley_coverage_dc(&out.iq.q, fs, &cfg);
        let pv = IqSeries::new(
            out.iq.i.iter().zip(&pv_i).map(|(x, d)| x - d).collect(),
            out.iq.q.iter().zip(&pv_q).map(|(x, d)| x - d).collect(),
            fs,
        )?;
        let (ei, eq) = dc_relative_error(&out.iq, &pv, &out.dc_i, &out.dc_q)?;
        println!("peak-valley  {window_s:.0} s      {ei:.3}    {eq:.3}");

        let (cf_i, cf_q) = circle_fit_windowed_dc(&out.iq, window_s, 0.15);
        let cf = IqSeries::new(
            out.iq.i.iter().zip(&cf_i).map(|(x, d)| x - d).collect(),
            out.iq.q.iter().zip(&cf_q).map(|(x, d)| x - d).collect(),
            fs,
        )?;
        let (ei, eq) = dc_relative_error(&out.iq, &cf, &out.dc_i, &out.dc_q)?;
        println!("circle-fit   {window_s:.0} s      {ei:.3}    {eq:.3}");
    }
    println!("(e = fraction of the time-varying DC removed; 1.0 is perfect)");
    Ok(())
}
