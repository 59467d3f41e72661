//! Synthesize one quadrature baseband record and print its basic shape.

use radar_vitals::signal_model::{synthesize, VitalSignScenario};

fn main() -> radar_vitals::Result<()> {
    let scenario = VitalSignScenario { snr_db: Some(20.0), seed: 42, ..Default::default() };
    let out = synthesize(&scenario)?;

    let n = out.iq.len();
    let span = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (ilo, ihi) = span(&out.iq.i);
    let (qlo, qhi) = span(&out.iq.q);
    let (dlo, dhi) = span(&out.truth.displacement_m);

    println!("{n} samples at {} Hz ({} s)", scenario.sample_rate_hz, scenario.duration_s);
    println!("I range      [{ilo:+.3}, {ihi:+.3}]");
    println!("Q range      [{qlo:+.3}, {qhi:+.3}]");
    println!("DC_I(t)      starts {:.3}, ends {:.3}", out.dc_i[0], out.dc_i[n - 1]);
    println!("DC_Q(t)      starts {:.3}, ends {:.3}", out.dc_q[0], out.dc_q[n - 1]);
    println!("displacement [{:+.2}, {:+.2}] mm", dlo * 1e3, dhi * 1e3);
    Ok(())
}
