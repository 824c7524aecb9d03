//! Blind recovery of spikes, kernel and trend on dataset A.
//!
//! cargo run --release --example blind_deconvolution

use pendantss::config::preset;
use pendantss::dataset::generate_with_noise_seed;
use pendantss::metrics::evaluate;
use pendantss::solver::{center_shift_postprocess, solve, ProblemInstance};

fn main() -> pendantss::Result<()> {
    // Dataset A at 0.5% noise with the tuned SOOT parameters.
    let cfg = preset("a-0.5-soot")?;
    let spec = cfg.dataset.clone().expect("preset has a dataset");
    let data = generate_with_noise_seed(&spec, 1)?;
    let inst = ProblemInstance::new(data.observation.clone(), cfg.filter, cfg.spoq, spec.kernel_len);
    let result = solve(&inst, &cfg.solver, None, None)?;
    println!(
        "{} iterations ({:?}), objective {:.4} -> {:.4}",
        result.iterations,
        result.stop_reason,
        result.objective_trace[0],
        result.objective_trace.last().unwrap()
    );
    println!(
        "max trust-region trials per iteration: {}",
        result.tr_trials_per_iter.iter().max().unwrap_or(&0)
    );
    println!("certificate failures: {}", result.certificate_failures);

    let m = evaluate(&data.truth, &result)?;
    println!(
        "SNR_s {:.2} dB, TSNR_s {:.2} dB, SNR_t {:.2} dB, SNR_pi {:.2} dB",
        m.snr_s, m.tsnr_s, m.snr_t, m.snr_pi
    );

    let (s, _) = center_shift_postprocess(&result.s_hat, &result.pi_hat);
    println!("recovered spikes vs truth:");
    for &i in &data.truth.support {
        println!("  n = {i:3}: true {:6.3}, estimate {:6.3}", data.truth.spikes[i], s[i]);
    }
    Ok(())
}
