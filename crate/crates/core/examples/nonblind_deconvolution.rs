//! Deconvolution with the kernel known: only the signal is updated.
//!
//! cargo run --release --example nonblind_deconvolution

use pendantss::dataset::{generate_with_noise_seed, DatasetSpec};
use pendantss::filters::FilterSpec;
use pendantss::metrics::{snr, tsnr};
use pendantss::solver::{solve, ProblemInstance, SolverConfig};
use pendantss::spoq::SpoqParams;

fn main() -> pendantss::Result<()> {
    let spec = DatasetSpec::dataset_a(0.0, 7);
    let data = generate_with_noise_seed(&spec, 0)?;
    let inst = ProblemInstance::new(data.observation.clone(), FilterSpec::new(3, 2), SpoqParams::soot(0.7), spec.kernel_len)
        .with_known_kernel(data.truth.kernel.clone());
    let cfg = SolverConfig {
        blind: false,
        ..SolverConfig::default()
    };
    let r = solve(&inst, &cfg, None, None)?;
    assert_eq!(r.pi_hat, data.truth.kernel);
    println!("{} iterations, stop: {:?}", r.iterations, r.stop_reason);
    println!("noiseless SNR_s  = {:.2} dB", snr(&data.truth.spikes, &r.s_hat)?);
    println!("noiseless TSNR_s = {:.2} dB", tsnr(&data.truth, &r.s_hat)?);
    println!("noiseless SNR_t  = {:.2} dB", snr(&data.truth.trend, &r.t_hat)?);
    Ok(())
}
