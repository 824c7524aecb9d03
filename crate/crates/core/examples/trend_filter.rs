//! The low-pass / high-pass split used to separate trend and peaks, and the
//! cutoff selection from spectral peaks.
//!
//! cargo run --release --example trend_filter

use pendantss::dataset::{generate_with_noise_seed, DatasetSpec};
use pendantss::filters::{apply_highpass, apply_lowpass, cutoff_candidates, spectral_peaks, FilterSpec, LowPassFilter};
use pendantss::metrics::snr;
use pendantss::solver::SolverConfig;
use pendantss::spoq::SpoqParams;
use pendantss::tuning::{instance_for, tune_cutoff};

fn main() -> pendantss::Result<()> {
    let spec = DatasetSpec::dataset_a(0.005, 7);
    let d = generate_with_noise_seed(&spec, 0)?;
    let y = d.observation.as_slice();

    let f = FilterSpec::new(3, 2);
    let lp = LowPassFilter::new(f, y.len())?;
    println!("gain by bin: {:?}", &lp.response()[..8]);

    // L + H = Id.
    let low = apply_lowpass(y, f)?;
    let high = apply_highpass(y, f)?;
    let worst = y.iter().zip(low.iter().zip(&high)).map(|(v, (a, b))| (v - a - b).abs()).fold(0.0, f64::max);
    println!("max |y - Ly - Hy| = {worst:.2e}");
    println!("SNR of Ly against the true trend: {:.2} dB", snr(&d.truth.trend, &low)?);

    println!("spectral peaks: {:?}", spectral_peaks(y, 8));
    let cands = cutoff_candidates(y, 2);
    println!("cutoff candidates: {:?}", cands.candidates.iter().map(|c| c.cutoff_bin).collect::<Vec<_>>());

    let cfg = SolverConfig::default();
    let inst = instance_for(d.observation.clone(), &d.truth, f, SpoqParams::soot(2.058), &cfg);
    let sel = tune_cutoff(&inst, &d.truth, &cfg, 2)?;
    for (c, score) in &sel.scores {
        println!("  cutoff {:2}: weighted {score:.2}", c.cutoff_bin);
    }
    println!("selected cutoff bin {}", sel.spec.cutoff_bin);
    Ok(())
}
