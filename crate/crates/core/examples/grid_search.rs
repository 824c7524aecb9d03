//! Tunes (lambda, beta, eta) on the tuning realization of dataset A.
//!
//! cargo run --release --example grid_search

use pendantss::dataset::{generate_with_noise_seed, DatasetSpec};
use pendantss::filters::FilterSpec;
use pendantss::solver::SolverConfig;
use pendantss::spoq::SpoqParams;
use pendantss::tuning::{grid_search, instance_for, GridSpec, PointStatus};

fn main() -> pendantss::Result<()> {
    let spec = DatasetSpec::dataset_a(0.005, 7);
    let d = generate_with_noise_seed(&spec, 0)?;
    let cfg = SolverConfig::default();
    let inst = instance_for(d.observation.clone(), &d.truth, FilterSpec::new(3, 2), SpoqParams::default(), &cfg);
    let grid = GridSpec {
        beta_values: vec![1e-4, 5e-3],
        eta_values: vec![0.1, 1.0],
        pq_pairs: vec![(1.0, 2.0)],
        ..GridSpec::default()
    };
    let out = grid_search(&inst, &d.truth, &grid, &cfg)?;
    println!("residual scale {:.3}", out.residual_scale);
    println!("{:>10} {:>8} {:>6} {:>9}", "lambda", "beta", "eta", "weighted");
    for r in &out.rows {
        match (r.status, r.metrics) {
            (PointStatus::Ok, Some(m)) => println!(
                "{:10.4} {:8.0e} {:6.2} {:9.2}",
                r.params.lambda, r.params.beta, r.params.eta, m.weighted
            ),
            _ => println!(
                "{:10.4} {:8.0e} {:6.2} {:?}: {}",
                r.params.lambda,
                r.params.beta,
                r.params.eta,
                r.status,
                r.reason.as_deref().unwrap_or("")
            ),
        }
    }
    println!("best: {:?}", out.best);
    Ok(())
}
