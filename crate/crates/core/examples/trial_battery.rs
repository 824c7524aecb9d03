//! Mean, standard deviation and median of the metrics over independent
//! noise realizations, for both penalty shapes.
//!
//! cargo run --release --example trial_battery

use pendantss::dataset::DatasetSpec;
use pendantss::filters::FilterSpec;
use pendantss::solver::SolverConfig;
use pendantss::spoq::SpoqParams;
use pendantss::tuning::{evaluation_seeds, run_trial_battery};

fn main() -> pendantss::Result<()> {
    let spec = DatasetSpec::dataset_a(0.005, 7);
    let seeds = evaluation_seeds(8);
    for params in [SpoqParams::soot(2.058), SpoqParams::soot(0.2058).with_pq(0.75, 2.0)] {
        let summary = run_trial_battery(&spec, FilterSpec::new(3, 2), params, &SolverConfig::default(), &seeds)?;
        println!("p = {}, q = {}: {} runs, {} failed", params.p, params.q, summary.count, summary.failures);
        for (name, st) in &summary.stats {
            println!("  {name:8} {:7.2} ± {:5.2} (median {:.2})", st.mean, st.std, st.median);
        }
    }
    Ok(())
}
