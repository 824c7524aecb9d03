//! Hyperparameter search on a known realization and repeated-noise
//! evaluation batteries.
//!
//! Solves are independent and run on the current rayon pool; results are
//! always reported in grid (or seed) order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{generate_with_noise_seed, DatasetSpec, GroundTruth};
use crate::error::{Error, Result};
use crate::filters::{cutoff_candidates, select_cutoff, CutoffSelection, FilterSpec};
use crate::metrics::{evaluate, MetricsReport};
use crate::solver::{initial_kernel, initial_signal, objective, solve, ProblemInstance, SolverConfig, StopReason};
use crate::spoq::SpoqParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub lambda_values: Vec<f64>,
    pub beta_values: Vec<f64>,
    pub eta_values: Vec<f64>,
    pub pq_pairs: Vec<(f64, f64)>,
    pub alpha: f64,
    /// Multiply `lambda_values` by [`residual_scale`] of the instance.
    pub lambda_relative: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lambda_values: vec![1e-3, 1e-2, 1e-1, 1.0, 10.0],
            beta_values: vec![1e-4, 1e-3, 1e-2],
            eta_values: vec![1e-2, 1e-1, 1.0],
            pq_pairs: vec![(1.0, 2.0), (0.75, 2.0)],
            alpha: 7e-7,
            lambda_relative: true,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let lists = [
            ("lambda_values", &self.lambda_values),
            ("beta_values", &self.beta_values),
            ("eta_values", &self.eta_values),
        ];
        for (name, list) in lists {
            if list.is_empty() {
                return Err(Error::invalid(format!("{name} is empty")));
            }
            if list.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::invalid(format!("{name} must hold positive values")));
            }
        }
        if self.pq_pairs.is_empty() {
            return Err(Error::invalid("pq_pairs is empty"));
        }
        Ok(())
    }

    /// Every combination, `(p, q)` outermost and `eta` innermost.
    pub fn points(&self, scale: f64) -> Vec<SpoqParams> {
        let mult = if self.lambda_relative { scale } else { 1.0 };
        let mut out = Vec::new();
        for &(p, q) in &self.pq_pairs {
            for &lam in &self.lambda_values {
                for &beta in &self.beta_values {
                    for &eta in &self.eta_values {
                        out.push(SpoqParams {
                            p,
                            q,
                            alpha: self.alpha,
                            beta,
                            eta,
                            lambda: lam * mult,
                        });
                    }
                }
            }
        }
        out
    }
}

/// `0.5 ||H (y - pi0 * s0)||^2` at the solver's default initialization.
pub fn residual_scale(inst: &ProblemInstance, config: &SolverConfig) -> Result<f64> {
    let s0 = initial_signal(inst.len(), config.init_level, &inst.bounds);
    let pi0 = match (&inst.known_kernel, config.blind) {
        (Some(k), false) => k.to_vec(),
        _ => initial_kernel(inst.kernel_len, config.init_kernel_sigma)?,
    };
    let data = ProblemInstance {
        spoq: inst.spoq.with_lambda(0.0),
        ..inst.clone()
    };
    objective(&s0, &pi0, &data)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    Skipped,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub params: SpoqParams,
    pub status: PointStatus,
    /// Why the point was skipped or failed.
    pub reason: Option<String>,
    pub metrics: Option<MetricsReport>,
    pub iterations: Option<usize>,
    pub stop_reason: Option<StopReason>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSearchOutcome {
    pub best: SpoqParams,
    pub best_index: usize,
    pub residual_scale: f64,
    pub rows: Vec<GridRow>,
}

fn solve_and_score(inst: &ProblemInstance, truth: &GroundTruth, config: &SolverConfig) -> Result<(MetricsReport, usize, StopReason)> {
    let r = solve(inst, config, None, None)?;
    Ok((evaluate(truth, &r)?, r.iterations, r.stop_reason))
}

/// Index of the best scored row: largest weighted score, then smallest
/// lambda, beta and eta.
pub fn best_row(rows: &[GridRow]) -> Option<usize> {
    let key = |r: &GridRow| r.metrics.map(|m| m.weighted).filter(|w| !w.is_nan());
    let mut best: Option<usize> = None;
    for (i, row) in rows.iter().enumerate() {
        let Some(w) = key(row) else { continue };
        let better = match best {
            None => true,
            Some(b) => {
                let bw = key(&rows[b]).expect("best row is scored");
                let (p, bp) = (&row.params, &rows[b].params);
                w > bw
                    || (w == bw
                        && (p.lambda, p.beta, p.eta).partial_cmp(&(bp.lambda, bp.beta, bp.eta))
                            == Some(std::cmp::Ordering::Less))
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}

/// Solves at every valid grid point and keeps the one maximizing
/// `2 snr_s + snr_pi + snr_t`. Points violating the penalty condition are
/// skipped and reported.
pub fn grid_search(
    inst: &ProblemInstance,
    truth: &GroundTruth,
    grid: &GridSpec,
    config: &SolverConfig,
) -> Result<GridSearchOutcome> {
    grid.validate()?;
    let scale = residual_scale(inst, config)?;
    let points = grid.points(scale);
    let rows: Vec<GridRow> = points
        .into_par_iter()
        .map(|params| {
            if let Err(e) = params.validate() {
                log::info!("skipping grid point {params:?}: {e}");
                return GridRow {
                    params,
                    status: PointStatus::Skipped,
                    reason: Some(e.to_string()),
                    metrics: None,
                    iterations: None,
                    stop_reason: None,
                };
            }
            let point = ProblemInstance {
                spoq: params,
                ..inst.clone()
            };
            match solve_and_score(&point, truth, config) {
                Ok((m, it, stop)) => GridRow {
                    params,
                    status: PointStatus::Ok,
                    reason: None,
                    metrics: Some(m),
                    iterations: Some(it),
                    stop_reason: Some(stop),
                },
                Err(e) => GridRow {
                    params,
                    status: PointStatus::Failed,
                    reason: Some(e.to_string()),
                    metrics: None,
                    iterations: None,
                    stop_reason: None,
                },
            }
        })
        .collect();
    let best_index = best_row(&rows).ok_or_else(|| {
        Error::EmptyGrid(format!(
            "none of the {} grid points could be scored",
            rows.len()
        ))
    })?;
    Ok(GridSearchOutcome {
        best: rows[best_index].params,
        best_index,
        residual_scale: scale,
        rows,
    })
}

/// Picks the low-pass cutoff among the spectral peaks of the observation by
/// the weighted score of a full solve at each candidate.
pub fn tune_cutoff(
    inst: &ProblemInstance,
    truth: &GroundTruth,
    config: &SolverConfig,
    transition_bins: usize,
) -> Result<CutoffSelection> {
    let cands = cutoff_candidates(&inst.observation, transition_bins);
    let scores: Vec<f64> = cands
        .candidates
        .par_iter()
        .map(|spec| {
            let point = ProblemInstance {
                filter: *spec,
                ..inst.clone()
            };
            solve_and_score(&point, truth, config).map_or(f64::NAN, |(m, _, _)| m.weighted)
        })
        .collect();
    let mut i = 0;
    let mut sel = select_cutoff(&cands.candidates, |_| {
        i += 1;
        scores[i - 1]
    })?;
    sel.fallback = cands.fallback;
    Ok(sel)
}

/// Noise seeds used for evaluation; seed 0 is reserved for tuning.
pub fn evaluation_seeds(n: usize) -> Vec<u64> {
    (1..=n as u64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryRow {
    pub noise_seed: u64,
    pub metrics: Option<MetricsReport>,
    pub iterations: Option<usize>,
    pub stop_reason: Option<StopReason>,
    pub error: Option<String>,
}

/// Per-metric statistics over the successful seeds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
    pub median: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatterySummary {
    pub rows: Vec<BatteryRow>,
    /// Number of seeds that solved successfully.
    pub count: usize,
    pub failures: usize,
    /// Statistics for `snr_s, tsnr_s, snr_t, snr_pi, weighted`, in that order.
    pub stats: Vec<(String, MetricStats)>,
}

impl BatterySummary {
    pub fn stat(&self, name: &str) -> Option<MetricStats> {
        self.stats.iter().find(|(n, _)| n == name).map(|(_, s)| *s)
    }
}

pub fn metric_stats(values: &[f64]) -> MetricStats {
    let n = values.len();
    if n == 0 {
        return MetricStats {
            mean: f64::NAN,
            std: f64::NAN,
            median: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    MetricStats { mean, std, median }
}

/// Aggregates per-seed rows; failed rows are counted and left out.
pub fn summarize(rows: Vec<BatteryRow>) -> BatterySummary {
    let ok: Vec<MetricsReport> = rows.iter().filter_map(|r| r.metrics).collect();
    let stats = MetricsReport::NAMES
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let vals: Vec<f64> = ok.iter().map(|m| m.values()[j]).collect();
            (name.to_string(), metric_stats(&vals))
        })
        .collect();
    BatterySummary {
        count: ok.len(),
        failures: rows.len() - ok.len(),
        rows,
        stats,
    }
}

/// Builds the problem for one realization. Non-blind configurations use
/// the true kernel.
pub fn instance_for(
    observation: crate::signal::SignalVector,
    truth: &GroundTruth,
    filter: FilterSpec,
    params: SpoqParams,
    config: &SolverConfig,
) -> ProblemInstance {
    let inst = ProblemInstance::new(observation, filter, params, truth.kernel.len());
    if config.blind {
        inst
    } else {
        inst.with_known_kernel(truth.kernel.clone())
    }
}

/// Solves one fresh-noise realization of `spec` per seed, keeping spikes,
/// kernel and trend fixed.
pub fn run_trial_battery(
    spec: &DatasetSpec,
    filter: FilterSpec,
    params: SpoqParams,
    config: &SolverConfig,
    noise_seeds: &[u64],
) -> Result<BatterySummary> {
    if noise_seeds.len() < 2 {
        return Err(Error::invalid("a battery needs at least two seeds"));
    }
    params.validate()?;
    config.validate()?;
    let rows: Vec<BatteryRow> = noise_seeds
        .par_iter()
        .map(|&seed| {
            let run = generate_with_noise_seed(spec, seed).and_then(|d| {
                let inst = instance_for(d.observation, &d.truth, filter, params, config);
                solve_and_score(&inst, &d.truth, config)
            });
            match run {
                Ok((m, it, stop)) => BatteryRow {
                    noise_seed: seed,
                    metrics: Some(m),
                    iterations: Some(it),
                    stop_reason: Some(stop),
                    error: None,
                },
                Err(e) => BatteryRow {
                    noise_seed: seed,
                    metrics: None,
                    iterations: None,
                    stop_reason: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(summarize(rows))
}
