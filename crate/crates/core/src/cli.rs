//! Batch commands behind the `pendantss` binary. Each command reads one
//! configuration, computes everything in memory and only then writes its
//! artifacts, each through a temporary file renamed into place.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dataset::{generate_with_noise_seed, Dataset, DatasetDocument, GroundTruth};
use crate::error::{Error, Result};
use crate::filters::FilterSpec;
use crate::metrics::{evaluate, MetricsReport};
use crate::signal::SignalVector;
use crate::solver::{center_shift_postprocess, solve, ProblemInstance, SolveResult};
use crate::spoq::SpoqParams;
use crate::tuning::{
    best_row, evaluation_seeds, grid_search, instance_for, metric_stats, run_trial_battery, tune_cutoff,
    BatterySummary, GridRow, PointStatus,
};

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VALIDATION: i32 = 1;
    pub const IO: i32 = 2;
    pub const INVARIANT: i32 = 3;
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => exit::IO,
        Error::Invariant(_) => exit::INVARIANT,
        _ => exit::VALIDATION,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Generate,
    Solve,
    Gridsearch,
    Battery,
    Report,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub command: Command,
    /// File path or `preset:<name>`. Optional for `report`.
    pub config: Option<String>,
    pub output_dir: PathBuf,
    /// Noise seed of the realization (`generate`, `solve`, `gridsearch`),
    /// or the offset of the battery seeds.
    pub seed: u64,
}

/// Artifact file names.
pub mod files {
    pub const DATASET: &str = "dataset.json";
    pub const DATASET_CSV: &str = "dataset.csv";
    pub const SOLVE_RESULT: &str = "solve_result.json";
    pub const TRACE: &str = "objective_trace.csv";
    pub const SIGNAL_OVERLAY: &str = "signal_overlay.csv";
    pub const KERNEL_OVERLAY: &str = "kernel_overlay.csv";
    pub const TREND_OVERLAY: &str = "trend_overlay.csv";
    pub const METRICS: &str = "metrics.json";
    pub const GRID_SCORES: &str = "grid_scores.csv";
    pub const CUTOFF_SCORES: &str = "cutoff_scores.csv";
    pub const BEST_PARAMS: &str = "best_params.json";
    pub const BATTERY: &str = "battery.csv";
    pub const BATTERY_SUMMARY: &str = "battery_summary.json";
    pub const REPORT: &str = "report.md";
}

/// Artifacts produced by a command, written together once complete.
#[derive(Default)]
struct Artifacts(Vec<(&'static str, Vec<u8>)>);

impl Artifacts {
    fn json<T: Serialize>(&mut self, name: &'static str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
        bytes.push(b'\n');
        self.0.push((name, bytes));
        Ok(())
    }

    fn csv(&mut self, name: &'static str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Internal(e.to_string());
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(&r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
        self.0.push((name, bytes));
        Ok(())
    }

    fn text(&mut self, name: &'static str, text: String) {
        self.0.push((name, text.into_bytes()));
    }

    fn write(self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for (name, bytes) in self.0 {
            let path = dir.join(name);
            write_atomic(&path, &bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Full round-trip formatting for table cells.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn check_output_dir(dir: &Path) -> Result<()> {
    let meta = std::fs::metadata(dir).map_err(|e| Error::io(dir, e))?;
    if !meta.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotADirectory, "output path is not a directory"),
        ));
    }
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Observation and (when known) ground truth for a configuration.
struct Data {
    observation: SignalVector,
    truth: Option<GroundTruth>,
    kernel_len: usize,
    document: DatasetDocument,
}

fn load_data(cfg: &RunConfig, seed: u64) -> Result<Data> {
    if let Some(spec) = &cfg.dataset {
        let d: Dataset = generate_with_noise_seed(spec, seed)?;
        let document = DatasetDocument::from_parts(spec, &d.truth, &d.observation);
        return Ok(Data {
            kernel_len: spec.kernel_len,
            observation: d.observation,
            truth: Some(d.truth),
            document,
        });
    }
    let path = cfg.dataset_path.as_ref().expect("validated configuration");
    let document: DatasetDocument = read_json(path)?;
    document.validate()?;
    let kernel_len = cfg
        .kernel_len
        .or(document.kernel.as_ref().map(|k| k.len()))
        .or(document.spec.as_ref().map(|s| s.kernel_len))
        .ok_or_else(|| Error::Format {
            path: path.display().to_string(),
            message: "kernel length unknown: set `kernel_len` or include a kernel or spec".into(),
        })?;
    Ok(Data {
        observation: document.observation.clone(),
        truth: document.ground_truth(),
        kernel_len,
        document,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestParams {
    pub filter: FilterSpec,
    pub spoq: SpoqParams,
    pub weighted: f64,
    pub residual_scale: f64,
}

/// Filter and penalty, taken from `params_path` when given.
fn model_params(cfg: &RunConfig) -> Result<(FilterSpec, SpoqParams)> {
    match &cfg.params_path {
        Some(p) => {
            let best: BestParams = read_json(p)?;
            best.spoq.validate()?;
            Ok((best.filter, best.spoq))
        }
        None => Ok((cfg.filter, cfg.spoq)),
    }
}

fn load_config(m: &RunManifest) -> Result<RunConfig> {
    let source = m
        .config
        .as_deref()
        .ok_or_else(|| Error::invalid("this command needs --config"))?;
    let cfg = RunConfig::load(source)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one command and returns the paths written.
pub fn run(m: &RunManifest) -> Result<Vec<PathBuf>> {
    check_output_dir(&m.output_dir)?;
    let arts = match m.command {
        Command::Generate => cmd_generate(&load_config(m)?, m.seed)?,
        Command::Solve => cmd_solve(&load_config(m)?, m.seed)?,
        Command::Gridsearch => cmd_gridsearch(&load_config(m)?, m.seed)?,
        Command::Battery => cmd_battery(&load_config(m)?, m.seed)?,
        Command::Report => {
            let (text, findings) = validate_artifacts(&m.output_dir)?;
            print!("{text}");
            let mut arts = Artifacts::default();
            arts.text(files::REPORT, text);
            let written = arts.write(&m.output_dir)?;
            if let Some(f) = findings.iter().find(|f| !f.passed) {
                return Err(Error::Invariant(format!("{}: {}", f.invariant, f.detail)));
            }
            return Ok(written);
        }
    };
    arts.write(&m.output_dir)
}

fn cmd_generate(cfg: &RunConfig, seed: u64) -> Result<Artifacts> {
    if cfg.dataset.is_none() {
        return Err(Error::invalid("generate needs a `dataset` specification"));
    }
    let data = load_data(cfg, seed)?;
    let truth = data.truth.as_ref().expect("synthetic data has ground truth");
    let mut arts = Artifacts::default();
    arts.json(files::DATASET, &data.document)?;
    let rows = (0..data.observation.len())
        .map(|i| {
            vec![
                i.to_string(),
                num(data.observation[i]),
                num(truth.trend[i]),
                num(truth.spikes[i]),
            ]
        })
        .collect();
    arts.csv(files::DATASET_CSV, &["index", "observation", "trend", "spikes"], rows)?;
    Ok(arts)
}

fn solve_artifacts(arts: &mut Artifacts, data: &Data, result: &SolveResult) -> Result<()> {
    arts.json(files::SOLVE_RESULT, result)?;
    let trace = result
        .objective_trace
        .iter()
        .enumerate()
        .map(|(i, v)| vec![i.to_string(), num(*v)])
        .collect();
    arts.csv(files::TRACE, &["iteration", "objective"], trace)?;

    let (s, pi) = center_shift_postprocess(&result.s_hat, &result.pi_hat);
    let truth = data.truth.as_ref();
    let n = s.len();
    let signal = (0..n)
        .map(|i| vec![i.to_string(), num(s[i]), opt_num(truth.map(|t| t.spikes[i]))])
        .collect();
    arts.csv(files::SIGNAL_OVERLAY, &["index", "estimate", "truth"], signal)?;
    let kernel = (0..pi.len())
        .map(|l| vec![l.to_string(), num(pi[l]), opt_num(truth.map(|t| t.kernel[l]))])
        .collect();
    arts.csv(files::KERNEL_OVERLAY, &["tap", "estimate", "truth"], kernel)?;
    let trend = (0..n)
        .map(|i| {
            vec![
                i.to_string(),
                num(data.observation[i]),
                num(result.t_hat[i]),
                opt_num(truth.map(|t| t.trend[i])),
            ]
        })
        .collect();
    arts.csv(files::TREND_OVERLAY, &["index", "observation", "estimate", "truth"], trend)?;
    if let Some(t) = truth {
        arts.json(files::METRICS, &evaluate(t, result)?)?;
    }
    Ok(())
}

fn cmd_solve(cfg: &RunConfig, seed: u64) -> Result<Artifacts> {
    let data = load_data(cfg, seed)?;
    let (filter, spoq) = model_params(cfg)?;
    filter.validate(data.observation.len())?;
    let mut inst = ProblemInstance::new(data.observation.clone(), filter, spoq, data.kernel_len);
    if !cfg.solver.blind {
        let k = data
            .document
            .kernel
            .clone()
            .ok_or_else(|| Error::invalid("non-blind solve needs a kernel in the dataset"))?;
        inst = inst.with_known_kernel(k);
    }
    let result = solve(&inst, &cfg.solver, None, None)?;
    log::info!(
        "solve finished after {} iterations ({:?})",
        result.iterations,
        result.stop_reason
    );
    let mut arts = Artifacts::default();
    solve_artifacts(&mut arts, &data, &result)?;
    Ok(arts)
}

const METRIC_COLUMNS: [&str; 5] = MetricsReport::NAMES;

fn grid_table(rows: &[GridRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            let p = &r.params;
            let mut cells = vec![num(p.p), num(p.q), num(p.lambda), num(p.beta), num(p.eta), num(p.alpha)];
            cells.push(
                match r.status {
                    PointStatus::Ok => "ok",
                    PointStatus::Skipped => "skipped",
                    PointStatus::Failed => "failed",
                }
                .into(),
            );
            match r.metrics {
                Some(m) => cells.extend(m.values().iter().map(|v| num(*v))),
                None => cells.extend(std::iter::repeat_n(String::new(), 5)),
            }
            cells.push(r.iterations.map(|i| i.to_string()).unwrap_or_default());
            cells.push(r.reason.clone().unwrap_or_default());
            cells
        })
        .collect()
}

const GRID_HEADER: [&str; 14] = [
    "p", "q", "lambda", "beta", "eta", "alpha", "status", "snr_s", "tsnr_s", "snr_t", "snr_pi", "weighted",
    "iterations", "reason",
];

fn cmd_gridsearch(cfg: &RunConfig, seed: u64) -> Result<Artifacts> {
    let data = load_data(cfg, seed)?;
    let truth = data
        .truth
        .as_ref()
        .ok_or_else(|| Error::invalid("grid search needs a dataset with ground truth"))?;
    let mut arts = Artifacts::default();
    let mut inst = instance_for(data.observation.clone(), truth, cfg.filter, cfg.spoq, &cfg.solver);
    if cfg.tune_cutoff {
        let sel = tune_cutoff(&inst, truth, &cfg.solver, cfg.filter.transition_bins)?;
        let rows = sel
            .scores
            .iter()
            .map(|(f, s)| vec![f.cutoff_bin.to_string(), f.transition_bins.to_string(), num(*s)])
            .collect();
        arts.csv(files::CUTOFF_SCORES, &["cutoff_bin", "transition_bins", "weighted"], rows)?;
        log::info!("selected cutoff bin {}", sel.spec.cutoff_bin);
        inst.filter = sel.spec;
    }
    let out = grid_search(&inst, truth, &cfg.grid, &cfg.solver)?;
    arts.csv(files::GRID_SCORES, &GRID_HEADER, grid_table(&out.rows))?;
    let weighted = out.rows[out.best_index].metrics.expect("best row is scored").weighted;
    arts.json(
        files::BEST_PARAMS,
        &BestParams {
            filter: inst.filter,
            spoq: out.best,
            weighted,
            residual_scale: out.residual_scale,
        },
    )?;
    Ok(arts)
}

const BATTERY_HEADER: [&str; 16] = [
    "kind", "noise_seed", "snr_s", "tsnr_s", "snr_t", "snr_pi", "weighted", "snr_s_std", "tsnr_s_std", "snr_t_std",
    "snr_pi_std", "weighted_std", "iterations", "stop_reason", "count", "error",
];

fn battery_table(s: &BatterySummary) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = s
        .rows
        .iter()
        .map(|r| {
            let mut c = vec!["seed".to_string(), r.noise_seed.to_string()];
            match r.metrics {
                Some(m) => c.extend(m.values().iter().map(|v| num(*v))),
                None => c.extend(std::iter::repeat_n(String::new(), 5)),
            }
            c.extend(std::iter::repeat_n(String::new(), 5));
            c.push(r.iterations.map(|i| i.to_string()).unwrap_or_default());
            c.push(
                r.stop_reason
                    .map(|s| serde_json::to_value(s).expect("enum").as_str().unwrap_or("").to_string())
                    .unwrap_or_default(),
            );
            c.push(String::new());
            c.push(r.error.clone().unwrap_or_default());
            c
        })
        .collect();
    let mut summary = vec!["summary".to_string(), String::new()];
    summary.extend(s.stats.iter().map(|(_, st)| num(st.mean)));
    summary.extend(s.stats.iter().map(|(_, st)| num(st.std)));
    summary.extend([String::new(), String::new(), s.count.to_string()]);
    summary.push(if s.failures > 0 {
        format!("{} failed", s.failures)
    } else {
        String::new()
    });
    rows.push(summary);
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryDocument {
    pub name: Option<String>,
    pub method: String,
    pub noise_frac: f64,
    pub n_spikes: usize,
    pub filter: FilterSpec,
    pub spoq: SpoqParams,
    pub count: usize,
    pub failures: usize,
    pub metrics: Vec<(String, crate::tuning::MetricStats)>,
}

fn method_label(p: &SpoqParams) -> String {
    if p.p == 1.0 && p.q == 2.0 {
        "SOOT (p=1, q=2)".into()
    } else {
        format!("SPOQ (p={}, q={})", p.p, p.q)
    }
}

fn cmd_battery(cfg: &RunConfig, seed: u64) -> Result<Artifacts> {
    let spec = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| Error::invalid("battery needs a `dataset` specification"))?;
    let (filter, spoq) = model_params(cfg)?;
    let seeds: Vec<u64> = evaluation_seeds(cfg.battery.n_seeds)
        .into_iter()
        .map(|s| s + seed)
        .collect();
    let summary = run_trial_battery(spec, filter, spoq, &cfg.solver, &seeds)?;
    let mut arts = Artifacts::default();
    arts.csv(files::BATTERY, &BATTERY_HEADER, battery_table(&summary))?;
    arts.json(
        files::BATTERY_SUMMARY,
        &BatteryDocument {
            name: cfg.name.clone(),
            method: method_label(&spoq),
            noise_frac: spec.noise_frac,
            n_spikes: spec.n_spikes,
            filter,
            spoq,
            count: summary.count,
            failures: summary.failures,
            metrics: summary.stats.clone(),
        },
    )?;
    Ok(arts)
}

/// Outcome of one invariant check in `report`.
#[derive(Clone, Debug, PartialEq)]
pub struct Finding {
    pub invariant: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Finding {
    fn new(invariant: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            invariant,
            passed,
            detail: detail.into(),
        }
    }
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let fmt = |m: String| Error::Format {
        path: path.display().to_string(),
        message: m,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        k => fmt(format!("{k:?}")),
    })?;
    let header: Vec<String> = r.headers().map_err(|e| fmt(e.to_string()))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| fmt(e.to_string()))?;
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

fn parse_cell(path: &Path, cell: &str) -> Result<f64> {
    cell.parse::<f64>().map_err(|_| Error::Format {
        path: path.display().to_string(),
        message: format!("`{cell}` is not a number"),
    })
}

fn column(header: &[String], name: &str, path: &Path) -> Result<usize> {
    header.iter().position(|h| h == name).ok_or_else(|| Error::Format {
        path: path.display().to_string(),
        message: format!("missing column `{name}`"),
    })
}

/// Tolerance for monotonicity of the objective trace.
pub const TRACE_SLACK: f64 = 1e-9;

fn check_trace(path: &Path) -> Result<Finding> {
    let (header, rows) = read_table(path)?;
    let c = column(&header, "objective", path)?;
    let vals: Vec<f64> = rows.iter().map(|r| parse_cell(path, &r[c])).collect::<Result<_>>()?;
    if vals.is_empty() {
        return Err(Error::Format {
            path: path.display().to_string(),
            message: "empty trace".into(),
        });
    }
    let bad = vals.windows(2).position(|w| w[1] > w[0] + TRACE_SLACK);
    Ok(match bad {
        None => Finding::new("monotone-objective", true, format!("{} entries non-increasing", vals.len())),
        Some(i) => Finding::new(
            "monotone-objective",
            false,
            format!("objective rises from {:?} to {:?} at entry {}", vals[i], vals[i + 1], i + 1),
        ),
    })
}

fn check_solve(path: &Path) -> Result<Vec<Finding>> {
    let r: SolveResult = read_json(path)?;
    let infeasible = r.diagnostics.iter().filter(|d| !d.feasible).count();
    let outside = r.diagnostics.iter().filter(|d| !d.in_trust_region).count();
    Ok(vec![
        Finding::new("feasibility", infeasible == 0, format!("{infeasible} infeasible iterations")),
        Finding::new(
            "certificates",
            r.certificate_failures == 0,
            format!("{} certificate failures", r.certificate_failures),
        ),
        Finding::new("trust-region", outside == 0, format!("{outside} accepted iterates outside their trust region")),
        Finding::new(
            "trace-length",
            r.objective_trace.len() == 1 + r.iterations * if r.diagnostics.iter().any(|d| d.lip2.is_some()) { 2 } else { 1 },
            format!("{} trace entries for {} iterations", r.objective_trace.len(), r.iterations),
        ),
    ])
}

/// Recomputes the summary row of a battery table from its seed rows.
fn check_battery(path: &Path) -> Result<(Finding, String)> {
    let (header, rows) = read_table(path)?;
    let kind = column(&header, "kind", path)?;
    let seeds: Vec<&Vec<String>> = rows.iter().filter(|r| r[kind] == "seed").collect();
    let summaries: Vec<&Vec<String>> = rows.iter().filter(|r| r[kind] == "summary").collect();
    if summaries.len() != 1 {
        return Ok((
            Finding::new("battery-aggregate", false, format!("{} summary rows", summaries.len())),
            String::new(),
        ));
    }
    let summary = summaries[0];
    let mut problems = Vec::new();
    let mut table = String::new();
    let count_col = column(&header, "count", path)?;
    for name in METRIC_COLUMNS {
        let c = column(&header, name, path)?;
        let cs = column(&header, &format!("{name}_std"), path)?;
        let vals: Vec<f64> = seeds
            .iter()
            .filter(|r| !r[c].is_empty())
            .map(|r| parse_cell(path, &r[c]))
            .collect::<Result<_>>()?;
        let st = metric_stats(&vals);
        let mean = parse_cell(path, &summary[c])?;
        let std = parse_cell(path, &summary[cs])?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
        if !close(mean, st.mean) || !close(std, st.std) {
            problems.push(format!("{name}: summary {mean:?} ± {std:?}, rows give {:?} ± {:?}", st.mean, st.std));
        }
        let _ = writeln!(table, "| {name} | {:.2} ± {:.2} | {:.2} |", st.mean, st.std, st.median);
        if name == "snr_s" && summary[count_col] != vals.len().to_string() {
            problems.push(format!("count {} but {} scored rows", summary[count_col], vals.len()));
        }
    }
    let detail = if problems.is_empty() {
        format!("{} seed rows + 1 summary row consistent", seeds.len())
    } else {
        problems.join("; ")
    };
    Ok((Finding::new("battery-aggregate", problems.is_empty(), detail), table))
}

fn check_grid(scores: &Path, best: &Path) -> Result<Finding> {
    let (header, rows) = read_table(scores)?;
    let col = |n: &str| column(&header, n, scores);
    let (cl, cb, ce, cw) = (col("lambda")?, col("beta")?, col("eta")?, col("weighted")?);
    let (cp, cq) = (col("p")?, col("q")?);
    let mut grid_rows = Vec::new();
    for r in &rows {
        let params = SpoqParams {
            p: parse_cell(scores, &r[cp])?,
            q: parse_cell(scores, &r[cq])?,
            lambda: parse_cell(scores, &r[cl])?,
            beta: parse_cell(scores, &r[cb])?,
            eta: parse_cell(scores, &r[ce])?,
            ..SpoqParams::default()
        };
        let metrics = if r[cw].is_empty() {
            None
        } else {
            let w = parse_cell(scores, &r[cw])?;
            Some(MetricsReport { weighted: w, ..MetricsReport::new(0.0, 0.0, 0.0, 0.0) })
        };
        grid_rows.push(GridRow {
            params,
            status: PointStatus::Ok,
            reason: None,
            metrics,
            iterations: None,
            stop_reason: None,
        });
    }
    let best_params: BestParams = read_json(best)?;
    let Some(i) = best_row(&grid_rows) else {
        return Ok(Finding::new("grid-argmax", false, "no scored grid row"));
    };
    let p = &grid_rows[i].params;
    let b = &best_params.spoq;
    let same = (p.p, p.q, p.lambda, p.beta, p.eta) == (b.p, b.q, b.lambda, b.beta, b.eta);
    Ok(Finding::new(
        "grid-argmax",
        same,
        format!("table maximum at row {i} (lambda {:?}), best_params lambda {:?}", p.lambda, b.lambda),
    ))
}

/// Validates the artifacts found in `dir` and renders a markdown summary.
pub fn validate_artifacts(dir: &Path) -> Result<(String, Vec<Finding>)> {
    let mut findings = Vec::new();
    let mut out = String::from("# Run report\n\n");
    let p = |n: &str| dir.join(n);
    let mut any = false;
    if p(files::TRACE).exists() {
        any = true;
        findings.push(check_trace(&p(files::TRACE))?);
    }
    if p(files::SOLVE_RESULT).exists() {
        any = true;
        findings.extend(check_solve(&p(files::SOLVE_RESULT))?);
    }
    if p(files::METRICS).exists() {
        let m: MetricsReport = read_json(&p(files::METRICS))?;
        let _ = writeln!(out, "## Single solve\n\n| metric | dB |\n|---|---|");
        for (n, v) in MetricsReport::NAMES.iter().zip(m.values()) {
            let _ = writeln!(out, "| {n} | {v:.2} |");
        }
        out.push('\n');
    }
    if p(files::BATTERY).exists() {
        any = true;
        let (f, table) = check_battery(&p(files::BATTERY))?;
        findings.push(f);
        let label = if p(files::BATTERY_SUMMARY).exists() {
            let doc: BatteryDocument = read_json(&p(files::BATTERY_SUMMARY))?;
            format!("{}, {} spikes, noise {}% of x_max", doc.method, doc.n_spikes, doc.noise_frac * 100.0)
        } else {
            "battery".into()
        };
        let _ = writeln!(out, "## {label}\n\n| metric | mean ± std (dB) | median |\n|---|---|---|\n{table}");
    }
    if p(files::GRID_SCORES).exists() && p(files::BEST_PARAMS).exists() {
        any = true;
        findings.push(check_grid(&p(files::GRID_SCORES), &p(files::BEST_PARAMS))?);
    }
    if !any {
        return Err(Error::Format {
            path: dir.display().to_string(),
            message: "no artifacts to validate".into(),
        });
    }
    let _ = writeln!(out, "## Invariants\n\n| invariant | status | detail |\n|---|---|---|");
    for f in &findings {
        let status = if f.passed { "pass" } else { "FAIL" };
        let _ = writeln!(out, "| {} | {status} | {} |", f.invariant, f.detail);
    }
    Ok((out, findings))
}
