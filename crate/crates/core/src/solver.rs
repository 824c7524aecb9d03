//! Alternating trust-region variable-metric forward-backward iterations for
//!
//! ```text
//! minimize  0.5 ||H (y - pi * s)||^2 + lambda psi(s)
//! s.t.      s in [lower, upper]^N,  pi in the unit simplex
//! ```
//!
//! Each outer iteration takes one projected step on `s` under a diagonal
//! majorizing metric, shrinking an lq trust region until the candidate lies
//! in it, then one projected gradient step on `pi`. The trend is recovered
//! afterwards as `L (y - pi * s)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{FilterSpec, LowPassFilter};
use crate::projections::{
    box_residual_unchecked, project_simplex_raw, simplex_residual_unchecked, BoxSet, SimplexSet,
};
use crate::signal::{
    adjoint_kernel_into, adjoint_signal_into, convolve_into, dist2, dot, norm2, KernelVector,
    SignalVector,
};
use crate::spoq::{chi, grad_psi_into, in_ball_complement, lp_curvature, lq_power_sum, psi_unchecked, SpoqParams};

/// Multiplier applied to power-iteration estimates of the Lipschitz constants.
pub const LIPSCHITZ_SAFETY: f64 = 1.01;
/// Smallest Lipschitz constant returned.
pub const LIPSCHITZ_FLOOR: f64 = 1e-12;
/// Admissible range of the step sizes.
pub const STEP_BOUNDS: (f64, f64) = (0.01, 1.99);
/// Relative slack on the step certificates.
pub const CERTIFICATE_SLACK: f64 = 1e-9;

const POWER_TOL: f64 = 1e-6;
const POWER_MAX_ITER: usize = 200;
/// Standard deviation, in samples, of the default initial kernel.
pub const DEFAULT_INIT_KERNEL_SIGMA: f64 = 1.0;
/// Level of the default constant initial signal.
pub const DEFAULT_INIT_LEVEL: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Trust-region shrink factor.
    pub theta: f64,
    /// Maximum number of trust-region trials per iteration.
    pub max_tr_trials: usize,
    pub gamma_s: f64,
    pub gamma_pi: f64,
    /// Tolerance on `||s_k - s_{k+1}||`; `None` means `sqrt(N) * 1e-6`.
    pub epsilon: Option<f64>,
    pub k_max: usize,
    /// Estimate the kernel. When false the kernel stays fixed.
    pub blind: bool,
    pub kappa1: f64,
    pub kappa2: f64,
    /// Value of the constant initial signal (clamped into the box).
    pub init_level: f64,
    pub init_kernel_sigma: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            theta: 0.5,
            max_tr_trials: 50,
            gamma_s: 1.9,
            gamma_pi: 1.9,
            epsilon: None,
            k_max: 2000,
            blind: true,
            kappa1: 1e6,
            kappa2: 1e6,
            init_level: DEFAULT_INIT_LEVEL,
            init_kernel_sigma: DEFAULT_INIT_KERNEL_SIGMA,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad(format!("theta = {} must lie in (0, 1)", self.theta));
        }
        if self.max_tr_trials == 0 {
            return bad("max_tr_trials must be positive".into());
        }
        let (lo, hi) = STEP_BOUNDS;
        for (name, g) in [("gamma_s", self.gamma_s), ("gamma_pi", self.gamma_pi)] {
            if !(g >= lo && g <= hi) {
                return bad(format!("{name} = {g} must lie in [{lo}, {hi}]"));
            }
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return bad(format!("epsilon = {e} must be positive"));
            }
        }
        if !(self.kappa1 > 0.0 && self.kappa2 > 0.0) {
            return bad("kappa1 and kappa2 must be positive".into());
        }
        if !self.init_level.is_finite() || !(self.init_kernel_sigma > 0.0) {
            return bad("initialization parameters are invalid".into());
        }
        Ok(())
    }

    pub fn epsilon_for(&self, n: usize) -> f64 {
        self.epsilon.unwrap_or((n as f64).sqrt() * 1e-6)
    }

    /// Largest `gbar` with both step sizes in `[.., 2 - gbar]`.
    pub fn gamma_bar(&self) -> f64 {
        2.0 - self.gamma_s.max(self.gamma_pi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub observation: SignalVector,
    pub filter: FilterSpec,
    pub spoq: SpoqParams,
    #[serde(rename = "box", default)]
    pub bounds: BoxSet,
    pub kernel_len: usize,
    /// Kernel used when the solver runs non-blind.
    #[serde(default)]
    pub known_kernel: Option<KernelVector>,
}

impl ProblemInstance {
    pub fn new(observation: SignalVector, filter: FilterSpec, spoq: SpoqParams, kernel_len: usize) -> Self {
        Self {
            observation,
            filter,
            spoq,
            bounds: BoxSet::default(),
            kernel_len,
            known_kernel: None,
        }
    }

    pub fn with_known_kernel(mut self, kernel: KernelVector) -> Self {
        self.known_kernel = Some(kernel);
        self
    }

    pub fn len(&self) -> usize {
        self.observation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observation.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.kernel_len % 2 == 0 || self.kernel_len == 0 || self.kernel_len > n {
            return Err(Error::invalid(format!(
                "kernel_len {} must be odd and at most N = {n}",
                self.kernel_len
            )));
        }
        self.filter.validate(n)?;
        self.spoq.validate()?;
        self.bounds.validate()?;
        if let Some(k) = &self.known_kernel {
            if k.len() != self.kernel_len {
                return Err(Error::invalid("known kernel length differs from kernel_len"));
            }
        }
        Ok(())
    }
}

/// Shared evaluation state: the filter plan and scratch buffers.
pub(crate) struct Model<'a> {
    y: &'a [f64],
    filter: LowPassFilter,
    spoq: SpoqParams,
    l: usize,
}

impl<'a> Model<'a> {
    pub(crate) fn new(inst: &'a ProblemInstance) -> Result<Self> {
        Ok(Self {
            y: inst.observation.as_slice(),
            filter: LowPassFilter::new(inst.filter, inst.len())?,
            spoq: inst.spoq,
            l: inst.kernel_len,
        })
    }

    fn n(&self) -> usize {
        self.y.len()
    }

    fn residual(&self, s: &[f64], pi: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.n()];
        convolve_into(s, pi, &mut r);
        for (ri, yi) in r.iter_mut().zip(self.y) {
            *ri = yi - *ri;
        }
        r
    }

    /// `H^T H (y - pi * s)`.
    fn filtered_residual(&self, s: &[f64], pi: &[f64]) -> Vec<f64> {
        let r = self.residual(s, pi);
        let mut u = vec![0.0; self.n()];
        self.filter.highpass_gram_into(&r, &mut u);
        u
    }

    pub(crate) fn data_term(&self, s: &[f64], pi: &[f64]) -> f64 {
        let r = self.residual(s, pi);
        let mut hr = vec![0.0; self.n()];
        self.filter.highpass_into(&r, &mut hr);
        0.5 * dot(&hr, &hr)
    }

    pub(crate) fn objective(&self, s: &[f64], pi: &[f64]) -> f64 {
        let reg = if self.spoq.lambda == 0.0 {
            0.0
        } else {
            self.spoq.lambda * psi_unchecked(s, &self.spoq)
        };
        self.data_term(s, pi) + reg
    }

    pub(crate) fn grad1(&self, s: &[f64], pi: &[f64]) -> Vec<f64> {
        let u = self.filtered_residual(s, pi);
        let mut g = vec![0.0; self.n()];
        adjoint_signal_into(&u, pi, &mut g);
        let mut gp = vec![0.0; self.n()];
        grad_psi_into(s, &self.spoq, &mut gp);
        let lam = self.spoq.lambda;
        for (gi, pi) in g.iter_mut().zip(&gp) {
            *gi = -*gi + lam * pi;
        }
        g
    }

    pub(crate) fn grad2(&self, s: &[f64], pi: &[f64]) -> Vec<f64> {
        let u = self.filtered_residual(s, pi);
        let mut g = vec![0.0; self.l];
        adjoint_kernel_into(&u, s, &mut g);
        for gi in &mut g {
            *gi = -*gi;
        }
        g
    }

    /// Largest eigenvalue of `C_pi^T H^T H C_pi`, started from `v`.
    pub(crate) fn norm_sq_rho1(&self, pi: &[f64], v: &mut Vec<f64>) -> f64 {
        let n = self.n();
        let mut t1 = vec![0.0; n];
        let mut t2 = vec![0.0; n];
        power_iteration(v, n, |x, out| {
            convolve_into(x, pi, &mut t1);
            self.filter.highpass_gram_into(&t1, &mut t2);
            adjoint_signal_into(&t2, pi, out);
        })
    }

    /// Largest eigenvalue of `D_s^T H^T H D_s`, started from `v`.
    pub(crate) fn norm_sq_rho2(&self, s: &[f64], v: &mut Vec<f64>) -> f64 {
        let n = self.n();
        let mut t1 = vec![0.0; n];
        let mut t2 = vec![0.0; n];
        power_iteration(v, self.l, |x, out| {
            convolve_into(s, x, &mut t1);
            self.filter.highpass_gram_into(&t1, &mut t2);
            adjoint_kernel_into(&t2, s, out);
        })
    }
}

fn power_start(len: usize) -> Vec<f64> {
    (0..len).map(|i| 1.0 + 0.5 * ((i * 7919) % 13) as f64 / 13.0).collect()
}

/// Power iteration on a symmetric positive semidefinite operator. `v` holds
/// the warm start on entry and the last iterate on exit.
fn power_iteration(v: &mut Vec<f64>, len: usize, mut apply: impl FnMut(&[f64], &mut [f64])) -> f64 {
    if v.len() != len || !(norm2(v) > 0.0) || v.iter().any(|x| !x.is_finite()) {
        *v = power_start(len);
    }
    let nv = norm2(v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut w = vec![0.0; len];
    let mut est = 0.0;
    for it in 0..POWER_MAX_ITER {
        apply(v, &mut w);
        let nw = norm2(&w);
        if !(nw > 0.0) {
            return 0.0;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        let converged = it > 0 && (nw - est).abs() <= POWER_TOL * nw;
        est = nw;
        if converged {
            break;
        }
    }
    est
}

fn safe_lipschitz(raw: f64) -> f64 {
    (raw * LIPSCHITZ_SAFETY).max(LIPSCHITZ_FLOOR)
}

fn check_pair(s: &[f64], pi: &[f64], inst: &ProblemInstance) -> Result<()> {
    if s.len() != inst.len() || pi.len() != inst.kernel_len {
        return Err(Error::invalid(format!(
            "expected signal of length {} and kernel of length {}, got {} and {}",
            inst.len(),
            inst.kernel_len,
            s.len(),
            pi.len()
        )));
    }
    if s.iter().chain(pi).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite input"));
    }
    Ok(())
}

fn model_for<'a>(s: &[f64], pi: &[f64], inst: &'a ProblemInstance) -> Result<Model<'a>> {
    check_pair(s, pi, inst)?;
    if inst.kernel_len % 2 == 0 || inst.kernel_len > inst.len() {
        return Err(Error::invalid("kernel_len must be odd and at most N"));
    }
    Model::new(inst)
}

/// `0.5 ||H (y - pi * s)||^2 + lambda psi(s)`.
pub fn objective(s: &[f64], pi: &[f64], inst: &ProblemInstance) -> Result<f64> {
    Ok(model_for(s, pi, inst)?.objective(s, pi))
}

/// Gradient in `s`: `-C_pi^T H^T H (y - pi * s) + lambda grad psi(s)`.
pub fn grad1_f(s: &[f64], pi: &[f64], inst: &ProblemInstance) -> Result<Vec<f64>> {
    Ok(model_for(s, pi, inst)?.grad1(s, pi))
}

/// Gradient in `pi`: `-D_s^T H^T H (y - pi * s)`.
pub fn grad2_f(s: &[f64], pi: &[f64], inst: &ProblemInstance) -> Result<Vec<f64>> {
    Ok(model_for(s, pi, inst)?.grad2(s, pi))
}

/// Power-iteration estimate of `||H C_pi||^2`, without safety factor.
pub fn operator_norm_sq_rho1(pi: &[f64], inst: &ProblemInstance) -> Result<f64> {
    let s = vec![0.0; inst.len()];
    let m = model_for(&s, pi, inst)?;
    Ok(m.norm_sq_rho1(pi, &mut Vec::new()))
}

/// Power-iteration estimate of `||H D_s||^2`, without safety factor.
pub fn operator_norm_sq_rho2(s: &[f64], inst: &ProblemInstance) -> Result<f64> {
    let pi = vec![0.0; inst.kernel_len];
    let m = model_for(s, &pi, inst)?;
    Ok(m.norm_sq_rho2(s, &mut Vec::new()))
}

/// Lipschitz constant of the data-term gradient in `s` for fixed `pi`.
pub fn lipschitz_rho1(pi: &[f64], inst: &ProblemInstance) -> Result<f64> {
    operator_norm_sq_rho1(pi, inst).map(safe_lipschitz)
}

/// Lipschitz constant of the data-term gradient in `pi` for fixed `s`.
pub fn lipschitz_rho2(s: &[f64], inst: &ProblemInstance) -> Result<f64> {
    operator_norm_sq_rho2(s, inst).map(safe_lipschitz)
}

/// The two first-order conditions of a step: the descent inequality
/// `delta^T g + ||delta||_M^2 / gamma <= 0` and the residual bound
/// `dist(-g, N_C(x+)) <= bound`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `delta^T g + ||delta||_M^2 / gamma`.
    pub descent: f64,
    pub residual: f64,
    pub residual_bound: f64,
    pub ok: bool,
}

impl Certificate {
    fn new(dg: f64, quad: f64, gamma: f64, residual: f64, residual_bound: f64) -> Self {
        let descent = dg + quad / gamma;
        let slack = CERTIFICATE_SLACK * (1.0 + dg.abs() + quad / gamma);
        let ok = descent <= slack && residual <= residual_bound + CERTIFICATE_SLACK * (1.0 + residual_bound);
        Self {
            descent,
            residual,
            residual_bound,
            ok,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignalStep {
    pub s_next: Vec<f64>,
    pub trials_used: usize,
    /// Radii tried, in order; the last one was accepted.
    pub rho_trials: Vec<f64>,
    pub lip1: f64,
    /// Smallest and largest metric entries over all trials.
    pub metric_min: f64,
    pub metric_max: f64,
    pub certificate: Certificate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelStep {
    pub pi_next: Vec<f64>,
    pub lip2: f64,
    pub certificate: Certificate,
}

fn signal_step(
    m: &Model,
    s: &[f64],
    pi: &[f64],
    bounds: &BoxSet,
    cfg: &SolverConfig,
    lip1: f64,
) -> Result<SignalStep> {
    let params = &m.spoq;
    let lam = params.lambda;
    let g = m.grad1(s, pi);
    let curv = lp_curvature(s, params);
    let curv_min = curv.iter().cloned().fold(f64::INFINITY, f64::min);
    let curv_max = curv.iter().cloned().fold(0.0, f64::max);
    let trials = cfg.max_tr_trials;
    let mut rho_trials = Vec::new();
    let mut metric_min = f64::INFINITY;
    let mut metric_max: f64 = 0.0;
    let mut rho = lq_power_sum(s, params.q);
    let mut cand = vec![0.0; s.len()];
    let mut metric = vec![0.0; s.len()];
    for i in 1..=trials {
        if i == trials {
            rho = 0.0;
        } else if i > 1 {
            rho *= cfg.theta;
        }
        rho_trials.push(rho);
        let base = lip1 + lam * chi(params, rho);
        metric_min = metric_min.min(base + lam * curv_min);
        metric_max = metric_max.max(base + lam * curv_max);
        for n in 0..s.len() {
            metric[n] = base + lam * curv[n];
            cand[n] = bounds.clamp(s[n] - cfg.gamma_s * g[n] / metric[n]);
        }
        if in_ball_complement(&cand, rho, params.q) {
            let delta: Vec<f64> = cand.iter().zip(s).map(|(a, b)| a - b).collect();
            let dg = dot(&delta, &g);
            let quad: f64 = delta.iter().zip(&metric).map(|(d, a)| a * d * d).sum();
            let residual = box_residual_unchecked(&cand, &g, bounds);
            let certificate = Certificate::new(dg, quad, cfg.gamma_s, residual, cfg.kappa1 * quad.sqrt());
            if !certificate.ok {
                log::warn!("signal step certificate violated: {certificate:?}");
            }
            return Ok(SignalStep {
                s_next: cand,
                trials_used: i,
                rho_trials,
                lip1,
                metric_min,
                metric_max,
                certificate,
            });
        }
    }
    Err(Error::Internal(
        "no trust-region trial accepted despite a zero final radius".into(),
    ))
}

fn kernel_step(m: &Model, s: &[f64], pi: &[f64], cfg: &SolverConfig, lip2: f64) -> KernelStep {
    let g = m.grad2(s, pi);
    let z: Vec<f64> = pi
        .iter()
        .zip(&g)
        .map(|(p, gi)| p - cfg.gamma_pi * gi / lip2)
        .collect();
    let next = project_simplex_raw(&z);
    let delta: Vec<f64> = next.iter().zip(pi).map(|(a, b)| a - b).collect();
    let dg = dot(&delta, &g);
    let d2 = dot(&delta, &delta);
    let residual = simplex_residual_unchecked(&next, &g);
    let certificate = Certificate::new(
        dg,
        lip2 * d2,
        cfg.gamma_pi,
        residual,
        cfg.kappa2 * lip2.sqrt() * d2.sqrt(),
    );
    if !certificate.ok {
        log::warn!("kernel step certificate violated: {certificate:?}");
    }
    KernelStep {
        pi_next: next,
        lip2,
        certificate,
    }
}

fn check_feasible(s: &[f64], pi: &[f64], inst: &ProblemInstance) -> Result<()> {
    if !inst.bounds.contains(s) {
        return Err(Error::invalid("signal lies outside the box"));
    }
    if !(SimplexSet { dimension: pi.len() }).contains(pi, 1e-9) {
        return Err(Error::invalid("kernel lies outside the simplex"));
    }
    Ok(())
}

/// One trust-region variable-metric step on the signal.
pub fn signal_update(s: &[f64], pi: &[f64], inst: &ProblemInstance, cfg: &SolverConfig) -> Result<SignalStep> {
    inst.spoq.validate()?;
    cfg.validate()?;
    let m = model_for(s, pi, inst)?;
    check_feasible(s, pi, inst)?;
    let lip1 = safe_lipschitz(m.norm_sq_rho1(pi, &mut Vec::new()));
    signal_step(&m, s, pi, &inst.bounds, cfg, lip1)
}

/// One projected gradient step on the kernel. In non-blind mode the kernel
/// is returned unchanged with a trivially satisfied certificate.
pub fn kernel_update(s: &[f64], pi: &[f64], inst: &ProblemInstance, cfg: &SolverConfig) -> Result<KernelStep> {
    cfg.validate()?;
    let m = model_for(s, pi, inst)?;
    check_feasible(s, pi, inst)?;
    if !cfg.blind {
        return Ok(KernelStep {
            pi_next: pi.to_vec(),
            lip2: 0.0,
            certificate: Certificate::new(0.0, 0.0, cfg.gamma_pi, 0.0, 0.0),
        });
    }
    let lip2 = safe_lipschitz(m.norm_sq_rho2(s, &mut Vec::new()));
    Ok(kernel_step(&m, s, pi, cfg, lip2))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxIter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub lip1: f64,
    pub lip2: Option<f64>,
    pub rho_trials: Vec<f64>,
    pub trials_used: usize,
    pub metric_min: f64,
    pub metric_max: f64,
    pub objective_before: f64,
    pub objective_after_signal: f64,
    pub objective_after_kernel: Option<f64>,
    /// `||s_{k+1} - s_k||^2`.
    pub signal_step_sq: f64,
    /// `||pi_{k+1} - pi_k||^2`.
    pub kernel_step_sq: Option<f64>,
    pub signal_certificate: Certificate,
    pub kernel_certificate: Option<Certificate>,
    /// Accepted signal lies in the trust region of its radius.
    pub in_trust_region: bool,
    /// Both iterates lie in their constraint sets.
    pub feasible: bool,
    /// `decrease - mu1/2 ||delta||^2` for the signal step.
    pub descent_margin_signal: f64,
    pub descent_margin_kernel: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub s_hat: SignalVector,
    pub pi_hat: KernelVector,
    pub t_hat: SignalVector,
    /// Objective at the start and after every block update.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub tr_trials_per_iter: Vec<usize>,
    pub stop_reason: StopReason,
    pub epsilon: f64,
    /// Smallest metric eigenvalue seen over the run (signal and kernel), 0
    /// when no iteration ran.
    pub lambda_lower: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub certificate_failures: usize,
    pub diagnostics: Vec<IterationRecord>,
}

impl SolveResult {
    /// Largest increase between consecutive trace entries (negative when the
    /// trace strictly decreases).
    pub fn max_trace_increase(&self) -> f64 {
        self.objective_trace
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_descent_margin(&self) -> f64 {
        self.diagnostics
            .iter()
            .flat_map(|r| std::iter::once(r.descent_margin_signal).chain(r.descent_margin_kernel))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Constant initial signal clamped into the box.
pub fn initial_signal(n: usize, level: f64, bounds: &BoxSet) -> Vec<f64> {
    vec![bounds.clamp(level); n]
}

/// Centered Gaussian kernel with standard deviation `sigma` samples.
pub fn initial_kernel(len: usize, sigma: f64) -> Result<Vec<f64>> {
    let k = KernelVector::centered_gaussian(len, sigma)?;
    Ok(project_simplex_raw(&k))
}

/// Runs the alternating iterations until `||s_k - s_{k+1}|| <= epsilon` or
/// `k_max` iterations.
pub fn solve(
    inst: &ProblemInstance,
    cfg: &SolverConfig,
    s0: Option<&[f64]>,
    pi0: Option<&[f64]>,
) -> Result<SolveResult> {
    inst.validate()?;
    cfg.validate()?;
    let n = inst.len();
    let bounds = inst.bounds;
    let mut s = match s0 {
        Some(v) => v.iter().map(|x| bounds.clamp(*x)).collect(),
        None => initial_signal(n, cfg.init_level, &bounds),
    };
    let mut pi = match (cfg.blind, &inst.known_kernel, pi0) {
        (false, Some(k), _) => k.to_vec(),
        (_, _, Some(p)) => project_simplex_raw(p),
        (true, _, None) => initial_kernel(inst.kernel_len, cfg.init_kernel_sigma)?,
        (false, None, None) => {
            return Err(Error::invalid("non-blind solve needs a known kernel or an initial kernel"))
        }
    };
    check_pair(&s, &pi, inst)?;
    let m = Model::new(inst)?;
    let eps = cfg.epsilon_for(n);

    let mut trace = vec![m.objective(&s, &pi)];
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut v1 = Vec::new();
    let mut v2 = Vec::new();
    let mut stop = StopReason::MaxIter;
    let mut lip1 = 0.0;
    for k in 0..cfg.k_max {
        if k == 0 || cfg.blind {
            lip1 = safe_lipschitz(m.norm_sq_rho1(&pi, &mut v1));
        }
        let before = *trace.last().expect("trace starts nonempty");
        let step = signal_step(&m, &s, &pi, &bounds, cfg, lip1)?;
        let s_next = step.s_next;
        let after_s = m.objective(&s_next, &pi);
        trace.push(after_s);
        let accepted_rho = *step.rho_trials.last().expect("at least one trial");
        let signal_step_sq = dist2(&s, &s_next).powi(2);

        let (lip2, kstep, after_k) = if cfg.blind {
            let lip2 = safe_lipschitz(m.norm_sq_rho2(&s_next, &mut v2));
            let ks = kernel_step(&m, &s_next, &pi, cfg, lip2);
            let after = m.objective(&s_next, &ks.pi_next);
            trace.push(after);
            (Some(lip2), Some(ks), Some(after))
        } else {
            (None, None, None)
        };

        let change = signal_step_sq.sqrt();
        let mut record = IterationRecord {
            lip1,
            lip2,
            in_trust_region: in_ball_complement(&s_next, accepted_rho, inst.spoq.q),
            rho_trials: step.rho_trials,
            trials_used: step.trials_used,
            metric_min: step.metric_min,
            metric_max: step.metric_max,
            objective_before: before,
            objective_after_signal: after_s,
            objective_after_kernel: after_k,
            signal_step_sq,
            kernel_step_sq: None,
            signal_certificate: step.certificate,
            kernel_certificate: None,
            feasible: false,
            descent_margin_signal: 0.0,
            descent_margin_kernel: None,
        };
        s = s_next;
        if let Some(ks) = kstep {
            record.kernel_step_sq = Some(dist2(&pi, &ks.pi_next).powi(2));
            record.kernel_certificate = Some(ks.certificate);
            pi = ks.pi_next;
        }
        record.feasible = bounds.contains(&s) && (SimplexSet { dimension: pi.len() }).contains(&pi, 1e-12);
        records.push(record);
        if change <= eps {
            stop = StopReason::Tolerance;
            break;
        }
    }

    let lambda_lower = records
        .iter()
        .flat_map(|r| std::iter::once(r.metric_min).chain(r.lip2))
        .fold(f64::INFINITY, f64::min);
    let gbar = cfg.gamma_bar();
    let lambda_lower = if lambda_lower.is_finite() { lambda_lower } else { 0.0 };
    let (mu1, mu2) = (lambda_lower * gbar / (2.0 - gbar), lambda_lower * gbar * (2.0 - gbar));
    let mut failures = 0;
    for r in &mut records {
        r.descent_margin_signal =
            (r.objective_before - r.objective_after_signal) - 0.5 * mu1 * r.signal_step_sq;
        if let (Some(after), Some(d2)) = (r.objective_after_kernel, r.kernel_step_sq) {
            r.descent_margin_kernel = Some((r.objective_after_signal - after) - 0.5 * mu2 * d2);
        }
        failures += usize::from(!r.signal_certificate.ok);
        failures += usize::from(r.kernel_certificate.as_ref().is_some_and(|c| !c.ok));
    }

    let recon = m.residual(&s, &pi);
    let mut t_hat = vec![0.0; n];
    m.filter.lowpass_into(&recon, &mut t_hat);
    Ok(SolveResult {
        s_hat: SignalVector::new(s)?,
        pi_hat: KernelVector::new(pi)?,
        t_hat: SignalVector::new(t_hat)?,
        objective_trace: trace,
        iterations: records.len(),
        tr_trials_per_iter: records.iter().map(|r| r.trials_used).collect(),
        stop_reason: stop,
        epsilon: eps,
        lambda_lower,
        mu1,
        mu2,
        certificate_failures: failures,
        diagnostics: records,
    })
}

/// Normal-cone residuals of the two partial gradients at `(s, pi)`.
pub fn stationarity(s: &[f64], pi: &[f64], inst: &ProblemInstance) -> Result<(f64, f64)> {
    let m = model_for(s, pi, inst)?;
    check_feasible(s, pi, inst)?;
    let r1 = box_residual_unchecked(s, &m.grad1(s, pi), &inst.bounds);
    let r2 = simplex_residual_unchecked(pi, &m.grad2(s, pi));
    Ok((r1, r2))
}

/// Integer offset of the kernel's center of mass from its central tap.
pub fn center_shift(pi: &[f64]) -> isize {
    let total: f64 = pi.iter().sum();
    if !(total > 0.0) {
        return 0;
    }
    let com: f64 = pi.iter().enumerate().map(|(l, v)| l as f64 * v).sum::<f64>() / total;
    com.round() as isize - ((pi.len() - 1) / 2) as isize
}

/// Recenters the kernel on its central tap and moves the signal the other
/// way so that the convolution is unchanged away from the borders.
pub fn center_shift_postprocess(s: &[f64], pi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = center_shift(pi);
    let l = pi.len() as isize;
    let kernel = (0..l).map(|j| pi[(j + d).rem_euclid(l) as usize]).collect();
    let n = s.len() as isize;
    let signal = (0..n)
        .map(|i| {
            let src = i - d;
            if (0..n).contains(&src) {
                s[src as usize]
            } else {
                0.0
            }
        })
        .collect();
    (signal, kernel)
}
