//! Smoothed `lp / lq` norm-ratio sparsity penalty.
//!
//! ```text
//! lp_alpha_p(s) = sum_n ((s_n^2 + alpha^2)^(p/2) - alpha^p)
//! lq_eta(s)     = (eta^q + sum_n |s_n|^q)^(1/q)
//! psi(s)        = log((lp_alpha_p(s) + beta^p)^(1/p) / lq_eta(s))
//! ```
//!
//! `psi` has a local minimizer at zero when `q > 2`, or `q = 2` and
//! `eta^2 alpha^(p-2) > beta^p`. Every evaluation below is arranged to stay
//! accurate near zero (the sparse regime) and to avoid overflow for large
//! amplitudes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpoqParams {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub lambda: f64,
}

impl Default for SpoqParams {
    fn default() -> Self {
        Self {
            p: 1.0,
            q: 2.0,
            alpha: 7e-7,
            beta: 5e-3,
            eta: 1e-1,
            lambda: 1.0,
        }
    }
}

impl SpoqParams {
    /// The SOOT setting `(p, q) = (1, 2)`.
    pub fn soot(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn with_pq(mut self, p: f64, q: f64) -> Self {
        self.p = p;
        self.q = q;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    /// Checks field ranges and the local-minimizer condition.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ParameterInvalid(m));
        if !(self.p > 0.0 && self.p < 2.0) {
            return bad(format!("p = {} must lie in (0, 2)", self.p));
        }
        if !(self.q >= 2.0) || !self.q.is_finite() {
            return bad(format!("q = {} must lie in [2, inf)", self.q));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("eta", self.eta)] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad(format!("lambda = {} must be nonnegative", self.lambda));
        }
        if self.q == 2.0 {
            // Compared in the log domain: alpha^(p-2) overflows for tiny alpha.
            let lhs = 2.0 * self.eta.ln() + (self.p - 2.0) * self.alpha.ln();
            let rhs = self.p * self.beta.ln();
            if !(lhs > rhs) {
                return bad(format!(
                    "q = 2 requires eta^2 * alpha^(p-2) > beta^p, got {:.6e} <= {:.6e}",
                    lhs.exp(),
                    rhs.exp()
                ));
            }
        }
        Ok(())
    }

    pub(crate) fn beta_p(&self) -> f64 {
        self.beta.powf(self.p)
    }
}

/// `|x|^q`, exact for the common `q = 2`.
#[inline]
pub(crate) fn abs_pow(x: f64, q: f64) -> f64 {
    if q == 2.0 {
        x * x
    } else {
        x.abs().powf(q)
    }
}

/// `(s^2 + alpha^2)^(p/2) - alpha^p` without cancellation.
#[inline]
fn smoothed_term(s: f64, alpha: f64, p: f64) -> f64 {
    let r = s / alpha;
    alpha.powf(p) * (0.5 * p * (r * r).ln_1p()).exp_m1()
}

fn check_finite(s: &[f64]) -> Result<()> {
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("penalty argument has a non-finite entry"));
    }
    Ok(())
}

pub(crate) fn lp_alpha_p_unchecked(s: &[f64], params: &SpoqParams) -> f64 {
    s.iter()
        .map(|v| smoothed_term(*v, params.alpha, params.p))
        .sum()
}

/// `lp_alpha_p(s) = sum_n ((s_n^2 + alpha^2)^(p/2) - alpha^p)`, the p-th power
/// of the smoothed lp quasi-norm.
pub fn lp_alpha_p(s: &[f64], params: &SpoqParams) -> Result<f64> {
    check_finite(s)?;
    Ok(lp_alpha_p_unchecked(s, params))
}

/// `(scale, sum)` with `eta^q + sum_n |s_n|^q = scale^q * sum`.
fn scaled_lq_sum(s: &[f64], eta: f64, q: f64) -> (f64, f64) {
    let m = s.iter().fold(eta, |acc, v| acc.max(v.abs()));
    let sum = abs_pow(eta / m, q) + s.iter().map(|v| abs_pow(v / m, q)).sum::<f64>();
    (m, sum)
}

/// `log(eta^q + sum_n |s_n|^q)`.
pub(crate) fn log_lq_power(s: &[f64], eta: f64, q: f64) -> f64 {
    let (m, sum) = scaled_lq_sum(s, eta, q);
    q * m.ln() + sum.ln()
}

/// Smoothed lq norm `(eta^q + sum_n |s_n|^q)^(1/q)`.
pub fn lq_eta(s: &[f64], params: &SpoqParams) -> Result<f64> {
    check_finite(s)?;
    let (m, sum) = scaled_lq_sum(s, params.eta, params.q);
    Ok(m * sum.powf(1.0 / params.q))
}

pub(crate) fn psi_unchecked(s: &[f64], params: &SpoqParams) -> f64 {
    let lp = lp_alpha_p_unchecked(s, params);
    // log(lp + beta^p) / p, split so the sparse regime lp << beta^p is exact.
    let head = params.beta.ln() + (lp / params.beta_p()).ln_1p() / params.p;
    head - log_lq_power(s, params.eta, params.q) / params.q
}

/// The penalty `psi(s)`.
pub fn psi(s: &[f64], params: &SpoqParams) -> Result<f64> {
    check_finite(s)?;
    Ok(psi_unchecked(s, params))
}

pub(crate) fn grad_psi_into(s: &[f64], params: &SpoqParams, out: &mut [f64]) {
    let lp_denom = lp_alpha_p_unchecked(s, params) + params.beta_p();
    let (m, sum) = scaled_lq_sum(s, params.eta, params.q);
    let a2 = params.alpha * params.alpha;
    let e = 0.5 * params.p - 1.0;
    for (o, v) in out.iter_mut().zip(s) {
        let first = v * (v * v + a2).powf(e) / lp_denom;
        let second = if *v == 0.0 {
            0.0
        } else {
            v.signum() * abs_pow(v / m, params.q - 1.0) / (m * sum)
        };
        *o = first - second;
    }
}

/// Gradient of `psi`.
pub fn grad_psi(s: &[f64], params: &SpoqParams) -> Result<Vec<f64>> {
    check_finite(s)?;
    let mut out = vec![0.0; s.len()];
    grad_psi_into(s, params, &mut out);
    Ok(out)
}

/// `chi_{q,rho} = (q - 1) / (eta^q + rho^q)^(2/q)`.
pub fn chi(params: &SpoqParams, rho: f64) -> f64 {
    let q = params.q;
    let m = params.eta.max(rho);
    let base = abs_pow(params.eta / m, q) + abs_pow(rho / m, q);
    (q - 1.0) / (m * m * base.powf(2.0 / q))
}

/// Per-sample curvature of the lp part of the majorant,
/// `(s_n^2 + alpha^2)^(p/2 - 1) / (lp_alpha_p(s) + beta^p)`.
pub(crate) fn lp_curvature(s: &[f64], params: &SpoqParams) -> Vec<f64> {
    let denom = lp_alpha_p_unchecked(s, params) + params.beta_p();
    let a2 = params.alpha * params.alpha;
    let e = 0.5 * params.p - 1.0;
    s.iter().map(|v| (v * v + a2).powf(e) / denom).collect()
}

/// Diagonal of the variable metric
/// `(lip + lambda chi_{q,rho}) Id + lambda Diag(curvature)`.
pub fn mm_metric_diag(s: &[f64], lip_rho1: f64, rho: f64, params: &SpoqParams) -> Result<Vec<f64>> {
    check_finite(s)?;
    if !(rho >= 0.0) {
        return Err(Error::invalid("trust-region radius must be nonnegative"));
    }
    if !(lip_rho1 > 0.0) {
        return Err(Error::invalid("Lipschitz constant must be positive"));
    }
    let base = lip_rho1 + params.lambda * chi(params, rho);
    Ok(lp_curvature(s, params)
        .into_iter()
        .map(|c| base + params.lambda * c)
        .collect())
}

/// `sum_n |s_n|^q`.
pub fn lq_power_sum(s: &[f64], q: f64) -> f64 {
    s.iter().map(|v| abs_pow(*v, q)).sum()
}

/// Membership in the lq-ball complement `{ s : sum_n |s_n|^q >= rho^q }`.
pub fn in_ball_complement(s: &[f64], rho: f64, q: f64) -> bool {
    rho <= 0.0 || lq_power_sum(s, q) >= abs_pow(rho, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(p: f64, q: f64) -> SpoqParams {
        SpoqParams {
            p,
            q,
            alpha: 7e-7,
            beta: 1e-3,
            eta: 1e-1,
            lambda: 0.7,
        }
    }

    fn random_signal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| {
                if rng.random_bool(0.4) {
                    0.0
                } else {
                    rng.random_range(-5.0..5.0)
                }
            })
            .collect()
    }

    #[test]
    fn validity_condition() {
        let ok = SpoqParams {
            p: 1.0,
            q: 2.0,
            alpha: 7e-7,
            beta: 1e-3,
            eta: 1e-1,
            lambda: 1.0,
        };
        assert!(ok.validate().is_ok());
        let q3 = SpoqParams {
            q: 3.0,
            alpha: 1.0,
            beta: 100.0,
            eta: 1e-3,
            ..ok
        };
        assert!(q3.validate().is_ok());
        let boundary = SpoqParams {
            p: 1.0,
            q: 2.0,
            alpha: 1.0,
            beta: 1.0,
            eta: 1.0,
            lambda: 1.0,
        };
        let err = boundary.validate().unwrap_err().to_string();
        assert!(err.contains("eta^2 * alpha^(p-2) > beta^p"), "{err}");
        assert!(SpoqParams { p: 2.0, ..ok }.validate().is_err());
        assert!(SpoqParams { q: 1.5, ..ok }.validate().is_err());
        assert!(SpoqParams { lambda: -1.0, ..ok }.validate().is_err());
        assert!(SpoqParams::default().validate().is_ok());
        assert!(SpoqParams::default().with_pq(0.75, 2.0).validate().is_ok());
    }

    #[test]
    fn lp_examples() {
        let prm = params(1.0, 2.0);
        assert_eq!(lp_alpha_p(&[0.0; 6], &prm).unwrap(), 0.0);
        let p2 = SpoqParams { p: 2.0, alpha: 0.3, ..prm };
        assert!((lp_alpha_p(&[3.0], &p2).unwrap() - 9.0).abs() < 1e-13);
        assert!(lp_alpha_p(&[f64::NAN], &prm).is_err());
    }

    // Direct formula with Neumaier-compensated summation.
    fn lp_oracle(s: &[f64], prm: &SpoqParams) -> f64 {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for v in s {
            let term = (v * v + prm.alpha * prm.alpha).powf(prm.p / 2.0) - prm.alpha.powf(prm.p);
            let t = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - t) + term;
            } else {
                comp += (term - t) + sum;
            }
            sum = t;
        }
        sum + comp
    }

    #[test]
    fn lp_matches_compensated_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let prm = params(0.75, 2.0);
        for _ in 0..50 {
            let s: Vec<f64> = (0..40).map(|_| rng.random_range(-3.0..3.0)).collect();
            let got = lp_alpha_p(&s, &prm).unwrap();
            let want = lp_oracle(&s, &prm);
            assert!(((got - want) / want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn lq_examples() {
        let prm = params(1.0, 2.0);
        assert!((lq_eta(&[0.0; 4], &prm).unwrap() - 0.1).abs() < 1e-16);
        let tiny = SpoqParams { eta: 1e-30, ..prm };
        assert!((lq_eta(&[3.0, 4.0], &tiny).unwrap() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn lq_is_monotone_in_each_magnitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for q in [2.0, 3.0] {
            let prm = params(1.0, q);
            for _ in 0..50 {
                let s = random_signal(&mut rng, 12);
                let i = rng.random_range(0..12);
                let mut t = s.clone();
                let d = rng.random_range(0.01..1.0);
                t[i] = if s[i] < 0.0 { s[i] - d } else { s[i] + d };
                assert!(lq_eta(&t, &prm).unwrap() > lq_eta(&s, &prm).unwrap());
            }
        }
    }

    #[test]
    fn psi_examples() {
        let prm = params(0.75, 2.0);
        let z = psi(&[0.0; 10], &prm).unwrap();
        assert!((z - (prm.beta / prm.eta).ln()).abs() < 1e-14);
        let big: Vec<f64> = (0..20).map(|i| 1e6 * (i as f64 - 9.5)).collect();
        assert!(psi(&big, &prm).unwrap().is_finite());
    }

    #[test]
    fn psi_matches_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (p, q) in [(1.0, 2.0), (0.75, 2.0), (1.2, 3.0)] {
            let prm = params(p, q);
            for _ in 0..30 {
                let s = random_signal(&mut rng, 25);
                let lp = lp_alpha_p(&s, &prm).unwrap();
                let lq = lq_eta(&s, &prm).unwrap();
                let want = (lp + prm.beta.powf(p)).ln() / p - lq.ln();
                assert!((psi(&s, &prm).unwrap() - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn psi_ignores_signs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let prm = params(0.75, 2.0);
        let s = random_signal(&mut rng, 30);
        let flipped: Vec<f64> = s
            .iter()
            .map(|v| if rng.random_bool(0.5) { -v } else { *v })
            .collect();
        assert_eq!(psi(&s, &prm).unwrap(), psi(&flipped, &prm).unwrap());
    }

    #[test]
    fn gradient_edge_cases() {
        let prm = params(1.0, 2.0);
        assert!(grad_psi(&[0.0; 5], &prm).unwrap().iter().all(|g| *g == 0.0));
        let a = grad_psi(&[1.7], &prm).unwrap()[0];
        let b = grad_psi(&[-1.7], &prm).unwrap()[0];
        assert_eq!(a, -b);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (p, q) in [(1.0, 2.0), (0.75, 2.0)] {
            let prm = params(p, q);
            for n in [4, 32] {
                for _ in 0..10 {
                    let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..4.0)).collect();
                    let g = grad_psi(&s, &prm).unwrap();
                    let mut fd = vec![0.0; n];
                    for i in 0..n {
                        let h = 1e-6 * (1.0 + s[i].abs());
                        let mut sp = s.clone();
                        let mut sm = s.clone();
                        sp[i] += h;
                        sm[i] -= h;
                        fd[i] = (psi(&sp, &prm).unwrap() - psi(&sm, &prm).unwrap()) / (2.0 * h);
                    }
                    let err: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum();
                    let nrm: f64 = fd.iter().map(|v| v * v).sum();
                    assert!((err / nrm).sqrt() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn chi_for_q_two() {
        let prm = params(1.0, 2.0);
        for rho in [0.0, 0.3, 7.0] {
            let want = 1.0 / (prm.eta * prm.eta + rho * rho);
            assert!((chi(&prm, rho) - want).abs() <= 1e-14 * want);
        }
    }

    #[test]
    fn metric_without_penalty_is_constant() {
        let prm = SpoqParams {
            lambda: 0.0,
            ..params(1.0, 2.0)
        };
        let d = mm_metric_diag(&[0.0, 2.0, -1.0], 0.37, 1.0, &prm).unwrap();
        assert!(d.iter().all(|v| *v == 0.37));
        assert!(mm_metric_diag(&[1.0], 0.0, 1.0, &prm).is_err());
        assert!(mm_metric_diag(&[1.0], 1.0, -1.0, &prm).is_err());
    }

    // Penalty part of the majorization: with data term removed, lambda*psi is
    // majorized on the ball complement by the quadratic with metric
    // lambda*chi + lambda*curvature.
    #[test]
    fn metric_majorizes_penalty_on_ball_complement() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for (p, q) in [(1.0, 2.0), (0.75, 2.0)] {
            let prm = SpoqParams {
                beta: 5e-3,
                ..params(p, q)
            };
            for _ in 0..20 {
                let s: Vec<f64> = (0..12)
                    .map(|_| {
                        if rng.random_bool(0.5) {
                            0.0
                        } else {
                            rng.random_range(0.0..5.0)
                        }
                    })
                    .collect();
                let norm_q = lq_power_sum(&s, q).powf(1.0 / q);
                let rho = rng.random_range(0.0..1.0) * norm_q;
                let tiny = 1e-300;
                let diag = mm_metric_diag(&s, tiny, rho, &prm).unwrap();
                let g = grad_psi(&s, &prm).unwrap();
                let f0 = prm.lambda * psi(&s, &prm).unwrap();
                let mut tested = 0;
                while tested < 100 {
                    let t: Vec<f64> = s
                        .iter()
                        .map(|v| (v + rng.random_range(-2.0..2.0)).max(0.0))
                        .collect();
                    if !in_ball_complement(&t, rho, q) {
                        continue;
                    }
                    tested += 1;
                    let mut bound = f0;
                    for i in 0..12 {
                        let d = t[i] - s[i];
                        bound += prm.lambda * g[i] * d + 0.5 * diag[i] * d * d;
                    }
                    let val = prm.lambda * psi(&t, &prm).unwrap();
                    assert!(val <= bound + 1e-9, "{val} > {bound}");
                }
            }
        }
    }

    #[test]
    fn ball_complement_membership() {
        assert!(in_ball_complement(&[0.0, 0.0], 0.0, 2.0));
        assert!(!in_ball_complement(&[0.0, 0.0], 0.5, 2.0));
        assert!(in_ball_complement(&[3.0, 4.0], 5.0, 2.0));
        assert!(!in_ball_complement(&[3.0, 4.0], 5.000001, 2.0));
    }
}
