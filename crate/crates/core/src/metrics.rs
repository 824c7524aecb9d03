//! Reconstruction quality in decibels.

use serde::{Deserialize, Serialize};

use crate::dataset::GroundTruth;
use crate::error::{Error, Result};
use crate::solver::{center_shift_postprocess, SolveResult};

/// Value reported when the estimate equals the reference exactly.
pub const SNR_CAP_DB: f64 = 300.0;

/// `20 log10(||ref|| / ||ref - est||)`, capped at [`SNR_CAP_DB`].
pub fn snr(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::invalid(format!(
            "reference has length {} but estimate has {}",
            reference.len(),
            estimate.len()
        )));
    }
    // Scaled norms so that tiny or huge amplitudes neither underflow nor overflow.
    let scale = reference
        .iter()
        .chain(estimate)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if !scale.is_finite() {
        return Err(Error::invalid("non-finite values"));
    }
    let num: f64 = reference.iter().map(|r| (r / scale).powi(2)).sum();
    if !(num > 0.0) {
        return Err(Error::invalid("reference signal is identically zero"));
    }
    let den: f64 = reference
        .iter()
        .zip(estimate)
        .map(|(r, e)| (r / scale - e / scale).powi(2))
        .sum();
    if den == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((10.0 * (num / den).log10()).min(SNR_CAP_DB))
}

/// SNR restricted to the support of the true spikes.
pub fn tsnr(truth: &GroundTruth, estimate: &[f64]) -> Result<f64> {
    if truth.support.is_empty() {
        return Err(Error::invalid("true support is empty"));
    }
    if estimate.len() != truth.spikes.len() {
        return Err(Error::invalid("estimate length differs from the true signal"));
    }
    let r: Vec<f64> = truth.support.iter().map(|&i| truth.spikes[i]).collect();
    let e: Vec<f64> = truth.support.iter().map(|&i| estimate[i]).collect();
    snr(&r, &e)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub snr_s: f64,
    pub tsnr_s: f64,
    pub snr_t: f64,
    pub snr_pi: f64,
    /// `2 snr_s + snr_pi + snr_t`.
    pub weighted: f64,
}

impl MetricsReport {
    pub fn new(snr_s: f64, tsnr_s: f64, snr_t: f64, snr_pi: f64) -> Self {
        Self {
            snr_s,
            tsnr_s,
            snr_t,
            snr_pi,
            weighted: 2.0 * snr_s + snr_pi + snr_t,
        }
    }

    pub const NAMES: [&'static str; 5] = ["snr_s", "tsnr_s", "snr_t", "snr_pi", "weighted"];

    pub fn values(&self) -> [f64; 5] {
        [self.snr_s, self.tsnr_s, self.snr_t, self.snr_pi, self.weighted]
    }
}

/// Scores raw estimates against the truth without any realignment.
pub fn evaluate_estimates(truth: &GroundTruth, s: &[f64], pi: &[f64], t: &[f64]) -> Result<MetricsReport> {
    Ok(MetricsReport::new(
        snr(&truth.spikes, s)?,
        tsnr(truth, s)?,
        snr(&truth.trend, t)?,
        snr(&truth.kernel, pi)?,
    ))
}

/// Scores a solve after recentring its kernel. The trend estimate does not
/// depend on the shift and is used as is.
pub fn evaluate(truth: &GroundTruth, result: &SolveResult) -> Result<MetricsReport> {
    let (s, pi) = center_shift_postprocess(&result.s_hat, &result.pi_hat);
    evaluate_estimates(truth, &s, &pi, &result.t_hat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{KernelVector, SignalVector};

    #[test]
    fn snr_examples() {
        let r = [3.0, 4.0];
        assert_eq!(snr(&r, &r).unwrap(), SNR_CAP_DB);
        assert!(snr(&r, &[0.0, 0.0]).unwrap().abs() < 1e-12);
        assert!((snr(&r, &[3.0, 4.5]).unwrap() - 20.0).abs() < 1e-12);
        assert!(snr(&[0.0, 0.0], &r).is_err());
        assert!(snr(&r, &[1.0]).is_err());
    }

    #[test]
    fn snr_is_scale_invariant() {
        let r = [1.0, -2.0, 3.5, 0.25];
        let e = [1.1, -1.9, 3.0, 0.0];
        let base = snr(&r, &e).unwrap();
        for c in [-3.0, 1e-200, 1e200, 7.0] {
            let rs: Vec<f64> = r.iter().map(|v| v * c).collect();
            let es: Vec<f64> = e.iter().map(|v| v * c).collect();
            assert!((snr(&rs, &es).unwrap() - base).abs() < 1e-9);
        }
    }

    fn truth() -> GroundTruth {
        let spikes = SignalVector::new(vec![0.0, 2.0, 0.0, 0.0, 4.0, 0.0]).unwrap();
        GroundTruth {
            support: spikes.support(),
            spikes,
            kernel: KernelVector::impulse(3),
            trend: SignalVector::new(vec![1.0; 6]).unwrap(),
            noise_sigma: 0.0,
        }
    }

    #[test]
    fn tsnr_ignores_off_support_errors() {
        let t = truth();
        let est = [9.0, 2.0, -3.0, 5.0, 4.0, 1.0];
        assert_eq!(tsnr(&t, &est).unwrap(), SNR_CAP_DB);
        assert!(snr(&t.spikes, &est).unwrap() < 10.0);
        assert!(tsnr(&t, &[0.0; 6]).unwrap().abs() < 1e-12);
        // One support sample off by 1: 10 log10(20 / 1).
        let est = [0.0, 2.0, 0.0, 0.0, 3.0, 0.0];
        assert!((tsnr(&t, &est).unwrap() - 10.0 * 20f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn weighted_sum_is_exact() {
        let m = MetricsReport::new(21.5, 30.0, 17.25, 28.0);
        assert_eq!(m.weighted, 2.0 * 21.5 + 28.0 + 17.25);
    }
}
