//! Zero-phase DFT-domain low-pass filter `L`, its complement `H = Id - L`,
//! and the spectral-peak heuristic used to pick the cutoff.
//!
//! The frequency response depends only on the folded bin index
//! `f = min(k, N - k)`:
//!
//! * `1` for `f < cutoff_bin`
//! * raised-cosine taper `(1 + cos(pi (f - cutoff_bin + 1) / (T + 1))) / 2`
//!   for `cutoff_bin <= f <= cutoff_bin + T`
//! * `0` for `f > cutoff_bin + T`
//!
//! With `T = 0` the filter is an ideal projector and `cutoff_bin = 0` gives
//! `L = 0`, `H = Id`. The response is real and even, so both operators are
//! real, symmetric and have spectral norm at most one.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use log::warn;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of spectral peaks turned into cutoff candidates.
pub const MAX_SPECTRAL_PEAKS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub cutoff_bin: usize,
    #[serde(default = "default_transition")]
    pub transition_bins: usize,
}

fn default_transition() -> usize {
    2
}

impl FilterSpec {
    pub fn new(cutoff_bin: usize, transition_bins: usize) -> Self {
        Self {
            cutoff_bin,
            transition_bins,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.cutoff_bin + self.transition_bins > n / 2 {
            return Err(Error::invalid(format!(
                "cutoff_bin {} + transition_bins {} exceeds N/2 = {}",
                self.cutoff_bin,
                self.transition_bins,
                n / 2
            )));
        }
        Ok(())
    }

    /// Low-pass gain at folded frequency index `f`.
    pub fn gain(&self, f: usize) -> f64 {
        let c = self.cutoff_bin;
        let t = self.transition_bins;
        if f < c {
            1.0
        } else if f > c + t {
            0.0
        } else {
            let x = (f - c + 1) as f64 / (t + 1) as f64;
            0.5 * (1.0 + (PI * x).cos())
        }
    }
}

/// A [`FilterSpec`] realized for a fixed signal length, with cached FFT plans.
#[derive(Clone)]
pub struct LowPassFilter {
    spec: FilterSpec,
    response: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for LowPassFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LowPassFilter")
            .field("spec", &self.spec)
            .field("len", &self.response.len())
            .finish()
    }
}

impl LowPassFilter {
    pub fn new(spec: FilterSpec, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("filter length must be positive"));
        }
        spec.validate(n)?;
        let response = (0..n).map(|k| spec.gain(k.min(n - k))).collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            spec,
            response,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn spec(&self) -> FilterSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    /// Low-pass gain per DFT bin.
    pub fn response(&self) -> &[f64] {
        &self.response
    }

    fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.len() {
            return Err(Error::invalid(format!(
                "signal length {} does not match filter length {}",
                y.len(),
                self.len()
            )));
        }
        Ok(())
    }

    fn multiply(&self, y: &[f64], gain: impl Fn(f64) -> f64, out: &mut [f64]) {
        let n = y.len();
        let mut buf: Vec<Complex<f64>> = y.iter().map(|v| Complex::new(*v, 0.0)).collect();
        self.forward.process(&mut buf);
        for (b, h) in buf.iter_mut().zip(&self.response) {
            *b *= gain(*h);
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / n as f64;
        for (o, b) in out.iter_mut().zip(&buf) {
            *o = b.re * scale;
        }
    }

    pub fn apply_lowpass(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y)?;
        let mut out = vec![0.0; y.len()];
        self.lowpass_into(y, &mut out);
        Ok(out)
    }

    /// `H y = y - L y`, elementwise.
    pub fn apply_highpass(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y)?;
        let mut out = vec![0.0; y.len()];
        self.highpass_into(y, &mut out);
        Ok(out)
    }

    pub(crate) fn lowpass_into(&self, y: &[f64], out: &mut [f64]) {
        self.multiply(y, |h| h, out);
    }

    pub(crate) fn highpass_into(&self, y: &[f64], out: &mut [f64]) {
        self.lowpass_into(y, out);
        for (o, v) in out.iter_mut().zip(y) {
            *o = v - *o;
        }
    }

    /// `H^T H y = H H y`.
    pub(crate) fn highpass_gram_into(&self, y: &[f64], out: &mut [f64]) {
        self.multiply(y, |h| (1.0 - h) * (1.0 - h), out);
    }
}

/// Convenience wrapper building the filter for `y.len()`.
pub fn apply_lowpass(y: &[f64], spec: FilterSpec) -> Result<Vec<f64>> {
    LowPassFilter::new(spec, y.len())?.apply_lowpass(y)
}

pub fn apply_highpass(y: &[f64], spec: FilterSpec) -> Result<Vec<f64>> {
    LowPassFilter::new(spec, y.len())?.apply_highpass(y)
}

/// DFT modulus of a real signal for bins `0..=N/2`.
pub fn spectrum_modulus(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut buf: Vec<Complex<f64>> = y.iter().map(|v| Complex::new(*v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.iter().take(n / 2 + 1).map(|c| c.norm()).collect()
}

/// Bins of the first `max_peaks` local maxima of the spectrum modulus, in
/// ascending order. DC is excluded; a peak must strictly exceed its left
/// neighbour and be at least its right neighbour. Peaks below `1e-12` of the
/// largest modulus are rounding noise and ignored.
pub fn spectral_peaks(y: &[f64], max_peaks: usize) -> Vec<usize> {
    let m = spectrum_modulus(y);
    let floor = 1e-12 * m.iter().cloned().fold(0.0, f64::max);
    let last = m.len().saturating_sub(1);
    let mut peaks = Vec::new();
    for k in 1..=last {
        let right = if k < last { m[k + 1] } else { f64::NEG_INFINITY };
        if m[k] > floor && m[k] > m[k - 1] && m[k] >= right {
            peaks.push(k);
            if peaks.len() == max_peaks {
                break;
            }
        }
    }
    peaks
}

/// Candidate cutoffs from the spectral peaks of `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct CutoffCandidates {
    pub candidates: Vec<FilterSpec>,
    /// Set when no usable peak existed and the `N / 20` default was used.
    pub fallback: bool,
}

pub fn cutoff_candidates(y: &[f64], transition_bins: usize) -> CutoffCandidates {
    let n = y.len();
    let candidates: Vec<FilterSpec> = spectral_peaks(y, MAX_SPECTRAL_PEAKS)
        .into_iter()
        .map(|k| FilterSpec::new(k, transition_bins))
        .filter(|f| f.validate(n).is_ok())
        .collect();
    if candidates.is_empty() {
        warn!("no spectral peak usable as cutoff; falling back to N/20");
        let cutoff = (n / 20).max(1).min(n / 2);
        let fallback = FilterSpec::new(cutoff, transition_bins.min(n / 2 - cutoff));
        return CutoffCandidates {
            candidates: vec![fallback],
            fallback: true,
        };
    }
    CutoffCandidates {
        candidates,
        fallback: false,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutoffSelection {
    pub spec: FilterSpec,
    pub scores: Vec<(FilterSpec, f64)>,
    pub fallback: bool,
}

/// Scores every candidate and returns the best one; ties go to the smaller
/// cutoff bin. Non-finite scores never win over finite ones.
pub fn select_cutoff<F>(candidates: &[FilterSpec], mut scorer: F) -> Result<CutoffSelection>
where
    F: FnMut(FilterSpec) -> f64,
{
    if candidates.is_empty() {
        return Err(Error::invalid("no cutoff candidates"));
    }
    let scores: Vec<(FilterSpec, f64)> = candidates.iter().map(|c| (*c, scorer(*c))).collect();
    let mut best = 0;
    for (i, (spec, score)) in scores.iter().enumerate().skip(1) {
        let (bspec, bscore) = scores[best];
        let better = match (score.is_nan(), bscore.is_nan()) {
            (true, _) => false,
            (false, true) => true,
            _ => *score > bscore || (*score == bscore && spec.cutoff_bin < bspec.cutoff_bin),
        };
        if better {
            best = i;
        }
    }
    Ok(CutoffSelection {
        spec: scores[best].0,
        scores,
        fallback: false,
    })
}

/// Forms candidates from the spectrum of `y` and selects among them.
pub fn select_cutoff_from_spectrum<F>(
    y: &[f64],
    transition_bins: usize,
    scorer: F,
) -> Result<CutoffSelection>
where
    F: FnMut(FilterSpec) -> f64,
{
    let cands = cutoff_candidates(y, transition_bins);
    let mut sel = select_cutoff(&cands.candidates, scorer)?;
    sel.fallback = cands.fallback;
    Ok(sel)
}
