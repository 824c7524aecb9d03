//! Synthetic peak-signal datasets: sparse positive spikes convolved with a
//! Gaussian kernel, plus a smooth trend and white Gaussian noise,
//!
//! ```text
//! y = k * s + t + n
//! ```
//!
//! The spike positions, amplitudes and trend are drawn from a generator
//! seeded with `DatasetSpec::seed`. Noise comes from an independent stream,
//! keyed by a noise seed, so that repeated noise realizations can share one
//! clean signal.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{convolve_same, KernelVector, SignalVector};

/// Width of the generating Gaussian on the normalized grid `linspace(-1, 1, L)`.
pub const DEFAULT_KERNEL_SIGMA: f64 = 0.15;

const OFFSET: f64 = 1.2;
const RAMP: f64 = 0.1;

/// Maximum number of restarts of the spike placement.
const PLACEMENT_RETRIES: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub n_samples: usize,
    pub kernel_len: usize,
    /// Standard deviation of the Gaussian kernel on the grid
    /// `linspace(-1, 1, kernel_len)`.
    pub kernel_sigma: f64,
    pub n_spikes: usize,
    /// Noise standard deviation as a fraction of the peak amplitude of `k * s`.
    pub noise_frac: f64,
    pub seed: u64,
    pub amplitude_range: (f64, f64),
    pub min_separation: usize,
    /// Trend peak amplitude as a fraction of the peak amplitude of `k * s`.
    #[serde(default = "default_trend_frac")]
    pub trend_frac: f64,
    /// Largest ramp slope of the trend, relative to its offset, drawn
    /// uniformly in `[-trend_ramp, trend_ramp]`.
    #[serde(default = "default_trend_ramp")]
    pub trend_ramp: f64,
}

fn default_trend_frac() -> f64 {
    0.5
}

fn default_trend_ramp() -> f64 {
    RAMP
}

impl DatasetSpec {
    /// Sparse, well separated peaks: 10 spikes on 200 samples.
    pub fn dataset_a(noise_frac: f64, seed: u64) -> Self {
        Self {
            n_samples: 200,
            kernel_len: 21,
            kernel_sigma: DEFAULT_KERNEL_SIGMA,
            n_spikes: 10,
            noise_frac,
            seed,
            amplitude_range: (1.0, 10.0),
            min_separation: 5,
            trend_frac: default_trend_frac(),
            trend_ramp: default_trend_ramp(),
        }
    }

    /// Denser peaks that may overlap: 20 spikes on 200 samples.
    pub fn dataset_b(noise_frac: f64, seed: u64) -> Self {
        Self {
            n_spikes: 20,
            min_separation: 2,
            ..Self::dataset_a(noise_frac, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if self.n_samples == 0 {
            return bad("n_samples must be positive".into());
        }
        if self.kernel_len % 2 == 0 || self.kernel_len > self.n_samples {
            return bad(format!(
                "kernel_len {} must be odd and at most n_samples",
                self.kernel_len
            ));
        }
        if !(self.kernel_sigma > 0.0) {
            return bad("kernel_sigma must be positive".into());
        }
        if self.n_spikes == 0 || self.n_spikes * self.min_separation.max(1) >= self.n_samples {
            return bad(format!(
                "{} spikes with separation {} do not fit in {} samples",
                self.n_spikes, self.min_separation, self.n_samples
            ));
        }
        if !(0.0..=1.0).contains(&self.noise_frac) {
            return bad(format!("noise_frac {} must lie in [0, 1]", self.noise_frac));
        }
        let (lo, hi) = self.amplitude_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad(format!("amplitude range ({lo}, {hi}) is invalid"));
        }
        if !(self.trend_frac >= 0.0 && self.trend_frac.is_finite()) {
            return bad("trend_frac must be nonnegative".into());
        }
        if !(0.0..=1.0).contains(&self.trend_ramp) {
            return bad("trend_ramp must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// The generating kernel: `exp(-u^2 / (2 sigma^2))` at
    /// `u = linspace(-1, 1, L)`, normalized to unit sum.
    pub fn kernel(&self) -> Result<KernelVector> {
        let l = self.kernel_len;
        let grid: Vec<f64> = if l == 1 {
            vec![0.0]
        } else {
            (0..l)
                .map(|i| (2 * i as i64 - (l as i64 - 1)) as f64 / (l - 1) as f64)
                .collect()
        };
        KernelVector::gaussian_on_grid(&grid, self.kernel_sigma)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spikes: SignalVector,
    pub kernel: KernelVector,
    pub trend: SignalVector,
    /// Noise standard deviation as a fraction of `x_max`.
    pub noise_sigma: f64,
    /// Indices where `spikes` is nonzero.
    pub support: Vec<usize>,
}

impl GroundTruth {
    /// Clean peak signal `k * s`.
    pub fn peak_signal(&self) -> Vec<f64> {
        convolve_same(&self.spikes, &self.kernel).expect("shapes checked at generation")
    }

    /// `x_max`, the largest amplitude of the clean peak signal.
    pub fn x_max(&self) -> f64 {
        self.peak_signal().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A generated realization: ground truth, noise and observation.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub truth: GroundTruth,
    pub noise: Vec<f64>,
    pub observation: SignalVector,
}

/// Draws spikes and trend from `spec.seed` and the noise from the stream keyed
/// by `spec.seed` itself.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<(GroundTruth, SignalVector)> {
    let d = generate_with_noise_seed(spec, spec.seed)?;
    Ok((d.truth, d.observation))
}

/// Same clean signal as [`generate_dataset`] with a noise realization chosen
/// by `noise_seed`.
pub fn generate_with_noise_seed(spec: &DatasetSpec, noise_seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_samples;
    let kernel = spec.kernel()?;

    let positions = place_spikes(&mut rng, spec)?;
    let (lo, hi) = spec.amplitude_range;
    let mut spikes = vec![0.0; n];
    for &pos in &positions {
        spikes[pos] = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    }
    let peaks = convolve_same(&spikes, &kernel)?;
    let x_max = peaks.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let trend = trend_waveform(&mut rng, n, spec.trend_frac * x_max, spec.trend_ramp);

    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    noise_rng.set_stream(noise_seed.wrapping_add(1));
    let std = spec.noise_frac * x_max;
    let noise: Vec<f64> = if std > 0.0 {
        let dist = Normal::new(0.0, std).map_err(|e| Error::GenerationFailure(e.to_string()))?;
        (0..n).map(|_| dist.sample(&mut noise_rng)).collect()
    } else {
        vec![0.0; n]
    };

    let observation: Vec<f64> = (0..n).map(|i| peaks[i] + trend[i] + noise[i]).collect();
    let spikes = SignalVector::new(spikes)?;
    let support = spikes.support();
    Ok(Dataset {
        spec: spec.clone(),
        truth: GroundTruth {
            spikes,
            kernel,
            trend: SignalVector::new(trend)?,
            noise_sigma: spec.noise_frac,
            support,
        },
        noise,
        observation: SignalVector::new(observation)?,
    })
}

/// Sorted spike positions at pairwise distance `>= min_separation`, kept
/// at least one kernel half-width away from the ends.
fn place_spikes(rng: &mut ChaCha8Rng, spec: &DatasetSpec) -> Result<Vec<usize>> {
    let n = spec.n_samples;
    let margin = (spec.kernel_len - 1) / 2;
    let (first, last) = if n > 2 * margin + spec.n_spikes {
        (margin, n - 1 - margin)
    } else {
        (0, n - 1)
    };
    let sep = spec.min_separation.max(1);
    for _ in 0..PLACEMENT_RETRIES {
        let mut chosen: Vec<usize> = Vec::with_capacity(spec.n_spikes);
        let mut attempts = 0;
        while chosen.len() < spec.n_spikes && attempts < 50 * spec.n_spikes {
            attempts += 1;
            let pos = rng.random_range(first..=last);
            if chosen.iter().all(|&c| c.abs_diff(pos) >= sep) {
                chosen.push(pos);
            }
        }
        if chosen.len() == spec.n_spikes {
            chosen.sort_unstable();
            return Ok(chosen);
        }
    }
    Err(Error::GenerationFailure(format!(
        "could not place {} spikes with separation {} in {} samples",
        spec.n_spikes, spec.min_separation, n
    )))
}

/// Positive low-frequency baseline: an offset, one- and two-cycle sinusoids
/// and a gentle linear ramp, scaled so its peak equals `amplitude`.
fn trend_waveform(rng: &mut ChaCha8Rng, n: usize, amplitude: f64, ramp: f64) -> Vec<f64> {
    let phase1 = rng.random_range(0.0..2.0 * PI);
    let phase2 = rng.random_range(0.0..2.0 * PI);
    let slope = OFFSET * ramp * rng.random_range(-1.0..=1.0);
    let raw: Vec<f64> = (0..n)
        .map(|i| {
            let u = i as f64 / n as f64;
            OFFSET + 0.5 * (2.0 * PI * u + phase1).sin()
                + 0.25 * (4.0 * PI * u + phase2).sin()
                + slope * (u - 0.5)
        })
        .collect();
    let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 || amplitude == 0.0 {
        return vec![0.0; n];
    }
    raw.into_iter().map(|v| v * amplitude / peak).collect()
}

/// Serialized dataset. Ground-truth fields are optional so that observed
/// (non-synthetic) signals can use the same document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetDocument {
    #[serde(default)]
    pub spec: Option<DatasetSpec>,
    #[serde(default)]
    pub spikes: Option<SignalVector>,
    #[serde(default)]
    pub kernel: Option<KernelVector>,
    #[serde(default)]
    pub trend: Option<SignalVector>,
    #[serde(default)]
    pub noise_sigma: Option<f64>,
    pub observation: SignalVector,
}

impl DatasetDocument {
    pub fn from_parts(spec: &DatasetSpec, truth: &GroundTruth, observation: &SignalVector) -> Self {
        Self {
            spec: Some(spec.clone()),
            spikes: Some(truth.spikes.clone()),
            kernel: Some(truth.kernel.clone()),
            trend: Some(truth.trend.clone()),
            noise_sigma: Some(truth.noise_sigma),
            observation: observation.clone(),
        }
    }

    /// Ground truth when the document carries spikes, kernel and trend.
    pub fn ground_truth(&self) -> Option<GroundTruth> {
        let spikes = self.spikes.clone()?;
        let kernel = self.kernel.clone()?;
        let trend = self.trend.clone()?;
        let support = spikes.support();
        Some(GroundTruth {
            spikes,
            kernel,
            trend,
            noise_sigma: self.noise_sigma.unwrap_or(0.0),
            support,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.observation.len();
        for (name, v) in [("spikes", &self.spikes), ("trend", &self.trend)] {
            if let Some(v) = v {
                if v.len() != n {
                    return Err(Error::invalid(format!(
                        "{name} has length {} but observation has {n}",
                        v.len()
                    )));
                }
            }
        }
        if let Some(k) = &self.kernel {
            if k.len() % 2 == 0 || k.len() > n {
                return Err(Error::invalid("kernel length must be odd and at most N"));
            }
        }
        Ok(())
    }
}
