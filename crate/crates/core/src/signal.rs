//! Signal and kernel vectors, and the zero-padded "same"-mode convolution
//! together with its two adjoints.
//!
//! For a signal `s` of length `N` and an odd-length kernel `k` of length `L`
//! with half-width `h = (L - 1) / 2`,
//!
//! ```text
//! (k * s)[n] = sum_l k[l] * s[n + h - l]        (s out of range = 0)
//! ```
//!
//! so a centered unit impulse kernel is the identity. The map `s -> k * s`
//! is written `C_k`, the map `k -> k * s` is written `D_s`.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the unit sum of a kernel constrained to the simplex.
pub const SIMPLEX_SUM_TOL: f64 = 1e-12;

/// Real-valued 1-D series (observation, spikes, trend, residual).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SignalVector(Vec<f64>);

impl SignalVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("signal must have at least one sample"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("signal entry {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n.max(1)])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Indices of nonzero entries.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

impl Deref for SignalVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for SignalVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SignalVector> for Vec<f64> {
    fn from(s: SignalVector) -> Vec<f64> {
        s.0
    }
}

/// Nonnegative convolution kernel. Kernels produced by the solver and the
/// generator additionally lie on the unit simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct KernelVector(Vec<f64>);

impl KernelVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("kernel must have at least one tap"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(format!(
                "kernel tap {i} is negative or not finite"
            )));
        }
        Ok(Self(values))
    }

    /// Builds a kernel that must lie on the unit simplex.
    pub fn on_simplex(values: Vec<f64>) -> Result<Self> {
        let k = Self::new(values)?;
        if !k.is_on_simplex() {
            return Err(Error::invalid(format!(
                "kernel sums to {} instead of 1",
                k.0.iter().sum::<f64>()
            )));
        }
        Ok(k)
    }

    /// Centered unit impulse of odd length `len`.
    pub fn impulse(len: usize) -> Self {
        let mut v = vec![0.0; len.max(1)];
        v[(len.max(1) - 1) / 2] = 1.0;
        Self(v)
    }

    /// Discrete Gaussian `exp(-x^2 / (2 sigma^2))` sampled at the points
    /// `grid`, normalized to unit sum.
    pub fn gaussian_on_grid(grid: &[f64], sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::invalid("gaussian width must be positive"));
        }
        let raw: Vec<f64> = grid
            .iter()
            .map(|u| (-u * u / (2.0 * sigma * sigma)).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        Self::new(raw.into_iter().map(|v| v / total).collect())
    }

    /// Centered Gaussian with standard deviation `sigma` in samples.
    pub fn centered_gaussian(len: usize, sigma: f64) -> Result<Self> {
        let h = (len as f64 - 1.0) / 2.0;
        let grid: Vec<f64> = (0..len).map(|l| l as f64 - h).collect();
        Self::gaussian_on_grid(&grid, sigma)
    }

    pub fn is_on_simplex(&self) -> bool {
        let sum: f64 = self.0.iter().sum();
        (sum - 1.0).abs() <= SIMPLEX_SUM_TOL && self.0.iter().all(|v| *v >= 0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for KernelVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for KernelVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<KernelVector> for Vec<f64> {
    fn from(k: KernelVector) -> Vec<f64> {
        k.0
    }
}

fn check_shapes(n: usize, l: usize) -> Result<()> {
    if l == 0 || l % 2 == 0 {
        return Err(Error::invalid(format!("kernel length {l} must be odd")));
    }
    if l > n {
        return Err(Error::invalid(format!(
            "kernel length {l} exceeds signal length {n}"
        )));
    }
    Ok(())
}

/// "Same"-mode zero-padded convolution `k * s`.
pub fn convolve_same(s: &[f64], k: &[f64]) -> Result<Vec<f64>> {
    check_shapes(s.len(), k.len())?;
    let mut out = vec![0.0; s.len()];
    convolve_into(s, k, &mut out);
    Ok(out)
}

/// Adjoint of `s -> k * s`, i.e. `C_k^T r`.
pub fn convolve_adjoint_signal(r: &[f64], k: &[f64]) -> Result<Vec<f64>> {
    check_shapes(r.len(), k.len())?;
    let mut out = vec![0.0; r.len()];
    adjoint_signal_into(r, k, &mut out);
    Ok(out)
}

/// Adjoint of `k -> k * s` for kernels of length `len`, i.e. `D_s^T r`.
pub fn convolve_adjoint_kernel(r: &[f64], s: &[f64], len: usize) -> Result<Vec<f64>> {
    if r.len() != s.len() {
        return Err(Error::invalid(format!(
            "residual length {} differs from signal length {}",
            r.len(),
            s.len()
        )));
    }
    check_shapes(s.len(), len)?;
    let mut out = vec![0.0; len];
    adjoint_kernel_into(r, s, &mut out);
    Ok(out)
}

// Unchecked kernels used on the solver hot path. Shapes are validated once
// when a problem instance is built.

pub(crate) fn convolve_into(s: &[f64], k: &[f64], out: &mut [f64]) {
    let n = s.len() as isize;
    let h = (k.len() as isize - 1) / 2;
    for (i, o) in out.iter_mut().enumerate() {
        let i = i as isize;
        let mut acc = 0.0;
        for (l, kl) in k.iter().enumerate() {
            let j = i + h - l as isize;
            if j >= 0 && j < n {
                acc += kl * s[j as usize];
            }
        }
        *o = acc;
    }
}

pub(crate) fn adjoint_signal_into(r: &[f64], k: &[f64], out: &mut [f64]) {
    let n = r.len() as isize;
    let h = (k.len() as isize - 1) / 2;
    for (m, o) in out.iter_mut().enumerate() {
        let m = m as isize;
        let mut acc = 0.0;
        for (l, kl) in k.iter().enumerate() {
            let i = m - h + l as isize;
            if i >= 0 && i < n {
                acc += kl * r[i as usize];
            }
        }
        *o = acc;
    }
}

pub(crate) fn adjoint_kernel_into(r: &[f64], s: &[f64], out: &mut [f64]) {
    let n = s.len() as isize;
    let h = (out.len() as isize - 1) / 2;
    for (l, o) in out.iter_mut().enumerate() {
        let shift = h - l as isize;
        let mut acc = 0.0;
        for (i, ri) in r.iter().enumerate() {
            let j = i as isize + shift;
            if j >= 0 && j < n {
                acc += ri * s[j as usize];
            }
        }
        *o = acc;
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
