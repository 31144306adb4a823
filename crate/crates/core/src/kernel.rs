//! Discretized Gaussian window kernels over integer time lags.
//!
//! A kernel assigns a weight to every lag `s` in `[s_min, s_max]`, where the
//! weight of lag `s` is the Gaussian probability mass of `N(delta, sigma^2)`
//! on the unit bin `[s - 1/2, s + 1/2]`. The window spans
//! `floor(delta - 3 sigma) ..= ceil(delta + 3 sigma)`; lags below zero refer to
//! future observations and are dropped (truncation). The remaining weights are
//! renormalized to unit L1 norm.

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Result, SwrError};

/// Half-width of a window in units of sigma.
pub const COVERAGE_SIGMAS: f64 = 3.0;

/// Largest lag a kernel may reach. Wider windows are rejected before any
/// allocation happens.
pub const MAX_KERNEL_LAG: f64 = 16_777_216.0;

/// Location and width of one Gaussian window, in time steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowParams {
    pub delta: f64,
    pub sigma: f64,
}

impl WindowParams {
    pub fn new(delta: f64, sigma: f64) -> Result<Self> {
        let params = Self { delta, sigma };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delta.is_finite() || !self.sigma.is_finite() {
            return Err(SwrError::NonFinite("window parameters"));
        }
        if self.delta < 0.0 {
            return Err(SwrError::InvalidParameter(format!("delta must be non-negative, got {}", self.delta)));
        }
        if self.sigma < 0.0 {
            return Err(SwrError::InvalidParameter(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        Ok(())
    }

    /// Largest lag covered by the window built from these parameters, or
    /// `None` when the window would exceed [`MAX_KERNEL_LAG`].
    pub fn max_lag(&self) -> Option<usize> {
        let hi = if self.sigma == 0.0 {
            nearest_lag(self.delta)
        } else {
            (self.delta + COVERAGE_SIGMAS * self.sigma).ceil()
        };
        (hi.is_finite() && hi <= MAX_KERNEL_LAG).then_some(hi as usize)
    }
}

/// A normalized, possibly truncated, discretized Gaussian lag-weight vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "KernelRecord")]
pub struct WindowKernel {
    params: WindowParams,
    s_min: usize,
    s_max: usize,
    tau: usize,
    mass: f64,
    weights: Vec<f64>,
}

/// JSON shape of a kernel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelRecord {
    pub delta: f64,
    pub sigma: f64,
    pub s_min: usize,
    pub s_max: usize,
    pub weights: Vec<f64>,
}

impl From<WindowKernel> for KernelRecord {
    fn from(k: WindowKernel) -> Self {
        Self { delta: k.params.delta, sigma: k.params.sigma, s_min: k.s_min, s_max: k.s_max, weights: k.weights }
    }
}

impl WindowKernel {
    pub fn params(&self) -> WindowParams {
        self.params
    }

    pub fn delta(&self) -> f64 {
        self.params.delta
    }

    pub fn sigma(&self) -> f64 {
        self.params.sigma
    }

    /// Smallest lag with a weight.
    pub fn s_min(&self) -> usize {
        self.s_min
    }

    /// Largest lag with a weight.
    pub fn s_max(&self) -> usize {
        self.s_max
    }

    /// Number of negative lags removed from the nominal window.
    pub fn tau(&self) -> usize {
        self.tau
    }

    /// Gaussian mass covered by the retained lags before normalization.
    pub fn covered_mass(&self) -> f64 {
        self.mass
    }

    /// Weights for lags `s_min..=s_max`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Weight at lag `s`; zero outside the window.
    pub fn weight_at(&self, lag: usize) -> f64 {
        if lag < self.s_min || lag > self.s_max {
            0.0
        } else {
            self.weights[lag - self.s_min]
        }
    }

    /// Iterator over `(lag, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights.iter().enumerate().map(move |(i, &w)| (self.s_min + i, w))
    }

    /// Embeds the kernel into a dense vector indexed by lag `0..len`.
    pub fn dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len.max(self.s_max + 1)];
        out[self.s_min..=self.s_max].copy_from_slice(&self.weights);
        out
    }

    /// Lag carrying the largest weight.
    pub fn modal_lag(&self) -> usize {
        let mut best = 0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w > self.weights[best] {
                best = i;
            }
        }
        self.s_min + best
    }
}

/// Integer lag nearest to `delta`, ties broken toward the smaller lag.
fn nearest_lag(delta: f64) -> f64 {
    (delta - 0.5).ceil().max(0.0)
}

/// Standard normal probability mass on `[a, b]`, evaluated on whichever side
/// of the distribution avoids cancellation.
pub(crate) fn standard_normal_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        0.5 * (erfc(a * FRAC_1_SQRT_2) - erfc(b * FRAC_1_SQRT_2))
    } else if b <= 0.0 {
        0.5 * (erfc(-b * FRAC_1_SQRT_2) - erfc(-a * FRAC_1_SQRT_2))
    } else {
        0.5 * (erf(b * FRAC_1_SQRT_2) - erf(a * FRAC_1_SQRT_2))
    }
}

/// Builds the discretized Gaussian kernel for `params`.
///
/// With `sigma == 0` the whole mass sits on the lag nearest `delta`.
pub fn build_kernel(params: WindowParams) -> Result<WindowKernel> {
    params.validate()?;
    let WindowParams { delta, sigma } = params;

    if sigma == 0.0 {
        let lag = nearest_lag(delta);
        if lag > MAX_KERNEL_LAG {
            return Err(SwrError::InvalidParameter(format!("window lag {lag} exceeds the supported maximum")));
        }
        let lag = lag as usize;
        return Ok(WindowKernel { params, s_min: lag, s_max: lag, tau: 0, mass: 1.0, weights: vec![1.0] });
    }

    let lo = (delta - COVERAGE_SIGMAS * sigma).floor();
    let hi = (delta + COVERAGE_SIGMAS * sigma).ceil();
    if hi > MAX_KERNEL_LAG {
        return Err(SwrError::InvalidParameter(format!("window upper lag {hi} exceeds the supported maximum")));
    }
    let tau = if lo < 0.0 { (-lo) as usize } else { 0 };
    let s_min = lo.max(0.0) as usize;
    let s_max = hi as usize;

    let mut weights: Vec<f64> = (s_min..=s_max)
        .map(|s| {
            let s = s as f64;
            standard_normal_mass((s - 0.5 - delta) / sigma, (s + 0.5 - delta) / sigma)
        })
        .collect();
    let mass: f64 = weights.iter().sum();
    if !(mass > 0.0) {
        return Err(SwrError::Degenerate(format!(
            "kernel (delta={delta}, sigma={sigma}) has no mass on non-negative lags"
        )));
    }
    for w in &mut weights {
        *w /= mass;
    }

    Ok(WindowKernel { params, s_min, s_max, tau, mass, weights })
}

/// Sums `beta_i * kernel_i` into a dense vector over lags `0..=max s_max`.
/// With `normalize`, the result is divided by its L1 norm.
pub fn combine_kernels(kernels: &[WindowKernel], betas: &[f64], normalize: bool) -> Result<Vec<f64>> {
    if kernels.is_empty() {
        return Err(SwrError::InvalidParameter("no kernels to combine".into()));
    }
    if kernels.len() != betas.len() {
        return Err(SwrError::LengthMismatch { left: kernels.len(), right: betas.len() });
    }
    if let Some(b) = betas.iter().find(|b| !(**b >= 0.0) || !b.is_finite()) {
        return Err(SwrError::InvalidParameter(format!(
            "window coefficients must be finite and non-negative, got {b}"
        )));
    }

    let len = kernels.iter().map(|k| k.s_max + 1).max().unwrap_or(0);
    let mut combined = vec![0.0; len];
    for (kernel, &beta) in kernels.iter().zip(betas) {
        for (lag, w) in kernel.iter() {
            combined[lag] += beta * w;
        }
    }

    if normalize {
        let total: f64 = combined.iter().sum();
        if !(total > 0.0) {
            return Err(SwrError::Degenerate("combined kernel has zero mass and cannot be normalized".into()));
        }
        for w in &mut combined {
            *w /= total;
        }
    }
    Ok(combined)
}
