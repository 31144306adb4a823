//! The multi-window regression model: lagged convolution, residuals,
//! Gaussian likelihood and information criteria.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Result, SwrError};
use crate::kernel::{build_kernel, combine_kernels, WindowKernel, WindowParams};

/// Lower bound applied to the profiled error variance so that a perfect fit
/// still yields a finite log-likelihood.
pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-12;

/// Aligned input and target series on a common integer time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPair {
    x: Vec<f64>,
    y: Vec<f64>,
    index: Vec<i64>,
}

impl TimeSeriesPair {
    /// Pairs `x` and `y` with the time index `0..len`.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let index = (0..x.len() as i64).collect();
        Self::with_index(x, y, index)
    }

    pub fn with_index(x: Vec<f64>, y: Vec<f64>, index: Vec<i64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(SwrError::LengthMismatch { left: x.len(), right: y.len() });
        }
        if index.len() != x.len() {
            return Err(SwrError::LengthMismatch { left: x.len(), right: index.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SwrError::NonFinite("input series"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(SwrError::NonFinite("target series"));
        }
        Ok(Self { x, y, index })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn index(&self) -> &[i64] {
        &self.index
    }

    /// The first `len` time points.
    pub fn head(&self, len: usize) -> Self {
        let len = len.min(self.len());
        Self { x: self.x[..len].to_vec(), y: self.y[..len].to_vec(), index: self.index[..len].to_vec() }
    }

    /// Splits at `floor(fraction * len)` into a training head and the full
    /// remainder length. Returns the training portion and the split point.
    pub fn split(&self, fraction: f64) -> Result<(Self, usize)> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(SwrError::InvalidParameter(format!("split fraction must lie in (0, 1], got {fraction}")));
        }
        let at = ((self.len() as f64) * fraction).floor() as usize;
        Ok((self.head(at), at))
    }
}

/// Model output for every time point of an input series. Points before
/// `first_valid` lack a full input history and are not predictable.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    values: Vec<f64>,
    first_valid: usize,
}

impl Prediction {
    /// Predicted values; entries before `first_valid` are NaN.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn first_valid(&self) -> usize {
        self.first_valid
    }

    pub fn is_valid(&self, t: usize) -> bool {
        t >= self.first_valid && t < self.values.len()
    }

    pub fn valid_values(&self) -> &[f64] {
        &self.values[self.first_valid..]
    }

    pub fn mask(&self) -> Vec<bool> {
        (0..self.values.len()).map(|t| self.is_valid(t)).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Residuals `y_t - yhat_t` over the valid range, starting at time offset
/// `first_valid`.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub values: Vec<f64>,
    pub first_valid: usize,
}

/// Adds `beta * sum_s kernel(s) * x[t - s]` to `out[t]` for every
/// `t >= first_valid`.
pub(crate) fn accumulate_window(out: &mut [f64], x: &[f64], kernel: &WindowKernel, beta: f64, first_valid: usize) {
    let (s_min, s_max) = (kernel.s_min(), kernel.s_max());
    let w = kernel.weights();
    for (t, o) in out.iter_mut().enumerate().skip(first_valid) {
        let history = &x[t - s_max..=t - s_min];
        let conv: f64 = w.iter().zip(history.iter().rev()).map(|(a, b)| a * b).sum();
        *o += beta * conv;
    }
}

/// One window's parameters as they appear in model files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowEstimate {
    pub beta: f64,
    pub delta: f64,
    pub sigma: f64,
}

/// A Gaussian sliding windows regression model with `k` windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRecord", into = "ModelRecord")]
pub struct SwrModel {
    kernels: Vec<WindowKernel>,
    betas: Vec<f64>,
    intercept: Option<f64>,
    error_sd: f64,
}

/// JSON shape of a model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intercept: Option<f64>,
    pub windows: Vec<WindowEstimate>,
    pub error_sd: f64,
}

impl From<SwrModel> for ModelRecord {
    fn from(m: SwrModel) -> Self {
        Self { intercept: m.intercept, windows: m.windows(), error_sd: m.error_sd }
    }
}

impl TryFrom<ModelRecord> for SwrModel {
    type Error = SwrError;

    fn try_from(r: ModelRecord) -> Result<Self> {
        SwrModel::new(&r.windows, r.intercept)?.with_error_sd(r.error_sd)
    }
}

impl SwrModel {
    /// Builds a model from per-window `(beta, delta, sigma)` triples. Window
    /// locations must be strictly increasing.
    pub fn new(windows: &[WindowEstimate], intercept: Option<f64>) -> Result<Self> {
        let kernels =
            windows.iter().map(|w| build_kernel(WindowParams::new(w.delta, w.sigma)?)).collect::<Result<Vec<_>>>()?;
        let betas = windows.iter().map(|w| w.beta).collect();
        Self::from_kernels(kernels, betas, intercept)
    }

    pub fn from_kernels(kernels: Vec<WindowKernel>, betas: Vec<f64>, intercept: Option<f64>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(SwrError::InvalidParameter("a model needs at least one window".into()));
        }
        if kernels.len() != betas.len() {
            return Err(SwrError::LengthMismatch { left: kernels.len(), right: betas.len() });
        }
        if let Some(b) = betas.iter().find(|b| !b.is_finite() || **b < 0.0) {
            return Err(SwrError::InvalidParameter(format!(
                "window coefficients must be finite and non-negative, got {b}"
            )));
        }
        if kernels.windows(2).any(|p| !(p[0].delta() < p[1].delta())) {
            return Err(SwrError::InvalidParameter("window locations must be strictly increasing".into()));
        }
        if let Some(c) = intercept {
            if !c.is_finite() {
                return Err(SwrError::NonFinite("intercept"));
            }
        }
        Ok(Self { kernels, betas, intercept, error_sd: 0.0 })
    }

    pub fn with_error_sd(mut self, error_sd: f64) -> Result<Self> {
        if !(error_sd >= 0.0) || !error_sd.is_finite() {
            return Err(SwrError::InvalidParameter(format!(
                "error standard deviation must be finite and non-negative, got {error_sd}"
            )));
        }
        self.error_sd = error_sd;
        Ok(self)
    }

    /// Number of windows.
    pub fn k(&self) -> usize {
        self.kernels.len()
    }

    pub fn kernels(&self) -> &[WindowKernel] {
        &self.kernels
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn intercept(&self) -> Option<f64> {
        self.intercept
    }

    pub fn error_sd(&self) -> f64 {
        self.error_sd
    }

    pub fn windows(&self) -> Vec<WindowEstimate> {
        self.kernels
            .iter()
            .zip(&self.betas)
            .map(|(k, &beta)| WindowEstimate { beta, delta: k.delta(), sigma: k.sigma() })
            .collect()
    }

    /// Largest lag used by any window; also the first predictable time index.
    pub fn max_lag(&self) -> usize {
        self.kernels.iter().map(|k| k.s_max()).max().unwrap_or(0)
    }

    /// Parameters with intercept counted, for information criteria.
    pub fn n_params(&self) -> usize {
        3 * self.k() + usize::from(self.intercept.is_some())
    }

    /// The beta-weighted sum of all kernels as a dense lag vector.
    pub fn combined_kernel(&self, normalize: bool) -> Result<Vec<f64>> {
        combine_kernels(&self.kernels, &self.betas, normalize)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SwrError::NonFinite("input series"));
        }
        let first_valid = self.max_lag();
        if x.len() <= first_valid {
            return Err(SwrError::SeriesTooShort { needed: first_valid + 1, got: x.len() });
        }
        let mut values = vec![f64::NAN; x.len()];
        let base = self.intercept.unwrap_or(0.0);
        values[first_valid..].fill(base);
        for (kernel, &beta) in self.kernels.iter().zip(&self.betas) {
            accumulate_window(&mut values, x, kernel, beta, first_valid);
        }
        Ok(Prediction { values, first_valid })
    }

    pub fn residuals(&self, data: &TimeSeriesPair) -> Result<Residuals> {
        let pred = self.predict(data.x())?;
        let first_valid = pred.first_valid();
        let values = data.y()[first_valid..].iter().zip(pred.valid_values()).map(|(y, yhat)| y - yhat).collect();
        Ok(Residuals { values, first_valid })
    }

    pub fn log_likelihood(&self, data: &TimeSeriesPair) -> Result<f64> {
        gaussian_log_likelihood(&self.residuals(data)?.values, DEFAULT_VARIANCE_FLOOR)
    }

    /// Log-likelihood together with the number of time points it covers.
    pub fn fit_statistics(&self, data: &TimeSeriesPair) -> Result<FitStatistics> {
        self.fit_statistics_from(data, 0)
    }

    /// Fit statistics over the time points `t >= max(start, max_lag)`.
    pub fn fit_statistics_from(&self, data: &TimeSeriesPair, start: usize) -> Result<FitStatistics> {
        let residuals = self.residuals(data)?;
        let skip = start.saturating_sub(residuals.first_valid).min(residuals.values.len());
        let values = &residuals.values[skip..];
        let n = values.len();
        let log_likelihood = gaussian_log_likelihood(values, DEFAULT_VARIANCE_FLOOR)?;
        let sse: f64 = values.iter().map(|e| e * e).sum();
        Ok(FitStatistics {
            log_likelihood,
            n_valid: n,
            aic: aic(log_likelihood, self.k(), self.intercept.is_some()),
            bic: bic(log_likelihood, self.k(), n, self.intercept.is_some()),
            residual_sd: (sse / n as f64).sqrt(),
        })
    }

    pub fn aic(&self, data: &TimeSeriesPair) -> Result<f64> {
        Ok(self.fit_statistics(data)?.aic)
    }

    pub fn bic(&self, data: &TimeSeriesPair) -> Result<f64> {
        Ok(self.fit_statistics(data)?.bic)
    }
}

/// Likelihood-based summary of a model on one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitStatistics {
    pub log_likelihood: f64,
    pub n_valid: usize,
    pub aic: f64,
    pub bic: f64,
    pub residual_sd: f64,
}

/// Gaussian log-likelihood with the error variance profiled at its maximum
/// likelihood value `SSE / n`, floored at `variance_floor`.
pub fn gaussian_log_likelihood(residuals: &[f64], variance_floor: f64) -> Result<f64> {
    let n = residuals.len();
    if n < 2 {
        return Err(SwrError::SeriesTooShort { needed: 2, got: n });
    }
    let sse: f64 = residuals.iter().map(|e| e * e).sum();
    Ok(profiled_log_likelihood(sse, n, variance_floor))
}

#[inline]
pub(crate) fn profiled_log_likelihood(sse: f64, n: usize, variance_floor: f64) -> f64 {
    let n = n as f64;
    let variance = (sse / n).max(variance_floor);
    -0.5 * n * ((2.0 * PI * variance).ln() + 1.0)
}

/// `-2 log L + 6k`, plus 2 for an intercept.
pub fn aic(log_likelihood: f64, k: usize, intercept: bool) -> f64 {
    -2.0 * log_likelihood + 2.0 * (3 * k + usize::from(intercept)) as f64
}

/// `-2 log L + ln(n) 3k`, plus `ln(n)` for an intercept.
pub fn bic(log_likelihood: f64, k: usize, n: usize, intercept: bool) -> f64 {
    -2.0 * log_likelihood + (n as f64).ln() * (3 * k + usize::from(intercept)) as f64
}

/// Information criterion used for model selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    #[default]
    Bic,
}

impl Criterion {
    pub fn of(&self, stats: &FitStatistics) -> f64 {
        match self {
            Criterion::Aic => stats.aic,
            Criterion::Bic => stats.bic,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(beta: f64, delta: f64, sigma: f64) -> SwrModel {
        SwrModel::new(&[WindowEstimate { beta, delta, sigma }], None).unwrap()
    }

    #[test]
    fn identity_kernel_scales_input() {
        let m = single(2.0, 0.0, 0.0);
        let p = m.predict(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p.values(), &[2.0, 4.0, 6.0]);
        assert_eq!(p.mask(), vec![true; 3]);
    }

    #[test]
    fn two_lag_window_by_hand() {
        // delta = 2.5, sigma tiny: mass split evenly on lags 2 and 3.
        let m = single(1.0, 2.5, 1e-9);
        let k = &m.kernels()[0];
        assert_eq!((k.s_min(), k.s_max()), (2, 3));
        assert!((k.weights()[0] - 0.5).abs() < 1e-12);
        let p = m.predict(&[10.0, 20.0, 30.0, 40.0]).unwrap();
        assert_eq!(p.first_valid(), 3);
        assert!(p.values()[..3].iter().all(|v| v.is_nan()));
        assert!((p.values()[3] - 15.0).abs() < 1e-10);
    }

    #[test]
    fn zero_betas_give_intercept() {
        let m = SwrModel::new(
            &[
                WindowEstimate { beta: 0.0, delta: 1.0, sigma: 1.0 },
                WindowEstimate { beta: 0.0, delta: 6.0, sigma: 0.5 },
            ],
            Some(3.5),
        )
        .unwrap();
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let p = m.predict(&x).unwrap();
        assert!(p.valid_values().iter().all(|&v| v == 3.5));
    }

    #[test]
    fn rejects_short_series_and_bad_models() {
        let m = single(1.0, 5.0, 1.0);
        assert!(matches!(m.predict(&[1.0; 8]), Err(SwrError::SeriesTooShort { needed: 9, got: 8 })));
        assert!(SwrModel::new(&[], None).is_err());
        assert!(SwrModel::new(&[WindowEstimate { beta: -1.0, delta: 1.0, sigma: 1.0 }], None).is_err());
        let tie = [
            WindowEstimate { beta: 1.0, delta: 2.0, sigma: 1.0 },
            WindowEstimate { beta: 1.0, delta: 2.0, sigma: 3.0 },
        ];
        assert!(SwrModel::new(&tie, None).is_err());
    }

    #[test]
    fn residuals_of_exact_and_offset_targets() {
        let m = single(1.5, 2.0, 0.7);
        let x: Vec<f64> = (0..30).map(|i| ((i * 7) % 5) as f64).collect();
        let yhat = m.predict(&x).unwrap();
        let y: Vec<f64> = yhat.values().iter().map(|v| if v.is_nan() { 0.0 } else { *v }).collect();
        let data = TimeSeriesPair::new(x.clone(), y.clone()).unwrap();
        assert!(m.residuals(&data).unwrap().values.iter().all(|&e| e == 0.0));

        let shifted = TimeSeriesPair::new(x, y.iter().map(|v| v + 1.0).collect()).unwrap();
        assert!(m.residuals(&shifted).unwrap().values.iter().all(|&e| (e - 1.0).abs() < 1e-12));
    }

    #[test]
    fn likelihood_closed_forms() {
        let c = 0.7;
        let e: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { c } else { -c }).collect();
        let expected = -5.0 * ((2.0 * PI * c * c).ln() + 1.0);
        assert!((gaussian_log_likelihood(&e, DEFAULT_VARIANCE_FLOOR).unwrap() - expected).abs() < 1e-12);

        let unit: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let ll = gaussian_log_likelihood(&unit, DEFAULT_VARIANCE_FLOOR).unwrap();
        assert!((ll - (-141.893_853_320_467_3)).abs() < 1e-9);

        assert!(gaussian_log_likelihood(&[1.0], DEFAULT_VARIANCE_FLOOR).is_err());
        let perfect = gaussian_log_likelihood(&[0.0; 10], DEFAULT_VARIANCE_FLOOR).unwrap();
        assert!(perfect.is_finite());
    }

    #[test]
    fn information_criteria_substitution() {
        assert_eq!(aic(-100.0, 2, false), 212.0);
        assert!((bic(-100.0, 1, 100, false) - 213.815_510_557_964_3).abs() < 1e-9);
        assert_eq!(aic(-100.0, 1, true) - aic(-100.0, 1, false), 2.0);
        assert!((bic(-100.0, 1, 100, true) - bic(-100.0, 1, 100, false) - 100f64.ln()).abs() < 1e-12);
        for k in 1..5 {
            assert_eq!(aic(-50.0, k + 1, false) - aic(-50.0, k, false), 6.0);
            let d = bic(-50.0, k + 1, 400, false) - bic(-50.0, k, 400, false);
            assert!((d - 3.0 * 400f64.ln()).abs() < 1e-12);
            assert!(aic(-40.0, k, false) < aic(-50.0, k, false));
            assert!(bic(-40.0, k, 400, false) < bic(-50.0, k, 400, false));
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = SwrModel::new(
            &[
                WindowEstimate { beta: 0.1 + 0.2, delta: 1.0 / 3.0, sigma: std::f64::consts::E },
                WindowEstimate { beta: 3.0, delta: 11.68, sigma: 3.19 },
            ],
            Some(-0.25),
        )
        .unwrap()
        .with_error_sd(1.2345678901234567)
        .unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: SwrModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);

        let no_intercept = single(1.0, 2.0, 1.0);
        let v = serde_json::to_value(&no_intercept).unwrap();
        assert!(v.get("intercept").is_none());
        assert_eq!(v["windows"][0]["delta"], 2.0);
    }

    #[test]
    fn split_takes_floor_of_fraction() {
        let data = TimeSeriesPair::new(vec![0.0; 10], vec![1.0; 10]).unwrap();
        let (train, at) = data.split(0.75).unwrap();
        assert_eq!((train.len(), at), (7, 7));
        assert!(data.split(0.0).is_err());
        assert!(TimeSeriesPair::new(vec![0.0; 3], vec![0.0; 2]).is_err());
        assert!(TimeSeriesPair::new(vec![f64::NAN], vec![0.0]).is_err());
    }
}
