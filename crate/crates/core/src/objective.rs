//! Training objective over a flat parameter vector.
//!
//! Parameters are laid out as `[beta_1..beta_k, delta_1..delta_k,
//! sigma_1..sigma_k, intercept?]`. Windows need not be ordered here; ordering
//! and merging happen when a parameter vector is turned into a model.

use serde::{Deserialize, Serialize};

use crate::kernel::{build_kernel, WindowParams};
use crate::model::{profiled_log_likelihood, WindowEstimate, DEFAULT_VARIANCE_FLOOR};

/// Training loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    /// Negative Gaussian log-likelihood with profiled error variance.
    #[default]
    Nll,
    /// Root mean squared error.
    Rmse,
}

/// Position of each model parameter in the flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub k: usize,
    pub intercept: bool,
}

impl ParamLayout {
    pub fn new(k: usize, intercept: bool) -> Self {
        Self { k, intercept }
    }

    pub fn dim(&self) -> usize {
        3 * self.k + usize::from(self.intercept)
    }

    pub fn beta(&self, i: usize) -> usize {
        i
    }

    pub fn delta(&self, i: usize) -> usize {
        self.k + i
    }

    pub fn sigma(&self, i: usize) -> usize {
        2 * self.k + i
    }

    pub fn intercept_index(&self) -> Option<usize> {
        self.intercept.then_some(3 * self.k)
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dim());
        for prefix in ["beta", "delta", "sigma"] {
            names.extend((1..=self.k).map(|i| format!("{prefix}_{i}")));
        }
        if self.intercept {
            names.push("intercept".to_string());
        }
        names
    }

    /// Lower bounds: zero for window parameters, unbounded for the intercept.
    pub fn lower_bounds(&self) -> Vec<f64> {
        let mut lower = vec![0.0; 3 * self.k];
        if self.intercept {
            lower.push(f64::NEG_INFINITY);
        }
        lower
    }

    pub fn upper_bounds(&self) -> Vec<f64> {
        vec![f64::INFINITY; self.dim()]
    }

    pub fn pack(&self, windows: &[WindowEstimate], intercept: Option<f64>) -> Vec<f64> {
        debug_assert_eq!(windows.len(), self.k);
        let mut theta = Vec::with_capacity(self.dim());
        theta.extend(windows.iter().map(|w| w.beta));
        theta.extend(windows.iter().map(|w| w.delta));
        theta.extend(windows.iter().map(|w| w.sigma));
        if self.intercept {
            theta.push(intercept.unwrap_or(0.0));
        }
        theta
    }

    pub fn unpack(&self, theta: &[f64]) -> (Vec<WindowEstimate>, Option<f64>) {
        let windows = (0..self.k)
            .map(|i| WindowEstimate {
                beta: theta[self.beta(i)],
                delta: theta[self.delta(i)],
                sigma: theta[self.sigma(i)],
            })
            .collect();
        (windows, self.intercept_index().map(|j| theta[j]))
    }
}

/// Number of points the negative log-likelihood is accounted over.
///
/// The valid range `t >= max lag` shrinks as windows widen. With the error
/// variance profiled out, every dropped point raises the log-likelihood once
/// the variance exceeds `1 / (2 pi e)`, so an optimizer scored on the raw
/// valid-range likelihood drifts towards ever wider windows. Scaling the
/// per-point likelihood to the full series length removes that incentive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PointCount {
    /// Per-point likelihood of the valid range times the series length.
    #[default]
    Series,
    /// Plain likelihood of the valid range.
    Valid,
}

/// Loss of a parameter vector on fixed data. Infeasible or unevaluable
/// parameter vectors map to `+inf`.
#[derive(Debug, Clone, Copy)]
pub struct SwrObjective<'a> {
    x: &'a [f64],
    y: &'a [f64],
    layout: ParamLayout,
    loss: Loss,
    count: PointCount,
    variance_floor: f64,
}

impl<'a> SwrObjective<'a> {
    pub fn new(x: &'a [f64], y: &'a [f64], layout: ParamLayout, loss: Loss) -> Self {
        Self { x, y, layout, loss, count: PointCount::Series, variance_floor: DEFAULT_VARIANCE_FLOOR }
    }

    pub fn with_point_count(mut self, count: PointCount) -> Self {
        self.count = count;
        self
    }

    pub fn layout(&self) -> ParamLayout {
        self.layout
    }

    pub fn eval(&self, theta: &[f64]) -> f64 {
        match self.sse(theta) {
            Some((sse, n)) => match self.loss {
                Loss::Nll => {
                    let nll = -profiled_log_likelihood(sse, n, self.variance_floor);
                    match self.count {
                        PointCount::Valid => nll,
                        PointCount::Series => nll * self.x.len() as f64 / n as f64,
                    }
                }
                Loss::Rmse => (sse / n as f64).sqrt(),
            },
            None => f64::INFINITY,
        }
    }

    /// Sum of squared residuals and the number of valid points, or `None`
    /// when the parameters cannot be evaluated on this series.
    fn sse(&self, theta: &[f64]) -> Option<(f64, usize)> {
        let n = self.x.len();
        let k = self.layout.k;
        if theta.len() != self.layout.dim() || theta.iter().any(|v| !v.is_finite()) {
            return None;
        }

        let mut kernels = Vec::with_capacity(k);
        let mut lo = usize::MAX;
        let mut hi = 0usize;
        for i in 0..k {
            let params = WindowParams { delta: theta[self.layout.delta(i)], sigma: theta[self.layout.sigma(i)] };
            if params.delta < 0.0 || params.sigma < 0.0 || theta[self.layout.beta(i)] < 0.0 {
                return None;
            }
            // At least two valid time points are needed for a likelihood.
            if params.max_lag()? + 2 > n {
                return None;
            }
            let kernel = build_kernel(params).ok()?;
            lo = lo.min(kernel.s_min());
            hi = hi.max(kernel.s_max());
            kernels.push(kernel);
        }

        // Dense combined weights over lags lo..=hi, stored in reverse lag
        // order so that the dot product runs forward through the history.
        let span = hi - lo + 1;
        let mut combined = vec![0.0; span];
        for (i, kernel) in kernels.iter().enumerate() {
            let beta = theta[self.layout.beta(i)];
            for (lag, w) in kernel.iter() {
                combined[hi - lag] += beta * w;
            }
        }
        let base = self.layout.intercept_index().map_or(0.0, |j| theta[j]);

        let mut sse = 0.0;
        for t in hi..n {
            let history = &self.x[t - hi..=t - lo];
            let conv: f64 = combined.iter().zip(history).map(|(a, b)| a * b).sum();
            let e = self.y[t] - (base + conv);
            sse += e * e;
        }
        Some((sse, n - hi))
    }
}
