//! Residual autocorrelation: Durbin-Watson diagnostics, autoregressive error
//! models and the Cochrane-Orcutt refit loop.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SwrError};
use crate::model::{SwrModel, TimeSeriesPair};
use crate::train::{fit, FitReport, TrainConfig};

/// Roots of the AR characteristic polynomial must lie at least this far
/// outside the unit circle.
pub const STATIONARITY_MARGIN: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwTest {
    pub d: f64,
    pub p: f64,
}

fn dw_statistic(e: &[f64], denom: f64) -> f64 {
    let num: f64 = e.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    num / denom
}

/// Durbin-Watson statistic with a one-sided permutation p-value for positive
/// autocorrelation.
pub fn durbin_watson(residuals: &[f64], n_boot: usize, seed: u64) -> Result<DwTest> {
    if residuals.len() < 3 {
        return Err(SwrError::SeriesTooShort { needed: 3, got: residuals.len() });
    }
    if n_boot == 0 {
        return Err(SwrError::InvalidParameter("n_boot must be positive".into()));
    }
    if residuals.iter().any(|v| !v.is_finite()) {
        return Err(SwrError::NonFinite("residuals"));
    }
    let denom: f64 = residuals.iter().map(|e| e * e).sum();
    if denom == 0.0 {
        return Err(SwrError::Degenerate("all residuals are zero".into()));
    }
    let d = dw_statistic(residuals, denom);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm = residuals.to_vec();
    let mut hits = 0usize;
    for _ in 0..n_boot {
        perm.shuffle(&mut rng);
        if dw_statistic(&perm, denom) <= d {
            hits += 1;
        }
    }
    Ok(DwTest { d, p: hits as f64 / n_boot as f64 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    pub phi: Vec<f64>,
    pub innovation_sd: f64,
}

impl ArModel {
    pub fn new(phi: Vec<f64>, innovation_sd: f64) -> Result<Self> {
        if phi.is_empty() {
            return Err(SwrError::InvalidParameter("AR order must be at least 1".into()));
        }
        if phi.iter().any(|v| !v.is_finite()) || !(innovation_sd >= 0.0) {
            return Err(SwrError::NonFinite("AR coefficients"));
        }
        Ok(Self { phi, innovation_sd })
    }

    pub fn order(&self) -> usize {
        self.phi.len()
    }

    /// Roots of `1 - phi_1 z - ... - phi_m z^m`. Zero eigenvalues of the
    /// companion matrix correspond to roots at infinity and are skipped.
    pub fn characteristic_roots(&self) -> Vec<(f64, f64)> {
        let m = self.order();
        let mut companion = DMatrix::zeros(m, m);
        for (j, p) in self.phi.iter().enumerate() {
            companion[(0, j)] = *p;
        }
        for i in 1..m {
            companion[(i, i - 1)] = 1.0;
        }
        companion
            .complex_eigenvalues()
            .iter()
            .filter(|l| l.norm() > 0.0)
            .map(|l| {
                let r = l.inv();
                (r.re, r.im)
            })
            .collect()
    }

    pub fn check_stationary(&self) -> Result<()> {
        for (re, im) in self.characteristic_roots() {
            let modulus = re.hypot(im);
            if !(modulus > 1.0 + STATIONARITY_MARGIN) {
                return Err(SwrError::NonStationary { order: self.order(), re, im, modulus });
            }
        }
        Ok(())
    }
}

/// Yule-Walker estimate of an AR(`order`) model for zero-mean errors.
pub fn fit_ar(residuals: &[f64], order: usize) -> Result<ArModel> {
    if order == 0 {
        return Err(SwrError::InvalidParameter("AR order must be at least 1".into()));
    }
    let n = residuals.len();
    if n <= order + 1 {
        return Err(SwrError::SeriesTooShort { needed: order + 2, got: n });
    }
    let gamma: Vec<f64> =
        (0..=order).map(|j| residuals[j..].iter().zip(residuals).map(|(a, b)| a * b).sum::<f64>() / n as f64).collect();
    if gamma[0] == 0.0 {
        return Err(SwrError::Degenerate("all residuals are zero".into()));
    }

    // Levinson-Durbin recursion.
    let mut phi: Vec<f64> = Vec::with_capacity(order);
    let mut var = gamma[0];
    for m in 1..=order {
        let acc: f64 = phi.iter().enumerate().map(|(j, p)| p * gamma[m - 1 - j]).sum();
        let kappa = (gamma[m] - acc) / var;
        let prev = phi.clone();
        for j in 0..m - 1 {
            phi[j] = prev[j] - kappa * prev[m - 2 - j];
        }
        phi.push(kappa);
        var *= 1.0 - kappa * kappa;
    }

    let provisional = ArModel::new(phi, 0.0)?;
    provisional.check_stationary()?;
    let innovations = cochrane_orcutt_transform(residuals, &provisional)?;
    let innovation_sd = (innovations.iter().map(|e| e * e).sum::<f64>() / innovations.len() as f64).sqrt();
    ArModel::new(provisional.phi, innovation_sd)
}

/// `z_t - sum_j phi_j z_{t-j}` for `t = m..n`.
pub fn cochrane_orcutt_transform(z: &[f64], ar: &ArModel) -> Result<Vec<f64>> {
    let m = ar.order();
    if z.len() <= m {
        return Err(SwrError::SeriesTooShort { needed: m + 1, got: z.len() });
    }
    Ok((m..z.len()).map(|t| z[t] - ar.phi.iter().enumerate().map(|(j, p)| p * z[t - 1 - j]).sum::<f64>()).collect())
}

/// Applies the transform to both series. The time index keeps the labels of
/// the surviving points.
pub fn transform_pair(data: &TimeSeriesPair, ar: &ArModel) -> Result<TimeSeriesPair> {
    let x = cochrane_orcutt_transform(data.x(), ar)?;
    let y = cochrane_orcutt_transform(data.y(), ar)?;
    TimeSeriesPair::with_index(x, y, data.index()[ar.order()..].to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutocorrConfig {
    pub max_order: usize,
    /// Stage-1 p-value below which the errors are treated as autocorrelated.
    pub dw_alpha: f64,
    /// Post-transform p-value at which order escalation stops.
    pub dw_pass: f64,
    pub n_boot: usize,
    pub seed: u64,
}

impl Default for AutocorrConfig {
    fn default() -> Self {
        Self { max_order: 3, dw_alpha: 0.01, dw_pass: 0.1, n_boot: 1000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub order: usize,
    pub phi: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dw: Option<DwTest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutocorrInfo {
    /// Order of the applied transform; 0 when no transform was needed.
    pub order: usize,
    pub phi: Vec<f64>,
    pub innovation_sd: f64,
    pub dw_before: DwTest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dw_after: Option<DwTest>,
    /// Whether the final residuals pass the post-transform threshold.
    pub passed: bool,
    pub stages: Vec<StageRecord>,
}

impl AutocorrInfo {
    pub fn ar_model(&self) -> Option<ArModel> {
        if self.order == 0 {
            return None;
        }
        ArModel::new(self.phi.clone(), self.innovation_sd).ok()
    }
}

fn final_residuals(model: &SwrModel, data: &TimeSeriesPair) -> Result<Vec<f64>> {
    Ok(model.residuals(data)?.values)
}

/// Rewrites an intercept fitted on transformed data in original units.
fn restore_intercept(model: &SwrModel, ar: &ArModel) -> Result<SwrModel> {
    match model.intercept() {
        None => Ok(model.clone()),
        Some(c) => {
            let scale = 1.0 - ar.phi.iter().sum::<f64>();
            SwrModel::new(&model.windows(), Some(c / scale))?.with_error_sd(model.error_sd())
        }
    }
}

/// Fits on the raw data and, if the residuals are autocorrelated, refits on
/// Cochrane-Orcutt transformed data with increasing AR order.
pub fn fit_with_autocorr(data: &TimeSeriesPair, config: &TrainConfig, options: &AutocorrConfig) -> Result<FitReport> {
    if options.max_order == 0 {
        return Err(SwrError::InvalidParameter("max_order must be at least 1".into()));
    }
    let mut report = fit(data, config)?;
    let residuals = final_residuals(&report.final_model, data)?;
    let dw_before = durbin_watson(&residuals, options.n_boot, options.seed)?;
    let mut stages = vec![StageRecord {
        order: 0,
        phi: Vec::new(),
        dw: Some(dw_before),
        selected_k: Some(report.selected_k),
        error: None,
    }];

    if dw_before.p >= options.dw_alpha {
        report.autocorr_info = Some(AutocorrInfo {
            order: 0,
            phi: Vec::new(),
            innovation_sd: report.fit.residual_sd,
            dw_before,
            dw_after: None,
            passed: true,
            stages,
        });
        return Ok(report);
    }

    let mut best: Option<(FitReport, ArModel, DwTest)> = None;
    let mut last_error = None;
    for order in 1..=options.max_order {
        let ar = match fit_ar(&residuals, order) {
            Ok(ar) => ar,
            Err(e) => {
                stages.push(StageRecord {
                    order,
                    phi: Vec::new(),
                    dw: None,
                    selected_k: None,
                    error: Some(e.to_string()),
                });
                last_error = Some(e);
                break;
            }
        };
        let transformed = transform_pair(data, &ar)?;
        let refit = fit(&transformed, config)?;
        let after = durbin_watson(&final_residuals(&refit.final_model, &transformed)?, options.n_boot, options.seed)?;
        stages.push(StageRecord {
            order,
            phi: ar.phi.clone(),
            dw: Some(after),
            selected_k: Some(refit.selected_k),
            error: None,
        });
        let passed = after.p >= options.dw_pass;
        best = Some((refit, ar, after));
        if passed {
            break;
        }
    }

    let Some((mut refit, ar, after)) = best else {
        return Err(last_error.unwrap_or_else(|| SwrError::Degenerate("no AR stage was fitted".into())));
    };
    refit.final_model = restore_intercept(&refit.final_model, &ar)?;
    refit.autocorr_info = Some(AutocorrInfo {
        order: ar.order(),
        phi: ar.phi.clone(),
        innovation_sd: ar.innovation_sd,
        dw_before,
        dw_after: Some(after),
        passed: after.p >= options.dw_pass,
        stages,
    });
    Ok(refit)
}
