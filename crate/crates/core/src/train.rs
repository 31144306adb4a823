//! Incremental window addition with multi-start location initialization and
//! information-criterion model selection.
//!
//! Iteration 1 fits a single window from `beta = delta = sigma = 1`. Every
//! further iteration keeps the previous window locations, adds one candidate
//! location, spreads the previous total weight and total width evenly over
//! all windows, and re-optimizes all parameters jointly. Candidate locations
//! are the midpoints between neighbouring windows, lag 0, and offsets past
//! the last window. The candidate with the lowest loss is kept per
//! iteration. Iterations are compared by the configured information
//! criterion, evaluated for every model on the same time points: those at or
//! after the largest lag of any kept model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autocorr::AutocorrInfo;
use crate::error::{Result, SwrError};
use crate::model::{Criterion, FitStatistics, SwrModel, TimeSeriesPair, WindowEstimate};
use crate::objective::{Loss, ParamLayout, SwrObjective};
use crate::optimize::{minimize, OptProblem, DEFAULT_EVALS_PER_DIM, DEFAULT_FTOL_ABS};
use crate::uncertainty::UncertaintyReport;

/// Window locations closer than this after fitting are merged into one window.
pub const MERGE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub k_max: usize,
    pub criterion: Criterion,
    pub loss: Loss,
    pub zeta_offsets: Vec<f64>,
    pub include_zero_start: bool,
    pub include_midpoints: bool,
    pub intercept: bool,
    pub ftol_abs: f64,
    pub evals_per_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k_max: 3,
            criterion: Criterion::Bic,
            loss: Loss::Nll,
            zeta_offsets: vec![1.0, 5.0, 10.0],
            include_zero_start: true,
            include_midpoints: true,
            intercept: false,
            ftol_abs: DEFAULT_FTOL_ABS,
            evals_per_dim: DEFAULT_EVALS_PER_DIM,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0 {
            return Err(SwrError::InvalidParameter("k_max must be at least 1".into()));
        }
        if self.zeta_offsets.is_empty() {
            return Err(SwrError::InvalidParameter("zeta_offsets must not be empty".into()));
        }
        if let Some(z) = self.zeta_offsets.iter().find(|z| !(**z > 0.0) || !z.is_finite()) {
            return Err(SwrError::InvalidParameter(format!("zeta offsets must be positive and finite, got {z}")));
        }
        if !(self.ftol_abs > 0.0) {
            return Err(SwrError::InvalidParameter("ftol_abs must be positive".into()));
        }
        if self.evals_per_dim == 0 {
            return Err(SwrError::InvalidParameter("evals_per_dim must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of optimizing from one candidate initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    /// Initial location of the added window; `None` in the first iteration.
    pub init_delta: Option<f64>,
    /// Loss at the optimum, or `None` if the optimizer failed.
    pub objective: Option<f64>,
    pub criterion_value: Option<f64>,
    pub evals: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// The model kept at the end of one training iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Windows after merging coinciding locations.
    pub k: usize,
    pub init_delta: Option<f64>,
    pub model: SwrModel,
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_valid: usize,
    pub objective: f64,
    pub evals: usize,
    pub converged: bool,
    /// Criterion on the common selection range.
    pub selection_value: f64,
    pub candidates: Vec<CandidateRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub config: TrainConfig,
    pub per_iteration: Vec<IterationRecord>,
    pub selected_iteration: usize,
    pub selected_k: usize,
    /// First time point of the range the iterations were compared on.
    pub selection_start: usize,
    pub final_model: SwrModel,
    pub fit: FitStatistics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard_errors: Option<UncertaintyReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub autocorr_info: Option<AutocorrInfo>,
}

impl FitReport {
    /// Criterion value of the selected model.
    pub fn selected_criterion(&self) -> f64 {
        self.config.criterion.of(&self.fit)
    }

    /// Fixed-width summary with one line per iteration.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:>3} {:>3} {:>14} {:>14} {:>14} {:>14}  windows (beta, delta, sigma)\n",
            "it", "k", "logL", "AIC", "BIC", "selection"
        ));
        for rec in &self.per_iteration {
            let marker = if rec.iteration == self.selected_iteration { "*" } else { " " };
            let windows: Vec<String> = rec
                .model
                .windows()
                .iter()
                .map(|w| format!("({:.4}, {:.4}, {:.4})", w.beta, w.delta, w.sigma))
                .collect();
            out.push_str(&format!(
                "{:>2}{} {:>3} {:>14.4} {:>14.4} {:>14.4} {:>14.4}  {}\n",
                rec.iteration,
                marker,
                rec.k,
                rec.log_likelihood,
                rec.aic,
                rec.bic,
                rec.selection_value,
                windows.join(" ")
            ));
        }
        out
    }
}

/// Orders windows by location and merges windows whose locations coincide
/// within [`MERGE_TOLERANCE`]: coefficients add up, location and width come
/// from the member with the larger coefficient.
pub fn normalize_windows(windows: &[WindowEstimate]) -> Vec<WindowEstimate> {
    let mut sorted = windows.to_vec();
    sorted.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let mut merged: Vec<WindowEstimate> = Vec::with_capacity(sorted.len());
    for w in sorted {
        match merged.last_mut() {
            Some(last) if (w.delta - last.delta).abs() <= MERGE_TOLERANCE => {
                let beta = last.beta + w.beta;
                if w.beta > last.beta {
                    *last = w;
                }
                last.beta = beta;
            }
            _ => merged.push(w),
        }
    }
    merged
}

struct Fitted {
    model: SwrModel,
    stats: FitStatistics,
}

fn build_fitted(layout: ParamLayout, theta: &[f64], data: &TimeSeriesPair) -> Result<Fitted> {
    let (windows, intercept) = layout.unpack(theta);
    let model = SwrModel::new(&normalize_windows(&windows), intercept)?;
    let stats = model.fit_statistics(data)?;
    let model = model.with_error_sd(stats.residual_sd)?;
    Ok(Fitted { model, stats })
}

struct CandidateOutcome {
    record: CandidateRecord,
    fitted: Option<Fitted>,
}

fn run_candidate(
    data: &TimeSeriesPair,
    config: &TrainConfig,
    layout: ParamLayout,
    init_delta: Option<f64>,
    theta0: &[f64],
) -> CandidateOutcome {
    let objective = SwrObjective::new(data.x(), data.y(), layout, config.loss);
    let problem = OptProblem::new(layout.dim(), |theta: &[f64]| objective.eval(theta))
        .with_bounds(layout.lower_bounds(), layout.upper_bounds())
        .with_ftol_abs(config.ftol_abs)
        .with_max_evals(config.evals_per_dim * layout.dim());

    let failed = |evals: usize, error: String| CandidateOutcome {
        record: CandidateRecord {
            init_delta,
            objective: None,
            criterion_value: None,
            evals,
            converged: false,
            error: Some(error),
        },
        fitted: None,
    };

    let result = match minimize(&problem, theta0) {
        Ok(r) => r,
        Err(e) => return failed(0, e.to_string()),
    };
    match build_fitted(layout, &result.x, data) {
        Ok(fitted) => CandidateOutcome {
            record: CandidateRecord {
                init_delta,
                objective: Some(result.f),
                criterion_value: Some(config.criterion.of(&fitted.stats)),
                evals: result.n_evals,
                converged: result.converged,
                error: None,
            },
            fitted: Some(fitted),
        },
        Err(e) => failed(result.n_evals, e.to_string()),
    }
}

/// Candidate locations for the window added after `previous`.
fn candidate_locations(previous: &[WindowEstimate], config: &TrainConfig) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    if config.include_midpoints {
        out.extend(previous.windows(2).map(|p| 0.5 * (p[0].delta + p[1].delta)));
    }
    if config.include_zero_start {
        out.push(0.0);
    }
    if let Some(last) = previous.last() {
        out.extend(config.zeta_offsets.iter().map(|z| last.delta + z));
    }
    let mut unique: Vec<f64> = Vec::with_capacity(out.len());
    for d in out {
        if !unique.contains(&d) {
            unique.push(d);
        }
    }
    unique
}

fn iteration_record(
    iteration: usize,
    init_delta: Option<f64>,
    outcome: CandidateOutcome,
    candidates: Vec<CandidateRecord>,
) -> IterationRecord {
    let fitted = outcome.fitted.expect("successful candidate");
    IterationRecord {
        iteration,
        k: fitted.model.k(),
        init_delta,
        log_likelihood: fitted.stats.log_likelihood,
        aic: fitted.stats.aic,
        bic: fitted.stats.bic,
        n_valid: fitted.stats.n_valid,
        objective: outcome.record.objective.unwrap_or(f64::INFINITY),
        evals: outcome.record.evals,
        converged: outcome.record.converged,
        selection_value: f64::NAN,
        model: fitted.model,
        candidates,
    }
}

/// Initial location of the added window (none for the first iteration) and
/// the packed starting point.
type Start = (Option<f64>, Vec<f64>);

/// Trains a model on `data` with up to `config.k_max` windows.
pub fn fit(data: &TimeSeriesPair, config: &TrainConfig) -> Result<FitReport> {
    config.validate()?;
    let mut per_iteration: Vec<IterationRecord> = Vec::with_capacity(config.k_max);

    for iteration in 1..=config.k_max {
        let (layout, starts): (ParamLayout, Vec<Start>) = match per_iteration.last() {
            None => {
                let layout = ParamLayout::new(1, config.intercept);
                let first = WindowEstimate { beta: 1.0, delta: 1.0, sigma: 1.0 };
                let intercept = config.intercept.then_some(0.0);
                (layout, vec![(None, layout.pack(&[first], intercept))])
            }
            Some(prev) => {
                let previous = prev.model.windows();
                let k = previous.len() + 1;
                let layout = ParamLayout::new(k, config.intercept);
                let beta = previous.iter().map(|w| w.beta).sum::<f64>() / k as f64;
                let sigma = previous.iter().map(|w| w.sigma).sum::<f64>() / k as f64;
                let starts = candidate_locations(&previous, config)
                    .into_iter()
                    .map(|d| {
                        let mut windows: Vec<WindowEstimate> =
                            previous.iter().map(|w| WindowEstimate { beta, delta: w.delta, sigma }).collect();
                        windows.push(WindowEstimate { beta, delta: d, sigma });
                        (Some(d), layout.pack(&windows, prev.model.intercept()))
                    })
                    .collect();
                (layout, starts)
            }
        };

        let outcomes: Vec<CandidateOutcome> =
            starts.par_iter().map(|(d, theta0)| run_candidate(data, config, layout, *d, theta0)).collect();

        let candidates: Vec<CandidateRecord> = outcomes.iter().map(|o| o.record.clone()).collect();
        let best = outcomes.into_iter().filter(|o| o.fitted.is_some()).min_by(|a, b| {
            let la = a.record.objective.unwrap_or(f64::INFINITY);
            let lb = b.record.objective.unwrap_or(f64::INFINITY);
            la.total_cmp(&lb)
        });
        let Some(best) = best else {
            let reason = candidates.iter().filter_map(|c| c.error.clone()).collect::<Vec<_>>().join("; ");
            return Err(SwrError::Training {
                iteration,
                reason: format!("all candidate initializations failed: {reason}"),
                partial: per_iteration,
            });
        };
        let init_delta = best.record.init_delta;
        per_iteration.push(iteration_record(iteration, init_delta, best, candidates));
    }

    let selection_start = per_iteration.iter().map(|r| r.model.max_lag()).max().unwrap_or(0);
    for rec in per_iteration.iter_mut() {
        let stats = rec.model.fit_statistics_from(data, selection_start)?;
        rec.selection_value = config.criterion.of(&stats);
    }
    let selected = per_iteration
        .iter()
        .min_by(|a, b| a.selection_value.total_cmp(&b.selection_value))
        .expect("at least one iteration");
    let final_model = selected.model.clone();
    let fit = FitStatistics {
        log_likelihood: selected.log_likelihood,
        n_valid: selected.n_valid,
        aic: selected.aic,
        bic: selected.bic,
        residual_sd: final_model.error_sd(),
    };
    Ok(FitReport {
        config: config.clone(),
        selected_iteration: selected.iteration,
        selected_k: selected.k,
        selection_start,
        final_model,
        fit,
        per_iteration,
        standard_errors: None,
        autocorr_info: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(beta: f64, delta: f64, sigma: f64) -> WindowEstimate {
        WindowEstimate { beta, delta, sigma }
    }

    #[test]
    fn merge_sorts_and_combines_coinciding_windows() {
        let merged = normalize_windows(&[w(1.0, 5.0, 1.0), w(2.0, 0.5, 2.0), w(3.0, 5.0 + 1e-7, 4.0)]);
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[0], w(2.0, 0.5, 2.0));
        assert_eq!(merged[1].beta, 4.0);
        assert_eq!(merged[1].sigma, 4.0);
        assert_eq!(merged[1].delta, 5.0 + 1e-7);
    }

    #[test]
    fn candidate_set_follows_iteration() {
        let config = TrainConfig::default();
        assert_eq!(candidate_locations(&[w(1.0, 2.0, 1.0)], &config), vec![0.0, 3.0, 7.0, 12.0]);
        let two = [w(1.0, 2.0, 1.0), w(1.0, 6.0, 1.0)];
        assert_eq!(candidate_locations(&two, &config), vec![4.0, 0.0, 7.0, 11.0, 16.0]);
        let no_extras = TrainConfig { include_midpoints: false, include_zero_start: false, ..TrainConfig::default() };
        assert_eq!(candidate_locations(&two, &no_extras), vec![7.0, 11.0, 16.0]);
        // Lag 0 is not tried twice when the last window sits at zero offset.
        let at_zero = [w(1.0, 0.0, 1.0)];
        let cfg = TrainConfig { zeta_offsets: vec![1.0], ..TrainConfig::default() };
        assert_eq!(candidate_locations(&at_zero, &cfg), vec![0.0, 1.0]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { k_max: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { zeta_offsets: vec![], ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { zeta_offsets: vec![-1.0], ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn too_short_series_fails_with_diagnostic() {
        let data = TimeSeriesPair::new(vec![1.0; 4], vec![1.0; 4]).unwrap();
        match fit(&data, &TrainConfig::default()) {
            Err(SwrError::Training { iteration, partial, .. }) => {
                assert_eq!(iteration, 1);
                assert!(partial.is_empty());
            }
            other => panic!("unexpected: {other:?}"),
        }
    }
}
