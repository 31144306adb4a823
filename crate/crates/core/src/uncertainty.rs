//! Standard errors from the observed information matrix.
//!
//! The Hessian of the negative log-likelihood is approximated by central
//! finite differences. Parameters sitting on their lower bound of zero (or
//! so close that the stencil would leave the feasible region) have no
//! asymptotic normal theory behind them and are reported as unavailable; the
//! remaining block of the Hessian is inverted on its own.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::autocorr::transform_pair;
use crate::error::{Result, SwrError};
use crate::model::{SwrModel, TimeSeriesPair};
use crate::objective::{Loss, ParamLayout, PointCount, SwrObjective};
use crate::train::FitReport;

/// Finite-difference step for a coordinate with value `v`.
pub fn step_size(v: f64) -> f64 {
    (1e-5 * v.abs()).max(1e-5)
}

/// Central-difference Hessian of `f` at `theta` over all coordinates.
/// Fails if `f` is not finite on the stencil.
pub fn numerical_hessian<F: Fn(&[f64]) -> f64>(f: F, theta: &[f64]) -> Result<DMatrix<f64>> {
    let all: Vec<usize> = (0..theta.len()).collect();
    let (h, dropped) = hessian_block(&f, theta, &all);
    if !dropped.is_empty() {
        return Err(SwrError::NonFinite("objective on the finite-difference stencil"));
    }
    Ok(h)
}

/// Hessian restricted to `coords`. Coordinates whose stencil hits a
/// non-finite value are dropped; the returned matrix covers the kept ones in
/// order, and the dropped ones are listed separately.
fn hessian_block<F: Fn(&[f64]) -> f64>(f: &F, theta: &[f64], coords: &[usize]) -> (DMatrix<f64>, Vec<usize>) {
    let f0 = f(theta);
    let steps: Vec<f64> = theta.iter().map(|v| step_size(*v)).collect();
    let mut point = theta.to_vec();
    let mut eval = |shifts: &[(usize, f64)]| -> f64 {
        for &(j, d) in shifts {
            point[j] = theta[j] + d;
        }
        let v = f(&point);
        for &(j, _) in shifts {
            point[j] = theta[j];
        }
        v
    };

    let mut kept = Vec::with_capacity(coords.len());
    let mut dropped = Vec::new();
    let mut diag = Vec::with_capacity(coords.len());
    for &j in coords {
        let h = steps[j];
        let plus = eval(&[(j, h)]);
        let minus = eval(&[(j, -h)]);
        let d = (plus - 2.0 * f0 + minus) / (h * h);
        if d.is_finite() {
            kept.push(j);
            diag.push(d);
        } else {
            dropped.push(j);
        }
    }

    let m = kept.len();
    let mut hess = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
    let mut bad = vec![false; m];
    for a in 0..m {
        for b in (a + 1)..m {
            let (i, j) = (kept[a], kept[b]);
            let (hi, hj) = (steps[i], steps[j]);
            let pp = eval(&[(i, hi), (j, hj)]);
            let pm = eval(&[(i, hi), (j, -hj)]);
            let mp = eval(&[(i, -hi), (j, hj)]);
            let mm = eval(&[(i, -hi), (j, -hj)]);
            let v = (pp - pm - mp + mm) / (4.0 * hi * hj);
            if v.is_finite() {
                hess[(a, b)] = v;
                hess[(b, a)] = v;
            } else {
                bad[b] = true;
            }
        }
    }
    if bad.iter().any(|b| *b) {
        let keep: Vec<usize> = (0..m).filter(|a| !bad[*a]).collect();
        dropped.extend((0..m).filter(|a| bad[*a]).map(|a| kept[a]));
        dropped.sort_unstable();
        let sub = hess.select_rows(&keep).select_columns(&keep);
        return (sub, dropped);
    }
    let hess = (&hess + hess.transpose()) * 0.5;
    (hess, dropped)
}

/// Diagonal of the inverse of a symmetric matrix, `None` where it does not
/// exist or is not positive.
fn inverse_diagonal(h: &DMatrix<f64>) -> Vec<Option<f64>> {
    let n = h.nrows();
    let inverse = match h.clone().cholesky() {
        Some(chol) => Some(chol.inverse()),
        None => h.clone().lu().try_inverse(),
    };
    match inverse {
        Some(inv) => (0..n)
            .map(|i| {
                let v = inv[(i, i)];
                (v.is_finite() && v > 0.0).then_some(v)
            })
            .collect(),
        None => vec![None; n],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowUncertainty {
    pub beta: Estimate,
    pub delta: Estimate,
    pub sigma: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub parameter_names: Vec<String>,
    pub values: Vec<f64>,
    /// Symmetric Hessian of the negative log-likelihood; `None` in the rows
    /// and columns of unavailable parameters.
    pub hessian: Vec<Vec<Option<f64>>>,
    /// Standard errors; `None` marks an unavailable entry.
    pub std_errors: Vec<Option<f64>>,
    pub windows: Vec<WindowUncertainty>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intercept: Option<Estimate>,
}

impl UncertaintyReport {
    pub fn std_error(&self, name: &str) -> Option<f64> {
        let i = self.parameter_names.iter().position(|n| n == name)?;
        self.std_errors[i]
    }
}

/// Observed information of `model` on `data` and the resulting standard
/// errors.
pub fn observed_information(model: &SwrModel, data: &TimeSeriesPair) -> Result<UncertaintyReport> {
    let layout = ParamLayout::new(model.k(), model.intercept().is_some());
    let theta = layout.pack(&model.windows(), model.intercept());
    let objective = SwrObjective::new(data.x(), data.y(), layout, Loss::Nll).with_point_count(PointCount::Valid);
    let f0 = objective.eval(&theta);
    if !f0.is_finite() {
        return Err(SwrError::NonFinite("negative log-likelihood at the fitted parameters"));
    }

    let lower = layout.lower_bounds();
    let interior: Vec<usize> = (0..layout.dim()).filter(|&j| theta[j] - step_size(theta[j]) >= lower[j]).collect();
    let (block, dropped) = hessian_block(&|t: &[f64]| objective.eval(t), &theta, &interior);
    let kept: Vec<usize> = interior.iter().copied().filter(|j| !dropped.contains(j)).collect();

    let dim = layout.dim();
    let mut hessian = vec![vec![None; dim]; dim];
    for (a, &i) in kept.iter().enumerate() {
        for (b, &j) in kept.iter().enumerate() {
            hessian[i][j] = Some(block[(a, b)]);
        }
    }
    let mut std_errors = vec![None; dim];
    if !kept.is_empty() {
        for (a, v) in inverse_diagonal(&block).into_iter().enumerate() {
            std_errors[kept[a]] = v.map(f64::sqrt);
        }
    }

    let est = |j: usize| Estimate { value: theta[j], se: std_errors[j] };
    let windows = (0..layout.k)
        .map(|i| WindowUncertainty {
            beta: est(layout.beta(i)),
            delta: est(layout.delta(i)),
            sigma: est(layout.sigma(i)),
        })
        .collect();
    Ok(UncertaintyReport {
        parameter_names: layout.names(),
        values: theta.clone(),
        hessian,
        intercept: layout.intercept_index().map(est),
        std_errors,
        windows,
    })
}

/// Standard errors for a fitted report on its training data. For an
/// autocorrelation-corrected fit the information is taken on the transformed
/// data, conditional on the estimated AR coefficients, and the intercept is
/// reported in original units.
pub fn report_standard_errors(report: &FitReport, data: &TimeSeriesPair) -> Result<UncertaintyReport> {
    let Some(ar) = report.autocorr_info.as_ref().and_then(|info| info.ar_model()) else {
        return observed_information(&report.final_model, data);
    };
    let scale = 1.0 - ar.phi.iter().sum::<f64>();
    let model = &report.final_model;
    let transformed_model = match model.intercept() {
        Some(c) => SwrModel::new(&model.windows(), Some(c * scale))?,
        None => model.clone(),
    };
    let mut out = observed_information(&transformed_model, &transform_pair(data, &ar)?)?;
    if let (Some(est), Some(j)) = (out.intercept.as_mut(), out.parameter_names.iter().position(|n| n == "intercept")) {
        est.value /= scale;
        est.se = est.se.map(|se| se / scale.abs());
        out.values[j] = est.value;
        out.std_errors[j] = est.se;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WindowEstimate;

    #[test]
    fn quadratic_hessian_is_recovered() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, -0.2, 0.5, -0.2, 2.0]);
        let f = |t: &[f64]| {
            let v = nalgebra::DVector::from_column_slice(t);
            0.5 * (v.transpose() * &a * &v)[(0, 0)]
        };
        let h = numerical_hessian(f, &[0.3, -1.2, 2.5]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((h[(i, j)] - a[(i, j)]).abs() <= 1e-4 * a[(i, j)].abs().max(1.0));
                assert_eq!(h[(i, j)], h[(j, i)]);
            }
        }
    }

    #[test]
    fn singular_matrix_has_no_errors() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(inverse_diagonal(&h), vec![None, None]);
    }

    #[test]
    fn boundary_delta_is_unavailable() {
        let x: Vec<f64> = (0..400).map(|i| ((i * 7919) % 13) as f64 / 13.0).collect();
        let model = SwrModel::new(&[WindowEstimate { beta: 2.0, delta: 0.0, sigma: 1.0 }], None).unwrap();
        let clean = model.predict(&x).unwrap();
        let y: Vec<f64> = clean
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| if v.is_nan() { 0.0 } else { v + 0.05 * (((i * 31) % 17) as f64 / 17.0 - 0.5) })
            .collect();
        let data = TimeSeriesPair::new(x, y).unwrap();
        let report = observed_information(&model, &data).unwrap();
        assert_eq!(report.parameter_names, vec!["beta_1", "delta_1", "sigma_1"]);
        assert!(report.std_errors[1].is_none());
        assert!(report.windows[0].delta.se.is_none());
        assert!(report.std_errors[0].unwrap() > 0.0);
        assert!(report.hessian[1].iter().all(Option::is_none));
    }
}
