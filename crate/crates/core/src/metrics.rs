//! Goodness-of-fit scores, kernel overlap and the noise-limited bounds on R².

use serde::{Deserialize, Serialize};

use crate::error::{Result, SwrError};
use crate::model::Prediction;

/// Tolerance for the unit-sum check on overlap inputs.
pub const OVERLAP_NORMALIZATION_TOL: f64 = 1e-9;

fn check_pair(observed: &[f64], predicted: &[f64]) -> Result<()> {
    if observed.len() != predicted.len() {
        return Err(SwrError::LengthMismatch { left: observed.len(), right: predicted.len() });
    }
    if observed.is_empty() {
        return Err(SwrError::SeriesTooShort { needed: 1, got: 0 });
    }
    if observed.iter().chain(predicted).any(|v| !v.is_finite()) {
        return Err(SwrError::NonFinite("scored series"));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn rmse(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(observed, predicted)?;
    let sse: f64 = observed.iter().zip(predicted).map(|(o, p)| (o - p).powi(2)).sum();
    Ok((sse / observed.len() as f64).sqrt())
}

/// Coefficient of determination (Nash-Sutcliffe efficiency).
pub fn r2(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(observed, predicted)?;
    if observed.len() < 2 {
        return Err(SwrError::SeriesTooShort { needed: 2, got: observed.len() });
    }
    let m = mean(observed);
    let sst: f64 = observed.iter().map(|o| (o - m).powi(2)).sum();
    if sst == 0.0 {
        return Err(SwrError::Degenerate("observed series is constant".into()));
    }
    let sse: f64 = observed.iter().zip(predicted).map(|(o, p)| (o - p).powi(2)).sum();
    Ok(1.0 - sse / sst)
}

/// Kling-Gupta efficiency.
pub fn kge(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(observed, predicted)?;
    if observed.len() < 2 {
        return Err(SwrError::SeriesTooShort { needed: 2, got: observed.len() });
    }
    let (mo, mp) = (mean(observed), mean(predicted));
    let so = observed.iter().map(|o| (o - mo).powi(2)).sum::<f64>().sqrt();
    let sp = predicted.iter().map(|p| (p - mp).powi(2)).sum::<f64>().sqrt();
    if mo == 0.0 {
        return Err(SwrError::Degenerate("observed mean is zero".into()));
    }
    if so == 0.0 {
        return Err(SwrError::Degenerate("observed series is constant".into()));
    }
    if sp == 0.0 {
        return Err(SwrError::Degenerate("prediction is constant, correlation undefined".into()));
    }
    let cov: f64 = observed.iter().zip(predicted).map(|(o, p)| (o - mo) * (p - mp)).sum();
    let r = cov / (so * sp);
    Ok(1.0 - ((r - 1.0).powi(2) + (sp / so - 1.0).powi(2) + (mp / mo - 1.0).powi(2)).sqrt())
}

/// Sum of element-wise minima of two normalized lag-weight vectors. The
/// shorter vector is padded with zeros.
pub fn kernel_overlap(w1: &[f64], w2: &[f64]) -> Result<f64> {
    for w in [w1, w2] {
        if w.iter().any(|v| !v.is_finite()) {
            return Err(SwrError::NonFinite("overlap weights"));
        }
        if w.iter().any(|v| *v < 0.0) {
            return Err(SwrError::InvalidParameter("overlap weights must be non-negative".into()));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > OVERLAP_NORMALIZATION_TOL {
            return Err(SwrError::InvalidParameter(format!("overlap weights must sum to 1, got {total}")));
        }
    }
    Ok(w1.iter().zip(w2).map(|(a, b)| a.min(*b)).sum::<f64>().min(1.0))
}

/// Best achievable R² when the noise SD is `alpha` times the SD of the
/// noiseless signal and the errors are independent.
pub fn max_r2_iid(alpha: f64) -> f64 {
    let a2 = alpha * alpha;
    1.0 - a2 / (1.0 + a2)
}

/// Best achievable R² for AR(1) errors with innovation SD `alpha` times the
/// signal SD, on a series of length `t`.
pub fn max_r2_ar1(alpha: f64, phi: f64, t: usize) -> Result<f64> {
    if !(phi > -1.0 && phi < 1.0) {
        return Err(SwrError::InvalidParameter(format!("phi must lie in (-1, 1), got {phi}")));
    }
    if t < 2 {
        return Err(SwrError::SeriesTooShort { needed: 2, got: t });
    }
    let phi2 = phi * phi;
    let xi = if phi2 == 0.0 { 1.0 } else { (1.0 - phi2.powi((t - 1) as i32)) / (1.0 - phi2) };
    Ok(1.0 / (1.0 + xi * alpha * alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalScores {
    pub rmse: f64,
    pub r2: f64,
    pub kge: f64,
    /// Number of time points scored.
    pub n: usize,
}

impl EvalScores {
    pub fn compute(observed: &[f64], predicted: &[f64]) -> Result<Self> {
        Ok(Self {
            rmse: rmse(observed, predicted)?,
            r2: r2(observed, predicted)?,
            kge: kge(observed, predicted)?,
            n: observed.len(),
        })
    }

    /// Scores a prediction over `range` intersected with its valid points.
    pub fn for_prediction(observed: &[f64], prediction: &Prediction, range: std::ops::Range<usize>) -> Result<Self> {
        if observed.len() != prediction.len() {
            return Err(SwrError::LengthMismatch { left: observed.len(), right: prediction.len() });
        }
        let start = range.start.max(prediction.first_valid());
        let end = range.end.min(observed.len());
        if start >= end {
            return Err(SwrError::SeriesTooShort { needed: 1, got: 0 });
        }
        Self::compute(&observed[start..end], &prediction.values()[start..end])
    }
}

/// Fixed-width table with one row per labelled score set.
pub fn score_table(rows: &[(&str, EvalScores)]) -> String {
    let mut out = format!("{:<10} {:>10} {:>10} {:>12} {:>8}\n", "", "R2", "KGE", "RMSE", "n");
    for (label, s) in rows {
        out.push_str(&format!("{:<10} {:>10.4} {:>10.4} {:>12.4} {:>8}\n", label, s.r2, s.kge, s.rmse, s.n));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r2_cases() {
        let y = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(r2(&y, &y).unwrap(), 1.0);
        assert_eq!(r2(&y, &[2.5; 4]).unwrap(), 0.0);
        assert!((r2(&y, &[1.0, 2.0, 3.0, 6.0]).unwrap() - 0.2).abs() < 1e-15);
        assert!(r2(&[1.0; 3], &[1.0; 3]).is_err());
    }

    #[test]
    fn kge_cases() {
        let y = [1.0, 2.0, 4.0, 3.0, 7.0];
        assert_eq!(kge(&y, &y).unwrap(), 1.0);
        let doubled: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
        assert!((kge(&y, &doubled).unwrap() - (1.0 - 2f64.sqrt())).abs() < 1e-12);
        let shifted: Vec<f64> = y.iter().map(|v| v + mean(&y)).collect();
        assert!(kge(&y, &shifted).unwrap().abs() < 1e-12);
        assert!(kge(&y, &[1.0; 5]).is_err());
        assert!(kge(&[-1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn rmse_cases() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[1.0, 2.0, 5.0], &[1.5, 2.5, 5.5]).unwrap() - 0.5).abs() < 1e-15);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn overlap_cases() {
        assert_eq!(kernel_overlap(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 1.0);
        assert_eq!(kernel_overlap(&[1.0, 0.0], &[0.0, 0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(kernel_overlap(&[0.5, 0.5], &[0.25, 0.75]).unwrap(), 0.75);
        assert!(kernel_overlap(&[0.5, 0.4], &[1.0]).is_err());
        assert!(kernel_overlap(&[1.5, -0.5], &[1.0]).is_err());
    }

    #[test]
    fn bounds() {
        assert_eq!(max_r2_iid(0.0), 1.0);
        assert!((max_r2_iid(0.5) - 0.8).abs() < 1e-15);
        assert!((max_r2_ar1(0.5, 0.5, 10_000).unwrap() - 0.75).abs() < 1e-12);
        for t in [2, 3, 100] {
            assert_eq!(max_r2_ar1(0.7, 0.0, t).unwrap(), max_r2_iid(0.7));
        }
        assert!(max_r2_ar1(0.5, 1.0, 10).is_err());
    }
}
