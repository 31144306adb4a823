//! Simulation harness: random ground-truth models, synthetic rainfall-like
//! input, scaled noise, and the grid study runner.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autocorr::{fit_with_autocorr, AutocorrConfig};
use crate::error::{Result, SwrError};
use crate::metrics::{kernel_overlap, max_r2_ar1, max_r2_iid, EvalScores};
use crate::model::{SwrModel, TimeSeriesPair, WindowEstimate};
use crate::train::{fit, TrainConfig};

/// Uniform prior over ground-truth window parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TruthPrior {
    pub delta_max: f64,
    pub sigma_max: f64,
    pub beta_max: f64,
    /// Minimum spacing between window locations; draws violating it are
    /// repeated.
    pub min_delta_gap: f64,
}

impl Default for TruthPrior {
    fn default() -> Self {
        Self { delta_max: 20.0, sigma_max: 5.0, beta_max: 5.0, min_delta_gap: 0.5 }
    }
}

pub fn sample_truth(k: usize, seed: u64) -> Result<SwrModel> {
    sample_truth_with(k, seed, &TruthPrior::default())
}

pub fn sample_truth_with(k: usize, seed: u64, prior: &TruthPrior) -> Result<SwrModel> {
    if k == 0 {
        return Err(SwrError::InvalidParameter("k must be at least 1".into()));
    }
    if !(prior.delta_max > 0.0 && prior.sigma_max > 0.0 && prior.beta_max > 0.0 && prior.min_delta_gap >= 0.0)
        || prior.min_delta_gap * (k as f64 - 1.0) >= prior.delta_max
    {
        return Err(SwrError::InvalidParameter(format!("unusable truth prior {prior:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut windows: Vec<WindowEstimate> = (0..k)
            .map(|_| WindowEstimate {
                delta: rng.random_range(0.0..prior.delta_max),
                sigma: rng.random_range(0.0..prior.sigma_max),
                beta: rng.random_range(0.0..prior.beta_max),
            })
            .collect();
        windows.sort_by(|a, b| a.delta.total_cmp(&b.delta));
        if windows.windows(2).all(|p| p[1].delta - p[0].delta >= prior.min_delta_gap) {
            return SwrModel::new(&windows, None);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "process", rename_all = "lowercase")]
pub enum ErrorProcess {
    Iid,
    Ar1 {
        phi: f64,
    },
    /// General autoregressive errors `e_t = sum_j phi_j e_{t-j} + eta_t`.
    Ar {
        phi: Vec<f64>,
    },
}

impl ErrorProcess {
    pub fn coefficients(&self) -> Vec<f64> {
        match self {
            Self::Iid => Vec::new(),
            Self::Ar1 { phi } => vec![*phi],
            Self::Ar { phi } => phi.clone(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Iid => "iid",
            Self::Ar1 { .. } => "ar1",
            Self::Ar { .. } => "ar",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Iid => Ok(()),
            Self::Ar1 { phi } if *phi > -1.0 && *phi < 1.0 => Ok(()),
            Self::Ar1 { phi } => Err(SwrError::InvalidParameter(format!("AR(1) phi must lie in (-1, 1), got {phi}"))),
            Self::Ar { phi } if !phi.is_empty() && phi.iter().all(|p| p.is_finite()) => Ok(()),
            Self::Ar { .. } => Err(SwrError::InvalidParameter("AR coefficients must be non-empty and finite".into())),
        }
    }

    /// Best achievable R² at noise level `alpha` over `t` points, where a
    /// closed form exists.
    pub fn r2_bound(&self, alpha: f64, t: usize) -> Option<f64> {
        match self {
            Self::Iid => Some(max_r2_iid(alpha)),
            Self::Ar1 { phi } => max_r2_ar1(alpha, *phi, t).ok(),
            Self::Ar { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSpec {
    /// Zero-inflated exponential spikes: each step rains with probability
    /// `spike_rate`, with exponentially distributed depth of mean `spike_scale`.
    Synthetic { length: usize, spike_rate: f64, spike_scale: f64, seed: u64 },
    /// A numeric column of a CSV file with a header row.
    FromFile { path: PathBuf, column: String },
}

impl InputSpec {
    pub fn synthetic(length: usize, seed: u64) -> Self {
        Self::Synthetic { length, spike_rate: 0.3, spike_scale: 1.0, seed }
    }
}

fn spikes(rng: &mut ChaCha8Rng, n: usize, rate: f64, depth: &Exp<f64>) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let wet = rng.random::<f64>() < rate;
            let v = depth.sample(rng);
            if wet {
                v
            } else {
                0.0
            }
        })
        .collect()
}

/// Synthetic rainfall of length `length`, preceded by `history` extra steps
/// drawn from an independent stream so that the main series does not depend
/// on the history length.
pub fn synthetic_rainfall(
    length: usize,
    history: usize,
    spike_rate: f64,
    spike_scale: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&spike_rate) {
        return Err(SwrError::InvalidParameter(format!("spike_rate must lie in [0, 1], got {spike_rate}")));
    }
    let depth = Exp::new(1.0 / spike_scale)
        .map_err(|_| SwrError::InvalidParameter(format!("spike_scale must be positive, got {spike_scale}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let main = spikes(&mut rng, length, spike_rate, &depth);
    rng.set_stream(1);
    let mut out = spikes(&mut rng, history, spike_rate, &depth);
    out.extend(main);
    Ok(out)
}

/// Reads a numeric column from a CSV file with a header row.
pub fn read_csv_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path)?;
    let col = reader
        .headers()?
        .iter()
        .position(|h| h.trim() == column)
        .ok_or_else(|| SwrError::InvalidParameter(format!("column '{column}' not found in {}", path.display())))?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i as u64 + 2, |p| p.line());
        let field = record.get(col).unwrap_or("");
        let v: f64 = field.trim().parse().map_err(|_| {
            SwrError::InvalidParameter(format!(
                "{}:{line}: column '{column}' holds non-numeric value '{field}'",
                path.display()
            ))
        })?;
        out.push(v);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSetup {
    pub truth: SwrModel,
    pub alpha: f64,
    pub error_process: ErrorProcess,
    /// Seed for the noise only.
    pub seed: u64,
    pub input: InputSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub data: TimeSeriesPair,
    /// Noiseless target.
    pub y_true: Vec<f64>,
    pub noise: Vec<f64>,
    /// Innovation SD of the noise.
    pub rho: f64,
    pub signal_variance: f64,
}

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Generates `y = y_hat + e` from the ground truth. The input carries a
/// history of `truth.max_lag()` steps before the returned window (synthetic
/// spikes, or zeros for file input), so every returned target value is a
/// full-history model output.
pub fn generate(setup: &SimSetup) -> Result<SimulatedData> {
    if !(setup.alpha >= 0.0) || !setup.alpha.is_finite() {
        return Err(SwrError::InvalidParameter(format!("alpha must be non-negative, got {}", setup.alpha)));
    }
    setup.error_process.validate()?;
    let history = setup.truth.max_lag();
    let full_x = match &setup.input {
        InputSpec::Synthetic { length, spike_rate, spike_scale, seed } => {
            synthetic_rainfall(*length, history, *spike_rate, *spike_scale, *seed)?
        }
        InputSpec::FromFile { path, column } => {
            let mut x = vec![0.0; history];
            x.extend(read_csv_column(path, column)?);
            x
        }
    };
    let n = full_x.len() - history;
    if n < 2 {
        return Err(SwrError::SeriesTooShort { needed: 2, got: n });
    }
    let y_true = setup.truth.predict(&full_x)?.values()[history..].to_vec();
    let x = full_x[history..].to_vec();

    let signal_variance = sample_variance(&y_true);
    let rho = setup.alpha * signal_variance.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let eta: Vec<f64> = (0..n).map(|_| rho * normal.sample(&mut rng)).collect();
    let phi = setup.error_process.coefficients();
    let mut noise = Vec::with_capacity(n);
    for t in 0..n {
        let ar: f64 = phi.iter().enumerate().filter(|(j, _)| *j < t).map(|(j, p)| p * noise[t - 1 - j]).sum();
        noise.push(ar + eta[t]);
    }
    let y: Vec<f64> = y_true.iter().zip(&noise).map(|(a, e)| a + e).collect();
    Ok(SimulatedData { data: TimeSeriesPair::new(x, y)?, y_true, noise, rho, signal_variance })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyGrid {
    pub k_values: Vec<usize>,
    pub setups_per_k: usize,
    pub alphas: Vec<f64>,
    pub error_process: ErrorProcess,
    pub length: usize,
    pub spike_rate: f64,
    pub spike_scale: f64,
    pub split: f64,
    pub seed_base: u64,
    pub prior: TruthPrior,
}

impl Default for StudyGrid {
    fn default() -> Self {
        Self {
            k_values: vec![1, 2, 3],
            setups_per_k: 5,
            alphas: vec![0.05, 0.25, 0.5, 0.75, 0.95],
            error_process: ErrorProcess::Iid,
            length: 3000,
            spike_rate: 0.3,
            spike_scale: 1.0,
            split: 0.75,
            seed_base: 0,
            prior: TruthPrior::default(),
        }
    }
}

/// Offsets separating truth-sampling and input seeds from noise seeds.
const TRUTH_SEED_OFFSET: u64 = 10_000;
const INPUT_SEED_OFFSET: u64 = 20_000;

#[derive(Debug, Clone, PartialEq)]
struct Cell {
    index: usize,
    setup_id: usize,
    k_gt: usize,
    alpha: f64,
}

impl StudyGrid {
    fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        let mut setup_id = 0;
        for &k_gt in &self.k_values {
            for _ in 0..self.setups_per_k {
                for &alpha in &self.alphas {
                    cells.push(Cell { index: cells.len(), setup_id, k_gt, alpha });
                }
                setup_id += 1;
            }
        }
        cells
    }

    pub fn n_cells(&self) -> usize {
        self.k_values.len() * self.setups_per_k * self.alphas.len()
    }

    /// Ground truth of setup `setup_id` with `k_gt` windows. Truth and input
    /// series are shared across the noise levels of a setup.
    pub fn truth(&self, setup_id: usize, k_gt: usize) -> Result<SwrModel> {
        sample_truth_with(k_gt, self.seed_base + TRUTH_SEED_OFFSET + setup_id as u64, &self.prior)
    }

    pub fn setup_for(&self, setup_id: usize, k_gt: usize, alpha: f64, cell_index: usize) -> Result<SimSetup> {
        Ok(SimSetup {
            truth: self.truth(setup_id, k_gt)?,
            alpha,
            error_process: self.error_process.clone(),
            seed: self.seed_base + cell_index as u64,
            input: InputSpec::Synthetic {
                length: self.length,
                spike_rate: self.spike_rate,
                spike_scale: self.spike_scale,
                seed: self.seed_base + INPUT_SEED_OFFSET + setup_id as u64,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub setup_id: usize,
    pub k_gt: usize,
    pub alpha: f64,
    pub process: String,
    pub overlap: Option<f64>,
    pub r2: Option<f64>,
    pub kge: Option<f64>,
    pub rmse: Option<f64>,
    pub r2_bound: Option<f64>,
    pub k_selected: Option<usize>,
    pub delta_k: Option<i64>,
    pub phi_hat: Option<f64>,
    pub dw_p_before: Option<f64>,
    pub dw_p_after: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub k_gt: usize,
    pub alpha: f64,
    pub cells: usize,
    pub failures: usize,
    pub mean_overlap: Option<f64>,
    pub mean_r2: Option<f64>,
    pub mean_kge: Option<f64>,
    pub mean_rmse: Option<f64>,
    pub r2_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub grid: StudyGrid,
    pub train: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub autocorr: Option<AutocorrConfig>,
    pub rows: Vec<StudyRow>,
    pub aggregates: Vec<CellAggregate>,
    /// Counts of `k_selected - k_gt`, keyed by ground-truth window count.
    pub delta_k_histogram: BTreeMap<usize, BTreeMap<i64, usize>>,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl StudyReport {
    fn new(grid: StudyGrid, train: TrainConfig, autocorr: Option<AutocorrConfig>, rows: Vec<StudyRow>) -> Self {
        let mut aggregates = Vec::new();
        for &k_gt in &grid.k_values {
            for &alpha in &grid.alphas {
                let group: Vec<&StudyRow> = rows.iter().filter(|r| r.k_gt == k_gt && r.alpha == alpha).collect();
                aggregates.push(CellAggregate {
                    k_gt,
                    alpha,
                    cells: group.len(),
                    failures: group.iter().filter(|r| r.error.is_some()).count(),
                    mean_overlap: mean_of(group.iter().map(|r| r.overlap)),
                    mean_r2: mean_of(group.iter().map(|r| r.r2)),
                    mean_kge: mean_of(group.iter().map(|r| r.kge)),
                    mean_rmse: mean_of(group.iter().map(|r| r.rmse)),
                    r2_bound: grid
                        .error_process
                        .r2_bound(alpha, grid.length - (grid.length as f64 * grid.split) as usize),
                });
            }
        }
        let mut delta_k_histogram: BTreeMap<usize, BTreeMap<i64, usize>> = BTreeMap::new();
        for row in &rows {
            if let Some(dk) = row.delta_k {
                *delta_k_histogram.entry(row.k_gt).or_default().entry(dk).or_default() += 1;
            }
        }
        Self { grid, train, autocorr, rows, aggregates, delta_k_histogram }
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn run_cell(grid: &StudyGrid, train: &TrainConfig, autocorr: Option<&AutocorrConfig>, cell: &Cell) -> StudyRow {
    let mut row = StudyRow {
        setup_id: cell.setup_id,
        k_gt: cell.k_gt,
        alpha: cell.alpha,
        process: grid.error_process.label().to_string(),
        overlap: None,
        r2: None,
        kge: None,
        rmse: None,
        r2_bound: None,
        k_selected: None,
        delta_k: None,
        phi_hat: None,
        dw_p_before: None,
        dw_p_after: None,
        error: None,
    };
    let result = (|| -> Result<()> {
        let setup = grid.setup_for(cell.setup_id, cell.k_gt, cell.alpha, cell.index)?;
        let sim = generate(&setup)?;
        let (train_data, at) = sim.data.split(grid.split)?;
        let report = match autocorr {
            Some(options) => fit_with_autocorr(&train_data, train, options)?,
            None => fit(&train_data, train)?,
        };
        row.k_selected = Some(report.selected_k);
        row.delta_k = Some(report.selected_k as i64 - cell.k_gt as i64);
        if let Some(info) = &report.autocorr_info {
            row.phi_hat = info.phi.first().copied();
            row.dw_p_before = Some(info.dw_before.p);
            row.dw_p_after = info.dw_after.map(|d| d.p);
        }
        let truth_kernel = setup.truth.combined_kernel(true)?;
        let fitted_kernel = report.final_model.combined_kernel(true)?;
        row.overlap = Some(kernel_overlap(&truth_kernel, &fitted_kernel)?);
        row.r2_bound = grid.error_process.r2_bound(cell.alpha, sim.data.len() - at);
        let prediction = report.final_model.predict(sim.data.x())?;
        let scores = EvalScores::for_prediction(sim.data.y(), &prediction, at..sim.data.len())?;
        row.r2 = Some(scores.r2);
        row.kge = Some(scores.kge);
        row.rmse = Some(scores.rmse);
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e.to_string());
    }
    row
}

/// Runs every cell of the grid. Cells run concurrently; rows come back in
/// grid order and each cell's result depends only on its seeds.
pub fn run_study(grid: &StudyGrid, train: &TrainConfig, autocorr: Option<&AutocorrConfig>) -> Result<StudyReport> {
    if grid.k_values.is_empty() || grid.k_values.contains(&0) {
        return Err(SwrError::InvalidParameter("k_values must be non-empty and positive".into()));
    }
    if grid.alphas.is_empty() || grid.alphas.iter().any(|a| !(*a >= 0.0)) {
        return Err(SwrError::InvalidParameter("alphas must be non-empty and non-negative".into()));
    }
    if grid.setups_per_k == 0 {
        return Err(SwrError::InvalidParameter("setups_per_k must be positive".into()));
    }
    grid.error_process.validate()?;
    train.validate()?;
    let rows: Vec<StudyRow> = grid.cells().par_iter().map(|cell| run_cell(grid, train, autocorr, cell)).collect();
    Ok(StudyReport::new(grid.clone(), train.clone(), autocorr.cloned(), rows))
}
