//! Gaussian sliding windows regression.
//!
//! Models a target series as a sum of non-negative multiples of the input
//! series convolved with discretized Gaussian lag kernels ("windows"). The
//! crate covers kernel construction, prediction and likelihood, incremental
//! model fitting with information-criterion selection, residual
//! autocorrelation handling, standard errors, evaluation metrics, and a
//! simulation harness.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autocorr;
pub mod error;
pub mod kernel;
pub mod metrics;
pub mod model;
pub mod objective;
pub mod optimize;
pub mod sim;
pub mod train;
pub mod uncertainty;

pub use autocorr::{durbin_watson, fit_ar, fit_with_autocorr, ArModel, AutocorrConfig, AutocorrInfo, DwTest};
pub use error::{Result, SwrError};
pub use kernel::{build_kernel, combine_kernels, WindowKernel, WindowParams};
pub use metrics::{kernel_overlap, kge, max_r2_ar1, max_r2_iid, r2, rmse, EvalScores};
pub use model::{Criterion, FitStatistics, Prediction, SwrModel, TimeSeriesPair, WindowEstimate};
pub use objective::Loss;
pub use optimize::{minimize, OptProblem, OptResult};
pub use sim::{generate, run_study, sample_truth, ErrorProcess, InputSpec, SimSetup, StudyGrid, StudyReport};
pub use train::{fit, FitReport, IterationRecord, TrainConfig};
pub use uncertainty::{observed_information, report_standard_errors, UncertaintyReport};
