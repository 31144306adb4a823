use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use swr_core::metrics::score_table;
use swr_core::sim::{InputSpec, SimulatedData, StudyGrid, TruthPrior};
use swr_core::{
    fit as fit_model, fit_with_autocorr, generate, report_standard_errors, run_study, sample_truth, AutocorrConfig,
    Criterion, ErrorProcess, EvalScores, FitReport, Loss, SimSetup, SwrModel, TimeSeriesPair, TrainConfig,
};

use crate::dataset::{create_dir, csv_writer, field, read_json, write_json};
use crate::error::{CliError, CliResult};
use crate::{
    CriterionArg, EvaluateArgs, FitArgs, LossArg, PredictArgs, ProcessArg, SimulateArgs, StudyArgs, TrainArgs,
};

/// Seed offsets shared with the study runner's layout.
const TRUTH_SEED_OFFSET: u64 = 10_000;
const INPUT_SEED_OFFSET: u64 = 20_000;

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            k_max: self.k_max,
            criterion: match self.criterion {
                CriterionArg::Aic => Criterion::Aic,
                CriterionArg::Bic => Criterion::Bic,
            },
            loss: match self.loss {
                LossArg::Nll => Loss::Nll,
                LossArg::Rmse => Loss::Rmse,
            },
            intercept: self.intercept,
            ..TrainConfig::default()
        }
    }

    fn autocorr(&self) -> Option<AutocorrConfig> {
        self.autocorr.then(|| AutocorrConfig {
            max_order: self.max_ar_order,
            dw_alpha: self.dw_alpha,
            seed: self.seed,
            ..AutocorrConfig::default()
        })
    }
}

fn process(arg: ProcessArg, phi: f64) -> ErrorProcess {
    match arg {
        ProcessArg::Iid => ErrorProcess::Iid,
        ProcessArg::Ar1 => ErrorProcess::Ar1 { phi },
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Evaluation {
    #[serde(skip_serializing_if = "Option::is_none")]
    train: Option<EvalScores>,
    #[serde(skip_serializing_if = "Option::is_none")]
    test: Option<EvalScores>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FitOutput {
    #[serde(flatten)]
    report: FitReport,
    split: f64,
    train_len: usize,
    evaluation: Evaluation,
}

fn score(y: &[f64], model: &SwrModel, x: &[f64], range: std::ops::Range<usize>) -> Option<EvalScores> {
    let prediction = model.predict(x).ok()?;
    EvalScores::for_prediction(y, &prediction, range).ok()
}

pub fn fit(args: FitArgs) -> CliResult<()> {
    let data = args.data.dataset()?.load_pair()?;
    let (train, at) = data.split(args.split)?;
    let config = args.train.config();
    let report = match args.train.autocorr() {
        Some(options) => fit_with_autocorr(&train, &config, &options)?,
        None => fit_model(&train, &config)?,
    };
    let model = &report.final_model;

    create_dir(&args.out_dir)?;
    write_json(&args.out_dir.join("model.json"), model)?;

    let prediction = model.predict(data.x())?;
    let mut w = csv_writer(&args.out_dir.join("fitted.csv"))?;
    w.write_record(["time", "x", "y", "y_hat", "valid", "train"]).map_err(|e| CliError::Data(e.to_string()))?;
    for t in 0..data.len() {
        let valid = prediction.is_valid(t);
        w.write_record([
            data.index()[t].to_string(),
            data.x()[t].to_string(),
            data.y()[t].to_string(),
            field(valid.then(|| prediction.values()[t])),
            u8::from(valid).to_string(),
            u8::from(t < at).to_string(),
        ])
        .map_err(|e| CliError::Data(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::io(&args.out_dir, e))?;

    let evaluation = Evaluation {
        train: score(train.y(), model, train.x(), 0..at),
        test: (at < data.len()).then(|| score(data.y(), model, data.x(), at..data.len())).flatten(),
    };

    if args.uncertainty {
        let se = report_standard_errors(&report, &train)?;
        write_json(&args.out_dir.join("uncertainty.json"), &se)?;
    }

    print!("{}", report.summary_table());
    println!("selected k = {} ({:?})", report.selected_k, report.config.criterion);
    if let Some(info) = &report.autocorr_info {
        println!(
            "autocorrelation: AR({}) phi = {:?}, DW before d = {:.4} p = {:.3}{}",
            info.order,
            info.phi,
            info.dw_before.d,
            info.dw_before.p,
            info.dw_after.map(|d| format!(", after d = {:.4} p = {:.3}", d.d, d.p)).unwrap_or_default()
        );
    }
    let mut rows = Vec::new();
    if let Some(s) = evaluation.train {
        rows.push(("train", s));
    }
    if let Some(s) = evaluation.test {
        rows.push(("test", s));
    }
    if !rows.is_empty() {
        print!("{}", score_table(&rows));
    }

    let output = FitOutput { report, split: args.split, train_len: at, evaluation };
    write_json(&args.out_dir.join("report.json"), &output)?;
    Ok(())
}

pub fn predict(args: PredictArgs) -> CliResult<()> {
    let model: SwrModel = read_json(&args.model)?;
    let cols = args.data.dataset()?.load(false)?;
    let prediction = model.predict(&cols.x)?;
    let sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(std::fs::File::create(path).map_err(|e| CliError::io(path, e))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let to_err = |e: csv::Error| CliError::Data(e.to_string());
    let mut header = vec!["time", "x"];
    if cols.y.is_some() {
        header.push("y");
    }
    header.extend(["y_hat", "valid"]);
    w.write_record(&header).map_err(to_err)?;
    for t in 0..cols.x.len() {
        let valid = prediction.is_valid(t);
        let mut record = vec![cols.time[t].to_string(), cols.x[t].to_string()];
        if let Some(y) = &cols.y {
            record.push(y[t].to_string());
        }
        record.push(field(valid.then(|| prediction.values()[t])));
        record.push(u8::from(valid).to_string());
        w.write_record(&record).map_err(to_err)?;
    }
    w.flush().map_err(|e| CliError::Data(e.to_string()))?;
    Ok(())
}

fn write_dataset(path: &Path, sim: &SimulatedData) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    let to_err = |e: csv::Error| CliError::Data(e.to_string());
    w.write_record(["time", "x", "y", "y_true"]).map_err(to_err)?;
    let d = &sim.data;
    for t in 0..d.len() {
        w.write_record([
            d.index()[t].to_string(),
            d.x()[t].to_string(),
            d.y()[t].to_string(),
            sim.y_true[t].to_string(),
        ])
        .map_err(to_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn simulate(args: SimulateArgs) -> CliResult<()> {
    let truth: SwrModel = match &args.truth {
        Some(path) => read_json(path)?,
        None => sample_truth(args.windows, args.seed + TRUTH_SEED_OFFSET)?,
    };
    let input = match &args.input_file {
        Some(path) => InputSpec::FromFile { path: path.clone(), column: args.input_col.clone() },
        None => InputSpec::Synthetic {
            length: args.length,
            spike_rate: args.spike_rate,
            spike_scale: args.spike_scale,
            seed: args.seed + INPUT_SEED_OFFSET,
        },
    };
    let setup =
        SimSetup { truth, alpha: args.alpha, error_process: process(args.process, args.phi), seed: args.seed, input };
    let sim = generate(&setup)?;
    create_dir(&args.out_dir)?;
    write_dataset(&args.out_dir.join("data.csv"), &sim)?;
    write_json(&args.out_dir.join("truth.json"), &setup.truth)?;
    write_json(&args.out_dir.join("setup.json"), &setup)?;
    println!("wrote {} rows; signal variance {:.6}, noise sd {:.6}", sim.data.len(), sim.signal_variance, sim.rho);
    Ok(())
}

pub fn study(args: StudyArgs) -> CliResult<()> {
    let grid: StudyGrid = match &args.grid {
        Some(path) => read_json(path)?,
        None => StudyGrid {
            k_values: args.k_values.clone(),
            setups_per_k: args.setups_per_k,
            alphas: args.alphas.clone(),
            error_process: process(args.process, args.phi),
            length: args.length,
            split: args.split,
            seed_base: args.train.seed,
            prior: TruthPrior::default(),
            ..StudyGrid::default()
        },
    };
    let config = args.train.config();
    let autocorr = args.train.autocorr();
    let report = run_study(&grid, &config, autocorr.as_ref())?;

    create_dir(&args.out_dir)?;
    let csv_path = args.out_dir.join("study.csv");
    let file = std::fs::File::create(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    report.write_csv(file)?;
    write_json(&args.out_dir.join("study.json"), &report)?;

    println!("{:>4} {:>6} {:>6} {:>9} {:>9} {:>9} {:>9}", "k_gt", "alpha", "cells", "overlap", "R2", "bound", "failed");
    let fmt = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
    for a in &report.aggregates {
        println!(
            "{:>4} {:>6} {:>6} {:>9} {:>9} {:>9} {:>9}",
            a.k_gt,
            a.alpha,
            a.cells,
            fmt(a.mean_overlap),
            fmt(a.mean_r2),
            fmt(a.r2_bound),
            a.failures
        );
    }
    for (k, hist) in &report.delta_k_histogram {
        println!("delta k for k_gt = {k}: {hist:?}");
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvaluateOutput {
    all: EvalScores,
    #[serde(skip_serializing_if = "Option::is_none")]
    train: Option<EvalScores>,
    #[serde(skip_serializing_if = "Option::is_none")]
    test: Option<EvalScores>,
}

/// Scores the rows in `range` that have a prediction.
fn score_rows(y: &[f64], predicted: &[Option<f64>], range: std::ops::Range<usize>) -> CliResult<EvalScores> {
    let (obs, pred): (Vec<f64>, Vec<f64>) =
        range.filter_map(|t| predicted[t].filter(|p| p.is_finite()).map(|p| (y[t], p))).unzip();
    Ok(EvalScores::compute(&obs, &pred)?)
}

pub fn evaluate(args: EvaluateArgs) -> CliResult<()> {
    let dataset = args.data.dataset()?;
    let data: TimeSeriesPair = dataset.load_pair()?;
    let predicted: Vec<Option<f64>> = match &args.model {
        Some(path) => {
            let model: SwrModel = read_json(path)?;
            let prediction = model.predict(data.x())?;
            (0..data.len()).map(|t| prediction.is_valid(t).then(|| prediction.values()[t])).collect()
        }
        None => dataset.load_optional_column(&args.predicted_col)?,
    };
    let n = data.len();
    let all = score_rows(data.y(), &predicted, 0..n)?;
    let (train, test) = match args.split {
        None => (None, None),
        Some(fraction) => {
            let (_, at) = data.split(fraction)?;
            (
                Some(score_rows(data.y(), &predicted, 0..at)?),
                (at < n).then(|| score_rows(data.y(), &predicted, at..n)).transpose()?,
            )
        }
    };
    let output = EvaluateOutput { all, train, test };
    match &args.out {
        Some(path) => {
            write_json(path, &output)?;
            let mut rows = vec![("all", all)];
            rows.extend(train.map(|s| ("train", s)));
            rows.extend(test.map(|s| ("test", s)));
            print!("{}", score_table(&rows));
        }
        None => {
            let text = serde_json::to_string_pretty(&output).map_err(|e| CliError::Numerical(e.to_string()))?;
            println!("{text}");
        }
    }
    Ok(())
}
