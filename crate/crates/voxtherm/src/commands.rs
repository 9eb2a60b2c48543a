//! Subcommand implementations. Each takes the resolved [`RunConfig`] and
//! writes into its output location, echoing the config alongside.

use std::path::{Path, PathBuf};
use std::time::Instant;

use voxtherm_core::ert::{feature_importances, Forest, Learner, Regressor, Samples};
use voxtherm_core::features::{build_dataset, DatasetCategories, FEATURE_COUNT, FEATURE_NAMES};
use voxtherm_core::forecast::{forecast_with, stage_report, ForecastMode, ForecastResult};
use voxtherm_core::metrics::{evaluate, paired_values, EvalReport};
use voxtherm_core::schedule::{build_zigzag_schedule, schedule_row_count};
use voxtherm_core::simulator::run;
use voxtherm_core::ThermalHistory;

use crate::config::RunConfig;
use crate::dataset_io::{read_dataset, write_dataset, DataFormat};
use crate::error::{Error, Result};
use crate::history_io::{read_history, schedule_for, write_history};
use crate::model_io::{read_model, write_model, StoredModel};
use crate::report::{
    eval_report_text, export_scatter, importance_csv, read_predictions, stage_report_csv,
    write_eval_report, write_predictions,
};
use crate::WallClock;

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

pub struct SimulateOutcome {
    pub history_path: PathBuf,
    pub rows: usize,
    pub seconds: f64,
}

/// Simulate the configured build into `<out>/history.csv`.
pub fn simulate(config: &RunConfig) -> Result<SimulateOutcome> {
    config.sim_config().validate()?;
    let sim = config.sim_config();
    let schedule = build_zigzag_schedule(&sim.grid, &sim.laser)?;
    let start = Instant::now();
    let history = run(&sim, &schedule)?;
    let seconds = start.elapsed().as_secs_f64();
    let dir = &config.output.dir;
    config.echo_into(dir)?;
    let history_path = dir.join("history.csv");
    write_history(&history_path, &history, &sim)?;
    let rows = history.row_count();
    debug_assert!(sim.cooldown_steps > 0 || rows == schedule_row_count(&schedule));
    Ok(SimulateOutcome {
        history_path,
        rows,
        seconds,
    })
}

/// Build the feature dataset of a history file.
pub fn dataset(config: &RunConfig, history_path: &Path, out: &Path, format: DataFormat) -> Result<usize> {
    let (history, _) = read_history(history_path)?;
    let schedule = schedule_for(&history)?;
    let ds = build_dataset(&history, &schedule)?;
    let dir = parent_dir(out);
    config.echo_into(&dir)?;
    write_dataset(out, &ds, format)?;
    Ok(ds.len())
}

/// Fit the configured forest on dataset rows with `timestep <= train_horizon`.
pub fn train(config: &RunConfig, dataset_path: &Path, out: &Path) -> Result<StoredModel> {
    let ds = read_dataset(dataset_path)?;
    let m = config.forecast.train_horizon;
    let (x, y) = ds.matrix_where(|r| r.timestep <= m);
    let samples = Samples::new(&x, &y, FEATURE_COUNT)?.with_names(&FEATURE_NAMES)?;
    let forest = Forest::fit(&samples, &config.train_config())?;
    let model = StoredModel {
        forest,
        train_horizon: Some(m),
    };
    config.echo_into(&parent_dir(out))?;
    write_model(out, &model)?;
    Ok(model)
}

/// Learner that hands out an already fitted forest.
struct Prefitted(Forest);

impl Learner for Prefitted {
    type Model = Forest;

    fn fit(&self, samples: &Samples<'_>) -> voxtherm_core::Result<Forest> {
        if samples.n_features() != self.0.n_features() {
            return Err(voxtherm_core::Error::DimensionMismatch {
                expected: self.0.n_features(),
                found: samples.n_features(),
            });
        }
        Ok(self.0.clone())
    }
}

pub struct ForecastOutcome {
    pub result: ForecastResult,
    pub report: EvalReport,
}

/// Forecast from a history file and score against the same file's truth.
/// With `model`, direct mode uses the stored forest instead of fitting one.
pub fn forecast(config: &RunConfig, history_path: &Path, model: Option<&Path>) -> Result<ForecastOutcome> {
    let (history, _) = read_history(history_path)?;
    let schedule = schedule_for(&history)?;
    let cfg = config.forecast_config();
    let ctx = voxtherm_core::features::FeatureContext::of(&history);
    let clock = WallClock::start();
    let result = match model {
        None => forecast_with(&history, &ctx, &schedule, &cfg, &cfg.learner, &clock)?,
        Some(path) => {
            if cfg.mode != ForecastMode::Direct {
                return Err(Error::Usage(
                    "--model only applies to direct mode; iterative forecasts retrain every stage"
                        .into(),
                ));
            }
            let stored = read_model(path)?;
            if stored.train_horizon != Some(cfg.train_horizon) {
                return Err(Error::Usage(format!(
                    "model was trained through timestep {:?}, forecast starts after {}",
                    stored.train_horizon, cfg.train_horizon
                )));
            }
            forecast_with(&history, &ctx, &schedule, &cfg, &Prefitted(stored.forest), &clock)?
        }
    };
    let report = evaluate(&result, &history, &schedule)?;
    let dir = &config.output.dir;
    config.echo_into(dir)?;
    write_predictions(&dir.join("predictions.csv"), &result, history.grid(), Some(&history))?;
    write_text(&dir.join("stages.csv"), &stage_report_csv(&stage_report(&result)))?;
    write_eval_report(dir, &report)?;
    Ok(ForecastOutcome { result, report })
}

/// Score a predictions file against a truth history. Categories come from
/// `dataset` when given, otherwise from the deposition schedule.
pub fn evaluate_predictions(
    config: &RunConfig,
    predictions: &Path,
    history_path: &Path,
    dataset_path: Option<&Path>,
) -> Result<EvalReport> {
    let (history, _) = read_history(history_path)?;
    let result = read_predictions(predictions, history.grid())?;
    let report = match dataset_path {
        Some(p) => {
            let ds = read_dataset(p)?;
            evaluate(&result, &history, &DatasetCategories::new(&ds, *history.grid()))?
        }
        None => evaluate(&result, &history, &schedule_for(&history)?)?,
    };
    let dir = &config.output.dir;
    config.echo_into(dir)?;
    write_eval_report(dir, &report)?;
    let (ys, ps) = paired_values(&result, &history)?;
    let pairs: Vec<(f64, f64)> = ys.into_iter().zip(ps).collect();
    export_scatter(&dir.join("scatter.csv"), &pairs)?;
    Ok(report)
}

/// Importances of a stored model, or of forests fitted on dataset rows
/// `timestep <= train_horizon` for `n_seeds` derived seeds and averaged.
pub fn importance_export(
    config: &RunConfig,
    source: ImportanceSource<'_>,
    out: &Path,
) -> Result<Vec<(String, f64)>> {
    let ranked = match source {
        ImportanceSource::Model(path) => feature_importances(&read_model(path)?.forest),
        ImportanceSource::Dataset { path, n_seeds } => {
            let ds = read_dataset(path)?;
            let m = config.forecast.train_horizon;
            let (x, y) = ds.matrix_where(|r| r.timestep <= m);
            let seeds = crate::bench::learner_seeds(config, n_seeds.max(1));
            crate::bench::mean_importances(&x, &y, &config.train_config(), &seeds)?
        }
    };
    config.echo_into(&parent_dir(out))?;
    write_text(out, &importance_csv(&ranked))?;
    Ok(ranked)
}

pub enum ImportanceSource<'a> {
    Model(&'a Path),
    Dataset { path: &'a Path, n_seeds: usize },
}

/// Run a named bench protocol and write `<out>/<name>.csv`.
pub fn bench(config: &RunConfig, name: &str, n_seeds: usize) -> Result<crate::bench::Table> {
    let protocol = crate::bench::Protocol::from_name(name).ok_or_else(|| {
        Error::Usage(format!(
            "unknown protocol {name:?}; valid: {}",
            crate::bench::Protocol::NAMES.join(", ")
        ))
    })?;
    let table = crate::bench::run_protocol(protocol, config, n_seeds)?;
    let dir = &config.output.dir;
    config.echo_into(dir)?;
    write_text(&dir.join(format!("{name}.csv")), &table.to_csv())?;
    Ok(table)
}

/// Human-readable one-liner for a report.
pub fn summary_line(report: &EvalReport) -> String {
    format!(
        "rows {} r2 {:.4} mape {:.3}% nmae {:.3}% time {:.2}s",
        report.n_rows, report.r2, report.mape_percent, report.nmae_percent, report.runtime_seconds
    )
}

#[doc(hidden)]
pub fn report_text(report: &EvalReport) -> String {
    eval_report_text(report)
}

#[doc(hidden)]
pub fn history_rows(history: &ThermalHistory) -> usize {
    history.row_count()
}
