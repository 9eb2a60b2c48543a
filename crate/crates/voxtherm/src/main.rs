use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use voxtherm::commands::{self, ImportanceSource};
use voxtherm::config::{ModeName, RunConfig, SplitRuleName};
use voxtherm::dataset_io::DataFormat;
use voxtherm::{Error, Result};

#[derive(Parser)]
#[command(name = "voxtherm", version, about = "Voxel thermal history simulation and forecasting")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. Each override replaces the matching
/// key of the config file.
#[derive(Args)]
struct Common {
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    nx: Option<usize>,
    #[arg(long, global = true)]
    ny: Option<usize>,
    #[arg(long, global = true)]
    nz: Option<usize>,
    #[arg(long, global = true)]
    edge_length: Option<f64>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    substeps: Option<usize>,
    #[arg(long, global = true)]
    cooldown_steps: Option<usize>,
    #[arg(long, global = true)]
    deposition_temperature: Option<f64>,
    #[arg(long, global = true)]
    voxels_per_step: Option<usize>,

    #[arg(long, global = true)]
    n_trees: Option<usize>,
    #[arg(long, global = true)]
    k_features: Option<usize>,
    #[arg(long, global = true)]
    min_samples_leaf: Option<usize>,
    #[arg(long, global = true)]
    max_depth: Option<usize>,
    #[arg(long, global = true)]
    bootstrap: Option<bool>,
    #[arg(long, global = true, value_enum)]
    split_rule: Option<SplitRuleName>,

    /// Training horizon m
    #[arg(long, short = 'm', global = true)]
    train_horizon: Option<usize>,
    /// Prediction horizon H
    #[arg(long = "horizon", global = true)]
    predict_horizon: Option<usize>,
    /// Timesteps per retraining stage
    #[arg(long, global = true)]
    interval: Option<usize>,
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeName>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the finite-difference simulator and write history.csv
    Simulate,
    /// Build the feature dataset of a history file
    Dataset {
        history: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: DataFormat,
    },
    /// Fit a forest on dataset rows up to the training horizon
    Train {
        dataset: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Forecast beyond the training horizon of a history and score it
    Forecast {
        history: PathBuf,
        /// Stored model for direct mode
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Score a predictions file against a history
    Evaluate {
        predictions: PathBuf,
        history: PathBuf,
        /// Dataset whose categories label the rows
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Run a canned experiment: table1..table5 or importance
    Bench {
        protocol: String,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
    },
    /// Write ranked feature importances
    ImportanceExport {
        /// Stored model file
        #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
        model: Option<PathBuf>,
        /// Dataset to fit fresh forests on
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

fn resolve(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($flag:expr => $field:expr) => {
            if let Some(v) = $flag.clone() {
                $field = v;
            }
        };
    }
    set!(c.seed => cfg.seed);
    set!(c.out => cfg.output.dir);
    set!(c.nx => cfg.grid.nx);
    set!(c.ny => cfg.grid.ny);
    set!(c.nz => cfg.grid.nz);
    set!(c.edge_length => cfg.grid.edge_length);
    set!(c.dt => cfg.simulation.dt);
    set!(c.substeps => cfg.simulation.substeps_per_deposition);
    set!(c.cooldown_steps => cfg.simulation.cooldown_steps);
    set!(c.deposition_temperature => cfg.laser.deposition_temperature);
    set!(c.voxels_per_step => cfg.laser.voxels_per_step_lateral);
    set!(c.n_trees => cfg.learner.n_trees);
    set!(c.k_features => cfg.learner.k_candidate_features);
    set!(c.min_samples_leaf => cfg.learner.min_samples_leaf);
    set!(c.bootstrap => cfg.learner.bootstrap);
    set!(c.split_rule => cfg.learner.split_rule);
    set!(c.train_horizon => cfg.forecast.train_horizon);
    set!(c.predict_horizon => cfg.forecast.predict_horizon);
    set!(c.interval => cfg.forecast.stage_interval);
    set!(c.mode => cfg.forecast.mode);
    if c.max_depth.is_some() {
        cfg.learner.max_depth = c.max_depth;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = resolve(&cli.common)?;
    cfg.validate()?;
    let dir = cfg.output.dir.clone();
    match cli.command {
        Command::Simulate => {
            let out = commands::simulate(&cfg)?;
            println!(
                "wrote {} ({} rows) in {:.3}s",
                out.history_path.display(),
                out.rows,
                out.seconds
            );
        }
        Command::Dataset {
            history,
            output,
            format,
        } => {
            let ext = match format {
                DataFormat::Text => "csv",
                DataFormat::Binary => "vxds",
            };
            let out = output.unwrap_or_else(|| dir.join(format!("dataset.{ext}")));
            let n = commands::dataset(&cfg, &history, &out, format)?;
            println!("wrote {} ({n} rows)", out.display());
        }
        Command::Train { dataset, output } => {
            let out = output.unwrap_or_else(|| dir.join("model.vxm"));
            let model = commands::train(&cfg, &dataset, &out)?;
            println!(
                "wrote {} ({} trees, trained through timestep {})",
                out.display(),
                model.forest.trees().len(),
                cfg.forecast.train_horizon
            );
        }
        Command::Forecast { history, model } => {
            let out = commands::forecast(&cfg, &history, model.as_deref())?;
            println!(
                "{} forecast, {} predictions: {}",
                out.result.mode.name(),
                out.result.predictions.len(),
                commands::summary_line(&out.report)
            );
        }
        Command::Evaluate {
            predictions,
            history,
            dataset,
        } => {
            let report = commands::evaluate_predictions(&cfg, &predictions, &history, dataset.as_deref())?;
            println!("{}", commands::summary_line(&report));
        }
        Command::Bench { protocol, seeds } => {
            let table = commands::bench(&cfg, &protocol, seeds)?;
            print!("{}", table.to_csv());
        }
        Command::ImportanceExport {
            model,
            dataset,
            seeds,
            output,
        } => {
            let out = output.unwrap_or_else(|| dir.join("importance.csv"));
            let source = match (&model, &dataset) {
                (Some(m), _) => ImportanceSource::Model(m),
                (None, Some(d)) => ImportanceSource::Dataset {
                    path: d,
                    n_seeds: seeds,
                },
                (None, None) => return Err(Error::Usage("--model or --dataset is required".into())),
            };
            let ranked = commands::importance_export(&cfg, source, &out)?;
            for (name, v) in ranked.iter().take(10) {
                println!("{name:<24} {v:.4}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
