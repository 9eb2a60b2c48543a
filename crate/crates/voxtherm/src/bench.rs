//! Canned desk-scale experiments. Each protocol returns a [`Table`]; the
//! building blocks are public so tests can assert on the numbers directly.

use std::time::Instant;

use voxtherm_core::ert::{
    BaselineModel, Forest, Learner, Regressor, Samples, TrainConfig,
};
use voxtherm_core::features::{FeatureContext, FEATURE_COUNT, FEATURE_NAMES};
use voxtherm_core::forecast::{forecast_with, horizon_rows, ForecastConfig, ForecastMode};
use voxtherm_core::metrics::{evaluate, mape_percent, normalized_mae_percent, r_squared, EvalReport};
use voxtherm_core::schedule::build_zigzag_schedule;
use voxtherm_core::simulator::run;
use voxtherm_core::{DepositionSchedule, TemperatureSource, ThermalHistory};

use crate::config::{substream, RunConfig};
use crate::error::Result;
use crate::WallClock;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Table1,
    Table2,
    Table3,
    Table4,
    Table5,
    Importance,
}

impl Protocol {
    pub const NAMES: [&'static str; 6] = ["table1", "table2", "table3", "table4", "table5", "importance"];
    const ALL: [Protocol; 6] = [
        Protocol::Table1,
        Protocol::Table2,
        Protocol::Table3,
        Protocol::Table4,
        Protocol::Table5,
        Protocol::Importance,
    ];

    pub fn from_name(name: &str) -> Option<Self> {
        Self::NAMES.iter().position(|n| *n == name).map(|i| Self::ALL[i])
    }
}

/// Baseline comparison window: train on the first 200 timesteps, predict
/// the next 300.
pub const TABLE1_WINDOW: (usize, usize) = (200, 300);
/// Horizons compared in the iterative-versus-direct table.
pub const TABLE3_HORIZONS: [usize; 2] = [200, 400];
/// Tree counts of the estimator sweep.
pub const TABLE5_TREES: [usize; 4] = [4, 10, 20, 50];
/// `m + H` held fixed across the train-size table. The desk build ends at
/// timestep 878.
pub const TABLE2_TOTAL: usize = 800;
pub const TABLE2_TRAIN: [usize; 4] = [200, 300, 400, 500];

/// Simple string table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> String {
        crate::report::csv_text(std::iter::once(&self.header).chain(&self.rows))
    }
}

/// A simulated build and its schedule.
pub struct Build {
    pub history: ThermalHistory,
    pub schedule: DepositionSchedule,
}

pub fn simulate_build(config: &RunConfig) -> Result<Build> {
    let sim = config.sim_config();
    sim.validate()?;
    let schedule = build_zigzag_schedule(&sim.grid, &sim.laser)?;
    let history = run(&sim, &schedule)?;
    Ok(Build { history, schedule })
}

/// Learner seeds for `n` repetitions, drawn from the run seed.
pub fn learner_seeds(config: &RunConfig, n: usize) -> Vec<u64> {
    (0..n)
        .map(|i| substream(config.seed, &format!("learner/{i}")))
        .collect()
}

/// Feature matrix and targets for every active voxel with `from <= t <= to`,
/// built from the true history.
pub fn truth_rows(build: &Build, from: usize, to: usize) -> (Vec<f64>, Vec<f64>) {
    let ctx = FeatureContext::of(&build.history);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for t in from..=to {
        for (id, row) in horizon_rows(&build.history, &ctx, &build.schedule, t) {
            if let Some(target) = build.history.temperature(t, id) {
                x.extend_from_slice(&row);
                y.push(target);
            }
        }
    }
    (x, y)
}

fn samples<'a>(x: &'a [f64], y: &'a [f64]) -> Result<Samples<'a>> {
    Ok(Samples::new(x, y, FEATURE_COUNT)?.with_names(&FEATURE_NAMES)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub r2: f64,
    pub mape_percent: f64,
    pub nmae_percent: f64,
    pub fit_seconds: f64,
}

impl Score {
    fn of(truth: &[f64], pred: &[f64], fit_seconds: f64) -> Result<Self> {
        Ok(Self {
            r2: r_squared(truth, pred)?,
            mape_percent: mape_percent(truth, pred)?,
            nmae_percent: normalized_mae_percent(truth, pred)?,
            fit_seconds,
        })
    }

    fn mean(scores: &[Score]) -> Score {
        let n = scores.len() as f64;
        let avg = |f: fn(&Score) -> f64| scores.iter().map(f).sum::<f64>() / n;
        Score {
            r2: avg(|s| s.r2),
            mape_percent: avg(|s| s.mape_percent),
            nmae_percent: avg(|s| s.nmae_percent),
            fit_seconds: avg(|s| s.fit_seconds),
        }
    }
}

/// Held-out test split: fit on true rows `t <= m`, score one-step
/// predictions on true rows `m < t <= m + h`.
pub struct TestSplit {
    train_x: Vec<f64>,
    train_y: Vec<f64>,
    test_x: Vec<f64>,
    test_y: Vec<f64>,
}

impl TestSplit {
    pub fn new(build: &Build, m: usize, h: usize) -> Self {
        let (train_x, train_y) = truth_rows(build, 0, m);
        let (test_x, test_y) = truth_rows(build, m + 1, m + h);
        Self {
            train_x,
            train_y,
            test_x,
            test_y,
        }
    }

    pub fn train_rows(&self) -> usize {
        self.train_y.len()
    }

    pub fn score<L: Learner>(&self, learner: &L) -> Result<Score> {
        let s = samples(&self.train_x, &self.train_y)?;
        let start = Instant::now();
        let model = learner.fit(&s)?;
        let fit_seconds = start.elapsed().as_secs_f64();
        let pred: Vec<f64> = self
            .test_x
            .chunks_exact(FEATURE_COUNT)
            .map(|row| model.predict_row(row))
            .collect();
        Score::of(&self.test_y, &pred, fit_seconds)
    }
}

/// One staged forecast scored over its horizon.
pub fn forecast_score<L: Learner>(
    build: &Build,
    config: &ForecastConfig,
    learner: &L,
) -> Result<EvalReport> {
    let ctx = FeatureContext::of(&build.history);
    let clock = WallClock::start();
    let result = forecast_with(&build.history, &ctx, &build.schedule, config, learner, &clock)?;
    Ok(evaluate(&result, &build.history, &build.schedule)?)
}

/// Importances of forests fitted once per seed, averaged and ranked.
pub fn mean_importances(
    x: &[f64],
    y: &[f64],
    base: &TrainConfig,
    seeds: &[u64],
) -> Result<Vec<(String, f64)>> {
    let s = samples(x, y)?;
    let mut total = [0.0; FEATURE_COUNT];
    for &seed in seeds {
        let forest = Forest::fit(&s, &TrainConfig { seed, ..*base })?;
        for (t, v) in total.iter_mut().zip(forest.importances()) {
            *t += v / seeds.len() as f64;
        }
    }
    let mut ranked: Vec<(String, f64)> = FEATURE_NAMES
        .iter()
        .zip(total)
        .map(|(n, v)| (n.to_string(), v))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(ranked)
}

/// Ridge and lasso penalties tried for the linear rows; the best-scoring
/// one is reported.
pub const LINEAR_PENALTIES: [f64; 3] = [0.01, 0.1, 1.0];

/// Baseline learners of the algorithm comparison, in table order.
pub fn baseline_learners(ert: &TrainConfig) -> Vec<(&'static str, Vec<BaselineModel>)> {
    let rf = TrainConfig::random_forest(ert.n_trees, FEATURE_COUNT, ert.seed);
    let mut single = TrainConfig::single_tree();
    single.seed = ert.seed;
    vec![
        ("random_forest", vec![BaselineModel::RandomForest(rf)]),
        ("decision_tree", vec![BaselineModel::SingleDecisionTree(single)]),
        ("linear_regression", vec![BaselineModel::OrdinaryLeastSquares]),
        (
            "ridge_regression",
            LINEAR_PENALTIES.iter().map(|&l| BaselineModel::Ridge(l)).collect(),
        ),
        (
            "lasso_regression",
            LINEAR_PENALTIES.iter().map(|&l| BaselineModel::Lasso(l)).collect(),
        ),
    ]
}

fn f(x: f64) -> String {
    format!("{x:.6}")
}

fn table1(config: &RunConfig, build: &Build, seeds: &[u64]) -> Result<Table> {
    let (m, h) = TABLE1_WINDOW;
    let split = TestSplit::new(build, m, h);
    let mut t = Table::new(&["algorithm", "train_seconds", "r2", "mape_percent", "nmae_percent"]);
    let mut rows: Vec<(&str, Vec<Score>)> = Vec::new();
    let mut ert_scores = Vec::new();
    let mut per_seed: Vec<Vec<(&str, Score)>> = Vec::new();
    for &seed in seeds {
        let ert = TrainConfig {
            seed,
            ..config.train_config()
        };
        ert_scores.push(split.score(&ert)?);
        let mut this = Vec::new();
        for (label, variants) in baseline_learners(&ert) {
            let mut best: Option<Score> = None;
            for model in &variants {
                let s = split.score(model)?;
                if best.is_none_or(|b| s.mape_percent < b.mape_percent) {
                    best = Some(s);
                }
            }
            this.push((label, best.expect("at least one variant")));
        }
        per_seed.push(this);
    }
    rows.push(("extremely_randomized_trees", ert_scores));
    for i in 0..per_seed[0].len() {
        rows.push((per_seed[0][i].0, per_seed.iter().map(|r| r[i].1).collect()));
    }
    for (label, scores) in rows {
        let s = Score::mean(&scores);
        t.push(vec![
            label.to_string(),
            f(s.fit_seconds),
            f(s.r2),
            f(s.mape_percent),
            f(s.nmae_percent),
        ]);
    }
    Ok(t)
}

fn forecast_row(
    t: &mut Table,
    build: &Build,
    config: &ForecastConfig,
    seeds: &[u64],
    lead: Vec<String>,
) -> Result<()> {
    let (mut secs, mut r2, mut mape, mut nmae) = (0.0, 0.0, 0.0, 0.0);
    let n = seeds.len() as f64;
    for &seed in seeds {
        let learner = TrainConfig {
            seed,
            ..config.learner
        };
        let r = forecast_score(build, config, &learner)?;
        secs += r.runtime_seconds / n;
        r2 += r.r2 / n;
        mape += r.mape_percent / n;
        nmae += r.nmae_percent / n;
    }
    let mut row = lead;
    row.extend([f(secs), f(r2), f(mape), f(nmae)]);
    t.push(row);
    Ok(())
}

fn table2(config: &RunConfig, build: &Build, seeds: &[u64]) -> Result<Table> {
    let mut t = Table::new(&[
        "train_horizon",
        "predict_horizon",
        "seconds",
        "r2",
        "mape_percent",
        "nmae_percent",
    ]);
    for m in TABLE2_TRAIN {
        let mut fc = config.forecast_config();
        fc.mode = ForecastMode::Iterative;
        fc.train_horizon = m;
        fc.predict_horizon = TABLE2_TOTAL - m;
        forecast_row(&mut t, build, &fc, seeds, vec![m.to_string(), (TABLE2_TOTAL - m).to_string()])?;
    }
    Ok(t)
}

fn table3(config: &RunConfig, build: &Build, seeds: &[u64]) -> Result<Table> {
    let mut t = Table::new(&[
        "mode",
        "train_horizon",
        "predict_horizon",
        "stages",
        "seconds",
        "r2",
        "mape_percent",
        "nmae_percent",
    ]);
    for h in TABLE3_HORIZONS {
        for mode in [ForecastMode::Iterative, ForecastMode::Direct] {
            let mut fc = config.forecast_config();
            fc.mode = mode;
            fc.predict_horizon = h;
            let stages = match mode {
                ForecastMode::Iterative => fc.stage_count(),
                ForecastMode::Direct => 1,
            };
            let lead = vec![
                mode.name().to_string(),
                fc.train_horizon.to_string(),
                h.to_string(),
                stages.to_string(),
            ];
            forecast_row(&mut t, build, &fc, seeds, lead)?;
        }
    }
    Ok(t)
}

fn table4(config: &RunConfig, build: &Build) -> Result<Table> {
    let fc = config.forecast_config();
    let report = forecast_score(build, &fc, &fc.learner)?;
    let mut t = Table::new(&["category", "n_rows", "share_percent", "r2", "mape_percent"]);
    let opt = |x: Option<f64>| x.map(f).unwrap_or_default();
    t.push(vec![
        "overall".into(),
        report.n_rows.to_string(),
        f(100.0),
        f(report.r2),
        f(report.mape_percent),
    ]);
    for c in &report.per_category {
        t.push(vec![
            c.category.name().into(),
            c.n_rows.to_string(),
            f(c.share_percent),
            opt(c.r2),
            opt(c.mape_percent),
        ]);
    }
    Ok(t)
}

/// Mean held-out score per tree count, in [`TABLE5_TREES`] order.
pub fn tree_sweep(split: &TestSplit, base: &TrainConfig, seeds: &[u64]) -> Result<Vec<(usize, Score)>> {
    TABLE5_TREES
        .iter()
        .map(|&n_trees| {
            let scores = seeds
                .iter()
                .map(|&seed| {
                    split.score(&TrainConfig {
                        n_trees,
                        seed,
                        ..*base
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((n_trees, Score::mean(&scores)))
        })
        .collect()
}

fn table5(config: &RunConfig, build: &Build, seeds: &[u64]) -> Result<Table> {
    let fc = config.forecast_config();
    let split = TestSplit::new(build, fc.train_horizon, fc.predict_horizon);
    let mut t = Table::new(&["n_trees", "train_seconds", "r2", "mape_percent", "nmae_percent"]);
    for (n, s) in tree_sweep(&split, &config.train_config(), seeds)? {
        t.push(vec![
            n.to_string(),
            f(s.fit_seconds),
            f(s.r2),
            f(s.mape_percent),
            f(s.nmae_percent),
        ]);
    }
    Ok(t)
}

/// Importances of forests fitted on every row of the completed build.
fn importance(config: &RunConfig, build: &Build, seeds: &[u64]) -> Result<Table> {
    let (x, y) = truth_rows(build, 0, build.history.n_steps() - 1);
    let ranked = mean_importances(&x, &y, &config.train_config(), seeds)?;
    let mut t = Table::new(&["rank", "feature", "importance"]);
    for (i, (name, v)) in ranked.into_iter().enumerate() {
        t.push(vec![(i + 1).to_string(), name, f(v)]);
    }
    Ok(t)
}

/// Simulate the configured build and run `protocol` with `n_seeds`
/// learner seeds.
pub fn run_protocol(protocol: Protocol, config: &RunConfig, n_seeds: usize) -> Result<Table> {
    config.validate()?;
    let build = simulate_build(config)?;
    let seeds = learner_seeds(config, n_seeds.max(1));
    match protocol {
        Protocol::Table1 => table1(config, &build, &seeds),
        Protocol::Table2 => table2(config, &build, &seeds),
        Protocol::Table3 => table3(config, &build, &seeds),
        Protocol::Table4 => table4(config, &build),
        Protocol::Table5 => table5(config, &build, &seeds),
        Protocol::Importance => importance(config, &build, &seeds),
    }
}
