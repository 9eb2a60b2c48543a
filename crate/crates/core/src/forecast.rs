//! Staged autoregressive forecasting of voxel temperatures.
//!
//! Given truth up to timestep `m` and the deposition schedule up to `m + H`,
//! the iterative forecaster runs `ceil(H / stage_interval)` stages. Each
//! stage fits a fresh model on every row known so far (truth for `t <= m`,
//! committed predictions after that) and then walks forward one timestep at
//! a time: rows for timestep `t` are built from the record at `t-1 .. t-5`,
//! predicted, and committed before moving to `t + 1`.
//!
//! The direct forecaster fits once on `t <= m` and predicts the whole
//! horizon in a single pass without feeding predictions back; temperature
//! features that would need timesteps after `m` are sentinels.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::ert::{Learner, Regressor, Samples, TrainConfig};
use crate::error::{Error, Result};
use crate::features::{fill_features, FeatureContext, FEATURE_COUNT, FEATURE_NAMES};
use crate::history::{TemperatureSource, ThermalHistory};
use crate::schedule::DepositionSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForecastMode {
    Iterative,
    Direct,
}

impl ForecastMode {
    pub fn name(self) -> &'static str {
        match self {
            ForecastMode::Iterative => "iterative",
            ForecastMode::Direct => "direct",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastConfig {
    /// Last timestep with ground truth (`m`).
    pub train_horizon: usize,
    /// Number of timesteps to predict (`H`).
    pub predict_horizon: usize,
    /// Timesteps per retraining stage.
    pub stage_interval: usize,
    pub learner: TrainConfig,
    pub mode: ForecastMode,
}

impl ForecastConfig {
    pub fn new(train_horizon: usize, predict_horizon: usize, learner: TrainConfig) -> Self {
        Self {
            train_horizon,
            predict_horizon,
            stage_interval: predict_horizon.clamp(1, 20),
            learner,
            mode: ForecastMode::Iterative,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_horizon == 0 {
            return Err(Error::InvalidConfig("train_horizon must be >= 1".into()));
        }
        if self.predict_horizon == 0 {
            return Err(Error::InvalidConfig("predict_horizon must be >= 1".into()));
        }
        let iterative = self.mode == ForecastMode::Iterative;
        if iterative && (self.stage_interval == 0 || self.stage_interval > self.predict_horizon) {
            return Err(Error::InvalidConfig(format!(
                "stage_interval must be in 1..={}, got {}",
                self.predict_horizon, self.stage_interval
            )));
        }
        Ok(())
    }

    pub fn stage_count(&self) -> usize {
        match self.mode {
            ForecastMode::Iterative => stage_count(self.predict_horizon, self.stage_interval),
            ForecastMode::Direct => 1,
        }
    }

    pub fn last_timestep(&self) -> usize {
        self.train_horizon + self.predict_horizon
    }
}

/// `ceil(horizon / interval)`.
pub fn stage_count(horizon: usize, interval: usize) -> usize {
    horizon.div_ceil(interval)
}

/// Source of elapsed seconds for stage timings.
pub trait Clock {
    fn seconds(&self) -> f64;
}

/// Clock that never advances; timings come out as zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub timestep: usize,
    pub voxel: usize,
    /// Kelvin.
    pub value: f64,
    pub stage: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageTiming {
    /// 1-based.
    pub stage: usize,
    pub first_timestep: usize,
    pub last_timestep: usize,
    pub train_rows: usize,
    pub rows_predicted: usize,
    pub train_seconds: f64,
    pub predict_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub mode: ForecastMode,
    pub train_horizon: usize,
    pub predict_horizon: usize,
    pub stage_interval: usize,
    /// Ordered by timestep, then voxel id.
    pub predictions: Vec<Prediction>,
    pub stages: Vec<StageTiming>,
}

impl ForecastResult {
    pub fn stage_of(&self, t: usize) -> Option<usize> {
        if t <= self.train_horizon || t > self.train_horizon + self.predict_horizon {
            return None;
        }
        Some(match self.mode {
            ForecastMode::Iterative => (t - self.train_horizon).div_ceil(self.stage_interval),
            ForecastMode::Direct => 1,
        })
    }

    pub fn get(&self, t: usize, voxel: usize) -> Option<f64> {
        self.predictions
            .binary_search_by(|p| (p.timestep, p.voxel).cmp(&(t, voxel)))
            .ok()
            .map(|i| self.predictions[i].value)
    }

    pub fn total_seconds(&self) -> f64 {
        self.stages
            .iter()
            .map(|s| s.train_seconds + s.predict_seconds)
            .sum()
    }
}

/// Per-stage timing table with totals.
#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub stages: Vec<StageTiming>,
    pub total_train_seconds: f64,
    pub total_predict_seconds: f64,
    pub total_rows_predicted: usize,
}

pub fn stage_report(result: &ForecastResult) -> StageReport {
    StageReport {
        stages: result.stages.clone(),
        total_train_seconds: result.stages.iter().map(|s| s.train_seconds).sum(),
        total_predict_seconds: result.stages.iter().map(|s| s.predict_seconds).sum(),
        total_rows_predicted: result.stages.iter().map(|s| s.rows_predicted).sum(),
    }
}

/// Temperatures known to the forecaster: truth up to `m`, then whatever has
/// been committed.
struct Record {
    n_voxels: usize,
    frames: Vec<f64>,
}

impl Record {
    fn set_frame(&mut self, t: usize, values: impl Iterator<Item = (usize, f64)>) {
        let needed = (t + 1) * self.n_voxels;
        if self.frames.len() < needed {
            self.frames.resize(needed, f64::NAN);
        }
        for (id, x) in values {
            self.frames[t * self.n_voxels + id] = x;
        }
    }
}

impl TemperatureSource for Record {
    #[inline]
    fn temperature(&self, t: usize, voxel: usize) -> Option<f64> {
        let x = *self.frames.get(t * self.n_voxels + voxel)?;
        (!x.is_nan()).then_some(x)
    }
}

/// Growing row-major training matrix.
struct Rows {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Rows {
    fn samples(&self) -> Result<Samples<'_>> {
        Samples::new(&self.x, &self.y, FEATURE_COUNT)?.with_names(&FEATURE_NAMES)
    }
}

fn active_ids(schedule: &DepositionSchedule, t: usize) -> Vec<usize> {
    schedule.active_at(t).collect()
}

/// Copy the truth for `t <= m` into a fresh record and build its rows.
/// This is the only place the forecasters read `truth`.
fn seed_from_truth(
    truth: &impl TemperatureSource,
    ctx: &FeatureContext,
    schedule: &DepositionSchedule,
    m: usize,
) -> Result<(Record, Rows)> {
    let n = ctx.grid.voxel_count();
    let mut record = Record {
        n_voxels: n,
        frames: Vec::new(),
    };
    for t in 0..=m {
        let mut frame = Vec::new();
        for id in schedule.active_at(t) {
            let x = truth
                .temperature(t, id)
                .ok_or(Error::InactiveTarget { voxel: id, timestep: t })?;
            frame.push((id, x));
        }
        record.set_frame(t, frame.into_iter());
    }
    let mut rows = Rows {
        x: Vec::new(),
        y: Vec::new(),
    };
    let mut buf = [0.0; FEATURE_COUNT];
    for t in 0..=m {
        for id in schedule.active_at(t) {
            fill_features(&record, ctx, schedule, id, t, &mut buf);
            rows.x.extend_from_slice(&buf);
            rows.y.push(record.temperature(t, id).expect("seeded above"));
        }
    }
    Ok((record, rows))
}

fn check_inputs(
    ctx: &FeatureContext,
    schedule: &DepositionSchedule,
    config: &ForecastConfig,
) -> Result<()> {
    config.validate()?;
    if schedule.grid() != &ctx.grid {
        return Err(Error::Inconsistent("schedule grid differs from history grid".into()));
    }
    let required = config.last_timestep();
    match schedule.final_step() {
        Some(end) if end >= required => Ok(()),
        end => Err(Error::ScheduleTooShort {
            required,
            available: end.unwrap_or(0),
        }),
    }
}

/// Forecast with an arbitrary learner. `config.learner` is ignored; `learner`
/// is fitted instead.
pub fn forecast_with<L: Learner>(
    truth: &impl TemperatureSource,
    ctx: &FeatureContext,
    schedule: &DepositionSchedule,
    config: &ForecastConfig,
    learner: &L,
    clock: &impl Clock,
) -> Result<ForecastResult> {
    check_inputs(ctx, schedule, config)?;
    let m = config.train_horizon;
    let end = config.last_timestep();
    let (mut record, mut rows) = seed_from_truth(truth, ctx, schedule, m)?;

    let mut predictions = Vec::new();
    let mut stages = Vec::new();
    let mut buf = [0.0; FEATURE_COUNT];

    match config.mode {
        ForecastMode::Iterative => {
            let n_stages = config.stage_count();
            for stage in 1..=n_stages {
                let first = m + (stage - 1) * config.stage_interval + 1;
                let last = (m + stage * config.stage_interval).min(end);

                let t0 = clock.seconds();
                let model = rows
                    .samples()
                    .and_then(|s| learner.fit(&s))
                    .map_err(|e| Error::Stage {
                        stage,
                        source: e.into(),
                    })?;
                let t1 = clock.seconds();
                let train_rows = rows.y.len();

                let mut predicted = 0;
                for t in first..=last {
                    let mut committed = Vec::new();
                    for id in active_ids(schedule, t) {
                        fill_features(&record, ctx, schedule, id, t, &mut buf);
                        let value = model.predict_row(&buf);
                        rows.x.extend_from_slice(&buf);
                        rows.y.push(value);
                        committed.push((id, value));
                        predictions.push(Prediction {
                            timestep: t,
                            voxel: id,
                            value,
                            stage,
                        });
                    }
                    predicted += committed.len();
                    record.set_frame(t, committed.into_iter());
                }
                stages.push(StageTiming {
                    stage,
                    first_timestep: first,
                    last_timestep: last,
                    train_rows,
                    rows_predicted: predicted,
                    train_seconds: t1 - t0,
                    predict_seconds: clock.seconds() - t1,
                });
            }
        }
        ForecastMode::Direct => {
            let t0 = clock.seconds();
            let model = rows
                .samples()
                .and_then(|s| learner.fit(&s))
                .map_err(|e| Error::Stage {
                    stage: 1,
                    source: e.into(),
                })?;
            let t1 = clock.seconds();
            // record stays at truth through m, so later lookups are sentinels
            for t in m + 1..=end {
                for id in active_ids(schedule, t) {
                    fill_features(&record, ctx, schedule, id, t, &mut buf);
                    predictions.push(Prediction {
                        timestep: t,
                        voxel: id,
                        value: model.predict_row(&buf),
                        stage: 1,
                    });
                }
            }
            stages.push(StageTiming {
                stage: 1,
                first_timestep: m + 1,
                last_timestep: end,
                train_rows: rows.y.len(),
                rows_predicted: predictions.len(),
                train_seconds: t1 - t0,
                predict_seconds: clock.seconds() - t1,
            });
        }
    }

    Ok(ForecastResult {
        mode: config.mode,
        train_horizon: m,
        predict_horizon: config.predict_horizon,
        stage_interval: config.stage_interval,
        predictions,
        stages,
    })
}

/// Staged retrain-and-predict forecast with the configured forest.
pub fn iterative_forecast(
    history: &ThermalHistory,
    schedule: &DepositionSchedule,
    config: &ForecastConfig,
    clock: &impl Clock,
) -> Result<ForecastResult> {
    let config = ForecastConfig {
        mode: ForecastMode::Iterative,
        ..*config
    };
    forecast_with(
        history,
        &FeatureContext::of(history),
        schedule,
        &config,
        &config.learner,
        clock,
    )
}

/// Single fit on `t <= m`, single pass over the horizon.
pub fn direct_forecast(
    history: &ThermalHistory,
    schedule: &DepositionSchedule,
    config: &ForecastConfig,
    clock: &impl Clock,
) -> Result<ForecastResult> {
    let config = ForecastConfig {
        mode: ForecastMode::Direct,
        ..*config
    };
    forecast_with(
        history,
        &FeatureContext::of(history),
        schedule,
        &config,
        &config.learner,
        clock,
    )
}

/// Rows for every active voxel at `t` built from the same record the
/// forecaster would see; exposed for audits and tests.
pub fn horizon_rows(
    record: &impl TemperatureSource,
    ctx: &FeatureContext,
    schedule: &DepositionSchedule,
    t: usize,
) -> Vec<(usize, [f64; FEATURE_COUNT])> {
    let mut out = Vec::new();
    for id in schedule.active_at(t) {
        let mut buf = [0.0; FEATURE_COUNT];
        fill_features(record, ctx, schedule, id, t, &mut buf);
        out.push((id, buf));
    }
    out
}

#[doc(hidden)]
pub fn empty_frame(n: usize) -> Vec<f64> {
    vec![f64::NAN; n]
}
