//! Accuracy metrics over forecast horizons, overall and per voxel category.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::features::{CategorySource, VoxelCategory};
use crate::forecast::ForecastResult;
use crate::history::TemperatureSource;

fn check_pair(truth: &[f64], pred: &[f64]) -> Result<()> {
    if truth.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

/// Coefficient of determination. Undefined when the truth is constant.
pub fn r_squared(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_pair(truth, pred)?;
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedMetric("r2 of constant truth"));
    }
    let ss_res: f64 = truth
        .iter()
        .zip(pred)
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Mean absolute percentage error, in percent.
pub fn mape_percent(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_pair(truth, pred)?;
    if truth.contains(&0.0) {
        return Err(Error::UndefinedMetric("mape with zero truth"));
    }
    let s: f64 = truth.iter().zip(pred).map(|(y, p)| ((y - p) / y).abs()).sum();
    Ok(100.0 * s / truth.len() as f64)
}

/// Mean absolute error divided by the mean truth, in percent.
pub fn normalized_mae_percent(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_pair(truth, pred)?;
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    if mean == 0.0 {
        return Err(Error::UndefinedMetric("nmae with zero mean truth"));
    }
    let mae: f64 = truth.iter().zip(pred).map(|(y, p)| (y - p).abs()).sum::<f64>()
        / truth.len() as f64;
    Ok(100.0 * mae / mean.abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CategoryStats {
    pub category: VoxelCategory,
    pub n_rows: usize,
    /// Share of horizon rows, in percent.
    pub share_percent: f64,
    /// `None` when the category is empty or its truth is constant.
    pub r2: Option<f64>,
    /// `None` when the category is empty.
    pub mape_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub r2: f64,
    pub mape_percent: f64,
    pub nmae_percent: f64,
    pub n_rows: usize,
    /// One entry per category, in [`VoxelCategory::ALL`] order.
    pub per_category: Vec<CategoryStats>,
    pub runtime_seconds: f64,
}

impl EvalReport {
    pub fn category(&self, c: VoxelCategory) -> &CategoryStats {
        &self.per_category[c.code() as usize]
    }
}

/// `(truth, predicted)` for every forecast row, in forecast order.
pub fn paired_values(
    result: &ForecastResult,
    truth: &impl TemperatureSource,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut ys = Vec::with_capacity(result.predictions.len());
    let mut ps = Vec::with_capacity(result.predictions.len());
    for p in &result.predictions {
        let y = truth.temperature(p.timestep, p.voxel).ok_or(Error::InactiveTarget {
            voxel: p.voxel,
            timestep: p.timestep,
        })?;
        ys.push(y);
        ps.push(p.value);
    }
    Ok((ys, ps))
}

/// Score a forecast against truth over its whole horizon. Rows are binned
/// by the category they had at their own timestep.
pub fn evaluate(
    result: &ForecastResult,
    truth: &impl TemperatureSource,
    categories: &impl CategorySource,
) -> Result<EvalReport> {
    let (ys, ps) = paired_values(result, truth)?;
    let mut bins: [(Vec<f64>, Vec<f64>); 5] = Default::default();
    for (p, (&y, &v)) in result.predictions.iter().zip(ys.iter().zip(&ps)) {
        let c = categories
            .category(p.timestep, p.voxel)
            .ok_or(Error::InactiveTarget {
                voxel: p.voxel,
                timestep: p.timestep,
            })?;
        let bin = &mut bins[c.code() as usize];
        bin.0.push(y);
        bin.1.push(v);
    }
    let n = ys.len();
    let per_category = VoxelCategory::ALL
        .iter()
        .zip(&bins)
        .map(|(&category, (by, bp))| CategoryStats {
            category,
            n_rows: by.len(),
            share_percent: 100.0 * by.len() as f64 / n.max(1) as f64,
            r2: r_squared(by, bp).ok(),
            mape_percent: mape_percent(by, bp).ok(),
        })
        .collect();
    Ok(EvalReport {
        r2: r_squared(&ys, &ps)?,
        mape_percent: mape_percent(&ys, &ps)?,
        nmae_percent: normalized_mae_percent(&ys, &ps)?,
        n_rows: n,
        per_category,
        runtime_seconds: result.total_seconds(),
    })
}
