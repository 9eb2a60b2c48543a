//! Forecast, evaluation, scatter and importance exports.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use voxtherm_core::forecast::{ForecastMode, ForecastResult, Prediction, StageReport};
use voxtherm_core::metrics::EvalReport;
use voxtherm_core::{GridSpec, TemperatureSource, VoxelIndex};

use crate::error::{Error, Result};
use crate::history_io::csv_error;

pub const PREDICTION_HEADER: [&str; 7] =
    ["timestep", "ix", "iy", "iz", "predicted_K", "truth_K", "stage"];

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, w: impl FnOnce() -> std::io::Result<()>) -> Result<()> {
    w().map_err(|e| Error::io(path, e))
}

/// Predictions as CSV. `truth_K` is left empty when `truth` has no value.
/// A leading `#` line records the forecast settings so the file can be
/// read back into a [`ForecastResult`].
pub fn write_predictions(
    path: &Path,
    result: &ForecastResult,
    grid: &GridSpec,
    truth: Option<&dyn TemperatureSource>,
) -> Result<()> {
    let mut w = create(path)?;
    finish(path, || {
        writeln!(
            w,
            "# mode={} train_horizon={} predict_horizon={} stage_interval={}",
            result.mode.name(),
            result.train_horizon,
            result.predict_horizon,
            result.stage_interval
        )?;
        writeln!(w, "{}", PREDICTION_HEADER.join(","))?;
        for p in &result.predictions {
            let v = grid.voxel(p.voxel);
            let y = truth
                .and_then(|s| s.temperature(p.timestep, p.voxel))
                .map(|y| y.to_string())
                .unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{y},{}",
                p.timestep, v.ix, v.iy, v.iz, p.value, p.stage
            )?;
        }
        w.flush()
    })
}

/// Read a predictions file written by [`write_predictions`]. Stage timings
/// are not stored and come back empty.
pub fn read_predictions(path: &Path, grid: &GridSpec) -> Result<ForecastResult> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut first = String::new();
    r.read_line(&mut first).map_err(|e| Error::io(path, e))?;
    let settings = first
        .strip_prefix('#')
        .ok_or_else(|| Error::format(path, "missing settings line"))?;
    let mut mode = None;
    let (mut m, mut h, mut d) = (None, None, None);
    for kv in settings.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::format(path, format!("bad setting {kv:?}")))?;
        let num = || {
            v.parse::<usize>()
                .map_err(|_| Error::format(path, format!("bad setting {kv:?}")))
        };
        match k {
            "mode" => {
                mode = Some(match v {
                    "iterative" => ForecastMode::Iterative,
                    "direct" => ForecastMode::Direct,
                    _ => return Err(Error::format(path, format!("unknown mode {v:?}"))),
                })
            }
            "train_horizon" => m = Some(num()?),
            "predict_horizon" => h = Some(num()?),
            "stage_interval" => d = Some(num()?),
            _ => return Err(Error::format(path, format!("unknown setting {k:?}"))),
        }
    }
    let (Some(mode), Some(m), Some(h), Some(d)) = (mode, m, h, d) else {
        return Err(Error::format(path, "incomplete settings line"));
    };

    let mut reader = csv::Reader::from_reader(r);
    let header = reader.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(PREDICTION_HEADER) {
        return Err(Error::format(path, format!("unexpected header {header:?}")));
    }
    let mut predictions = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let bad = |what: &str| Error::format(path, format!("row {}: {what}", line + 1));
        if record.len() != PREDICTION_HEADER.len() {
            return Err(bad("wrong field count"));
        }
        let int = |i: usize| record[i].parse::<usize>().map_err(|_| bad("bad integer"));
        let v = VoxelIndex::new(int(1)?, int(2)?, int(3)?);
        if !grid.contains(v) {
            return Err(bad("voxel outside grid"));
        }
        predictions.push(Prediction {
            timestep: int(0)?,
            voxel: grid.id(v),
            value: record[4].parse().map_err(|_| bad("bad prediction"))?,
            stage: int(6)?,
        });
    }
    Ok(ForecastResult {
        mode,
        train_horizon: m,
        predict_horizon: h,
        stage_interval: d,
        predictions,
        stages: Vec::new(),
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Key-value report, one `key = value` per line (valid TOML).
pub fn eval_report_text(report: &EvalReport) -> String {
    let mut s = format!(
        "r2 = {}\nmape_percent = {}\nnmae_percent = {}\nn_rows = {}\nruntime_seconds = {}\n",
        report.r2, report.mape_percent, report.nmae_percent, report.n_rows, report.runtime_seconds
    );
    for c in &report.per_category {
        s += &format!("\n[{}]\nn_rows = {}\nshare_percent = {}\n", c.category.name(), c.n_rows, c.share_percent);
        if let Some(r2) = c.r2 {
            s += &format!("r2 = {r2}\n");
        }
        if let Some(m) = c.mape_percent {
            s += &format!("mape_percent = {m}\n");
        }
    }
    s
}

/// `category,n_rows,share_percent,r2,mape_percent`, overall row first.
pub fn eval_summary_csv(report: &EvalReport) -> String {
    let mut s = String::from("category,n_rows,share_percent,r2,mape_percent\n");
    s += &format!("overall,{},100,{},{}\n", report.n_rows, report.r2, report.mape_percent);
    for c in &report.per_category {
        s += &format!(
            "{},{},{},{},{}\n",
            c.category.name(),
            c.n_rows,
            c.share_percent,
            opt(c.r2),
            opt(c.mape_percent)
        );
    }
    s
}

pub fn write_eval_report(dir: &Path, report: &EvalReport) -> Result<()> {
    for (name, text) in [
        ("report.toml", eval_report_text(report)),
        ("summary.csv", eval_summary_csv(report)),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// `stage,first_timestep,last_timestep,train_rows,rows_predicted,train_seconds,predict_seconds`
/// plus a `total` row.
pub fn stage_report_csv(report: &StageReport) -> String {
    let mut s = String::from(
        "stage,first_timestep,last_timestep,train_rows,rows_predicted,train_seconds,predict_seconds\n",
    );
    for st in &report.stages {
        s += &format!(
            "{},{},{},{},{},{},{}\n",
            st.stage,
            st.first_timestep,
            st.last_timestep,
            st.train_rows,
            st.rows_predicted,
            st.train_seconds,
            st.predict_seconds
        );
    }
    s += &format!(
        "total,,,,{},{},{}\n",
        report.total_rows_predicted, report.total_train_seconds, report.total_predict_seconds
    );
    s
}

/// `truth_K,predicted_K` pairs for plotting.
pub fn export_scatter(path: &Path, pairs: &[(f64, f64)]) -> Result<()> {
    let mut w = create(path)?;
    finish(path, || {
        writeln!(w, "truth_K,predicted_K")?;
        for (y, p) in pairs {
            writeln!(w, "{y},{p}")?;
        }
        w.flush()
    })
}

pub fn read_scatter(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let bad = || Error::format(path, format!("row {}: bad number", line + 1));
        let y = record.get(0).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let p = record.get(1).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        out.push((y, p));
    }
    Ok(out)
}

/// Encode records as CSV, quoting fields that need it (feature names
/// contain commas).
pub fn csv_text<R, F>(records: impl IntoIterator<Item = R>) -> String
where
    R: IntoIterator<Item = F>,
    F: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.write_record(r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("fields are utf-8")
}

/// `rank,feature,importance`, most important first.
pub fn importance_csv(ranked: &[(String, f64)]) -> String {
    let header = ["rank", "feature", "importance"].map(String::from);
    let rows = ranked
        .iter()
        .enumerate()
        .map(|(i, (name, x))| [(i + 1).to_string(), name.clone(), x.to_string()]);
    csv_text(std::iter::once(header).chain(rows))
}
