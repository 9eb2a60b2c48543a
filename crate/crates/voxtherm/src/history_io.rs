//! Thermal history files.
//!
//! `<name>.csv` holds one row per defined `(timestep, voxel)`:
//!
//! ```text
//! timestep,ix,iy,iz,temperature_K
//! 0,0,0,0,1543.2187
//! ```
//!
//! ordered by timestep, then voxel id (`ix` fastest). The sidecar
//! `<name>.meta.toml` records the grid, material, laser, timestep length,
//! solver settings and every voxel's creation step (`-1` for never).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use voxtherm_core::schedule::{build_zigzag_schedule, DepositionSchedule};
use voxtherm_core::simulator::SimConfig;
use voxtherm_core::{ThermalHistory, VoxelIndex};

use crate::config::{GridSection, LaserSection, MaterialSection};
use crate::error::{Error, Result};

pub const HISTORY_HEADER: [&str; 5] = ["timestep", "ix", "iy", "iz", "temperature_K"];
const FORMAT_NAME: &str = "voxtherm-history";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryMeta {
    pub format: String,
    pub version: u32,
    pub n_steps: usize,
    pub dt: f64,
    pub substeps_per_deposition: usize,
    pub cooldown_steps: usize,
    pub convection: bool,
    pub substrate_contact: bool,
    pub grid: GridSection,
    pub material: MaterialSection,
    pub laser: LaserSection,
    pub creation_steps: Vec<i64>,
}

impl HistoryMeta {
    pub fn new(history: &ThermalHistory, sim: &SimConfig) -> Self {
        Self {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            n_steps: history.n_steps(),
            dt: history.dt(),
            substeps_per_deposition: sim.substeps_per_deposition,
            cooldown_steps: sim.cooldown_steps,
            convection: sim.boundary.convection,
            substrate_contact: sim.boundary.substrate_contact,
            grid: history.grid().into(),
            material: history.material().into(),
            laser: history.laser().into(),
            creation_steps: history
                .creation_steps()
                .iter()
                .map(|c| c.map_or(-1, |c| c as i64))
                .collect(),
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            grid: self.grid.spec(),
            material: self.material.props(),
            laser: self.laser.params(),
            dt: self.dt,
            substeps_per_deposition: self.substeps_per_deposition,
            boundary: voxtherm_core::simulator::Boundary {
                convection: self.convection,
                substrate_contact: self.substrate_contact,
            },
            cooldown_steps: self.cooldown_steps,
        }
    }
}

/// Sidecar path for a history file: `run.csv` -> `run.meta.toml`.
pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta.toml")
}

pub fn write_history(path: &Path, history: &ThermalHistory, sim: &SimConfig) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", HISTORY_HEADER.join(",")).map_err(io)?;
    let grid = history.grid();
    for (t, id, temp) in history.rows() {
        let v = grid.voxel(id);
        writeln!(w, "{t},{},{},{},{temp}", v.ix, v.iy, v.iz).map_err(io)?;
    }
    w.flush().map_err(io)?;

    let meta = meta_path(path);
    let text = toml::to_string(&HistoryMeta::new(history, sim)).expect("serializable");
    std::fs::write(&meta, text).map_err(|e| Error::io(&meta, e))
}

pub fn read_meta(path: &Path) -> Result<HistoryMeta> {
    let meta_file = meta_path(path);
    let text = std::fs::read_to_string(&meta_file).map_err(|e| Error::io(&meta_file, e))?;
    let meta: HistoryMeta =
        toml::from_str(&text).map_err(|e| Error::format(&meta_file, e.to_string()))?;
    if meta.format != FORMAT_NAME || meta.version != FORMAT_VERSION {
        return Err(Error::format(
            &meta_file,
            format!(
                "expected {FORMAT_NAME} v{FORMAT_VERSION}, found {} v{}",
                meta.format, meta.version
            ),
        ));
    }
    Ok(meta)
}

/// Read a history and its sidecar; the record is validated on load.
pub fn read_history(path: &Path) -> Result<(ThermalHistory, HistoryMeta)> {
    let meta = read_meta(path)?;
    let grid = meta.grid.spec();
    grid.validate()?;
    let n = grid.voxel_count();
    if meta.creation_steps.len() != n {
        return Err(Error::format(
            meta_path(path),
            format!("{} creation steps for {n} voxels", meta.creation_steps.len()),
        ));
    }
    let creation: Vec<Option<usize>> = meta
        .creation_steps
        .iter()
        .map(|&c| usize::try_from(c).ok())
        .collect();

    let mut temps = vec![f64::NAN; meta.n_steps * n];
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(HISTORY_HEADER) {
        return Err(Error::format(path, format!("unexpected header {header:?}")));
    }
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let bad = |what: &str| Error::format(path, format!("row {}: {what}", line + 1));
        let field = |i: usize| record.get(i).ok_or_else(|| bad("missing field"));
        let int = |i: usize| field(i)?.parse::<usize>().map_err(|_| bad("bad integer"));
        let (t, ix, iy, iz) = (int(0)?, int(1)?, int(2)?, int(3)?);
        let temp: f64 = field(4)?.parse().map_err(|_| bad("bad temperature"))?;
        let v = VoxelIndex::new(ix, iy, iz);
        if !grid.contains(v) || t >= meta.n_steps {
            return Err(bad("voxel or timestep outside the record"));
        }
        let slot = &mut temps[t * n + grid.id(v)];
        if !slot.is_nan() {
            return Err(bad("duplicate row"));
        }
        *slot = temp;
    }
    let history = ThermalHistory::from_frames(
        grid,
        meta.material.props(),
        meta.laser.params(),
        meta.dt,
        creation,
        temps,
    )
    .map_err(|e| Error::format(path, e.to_string()))?;
    Ok((history, meta))
}

/// Rebuild the deposition schedule a history was produced from and check
/// that it reproduces the recorded creation steps.
pub fn schedule_for(history: &ThermalHistory) -> Result<DepositionSchedule> {
    let schedule = build_zigzag_schedule(history.grid(), history.laser())?;
    if schedule.creation_steps() != history.creation_steps() {
        return Err(voxtherm_core::Error::Inconsistent(
            "history creation steps do not follow the zigzag schedule".into(),
        )
        .into());
    }
    Ok(schedule)
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    if let csv::ErrorKind::Io(_) = e.kind() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::format(path, e.to_string())
    }
}
