//! Supervised rows: one feature vector per `(voxel, timestep)`.
//!
//! Canonical layout of the 38-wide vector:
//!
//! | slots   | content                                               |
//! |---------|-------------------------------------------------------|
//! | 0..5    | own temperature at `t-1` .. `t-5`                     |
//! | 5..31   | 26 neighbours at `t-1`, in [`neighbor_offsets`] order |
//! | 31..34  | position relative to the laser at `t`, metres         |
//! | 34, 35  | creation time and time since creation, seconds        |
//! | 36, 37  | laser power and scan speed labels                     |
//!
//! Any temperature that does not exist at its lookup time is [`SENTINEL`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, VoxelIndex};
use crate::history::{TemperatureSource, ThermalHistory};
use crate::schedule::DepositionSchedule;

pub const SENTINEL: f64 = -99.0;
pub const HISTORY_DEPTH: usize = 5;
pub const NEIGHBOR_COUNT: usize = 26;
pub const FEATURE_COUNT: usize = HISTORY_DEPTH + NEIGHBOR_COUNT + 3 + 2 + 2;

pub const NEIGHBOR_BASE: usize = HISTORY_DEPTH;
pub const REL_BASE: usize = NEIGHBOR_BASE + NEIGHBOR_COUNT;
pub const CREATION_TIME: usize = REL_BASE + 3;
pub const ELAPSED_TIME: usize = CREATION_TIME + 1;
pub const POWER: usize = ELAPSED_TIME + 1;
pub const SCAN_SPEED: usize = POWER + 1;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "T_(t-1)",
    "T_(t-2)",
    "T_(t-3)",
    "T_(t-4)",
    "T_(t-5)",
    "T_diagonal_(x-1,y-1,z-1)",
    "T_diagonal_(x-1,y-1)",
    "T_diagonal_(x-1,y-1,z+1)",
    "T_diagonal_(x-1,z-1)",
    "T_immediate_(x-1)",
    "T_diagonal_(x-1,z+1)",
    "T_diagonal_(x-1,y+1,z-1)",
    "T_diagonal_(x-1,y+1)",
    "T_diagonal_(x-1,y+1,z+1)",
    "T_diagonal_(y-1,z-1)",
    "T_immediate_(y-1)",
    "T_diagonal_(y-1,z+1)",
    "T_immediate_(z-1)",
    "T_immediate_(z+1)",
    "T_diagonal_(y+1,z-1)",
    "T_immediate_(y+1)",
    "T_diagonal_(y+1,z+1)",
    "T_diagonal_(x+1,y-1,z-1)",
    "T_diagonal_(x+1,y-1)",
    "T_diagonal_(x+1,y-1,z+1)",
    "T_diagonal_(x+1,z-1)",
    "T_immediate_(x+1)",
    "T_diagonal_(x+1,z+1)",
    "T_diagonal_(x+1,y+1,z-1)",
    "T_diagonal_(x+1,y+1)",
    "T_diagonal_(x+1,y+1,z+1)",
    "rel_x",
    "rel_y",
    "rel_z",
    "creation_time",
    "elapsed_time",
    "power",
    "scan_speed",
];

/// All `(dx, dy, dz)` in `{-1, 0, 1}^3` except the origin, lexicographic.
pub const fn neighbor_offsets() -> [(i32, i32, i32); NEIGHBOR_COUNT] {
    let mut out = [(0, 0, 0); NEIGHBOR_COUNT];
    let mut k = 0;
    let mut i = 0;
    while i < 27 {
        let (dx, dy, dz) = (i / 9 - 1, (i / 3) % 3 - 1, i % 3 - 1);
        if !(dx == 0 && dy == 0 && dz == 0) {
            out[k] = (dx, dy, dz);
            k += 1;
        }
        i += 1;
    }
    out
}

const OFFSETS: [(i32, i32, i32); NEIGHBOR_COUNT] = neighbor_offsets();

/// Feature slot of the neighbour at `offset`.
pub fn neighbor_slot(offset: (i32, i32, i32)) -> Option<usize> {
    OFFSETS
        .iter()
        .position(|&o| o == offset)
        .map(|k| NEIGHBOR_BASE + k)
}

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|&n| n == name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VoxelCategory {
    Interior,
    EdgeLateral,
    EdgeLongitudinal,
    EdgeVertical,
    EdgeDiagonal,
}

impl VoxelCategory {
    pub const ALL: [VoxelCategory; 5] = [
        VoxelCategory::Interior,
        VoxelCategory::EdgeLateral,
        VoxelCategory::EdgeLongitudinal,
        VoxelCategory::EdgeVertical,
        VoxelCategory::EdgeDiagonal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VoxelCategory::Interior => "interior",
            VoxelCategory::EdgeLateral => "edge_lateral",
            VoxelCategory::EdgeLongitudinal => "edge_longitudinal",
            VoxelCategory::EdgeVertical => "edge_vertical",
            VoxelCategory::EdgeDiagonal => "edge_diagonal",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

/// A neighbour is missing when it is outside the grid or not active.
/// Lateral (x) beats longitudinal (y) beats vertical (z) beats any
/// diagonal; a voxel with all 26 neighbours present is interior.
pub fn classify_voxel(
    voxel: VoxelIndex,
    grid: &GridSpec,
    is_active: impl Fn(VoxelIndex) -> bool,
) -> VoxelCategory {
    let missing = |dx, dy, dz| grid.offset(voxel, dx, dy, dz).is_none_or(|n| !is_active(n));
    if missing(1, 0, 0) || missing(-1, 0, 0) {
        VoxelCategory::EdgeLateral
    } else if missing(0, 1, 0) || missing(0, -1, 0) {
        VoxelCategory::EdgeLongitudinal
    } else if missing(0, 0, 1) || missing(0, 0, -1) {
        VoxelCategory::EdgeVertical
    } else if OFFSETS.iter().any(|&(dx, dy, dz)| missing(dx, dy, dz)) {
        VoxelCategory::EdgeDiagonal
    } else {
        VoxelCategory::Interior
    }
}

/// Category of `voxel` at `t`, judged against the set active at `t - 1`.
pub fn category_at(schedule: &DepositionSchedule, voxel: VoxelIndex, t: usize) -> VoxelCategory {
    let creation = schedule.creation_steps();
    let grid = schedule.grid();
    classify_voxel(voxel, grid, |n| {
        t > 0 && creation[grid.id(n)].is_some_and(|c| c < t)
    })
}

/// Category labels for `(timestep, voxel id)` pairs.
pub trait CategorySource {
    fn category(&self, t: usize, voxel: usize) -> Option<VoxelCategory>;
}

impl CategorySource for DepositionSchedule {
    fn category(&self, t: usize, voxel: usize) -> Option<VoxelCategory> {
        let c = self.creation_steps().get(voxel).copied().flatten()?;
        (c <= t).then(|| category_at(self, self.grid().voxel(voxel), t))
    }
}

/// Run-level constants needed to build rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureContext {
    pub grid: GridSpec,
    pub dt: f64,
    pub power_label: f64,
    pub scan_speed_label: f64,
}

impl FeatureContext {
    pub fn of(history: &ThermalHistory) -> Self {
        Self {
            grid: *history.grid(),
            dt: history.dt(),
            power_label: history.laser().power_label,
            scan_speed_label: history.laser().scan_speed_label,
        }
    }
}

/// Fill `out` with the features of voxel `id` at timestep `t`, reading
/// temperatures from `source`. The caller guarantees the voxel exists at `t`.
pub fn fill_features(
    source: &impl TemperatureSource,
    ctx: &FeatureContext,
    schedule: &DepositionSchedule,
    id: usize,
    t: usize,
    out: &mut [f64; FEATURE_COUNT],
) {
    let g = &ctx.grid;
    let v = g.voxel(id);
    let lookup = |tt: Option<usize>, vid: usize| {
        tt.and_then(|tt| source.temperature(tt, vid))
            .unwrap_or(SENTINEL)
    };
    for k in 1..=HISTORY_DEPTH {
        out[k - 1] = lookup(t.checked_sub(k), id);
    }
    let prev = t.checked_sub(1);
    for (k, &(dx, dy, dz)) in OFFSETS.iter().enumerate() {
        out[NEIGHBOR_BASE + k] = match g.offset(v, dx, dy, dz) {
            Some(n) => lookup(prev, g.id(n)),
            None => SENTINEL,
        };
    }
    let laser = schedule.laser_position(t).unwrap_or(v);
    let h = g.edge_length;
    out[REL_BASE] = (v.ix as f64 - laser.ix as f64) * h;
    out[REL_BASE + 1] = (v.iy as f64 - laser.iy as f64) * h;
    out[REL_BASE + 2] = (v.iz as f64 - laser.iz as f64) * h;
    let created = schedule.creation_steps()[id].unwrap_or(t);
    out[CREATION_TIME] = created as f64 * ctx.dt;
    out[ELAPSED_TIME] = (t - created.min(t)) as f64 * ctx.dt;
    out[POWER] = ctx.power_label;
    out[SCAN_SPEED] = ctx.scan_speed_label;
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub voxel: VoxelIndex,
    pub timestep: usize,
    pub features: [f64; FEATURE_COUNT],
    /// Kelvin at `timestep`.
    pub target: f64,
    pub category: VoxelCategory,
}

impl FeatureRow {
    pub fn history_temps(&self) -> &[f64] {
        &self.features[..HISTORY_DEPTH]
    }

    pub fn neighbor_temps(&self) -> &[f64] {
        &self.features[NEIGHBOR_BASE..REL_BASE]
    }

    pub fn relative_position(&self) -> [f64; 3] {
        [
            self.features[REL_BASE],
            self.features[REL_BASE + 1],
            self.features[REL_BASE + 2],
        ]
    }

    pub fn elapsed_time(&self) -> f64 {
        self.features[ELAPSED_TIME]
    }
}

pub fn extract_row(
    history: &ThermalHistory,
    schedule: &DepositionSchedule,
    voxel: VoxelIndex,
    t: usize,
) -> Result<FeatureRow> {
    let grid = history.grid();
    if !grid.contains(voxel) {
        return Err(Error::Inconsistent(format!("voxel {voxel:?} outside grid")));
    }
    let id = grid.id(voxel);
    let target = history
        .temperature(t, id)
        .ok_or(Error::InactiveTarget { voxel: id, timestep: t })?;
    let mut features = [0.0; FEATURE_COUNT];
    fill_features(history, &FeatureContext::of(history), schedule, id, t, &mut features);
    Ok(FeatureRow {
        voxel,
        timestep: t,
        features,
        target,
        category: category_at(schedule, voxel, t),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Sorted by `(timestep, voxel id)`.
    pub rows: Vec<FeatureRow>,
    pub provenance: String,
}

impl Dataset {
    pub fn feature_names(&self) -> &'static [&'static str; FEATURE_COUNT] {
        &FEATURE_NAMES
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row-major features and targets of the rows accepted by `keep`.
    pub fn matrix_where(&self, keep: impl Fn(&FeatureRow) -> bool) -> (Vec<f64>, Vec<f64>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for row in self.rows.iter().filter(|r| keep(r)) {
            x.extend_from_slice(&row.features);
            y.push(row.target);
        }
        (x, y)
    }

    pub fn matrix(&self) -> (Vec<f64>, Vec<f64>) {
        self.matrix_where(|_| true)
    }

    pub fn category_counts(&self) -> [usize; 5] {
        let mut counts = [0; 5];
        for row in &self.rows {
            counts[row.category as usize] += 1;
        }
        counts
    }

    fn find(&self, t: usize, grid_nx: usize, grid_ny: usize, voxel: usize) -> Option<&FeatureRow> {
        let key = |r: &FeatureRow| {
            (
                r.timestep,
                r.voxel.ix + grid_nx * (r.voxel.iy + grid_ny * r.voxel.iz),
            )
        };
        self.rows
            .binary_search_by(|r| key(r).cmp(&(t, voxel)))
            .ok()
            .map(|i| &self.rows[i])
    }
}

/// Category lookup backed by a dataset's labels.
pub struct DatasetCategories<'a> {
    dataset: &'a Dataset,
    grid: GridSpec,
}

impl<'a> DatasetCategories<'a> {
    pub fn new(dataset: &'a Dataset, grid: GridSpec) -> Self {
        Self { dataset, grid }
    }
}

impl CategorySource for DatasetCategories<'_> {
    fn category(&self, t: usize, voxel: usize) -> Option<VoxelCategory> {
        self.dataset
            .find(t, self.grid.nx, self.grid.ny, voxel)
            .map(|r| r.category)
    }
}

/// One row per defined `(voxel, t)`, grouped by timestep ascending and by
/// voxel id within a timestep.
pub fn build_dataset(history: &ThermalHistory, schedule: &DepositionSchedule) -> Result<Dataset> {
    if history.grid() != schedule.grid() {
        return Err(Error::Inconsistent("history and schedule grids differ".into()));
    }
    if let Some((id, (a, b))) = history
        .creation_steps()
        .iter()
        .zip(schedule.creation_steps())
        .enumerate()
        .find(|(_, (a, b))| a != b)
    {
        return Err(Error::Inconsistent(format!(
            "voxel {id}: history creation step {a:?}, schedule creation step {b:?}"
        )));
    }
    if history.n_steps() < schedule.len() {
        return Err(Error::Inconsistent(format!(
            "history has {} timesteps, schedule {}",
            history.n_steps(),
            schedule.len()
        )));
    }
    let ctx = FeatureContext::of(history);
    let mut rows = Vec::with_capacity(history.row_count());
    for (t, id, target) in history.rows() {
        let voxel = ctx.grid.voxel(id);
        let mut features = [0.0; FEATURE_COUNT];
        fill_features(history, &ctx, schedule, id, t, &mut features);
        rows.push(FeatureRow {
            voxel,
            timestep: t,
            features,
            target,
            category: category_at(schedule, voxel, t),
        });
    }
    Ok(Dataset {
        rows,
        provenance: format!(
            "{}x{}x{} grid, dt={} s, {} timesteps",
            ctx.grid.nx,
            ctx.grid.ny,
            ctx.grid.nz,
            ctx.dt,
            history.n_steps()
        ),
    })
}
