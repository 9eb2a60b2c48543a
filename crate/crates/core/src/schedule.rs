//! Deposition schedules: which voxels the laser creates at each timestep.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, LaserParams, VoxelIndex};

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleStep {
    pub timestep: usize,
    pub activated: Vec<VoxelIndex>,
    /// Last voxel activated at this timestep.
    pub laser_position: VoxelIndex,
}

/// Timesteps are contiguous from 0; every step activates at least one voxel
/// and no voxel is activated twice.
#[derive(Debug, Clone, PartialEq)]
pub struct DepositionSchedule {
    grid: GridSpec,
    steps: Vec<ScheduleStep>,
    creation: Vec<Option<usize>>,
}

impl DepositionSchedule {
    pub fn from_steps(grid: GridSpec, steps: Vec<ScheduleStep>) -> Result<Self> {
        grid.validate()?;
        let mut creation = vec![None; grid.voxel_count()];
        for (t, step) in steps.iter().enumerate() {
            if step.timestep != t {
                return Err(Error::Inconsistent(format!(
                    "step {t} is labelled timestep {}",
                    step.timestep
                )));
            }
            let Some(&last) = step.activated.last() else {
                return Err(Error::Inconsistent(format!("timestep {t} activates nothing")));
            };
            if step.laser_position != last {
                return Err(Error::Inconsistent(format!(
                    "timestep {t}: laser at {:?} but last activated voxel is {:?}",
                    step.laser_position, last
                )));
            }
            for &v in &step.activated {
                if !grid.contains(v) {
                    return Err(Error::Inconsistent(format!(
                        "timestep {t}: voxel {v:?} outside grid"
                    )));
                }
                let slot = &mut creation[grid.id(v)];
                if let Some(prev) = slot {
                    return Err(Error::Inconsistent(format!(
                        "voxel {v:?} activated at {prev} and again at {t}"
                    )));
                }
                *slot = Some(t);
            }
        }
        Ok(Self {
            grid,
            steps,
            creation,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn steps(&self) -> &[ScheduleStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `T_end`, the last scheduled timestep.
    pub fn final_step(&self) -> Option<usize> {
        self.steps.len().checked_sub(1)
    }

    /// Creation timestep per voxel id.
    pub fn creation_steps(&self) -> &[Option<usize>] {
        &self.creation
    }

    pub fn creation_step(&self, v: VoxelIndex) -> Option<usize> {
        self.creation[self.grid.id(v)]
    }

    /// Whether every grid voxel is activated exactly once.
    pub fn is_complete(&self) -> bool {
        self.creation.iter().all(Option::is_some)
    }

    /// Laser position at `t`. After the final step the laser stays parked
    /// at its last position.
    pub fn laser_position(&self, t: usize) -> Option<VoxelIndex> {
        let last = self.steps.len().checked_sub(1)?;
        Some(self.steps[t.min(last)].laser_position)
    }

    /// Voxel ids with `creation_step <= t`, in id order.
    pub fn active_at(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        self.creation
            .iter()
            .enumerate()
            .filter_map(move |(id, c)| c.filter(|&c| c <= t).map(|_| id))
    }

    /// Number of `(voxel, timestep)` samples with `timestep <= through`.
    pub fn rows_through(&self, through: usize) -> usize {
        self.creation
            .iter()
            .flatten()
            .filter(|&&c| c <= through)
            .map(|&c| through - c + 1)
            .sum()
    }
}

/// Serpentine toolpath: within a layer the laser sweeps +x, steps in y,
/// sweeps -x, and so on. Successive layers stack in +z and walk y in the
/// opposite direction so the path is continuous.
///
/// Straight passes activate `voxels_per_step_lateral` voxels per timestep.
/// Every row after the first starts with `turnaround_steps` single-voxel
/// timesteps while the head reverses.
pub fn build_zigzag_schedule(grid: &GridSpec, laser: &LaserParams) -> Result<DepositionSchedule> {
    grid.validate()?;
    laser.validate(grid)?;

    let mut steps: Vec<ScheduleStep> = Vec::new();
    let mut push = |activated: Vec<VoxelIndex>| {
        let laser_position = *activated.last().expect("non-empty chunk");
        steps.push(ScheduleStep {
            timestep: steps.len(),
            activated,
            laser_position,
        });
    };

    let mut row_counter = 0usize;
    for iz in 0..grid.nz {
        for j in 0..grid.ny {
            let iy = if iz % 2 == 0 { j } else { grid.ny - 1 - j };
            let row: Vec<VoxelIndex> = (0..grid.nx)
                .map(|i| {
                    let ix = if row_counter % 2 == 0 { i } else { grid.nx - 1 - i };
                    VoxelIndex::new(ix, iy, iz)
                })
                .collect();

            let single = if row_counter == 0 {
                0
            } else {
                laser.turnaround_steps.min(row.len())
            };
            for &v in &row[..single] {
                push(vec![v]);
            }
            for chunk in row[single..].chunks(laser.voxels_per_step_lateral) {
                push(chunk.to_vec());
            }
            row_counter += 1;
        }
    }
    DepositionSchedule::from_steps(*grid, steps)
}

/// `sum_v (T_end - creation_step[v] + 1)`: the number of `(voxel, timestep)`
/// samples in a history that ends at the schedule's last step.
pub fn schedule_row_count(schedule: &DepositionSchedule) -> usize {
    match schedule.final_step() {
        Some(end) => schedule.rows_through(end),
        None => 0,
    }
}
