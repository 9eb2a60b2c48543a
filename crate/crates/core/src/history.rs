//! Ground-truth temperature records.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, LaserParams, MaterialProps, VoxelIndex};

/// Read access to a `(timestep, voxel id) -> Kelvin` record.
pub trait TemperatureSource {
    /// `None` where the voxel does not exist yet or `t` is outside the record.
    fn temperature(&self, t: usize, voxel: usize) -> Option<f64>;
}

impl<S: TemperatureSource + ?Sized> TemperatureSource for &S {
    fn temperature(&self, t: usize, voxel: usize) -> Option<f64> {
        (**self).temperature(t, voxel)
    }
}

/// Per-timestep temperature field of every activated voxel.
///
/// `temperature(t, v)` is defined iff `creation_step[v] <= t <= final_step`.
#[derive(Debug, Clone)]
pub struct ThermalHistory {
    grid: GridSpec,
    material: MaterialProps,
    laser: LaserParams,
    dt: f64,
    creation: Vec<Option<usize>>,
    n_steps: usize,
    /// Frame-major, NaN where undefined.
    temps: Vec<f64>,
}

/// Bitwise on temperatures, so the NaN placeholders compare equal.
impl PartialEq for ThermalHistory {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self.material == other.material
            && self.laser == other.laser
            && self.dt.to_bits() == other.dt.to_bits()
            && self.creation == other.creation
            && self.n_steps == other.n_steps
            && self.temps.len() == other.temps.len()
            && self.temps.iter().zip(&other.temps).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl ThermalHistory {
    /// Assemble a history from frame-major temperatures (`n_steps` frames of
    /// `grid.voxel_count()` values, NaN where undefined).
    pub fn from_frames(
        grid: GridSpec,
        material: MaterialProps,
        laser: LaserParams,
        dt: f64,
        creation: Vec<Option<usize>>,
        temps: Vec<f64>,
    ) -> Result<Self> {
        let n = grid.voxel_count();
        if creation.len() != n {
            return Err(Error::Inconsistent(format!(
                "{} creation steps for {n} voxels",
                creation.len()
            )));
        }
        if temps.len() % n != 0 {
            return Err(Error::Inconsistent(format!(
                "{} temperatures is not a whole number of {n}-voxel frames",
                temps.len()
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be > 0, got {dt}")));
        }
        let n_steps = temps.len() / n;
        let floor = material.ambient_temperature.min(grid.substrate_temperature);
        for (i, &temp) in temps.iter().enumerate() {
            let (t, v) = (i / n, i % n);
            let defined = creation[v].is_some_and(|c| c <= t);
            if defined != !temp.is_nan() {
                return Err(Error::Inconsistent(format!(
                    "voxel {v} at timestep {t}: temperature {} but creation step {:?}",
                    temp, creation[v]
                )));
            }
            if defined && !(temp.is_finite() && temp >= floor - 1e-9 * floor) {
                return Err(Error::Inconsistent(format!(
                    "voxel {v} at timestep {t}: temperature {temp} below floor {floor} or not finite"
                )));
            }
        }
        if n_steps == 0 && creation.iter().any(Option::is_some) {
            return Err(Error::Inconsistent("empty record with created voxels".into()));
        }
        Ok(Self {
            grid,
            material,
            laser,
            dt,
            creation,
            n_steps,
            temps,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn material(&self) -> &MaterialProps {
        &self.material
    }

    pub fn laser(&self) -> &LaserParams {
        &self.laser
    }

    /// Seconds per timestep.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn creation_steps(&self) -> &[Option<usize>] {
        &self.creation
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn is_empty(&self) -> bool {
        self.n_steps == 0
    }

    pub fn final_step(&self) -> Option<usize> {
        self.n_steps.checked_sub(1)
    }

    pub fn get(&self, t: usize, v: VoxelIndex) -> Option<f64> {
        self.temperature(t, self.grid.id(v))
    }

    /// Raw frame at `t`, NaN where undefined.
    pub fn frame(&self, t: usize) -> &[f64] {
        let n = self.grid.voxel_count();
        &self.temps[t * n..(t + 1) * n]
    }

    /// Number of defined `(timestep, voxel)` pairs.
    pub fn row_count(&self) -> usize {
        let Some(end) = self.final_step() else {
            return 0;
        };
        self.creation
            .iter()
            .flatten()
            .filter(|&&c| c <= end)
            .map(|&c| end - c + 1)
            .sum()
    }

    /// Defined `(timestep, voxel id, Kelvin)` triples, timestep-major.
    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.grid.voxel_count();
        self.temps
            .iter()
            .enumerate()
            .filter(|(_, t)| !t.is_nan())
            .map(move |(i, &temp)| (i / n, i % n, temp))
    }

    /// Sum of `rho * c_p * V * T` over the voxels defined at `t`, in joules.
    pub fn thermal_energy(&self, t: usize) -> f64 {
        let e = self.grid.edge_length;
        let volume = e * e * e;
        let heat_capacity = self.material.density * self.material.specific_heat * volume;
        self.frame(t)
            .iter()
            .filter(|x| !x.is_nan())
            .map(|&x| heat_capacity * x)
            .sum()
    }
}

impl TemperatureSource for ThermalHistory {
    #[inline]
    fn temperature(&self, t: usize, voxel: usize) -> Option<f64> {
        if t >= self.n_steps {
            return None;
        }
        let x = self.temps[t * self.grid.voxel_count() + voxel];
        (!x.is_nan()).then_some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tiny() -> ThermalHistory {
        let g = GridSpec::new(2, 1, 1, 1e-3, 300.0).unwrap();
        ThermalHistory::from_frames(
            g,
            MaterialProps::default(),
            LaserParams::default(),
            0.1,
            vec![Some(0), Some(1)],
            vec![1900.0, f64::NAN, 1500.0, 1900.0, 1200.0, 1400.0],
        )
        .unwrap()
    }

    #[test]
    fn defined_iff_created() {
        let h = tiny();
        assert_eq!(h.temperature(0, 1), None);
        assert_eq!(h.temperature(1, 1), Some(1900.0));
        assert_eq!(h.temperature(3, 0), None);
        assert_eq!(h.row_count(), 5);
        assert_eq!(h.rows().count(), 5);
    }

    #[test]
    fn rejects_temperature_before_creation() {
        let g = GridSpec::new(1, 1, 1, 1e-3, 300.0).unwrap();
        let err = ThermalHistory::from_frames(
            g,
            MaterialProps::default(),
            LaserParams::default(),
            0.1,
            vec![Some(1)],
            vec![500.0, 500.0],
        );
        assert!(err.is_err());
    }

    #[test]
    fn rejects_below_floor() {
        let g = GridSpec::new(1, 1, 1, 1e-3, 300.0).unwrap();
        let err = ThermalHistory::from_frames(
            g,
            MaterialProps::default(),
            LaserParams::default(),
            0.1,
            vec![Some(0)],
            vec![100.0],
        );
        assert!(err.is_err());
    }
}
