//! Build geometry, material and laser parameters.

use alloc::format;

use crate::error::{Error, Result};

/// Zero-based voxel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VoxelIndex {
    pub ix: usize,
    pub iy: usize,
    pub iz: usize,
}

impl VoxelIndex {
    pub const fn new(ix: usize, iy: usize, iz: usize) -> Self {
        Self { ix, iy, iz }
    }
}

/// Voxel lattice of the build volume. Voxel ids are linear with `ix`
/// fastest, then `iy`, then `iz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Voxel edge in metres.
    pub edge_length: f64,
    /// Kelvin.
    pub substrate_temperature: f64,
}

impl GridSpec {
    pub fn new(
        nx: usize,
        ny: usize,
        nz: usize,
        edge_length: f64,
        substrate_temperature: f64,
    ) -> Result<Self> {
        let grid = Self {
            nx,
            ny,
            nz,
            edge_length,
            substrate_temperature,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// 20 x 20 x 4 voxels of 0.5 mm on a 300 K substrate.
    pub fn desk() -> Self {
        Self {
            nx: 20,
            ny: 20,
            nz: 4,
            edge_length: 0.5e-3,
            substrate_temperature: 300.0,
        }
    }

    /// 40 x 40 x 6 voxels of 0.5 mm.
    pub fn full_scale() -> Self {
        Self {
            nx: 40,
            ny: 40,
            nz: 6,
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.nz == 0 {
            return Err(Error::InvalidConfig(format!(
                "grid dimensions must be >= 1, got {}x{}x{}",
                self.nx, self.ny, self.nz
            )));
        }
        if !(self.edge_length > 0.0 && self.edge_length.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "edge_length must be > 0, got {}",
                self.edge_length
            )));
        }
        if !(self.substrate_temperature > 0.0 && self.substrate_temperature.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "substrate_temperature must be > 0 K, got {}",
                self.substrate_temperature
            )));
        }
        Ok(())
    }

    pub fn voxel_count(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn contains(&self, v: VoxelIndex) -> bool {
        v.ix < self.nx && v.iy < self.ny && v.iz < self.nz
    }

    #[inline]
    pub fn id(&self, v: VoxelIndex) -> usize {
        debug_assert!(self.contains(v));
        v.ix + self.nx * (v.iy + self.ny * v.iz)
    }

    #[inline]
    pub fn voxel(&self, id: usize) -> VoxelIndex {
        VoxelIndex {
            ix: id % self.nx,
            iy: (id / self.nx) % self.ny,
            iz: id / (self.nx * self.ny),
        }
    }

    /// Neighbour of `v` displaced by `(dx, dy, dz)`, if inside the grid.
    #[inline]
    pub fn offset(&self, v: VoxelIndex, dx: i32, dy: i32, dz: i32) -> Option<VoxelIndex> {
        let shift = |c: usize, d: i32, n: usize| {
            let c = c as i64 + d as i64;
            (c >= 0 && (c as usize) < n).then_some(c as usize)
        };
        Some(VoxelIndex {
            ix: shift(v.ix, dx, self.nx)?,
            iy: shift(v.iy, dy, self.ny)?,
            iz: shift(v.iz, dz, self.nz)?,
        })
    }

    pub fn voxels(&self) -> impl Iterator<Item = VoxelIndex> + '_ {
        (0..self.voxel_count()).map(move |id| self.voxel(id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialProps {
    /// kg/m^3
    pub density: f64,
    /// J/(kg K)
    pub specific_heat: f64,
    /// W/(m K)
    pub conductivity: f64,
    /// W/(m^2 K)
    pub convective_coefficient: f64,
    /// Kelvin.
    pub ambient_temperature: f64,
}

impl Default for MaterialProps {
    /// Roughly Ti-6Al-4V.
    fn default() -> Self {
        Self {
            density: 4430.0,
            specific_heat: 526.0,
            conductivity: 6.7,
            convective_coefficient: 20.0,
            ambient_temperature: 300.0,
        }
    }
}

impl MaterialProps {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("density", self.density),
            ("specific_heat", self.specific_heat),
            ("conductivity", self.conductivity),
            ("convective_coefficient", self.convective_coefficient),
            ("ambient_temperature", self.ambient_temperature),
        ];
        for (name, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and > 0, got {value}"
                )));
            }
        }
        if !self.diffusivity().is_finite() {
            return Err(Error::InvalidConfig("thermal diffusivity is not finite".into()));
        }
        Ok(())
    }

    /// Thermal diffusivity in m^2/s.
    pub fn diffusivity(&self) -> f64 {
        self.conductivity / (self.density * self.specific_heat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserParams {
    /// Temperature given to a voxel when it is deposited, Kelvin.
    pub deposition_temperature: f64,
    /// Voxels activated per timestep on a straight pass.
    pub voxels_per_step_lateral: usize,
    /// Single-voxel timesteps spent at each pass reversal.
    pub turnaround_steps: usize,
    /// Laser power, W. Metadata carried into the feature vector.
    pub power_label: f64,
    /// Scan speed, m/s. Metadata carried into the feature vector.
    pub scan_speed_label: f64,
}

impl Default for LaserParams {
    fn default() -> Self {
        Self {
            deposition_temperature: 1900.0,
            voxels_per_step_lateral: 2,
            turnaround_steps: 1,
            power_label: 400.0,
            scan_speed_label: 0.01,
        }
    }
}

impl LaserParams {
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.deposition_temperature > grid.substrate_temperature
            && self.deposition_temperature.is_finite())
        {
            return Err(Error::InvalidConfig(format!(
                "deposition_temperature {} K must exceed substrate temperature {} K",
                self.deposition_temperature, grid.substrate_temperature
            )));
        }
        if self.voxels_per_step_lateral == 0 {
            return Err(Error::InvalidConfig(
                "voxels_per_step_lateral must be >= 1".into(),
            ));
        }
        if !self.power_label.is_finite() || !self.scan_speed_label.is_finite() {
            return Err(Error::InvalidConfig("laser labels must be finite".into()));
        }
        Ok(())
    }
}
