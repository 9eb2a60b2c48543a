//! Explicit finite-difference heat conduction with voxel activation.
//!
//! Each active voxel exchanges heat with its six face neighbours. Faces that
//! touch an inactive or out-of-grid neighbour are free surfaces and lose heat
//! by convection; the bottom face of the first layer touches the substrate,
//! which is held at a fixed temperature.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, LaserParams, MaterialProps};
use crate::history::ThermalHistory;
use crate::schedule::DepositionSchedule;

/// Stability limit of the 3-D explicit scheme on `alpha * dt / h^2`.
pub const CFL_BOUND: f64 = 1.0 / 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Boundary {
    /// Convective loss on free faces.
    pub convection: bool,
    /// Conduction through the bottom face of layer 0 into the substrate.
    pub substrate_contact: bool,
}

impl Default for Boundary {
    fn default() -> Self {
        Self {
            convection: true,
            substrate_contact: true,
        }
    }
}

impl Boundary {
    pub const INSULATED: Self = Self {
        convection: false,
        substrate_contact: false,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub grid: GridSpec,
    pub material: MaterialProps,
    pub laser: LaserParams,
    /// Seconds per deposition timestep.
    pub dt: f64,
    pub substeps_per_deposition: usize,
    pub boundary: Boundary,
    /// Extra timesteps simulated after the last deposition.
    pub cooldown_steps: usize,
}

impl SimConfig {
    /// 20x20x4 Ti-6Al-4V build at 0.1 s per timestep, 10 substeps.
    pub fn desk() -> Self {
        Self {
            grid: GridSpec::desk(),
            material: MaterialProps::default(),
            laser: LaserParams::default(),
            dt: 0.1,
            substeps_per_deposition: 10,
            boundary: Boundary::default(),
            cooldown_steps: 0,
        }
    }

    pub fn substep_seconds(&self) -> f64 {
        self.dt / self.substeps_per_deposition as f64
    }

    /// `alpha * dt' / h^2`.
    pub fn fourier_number(&self) -> f64 {
        let h = self.grid.edge_length;
        self.material.diffusivity() * self.substep_seconds() / (h * h)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.material.validate()?;
        self.laser.validate(&self.grid)?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.substeps_per_deposition == 0 {
            return Err(Error::InvalidConfig(
                "substeps_per_deposition must be >= 1".into(),
            ));
        }
        let ratio = self.fourier_number();
        if ratio > CFL_BOUND {
            let h = self.grid.edge_length;
            return Err(Error::Cfl {
                ratio,
                bound: CFL_BOUND,
                max_substep_seconds: CFL_BOUND * h * h / self.material.diffusivity(),
            });
        }
        Ok(())
    }
}

/// One explicit substep of the conduction/convection update on a fixed
/// active set. Reads `prev`, writes `next`.
#[derive(Debug, Clone)]
pub struct HeatKernel {
    grid: GridSpec,
    fourier: f64,
    /// `h_conv * dt' / (rho * c_p * h)`, per exposed face.
    convective: f64,
    ambient: f64,
    substrate: Option<f64>,
    pinned: Vec<Option<f64>>,
}

impl HeatKernel {
    pub fn new(config: &SimConfig) -> Self {
        let m = &config.material;
        let convective = if config.boundary.convection {
            m.convective_coefficient * config.substep_seconds()
                / (m.density * m.specific_heat * config.grid.edge_length)
        } else {
            0.0
        };
        Self {
            grid: config.grid,
            fourier: config.fourier_number(),
            convective,
            ambient: m.ambient_temperature,
            substrate: config
                .boundary
                .substrate_contact
                .then_some(config.grid.substrate_temperature),
            pinned: vec![None; config.grid.voxel_count()],
        }
    }

    /// Hold voxel `id` at a fixed temperature (Dirichlet node).
    pub fn pin(&mut self, id: usize, temperature: f64) {
        self.pinned[id] = Some(temperature);
    }

    pub fn substep(&self, active: &[bool], prev: &[f64], next: &mut [f64]) {
        let g = &self.grid;
        let (sx, sy) = (1, g.nx);
        let sz = g.nx * g.ny;
        for id in 0..g.voxel_count() {
            if !active[id] {
                next[id] = f64::NAN;
                continue;
            }
            if let Some(fixed) = self.pinned[id] {
                next[id] = fixed;
                continue;
            }
            let v = g.voxel(id);
            let t = prev[id];
            let mut conduction = 0.0;
            let mut exposed = 0u32;
            let faces = [
                (v.ix > 0, id.wrapping_sub(sx)),
                (v.ix + 1 < g.nx, id + sx),
                (v.iy > 0, id.wrapping_sub(sy)),
                (v.iy + 1 < g.ny, id + sy),
                (v.iz + 1 < g.nz, id + sz),
            ];
            for (inside, nb) in faces {
                if inside && active[nb] {
                    conduction += prev[nb] - t;
                } else {
                    exposed += 1;
                }
            }
            if v.iz > 0 {
                let nb = id - sz;
                if active[nb] {
                    conduction += prev[nb] - t;
                } else {
                    exposed += 1;
                }
            } else if let Some(ts) = self.substrate {
                conduction += ts - t;
            } else {
                exposed += 1;
            }
            next[id] = t + self.fourier * conduction
                - self.convective * exposed as f64 * (t - self.ambient);
        }
    }
}

/// Simulation state after `next_step` timesteps have been processed.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    /// Index of the next timestep to process.
    pub next_step: usize,
    pub active: Vec<bool>,
    /// Kelvin per voxel id, NaN where inactive.
    pub field: Vec<f64>,
}

impl SimState {
    pub fn new(grid: &GridSpec) -> Self {
        let n = grid.voxel_count();
        Self {
            next_step: 0,
            active: vec![false; n],
            field: vec![f64::NAN; n],
        }
    }
}

/// Reusable stepping engine; owns the kernel and the scratch buffer.
struct Stepper<'a> {
    config: &'a SimConfig,
    schedule: &'a DepositionSchedule,
    kernel: HeatKernel,
    scratch: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(config: &'a SimConfig, schedule: &'a DepositionSchedule) -> Result<Self> {
        config.validate()?;
        if schedule.grid() != &config.grid {
            return Err(Error::Inconsistent(
                "schedule grid differs from simulation grid".into(),
            ));
        }
        Ok(Self {
            config,
            schedule,
            kernel: HeatKernel::new(config),
            scratch: vec![f64::NAN; config.grid.voxel_count()],
        })
    }

    fn advance(&mut self, state: &mut SimState) -> Result<()> {
        let t = state.next_step;
        if let Some(step) = self.schedule.steps().get(t) {
            for &v in &step.activated {
                let id = self.config.grid.id(v);
                state.active[id] = true;
                state.field[id] = self.config.laser.deposition_temperature;
            }
        }
        for _ in 0..self.config.substeps_per_deposition {
            self.kernel
                .substep(&state.active, &state.field, &mut self.scratch);
            core::mem::swap(&mut state.field, &mut self.scratch);
        }
        for (id, &x) in state.field.iter().enumerate() {
            if state.active[id] && !x.is_finite() {
                return Err(Error::NumericalFailure {
                    timestep: t,
                    voxel: id,
                });
            }
        }
        state.next_step += 1;
        Ok(())
    }
}

/// Process timestep `state.next_step`: activate its scheduled voxels at the
/// deposition temperature, then run `substeps_per_deposition` explicit
/// updates.
pub fn step(
    state: &SimState,
    config: &SimConfig,
    schedule: &DepositionSchedule,
) -> Result<SimState> {
    let mut stepper = Stepper::new(config, schedule)?;
    let mut next = state.clone();
    stepper.advance(&mut next)?;
    Ok(next)
}

/// Simulate the whole schedule plus `cooldown_steps` and record every
/// active voxel's temperature at the end of each timestep.
pub fn run(config: &SimConfig, schedule: &DepositionSchedule) -> Result<ThermalHistory> {
    let mut stepper = Stepper::new(config, schedule)?;
    let n = config.grid.voxel_count();
    let n_steps = if schedule.is_empty() {
        0
    } else {
        schedule.len() + config.cooldown_steps
    };
    let mut temps = Vec::with_capacity(n_steps * n);
    let mut state = SimState::new(&config.grid);
    for _ in 0..n_steps {
        stepper.advance(&mut state)?;
        temps.extend_from_slice(&state.field);
    }
    ThermalHistory::from_frames(
        config.grid,
        config.material,
        config.laser,
        config.dt,
        schedule.creation_steps().to_vec(),
        temps,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::VoxelIndex;
    use crate::history::TemperatureSource;
    use crate::schedule::{build_zigzag_schedule, ScheduleStep};
    use proptest::prelude::*;

    fn config(nx: usize, ny: usize, nz: usize, boundary: Boundary) -> SimConfig {
        SimConfig {
            grid: GridSpec::new(nx, ny, nz, 0.5e-3, 300.0).unwrap(),
            boundary,
            ..SimConfig::desk()
        }
    }

    fn all_at_once(grid: GridSpec) -> DepositionSchedule {
        let all: Vec<VoxelIndex> = grid.voxels().collect();
        DepositionSchedule::from_steps(
            grid,
            vec![ScheduleStep {
                timestep: 0,
                laser_position: *all.last().unwrap(),
                activated: all,
            }],
        )
        .unwrap()
    }

    #[test]
    fn desk_config_is_stable() {
        let c = SimConfig::desk();
        c.validate().unwrap();
        assert!(c.fourier_number() < CFL_BOUND);
    }

    #[test]
    fn cfl_violation_is_reported_with_bound() {
        let c = SimConfig {
            substeps_per_deposition: 1,
            ..SimConfig::desk()
        };
        match c.validate() {
            Err(Error::Cfl {
                ratio,
                max_substep_seconds,
                ..
            }) => {
                assert!(ratio > CFL_BOUND);
                let h = c.grid.edge_length;
                let expect = h * h / (6.0 * c.material.diffusivity());
                assert!((max_substep_seconds - expect).abs() < 1e-15);
            }
            other => panic!("expected CFL error, got {other:?}"),
        }
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let c = config(3, 3, 2, Boundary {
            convection: false,
            substrate_contact: true,
        });
        let kernel = HeatKernel::new(&c);
        let n = c.grid.voxel_count();
        let active = vec![true; n];
        let prev = vec![300.0; n];
        let mut next = vec![0.0; n];
        kernel.substep(&active, &prev, &mut next);
        assert_eq!(prev, next);
    }

    #[test]
    fn two_voxel_exchange_matches_hand_calculation() {
        let c = SimConfig {
            substeps_per_deposition: 1,
            dt: 0.01,
            ..config(2, 1, 1, Boundary::INSULATED)
        };
        let kernel = HeatKernel::new(&c);
        let prev = [2000.0, 1000.0];
        let mut next = [0.0; 2];
        kernel.substep(&[true, true], &prev, &mut next);
        let h = c.grid.edge_length;
        let delta = c.material.diffusivity() * 0.01 * 1000.0 / (h * h);
        assert!((next[0] - (2000.0 - delta)).abs() < 1e-9);
        assert!((next[1] - (1000.0 + delta)).abs() < 1e-9);
    }

    #[test]
    fn column_reaches_linear_steady_state() {
        let n = 10;
        let c = config(1, 1, n, Boundary {
            convection: false,
            substrate_contact: true,
        });
        let mut kernel = HeatKernel::new(&c);
        let top = 1500.0;
        kernel.pin(n - 1, top);
        let active = vec![true; n];
        let mut field = vec![300.0; n];
        field[n - 1] = top;
        let mut scratch = vec![0.0; n];
        for _ in 0..20_000 {
            kernel.substep(&active, &field, &mut scratch);
            core::mem::swap(&mut field, &mut scratch);
        }
        // substrate sits one spacing below voxel 0; voxel n-1 is pinned
        let ts = c.grid.substrate_temperature;
        for (i, &x) in field.iter().enumerate() {
            let line = ts + (top - ts) * (i + 1) as f64 / n as f64;
            assert!(((x - line) / line).abs() < 0.005, "voxel {i}: {x} vs {line}");
        }
    }

    #[test]
    fn insulated_build_conserves_energy() {
        let c = config(4, 3, 2, Boundary::INSULATED);
        let grid = c.grid;
        let s = all_at_once(grid);
        let mut state = SimState::new(&grid);
        state = step(&state, &c, &s).unwrap();
        // perturb so there is something to conduct
        for (i, x) in state.field.iter_mut().enumerate() {
            *x += (i * 37 % 11) as f64 * 50.0;
        }
        let energy = |f: &[f64]| f.iter().sum::<f64>();
        let mut e0 = energy(&state.field);
        for _ in 0..200 {
            state = step(&state, &c, &s).unwrap();
            let e1 = energy(&state.field);
            assert!(((e1 - e0) / e0).abs() <= 1e-9);
            e0 = e1;
        }
    }

    #[test]
    fn isolated_voxel_cools_monotonically() {
        let c = SimConfig {
            cooldown_steps: 200,
            ..config(1, 1, 1, Boundary {
                convection: true,
                substrate_contact: false,
            })
        };
        let h = run(&c, &all_at_once(c.grid)).unwrap();
        let mut prev = f64::INFINITY;
        for t in 0..h.n_steps() {
            let x = h.temperature(t, 0).unwrap();
            assert!(x < prev && x > c.material.ambient_temperature);
            prev = x;
        }
    }

    #[test]
    fn new_neighbour_reheats_a_cooled_voxel() {
        let grid = GridSpec::new(2, 1, 1, 0.5e-3, 300.0).unwrap();
        let v0 = VoxelIndex::new(0, 0, 0);
        let s = DepositionSchedule::from_steps(
            grid,
            vec![ScheduleStep {
                timestep: 0,
                activated: vec![v0],
                laser_position: v0,
            }],
        )
        .unwrap();
        let c = SimConfig {
            grid,
            ..SimConfig::desk()
        };
        let mut state = SimState::new(&grid);
        for _ in 0..30 {
            state = step(&state, &c, &s).unwrap();
        }
        let cooled = state.field[0];
        assert!(cooled < c.laser.deposition_temperature);

        // deposit the neighbour the way the stepper does
        state.active[1] = true;
        state.field[1] = c.laser.deposition_temperature;
        let mut raised = false;
        for _ in 0..5 {
            state = step(&state, &c, &s).unwrap();
            raised |= state.field[0] > cooled;
        }
        assert!(raised);
    }

    #[test]
    fn empty_schedule_gives_empty_history() {
        let c = SimConfig::desk();
        let s = DepositionSchedule::from_steps(c.grid, Vec::new()).unwrap();
        let h = run(&c, &s).unwrap();
        assert!(h.is_empty());
        assert_eq!(h.row_count(), 0);
    }

    #[test]
    fn later_voxels_end_hotter() {
        let c = SimConfig::desk();
        let s = build_zigzag_schedule(&c.grid, &c.laser).unwrap();
        let h = run(&c, &s).unwrap();
        let end = h.final_step().unwrap();
        let mut order: Vec<usize> = (0..c.grid.voxel_count()).collect();
        order.sort_by_key(|&id| (s.creation_steps()[id].unwrap(), id));
        let decile = order.len() / 10;
        let mean = |ids: &[usize]| {
            ids.iter().map(|&id| h.temperature(end, id).unwrap()).sum::<f64>() / ids.len() as f64
        };
        let first = mean(&order[..decile]);
        let last = mean(&order[order.len() - decile..]);
        assert!(last > first, "last decile {last} vs first {first}");
        assert_eq!(h.row_count(), crate::schedule::schedule_row_count(&s));
    }

    proptest! {
        #[test]
        fn discrete_maximum_principle(seed_field in proptest::collection::vec(300.0f64..2000.0, 18)) {
            let c = config(3, 3, 2, Boundary::INSULATED);
            let kernel = HeatKernel::new(&c);
            let g = c.grid;
            let active = vec![true; g.voxel_count()];
            let mut next = vec![0.0; g.voxel_count()];
            kernel.substep(&active, &seed_field, &mut next);
            for id in 0..g.voxel_count() {
                let v = g.voxel(id);
                let mut lo = seed_field[id];
                let mut hi = seed_field[id];
                for (dx, dy, dz) in [(1,0,0),(-1,0,0),(0,1,0),(0,-1,0),(0,0,1),(0,0,-1)] {
                    if let Some(nb) = g.offset(v, dx, dy, dz) {
                        let x = seed_field[g.id(nb)];
                        lo = lo.min(x);
                        hi = hi.max(x);
                    }
                }
                prop_assert!(next[id] >= lo - 1e-9 && next[id] <= hi + 1e-9);
            }
        }
    }
}
