//! Seeded initial conditions and synchronous explicit integration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forces::{solve_velocity, ForceField, PinningLandscape};
use crate::params::{Integrator, ModelParams};
use crate::vec2::{min_image, wrap, Vec2};

/// Default number of integration steps per run.
pub const DEFAULT_ITERATIONS: u64 = 4000;
/// Default snapshot spacing, in iterations.
pub const DEFAULT_RECORD_STRIDE: u64 = 15;

const PLACEMENT_ATTEMPTS: usize = 100_000;
/// Minimum initial skyrmion separation, in units of `xi_s`.
const MIN_INITIAL_SEPARATION: f64 = 0.05;

/// All randomness for a run is drawn from this generator seeded with [`SeededRun::seed`].
pub type RunRng = ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeededRun {
    pub seed: u64,
    pub params: ModelParams,
}

impl SeededRun {
    pub fn new(seed: u64, params: ModelParams) -> Self {
        SeededRun { seed, params }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkyrmionState {
    /// Wrapped into `[0, box_l)`.
    pub positions: Vec<Vec2>,
    /// Cumulative true displacement from the initial configuration.
    pub unwrapped: Vec<Vec2>,
    pub iteration: u64,
}

impl SkyrmionState {
    pub fn new(positions: Vec<Vec2>) -> Self {
        let unwrapped = positions.clone();
        SkyrmionState {
            positions,
            unwrapped,
            iteration: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

fn uniform_point(rng: &mut RunRng, box_l: f64) -> Vec2 {
    let x = rng.gen::<f64>() * box_l;
    let y = rng.gen::<f64>() * box_l;
    wrap(Vec2::new(x, y), box_l)
}

/// Draw trap centres and initial skyrmion positions for a run.
pub fn init_system(run: &SeededRun) -> Result<(SkyrmionState, PinningLandscape)> {
    let p = &run.params;
    p.validate()?;
    let mut rng = RunRng::seed_from_u64(run.seed);
    let l = p.box_l;

    let min_trap = 2.0 * p.pin_radius;
    let n_pins = p.n_pins();
    let mut centers: Vec<Vec2> = Vec::with_capacity(n_pins);
    for k in 0..n_pins {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let c = uniform_point(&mut rng, l);
            if centers.iter().all(|&o| min_image(c, o, l).norm() >= min_trap) {
                centers.push(c);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Placement(format!(
                "could not place trap {k} of {n_pins} after {PLACEMENT_ATTEMPTS} attempts"
            )));
        }
    }

    let min_sep = MIN_INITIAL_SEPARATION * p.xi_s;
    let n_sky = p.n_skyrmions();
    let mut positions: Vec<Vec2> = Vec::with_capacity(n_sky);
    for k in 0..n_sky {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let c = uniform_point(&mut rng, l);
            if positions.iter().all(|&o| min_image(c, o, l).norm() > min_sep) {
                positions.push(c);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Placement(format!(
                "could not place skyrmion {k} of {n_sky} after {PLACEMENT_ATTEMPTS} attempts"
            )));
        }
    }

    let landscape = PinningLandscape::new(centers, p.pin_radius, p.f_p, p.pin_model, l);
    Ok((SkyrmionState::new(positions), landscape))
}

/// A state, its landscape and the precomputed force field for one parameter set.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub params: ModelParams,
    pub state: SkyrmionState,
    pub landscape: PinningLandscape,
    field: ForceField,
    forces: Vec<Vec2>,
    stage: Vec<Vec2>,
    sum: Vec<Vec2>,
}

impl Simulation {
    pub fn new(params: ModelParams, state: SkyrmionState, landscape: PinningLandscape) -> Result<Self> {
        params.validate()?;
        let field = ForceField::new(&params);
        let n = state.len();
        Ok(Simulation {
            params,
            state,
            landscape,
            field,
            forces: vec![Vec2::ZERO; n],
            stage: vec![Vec2::ZERO; n],
            sum: vec![Vec2::ZERO; n],
        })
    }

    pub fn from_run(run: &SeededRun) -> Result<Self> {
        let (state, landscape) = init_system(run)?;
        Simulation::new(run.params.clone(), state, landscape)
    }

    pub fn field(&self) -> &ForceField {
        &self.field
    }

    pub fn forces(&self) -> Result<Vec<Vec2>> {
        self.field.all_forces(&self.state.positions, &self.landscape)
    }

    /// Advance one iteration of length `dt`.
    ///
    /// The iteration is covered by synchronous sub-steps, each computed entirely from the
    /// configuration before it. A sub-step is as long as the remaining time allows, capped
    /// by `max_substep` and by `max_move` over the fastest particle, so its length depends
    /// only on the state.
    pub fn step(&mut self) -> Result<()> {
        let l = self.params.box_l;
        let start: Vec<Vec2> = self.state.unwrapped.clone();
        let mut remaining = self.params.dt;
        while remaining > 0.0 {
            self.velocities_at(false)?;
            let fastest = self.forces.iter().map(|v| v.norm_sq()).fold(0.0, f64::max).sqrt();
            let mut h = remaining.min(self.params.max_substep);
            if fastest * h > self.params.max_move {
                h = self.params.max_move / fastest;
            }
            // avoid a sliver at the end of the iteration
            if remaining - h < 1e-9 * self.params.dt {
                h = remaining;
            }
            match self.params.integrator {
                Integrator::Euler => self.euler(h),
                Integrator::Rk4 => self.rk4(h)?,
            }
            remaining -= h;
        }
        let limit = l / 4.0;
        if let Some((particle, d)) = self
            .state
            .unwrapped
            .iter()
            .zip(&start)
            .map(|(&now, &before)| (now - before).norm())
            .enumerate()
            .find(|&(_, d)| !(d <= limit))
        {
            return Err(Error::Unstable {
                iteration: self.state.iteration,
                particle,
                displacement: d,
            });
        }
        self.state.iteration += 1;
        Ok(())
    }

    fn displace(&mut self, d: impl Fn(usize) -> Vec2) {
        let l = self.params.box_l;
        let state = &mut self.state;
        for (i, (pos, unw)) in state.positions.iter_mut().zip(state.unwrapped.iter_mut()).enumerate() {
            let step = d(i);
            *pos = wrap(*pos + step, l);
            *unw += step;
        }
    }

    /// Euler update from the velocities already in `self.forces`.
    fn euler(&mut self, h: f64) {
        let v = std::mem::take(&mut self.forces);
        self.displace(|i| v[i] * h);
        self.forces = v;
    }

    /// Velocity at `positions` into `self.forces`.
    fn velocities_at(&mut self, stage: bool) -> Result<()> {
        let pos = if stage { &self.stage } else { &self.state.positions };
        self.field.forces_into(pos, &self.landscape, &mut self.forces)?;
        for f in self.forces.iter_mut() {
            *f = solve_velocity(*f, &self.params);
        }
        Ok(())
    }

    fn set_stage(&mut self, h: f64) {
        let l = self.params.box_l;
        for ((s, &p), &v) in self.stage.iter_mut().zip(&self.state.positions).zip(&self.forces) {
            *s = wrap(p + v * h, l);
        }
    }

    /// Runge-Kutta update; the first-stage velocities are already in `self.forces`.
    fn rk4(&mut self, h: f64) -> Result<()> {
        self.sum.copy_from_slice(&self.forces);
        self.set_stage(0.5 * h);
        self.velocities_at(true)?;
        self.sum.iter_mut().zip(&self.forces).for_each(|(s, &v)| *s += v * 2.0);
        self.set_stage(0.5 * h);
        self.velocities_at(true)?;
        self.sum.iter_mut().zip(&self.forces).for_each(|(s, &v)| *s += v * 2.0);
        self.set_stage(h);
        self.velocities_at(true)?;
        self.sum.iter_mut().zip(&self.forces).for_each(|(s, &v)| *s += v);
        let sum = std::mem::take(&mut self.sum);
        self.displace(|i| sum[i] * (h / 6.0));
        self.sum = sum;
        Ok(())
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            iteration: self.state.iteration,
            positions: self.state.positions.clone(),
            unwrapped: self.state.unwrapped.clone(),
        }
    }

    /// Integrate `n_iter` steps, recording a snapshot after every `record_stride`-th one.
    pub fn run(&mut self, n_iter: u64, record_stride: u64) -> Result<Trajectory> {
        if record_stride == 0 || n_iter < record_stride {
            return Err(Error::InvalidParameter(format!(
                "need n_iter >= record_stride >= 1, got n_iter={n_iter}, stride={record_stride}"
            )));
        }
        let mut snapshots = Vec::with_capacity((n_iter / record_stride) as usize);
        for _ in 0..n_iter {
            self.step()?;
            if self.state.iteration.is_multiple_of(record_stride) {
                snapshots.push(self.snapshot());
            }
        }
        Ok(Trajectory {
            box_l: self.params.box_l,
            dt: self.params.dt,
            record_stride,
            snapshots,
        })
    }
}

/// Immutable record of the system at one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub iteration: u64,
    pub positions: Vec<Vec2>,
    pub unwrapped: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub box_l: f64,
    pub dt: f64,
    pub record_stride: u64,
    pub snapshots: Vec<Snapshot>,
}

impl Trajectory {
    pub fn n_particles(&self) -> usize {
        self.snapshots.first().map_or(0, |s| s.positions.len())
    }

    /// Snapshots taken at or after `warmup` iterations.
    pub fn after_warmup(&self, warmup: u64) -> &[Snapshot] {
        let start = self
            .snapshots
            .iter()
            .position(|s| s.iteration >= warmup)
            .unwrap_or(self.snapshots.len());
        &self.snapshots[start..]
    }
}

/// Initialise from the seed and integrate.
pub fn run_trajectory(run: &SeededRun, n_iter: u64, record_stride: u64) -> Result<Trajectory> {
    Simulation::from_run(run)?.run(n_iter, record_stride)
}
