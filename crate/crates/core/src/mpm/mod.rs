//! One physical MPM step: transfer, classify, body forces, pressure
//! projection, transfer back and advection.

mod classify;
mod scene;
mod transfer;

pub use classify::classify_cells;
pub use scene::{SceneConfig, SceneTemplate, Shape, SolidBody};
pub use transfer::{face_stencil, g2p, p2g, stencil1, Stencil1};

use crate::error::Result;
use crate::fields::PressureFields;
use crate::grid::{Material, SimGrid};
use crate::particles::{cross, solve3, ParticleSet};
use crate::pressure::{apply_pressure, assemble, AssembleOptions, BlockSystem};
use crate::solvers::{self, SolveOptions, SolveReport, SolverKind};

/// Grid state after transfer and body forces, with its assembled pressure
/// system, waiting for a pressure solution.
#[derive(Clone, Debug)]
pub struct PreparedStep {
    pub grid: SimGrid,
    pub system: BlockSystem,
    /// Time step actually used (after the CFL clamp).
    pub dt: f64,
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub fields: PressureFields,
    pub report: SolveReport,
    /// Grid after the pressure correction.
    pub grid: SimGrid,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    pub config: SceneConfig,
    pub particles: ParticleSet,
    pub frame: usize,
    pub time: f64,
    previous: Option<PressureFields>,
}

impl Simulation {
    pub fn new(config: SceneConfig) -> Result<Self> {
        let particles = config.seed_particles()?;
        Self::from_particles(config, particles)
    }

    pub fn from_particles(config: SceneConfig, particles: ParticleSet) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            particles,
            frame: 0,
            time: 0.0,
            previous: None,
        })
    }

    /// Pressure solved in the last completed step.
    pub fn previous_pressure(&self) -> Option<&PressureFields> {
        self.previous.as_ref()
    }

    /// Time step clamped so no particle crosses more than one cell.
    pub fn stable_dt(&self) -> f64 {
        let cfg = &self.config;
        let g = cfg.gravity.iter().map(|v| v * v).sum::<f64>().sqrt();
        let vmax = self.particles.max_speed() + g * cfg.dt;
        if vmax * cfg.dt > cfg.spacing {
            let dt = cfg.spacing / vmax;
            log::warn!(
                "frame {}: CFL clamp, dt {} -> {dt} (max speed {vmax})",
                self.frame,
                cfg.dt
            );
            dt
        } else {
            cfg.dt
        }
    }

    /// Grid transfer, classification and gravity, then assembly.
    pub fn prepare(&self) -> Result<PreparedStep> {
        let cfg = &self.config;
        let dt = self.stable_dt();
        let mut grid = SimGrid::new(cfg.dims, cfg.spacing)?;
        p2g(&self.particles, &mut grid)?;
        grid.finalize_velocities();
        classify_cells(&mut grid);
        for (axis, set) in grid.faces.iter_mut().enumerate() {
            let dv = cfg.gravity[axis] * dt;
            for ch in [&mut set.fluid, &mut set.solid] {
                for (v, &m) in ch.velocity.iter_mut().zip(&ch.mass) {
                    if m > 0.0 {
                        *v += dv;
                    }
                }
            }
        }
        enforce_walls(&mut grid);
        let system = assemble(
            &grid,
            AssembleOptions {
                dt,
                bulk_modulus: cfg.bulk_modulus,
            },
            self.previous.as_ref(),
        )?;
        Ok(PreparedStep { grid, system, dt })
    }

    /// Applies a pressure solution and moves the particles.
    pub fn finish(&mut self, prepared: PreparedStep, report: SolveReport) -> Result<StepResult> {
        let PreparedStep {
            mut grid,
            system,
            dt,
        } = prepared;
        let fields = system.fields(&report.solution)?;
        apply_pressure(&mut grid, &system, &report.solution)?;
        enforce_walls(&mut grid);
        let corrected = grid.clone();
        extrapolate(&mut grid, &system);
        g2p(&grid, &mut self.particles)?;
        project_rigid(&mut self.particles);
        advect(&mut self.particles, &self.config, dt);
        self.frame += 1;
        self.time += dt;
        self.previous = Some(fields.clone());
        Ok(StepResult {
            fields,
            report,
            grid: corrected,
            dt,
        })
    }

    /// Solves the prepared system from `x0` (zero when `None`).
    pub fn solve(
        &self,
        prepared: &PreparedStep,
        x0: Option<&[f64]>,
        solver: SolverKind,
        tol: f64,
    ) -> Result<SolveReport> {
        let n = prepared.system.len();
        let zeros;
        let x0 = match x0 {
            Some(x) => x,
            None => {
                zeros = vec![0.0; n];
                &zeros
            }
        };
        solvers::solve(
            solver,
            prepared.system.matrix(),
            &prepared.system.rhs,
            x0,
            SolveOptions::tol(tol),
        )?
        .require_converged(tol)
    }

    /// A full cold-started physical step with the scene's solver settings.
    pub fn step(&mut self) -> Result<StepResult> {
        let (solver, tol) = (self.config.solver, self.config.tol);
        self.step_with(solver, tol)
    }

    pub fn step_with(&mut self, solver: SolverKind, tol: f64) -> Result<StepResult> {
        let frame = self.frame;
        let run = |sim: &mut Self| -> Result<StepResult> {
            let prepared = sim.prepare()?;
            let report = sim.solve(&prepared, None, solver, tol)?;
            sim.finish(prepared, report)
        };
        run(self).map_err(|e| e.at_frame(frame))
    }
}

/// Zero normal velocity on the faces between wall and interior.
pub fn enforce_walls(grid: &mut SimGrid) {
    for axis in 0..3 {
        let dims = grid.faces[axis].dims;
        for fi in 0..grid.faces[axis].len() {
            let f = [fi / (dims[1] * dims[2]), (fi / dims[2]) % dims[1], fi % dims[2]];
            if grid.is_boundary_face(axis, f) {
                grid.faces[axis].fluid.velocity[fi] = 0.0;
                grid.faces[axis].solid.velocity[fi] = 0.0;
            }
        }
    }
}

/// Fills faces that carry mass but took no part in the projection with the
/// mean of their projected same-axis neighbours, so particles near the free
/// surface and along walls do not pick up unprojected velocities.
fn extrapolate(grid: &mut SimGrid, system: &BlockSystem) {
    for mat in [Material::Fluid, Material::Solid] {
        let mut valid: [Vec<bool>; 3] =
            std::array::from_fn(|a| vec![false; grid.faces[a].len()]);
        for t in &system.faces {
            let scale = match mat {
                Material::Fluid => t.fluid_scale,
                Material::Solid => t.solid_scale,
            };
            if scale > 0.0 {
                valid[t.axis][t.face] = true;
            }
        }
        if mat == Material::Fluid {
            for &(axis, fi) in &system.pinned {
                valid[axis][fi] = true;
            }
        }
        for (axis, v) in valid.iter_mut().enumerate() {
            let set = &grid.faces[axis];
            for (fi, ok) in v.iter_mut().enumerate() {
                if grid.is_boundary_face(axis, set.coord(fi)) {
                    *ok = true;
                }
            }
        }
        // Corner faces of the wall layer sit up to three steps from a
        // projected face.
        for _ in 0..3 {
            for axis in 0..3 {
                let set = &grid.faces[axis];
                let dims = set.dims;
                let ch = set.channel(mat);
                let mut updates = Vec::new();
                for fi in 0..set.len() {
                    if valid[axis][fi] || ch.mass[fi] <= 0.0 {
                        continue;
                    }
                    let f = set.coord(fi);
                    let mut sum = 0.0;
                    let mut count = 0;
                    for a in 0..3 {
                        for d in [-1isize, 1] {
                            let nb = f[a] as isize + d;
                            if nb < 0 || nb as usize >= dims[a] {
                                continue;
                            }
                            let mut g = f;
                            g[a] = nb as usize;
                            let gi = set.index(g);
                            if valid[axis][gi] && ch.mass[gi] > 0.0 {
                                sum += ch.velocity[gi];
                                count += 1;
                            }
                        }
                    }
                    if count > 0 {
                        updates.push((fi, sum / count as f64));
                    }
                }
                let ch = grid.faces[axis].channel_mut(mat);
                for &(fi, v) in &updates {
                    ch.velocity[fi] = v;
                }
                for (fi, _) in updates {
                    valid[axis][fi] = true;
                }
            }
        }
    }
}

/// Replaces each solid body's particle velocities with the best rigid
/// motion (mass-weighted linear and angular momentum match).
pub fn project_rigid(particles: &mut ParticleSet) {
    for body in particles.bodies() {
        let idx: Vec<usize> = (0..particles.len())
            .filter(|&i| particles.body[i] == Some(body))
            .collect();
        let mass: f64 = idx.iter().map(|&i| particles.mass[i]).sum();
        let mut com = [0.0; 3];
        let mut mom = [0.0; 3];
        for &i in &idx {
            let m = particles.mass[i];
            for a in 0..3 {
                com[a] += m * particles.position[i][a] / mass;
                mom[a] += m * particles.velocity[i][a];
            }
        }
        let vel = mom.map(|p| p / mass);
        let mut ang = [0.0; 3];
        let mut inertia = [[0.0; 3]; 3];
        for &i in &idx {
            let m = particles.mass[i];
            let r: [f64; 3] = std::array::from_fn(|a| particles.position[i][a] - com[a]);
            let l = cross(r, particles.velocity[i]);
            let r2: f64 = r.iter().map(|v| v * v).sum();
            for a in 0..3 {
                ang[a] += m * l[a];
                for b in 0..3 {
                    let delta = if a == b { r2 } else { 0.0 };
                    inertia[a][b] += m * (delta - r[a] * r[b]);
                }
            }
        }
        let omega = solve3(inertia, ang).unwrap_or([0.0; 3]);
        // Gradient of v(x) = V + ω × (x − c) is the cross-product matrix of ω.
        let skew = [
            [0.0, -omega[2], omega[1]],
            [omega[2], 0.0, -omega[0]],
            [-omega[1], omega[0], 0.0],
        ];
        for &i in &idx {
            let r: [f64; 3] = std::array::from_fn(|a| particles.position[i][a] - com[a]);
            let w = cross(omega, r);
            particles.velocity[i] = std::array::from_fn(|a| vel[a] + w[a]);
            particles.affine[i] = skew;
        }
    }
}

/// `x += dt v`, clamped strictly inside the interior.
pub fn advect(particles: &mut ParticleSet, config: &SceneConfig, dt: f64) {
    let h = config.spacing;
    let eps = 1e-6 * h;
    for (x, v) in particles.position.iter_mut().zip(&particles.velocity) {
        for a in 0..3 {
            let lo = h + eps;
            let hi = (config.dims[a] - 1) as f64 * h - eps;
            x[a] = (x[a] + dt * v[a]).clamp(lo, hi);
        }
    }
}
