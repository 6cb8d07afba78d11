//! Physical frames followed by predicted-and-refined frames.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{invmap, map_fields, PressureFields, PressureTensors};
use crate::metrics::{divergence_max, interacting_complexity};
use crate::mpm::{PreparedStep, SceneConfig, Simulation, StepResult};
use crate::nn::{SurrogateModel, Tensor};
use crate::pressure::BlockSystem;
use crate::solvers::{self, relative_residual, SolveOptions, SolveReport, SolverKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    pub n_physical: usize,
    pub m_predicted: usize,
    #[serde(default = "default_refine_tol")]
    pub refine_tol: f64,
    #[serde(default = "default_refine_solver")]
    pub refine_solver: SolverKind,
    #[serde(default)]
    pub model: Option<PathBuf>,
    pub scene: SceneConfig,
}

fn default_refine_tol() -> f64 {
    1e-3
}

fn default_refine_solver() -> SolverKind {
    SolverKind::GaussSeidel
}

impl HybridConfig {
    pub fn validate(&self, window: usize) -> Result<()> {
        if self.m_predicted > 0 && self.n_physical < window {
            return Err(Error::Config(format!(
                "n_physical {} is shorter than the predictor window {window}",
                self.n_physical
            )));
        }
        if !(self.refine_tol > 0.0) {
            return Err(Error::Config(format!("refine_tol {} must be positive", self.refine_tol)));
        }
        self.scene.validate()
    }
}

/// What a predictor sees when asked for the next frame.
pub struct PredictContext<'a> {
    /// Normalized pressure tensors of every completed frame, oldest first.
    pub history: &'a [PressureTensors],
    pub prepared: &'a PreparedStep,
}

impl PredictContext<'_> {
    /// Zero pressure on the current frame's unknowns.
    pub fn template(&self) -> PressureFields {
        self.prepared.system.template()
    }
}

/// Source of the initial guess handed to the refinement solve.
pub trait Predictor {
    /// Frames of history needed before the first prediction.
    fn window(&self) -> usize;

    /// Pressure guess on the unknowns of `ctx.prepared`, in physical units.
    fn predict(&mut self, ctx: &PredictContext) -> Result<PressureFields>;
}

/// The trained encoder, ConvLSTM and decoder.
pub struct SurrogatePredictor {
    pub model: SurrogateModel,
}

impl Predictor for SurrogatePredictor {
    fn window(&self) -> usize {
        self.model.config.window
    }

    fn predict(&mut self, ctx: &PredictContext) -> Result<PressureFields> {
        let n = self.window();
        let Some(start) = ctx.history.len().checked_sub(n) else {
            return Err(Error::Config(format!(
                "{} frames of history, predictor needs {n}",
                ctx.history.len()
            )));
        };
        let frames: Vec<Tensor> = ctx.history[start..].iter().map(Tensor::from).collect();
        let next = self.model.predict_frame(&frames)?;
        let tensors = next.to_pressure_tensors(0)?.denormalized();
        invmap(&tensors, &ctx.template())
    }
}

/// Reuses the last frame's pressure, looked up by cell.
pub struct PreviousFramePredictor;

impl Predictor for PreviousFramePredictor {
    fn window(&self) -> usize {
        1
    }

    fn predict(&mut self, ctx: &PredictContext) -> Result<PressureFields> {
        let last = ctx
            .history
            .last()
            .ok_or_else(|| Error::Config("no previous frame".into()))?;
        invmap(&last.clone().denormalized(), &ctx.template())
    }
}

/// Solves the frame's system far below the refinement tolerance.
pub struct ExactPredictor;

impl Predictor for ExactPredictor {
    fn window(&self) -> usize {
        0
    }

    fn predict(&mut self, ctx: &PredictContext) -> Result<PressureFields> {
        let system = &ctx.prepared.system;
        let zeros = vec![0.0; system.len()];
        let report = solvers::solve(SolverKind::Mgpcg, system.matrix(), &system.rhs, &zeros, SolveOptions::tol(1e-12))?;
        system.fields(&report.solution)
    }
}

/// Always predicts zero, which turns refinement into a cold solve.
pub struct ZeroPredictor;

impl Predictor for ZeroPredictor {
    fn window(&self) -> usize {
        0
    }

    fn predict(&mut self, ctx: &PredictContext) -> Result<PressureFields> {
        Ok(ctx.template())
    }
}

/// Warm-started solve from a predicted pressure.
pub fn refine(
    p_hat: &PressureFields,
    system: &BlockSystem,
    tol: f64,
    solver: SolverKind,
) -> Result<(PressureFields, SolveReport)> {
    let x0 = system.vector(p_hat)?;
    let report = solvers::solve(solver, system.matrix(), &system.rhs, &x0, SolveOptions::tol(tol))?
        .require_converged(tol)?;
    let fields = system.fields(&report.solution)?;
    Ok((fields, report))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Physical,
    Predicted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub phase: Phase,
    /// Solver iterations; for predicted frames these are refinement iterations.
    pub refine_iters: usize,
    /// Relative residual of the accepted pressure, recomputed from the matrix.
    pub residual: f64,
    /// Largest fluid divergence times the step, in grid units.
    pub div_max: f64,
    pub zeta: f64,
    pub unknowns: usize,
    pub dt: f64,
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrajectoryStatus {
    Complete,
    /// Stopped at `frame`; earlier frames are valid.
    Failed { frame: usize, message: String },
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub records: Vec<FrameRecord>,
    /// Normalized pressure tensors, one per completed frame.
    pub tensors: Vec<PressureTensors>,
    pub status: TrajectoryStatus,
    pub simulation: Simulation,
}

impl Trajectory {
    pub fn is_complete(&self) -> bool {
        self.status == TrajectoryStatus::Complete
    }

    pub fn total_iterations(&self, phase: Phase) -> usize {
        self.records
            .iter()
            .filter(|r| r.phase == phase)
            .map(|r| r.refine_iters)
            .sum()
    }

    /// Writes `frame_XXXXX.pgt`, `metrics.csv` and `particles.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for t in &self.tensors {
            t.save(&dir.join(frame_file(t.frame_index as usize)))?;
        }
        let mut m = BufWriter::new(fs::File::create(dir.join("metrics.csv"))?);
        writeln!(m, "frame,phase,refine_iters,residual,div_max,zeta,unknowns,dt")?;
        for r in &self.records {
            writeln!(
                m,
                "{},{},{},{:.6e},{:.6e},{},{},{:.6e}",
                r.frame,
                match r.phase {
                    Phase::Physical => "physical",
                    Phase::Predicted => "predicted",
                },
                r.refine_iters,
                r.residual,
                r.div_max,
                crate::metrics::format_zeta(r.zeta),
                r.unknowns,
                r.dt
            )?;
        }
        m.flush()?;
        let p = BufWriter::new(fs::File::create(dir.join("particles.csv"))?);
        self.simulation.particles.write_csv(p)?;
        Ok(())
    }
}

pub fn frame_file(frame: usize) -> String {
    format!("frame_{frame:05}.pgt")
}

fn record(sim: &Simulation, phase: Phase, system_residual: f64, step: &StepResult, started: Instant) -> Result<FrameRecord> {
    let beta = sim.config.solids.len() as f64;
    let zeta = interacting_complexity(beta, sim.config.particles_per_cell as u32, &step.grid)?;
    Ok(FrameRecord {
        frame: sim.frame - 1,
        phase,
        refine_iters: step.report.iterations,
        residual: system_residual,
        div_max: divergence_max(&step.grid) * step.dt,
        zeta,
        unknowns: step.report.solution.len(),
        dt: step.dt,
        wall_time: started.elapsed(),
    })
}

/// Runs `n_physical` cold-solved frames and then `m_predicted` frames whose
/// pressure starts from `predictor` and is refined to `refine_tol`.
/// Failures truncate the trajectory and are reported in its status.
pub fn run(config: &HybridConfig, predictor: &mut dyn Predictor) -> Result<Trajectory> {
    config.validate(predictor.window())?;
    let sim = Simulation::new(config.scene.clone())?;
    Ok(run_from(config, sim, predictor))
}

/// As [`run`], starting from an existing simulation state.
pub fn run_from(config: &HybridConfig, mut sim: Simulation, predictor: &mut dyn Predictor) -> Trajectory {
    let dims = sim.config.dims;
    let mut records = Vec::new();
    let mut tensors: Vec<PressureTensors> = Vec::new();
    let total = config.n_physical + config.m_predicted;
    let (scene_solver, scene_tol) = (sim.config.solver, sim.config.tol);
    let mut status = TrajectoryStatus::Complete;

    for i in 0..total {
        let frame = sim.frame;
        let started = Instant::now();
        let phase = if i < config.n_physical {
            Phase::Physical
        } else {
            Phase::Predicted
        };
        let outcome = (|| -> Result<(FrameRecord, PressureTensors)> {
            let prepared = sim.prepare()?;
            let report = match phase {
                Phase::Physical => sim.solve(&prepared, None, scene_solver, scene_tol)?,
                Phase::Predicted => {
                    let guess = predictor.predict(&PredictContext {
                        history: &tensors,
                        prepared: &prepared,
                    })?;
                    refine(&guess, &prepared.system, config.refine_tol, config.refine_solver)?.1
                }
            };
            let residual = relative_residual(prepared.system.matrix(), &report.solution, &prepared.system.rhs);
            let step = sim.finish(prepared, report)?;
            let mut t = map_fields(&step.fields, dims)?.normalized();
            t.frame_index = frame as u32;
            Ok((record(&sim, phase, residual, &step, started)?, t))
        })();
        match outcome {
            Ok((r, t)) => {
                records.push(r);
                tensors.push(t);
            }
            Err(e) => {
                let e = e.at_frame(frame);
                log::error!("{e}");
                status = TrajectoryStatus::Failed {
                    frame,
                    message: e.to_string(),
                };
                break;
            }
        }
    }
    Trajectory {
        records,
        tensors,
        status,
        simulation: sim,
    }
}
