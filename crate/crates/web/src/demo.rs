//! The demo's state and operations, free of any JS types so they run natively too.

use mpm_hybrid::fields::{invmap, map_fields, PressureTensors};
use mpm_hybrid::mpm::{SceneTemplate, Simulation};
use mpm_hybrid::normalize::{denormalize, normalize};
use mpm_hybrid::solvers::{solve, SolveOptions, SolverKind};
use mpm_hybrid::{Error, Result};

pub struct Demo {
    sim: Simulation,
    last: Option<PressureTensors>,
}

/// Residual histories of one frame's solve from zero and from the previous frame.
pub struct Curves {
    pub cold: Vec<f64>,
    pub warm: Vec<f64>,
}

impl Demo {
    pub fn new(template: &str, resolution: usize, seed: u64) -> Result<Self> {
        if !(8..=24).contains(&resolution) {
            return Err(Error::Config(format!("resolution {resolution} outside 8..=24")));
        }
        let cfg = template.parse::<SceneTemplate>()?.build(resolution, seed, 2, 500.0);
        Ok(Self {
            sim: Simulation::new(cfg)?,
            last: None,
        })
    }

    pub fn frame(&self) -> usize {
        self.sim.frame
    }

    pub fn dims(&self) -> [usize; 3] {
        self.sim.config.dims
    }

    pub fn step(&mut self, frames: usize) -> Result<()> {
        for _ in 0..frames {
            let r = self.sim.step()?;
            self.last = Some(map_fields(&r.fields, self.sim.config.dims)?);
        }
        Ok(())
    }

    /// Pressure of one channel (0 fluid, 1 solid, 2 interface) on the grid
    /// plane `axis = index`, row-major over the two remaining axes.
    pub fn slice(&self, channel: usize, axis: usize, index: usize) -> Result<Vec<f32>> {
        let dims = self.dims();
        if channel > 2 || axis > 2 || index >= dims[axis] {
            return Err(Error::Range(format!("no slice channel {channel} axis {axis} index {index}")));
        }
        let Some(t) = &self.last else {
            return Ok(vec![0.0; dims.iter().product::<usize>() / dims[axis]]);
        };
        let (a, b) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let data = t.channels()[channel];
        let mut out = Vec::with_capacity(dims[a] * dims[b]);
        for i in 0..dims[a] {
            for j in 0..dims[b] {
                let mut c = [0; 3];
                c[axis] = index;
                c[a] = i;
                c[b] = j;
                out.push(data[t.grid_index(c)]);
            }
        }
        Ok(out)
    }

    /// Solves the next frame's system twice at `tol` without advancing.
    pub fn residual_curves(&self, solver: &str, tol: f64) -> Result<Curves> {
        let solver: SolverKind = solver.parse()?;
        let prep = self.sim.prepare()?;
        let sys = &prep.system;
        let zeros = vec![0.0; sys.len()];
        let warm_start = match &self.last {
            Some(t) => sys.vector(&invmap(t, &sys.template())?)?,
            None => zeros.clone(),
        };
        let opts = SolveOptions::tol(tol);
        let cold = solve(solver, sys.matrix(), &sys.rhs, &zeros, opts)?;
        let warm = solve(solver, sys.matrix(), &sys.rhs, &warm_start, opts)?;
        Ok(Curves {
            cold: cold.residual_history,
            warm: warm.residual_history,
        })
    }
}

/// `n` samples of the log compression over `[lo, hi]`, plus the worst
/// round-trip error over those samples as the last entry.
pub fn normalize_curve(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(hi > lo) || n < 2 || n > 100_000 {
        return Err(Error::Range(format!("bad curve request [{lo}, {hi}] x {n}")));
    }
    let mut out = Vec::with_capacity(n + 1);
    let mut worst = 0.0f64;
    for k in 0..n {
        let x = lo + (hi - lo) * k as f64 / (n - 1) as f64;
        let y = normalize(x);
        worst = worst.max((denormalize(y) - x).abs() / x.abs().max(1.0));
        out.push(y);
    }
    out.push(worst);
    Ok(out)
}
