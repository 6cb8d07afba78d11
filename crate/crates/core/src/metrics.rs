//! Evaluation metrics: channel PSNR, fluid divergence and interacting complexity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::PressureTensors;
use crate::grid::{CellLabel, SimGrid};

/// Reported when prediction and truth agree exactly.
pub const PSNR_CAP: f64 = 99.0;

/// Smallest admissible β in the complexity measure.
pub const BETA_MIN: f64 = 0.1;

/// `10 lg(peak / MSE)` with the peak not squared, capped at [`PSNR_CAP`].
/// `peak` defaults to `max |truth|`.
pub fn psnr(truth: &[f64], pred: &[f64], peak: Option<f64>) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::Consistency("psnr of empty fields".into()));
    }
    if truth.len() != pred.len() {
        return Err(Error::Shape {
            expected: vec![truth.len()],
            actual: vec![pred.len()],
        });
    }
    let peak = peak.unwrap_or_else(|| truth.iter().fold(0.0, |m, v| m.max(v.abs())));
    if !(peak > 0.0) {
        return Err(Error::Range(format!("psnr peak must be positive, got {peak}")));
    }
    let mse = truth
        .iter()
        .zip(pred)
        .map(|(t, p)| (t - p) * (t - p))
        .sum::<f64>()
        / truth.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (peak / mse).log10()).min(PSNR_CAP))
}

/// PSNR per channel (fluid, solid, interface) of a predicted tensor against
/// the truth, taken over the cells where the truth channel is nonzero.
/// Channels with no such cell give `None`.
pub fn psnr_tensors(truth: &PressureTensors, pred: &PressureTensors) -> Result<[Option<f64>; 3]> {
    if truth.shape() != pred.shape() {
        return Err(Error::Shape {
            expected: truth.shape().to_vec(),
            actual: pred.shape().to_vec(),
        });
    }
    let mut out = [None; 3];
    for (c, (t, p)) in truth.channels().iter().zip(pred.channels()).enumerate() {
        let (tv, pv): (Vec<f64>, Vec<f64>) = t
            .iter()
            .zip(p.iter())
            .filter(|(a, _)| **a != 0.0)
            .map(|(&a, &b)| (a as f64, b as f64))
            .unzip();
        if !tv.is_empty() {
            out[c] = Some(psnr(&tv, &pv, None)?);
        }
    }
    Ok(out)
}

/// Discrete divergence of the fluid channel in one cell (1/time).
pub fn cell_divergence(grid: &SimGrid, c: [usize; 3]) -> f64 {
    let h = grid.spacing();
    (0..3)
        .map(|axis| {
            let set = &grid.faces[axis];
            let lo = set.index(grid.cell_face(c, axis, -1));
            let hi = set.index(grid.cell_face(c, axis, 1));
            (set.fluid.velocity[hi] - set.fluid.velocity[lo]) / h
        })
        .sum()
}

/// `max |∇·v_f|` over fluid, free-surface and slip cells; zero without fluid.
pub fn divergence_max(grid: &SimGrid) -> f64 {
    grid.cells()
        .filter(|&c| grid.label(c).is_fluid())
        .map(|c| cell_divergence(grid, c).abs())
        .fold(0.0, f64::max)
}

/// `lg(β γ Σ|v| / N)` from its ingredients; `-∞` marks a quiescent scene.
pub fn zeta(beta: f64, gamma: f64, speed_sum: f64, cells: usize) -> f64 {
    let arg = beta.max(BETA_MIN) * gamma * speed_sum / cells as f64;
    if arg > 0.0 {
        arg.log10()
    } else {
        f64::NEG_INFINITY
    }
}

/// Interacting complexity of a grid: the speed sum runs over every fluid,
/// solid and interface cell, using mass-weighted cell-centred speeds.
pub fn interacting_complexity(beta: f64, gamma: u32, grid: &SimGrid) -> Result<f64> {
    if gamma == 0 {
        return Err(Error::Range("particles per cell must be at least 1".into()));
    }
    let sum: f64 = grid
        .cells()
        .filter(|&c| {
            let l = grid.label(c);
            l.is_fluid() || matches!(l, CellLabel::Solid | CellLabel::Interface)
        })
        .map(|c| {
            let v = grid.cell_velocity(c);
            (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
        })
        .sum();
    Ok(zeta(beta, f64::from(gamma), sum, grid.num_cells()))
}

pub fn is_quiescent(zeta: f64) -> bool {
    zeta == f64::NEG_INFINITY
}

/// Text form used in CSV and reports.
pub fn format_zeta(zeta: f64) -> String {
    if is_quiescent(zeta) {
        "quiescent".to_string()
    } else {
        format!("{zeta:.6}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub frame_index: usize,
    pub psnr_f: Option<f64>,
    pub psnr_s: Option<f64>,
    pub psnr_i: Option<f64>,
    pub div_max: f64,
    pub zeta: f64,
}

/// Mean over frames at or after `skip` (the warm-up period).
pub fn mean_after(values: &[(usize, f64)], skip: usize) -> Option<f64> {
    let kept: Vec<f64> = values
        .iter()
        .filter(|(f, v)| *f >= skip && v.is_finite())
        .map(|(_, v)| *v)
        .collect();
    (!kept.is_empty()).then(|| kept.iter().sum::<f64>() / kept.len() as f64)
}
