//! Iterative solvers with warm-start support and residual histories.

mod gauss_seidel;
mod multigrid;
mod pcg;

use std::io::Write;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use gauss_seidel::gauss_seidel;
pub use multigrid::Multigrid;
pub use pcg::mgpcg;

use crate::error::{Error, Result};
use crate::sparse::{norm2, CsrMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    #[serde(alias = "gs")]
    GaussSeidel,
    Mgpcg,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gs" | "gauss-seidel" | "gaussseidel" => Ok(SolverKind::GaussSeidel),
            "mgpcg" | "mg" => Ok(SolverKind::Mgpcg),
            other => Err(Error::Config(format!("unknown solver '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIter,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Relative residual before the first iteration and after each one.
    pub residual_history: Vec<f64>,
    pub wall_time: Duration,
    pub warm_started: bool,
    pub status: SolveStatus,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&0.0)
    }

    /// Turns a capped run into a hard error.
    pub fn require_converged(self, tol: f64) -> Result<Self> {
        match self.status {
            SolveStatus::Converged => Ok(self),
            SolveStatus::MaxIter => Err(Error::NotConverged {
                iterations: self.iterations,
                residual: self.final_residual(),
                tol,
            }),
        }
    }

    /// `iteration,residual` rows.
    pub fn write_history_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iteration,residual")?;
        for (i, r) in self.residual_history.iter().enumerate() {
            writeln!(out, "{i},{r:e}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    /// `None` selects the per-solver default.
    pub max_iter: Option<usize>,
}

impl SolveOptions {
    pub fn tol(tol: f64) -> Self {
        Self { tol, max_iter: None }
    }
}

pub fn default_max_iter(kind: SolverKind, n: usize) -> usize {
    let scale = (n.max(1) as f64).cbrt().ceil() as usize;
    match kind {
        SolverKind::GaussSeidel => 100 * scale,
        SolverKind::Mgpcg => 10 * scale,
    }
}

/// `‖b − A x‖₂ / ‖b‖₂`, with `0/0 = 0` and `r/0 = ∞`.
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
    ratio(norm2(&r), norm2(b))
}

fn ratio(r: f64, b: f64) -> f64 {
    if b > 0.0 {
        r / b
    } else if r == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn solve(
    kind: SolverKind,
    a: &CsrMatrix,
    b: &[f64],
    x0: &[f64],
    opts: SolveOptions,
) -> Result<SolveReport> {
    match kind {
        SolverKind::GaussSeidel => gauss_seidel(a, b, x0, opts),
        SolverKind::Mgpcg => mgpcg(a, b, x0, opts),
    }
}

fn check_inputs(a: &CsrMatrix, b: &[f64], x0: &[f64], tol: f64) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Shape {
            expected: vec![a.nrows(), a.nrows()],
            actual: vec![a.nrows(), a.ncols()],
        });
    }
    for v in [b, x0] {
        if v.len() != a.nrows() {
            return Err(Error::Shape {
                expected: vec![a.nrows()],
                actual: vec![v.len()],
            });
        }
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

fn check_diagonal(a: &CsrMatrix) -> Result<Vec<f64>> {
    let diag = a.diagonal();
    if let Some(row) = diag.iter().position(|&d| d == 0.0) {
        return Err(Error::Singular {
            row,
            coord: a.row_coord(row),
        });
    }
    Ok(diag)
}

/// Handles the `b = 0` convention shared by every solver: return `x0` if it
/// already solves the system, otherwise the zero vector.
fn zero_rhs_report(a: &CsrMatrix, x0: &[f64], warm: bool) -> SolveReport {
    let solution = if norm2(&a.matvec(x0)) == 0.0 {
        x0.to_vec()
    } else {
        vec![0.0; x0.len()]
    };
    SolveReport {
        solution,
        iterations: 0,
        residual_history: vec![0.0],
        wall_time: Duration::ZERO,
        warm_started: warm,
        status: SolveStatus::Converged,
    }
}

/// Wall clock that degrades to a no-op where `Instant` is unavailable.
struct Clock {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Clock {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn elapsed(&self) -> Duration {
        #[cfg(not(target_arch = "wasm32"))]
        return self.start.elapsed();
        #[cfg(target_arch = "wasm32")]
        Duration::ZERO
    }
}
