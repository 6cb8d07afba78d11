use super::{check_diagonal, check_inputs, ratio, zero_rhs_report, Clock, SolveOptions};
use super::{default_max_iter, SolveReport, SolveStatus, SolverKind};
use crate::error::Result;
use crate::sparse::{norm2, CsrMatrix};

/// One lexicographic sweep, in place.
pub(crate) fn sweep_forward(a: &CsrMatrix, diag: &[f64], b: &[f64], x: &mut [f64]) {
    for i in 0..a.nrows() {
        relax(a, diag, b, x, i);
    }
}

/// Reverse-order sweep; pairs with [`sweep_forward`] to make a symmetric smoother.
pub(crate) fn sweep_backward(a: &CsrMatrix, diag: &[f64], b: &[f64], x: &mut [f64]) {
    for i in (0..a.nrows()).rev() {
        relax(a, diag, b, x, i);
    }
}

#[inline]
fn relax(a: &CsrMatrix, diag: &[f64], b: &[f64], x: &mut [f64], i: usize) {
    if diag[i] == 0.0 {
        return;
    }
    let (cols, vals) = a.row(i);
    let mut s = b[i];
    for (&j, &v) in cols.iter().zip(vals) {
        if j != i {
            s -= v * x[j];
        }
    }
    x[i] = s / diag[i];
}

fn residual_norm(a: &CsrMatrix, b: &[f64], x: &[f64], scratch: &mut [f64]) -> f64 {
    a.matvec_into(x, scratch);
    let r: f64 = b.iter().zip(scratch.iter()).map(|(b, ax)| (b - ax) * (b - ax)).sum();
    r.sqrt()
}

/// Gauss-Seidel iteration from `x0`, stopping on the relative residual.
pub fn gauss_seidel(a: &CsrMatrix, b: &[f64], x0: &[f64], opts: SolveOptions) -> Result<SolveReport> {
    check_inputs(a, b, x0, opts.tol)?;
    let diag = check_diagonal(a)?;
    let clock = Clock::start();
    let warm = x0.iter().any(|&v| v != 0.0);
    let bn = norm2(b);
    if bn == 0.0 {
        return Ok(zero_rhs_report(a, x0, warm));
    }
    let max_iter = opts
        .max_iter
        .unwrap_or_else(|| default_max_iter(SolverKind::GaussSeidel, a.nrows()));

    let mut x = x0.to_vec();
    let mut scratch = vec![0.0; a.nrows()];
    let mut res = ratio(residual_norm(a, b, &x, &mut scratch), bn);
    let mut history = vec![res];
    let mut iterations = 0;
    while res > opts.tol && iterations < max_iter {
        sweep_forward(a, &diag, b, &mut x);
        iterations += 1;
        res = ratio(residual_norm(a, b, &x, &mut scratch), bn);
        history.push(res);
    }
    let status = if res <= opts.tol {
        SolveStatus::Converged
    } else {
        SolveStatus::MaxIter
    };
    Ok(SolveReport {
        solution: x,
        iterations,
        residual_history: history,
        wall_time: clock.elapsed(),
        warm_started: warm,
        status,
    })
}
