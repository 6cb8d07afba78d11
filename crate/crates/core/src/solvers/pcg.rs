use super::multigrid::Multigrid;
use super::{check_diagonal, check_inputs, ratio, zero_rhs_report, Clock, SolveOptions};
use super::{default_max_iter, SolveReport, SolveStatus, SolverKind};
use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, CsrMatrix};

enum Preconditioner {
    Multigrid(Multigrid),
    Jacobi(Vec<f64>),
}

impl Preconditioner {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        match self {
            Preconditioner::Multigrid(mg) => mg.apply(r),
            Preconditioner::Jacobi(inv) => r.iter().zip(inv).map(|(r, d)| r * d).collect(),
        }
    }
}

/// Conjugate gradient preconditioned by a geometric multigrid V-cycle.
///
/// Matrices without a row layout fall back to Jacobi preconditioning.
pub fn mgpcg(a: &CsrMatrix, b: &[f64], x0: &[f64], opts: SolveOptions) -> Result<SolveReport> {
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
        .unwrap_or_else(|| default_max_iter(SolverKind::Mgpcg, a.nrows()));

    let mut x = x0.to_vec();
    let ax = a.matvec(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
    let mut res = ratio(norm2(&r), bn);
    let mut history = vec![res];
    let mut iterations = 0;

    if res > opts.tol && max_iter > 0 {
        let precond = match Multigrid::build(a) {
            Some(mg) => Preconditioner::Multigrid(mg),
            None => Preconditioner::Jacobi(diag.iter().map(|d| 1.0 / d).collect()),
        };
        let mut z = precond.apply(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; a.nrows()];
        while res > opts.tol && iterations < max_iter {
            a.matvec_into(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::Indefinite(pap));
            }
            let alpha = rz / pap;
            for i in 0..x.len() {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;
            res = ratio(norm2(&r), bn);
            history.push(res);
            if res <= opts.tol {
                break;
            }
            z = precond.apply(&r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..p.len() {
                p[i] = z[i] + beta * p[i];
            }
        }
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
