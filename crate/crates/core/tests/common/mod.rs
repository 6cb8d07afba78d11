#![allow(dead_code)]

pub mod gradcheck;
pub mod reference;
pub mod stencil;

use mpm_hybrid::nn::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: [usize; 4], scale: f32) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

/// Values bounded away from zero so leaky ReLU kinks stay out of reach of the
/// finite-difference step.
pub fn off_kink_tensor(rng: &mut ChaCha8Rng, shape: [usize; 4]) -> Tensor {
    let mut t = random_tensor(rng, shape, 1.0);
    for v in &mut t.data {
        *v = v.signum() * (0.1 + v.abs());
    }
    t
}

/// Worst relative error between analytic gradients and central differences
/// of an f64 reference over `picks` randomly chosen entries. Entries below
/// `1e-3` of the largest gradient are compared against that floor.
pub fn check_entries(
    rng: &mut ChaCha8Rng,
    values: &[f32],
    analytic: &[f32],
    picks: usize,
    mut f: impl FnMut(&[f64]) -> f64,
) -> f64 {
    let mut v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
    let scale = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs() as f64));
    let floor = (1e-3 * scale).max(1e-9);
    let n = v.len();
    let idx: Vec<usize> = if n <= picks {
        (0..n).collect()
    } else {
        (0..picks).map(|_| rng.gen_range(0..n)).collect()
    };
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for i in idx {
        let orig = v[i];
        v[i] = orig + eps;
        let plus = f(&v);
        v[i] = orig - eps;
        let minus = f(&v);
        v[i] = orig;
        let fd = (plus - minus) / (2.0 * eps);
        let a = analytic[i] as f64;
        worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(floor));
    }
    worst
}

/// Largest elementwise gap between a library output and its reference,
/// relative to the reference's largest magnitude.
pub fn forward_gap(lib: &Tensor, reference: &reference::T64) -> f64 {
    assert_eq!(lib.shape, reference.shape);
    let scale = reference.v.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
    lib.data
        .iter()
        .zip(&reference.v)
        .map(|(&a, &b)| (a as f64 - b).abs() / scale)
        .fold(0.0, f64::max)
}

/// Fluid layer plus one or two randomly placed solids, `n` cells per axis.
pub fn mixed_scene(seed: u64, n: usize) -> mpm_hybrid::mpm::SceneConfig {
    use mpm_hybrid::mpm::{SceneConfig, Shape, SolidBody};
    let mut g = rng(seed);
    let mut cfg = SceneConfig::empty(&format!("mixed_{seed}"), n);
    let [(lo, hi), _, _] = cfg.interior();
    let at = |f: f64| lo + f * (hi - lo);
    let level = g.gen_range(0.3..0.7);
    cfg.fluid.push(Shape::Box {
        min: [at(0.0); 3],
        max: [at(1.0), at(level), at(1.0)],
    });
    for _ in 0..g.gen_range(1..=2) {
        let size = g.gen_range(0.3..0.45);
        let min = [
            at(g.gen_range(0.0..1.0 - size)),
            at(g.gen_range(0.0..1.0 - size)),
            at(g.gen_range(0.0..1.0 - size)),
        ];
        cfg.solids.push(SolidBody {
            shape: Shape::Box {
                min,
                max: min.map(|m| m + size * (hi - lo)),
            },
            density: g.gen_range(300.0..2000.0),
            velocity: [g.gen_range(-0.5..0.5), g.gen_range(-0.5..0.5), g.gen_range(-0.5..0.5)],
        });
    }
    cfg
}

/// Variable-coefficient 7-point operator on the cells of a `dims` box that
/// survive `keep`. Missing neighbours inside the box are Neumann; the box
/// edge is Dirichlet zero. Rows carry their cell coordinates.
pub fn poisson(
    dims: [usize; 3],
    g: &mut ChaCha8Rng,
    coef: (f64, f64),
    keep: impl Fn(&mut ChaCha8Rng, [usize; 3]) -> bool,
) -> mpm_hybrid::sparse::CsrMatrix {
    use mpm_hybrid::sparse::{CsrMatrix, RowLayout};
    use std::collections::HashMap;
    let mut coords = Vec::new();
    for z in 0..dims[0] {
        for y in 0..dims[1] {
            for x in 0..dims[2] {
                if keep(g, [z, y, x]) {
                    coords.push([z, y, x]);
                }
            }
        }
    }
    let row: HashMap<[usize; 3], usize> = coords.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let mut trip = Vec::new();
    for (r, &c) in coords.iter().enumerate() {
        for axis in 0..3 {
            // each face once, from its low side; the box edge faces from both
            let mut hi = c;
            hi[axis] += 1;
            if hi[axis] == dims[axis] {
                trip.push((r, r, g.gen_range(coef.0..coef.1)));
            } else if let Some(&q) = row.get(&hi) {
                let k = g.gen_range(coef.0..coef.1);
                trip.extend([(r, r, k), (q, q, k), (r, q, -k), (q, r, -k)]);
            }
            if c[axis] == 0 {
                trip.push((r, r, g.gen_range(coef.0..coef.1)));
            }
        }
    }
    let n = coords.len();
    CsrMatrix::from_triplets(n, n, trip)
        .with_layout(RowLayout { dims, coords })
        .unwrap()
}

/// Dense Cholesky solve, the direct-solver oracle.
pub fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                assert!(s > 0.0, "matrix not positive definite at {i}");
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    x
}

pub fn rel_error(x: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den: f64 = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    num / den
}

/// Seeded SPD test systems: variable-coefficient Poisson problems on random
/// boxes with random holes, at most 500 unknowns.
pub fn spd_systems() -> Vec<(mpm_hybrid::sparse::CsrMatrix, Vec<f64>)> {
    (0..20u64)
        .map(|seed| {
            let mut g = rng(100 + seed);
            let dims = loop {
                let d = [g.gen_range(3..9), g.gen_range(3..9), g.gen_range(3..9)];
                if d.iter().product::<usize>() <= 500 {
                    break d;
                }
            };
            let holes = g.gen_range(0.0..0.2);
            let a = poisson(dims, &mut g, (0.5, 2.0), |g, _| g.gen_range(0.0..1.0) >= holes);
            let b = (0..a.nrows()).map(|_| g.gen_range(-1.0..1.0)).collect();
            (a, b)
        })
        .collect()
}

/// Max fluid divergence times dt after one cold Gauss-Seidel solve of a 16³
/// dam-break at each tolerance, all from the same state 20 frames in.
pub fn dam_break_divergence(tols: &[f64]) -> Vec<f64> {
    use mpm_hybrid::metrics::divergence_max;
    use mpm_hybrid::mpm::{SceneTemplate, Simulation};
    use mpm_hybrid::solvers::SolverKind;
    let mut sim = Simulation::new(SceneTemplate::DamBreak.build(16, 1, 0, 500.0)).unwrap();
    for _ in 0..20 {
        sim.step().unwrap();
    }
    tols.iter()
        .map(|&tol| {
            let mut s = sim.clone();
            let prep = s.prepare().unwrap();
            let report = s.solve(&prep, None, SolverKind::GaussSeidel, tol).unwrap();
            let step = s.finish(prep, report).unwrap();
            divergence_max(&step.grid) * step.dt
        })
        .collect()
}
