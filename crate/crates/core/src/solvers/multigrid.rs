use std::collections::HashMap;

use super::gauss_seidel::{sweep_backward, sweep_forward};
use crate::grid::Coord;
use crate::sparse::{CsrMatrix, RowLayout};

const SMOOTH_SWEEPS: usize = 3;
const COARSEST_ROWS: usize = 64;

struct Level {
    a: CsrMatrix,
    diag: Vec<f64>,
    /// Prolongation from the next coarser level.
    p: CsrMatrix,
    /// Restriction `Pᵀ`.
    r: CsrMatrix,
}

/// Geometric multigrid V-cycle over a matrix whose rows sit on grid cells.
///
/// Coarse cells are 2x2x2 blocks of fine cells. Prolongation is cell-centred
/// trilinear interpolation (weights 3/4 and 1/4 per axis, renormalised where
/// a coarse neighbour has no unknown), restriction is its transpose and the
/// coarse operators are Galerkin products, so the cycle is a symmetric
/// positive definite preconditioner whenever the matrix is.
pub struct Multigrid {
    levels: Vec<Level>,
    coarse: DenseLdl,
}

impl Multigrid {
    /// `None` when the matrix has no grid layout or two rows share a cell.
    pub fn build(a: &CsrMatrix) -> Option<Self> {
        let layout = a.layout()?.clone();
        let mut levels = Vec::new();
        let mut current = a.clone();
        let mut layout = layout;
        while current.nrows() > COARSEST_ROWS {
            let (p, coarse_layout) = prolongation(&layout)?;
            if coarse_layout.coords.len() >= current.nrows() {
                break;
            }
            let r = p.transpose();
            let coarse = r.matmul(&current).matmul(&p);
            let diag = current.diagonal();
            levels.push(Level {
                a: current,
                diag,
                p,
                r,
            });
            current = coarse;
            layout = coarse_layout;
        }
        Some(Self {
            levels,
            coarse: DenseLdl::factor(&current),
        })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len() + 1
    }

    /// Applies one V-cycle to `b` from a zero initial guess.
    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        self.cycle(0, b)
    }

    fn cycle(&self, l: usize, b: &[f64]) -> Vec<f64> {
        let Some(level) = self.levels.get(l) else {
            return self.coarse.solve(b);
        };
        let mut x = vec![0.0; b.len()];
        for _ in 0..SMOOTH_SWEEPS {
            sweep_forward(&level.a, &level.diag, b, &mut x);
        }
        let ax = level.a.matvec(&x);
        let res: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
        let bc = level.r.matvec(&res);
        let xc = self.cycle(l + 1, &bc);
        let corr = level.p.matvec(&xc);
        for (x, c) in x.iter_mut().zip(&corr) {
            *x += c;
        }
        for _ in 0..SMOOTH_SWEEPS {
            sweep_backward(&level.a, &level.diag, b, &mut x);
        }
        x
    }
}

fn prolongation(fine: &RowLayout) -> Option<(CsrMatrix, RowLayout)> {
    let mut fine_seen = HashMap::with_capacity(fine.coords.len());
    for (i, c) in fine.coords.iter().enumerate() {
        if fine_seen.insert(*c, i).is_some() {
            return None;
        }
    }
    let dims: Coord = fine.dims.map(|n| n.div_ceil(2));
    let mut coarse_index: HashMap<Coord, usize> = HashMap::new();
    let mut coarse_coords = Vec::new();
    for c in &fine.coords {
        let parent = c.map(|v| v / 2);
        coarse_index.entry(parent).or_insert_with(|| {
            coarse_coords.push(parent);
            coarse_coords.len() - 1
        });
    }
    // Lexicographic coarse ordering keeps the Galerkin operator banded.
    let mut order: Vec<usize> = (0..coarse_coords.len()).collect();
    order.sort_by_key(|&i| coarse_coords[i]);
    let sorted: Vec<Coord> = order.iter().map(|&i| coarse_coords[i]).collect();
    let index: HashMap<Coord, usize> = sorted.iter().enumerate().map(|(i, c)| (*c, i)).collect();

    let mut trip = Vec::with_capacity(8 * fine.coords.len());
    for (row, c) in fine.coords.iter().enumerate() {
        let mut axis_opts = [[(0usize, 0.0f64); 2]; 3];
        let mut axis_len = [1usize; 3];
        for a in 0..3 {
            let parent = c[a] / 2;
            axis_opts[a][0] = (parent, 0.75);
            let other = if c[a] % 2 == 0 {
                parent.checked_sub(1)
            } else {
                Some(parent + 1).filter(|&v| v < dims[a])
            };
            if let Some(o) = other {
                axis_opts[a][1] = (o, 0.25);
                axis_len[a] = 2;
            }
        }
        let mut entries = Vec::with_capacity(8);
        let mut total = 0.0;
        for x in &axis_opts[0][..axis_len[0]] {
            for y in &axis_opts[1][..axis_len[1]] {
                for z in &axis_opts[2][..axis_len[2]] {
                    if let Some(&col) = index.get(&[x.0, y.0, z.0]) {
                        let w = x.1 * y.1 * z.1;
                        entries.push((col, w));
                        total += w;
                    }
                }
            }
        }
        for (col, w) in entries {
            trip.push((row, col, w / total));
        }
    }
    let p = CsrMatrix::from_triplets(fine.coords.len(), sorted.len(), trip);
    Some((p, RowLayout { dims, coords: sorted }))
}

/// Dense `L D Lᵀ` factorisation for the coarsest level. Pivots that vanish
/// relative to the matrix scale are dropped, which projects out null-space
/// directions of semidefinite operators instead of dividing by zero.
struct DenseLdl {
    n: usize,
    l: Vec<f64>,
    d_inv: Vec<f64>,
}

impl DenseLdl {
    fn factor(a: &CsrMatrix) -> Self {
        let n = a.nrows();
        let mut m = vec![0.0; n * n];
        for (r, c, v) in a.triplets() {
            m[r * n + c] += v;
        }
        let scale = (0..n).map(|i| m[i * n + i].abs()).fold(0.0, f64::max);
        let threshold = 1e-12 * scale.max(f64::MIN_POSITIVE);
        let mut l = vec![0.0; n * n];
        let mut d = vec![0.0; n];
        for j in 0..n {
            let mut dj = m[j * n + j];
            for k in 0..j {
                dj -= l[j * n + k] * l[j * n + k] * d[k];
            }
            d[j] = dj;
            l[j * n + j] = 1.0;
            for i in j + 1..n {
                let mut s = m[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k] * d[k];
                }
                l[i * n + j] = if dj.abs() > threshold { s / dj } else { 0.0 };
            }
        }
        let d_inv = d
            .iter()
            .map(|&v| if v.abs() > threshold { 1.0 / v } else { 0.0 })
            .collect();
        Self { n, l, d_inv }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[i * n + k] * y[k];
            }
        }
        for i in 0..n {
            y[i] *= self.d_inv[i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.l[k * n + i] * y[k];
            }
        }
        y
    }
}
