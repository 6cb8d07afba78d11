use std::collections::HashMap;

use mpm_hybrid::grid::{CellLabel, SimGrid};
use mpm_hybrid::mpm::classify_cells;
use mpm_hybrid::pressure::{assemble, AssembleOptions};
use rand::Rng;

/// Fluid-only 6³ grid with uniform density: the system must be the 7-point
/// Laplacian with Neumann walls and zero pressure in empty cells. Returns the
/// largest matrix and right-hand-side gaps, each relative to its scale.
pub fn fluid_only_errors() -> (f64, f64) {
    let n = 6;
    let h = 0.25;
    let dt = 2e-3;
    let rho = 1000.0;
    let mut grid = SimGrid::new([n; 3], h).unwrap();
    let mut rng = super::rng(5);
    // fluid in the interior up to y = 3, the y = 4 layer is empty
    let is_fluid = |c: [usize; 3]| (1..=4).contains(&c[0]) && (1..=3).contains(&c[1]) && (1..=4).contains(&c[2]);
    for c in grid.cells().collect::<Vec<_>>() {
        if is_fluid(c) {
            let i = grid.cell_index(c);
            grid.fluid_mass[i] = rho * h * h * h;
        }
    }
    classify_cells(&mut grid);
    for axis in 0..3 {
        for fi in 0..grid.faces[axis].len() {
            let f = grid.faces[axis].coord(fi);
            let touches = match grid.face_cells(axis, f) {
                (Some(a), Some(b)) => is_fluid(a) || is_fluid(b),
                _ => false,
            };
            if touches {
                let ch = &mut grid.faces[axis].fluid;
                let m = rho * h * h * h * rng.gen_range(0.3..1.0);
                ch.mass[fi] = m;
                ch.volume[fi] = m / rho;
                ch.velocity[fi] = rng.gen_range(-1.0..1.0);
            }
        }
    }
    let sys = assemble(&grid, AssembleOptions { dt, bulk_modulus: 1e6 }, None).unwrap();

    let row: HashMap<[usize; 3], usize> = sys.coords().iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let active: Vec<[usize; 3]> = grid.cells().filter(|&c| grid.label(c).is_active()).collect();
    assert_eq!(active.len(), 4 * 3 * 4);
    assert_eq!(row.len(), active.len());

    let k = dt / (h * h * rho);
    let m = active.len();
    let mut expect = vec![vec![0.0; m]; m];
    let mut rhs = vec![0.0; m];
    for &c in &active {
        let r = row[&c];
        for axis in 0..3 {
            for dir in [-1isize, 1] {
                let mut nb = c;
                nb[axis] = (c[axis] as isize + dir) as usize;
                if grid.label(nb) == CellLabel::Wall {
                    continue;
                }
                let face = grid.cell_face(c, axis, dir as i32);
                let fi = grid.faces[axis].index(face);
                expect[r][r] += k;
                if let Some(&q) = row.get(&nb) {
                    expect[r][q] -= k;
                }
                // outflow through the high face lowers the right-hand side
                rhs[r] -= dir as f64 * grid.faces[axis].fluid.velocity[fi] / h;
            }
        }
    }
    let got = sys.matrix().to_dense();
    let scale = 6.0 * k;
    let mut matrix = 0.0f64;
    let mut rhs_gap = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            matrix = matrix.max((got[i][j] - expect[i][j]).abs() / scale);
        }
        rhs_gap = rhs_gap.max((sys.rhs[i] - rhs[i]).abs() / rhs[i].abs().max(1.0 / h));
    }
    (matrix, rhs_gap)
}
