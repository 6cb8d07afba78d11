//! APIC particle/grid transfers with quadratic B-splines on the staggered grid.

use crate::error::{Error, Result};
use crate::grid::{Coord, Material, SimGrid};
use crate::particles::{Mat3, ParticleSet, Vec3};

/// Quadratic B-spline stencil along one axis: first node and three weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stencil1 {
    pub base: isize,
    pub w: [f64; 3],
}

/// `xi` is the position in node-index units.
pub fn stencil1(xi: f64) -> Stencil1 {
    let base = (xi - 0.5).floor();
    let fx = xi - base;
    Stencil1 {
        base: base as isize,
        w: [
            0.5 * (1.5 - fx).powi(2),
            0.75 - (fx - 1.0).powi(2),
            0.5 * (fx - 0.5).powi(2),
        ],
    }
}

/// Weights of one particle onto the faces normal to `axis`.
pub struct FaceStencil {
    pub base: Coord,
    pub w: [[f64; 3]; 3],
}

impl FaceStencil {
    /// Iterates `(face coord, weight, face position - particle position)`.
    pub fn nodes(&self, h: f64, axis: usize, x: Vec3) -> impl Iterator<Item = (Coord, f64, Vec3)> + '_ {
        (0..27).map(move |n| {
            let o = [n / 9, (n / 3) % 3, n % 3];
            let f: Coord = std::array::from_fn(|a| self.base[a] + o[a]);
            let w = self.w[0][o[0]] * self.w[1][o[1]] * self.w[2][o[2]];
            let dpos: Vec3 = std::array::from_fn(|a| face_position(f, a, axis, h) - x[a]);
            (f, w, dpos)
        })
    }
}

/// World coordinate along `a` of face `f` normal to `axis`.
pub fn face_position(f: Coord, a: usize, axis: usize, h: f64) -> f64 {
    if a == axis {
        f[a] as f64 * h
    } else {
        (f[a] as f64 + 0.5) * h
    }
}

pub fn face_stencil(grid: &SimGrid, axis: usize, x: Vec3) -> Result<FaceStencil> {
    let h = grid.spacing();
    let fdims = grid.faces[axis].dims;
    let mut base = [0usize; 3];
    let mut w = [[0.0; 3]; 3];
    for a in 0..3 {
        let xi = if a == axis { x[a] / h } else { x[a] / h - 0.5 };
        let s = stencil1(xi);
        if !xi.is_finite() || s.base < 0 || s.base as usize + 2 >= fdims[a] {
            return Err(Error::Range(format!(
                "particle at {x:?} outside the B-spline support of the grid"
            )));
        }
        base[a] = s.base as usize;
        w[a] = s.w;
    }
    Ok(FaceStencil { base, w })
}

/// `4 / h²`: inverse of the quadratic B-spline inertia tensor.
fn d_inv(h: f64) -> f64 {
    4.0 / (h * h)
}

/// Scatters mass, APIC momentum and volume to the per-material face
/// channels and bins particle mass into cells. Leaves momenta in the
/// velocity buffers; call [`SimGrid::finalize_velocities`] afterwards.
pub fn p2g(particles: &ParticleSet, grid: &mut SimGrid) -> Result<()> {
    let h = grid.spacing();
    for p in 0..particles.len() {
        let x = particles.position[p];
        let v = particles.velocity[p];
        let c = particles.affine[p];
        let m = particles.mass[p];
        let vol = particles.volume[p];
        let mat = particles.material[p];
        let cell: Coord = std::array::from_fn(|a| (x[a] / h).floor().max(0.0) as usize);
        if !grid.contains(cell) || !(0..3).all(|a| x[a] >= 0.0) {
            return Err(Error::Range(format!("particle {p} at {x:?} outside the grid")));
        }
        let ci = grid.cell_index(cell);
        match mat {
            Material::Fluid => grid.fluid_mass[ci] += m,
            Material::Solid => grid.solid_mass[ci] += m,
        }
        for axis in 0..3 {
            let st = face_stencil(grid, axis, x)?;
            let set = &mut grid.faces[axis];
            let fd = set.dims;
            let ch = set.channel_mut(mat);
            for (f, w, dpos) in st.nodes(h, axis, x) {
                let idx = (f[0] * fd[1] + f[1]) * fd[2] + f[2];
                let affine: f64 = (0..3).map(|b| c[axis][b] * dpos[b]).sum();
                ch.mass[idx] += w * m;
                ch.velocity[idx] += w * m * (v[axis] + affine);
                ch.volume[idx] += w * vol;
            }
        }
    }
    Ok(())
}

/// Gathers velocity and the APIC affine matrix for every particle from its
/// own material channel. Positions are not touched.
pub fn g2p(grid: &SimGrid, particles: &mut ParticleSet) -> Result<()> {
    let h = grid.spacing();
    let dinv = d_inv(h);
    for p in 0..particles.len() {
        let x = particles.position[p];
        let mat = particles.material[p];
        let mut v = [0.0; 3];
        let mut c: Mat3 = [[0.0; 3]; 3];
        for axis in 0..3 {
            let st = face_stencil(grid, axis, x)?;
            let set = &grid.faces[axis];
            let ch = set.channel(mat);
            for (f, w, dpos) in st.nodes(h, axis, x) {
                let u = ch.velocity[set.index(f)];
                v[axis] += w * u;
                for b in 0..3 {
                    c[axis][b] += w * u * dpos[b] * dinv;
                }
            }
        }
        particles.velocity[p] = v;
        particles.affine[p] = c;
    }
    Ok(())
}
