//! Eulerian simulation grid.
//!
//! Cells are indexed `(i, j, k)` = (depth, height, width), row-major, with
//! the height axis pointing up. The outermost layer of cells is a static
//! wall; particles only ever occupy the interior. Velocities are stored on
//! a staggered (MAC) layout: the component along axis `a` lives on the
//! faces normal to `a`, separately for the fluid and solid material
//! channels. Cell-centered velocities are recovered by averaging faces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer cell (node) coordinate `(depth, height, width)`.
pub type Coord = [usize; 3];

/// Vertical axis (gravity acts along `-HEIGHT_AXIS`).
pub const HEIGHT_AXIS: usize = 1;

/// Smallest admissible node count per axis (wall layer plus B-spline support).
pub const MIN_DIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellLabel {
    Fluid,
    Solid,
    Interface,
    SlipBoundary,
    FreeSurface,
    Empty,
    /// The fixed boundary layer around the domain.
    Wall,
}

impl CellLabel {
    /// Cells whose unknown is a fluid pressure (`p_fluid` or `y_slip`).
    pub fn is_fluid(self) -> bool {
        matches!(
            self,
            CellLabel::Fluid | CellLabel::FreeSurface | CellLabel::SlipBoundary
        )
    }

    /// Cells a fluid-channel face may touch.
    pub fn admits_fluid_face(self) -> bool {
        self.is_fluid() || matches!(self, CellLabel::Interface | CellLabel::Empty)
    }

    /// Cells a solid-channel face may touch; empty cells act as a
    /// zero-pressure ghost, as for the fluid free surface.
    pub fn admits_solid_face(self) -> bool {
        matches!(self, CellLabel::Solid | CellLabel::Interface | CellLabel::Empty)
    }

    /// Cells that carry a pressure unknown.
    pub fn is_active(self) -> bool {
        !matches!(self, CellLabel::Empty | CellLabel::Wall)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Material {
    Fluid,
    Solid,
}

/// Per-face accumulators for one material on one face orientation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FaceChannel {
    pub mass: Vec<f64>,
    /// Momentum during transfer, velocity once [`SimGrid::finalize_velocities`] ran.
    pub velocity: Vec<f64>,
    /// Lumped particle volume, used to recover the local rest density.
    pub volume: Vec<f64>,
}

impl FaceChannel {
    fn zeros(n: usize) -> Self {
        Self {
            mass: vec![0.0; n],
            velocity: vec![0.0; n],
            volume: vec![0.0; n],
        }
    }

    fn clear(&mut self) {
        self.mass.iter_mut().for_each(|v| *v = 0.0);
        self.velocity.iter_mut().for_each(|v| *v = 0.0);
        self.volume.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Faces normal to one axis.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceSet {
    pub dims: Coord,
    pub fluid: FaceChannel,
    pub solid: FaceChannel,
}

impl FaceSet {
    pub fn channel(&self, material: Material) -> &FaceChannel {
        match material {
            Material::Fluid => &self.fluid,
            Material::Solid => &self.solid,
        }
    }

    pub fn channel_mut(&mut self, material: Material) -> &mut FaceChannel {
        match material {
            Material::Fluid => &mut self.fluid,
            Material::Solid => &mut self.solid,
        }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, f: Coord) -> usize {
        (f[0] * self.dims[1] + f[1]) * self.dims[2] + f[2]
    }

    pub fn coord(&self, idx: usize) -> Coord {
        let k = idx % self.dims[2];
        let j = (idx / self.dims[2]) % self.dims[1];
        let i = idx / (self.dims[1] * self.dims[2]);
        [i, j, k]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimGrid {
    dims: Coord,
    spacing: f64,
    /// Fluid particle mass binned to the containing cell.
    pub fluid_mass: Vec<f64>,
    /// Solid particle mass binned to the containing cell.
    pub solid_mass: Vec<f64>,
    pub labels: Vec<CellLabel>,
    pub faces: [FaceSet; 3],
}

impl SimGrid {
    pub fn new(dims: Coord, spacing: f64) -> Result<Self> {
        if dims.iter().any(|&n| n < MIN_DIM) {
            return Err(Error::Config(format!(
                "grid dims {dims:?} below minimum {MIN_DIM} per axis"
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Config(format!("invalid spacing {spacing}")));
        }
        let n = dims.iter().product();
        let faces = std::array::from_fn(|axis| {
            let mut fd = dims;
            fd[axis] += 1;
            let len = fd.iter().product();
            FaceSet {
                dims: fd,
                fluid: FaceChannel::zeros(len),
                solid: FaceChannel::zeros(len),
            }
        });
        let mut grid = Self {
            dims,
            spacing,
            fluid_mass: vec![0.0; n],
            solid_mass: vec![0.0; n],
            labels: vec![CellLabel::Empty; n],
            faces,
        };
        grid.reset_labels();
        Ok(grid)
    }

    pub fn dims(&self) -> Coord {
        self.dims
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(3)
    }

    pub fn num_cells(&self) -> usize {
        self.labels.len()
    }

    pub fn cell_index(&self, c: Coord) -> usize {
        (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]
    }

    pub fn cell_coord(&self, idx: usize) -> Coord {
        let k = idx % self.dims[2];
        let j = (idx / self.dims[2]) % self.dims[1];
        let i = idx / (self.dims[1] * self.dims[2]);
        [i, j, k]
    }

    pub fn contains(&self, c: Coord) -> bool {
        (0..3).all(|a| c[a] < self.dims[a])
    }

    pub fn is_wall_cell(&self, c: Coord) -> bool {
        (0..3).any(|a| c[a] == 0 || c[a] + 1 == self.dims[a])
    }

    pub fn label(&self, c: Coord) -> CellLabel {
        self.labels[self.cell_index(c)]
    }

    /// Total binned mass in a cell.
    pub fn cell_mass(&self, c: Coord) -> f64 {
        let i = self.cell_index(c);
        self.fluid_mass[i] + self.solid_mass[i]
    }

    /// Neighbor of `c` one step along `axis` in direction `dir` (`-1` or `+1`).
    pub fn neighbor(&self, c: Coord, axis: usize, dir: i32) -> Option<Coord> {
        let mut n = c;
        if dir < 0 {
            n[axis] = c[axis].checked_sub(1)?;
        } else {
            n[axis] = c[axis] + 1;
            if n[axis] >= self.dims[axis] {
                return None;
            }
        }
        Some(n)
    }

    /// Cells on the low and high side of face `f` normal to `axis`.
    pub fn face_cells(&self, axis: usize, f: Coord) -> (Option<Coord>, Option<Coord>) {
        let lo = if f[axis] == 0 {
            None
        } else {
            let mut c = f;
            c[axis] -= 1;
            Some(c)
        };
        let hi = if f[axis] >= self.dims[axis] { None } else { Some(f) };
        (lo, hi)
    }

    /// Face normal to `axis` on the low (`dir < 0`) or high side of cell `c`.
    pub fn cell_face(&self, c: Coord, axis: usize, dir: i32) -> Coord {
        let mut f = c;
        if dir > 0 {
            f[axis] += 1;
        }
        f
    }

    /// Faces that touch the static wall: their normal velocity is pinned to zero.
    pub fn is_wall_face(&self, axis: usize, f: Coord) -> bool {
        match self.face_cells(axis, f) {
            (Some(lo), Some(hi)) => self.is_wall_cell(lo) || self.is_wall_cell(hi),
            _ => true,
        }
    }

    /// Faces separating the wall layer from the interior, plus the outer
    /// faces of the domain. Their normal velocity is held at zero.
    pub fn is_boundary_face(&self, axis: usize, f: Coord) -> bool {
        match self.face_cells(axis, f) {
            (Some(lo), Some(hi)) => self.is_wall_cell(lo) != self.is_wall_cell(hi),
            _ => true,
        }
    }

    /// Zeroes every transfer accumulator and resets labels.
    pub fn clear(&mut self) {
        self.fluid_mass.iter_mut().for_each(|v| *v = 0.0);
        self.solid_mass.iter_mut().for_each(|v| *v = 0.0);
        for set in &mut self.faces {
            set.fluid.clear();
            set.solid.clear();
        }
        self.reset_labels();
    }

    fn reset_labels(&mut self) {
        for idx in 0..self.labels.len() {
            let c = self.cell_coord(idx);
            self.labels[idx] = if self.is_wall_cell(c) {
                CellLabel::Wall
            } else {
                CellLabel::Empty
            };
        }
    }

    /// Converts accumulated momenta to velocities; faces without mass get zero.
    pub fn finalize_velocities(&mut self) {
        for set in &mut self.faces {
            for ch in [&mut set.fluid, &mut set.solid] {
                for (v, &m) in ch.velocity.iter_mut().zip(&ch.mass) {
                    *v = if m > 0.0 { *v / m } else { 0.0 };
                }
            }
        }
    }

    /// Effective inertia density of a face for the pressure solve: the lumped
    /// mass per cell volume, floored at the local rest density so sparsely
    /// sampled faces near walls and free surfaces do not get spurious kicks.
    pub fn face_density(&self, axis: usize, f: Coord, material: Material) -> f64 {
        let set = &self.faces[axis];
        let ch = set.channel(material);
        let i = set.index(f);
        let m = ch.mass[i];
        if m <= 0.0 {
            return 0.0;
        }
        let lumped = m / self.cell_volume();
        let rest = if ch.volume[i] > 0.0 { m / ch.volume[i] } else { lumped };
        lumped.max(rest)
    }

    /// Cell-centered velocity: per axis the average of the two bounding
    /// faces, mass-weighted across the fluid and solid channels.
    pub fn cell_velocity(&self, c: Coord) -> [f64; 3] {
        let mut v = [0.0; 3];
        for (axis, out) in v.iter_mut().enumerate() {
            let set = &self.faces[axis];
            let mut num = 0.0;
            let mut den = 0.0;
            for dir in [-1, 1] {
                let fi = set.index(self.cell_face(c, axis, dir));
                for ch in [&set.fluid, &set.solid] {
                    num += ch.mass[fi] * ch.velocity[fi];
                    den += ch.mass[fi];
                }
            }
            *out = if den > 0.0 { num / den } else { 0.0 };
        }
        v
    }

    /// Cell-centered velocity of a single material channel (plain face average).
    pub fn cell_velocity_of(&self, c: Coord, material: Material) -> [f64; 3] {
        let mut v = [0.0; 3];
        for (axis, out) in v.iter_mut().enumerate() {
            let set = &self.faces[axis];
            let ch = set.channel(material);
            let lo = set.index(self.cell_face(c, axis, -1));
            let hi = set.index(self.cell_face(c, axis, 1));
            *out = 0.5 * (ch.velocity[lo] + ch.velocity[hi]);
        }
        v
    }

    /// Applies `f(axis, face, velocity)` to every face velocity of a channel.
    pub fn map_face_velocity(
        &mut self,
        material: Material,
        mut f: impl FnMut(usize, Coord, f64) -> f64,
    ) {
        for axis in 0..3 {
            let set = &mut self.faces[axis];
            let dims = set.dims;
            let ch = set.channel_mut(material);
            for (idx, v) in ch.velocity.iter_mut().enumerate() {
                let k = idx % dims[2];
                let j = (idx / dims[2]) % dims[1];
                let i = idx / (dims[1] * dims[2]);
                *v = f(axis, [i, j, k], *v);
            }
        }
    }

    /// Largest face speed component over both channels.
    pub fn max_face_speed(&self) -> f64 {
        self.faces
            .iter()
            .flat_map(|s| s.fluid.velocity.iter().chain(&s.solid.velocity))
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn cells(&self) -> impl Iterator<Item = Coord> + '_ {
        (0..self.num_cells()).map(move |i| self.cell_coord(i))
    }

    pub fn count_label(&self, label: CellLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}
