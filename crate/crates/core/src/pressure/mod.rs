//! The symmetric four-block pressure system coupling fluid and solid.
//!
//! Unknowns are ordered by block: solid pressure `p_s`, fluid pressure
//! `p_f` (fluid and free-surface cells), slip-boundary pressure `y`, and
//! interface pressure `h`, each block in lexicographic cell order. Every
//! active cell owns exactly one unknown.
//!
//! All blocks derive from one staggered gradient `G` (difference of the two
//! cell pressures across a face, over `Δx`) restricted to the faces where a
//! material channel is free to move, so
//!
//! ```text
//! A = Δt Gᵀ M⁻¹ G + diag(S / Δt on solid rows)
//! b = Gᵀ v        + S p_old / Δt on solid rows
//! ```
//!
//! which is symmetric by construction. `S = 1/κ` is the solid pressure
//! scaling. On faces between two interface cells the fluid and solid
//! channels are mixed by mass fraction.

mod apply;
mod assemble;

use std::collections::BTreeMap;

pub use apply::apply_pressure;
pub use assemble::{assemble, AssembleOptions};

use crate::error::{Error, Result};
use crate::fields::{PressureFields, ScalarField};
use crate::grid::{CellLabel, Coord};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Block {
    Solid = 0,
    Fluid = 1,
    Slip = 2,
    Interface = 3,
}

impl Block {
    pub const ALL: [Block; 4] = [Block::Solid, Block::Fluid, Block::Slip, Block::Interface];

    pub fn of(label: CellLabel) -> Option<Block> {
        match label {
            CellLabel::Solid => Some(Block::Solid),
            CellLabel::Fluid | CellLabel::FreeSurface => Some(Block::Fluid),
            CellLabel::SlipBoundary => Some(Block::Slip),
            CellLabel::Interface => Some(Block::Interface),
            CellLabel::Empty | CellLabel::Wall => None,
        }
    }

    /// Conventional `Aij` name, 1-based.
    pub fn pair_name(a: Block, b: Block) -> String {
        format!("A{}{}", a as usize + 1, b as usize + 1)
    }
}

/// One face that carries a pressure-gradient velocity update.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct FaceTerm {
    pub axis: usize,
    pub face: usize,
    pub lo: Option<usize>,
    pub hi: Option<usize>,
    /// `Δt / (ρ Δx)` per channel, zero where the channel is not free.
    pub fluid_scale: f64,
    pub solid_scale: f64,
}

#[derive(Clone, Debug)]
pub struct BlockSystem {
    dims: Coord,
    dt: f64,
    offsets: [usize; 5],
    coords: Vec<Coord>,
    /// Upper-triangular block pairs `(i, j)` with `i <= j`.
    blocks: BTreeMap<(Block, Block), CsrMatrix>,
    matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub(crate) faces: Vec<FaceTerm>,
    /// Fluid faces pinned to the solid velocity after the update.
    pub(crate) pinned: Vec<(usize, usize)>,
}

impl BlockSystem {
    pub fn dims(&self) -> Coord {
        self.dims
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    /// Row range of a block.
    pub fn range(&self, b: Block) -> std::ops::Range<usize> {
        self.offsets[b as usize]..self.offsets[b as usize + 1]
    }

    pub fn block_len(&self, b: Block) -> usize {
        self.range(b).len()
    }

    /// Stored block `(a, b)`; only pairs with `a <= b` are stored, the rest
    /// follow by symmetry. Missing pairs are structurally zero.
    pub fn block(&self, a: Block, b: Block) -> Option<&CsrMatrix> {
        self.blocks.get(&(a, b))
    }

    pub fn block_names(&self) -> Vec<String> {
        self.blocks.keys().map(|(a, b)| Block::pair_name(*a, *b)).collect()
    }

    /// The assembled full matrix, with its row layout attached.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn rhs_block(&self, b: Block) -> &[f64] {
        &self.rhs[self.range(b)]
    }

    /// `A x` evaluated block by block, applying the transposed upper blocks
    /// instead of storing the lower triangle.
    pub fn apply_virtual(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.len());
        let mut y = vec![0.0; self.len()];
        for (&(a, b), m) in &self.blocks {
            let (ra, rb) = (self.range(a), self.range(b));
            let part = m.matvec(&x[rb.clone()]);
            for (dst, v) in y[ra.clone()].iter_mut().zip(part) {
                *dst += v;
            }
            if a != b {
                m.matvec_transpose_add(&x[ra], &mut y[rb]);
            }
        }
        y
    }

    /// Zero-valued fields carrying this system's coordinates.
    pub fn template(&self) -> PressureFields {
        let field = |b: Block| ScalarField {
            values: vec![0.0; self.block_len(b)],
            coords: self.coords[self.range(b)].to_vec(),
        };
        PressureFields {
            p_solid: field(Block::Solid),
            p_fluid: field(Block::Fluid),
            y_slip: field(Block::Slip),
            h_interface: field(Block::Interface),
        }
    }

    pub fn fields(&self, x: &[f64]) -> Result<PressureFields> {
        self.template().with_system_vector(x)
    }

    /// System vector from fields that match this system's index maps.
    pub fn vector(&self, fields: &PressureFields) -> Result<Vec<f64>> {
        let t = self.template();
        for ((name, want), (_, got)) in t.named().iter().zip(fields.named()) {
            if want.coords != got.coords || got.values.len() != got.coords.len() {
                return Err(Error::Consistency(format!(
                    "{name} does not match the system index map ({} vs {} entries)",
                    got.coords.len(),
                    want.coords.len()
                )));
            }
        }
        Ok(fields.to_system_vector())
    }

    pub fn write_matrix_market<W: std::io::Write>(&self, out: W) -> Result<()> {
        self.matrix.write_matrix_market(out)
    }
}
