use std::collections::{BTreeMap, HashMap};

use super::{Block, BlockSystem, FaceTerm};
use crate::error::{Error, Result};
use crate::fields::PressureFields;
use crate::grid::{CellLabel, Coord, Material, SimGrid};
use crate::sparse::{CsrMatrix, RowLayout};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssembleOptions {
    pub dt: f64,
    /// Solid stiffness κ; the solid pressure scaling is `S = 1/κ`.
    pub bulk_modulus: f64,
}

const STORED_PAIRS: [(Block, Block); 8] = [
    (Block::Solid, Block::Solid),
    (Block::Solid, Block::Interface),
    (Block::Fluid, Block::Fluid),
    (Block::Fluid, Block::Slip),
    (Block::Fluid, Block::Interface),
    (Block::Slip, Block::Slip),
    (Block::Slip, Block::Interface),
    (Block::Interface, Block::Interface),
];

/// Builds the pressure system for a classified grid whose face velocities
/// already include body forces. `previous` supplies last frame's solid
/// pressure for the `S p_old / Δt` term; cells without one use zero.
pub fn assemble(
    grid: &SimGrid,
    opts: AssembleOptions,
    previous: Option<&PressureFields>,
) -> Result<BlockSystem> {
    if !(opts.dt > 0.0 && opts.bulk_modulus > 0.0) {
        return Err(Error::Config("dt and bulk modulus must be positive".into()));
    }
    let dt = opts.dt;
    let h = grid.spacing();

    let mut coords = Vec::new();
    let mut cell_row = vec![None; grid.num_cells()];
    let mut offsets = [0usize; 5];
    for b in Block::ALL {
        for (idx, &label) in grid.labels.iter().enumerate() {
            if Block::of(label) == Some(b) {
                cell_row[idx] = Some(coords.len());
                coords.push(grid.cell_coord(idx));
            }
        }
        offsets[b as usize + 1] = coords.len();
    }
    let n = coords.len();
    let mut rhs = vec![0.0; n];
    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    let mut faces = Vec::new();
    let mut pinned = Vec::new();

    for axis in 0..3 {
        let set = &grid.faces[axis];
        for fi in 0..set.len() {
            let f = set.coord(fi);
            if grid.is_wall_face(axis, f) {
                continue;
            }
            let (Some(lo), Some(hi)) = grid.face_cells(axis, f) else {
                continue;
            };
            let (ll, hl) = (grid.label(lo), grid.label(hi));
            let mf = set.fluid.mass[fi];
            let ms = set.solid.mass[fi];
            let fluid_ok = mf > 0.0
                && ll.admits_fluid_face()
                && hl.admits_fluid_face()
                && (ll.is_active() || hl.is_active());
            let solid_ok = ms > 0.0
                && ll.admits_solid_face()
                && hl.admits_solid_face()
                && (ll.is_active() || hl.is_active());
            if !fluid_ok && mf > 0.0 && (ll == CellLabel::Solid || hl == CellLabel::Solid) {
                pinned.push((axis, fi));
            }
            if !fluid_ok && !solid_ok {
                continue;
            }
            let (tf, ts) = match (fluid_ok, solid_ok) {
                (true, true) => (mf / (mf + ms), ms / (mf + ms)),
                (true, false) => (1.0, 0.0),
                _ => (0.0, 1.0),
            };
            let rho_f = grid.face_density(axis, f, Material::Fluid);
            let rho_s = grid.face_density(axis, f, Material::Solid);
            let inv_f = if tf > 0.0 { tf / rho_f } else { 0.0 };
            let inv_s = if ts > 0.0 { ts / rho_s } else { 0.0 };
            let k = dt / (h * h) * (inv_f + inv_s);
            let flux = tf * set.fluid.velocity[fi] + ts * set.solid.velocity[fi];

            let lo_r = cell_row[grid.cell_index(lo)];
            let hi_r = cell_row[grid.cell_index(hi)];
            if let Some(r) = lo_r {
                trip.push((r, r, k));
                rhs[r] -= flux / h;
            }
            if let Some(r) = hi_r {
                trip.push((r, r, k));
                rhs[r] += flux / h;
            }
            if let (Some(a), Some(b)) = (lo_r, hi_r) {
                trip.push((a, b, -k));
                trip.push((b, a, -k));
            }
            faces.push(FaceTerm {
                axis,
                face: fi,
                lo: lo_r,
                hi: hi_r,
                fluid_scale: if fluid_ok { dt / (rho_f * h) } else { 0.0 },
                solid_scale: if solid_ok { dt / (rho_s * h) } else { 0.0 },
            });
        }
    }

    let s = 1.0 / opts.bulk_modulus;
    let old: HashMap<Coord, f64> = previous
        .map(|p| {
            p.p_solid
                .coords
                .iter()
                .copied()
                .zip(p.p_solid.values.iter().copied())
                .collect()
        })
        .unwrap_or_default();
    for r in offsets[Block::Solid as usize]..offsets[Block::Solid as usize + 1] {
        trip.push((r, r, s / dt));
        rhs[r] += s * old.get(&coords[r]).copied().unwrap_or(0.0) / dt;
    }

    let block_of = |r: usize| -> Block {
        let k = offsets[1..].iter().position(|&o| r < o).expect("row in range");
        Block::ALL[k]
    };
    let mut block_trip: BTreeMap<(Block, Block), Vec<(usize, usize, f64)>> =
        STORED_PAIRS.iter().map(|p| (*p, Vec::new())).collect();
    for &(r, c, v) in &trip {
        let (br, bc) = (block_of(r), block_of(c));
        if br > bc {
            continue;
        }
        let local = (r - offsets[br as usize], c - offsets[bc as usize], v);
        match block_trip.get_mut(&(br, bc)) {
            Some(list) => list.push(local),
            None => {
                return Err(Error::Consistency(format!(
                    "coupling between {br:?} and {bc:?} at cells {:?} and {:?}",
                    coords[r], coords[c]
                )))
            }
        }
    }
    let len = |b: Block| offsets[b as usize + 1] - offsets[b as usize];
    let blocks = block_trip
        .into_iter()
        .map(|((a, b), t)| ((a, b), CsrMatrix::from_triplets(len(a), len(b), t)))
        .collect();
    let matrix = CsrMatrix::from_triplets(n, n, trip).with_layout(RowLayout {
        dims: grid.dims(),
        coords: coords.clone(),
    })?;

    Ok(BlockSystem {
        dims: grid.dims(),
        dt,
        offsets,
        coords,
        blocks,
        matrix,
        rhs,
        faces,
        pinned,
    })
}

