use crate::grid::{CellLabel, SimGrid};

/// Labels interior cells from the binned per-material cell masses.
///
/// A fluid-occupied cell becomes `Interface` if it also holds solid mass or
/// touches a solid-occupied cell, else `SlipBoundary` if it touches the
/// wall, else `FreeSurface` if it touches an unoccupied cell, else `Fluid`.
/// Cells with only solid mass are `Solid`; the rest are `Empty`.
pub fn classify_cells(grid: &mut SimGrid) {
    let n = grid.num_cells();
    let mut labels = Vec::with_capacity(n);
    for idx in 0..n {
        let c = grid.cell_coord(idx);
        if grid.is_wall_cell(c) {
            labels.push(CellLabel::Wall);
            continue;
        }
        let fluid = grid.fluid_mass[idx] > 0.0;
        let solid = grid.solid_mass[idx] > 0.0;
        let label = if fluid {
            let mut touches_solid = solid;
            let mut touches_wall = false;
            let mut touches_empty = false;
            for axis in 0..3 {
                for dir in [-1, 1] {
                    let Some(nb) = grid.neighbor(c, axis, dir) else {
                        continue;
                    };
                    if grid.is_wall_cell(nb) {
                        touches_wall = true;
                        continue;
                    }
                    let ni = grid.cell_index(nb);
                    if grid.solid_mass[ni] > 0.0 {
                        touches_solid = true;
                    } else if grid.fluid_mass[ni] <= 0.0 {
                        touches_empty = true;
                    }
                }
            }
            if touches_solid {
                CellLabel::Interface
            } else if touches_wall {
                CellLabel::SlipBoundary
            } else if touches_empty {
                CellLabel::FreeSurface
            } else {
                CellLabel::Fluid
            }
        } else if solid {
            CellLabel::Solid
        } else {
            CellLabel::Empty
        };
        labels.push(label);
    }
    grid.labels = labels;
}
