use super::BlockSystem;
use crate::error::{Error, Result};
use crate::grid::SimGrid;

/// Velocity update `v ← v − Δt M⁻¹ G p` on every free face of both
/// channels, then pins fluid faces that border a solid cell to the solid
/// velocity so fluid cannot flow into it.
pub fn apply_pressure(grid: &mut SimGrid, system: &BlockSystem, x: &[f64]) -> Result<()> {
    if x.len() != system.len() {
        return Err(Error::Consistency(format!(
            "solution has {} entries, system has {}",
            x.len(),
            system.len()
        )));
    }
    if grid.dims() != system.dims() {
        return Err(Error::Consistency(format!(
            "grid {:?} does not match system {:?}",
            grid.dims(),
            system.dims()
        )));
    }
    for t in &system.faces {
        let p = |r: Option<usize>| r.map_or(0.0, |r| x[r]);
        let dp = p(t.hi) - p(t.lo);
        let set = &mut grid.faces[t.axis];
        set.fluid.velocity[t.face] -= t.fluid_scale * dp;
        set.solid.velocity[t.face] -= t.solid_scale * dp;
    }
    for &(axis, fi) in &system.pinned {
        let set = &mut grid.faces[axis];
        set.fluid.velocity[fi] = set.solid.velocity[fi];
    }
    Ok(())
}
