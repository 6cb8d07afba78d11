//! Lagrangian material carriers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Material;

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// Structure-of-arrays particle storage.
///
/// `affine` is the APIC matrix `C` with `v(x) ≈ v_p + C (x - x_p)`.
/// Fluid particles carry `body = None`; each solid particle names its rigid body.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParticleSet {
    pub position: Vec<Vec3>,
    pub velocity: Vec<Vec3>,
    pub affine: Vec<Mat3>,
    pub mass: Vec<f64>,
    /// Rest volume; `mass / volume` is the material density.
    pub volume: Vec<f64>,
    pub material: Vec<Material>,
    pub body: Vec<Option<u32>>,
}

impl ParticleSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.position.is_empty()
    }

    pub fn push(
        &mut self,
        position: Vec3,
        velocity: Vec3,
        mass: f64,
        volume: f64,
        material: Material,
        body: Option<u32>,
    ) -> Result<()> {
        if !(mass > 0.0 && volume > 0.0) {
            return Err(Error::Config(format!(
                "particle mass {mass} and volume {volume} must be positive"
            )));
        }
        if (material == Material::Solid) != body.is_some() {
            return Err(Error::Config(
                "solid particles need a body id, fluid particles must not have one".into(),
            ));
        }
        self.position.push(position);
        self.velocity.push(velocity);
        self.affine.push([[0.0; 3]; 3]);
        self.mass.push(mass);
        self.volume.push(volume);
        self.material.push(material);
        self.body.push(body);
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn total_mass_of(&self, material: Material) -> f64 {
        self.mass
            .iter()
            .zip(&self.material)
            .filter(|(_, &m)| m == material)
            .map(|(m, _)| m)
            .sum()
    }

    pub fn momentum(&self) -> Vec3 {
        let mut p = [0.0; 3];
        for (m, v) in self.mass.iter().zip(&self.velocity) {
            for a in 0..3 {
                p[a] += m * v[a];
            }
        }
        p
    }

    pub fn max_speed(&self) -> f64 {
        self.velocity
            .iter()
            .map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
            .fold(0.0, f64::max)
    }

    /// Distinct solid body ids in ascending order.
    pub fn bodies(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.body.iter().flatten().copied().collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Writes the snapshot CSV: `id,material,x,y,z,vx,vy,vz`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "id,material,x,y,z,vx,vy,vz")?;
        for i in 0..self.len() {
            let x = self.position[i];
            let v = self.velocity[i];
            let mat = match self.material[i] {
                Material::Fluid => "fluid",
                Material::Solid => "solid",
            };
            writeln!(
                out,
                "{i},{mat},{},{},{},{},{},{}",
                x[0], x[1], x[2], v[0], v[1], v[2]
            )?;
        }
        Ok(())
    }
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Solves `m x = b` for a symmetric 3x3 matrix; `None` when near-singular.
pub(crate) fn solve3(m: Mat3, b: Vec3) -> Option<Vec3> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let scale = m.iter().flatten().fold(0.0_f64, |s, v| s.max(v.abs()));
    if scale == 0.0 || det.abs() <= 1e-12 * scale.powi(3) {
        return None;
    }
    let mut x = [0.0; 3];
    for (col, out) in x.iter_mut().enumerate() {
        let mut mc = m;
        for row in 0..3 {
            mc[row][col] = b[row];
        }
        let d = mc[0][0] * (mc[1][1] * mc[2][2] - mc[1][2] * mc[2][1])
            - mc[0][1] * (mc[1][0] * mc[2][2] - mc[1][2] * mc[2][0])
            + mc[0][2] * (mc[1][0] * mc[2][1] - mc[1][1] * mc[2][0]);
        *out = d / det;
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_validates() {
        let mut p = ParticleSet::new();
        assert!(p.push([0.0; 3], [0.0; 3], 0.0, 1.0, Material::Fluid, None).is_err());
        assert!(p.push([0.0; 3], [0.0; 3], 1.0, 1.0, Material::Solid, None).is_err());
        assert!(p.push([0.0; 3], [0.0; 3], 1.0, 1.0, Material::Fluid, Some(0)).is_err());
        p.push([0.0; 3], [1.0, 0.0, 0.0], 2.0, 1.0, Material::Fluid, None).unwrap();
        assert_eq!(p.momentum(), [2.0, 0.0, 0.0]);
    }

    #[test]
    fn solve3_matches_hand_solution() {
        let m = [[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]];
        let x = solve3(m, [1.0, 2.0, 3.0]).unwrap();
        for r in 0..3 {
            let lhs: f64 = (0..3).map(|c| m[r][c] * x[c]).sum();
            assert!((lhs - [1.0, 2.0, 3.0][r]).abs() < 1e-12);
        }
        assert!(solve3([[0.0; 3]; 3], [1.0; 3]).is_none());
    }

    #[test]
    fn csv_header_and_rows() {
        let mut p = ParticleSet::new();
        p.push([0.5, 0.25, 1.0], [0.0; 3], 1.0, 1.0, Material::Solid, Some(3)).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("id,material,x,y,z,vx,vy,vz"));
        assert_eq!(lines.next(), Some("0,solid,0.5,0.25,1,0,0,0"));
    }
}
