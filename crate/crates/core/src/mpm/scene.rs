//! Scene descriptions and particle seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Coord, Material};
use crate::particles::{ParticleSet, Vec3};
use crate::solvers::SolverKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Shape {
    /// Axis-aligned box, corners in world units.
    Box { min: Vec3, max: Vec3 },
    Sphere { center: Vec3, radius: f64 },
}

impl Shape {
    pub fn contains(&self, x: Vec3) -> bool {
        match self {
            Shape::Box { min, max } => (0..3).all(|a| x[a] >= min[a] && x[a] < max[a]),
            Shape::Sphere { center, radius } => {
                let d2: f64 = (0..3).map(|a| (x[a] - center[a]).powi(2)).sum();
                d2 < radius * radius
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolidBody {
    pub shape: Shape,
    pub density: f64,
    #[serde(default)]
    pub velocity: Vec3,
}

/// Everything needed to build and step a scene. Serialized as JSON.
///
/// `dims` counts cells including the one-cell wall layer on every side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub name: String,
    pub dims: Coord,
    pub spacing: f64,
    pub dt: f64,
    #[serde(default = "default_gravity")]
    pub gravity: Vec3,
    #[serde(default = "default_fluid_density")]
    pub fluid_density: f64,
    /// Particles seeded per cell; must be a perfect cube.
    #[serde(default = "default_ppc")]
    pub particles_per_cell: u32,
    /// Stiffness of the solid pressure scaling (Pa).
    #[serde(default = "default_bulk_modulus")]
    pub bulk_modulus: f64,
    #[serde(default = "default_solver")]
    pub solver: SolverKind,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub fluid: Vec<Shape>,
    #[serde(default)]
    pub fluid_velocity: Vec3,
    #[serde(default)]
    pub solids: Vec<SolidBody>,
}

fn default_gravity() -> Vec3 {
    [0.0, -9.81, 0.0]
}
fn default_fluid_density() -> f64 {
    1000.0
}
fn default_ppc() -> u32 {
    8
}
fn default_bulk_modulus() -> f64 {
    1.0e6
}
fn default_solver() -> SolverKind {
    SolverKind::Mgpcg
}
fn default_tol() -> f64 {
    1.0e-3
}

impl SceneConfig {
    /// Empty scene with the desk-scale defaults: spacing `1/(n-2)` so the
    /// interior is one unit wide, dt 1 ms.
    pub fn empty(name: &str, n: usize) -> Self {
        Self {
            name: name.to_string(),
            dims: [n, n, n],
            spacing: 1.0 / (n.saturating_sub(2).max(1)) as f64,
            dt: 1.0e-3,
            gravity: default_gravity(),
            fluid_density: default_fluid_density(),
            particles_per_cell: default_ppc(),
            bulk_modulus: default_bulk_modulus(),
            solver: default_solver(),
            tol: default_tol(),
            fluid: Vec::new(),
            fluid_velocity: [0.0; 3],
            solids: Vec::new(),
        }
    }

    /// Interior extent along each axis in world units, as `(lo, hi)`.
    pub fn interior(&self) -> [(f64, f64); 3] {
        self.dims.map(|n| (self.spacing, (n - 1) as f64 * self.spacing))
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&n| n < crate::grid::MIN_DIM) {
            return Err(Error::Config(format!("dims {:?} below 4 per axis", self.dims)));
        }
        if !(self.spacing > 0.0 && self.dt > 0.0) {
            return Err(Error::Config("spacing and dt must be positive".into()));
        }
        let s = (self.particles_per_cell as f64).cbrt().round() as u32;
        if s == 0 || s * s * s != self.particles_per_cell {
            return Err(Error::Config(format!(
                "particles_per_cell {} is not a perfect cube",
                self.particles_per_cell
            )));
        }
        if !(self.fluid_density > 0.0) || self.solids.iter().any(|b| !(b.density > 0.0)) {
            return Err(Error::Config("densities must be positive".into()));
        }
        if !(self.bulk_modulus > 0.0 && self.tol > 0.0) {
            return Err(Error::Config("bulk_modulus and tol must be positive".into()));
        }
        Ok(())
    }

    /// Seeds particles on a regular sub-lattice of every interior cell.
    /// Solid shapes take precedence over fluid where they overlap.
    pub fn seed_particles(&self) -> Result<ParticleSet> {
        self.validate()?;
        let s = (self.particles_per_cell as f64).cbrt().round() as usize;
        let h = self.spacing;
        let vol = h.powi(3) / self.particles_per_cell as f64;
        let mut out = ParticleSet::new();
        for i in 1..self.dims[0] - 1 {
            for j in 1..self.dims[1] - 1 {
                for k in 1..self.dims[2] - 1 {
                    for q in 0..s * s * s {
                        let sub = [q / (s * s), (q / s) % s, q % s];
                        let cell = [i, j, k];
                        let x: Vec3 = std::array::from_fn(|a| {
                            (cell[a] as f64 + (sub[a] as f64 + 0.5) / s as f64) * h
                        });
                        if let Some((b, body)) =
                            self.solids.iter().enumerate().find(|(_, b)| b.shape.contains(x))
                        {
                            out.push(
                                x,
                                body.velocity,
                                body.density * vol,
                                vol,
                                Material::Solid,
                                Some(b as u32),
                            )?;
                        } else if self.fluid.iter().any(|f| f.contains(x)) {
                            out.push(
                                x,
                                self.fluid_velocity,
                                self.fluid_density * vol,
                                vol,
                                Material::Fluid,
                                None,
                            )?;
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneTemplate {
    DamBreak,
    SolidsDrop,
    WaterDrop,
}

impl std::str::FromStr for SceneTemplate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "dam_break" => Ok(Self::DamBreak),
            "solids_drop" => Ok(Self::SolidsDrop),
            "water_drop" => Ok(Self::WaterDrop),
            other => Err(Error::Config(format!("unknown scene template '{other}'"))),
        }
    }
}

impl SceneTemplate {
    pub const ALL: [SceneTemplate; 3] = [Self::DamBreak, Self::SolidsDrop, Self::WaterDrop];

    pub fn name(self) -> &'static str {
        match self {
            Self::DamBreak => "dam_break",
            Self::SolidsDrop => "solids_drop",
            Self::WaterDrop => "water_drop",
        }
    }

    /// Builds the scene at `n` cells per axis. `seed` randomizes solid
    /// placement; `solid_count` and `solid_density` only matter for scenes
    /// with solids.
    pub fn build(self, n: usize, seed: u64, solid_count: usize, solid_density: f64) -> SceneConfig {
        let mut cfg = SceneConfig::empty(self.name(), n);
        let [(lo, hi), _, _] = cfg.interior();
        let span = hi - lo;
        let at = |f: f64| lo + f * span;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut random_solids = |cfg: &mut SceneConfig, y_min: f64, y_max: f64, r: f64| {
            for _ in 0..solid_count {
                let center = [
                    at(rng.gen_range(0.2..0.8)),
                    at(rng.gen_range(y_min..y_max)),
                    at(rng.gen_range(0.2..0.8)),
                ];
                let half = r * span;
                let shape = if rng.gen_bool(0.5) {
                    Shape::Sphere { center, radius: half }
                } else {
                    Shape::Box {
                        min: center.map(|c| c - half),
                        max: center.map(|c| c + half),
                    }
                };
                cfg.solids.push(SolidBody {
                    shape,
                    density: solid_density,
                    velocity: [0.0; 3],
                });
            }
        };
        match self {
            Self::DamBreak => {
                cfg.fluid.push(Shape::Box {
                    min: [at(0.0), at(0.0), at(0.0)],
                    max: [at(0.4), at(0.6), at(1.0)],
                });
                random_solids(&mut cfg, 0.1, 0.3, 0.08);
                // Keep dam-break solids out of the water column.
                for b in &mut cfg.solids {
                    shift_x(&mut b.shape, 0.35 * span);
                }
            }
            Self::SolidsDrop => {
                cfg.fluid.push(Shape::Box {
                    min: [at(0.0), at(0.0), at(0.0)],
                    max: [at(1.0), at(0.35), at(1.0)],
                });
                random_solids(&mut cfg, 0.6, 0.8, 0.1);
            }
            Self::WaterDrop => {
                cfg.fluid.push(Shape::Box {
                    min: [at(0.0), at(0.0), at(0.0)],
                    max: [at(1.0), at(0.3), at(1.0)],
                });
                cfg.fluid.push(Shape::Sphere {
                    center: [at(0.5), at(0.7), at(0.5)],
                    radius: 0.15 * span,
                });
                random_solids(&mut cfg, 0.15, 0.25, 0.07);
            }
        }
        cfg
    }
}

fn shift_x(shape: &mut Shape, dx: f64) {
    match shape {
        Shape::Box { min, max } => {
            min[0] += dx;
            max[0] += dx;
        }
        Shape::Sphere { center, .. } => center[0] += dx,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppc_must_be_cube() {
        let mut cfg = SceneConfig::empty("t", 6);
        cfg.particles_per_cell = 6;
        assert!(cfg.validate().is_err());
        cfg.particles_per_cell = 27;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn full_box_seeds_every_interior_cell() {
        let mut cfg = SceneConfig::empty("t", 6);
        let [(lo, hi), _, _] = cfg.interior();
        cfg.fluid.push(Shape::Box {
            min: [lo; 3],
            max: [hi; 3],
        });
        let p = cfg.seed_particles().unwrap();
        assert_eq!(p.len(), 4 * 4 * 4 * 8);
        let expect = 1000.0 * (4.0 * cfg.spacing).powi(3);
        assert!((p.total_mass() - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn solids_override_fluid() {
        let mut cfg = SceneConfig::empty("t", 8);
        let [(lo, hi), _, _] = cfg.interior();
        cfg.fluid.push(Shape::Box { min: [lo; 3], max: [hi; 3] });
        cfg.solids.push(SolidBody {
            shape: Shape::Box { min: [lo; 3], max: [lo + 2.0 * cfg.spacing; 3] },
            density: 500.0,
            velocity: [0.0; 3],
        });
        let p = cfg.seed_particles().unwrap();
        assert_eq!(p.len(), 6 * 6 * 6 * 8);
        let solids = p.material.iter().filter(|m| **m == Material::Solid).count();
        assert_eq!(solids, 2 * 2 * 2 * 8);
    }

    #[test]
    fn templates_are_seeded_and_json_round_trips() {
        for t in SceneTemplate::ALL {
            let a = t.build(12, 5, 2, 500.0);
            assert_eq!(a, t.build(12, 5, 2, 500.0));
            let json = serde_json::to_string(&a).unwrap();
            let back: SceneConfig = serde_json::from_str(&json).unwrap();
            assert_eq!(back, a);
            assert!(!a.seed_particles().unwrap().is_empty());
        }
        assert_ne!(
            SceneTemplate::SolidsDrop.build(12, 1, 2, 500.0),
            SceneTemplate::SolidsDrop.build(12, 2, 2, 500.0)
        );
    }
}
