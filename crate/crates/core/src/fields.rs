//! Sparse pressure fields and their dense, padded tensor form.

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Coord;
use crate::normalize::{denormalize_slice, normalize_slice};

/// Cells of padding on each side of every axis.
pub const PAD: usize = 2;

const PGT_MAGIC: &[u8; 4] = b"PGT1";

/// Values sampled at integer node coordinates.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub values: Vec<f64>,
    pub coords: Vec<Coord>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>, coords: Vec<Coord>) -> Result<Self> {
        let f = Self { values, coords };
        f.check_lengths("field")?;
        Ok(f)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same coordinates, all values zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            values: vec![0.0; self.coords.len()],
            coords: self.coords.clone(),
        }
    }

    fn check_lengths(&self, name: &str) -> Result<()> {
        if self.values.len() != self.coords.len() {
            return Err(Error::Consistency(format!(
                "{name}: {} values but {} coordinates",
                self.values.len(),
                self.coords.len()
            )));
        }
        Ok(())
    }
}

/// The four solved pressure unknowns with their node coordinates.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PressureFields {
    pub p_fluid: ScalarField,
    pub p_solid: ScalarField,
    pub y_slip: ScalarField,
    pub h_interface: ScalarField,
}

impl PressureFields {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in self.named() {
            f.check_lengths(name)?;
            let mut seen = HashSet::with_capacity(f.len());
            for c in &f.coords {
                if !seen.insert(*c) {
                    return Err(Error::Consistency(format!(
                        "{name}: duplicate coordinate {c:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, &ScalarField); 4] {
        [
            ("p_fluid", &self.p_fluid),
            ("p_solid", &self.p_solid),
            ("y_slip", &self.y_slip),
            ("h_interface", &self.h_interface),
        ]
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            p_fluid: self.p_fluid.zeros_like(),
            p_solid: self.p_solid.zeros_like(),
            y_slip: self.y_slip.zeros_like(),
            h_interface: self.h_interface.zeros_like(),
        }
    }

    pub fn total_len(&self) -> usize {
        self.p_fluid.len() + self.p_solid.len() + self.y_slip.len() + self.h_interface.len()
    }

    /// Values in system order: solid, fluid, slip, interface.
    pub fn to_system_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.total_len());
        v.extend_from_slice(&self.p_solid.values);
        v.extend_from_slice(&self.p_fluid.values);
        v.extend_from_slice(&self.y_slip.values);
        v.extend_from_slice(&self.h_interface.values);
        v
    }

    /// Inverse of [`Self::to_system_vector`], reusing this instance's coordinates.
    pub fn with_system_vector(&self, x: &[f64]) -> Result<Self> {
        if x.len() != self.total_len() {
            return Err(Error::Consistency(format!(
                "system vector has {} entries, fields have {}",
                x.len(),
                self.total_len()
            )));
        }
        let mut out = self.clone();
        let mut off = 0;
        for f in [
            &mut out.p_solid,
            &mut out.p_fluid,
            &mut out.y_slip,
            &mut out.h_interface,
        ] {
            let n = f.len();
            f.values.copy_from_slice(&x[off..off + n]);
            off += n;
        }
        Ok(out)
    }
}

/// Dense padded three-channel pressure volume.
///
/// Channel 0 holds fluid and slip-boundary pressure, channel 1 solid
/// pressure, channel 2 interface pressure.
#[derive(Clone, Debug, PartialEq)]
pub struct PressureTensors {
    shape: Coord,
    pub frame_index: u32,
    pub fluid: Vec<f32>,
    pub solid: Vec<f32>,
    pub interface: Vec<f32>,
}

impl PressureTensors {
    pub fn zeros(shape: Coord, frame_index: u32) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            frame_index,
            fluid: vec![0.0; n],
            solid: vec![0.0; n],
            interface: vec![0.0; n],
        }
    }

    /// Padded tensor for an unpadded grid of `dims` nodes.
    pub fn for_grid(dims: Coord, frame_index: u32) -> Self {
        Self::zeros(padded_shape(dims), frame_index)
    }

    pub fn shape(&self) -> Coord {
        self.shape
    }

    /// Unpadded grid dims this tensor covers.
    pub fn grid_dims(&self) -> Coord {
        self.shape.map(|n| n.saturating_sub(2 * PAD))
    }

    pub fn channels(&self) -> [&[f32]; 3] {
        [&self.fluid, &self.solid, &self.interface]
    }

    pub fn channels_mut(&mut self) -> [&mut Vec<f32>; 3] {
        [&mut self.fluid, &mut self.solid, &mut self.interface]
    }

    pub fn index(&self, c: Coord) -> usize {
        (c[0] * self.shape[1] + c[1]) * self.shape[2] + c[2]
    }

    /// Index of unpadded grid coordinate `c`.
    pub fn grid_index(&self, c: Coord) -> usize {
        self.index(c.map(|v| v + PAD))
    }

    /// Channel-major copy of all three channels.
    pub fn to_flat(&self) -> Vec<f32> {
        let mut v = Vec::with_capacity(3 * self.fluid.len());
        for ch in self.channels() {
            v.extend_from_slice(ch);
        }
        v
    }

    pub fn from_flat(shape: Coord, frame_index: u32, flat: &[f32]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if flat.len() != 3 * n {
            return Err(Error::Shape {
                expected: vec![3, shape[0], shape[1], shape[2]],
                actual: vec![flat.len()],
            });
        }
        Ok(Self {
            shape,
            frame_index,
            fluid: flat[..n].to_vec(),
            solid: flat[n..2 * n].to_vec(),
            interface: flat[2 * n..].to_vec(),
        })
    }

    pub fn normalized(mut self) -> Self {
        for ch in self.channels_mut() {
            normalize_slice(ch);
        }
        self
    }

    pub fn denormalized(mut self) -> Self {
        for ch in self.channels_mut() {
            denormalize_slice(ch);
        }
        self
    }

    pub fn count_nonzero(&self) -> usize {
        self.channels()
            .iter()
            .map(|ch| ch.iter().filter(|v| **v != 0.0).count())
            .sum()
    }

    /// Serializes in the `PGT1` layout: magic, u32 `d h w`, u32 frame, u32
    /// channel count (3), then channel-major row-major little-endian f32.
    pub fn write_pgt<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(PGT_MAGIC)?;
        for v in [self.shape[0], self.shape[1], self.shape[2]] {
            out.write_all(&(v as u32).to_le_bytes())?;
        }
        out.write_all(&self.frame_index.to_le_bytes())?;
        out.write_all(&3u32.to_le_bytes())?;
        let mut buf = Vec::with_capacity(12 * self.fluid.len());
        for ch in self.channels() {
            for v in ch {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_pgt<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != PGT_MAGIC {
            return Err(Error::Format(format!("bad tensor magic {magic:?}")));
        }
        let mut word = || -> Result<u32> {
            let mut b = [0u8; 4];
            input.read_exact(&mut b)?;
            Ok(u32::from_le_bytes(b))
        };
        let shape = [word()? as usize, word()? as usize, word()? as usize];
        let frame_index = word()?;
        let channels = word()?;
        if channels != 3 {
            return Err(Error::Format(format!("expected 3 channels, found {channels}")));
        }
        let n: usize = shape.iter().product();
        let mut bytes = vec![0u8; 12 * n];
        input.read_exact(&mut bytes)?;
        let flat: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        Self::from_flat(shape, frame_index, &flat)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_pgt(std::io::BufWriter::new(file))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_pgt(std::io::BufReader::new(file))
    }
}

pub fn padded_shape(dims: Coord) -> Coord {
    dims.map(|n| n + 2 * PAD)
}

fn check_in_range(name: &str, c: Coord, dims: Coord) -> Result<()> {
    if (0..3).any(|a| c[a] >= dims[a]) {
        return Err(Error::Range(format!(
            "{name}: coordinate {c:?} outside grid {dims:?}"
        )));
    }
    Ok(())
}

/// Scatters the four fields into the three padded channels.
///
/// Fluid and slip values share channel 0 and must not overlap.
pub fn map_fields(fields: &PressureFields, dims: Coord) -> Result<PressureTensors> {
    fields.validate()?;
    for (name, f) in fields.named() {
        for &c in &f.coords {
            check_in_range(name, c, dims)?;
        }
    }
    let mut seen: HashSet<Coord> = fields.p_fluid.coords.iter().copied().collect();
    for c in &fields.y_slip.coords {
        if !seen.insert(*c) {
            return Err(Error::Consistency(format!(
                "slip coordinate {c:?} overlaps a fluid coordinate"
            )));
        }
    }

    let mut t = PressureTensors::for_grid(dims, 0);
    let scatter = |dst: &mut Vec<f32>, f: &ScalarField, shape: Coord| {
        for (v, c) in f.values.iter().zip(&f.coords) {
            let idx = ((c[0] + PAD) * shape[1] + c[1] + PAD) * shape[2] + c[2] + PAD;
            dst[idx] = *v as f32;
        }
    };
    let shape = t.shape;
    scatter(&mut t.fluid, &fields.p_fluid, shape);
    scatter(&mut t.fluid, &fields.y_slip, shape);
    scatter(&mut t.solid, &fields.p_solid, shape);
    scatter(&mut t.interface, &fields.h_interface, shape);
    Ok(t)
}

/// Gathers tensor values back onto the coordinates of `template`.
pub fn invmap(tensors: &PressureTensors, template: &PressureFields) -> Result<PressureFields> {
    let dims = tensors.grid_dims();
    let gather = |src: &[f32], name: &str, f: &ScalarField| -> Result<ScalarField> {
        let mut values = Vec::with_capacity(f.len());
        for &c in &f.coords {
            check_in_range(name, c, dims)?;
            values.push(f64::from(src[tensors.grid_index(c)]));
        }
        Ok(ScalarField {
            values,
            coords: f.coords.clone(),
        })
    };
    Ok(PressureFields {
        p_fluid: gather(&tensors.fluid, "p_fluid", &template.p_fluid)?,
        p_solid: gather(&tensors.solid, "p_solid", &template.p_solid)?,
        y_slip: gather(&tensors.fluid, "y_slip", &template.y_slip)?,
        h_interface: gather(&tensors.interface, "h_interface", &template.h_interface)?,
    })
}
