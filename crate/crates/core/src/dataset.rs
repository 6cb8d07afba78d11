//! Scene generation into directories of normalized tensors plus a manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fields::{map_fields, PressureTensors};
use crate::hybrid::frame_file;
use crate::mpm::{SceneConfig, SceneTemplate, Simulation};
use crate::nn::train::Sequence;
use crate::nn::Tensor;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "mpm-hybrid-dataset";
pub const MANIFEST_VERSION: u32 = 1;

/// A batch of template scenes to generate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetPlan {
    pub templates: Vec<SceneTemplate>,
    pub scenes_per_template: usize,
    pub frames: usize,
    /// Cells per axis, wall layer included.
    pub resolution: usize,
    pub solid_count: usize,
    pub solid_density: f64,
    pub seed: u64,
}

impl Default for DatasetPlan {
    fn default() -> Self {
        Self {
            templates: SceneTemplate::ALL.to_vec(),
            scenes_per_template: 1,
            frames: 60,
            resolution: 16,
            solid_count: 2,
            solid_density: 500.0,
            seed: 0,
        }
    }
}

impl DatasetPlan {
    /// Five scenes of each family, 585 frames, 32 cells per axis.
    pub fn paper() -> Self {
        Self {
            scenes_per_template: 5,
            frames: 585,
            resolution: 32,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.templates.is_empty() || self.scenes_per_template == 0 {
            return Err(Error::Config("dataset plan has no scenes".into()));
        }
        if self.frames == 0 {
            return Err(Error::Config("dataset plan has no frames".into()));
        }
        if self.resolution < 8 {
            return Err(Error::Config(format!("resolution {} is below 8", self.resolution)));
        }
        if !(self.solid_density > 0.0) {
            return Err(Error::Config("solid density must be positive".into()));
        }
        for s in self.scenes() {
            s.validate()?;
        }
        Ok(())
    }

    pub fn num_scenes(&self) -> usize {
        self.templates.len() * self.scenes_per_template
    }

    /// Scene configs with per-scene seeds derived from the plan seed.
    pub fn scenes(&self) -> Vec<SceneConfig> {
        let mut out = Vec::new();
        for (t, template) in self.templates.iter().enumerate() {
            for k in 0..self.scenes_per_template {
                let seed = self.seed.wrapping_mul(1000).wrapping_add((t * 100 + k) as u64);
                let mut cfg = template.build(self.resolution, seed, self.solid_count, self.solid_density);
                cfg.name = format!("{}_{k:02}", template.name());
                out.push(cfg);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the dataset directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum SceneStatus {
    Ok,
    Failed { frame: usize, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub name: String,
    pub config: SceneConfig,
    pub config_hash: String,
    pub frames: usize,
    pub resolution: [usize; 3],
    pub files: Vec<FileEntry>,
    pub status: SceneStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    /// Tensors hold normalized pressure.
    pub normalized: bool,
    pub generator: String,
    pub scenes: Vec<SceneEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn config_hash(cfg: &SceneConfig) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(cfg)?))
}

/// Steps each scene for `frames` frames, writing one normalized tensor per
/// frame under `out_dir/<scene>/`. A failing scene is recorded and the rest
/// still run.
pub fn generate_dataset(scenes: &[SceneConfig], frames: usize, out_dir: &Path) -> Result<DatasetManifest> {
    if scenes.is_empty() {
        return Err(Error::Config("no scenes to generate".into()));
    }
    let mut names: Vec<&str> = scenes.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("scene names must be unique".into()));
    }
    fs::create_dir_all(out_dir)?;
    let mut entries = Vec::with_capacity(scenes.len());
    for cfg in scenes {
        entries.push(generate_scene(cfg, frames, out_dir)?);
    }
    let manifest = DatasetManifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        normalized: true,
        generator: format!("mpm-hybrid {}", env!("CARGO_PKG_VERSION")),
        scenes: entries,
    };
    manifest.save(out_dir)?;
    Ok(manifest)
}

fn generate_scene(cfg: &SceneConfig, frames: usize, out_dir: &Path) -> Result<SceneEntry> {
    cfg.validate()?;
    let dir = out_dir.join(&cfg.name);
    fs::create_dir_all(&dir)?;
    let mut sim = Simulation::new(cfg.clone())?;
    let mut files = Vec::with_capacity(frames);
    let mut status = SceneStatus::Ok;
    for f in 0..frames {
        let step = match sim.step() {
            Ok(s) => s,
            Err(e) => {
                log::error!("scene {}: {e}", cfg.name);
                status = SceneStatus::Failed {
                    frame: f,
                    message: e.to_string(),
                };
                break;
            }
        };
        let mut t = map_fields(&step.fields, cfg.dims)?.normalized();
        t.frame_index = f as u32;
        let mut bytes = Vec::new();
        t.write_pgt(&mut bytes)?;
        let rel = format!("{}/{}", cfg.name, frame_file(f));
        fs::write(out_dir.join(&rel), &bytes)?;
        files.push(FileEntry {
            path: rel,
            sha256: sha256_hex(&bytes),
        });
    }
    Ok(SceneEntry {
        name: cfg.name.clone(),
        config: cfg.clone(),
        config_hash: config_hash(cfg)?,
        frames: files.len(),
        resolution: cfg.dims,
        files,
        status,
    })
}

impl DatasetManifest {
    pub fn path(dir: &Path) -> PathBuf {
        dir.join(MANIFEST_FILE)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::write(Self::path(dir), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let m: Self = serde_json::from_slice(&fs::read(Self::path(dir))?)?;
        if m.format != MANIFEST_FORMAT {
            return Err(Error::Format(format!("unknown manifest format '{}'", m.format)));
        }
        if m.version != MANIFEST_VERSION {
            return Err(Error::Format(format!("unsupported manifest version {}", m.version)));
        }
        Ok(m)
    }

    /// Re-hashes every listed file and checks that it parses.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for scene in &self.scenes {
            if scene.frames != scene.files.len() {
                return Err(Error::Consistency(format!(
                    "scene {} lists {} frames but {} files",
                    scene.name,
                    scene.frames,
                    scene.files.len()
                )));
            }
            if config_hash(&scene.config)? != scene.config_hash {
                return Err(Error::Consistency(format!("scene {} config hash mismatch", scene.name)));
            }
            for f in &scene.files {
                let bytes = fs::read(dir.join(&f.path))?;
                if sha256_hex(&bytes) != f.sha256 {
                    return Err(Error::Consistency(format!("{} does not match its hash", f.path)));
                }
                PressureTensors::read_pgt(bytes.as_slice())?;
            }
        }
        Ok(())
    }

    /// Loads every scene's tensors, in frame order.
    pub fn load_tensors(&self, dir: &Path) -> Result<Vec<Vec<PressureTensors>>> {
        self.scenes
            .iter()
            .map(|s| {
                s.files
                    .iter()
                    .map(|f| PressureTensors::load(&dir.join(&f.path)))
                    .collect()
            })
            .collect()
    }

    /// Training sequences; the stored tensors are already normalized.
    pub fn load_sequences(&self, dir: &Path) -> Result<Vec<Sequence>> {
        if !self.normalized {
            return Err(Error::Format("dataset tensors are not normalized".into()));
        }
        Ok(self
            .load_tensors(dir)?
            .iter()
            .map(|frames| Sequence {
                frames: frames.iter().map(Tensor::from).collect(),
            })
            .collect())
    }
}
