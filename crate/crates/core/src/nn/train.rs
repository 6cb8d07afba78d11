//! Joint training of the predictor and the autoencoder.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::checkpoint;
use super::loss::{frame_loss, LossKind};
use super::model::SurrogateModel;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::fields::PressureTensors;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_iterations: u64,
    pub window: usize,
    pub huber_delta: f64,
    pub seed: u64,
    pub adam: AdamConfig,
    pub loss: LossKind,
    /// Write a checkpoint every this many iterations; 0 disables.
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 8,
            learning_rate: 1e-4,
            max_iterations: 100_000,
            window: 4,
            huber_delta: 1.0,
            seed: 0,
            adam: AdamConfig::default(),
            loss: LossKind::Huber,
            checkpoint_every: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning rate {} is invalid", self.learning_rate)));
        }
        if self.window < 2 {
            return Err(Error::Config(format!("window {} must be at least 2", self.window)));
        }
        if !(self.huber_delta > 0.0) {
            return Err(Error::Config("huber_delta must be positive".into()));
        }
        Ok(())
    }
}

/// Consecutive normalized frames of one scene.
#[derive(Clone, Debug, Default)]
pub struct Sequence {
    pub frames: Vec<Tensor>,
}

impl Sequence {
    /// Normalizes raw pressure tensors.
    pub fn from_pressure(frames: &[PressureTensors]) -> Self {
        Self {
            frames: frames.iter().map(|t| Tensor::from(&t.clone().normalized())).collect(),
        }
    }
}

/// A training example: `window` input frames followed by the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sample {
    pub sequence: usize,
    pub start: usize,
}

pub fn samples(data: &[Sequence], window: usize) -> Vec<Sample> {
    let mut out = Vec::new();
    for (s, seq) in data.iter().enumerate() {
        for start in 0..(seq.frames.len().saturating_sub(window)) {
            out.push(Sample { sequence: s, start });
        }
    }
    out
}

/// Total loss of one sample and the gradients of prediction and round trip.
pub fn sample_loss(
    model: &SurrogateModel,
    data: &[Sequence],
    sample: Sample,
    kind: LossKind,
    delta: f64,
) -> Result<(f64, super::model::SampleOutput, Tensor, Tensor)> {
    let seq = &data[sample.sequence].frames;
    let w = model.config.window;
    let target = &seq[sample.start + w];
    let out = model.forward_sample(&seq[sample.start..sample.start + w], target)?;
    let (l_pre, d_pred) = frame_loss(kind, target, &out.prediction, delta)?;
    let (l_ae, d_recon) = frame_loss(kind, target, &out.reconstruction, delta)?;
    Ok((l_pre + l_ae, out, d_pred, d_recon))
}

/// Mean total loss over the given samples without touching gradients.
pub fn mean_loss(model: &SurrogateModel, data: &[Sequence], list: &[Sample], kind: LossKind, delta: f64) -> Result<f64> {
    if list.is_empty() {
        return Err(Error::Config("no samples to evaluate".into()));
    }
    let mut total = 0.0;
    for &s in list {
        total += sample_loss(model, data, s, kind, delta)?.0;
    }
    Ok(total / list.len() as f64)
}

/// Streams batches by reshuffling the sample list each epoch.
struct Batcher {
    rng: ChaCha8Rng,
    order: Vec<Sample>,
    pos: usize,
}

impl Batcher {
    fn new(list: Vec<Sample>, seed: u64) -> Self {
        let mut b = Self {
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x6261_7463_6865_7200),
            order: list,
            pos: 0,
        };
        b.order.shuffle(&mut b.rng);
        b
    }

    fn next_batch(&mut self, size: usize) -> Vec<Sample> {
        let mut out = Vec::with_capacity(size);
        while out.len() < size {
            if self.pos == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

pub struct Trainer {
    pub model: SurrogateModel,
    pub config: TrainConfig,
    pub iteration: u64,
    /// Mean batch loss per iteration.
    pub losses: Vec<f64>,
    optimizer: Adam,
    batcher: Batcher,
    data: Vec<Sequence>,
}

impl Trainer {
    pub fn new(mut model: SurrogateModel, data: Vec<Sequence>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if config.window != model.config.window {
            return Err(Error::Config(format!(
                "train window {} differs from model window {}",
                config.window, model.config.window
            )));
        }
        let list = samples(&data, config.window);
        if list.is_empty() {
            return Err(Error::Config(format!(
                "dataset has no sequence longer than the window ({} frames)",
                config.window
            )));
        }
        model.zero_grad();
        let optimizer = Adam::new(config.adam, &model.params());
        let batcher = Batcher::new(list, config.seed);
        Ok(Self {
            model,
            config,
            iteration: 0,
            losses: Vec::new(),
            optimizer,
            batcher,
            data,
        })
    }

    pub fn data(&self) -> &[Sequence] {
        &self.data
    }

    /// One optimizer step; returns the batch loss measured before the update.
    pub fn step(&mut self) -> Result<f64> {
        let batch = self.batcher.next_batch(self.config.batch_size);
        let scale = 1.0 / batch.len() as f32;
        self.model.zero_grad();
        let mut total = 0.0;
        for s in batch {
            let (l, out, mut d_pred, mut d_recon) =
                sample_loss(&self.model, &self.data, s, self.config.loss, self.config.huber_delta)?;
            total += l;
            d_pred.data.iter_mut().for_each(|g| *g *= scale);
            d_recon.data.iter_mut().for_each(|g| *g *= scale);
            self.model.backward_sample(&out.cache, &d_pred, &d_recon);
        }
        let loss = total / self.config.batch_size as f64;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(self.iteration as usize));
        }
        self.optimizer.update(&mut self.model.params_mut(), self.config.learning_rate);
        self.iteration += 1;
        self.losses.push(loss);
        Ok(loss)
    }

    /// Runs to `max_iterations`, checkpointing into `out_dir` when given.
    /// A non-finite loss writes `last_finite.mpmw` and returns the error.
    pub fn run(&mut self, out_dir: Option<&Path>) -> Result<()> {
        if let Some(dir) = out_dir {
            fs::create_dir_all(dir)?;
        }
        while self.iteration < self.config.max_iterations {
            match self.step() {
                Ok(loss) => {
                    if self.iteration % 100 == 0 {
                        log::info!("iteration {} loss {loss:.6e}", self.iteration);
                    }
                }
                Err(e @ Error::NonFiniteLoss(_)) => {
                    if let Some(dir) = out_dir {
                        checkpoint::save(&self.model, self.iteration, dir.join("last_finite.mpmw"))?;
                        self.write_losses(dir.join("loss.csv"))?;
                    }
                    return Err(e);
                }
                Err(e) => return Err(e),
            }
            if let Some(dir) = out_dir {
                let k = self.config.checkpoint_every;
                if k > 0 && self.iteration % k == 0 {
                    checkpoint::save(&self.model, self.iteration, checkpoint_path(dir, self.iteration))?;
                }
            }
        }
        if let Some(dir) = out_dir {
            checkpoint::save(&self.model, self.iteration, dir.join("model.mpmw"))?;
            self.write_losses(dir.join("loss.csv"))?;
        }
        Ok(())
    }

    pub fn write_losses(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        writeln!(f, "iteration,loss")?;
        for (i, l) in self.losses.iter().enumerate() {
            writeln!(f, "{},{l:.9e}", i + 1)?;
        }
        f.flush()?;
        Ok(())
    }
}

pub fn checkpoint_path(dir: &Path, iteration: u64) -> PathBuf {
    dir.join(format!("ckpt_{iteration:07}.mpmw"))
}
