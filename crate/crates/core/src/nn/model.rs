//! Encoder → ConvLSTM → decoder pressure predictor.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::activation::{leaky_relu, leaky_relu_backward};
use super::conv::{Conv3d, ConvCache, TConv3d, TConvCache};
use super::convlstm::{ConvLstm, LstmCache};
use super::tensor::{Param, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Frames fed to the ConvLSTM per prediction.
    pub window: usize,
    /// Encoder output channels per layer; the last one is the latent width.
    pub encoder: [usize; 3],
    /// Decoder output channels of its first three layers.
    pub decoder: [usize; 3],
    pub hidden: usize,
    pub slope: f32,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            window: 4,
            encoder: [16, 32, 64],
            decoder: [32, 16, 8],
            hidden: 64,
            slope: 0.1,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn latent_channels(&self) -> usize {
        self.encoder[2]
    }

    /// Latent shape for an input volume; spatial dims must be multiples of 4.
    pub fn latent_shape(&self, spatial: [usize; 3]) -> Result<[usize; 4]> {
        if spatial.iter().any(|&n| n % 4 != 0 || n == 0) {
            return Err(Error::Shape {
                expected: spatial.map(|n| n.div_ceil(4).max(1) * 4).to_vec(),
                actual: spatial.to_vec(),
            });
        }
        Ok([self.latent_channels(), spatial[0] / 4, spatial[1] / 4, spatial[2] / 4])
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::Config(format!("window {} must be at least 2", self.window)));
        }
        if self.encoder.iter().chain(&self.decoder).any(|&c| c == 0) || self.hidden == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        Ok(())
    }
}

/// Three convolutions, strides 2, 2, 1, each followed by a leaky ReLU.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    pub layers: [Conv3d; 3],
    pub slope: f32,
}

pub struct EncoderCache {
    convs: Vec<ConvCache>,
    pre: Vec<Tensor>,
}

impl Encoder {
    fn new(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let [a, b, c] = cfg.encoder;
        Self {
            layers: [
                Conv3d::new("enc0", 3, a, 2, rng, cfg.slope),
                Conv3d::new("enc1", a, b, 2, rng, cfg.slope),
                Conv3d::new("enc2", b, c, 1, rng, cfg.slope),
            ],
            slope: cfg.slope,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, EncoderCache)> {
        let mut cur = x.clone();
        let mut convs = Vec::with_capacity(3);
        let mut pre = Vec::with_capacity(3);
        for layer in &self.layers {
            let (z, cache) = layer.forward(&cur)?;
            cur = leaky_relu(&z, self.slope);
            convs.push(cache);
            pre.push(z);
        }
        Ok((cur, EncoderCache { convs, pre }))
    }

    pub fn backward(&mut self, cache: &EncoderCache, dy: &Tensor, need_dx: bool) -> Option<Tensor> {
        let mut grad = dy.clone();
        for l in (0..3).rev() {
            let dz = leaky_relu_backward(&cache.pre[l], &grad, self.slope);
            let want = l > 0 || need_dx;
            match self.layers[l].backward(&cache.convs[l], &dz, want) {
                Some(g) => grad = g,
                None => return None,
            }
        }
        Some(grad)
    }
}

/// Convolution, two ×2 transposed convolutions and a linear output convolution.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoder {
    pub head: Conv3d,
    pub up0: TConv3d,
    pub up1: TConv3d,
    pub tail: Conv3d,
    pub slope: f32,
}

pub struct DecoderCache {
    head: ConvCache,
    up0: TConvCache,
    up1: TConvCache,
    tail: ConvCache,
    pre: [Tensor; 3],
}

impl Decoder {
    fn new(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let [a, b, c] = cfg.decoder;
        Self {
            head: Conv3d::new("dec0", cfg.latent_channels(), a, 1, rng, cfg.slope),
            up0: TConv3d::new("dec1", a, b, rng, cfg.slope),
            up1: TConv3d::new("dec2", b, c, rng, cfg.slope),
            tail: Conv3d::new("dec3", c, 3, 1, rng, 1.0),
            slope: cfg.slope,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, DecoderCache)> {
        let (z0, head) = self.head.forward(x)?;
        let (z1, up0) = self.up0.forward(&leaky_relu(&z0, self.slope))?;
        let (z2, up1) = self.up1.forward(&leaky_relu(&z1, self.slope))?;
        let (y, tail) = self.tail.forward(&leaky_relu(&z2, self.slope))?;
        Ok((
            y,
            DecoderCache {
                head,
                up0,
                up1,
                tail,
                pre: [z0, z1, z2],
            },
        ))
    }

    pub fn backward(&mut self, cache: &DecoderCache, dy: &Tensor) -> Tensor {
        let s = self.slope;
        let d2 = self.tail.backward(&cache.tail, dy, true).expect("dx");
        let d2 = leaky_relu_backward(&cache.pre[2], &d2, s);
        let d1 = self.up1.backward(&cache.up1, &d2, true).expect("dx");
        let d1 = leaky_relu_backward(&cache.pre[1], &d1, s);
        let d0 = self.up0.backward(&cache.up0, &d1, true).expect("dx");
        let d0 = leaky_relu_backward(&cache.pre[0], &d0, s);
        self.head.backward(&cache.head, &d0, true).expect("dx")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateModel {
    pub config: ModelConfig,
    pub encoder: Encoder,
    pub lstm: ConvLstm,
    pub decoder: Decoder,
}

/// Everything the backward pass needs from one training sample.
pub struct SampleCache {
    window: Vec<EncoderCache>,
    lstm: LstmCache,
    decode_pred: DecoderCache,
    target_enc: EncoderCache,
    decode_recon: DecoderCache,
}

pub struct SampleOutput {
    /// Predicted next frame.
    pub prediction: Tensor,
    /// Autoencoder round trip of the target frame.
    pub reconstruction: Tensor,
    pub cache: SampleCache,
}

impl SurrogateModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let encoder = Encoder::new(&config, &mut rng);
        let lstm = ConvLstm::new(config.latent_channels(), config.hidden, config.latent_channels(), &mut rng);
        let decoder = Decoder::new(&config, &mut rng);
        Ok(Self {
            config,
            encoder,
            lstm,
            decoder,
        })
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.channels() != 3 {
            return Err(Error::Shape {
                expected: vec![3, x.shape[1], x.shape[2], x.shape[3]],
                actual: x.shape.to_vec(),
            });
        }
        self.config.latent_shape(x.spatial()).map(|_| ())
    }

    pub fn encode(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        Ok(self.encoder.forward(x)?.0)
    }

    pub fn decode(&self, c: &Tensor) -> Result<Tensor> {
        if c.channels() != self.config.latent_channels() {
            return Err(Error::Shape {
                expected: vec![self.config.latent_channels()],
                actual: vec![c.channels()],
            });
        }
        Ok(self.decoder.forward(c)?.0)
    }

    /// Next latent from exactly `window` latents.
    pub fn predict_next(&self, latents: &[Tensor]) -> Result<Tensor> {
        if latents.len() != self.config.window {
            return Err(Error::Config(format!(
                "expected {} latents, got {}",
                self.config.window,
                latents.len()
            )));
        }
        let shape = latents[0].shape;
        if shape[0] != self.config.latent_channels() {
            return Err(Error::Shape {
                expected: vec![self.config.latent_channels()],
                actual: vec![shape[0]],
            });
        }
        Ok(self.lstm.forward(latents)?.0)
    }

    /// Encodes the frames, rolls the ConvLSTM and decodes the next frame.
    pub fn predict_frame(&self, frames: &[Tensor]) -> Result<Tensor> {
        let latents = frames.iter().map(|f| self.encode(f)).collect::<Result<Vec<_>>>()?;
        self.decode(&self.predict_next(&latents)?)
    }

    /// Forward pass for one training sample: `window` input frames and the
    /// frame that follows them.
    pub fn forward_sample(&self, window: &[Tensor], target: &Tensor) -> Result<SampleOutput> {
        if window.len() != self.config.window {
            return Err(Error::Config(format!(
                "expected {} frames, got {}",
                self.config.window,
                window.len()
            )));
        }
        let mut latents = Vec::with_capacity(window.len());
        let mut caches = Vec::with_capacity(window.len());
        for x in window {
            self.check_input(x)?;
            x.expect_shape(target.shape)?;
            let (c, cache) = self.encoder.forward(x)?;
            latents.push(c);
            caches.push(cache);
        }
        let (next, lstm) = self.lstm.forward(&latents)?;
        let (prediction, decode_pred) = self.decoder.forward(&next)?;
        let (c_target, target_enc) = self.encoder.forward(target)?;
        let (reconstruction, decode_recon) = self.decoder.forward(&c_target)?;
        Ok(SampleOutput {
            prediction,
            reconstruction,
            cache: SampleCache {
                window: caches,
                lstm,
                decode_pred,
                target_enc,
                decode_recon,
            },
        })
    }

    /// Accumulates parameter gradients for one sample.
    pub fn backward_sample(&mut self, cache: &SampleCache, d_pred: &Tensor, d_recon: &Tensor) {
        let dc_next = self.decoder.backward(&cache.decode_pred, d_pred);
        let d_latents = self.lstm.backward(&cache.lstm, &dc_next);
        for (c, d) in cache.window.iter().zip(&d_latents) {
            self.encoder.backward(c, d, false);
        }
        let dc_target = self.decoder.backward(&cache.decode_recon, d_recon);
        self.encoder.backward(&cache.target_enc, &dc_target, false);
    }

    /// Parameters in a fixed order shared by the optimizer and checkpoints.
    pub fn params(&self) -> Vec<&Param> {
        let mut v = Vec::new();
        for l in &self.encoder.layers {
            v.extend(l.params());
        }
        v.extend(self.lstm.params());
        v.extend(self.decoder.head.params());
        v.extend(self.decoder.up0.params());
        v.extend(self.decoder.up1.params());
        v.extend(self.decoder.tail.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = Vec::new();
        for l in &mut self.encoder.layers {
            v.extend(l.params_mut());
        }
        v.extend(self.lstm.params_mut());
        v.extend(self.decoder.head.params_mut());
        v.extend(self.decoder.up0.params_mut());
        v.extend(self.decoder.up1.params_mut());
        v.extend(self.decoder.tail.params_mut());
        v
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}
