//! Convolutional LSTM rolled over a window of latent volumes.

use rand::Rng;

use super::activation::sigmoid;
use super::conv::{Conv3d, ConvCache};
use super::tensor::{Param, Tensor};
use crate::error::{Error, Result};

/// One ConvLSTM cell (gates from a single convolution over `[x, h]`) and
/// the output convolution applied to the last hidden state.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLstm {
    pub gates: Conv3d,
    pub output: Conv3d,
    pub input_c: usize,
    pub hidden_c: usize,
}

struct StepCache {
    conv: ConvCache,
    i: Vec<f32>,
    f: Vec<f32>,
    o: Vec<f32>,
    g: Vec<f32>,
    c_prev: Vec<f32>,
    tanh_c: Vec<f32>,
}

pub struct LstmCache {
    steps: Vec<StepCache>,
    out: ConvCache,
    spatial: [usize; 3],
}

impl ConvLstm {
    pub fn new(input_c: usize, hidden_c: usize, out_c: usize, rng: &mut impl Rng) -> Self {
        let mut gates = Conv3d::new("lstm.gates", input_c + hidden_c, 4 * hidden_c, 1, rng, 1.0);
        // Forget-gate bias of one keeps early gradients flowing through time.
        for c in hidden_c..2 * hidden_c {
            gates.bias.value[c] = 1.0;
        }
        let output = Conv3d::new("lstm.out", hidden_c, out_c, 1, rng, 1.0);
        Self {
            gates,
            output,
            input_c,
            hidden_c,
        }
    }

    /// Runs the window from a zero state and maps the final hidden state
    /// through the output convolution.
    pub fn forward(&self, window: &[Tensor]) -> Result<(Tensor, LstmCache)> {
        let Some(first) = window.first() else {
            return Err(Error::Config("empty ConvLSTM window".into()));
        };
        let spatial = first.spatial();
        let n = first.spatial_len();
        let hc = self.hidden_c;
        let mut h = Tensor::zeros([hc, spatial[0], spatial[1], spatial[2]]);
        let mut c = vec![0.0f32; hc * n];
        let mut steps = Vec::with_capacity(window.len());
        for x in window {
            x.expect_shape([self.input_c, spatial[0], spatial[1], spatial[2]])?;
            let (z, conv) = self.gates.forward(&Tensor::concat(x, &h))?;
            let zi = &z.data[..hc * n];
            let zf = &z.data[hc * n..2 * hc * n];
            let zo = &z.data[2 * hc * n..3 * hc * n];
            let zg = &z.data[3 * hc * n..];
            let i: Vec<f32> = zi.iter().map(|&v| sigmoid(v)).collect();
            let f: Vec<f32> = zf.iter().map(|&v| sigmoid(v)).collect();
            let o: Vec<f32> = zo.iter().map(|&v| sigmoid(v)).collect();
            let g: Vec<f32> = zg.iter().map(|&v| v.tanh()).collect();
            let c_prev = c;
            c = (0..hc * n).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
            let tanh_c: Vec<f32> = c.iter().map(|v| v.tanh()).collect();
            h.data = (0..hc * n).map(|k| o[k] * tanh_c[k]).collect();
            steps.push(StepCache {
                conv,
                i,
                f,
                o,
                g,
                c_prev,
                tanh_c,
            });
        }
        let (y, out) = self.output.forward(&h)?;
        Ok((y, LstmCache { steps, out, spatial }))
    }

    /// Backpropagation through time; returns the gradient for every window input.
    pub fn backward(&mut self, cache: &LstmCache, dy: &Tensor) -> Vec<Tensor> {
        let hc = self.hidden_c;
        let [d, hh, w] = cache.spatial;
        let n = d * hh * w;
        let mut dh = self
            .output
            .backward(&cache.out, dy, true)
            .expect("input gradient requested");
        let mut dc = vec![0.0f32; hc * n];
        let mut dxs = vec![Tensor::zeros([self.input_c, d, hh, w]); cache.steps.len()];
        for (t, s) in cache.steps.iter().enumerate().rev() {
            let mut dz = vec![0.0f32; 4 * hc * n];
            for k in 0..hc * n {
                let dh_k = dh.data[k];
                let do_ = dh_k * s.tanh_c[k];
                let dck = dc[k] + dh_k * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
                let di = dck * s.g[k];
                let dg = dck * s.i[k];
                let df = dck * s.c_prev[k];
                dc[k] = dck * s.f[k];
                dz[k] = di * s.i[k] * (1.0 - s.i[k]);
                dz[hc * n + k] = df * s.f[k] * (1.0 - s.f[k]);
                dz[2 * hc * n + k] = do_ * s.o[k] * (1.0 - s.o[k]);
                dz[3 * hc * n + k] = dg * (1.0 - s.g[k] * s.g[k]);
            }
            let dz = Tensor {
                shape: [4 * hc, d, hh, w],
                data: dz,
            };
            let dxh = self
                .gates
                .backward(&s.conv, &dz, true)
                .expect("input gradient requested");
            dxs[t] = dxh.channel_range(0, self.input_c);
            dh = dxh.channel_range(self.input_c, self.input_c + hc);
        }
        dxs
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let [a, b] = self.gates.params_mut();
        let [c, d] = self.output.params_mut();
        vec![a, b, c, d]
    }

    pub fn params(&self) -> Vec<&Param> {
        let [a, b] = self.gates.params();
        let [c, d] = self.output.params();
        vec![a, b, c, d]
    }
}
