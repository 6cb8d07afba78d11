//! 3-D convolutions with kernel 3 and padding 1, via im2col and sgemm.

use rand::Rng;

use super::tensor::{gemm, Param, Tensor};
use crate::error::{Error, Result};

pub const K: usize = 3;
pub const K3: usize = K * K * K;

pub fn conv_out_dim(n: usize, stride: usize) -> usize {
    (n + 2 - K) / stride + 1
}

/// Spatial geometry of a stride-`s` convolution from `input` to `output`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub input: [usize; 3],
    pub output: [usize; 3],
    pub stride: usize,
}

impl ConvGeom {
    pub fn new(input: [usize; 3], stride: usize) -> Self {
        Self {
            input,
            output: input.map(|n| conv_out_dim(n, stride)),
            stride,
        }
    }

    pub fn in_len(&self) -> usize {
        self.input.iter().product()
    }

    pub fn out_len(&self) -> usize {
        self.output.iter().product()
    }

    /// Input index hit by output index `o` at kernel tap `k`, if inside.
    #[inline]
    fn tap(&self, axis: usize, o: usize, k: usize) -> Option<usize> {
        let i = (o * self.stride + k) as isize - 1;
        (i >= 0 && (i as usize) < self.input[axis]).then_some(i as usize)
    }
}

/// Unfolds `x` (channels × input volume) into `(channels·27) × output volume`.
pub fn im2col(x: &[f32], channels: usize, g: &ConvGeom) -> Vec<f32> {
    let ol = g.out_len();
    let il = g.in_len();
    let [_, ih, iw] = g.input;
    let [od, oh, ow] = g.output;
    let mut cols = vec![0.0; channels * K3 * ol];
    for c in 0..channels {
        let xc = &x[c * il..(c + 1) * il];
        for kk in 0..K3 {
            let (kd, kh, kw) = (kk / 9, (kk / 3) % 3, kk % 3);
            let row = &mut cols[(c * K3 + kk) * ol..(c * K3 + kk + 1) * ol];
            for z in 0..od {
                let Some(iz) = g.tap(0, z, kd) else { continue };
                for y in 0..oh {
                    let Some(iy) = g.tap(1, y, kh) else { continue };
                    let base_in = (iz * ih + iy) * iw;
                    let base_out = (z * oh + y) * ow;
                    for x_ in 0..ow {
                        if let Some(ix) = g.tap(2, x_, kw) {
                            row[base_out + x_] = xc[base_in + ix];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: folds columns back, summing overlaps.
pub fn col2im(cols: &[f32], channels: usize, g: &ConvGeom) -> Vec<f32> {
    let ol = g.out_len();
    let il = g.in_len();
    let [_, ih, iw] = g.input;
    let [od, oh, ow] = g.output;
    let mut x = vec![0.0; channels * il];
    for c in 0..channels {
        let xc = &mut x[c * il..(c + 1) * il];
        for kk in 0..K3 {
            let (kd, kh, kw) = (kk / 9, (kk / 3) % 3, kk % 3);
            let row = &cols[(c * K3 + kk) * ol..(c * K3 + kk + 1) * ol];
            for z in 0..od {
                let Some(iz) = g.tap(0, z, kd) else { continue };
                for y in 0..oh {
                    let Some(iy) = g.tap(1, y, kh) else { continue };
                    let base_in = (iz * ih + iy) * iw;
                    let base_out = (z * oh + y) * ow;
                    for x_ in 0..ow {
                        if let Some(ix) = g.tap(2, x_, kw) {
                            xc[base_in + ix] += row[base_out + x_];
                        }
                    }
                }
            }
        }
    }
    x
}

/// Fan-in scaled uniform initialisation for a layer feeding a leaky ReLU.
pub fn init_uniform(rng: &mut impl Rng, n: usize, fan_in: usize, slope: f32) -> Vec<f32> {
    let bound = (6.0 / ((1.0 + slope * slope) * fan_in as f32)).sqrt();
    (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
}

fn bias_grad(bias: &mut Param, dy: &Tensor) {
    for (c, g) in bias.grad.iter_mut().enumerate() {
        *g += dy.channel(c).iter().sum::<f32>();
    }
}

fn add_bias(y: &mut [f32], bias: &[f32], len: usize) {
    for (c, b) in bias.iter().enumerate() {
        y[c * len..(c + 1) * len].iter_mut().for_each(|v| *v += b);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conv3d {
    pub weight: Param,
    pub bias: Param,
    pub in_c: usize,
    pub out_c: usize,
    pub stride: usize,
}

pub struct ConvCache {
    cols: Vec<f32>,
    geom: ConvGeom,
}

impl Conv3d {
    pub fn new(name: &str, in_c: usize, out_c: usize, stride: usize, rng: &mut impl Rng, slope: f32) -> Self {
        let w = init_uniform(rng, out_c * in_c * K3, in_c * K3, slope);
        Self {
            weight: Param::new(format!("{name}.weight"), vec![out_c, in_c, K, K, K], w),
            bias: Param::zeros(format!("{name}.bias"), vec![out_c]),
            in_c,
            out_c,
            stride,
        }
    }

    pub fn output_shape(&self, input: [usize; 4]) -> [usize; 4] {
        let g = ConvGeom::new([input[1], input[2], input[3]], self.stride);
        [self.out_c, g.output[0], g.output[1], g.output[2]]
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ConvCache)> {
        if x.channels() != self.in_c {
            return Err(Error::Shape {
                expected: vec![self.in_c],
                actual: vec![x.channels()],
            });
        }
        let geom = ConvGeom::new(x.spatial(), self.stride);
        let cols = im2col(&x.data, self.in_c, &geom);
        let ol = geom.out_len();
        let mut y = Tensor::zeros([self.out_c, geom.output[0], geom.output[1], geom.output[2]]);
        gemm(self.out_c, self.in_c * K3, ol, &self.weight.value, false, &cols, false, 0.0, &mut y.data);
        add_bias(&mut y.data, &self.bias.value, ol);
        Ok((y, ConvCache { cols, geom }))
    }

    /// Accumulates parameter gradients; returns the input gradient when asked.
    pub fn backward(&mut self, cache: &ConvCache, dy: &Tensor, need_dx: bool) -> Option<Tensor> {
        let ol = cache.geom.out_len();
        let kin = self.in_c * K3;
        gemm(self.out_c, ol, kin, &dy.data, false, &cache.cols, true, 1.0, &mut self.weight.grad);
        bias_grad(&mut self.bias, dy);
        if !need_dx {
            return None;
        }
        let mut dcols = vec![0.0; kin * ol];
        gemm(kin, self.out_c, ol, &self.weight.value, true, &dy.data, false, 0.0, &mut dcols);
        let dx = col2im(&dcols, self.in_c, &cache.geom);
        let [d, h, w] = cache.geom.input;
        Some(Tensor {
            shape: [self.in_c, d, h, w],
            data: dx,
        })
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.weight, &self.bias]
    }
}

/// Transposed convolution doubling each spatial dimension: the adjoint of
/// a stride-2 [`Conv3d`] from the doubled volume down to the input.
#[derive(Clone, Debug, PartialEq)]
pub struct TConv3d {
    /// `[in, out, 3, 3, 3]`.
    pub weight: Param,
    pub bias: Param,
    pub in_c: usize,
    pub out_c: usize,
}

pub struct TConvCache {
    input: Tensor,
    geom: ConvGeom,
}

impl TConv3d {
    pub fn new(name: &str, in_c: usize, out_c: usize, rng: &mut impl Rng, slope: f32) -> Self {
        // Each output voxel sees about in·27/8 taps.
        let fan_in = (in_c * K3 / 8).max(1);
        let w = init_uniform(rng, in_c * out_c * K3, fan_in, slope);
        Self {
            weight: Param::new(format!("{name}.weight"), vec![in_c, out_c, K, K, K], w),
            bias: Param::zeros(format!("{name}.bias"), vec![out_c]),
            in_c,
            out_c,
        }
    }

    pub fn output_shape(&self, input: [usize; 4]) -> [usize; 4] {
        [self.out_c, 2 * input[1], 2 * input[2], 2 * input[3]]
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, TConvCache)> {
        if x.channels() != self.in_c {
            return Err(Error::Shape {
                expected: vec![self.in_c],
                actual: vec![x.channels()],
            });
        }
        let out = x.spatial().map(|n| 2 * n);
        let geom = ConvGeom::new(out, 2);
        debug_assert_eq!(geom.output, x.spatial());
        let ol = geom.out_len();
        let kout = self.out_c * K3;
        let mut cols = vec![0.0; kout * ol];
        gemm(kout, self.in_c, ol, &self.weight.value, true, &x.data, false, 0.0, &mut cols);
        let mut y = col2im(&cols, self.out_c, &geom);
        add_bias(&mut y, &self.bias.value, geom.in_len());
        Ok((
            Tensor {
                shape: [self.out_c, out[0], out[1], out[2]],
                data: y,
            },
            TConvCache {
                input: x.clone(),
                geom,
            },
        ))
    }

    pub fn backward(&mut self, cache: &TConvCache, dy: &Tensor, need_dx: bool) -> Option<Tensor> {
        let ol = cache.geom.out_len();
        let kout = self.out_c * K3;
        let dcols = im2col(&dy.data, self.out_c, &cache.geom);
        gemm(self.in_c, ol, kout, &cache.input.data, false, &dcols, true, 1.0, &mut self.weight.grad);
        bias_grad(&mut self.bias, dy);
        if !need_dx {
            return None;
        }
        let mut dx = Tensor::zeros(cache.input.shape);
        gemm(self.in_c, kout, ol, &self.weight.value, false, &dcols, false, 0.0, &mut dx.data);
        Some(dx)
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.weight, &self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn output_dims() {
        assert_eq!(conv_out_dim(36, 2), 18);
        assert_eq!(conv_out_dim(18, 2), 9);
        assert_eq!(conv_out_dim(9, 1), 9);
        assert_eq!(conv_out_dim(20, 2), 10);
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = ConvGeom::new([6, 5, 4], 2);
        let x: Vec<f32> = (0..2 * g.in_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f32> = (0..2 * K3 * g.out_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lhs: f64 = im2col(&x, 2, &g).iter().zip(&y).map(|(a, b)| (a * b) as f64).sum();
        let rhs: f64 = x.iter().zip(col2im(&y, 2, &g)).map(|(a, b)| (a * b) as f64).sum();
        assert!((lhs - rhs).abs() < 1e-4 * lhs.abs().max(1.0));
    }

    #[test]
    fn identity_kernel_copies_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut conv = Conv3d::new("c", 1, 1, 1, &mut rng, 0.1);
        conv.weight.value.iter_mut().for_each(|w| *w = 0.0);
        conv.weight.value[13] = 1.0;
        let x = Tensor::from_vec([1, 3, 3, 3], (0..27).map(|v| v as f32).collect()).unwrap();
        let (y, _) = conv.forward(&x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn tconv_doubles_and_is_conv_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = TConv3d::new("t", 2, 3, &mut rng, 0.1);
        // A conv with the same weights viewed as [out=2, in=3].
        let mut c = Conv3d::new("c", 3, 2, 2, &mut rng, 0.1);
        c.weight.value = t.weight.value.clone();
        let x = Tensor::from_vec([2, 2, 3, 2], (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let z = Tensor::from_vec([3, 4, 6, 4], (0..288).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let (tx, _) = t.forward(&x).unwrap();
        assert_eq!(tx.shape, [3, 4, 6, 4]);
        let (cz, _) = c.forward(&z).unwrap();
        assert_eq!(cz.shape, [2, 2, 3, 2]);
        let lhs: f64 = tx.data.iter().zip(&z.data).map(|(a, b)| (a * b) as f64).sum();
        let rhs: f64 = x.data.iter().zip(&cz.data).map(|(a, b)| (a * b) as f64).sum();
        assert!((lhs - rhs).abs() < 1e-4);
    }
}
