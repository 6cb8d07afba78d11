//! Naive f64 versions of the network layers, written loop-by-loop from the
//! layer definitions. Used as finite-difference and forward oracles.

#[derive(Clone, Debug)]
pub struct T64 {
    pub shape: [usize; 4],
    pub v: Vec<f64>,
}

impl T64 {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Self {
            shape,
            v: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_f32(shape: [usize; 4], data: &[f32]) -> Self {
        Self {
            shape,
            v: data.iter().map(|&x| x as f64).collect(),
        }
    }

    fn at(&self, c: usize, z: isize, y: isize, x: isize) -> f64 {
        let [_, d, h, w] = self.shape;
        if z < 0 || y < 0 || x < 0 || z >= d as isize || y >= h as isize || x >= w as isize {
            return 0.0;
        }
        self.v[((c * d + z as usize) * h + y as usize) * w + x as usize]
    }

    fn idx(&self, c: usize, z: usize, y: usize, x: usize) -> usize {
        let [_, d, h, w] = self.shape;
        ((c * d + z) * h + y) * w + x
    }
}

/// Kernel 3, zero padding 1, weight `[out, in, 3, 3, 3]`.
pub fn conv(x: &T64, w: &[f64], b: &[f64], out_c: usize, stride: usize) -> T64 {
    let [in_c, d, h, wd] = x.shape;
    let o = |n: usize| (n - 1) / stride + 1;
    let mut y = T64::zeros([out_c, o(d), o(h), o(wd)]);
    for co in 0..out_c {
        for z in 0..o(d) {
            for yy in 0..o(h) {
                for xx in 0..o(wd) {
                    let mut s = b[co];
                    for ci in 0..in_c {
                        for k in 0..27 {
                            let (kz, ky, kx) = ((k / 9) as isize, ((k / 3) % 3) as isize, (k % 3) as isize);
                            let v = x.at(
                                ci,
                                (z * stride) as isize + kz - 1,
                                (yy * stride) as isize + ky - 1,
                                (xx * stride) as isize + kx - 1,
                            );
                            s += w[(co * in_c + ci) * 27 + k] * v;
                        }
                    }
                    let i = y.idx(co, z, yy, xx);
                    y.v[i] = s;
                }
            }
        }
    }
    y
}

/// Scatter form of the ×2 transposed convolution, weight `[in, out, 3, 3, 3]`:
/// input voxel `o` at tap `k` lands on output `2o + k - 1`.
pub fn tconv(x: &T64, w: &[f64], b: &[f64], out_c: usize) -> T64 {
    let [in_c, d, h, wd] = x.shape;
    let mut y = T64::zeros([out_c, 2 * d, 2 * h, 2 * wd]);
    for co in 0..out_c {
        let n = y.shape[1] * y.shape[2] * y.shape[3];
        y.v[co * n..(co + 1) * n].iter_mut().for_each(|v| *v = b[co]);
    }
    for ci in 0..in_c {
        for z in 0..d {
            for yy in 0..h {
                for xx in 0..wd {
                    let v = x.v[x.idx(ci, z, yy, xx)];
                    for k in 0..27 {
                        let pz = (2 * z + k / 9) as isize - 1;
                        let py = (2 * yy + (k / 3) % 3) as isize - 1;
                        let px = (2 * xx + k % 3) as isize - 1;
                        if pz < 0 || py < 0 || px < 0 || pz >= 2 * d as isize || py >= 2 * h as isize || px >= 2 * wd as isize {
                            continue;
                        }
                        for co in 0..out_c {
                            let i = y.idx(co, pz as usize, py as usize, px as usize);
                            y.v[i] += w[(ci * out_c + co) * 27 + k] * v;
                        }
                    }
                }
            }
        }
    }
    y
}

pub fn leaky(x: &T64, slope: f64) -> T64 {
    T64 {
        shape: x.shape,
        v: x.v.iter().map(|&v| if v > 0.0 { v } else { slope * v }).collect(),
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// ConvLSTM over the window from a zero state; gate order i, f, o, g.
pub fn lstm(window: &[T64], hid: usize, gw: &[f64], gb: &[f64], ow: &[f64], ob: &[f64], out_c: usize) -> T64 {
    let [in_c, d, h, w] = window[0].shape;
    let n = d * h * w;
    let mut hs = vec![0.0; hid * n];
    let mut cs = vec![0.0; hid * n];
    for x in window {
        let mut xh = T64::zeros([in_c + hid, d, h, w]);
        xh.v[..in_c * n].copy_from_slice(&x.v);
        xh.v[in_c * n..].copy_from_slice(&hs);
        let z = conv(&xh, gw, gb, 4 * hid, 1);
        for k in 0..hid * n {
            let i = sigmoid(z.v[k]);
            let f = sigmoid(z.v[hid * n + k]);
            let o = sigmoid(z.v[2 * hid * n + k]);
            let g = z.v[3 * hid * n + k].tanh();
            cs[k] = f * cs[k] + i * g;
            hs[k] = o * cs[k].tanh();
        }
    }
    let last = T64 {
        shape: [hid, d, h, w],
        v: hs,
    };
    conv(&last, ow, ob, out_c, 1)
}

fn huber(e: f64, delta: f64) -> f64 {
    if e.abs() <= delta {
        0.5 * e * e
    } else {
        delta * (e.abs() - 0.5 * delta)
    }
}

/// Per channel: mean Huber of values plus mean Huber of the three forward
/// differences (zero beyond the last voxel).
pub fn frame_loss(truth: &T64, pred: &T64, delta: f64) -> f64 {
    let [c, d, h, w] = pred.shape;
    let n = d * h * w;
    let diff = |t: &T64, ch: usize, z: usize, y: usize, x: usize, axis: usize| -> f64 {
        let (dz, dy, dx) = [(1, 0, 0), (0, 1, 0), (0, 0, 1)][axis];
        let (nz, ny, nx) = (z + dz, y + dy, x + dx);
        if nz >= d || ny >= h || nx >= w {
            0.0
        } else {
            t.v[t.idx(ch, nz, ny, nx)] - t.v[t.idx(ch, z, y, x)]
        }
    };
    let mut total = 0.0;
    for ch in 0..c {
        let mut value = 0.0;
        let mut grad = 0.0;
        for z in 0..d {
            for y in 0..h {
                for x in 0..w {
                    let i = pred.idx(ch, z, y, x);
                    value += huber(pred.v[i] - truth.v[i], delta);
                    for axis in 0..3 {
                        grad += huber(diff(pred, ch, z, y, x, axis) - diff(truth, ch, z, y, x, axis), delta);
                    }
                }
            }
        }
        total += value / n as f64 + grad / (3 * n) as f64;
    }
    total
}

pub struct ModelShape {
    pub encoder: [usize; 3],
    pub decoder: [usize; 3],
    pub hidden: usize,
    pub slope: f64,
}

/// Encoder, ConvLSTM, decoder in the parameter order of the library model.
pub fn encode(p: &[Vec<f64>], s: &ModelShape, x: &T64) -> T64 {
    let a = leaky(&conv(x, &p[0], &p[1], s.encoder[0], 2), s.slope);
    let b = leaky(&conv(&a, &p[2], &p[3], s.encoder[1], 2), s.slope);
    leaky(&conv(&b, &p[4], &p[5], s.encoder[2], 1), s.slope)
}

pub fn decode(p: &[Vec<f64>], s: &ModelShape, c: &T64) -> T64 {
    let a = leaky(&conv(c, &p[10], &p[11], s.decoder[0], 1), s.slope);
    let b = leaky(&tconv(&a, &p[12], &p[13], s.decoder[1]), s.slope);
    let e = leaky(&tconv(&b, &p[14], &p[15], s.decoder[2]), s.slope);
    conv(&e, &p[16], &p[17], 3, 1)
}

pub fn sample_loss(p: &[Vec<f64>], s: &ModelShape, window: &[T64], target: &T64, delta: f64) -> f64 {
    let latents: Vec<T64> = window.iter().map(|x| encode(p, s, x)).collect();
    let next = lstm(&latents, s.hidden, &p[6], &p[7], &p[8], &p[9], s.encoder[2]);
    let pred = decode(p, s, &next);
    let recon = decode(p, s, &encode(p, s, target));
    frame_loss(target, &pred, delta) + frame_loss(target, &recon, delta)
}
