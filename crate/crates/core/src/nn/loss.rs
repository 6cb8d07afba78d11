//! Frame losses: per-channel Huber on values plus Huber on forward differences.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Elementwise penalty. `Mse` and `Mae` exist for the loss ablation only.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Huber,
    Mse,
    Mae,
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "huber" => Ok(Self::Huber),
            "mse" => Ok(Self::Mse),
            "mae" => Ok(Self::Mae),
            other => Err(Error::Config(format!("unknown loss '{other}'"))),
        }
    }
}

impl LossKind {
    /// Penalty and its derivative with respect to the prediction, for `e = pred - truth`.
    #[inline]
    pub fn eval(self, e: f64, delta: f64) -> (f64, f64) {
        match self {
            LossKind::Huber => {
                if e.abs() <= delta {
                    (0.5 * e * e, e)
                } else {
                    (delta * e.abs() - 0.5 * delta * delta, delta * e.signum())
                }
            }
            LossKind::Mse => (0.5 * e * e, e),
            LossKind::Mae => (e.abs(), if e == 0.0 { 0.0 } else { e.signum() }),
        }
    }
}

/// Mean Huber penalty between two equally sized slices.
pub fn huber(x: &[f32], x_hat: &[f32], delta: f64) -> Result<f64> {
    if x.len() != x_hat.len() {
        return Err(Error::Shape {
            expected: vec![x.len()],
            actual: vec![x_hat.len()],
        });
    }
    if !(delta > 0.0) {
        return Err(Error::Config(format!("huber delta {delta} must be positive")));
    }
    if x.is_empty() {
        return Ok(0.0);
    }
    let s: f64 = x
        .iter()
        .zip(x_hat)
        .map(|(&a, &b)| LossKind::Huber.eval(b as f64 - a as f64, delta).0)
        .sum();
    Ok(s / x.len() as f64)
}

/// Forward difference along `axis` of one channel, zero at the far face.
fn diff(v: &[f32], dims: [usize; 3], axis: usize, i: usize) -> f32 {
    let stride = [dims[1] * dims[2], dims[2], 1][axis];
    let c = [i / (dims[1] * dims[2]), (i / dims[2]) % dims[1], i % dims[2]][axis];
    if c + 1 < dims[axis] {
        v[i + stride] - v[i]
    } else {
        0.0
    }
}

/// Sum over channels of the value penalty plus the gradient penalty, each
/// mean-reduced within the channel. Returns the loss and d loss / d pred.
pub fn frame_loss(kind: LossKind, truth: &Tensor, pred: &Tensor, delta: f64) -> Result<(f64, Tensor)> {
    truth.expect_shape(pred.shape)?;
    if !(delta > 0.0) {
        return Err(Error::Config(format!("huber delta {delta} must be positive")));
    }
    let dims = pred.spatial();
    let n = pred.spatial_len();
    let mut grad = Tensor::zeros(pred.shape);
    let mut total = 0.0;
    if n == 0 {
        return Ok((0.0, grad));
    }
    let strides = [dims[1] * dims[2], dims[2], 1];
    for c in 0..pred.channels() {
        let x = truth.channel(c);
        let y = pred.channel(c);
        let g = &mut grad.data[c * n..(c + 1) * n];
        let mut value = 0.0;
        for i in 0..n {
            let (l, d) = kind.eval(y[i] as f64 - x[i] as f64, delta);
            value += l;
            g[i] += (d / n as f64) as f32;
        }
        let mut gradient = 0.0;
        let m = (3 * n) as f64;
        for axis in 0..3 {
            for i in 0..n {
                let e = diff(y, dims, axis, i) as f64 - diff(x, dims, axis, i) as f64;
                let (l, d) = kind.eval(e, delta);
                gradient += l;
                let c_axis = [i / strides[0], (i / dims[2]) % dims[1], i % dims[2]][axis];
                if c_axis + 1 < dims[axis] {
                    let w = (d / m) as f32;
                    g[i + strides[axis]] += w;
                    g[i] -= w;
                }
            }
        }
        total += value / n as f64 + gradient / m;
    }
    Ok((total, grad))
}
