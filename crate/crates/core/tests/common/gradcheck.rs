//! Layer backward passes against central differences of the naive f64
//! reference layers.

use mpm_hybrid::nn::activation::{leaky_relu, leaky_relu_backward};
use mpm_hybrid::nn::conv::{Conv3d, TConv3d};
use mpm_hybrid::nn::convlstm::ConvLstm;
use mpm_hybrid::nn::loss::{frame_loss, LossKind};
use mpm_hybrid::nn::Tensor;

use super::reference::{self as r64, T64};
use super::{check_entries, forward_gap, off_kink_tensor, random_tensor, rng};

pub const TOL: f64 = 1e-3;
pub const FORWARD_TOL: f64 = 1e-5;
pub const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

/// Forward gap to the reference and worst gradient error.
#[derive(Clone, Copy, Debug)]
pub struct Errors {
    pub forward: f64,
    pub gradient: f64,
}

impl Errors {
    pub fn ok(&self) -> bool {
        self.forward < FORWARD_TOL && self.gradient < TOL
    }
}

pub fn f64s(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

fn dot(r: &Tensor, y: &T64) -> f64 {
    r.data.iter().zip(&y.v).map(|(&a, &b)| a as f64 * b).sum()
}

pub fn conv_error(seed: u64, stride: usize) -> Errors {
    let mut g = rng(seed);
    let x = random_tensor(&mut g, [2, 6, 5, 4], 1.0);
    let mut layer = Conv3d::new("c", 2, 3, stride, &mut g, 0.1);
    layer.bias.value.iter_mut().for_each(|b| *b = 0.3);
    let (y, cache) = layer.forward(&x).unwrap();
    let (w64, b64) = (f64s(&layer.weight.value), f64s(&layer.bias.value));
    let x64 = T64::from_f32(x.shape, &x.data);
    let gap = forward_gap(&y, &r64::conv(&x64, &w64, &b64, 3, stride));

    let probe = random_tensor(&mut g, y.shape, 1.0);
    let dx = layer.backward(&cache, &probe, true).unwrap();
    let e_x = check_entries(&mut g, &x.data, &dx.data, 40, |v| {
        dot(&probe, &r64::conv(&T64 { shape: x.shape, v: v.to_vec() }, &w64, &b64, 3, stride))
    });
    let e_w = check_entries(&mut g, &layer.weight.value, &layer.weight.grad, 40, |v| {
        dot(&probe, &r64::conv(&x64, v, &b64, 3, stride))
    });
    let e_b = check_entries(&mut g, &layer.bias.value, &layer.bias.grad, 3, |v| {
        dot(&probe, &r64::conv(&x64, &w64, v, 3, stride))
    });
    Errors { forward: gap, gradient: e_x.max(e_w).max(e_b) }
}


pub fn tconv_error(seed: u64) -> Errors {
    let mut g = rng(seed);
    let x = random_tensor(&mut g, [3, 3, 2, 3], 1.0);
    let mut layer = TConv3d::new("t", 3, 2, &mut g, 0.1);
    layer.bias.value = vec![0.2, -0.4];
    let (y, cache) = layer.forward(&x).unwrap();
    let (w64, b64) = (f64s(&layer.weight.value), f64s(&layer.bias.value));
    let x64 = T64::from_f32(x.shape, &x.data);
    let gap = forward_gap(&y, &r64::tconv(&x64, &w64, &b64, 2));

    let probe = random_tensor(&mut g, y.shape, 1.0);
    let dx = layer.backward(&cache, &probe, true).unwrap();
    let e_x = check_entries(&mut g, &x.data, &dx.data, 40, |v| {
        dot(&probe, &r64::tconv(&T64 { shape: x.shape, v: v.to_vec() }, &w64, &b64, 2))
    });
    let e_w = check_entries(&mut g, &layer.weight.value, &layer.weight.grad, 40, |v| {
        dot(&probe, &r64::tconv(&x64, v, &b64, 2))
    });
    let e_b = check_entries(&mut g, &layer.bias.value, &layer.bias.grad, 2, |v| {
        dot(&probe, &r64::tconv(&x64, &w64, v, 2))
    });
    Errors { forward: gap, gradient: e_x.max(e_w).max(e_b) }
}


pub fn leaky_error(seed: u64) -> Errors {
    let mut g = rng(seed);
    let x = off_kink_tensor(&mut g, [2, 3, 3, 3]);
    let y = leaky_relu(&x, 0.1);
    let gap = forward_gap(&y, &r64::leaky(&T64::from_f32(x.shape, &x.data), 0.1));
    let probe = random_tensor(&mut g, x.shape, 1.0);
    let dx = leaky_relu_backward(&x, &probe, 0.1);
    let gradient = check_entries(&mut g, &x.data, &dx.data, 54, |v| {
        dot(&probe, &r64::leaky(&T64 { shape: x.shape, v: v.to_vec() }, 0.1))
    });
    Errors { forward: gap, gradient }
}


pub fn lstm_error(seed: u64) -> Errors {
    let mut g = rng(seed);
    let window: Vec<Tensor> = (0..3).map(|_| random_tensor(&mut g, [3, 3, 3, 2], 1.0)).collect();
    let mut cell = ConvLstm::new(3, 4, 3, &mut g);
    let (y, cache) = cell.forward(&window).unwrap();
    let w64: Vec<T64> = window.iter().map(|t| T64::from_f32(t.shape, &t.data)).collect();
    let ps: Vec<Vec<f64>> = cell.params().iter().map(|p| f64s(&p.value)).collect();
    let run = |win: &[T64], ps: &[Vec<f64>]| r64::lstm(win, 4, &ps[0], &ps[1], &ps[2], &ps[3], 3);
    let gap = forward_gap(&y, &run(&w64, &ps));

    let probe = random_tensor(&mut g, y.shape, 1.0);
    let dxs = cell.backward(&cache, &probe);
    let mut worst = 0.0f64;
    for t in 0..window.len() {
        worst = worst.max(check_entries(&mut g, &window[t].data, &dxs[t].data, 20, |v| {
            let mut win = w64.clone();
            win[t].v.copy_from_slice(v);
            dot(&probe, &run(&win, &ps))
        }));
    }
    let grads: Vec<(Vec<f32>, Vec<f32>)> = cell.params().iter().map(|p| (p.value.clone(), p.grad.clone())).collect();
    for (k, (value, grad)) in grads.iter().enumerate() {
        worst = worst.max(check_entries(&mut g, value, grad, 40, |v| {
            let mut p = ps.clone();
            p[k].copy_from_slice(v);
            dot(&probe, &run(&w64, &p))
        }));
    }
    Errors { forward: gap, gradient: worst }
}


pub fn loss_error(seed: u64) -> Errors {
    let mut g = rng(seed);
    let truth = random_tensor(&mut g, [3, 4, 3, 5], 1.0);
    // residuals straddle delta, so both branches are exercised
    let pred = random_tensor(&mut g, truth.shape, 1.5);
    let delta = 0.5;
    let (l, grad) = frame_loss(LossKind::Huber, &truth, &pred, delta).unwrap();
    let t64 = T64::from_f32(truth.shape, &truth.data);
    let reference = r64::frame_loss(&t64, &T64::from_f32(pred.shape, &pred.data), delta);
    let gap = (l - reference).abs() / reference.abs().max(1.0);
    let gradient = check_entries(&mut g, &pred.data, &grad.data, 60, |v| {
        r64::frame_loss(&t64, &T64 { shape: pred.shape, v: v.to_vec() }, delta)
    });
    Errors { forward: gap, gradient }
}
