//! Signed base-10 log compression used for every network-facing tensor.

/// `lg(x + 1)` for `x >= 0`, `-lg(1 - x)` otherwise.
pub fn normalize(x: f64) -> f64 {
    if x >= 0.0 {
        x.ln_1p() / std::f64::consts::LN_10
    } else {
        -(-x).ln_1p() / std::f64::consts::LN_10
    }
}

/// Exact inverse of [`normalize`].
pub fn denormalize(y: f64) -> f64 {
    if y >= 0.0 {
        (y * std::f64::consts::LN_10).exp_m1()
    } else {
        -((-y) * std::f64::consts::LN_10).exp_m1()
    }
}

pub fn normalize_slice(values: &mut [f32]) {
    for v in values {
        *v = normalize(f64::from(*v)) as f32;
    }
}

pub fn denormalize_slice(values: &mut [f32]) {
    for v in values {
        *v = denormalize(f64::from(*v)) as f32;
    }
}
