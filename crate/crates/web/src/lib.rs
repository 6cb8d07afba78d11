//! WebAssembly bindings for the browser demo in `www/`.

pub mod demo;

use wasm_bindgen::prelude::*;

fn js(e: mpm_hybrid::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Scene {
    inner: demo::Demo,
}

#[wasm_bindgen]
impl Scene {
    /// `template` is dam_break, solids_drop or water_drop.
    #[wasm_bindgen(constructor)]
    pub fn new(template: &str, resolution: usize, seed: u32) -> Result<Scene, JsError> {
        Ok(Scene {
            inner: demo::Demo::new(template, resolution, u64::from(seed)).map_err(js)?,
        })
    }

    pub fn step(&mut self, frames: usize) -> Result<(), JsError> {
        self.inner.step(frames).map_err(js)
    }

    pub fn frame(&self) -> usize {
        self.inner.frame()
    }

    pub fn dims(&self) -> Vec<u32> {
        self.inner.dims().iter().map(|&d| d as u32).collect()
    }

    pub fn slice(&self, channel: usize, axis: usize, index: usize) -> Result<Vec<f32>, JsError> {
        self.inner.slice(channel, axis, index).map_err(js)
    }

    /// Residual histories from a zero start and from the last frame's pressure.
    pub fn residual_curves(&self, solver: &str, tol: f64) -> Result<ResidualCurves, JsError> {
        let c = self.inner.residual_curves(solver, tol).map_err(js)?;
        Ok(ResidualCurves { cold: c.cold, warm: c.warm })
    }
}

#[wasm_bindgen]
pub struct ResidualCurves {
    cold: Vec<f64>,
    warm: Vec<f64>,
}

#[wasm_bindgen]
impl ResidualCurves {
    pub fn cold(&self) -> Vec<f64> {
        self.cold.clone()
    }

    pub fn warm(&self) -> Vec<f64> {
        self.warm.clone()
    }
}

#[wasm_bindgen]
pub fn normalize_curve(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, JsError> {
    demo::normalize_curve(lo, hi, n).map_err(js)
}

#[wasm_bindgen]
pub fn normalize_value(x: f64) -> f64 {
    mpm_hybrid::normalize::normalize(x)
}
