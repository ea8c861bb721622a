//! WebAssembly bindings for the static demo page in `www/`. Every export
//! returns JSON (or raw RGBA for the canvas) and reports failures as a JS
//! `Error` carrying the library's message.

pub mod api;

use wasm_bindgen::prelude::*;

fn js(err: noisemap::Error) -> JsError {
    JsError::new(&format!("{} ({})", err, err.category()))
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, JsError> {
    serde_json::to_string(value).map_err(|e| JsError::new(&e.to_string()))
}

/// ΔE00 from an RGB color to every band of a built-in palette, plus the
/// noise level it classifies to.
#[wasm_bindgen]
pub fn classify(palette: &str, red: u8, green: u8, blue: u8, threshold: f64) -> Result<String, JsError> {
    to_json(&api::classify(palette, [red, green, blue], threshold).map_err(js)?)
}

#[wasm_bindgen]
pub struct HeatmapDemo {
    inner: api::RoundTrip,
}

#[wasm_bindgen]
impl HeatmapDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(palette: &str, width: usize, height: usize, seed: u64, blend: bool) -> Result<HeatmapDemo, JsError> {
        Ok(Self { inner: api::heatmap_round_trip(palette, width, height, seed, blend).map_err(js)? })
    }

    pub fn width(&self) -> usize {
        self.inner.width
    }

    pub fn height(&self) -> usize {
        self.inner.height
    }

    /// Row-major RGBA bytes for `ImageData`.
    pub fn rgba(&self) -> Vec<u8> {
        self.inner.rgba.clone()
    }

    /// Scan and tessellation counts as JSON.
    pub fn stats(&self) -> Result<String, JsError> {
        to_json(&self.inner)
    }
}

#[wasm_bindgen]
pub fn planted_dependence(seed: u64, beta: f64, rows: usize) -> Result<String, JsError> {
    to_json(&api::planted_dependence(seed, beta, rows).map_err(js)?)
}
