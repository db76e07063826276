//! Browser bindings: everything runs client-side on a synthetic or pasted
//! model pair. Methods return JSON strings.

mod session;

pub use session::DemoSession;

use wasm_bindgen::prelude::*;

fn js_err(e: embdiff_core::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen]
pub struct Explorer {
    session: DemoSession,
}

#[wasm_bindgen]
impl Explorer {
    pub fn synthetic(seed: u32, n: usize, dim: usize, perturbed: usize) -> Result<Explorer, JsValue> {
        DemoSession::synthetic(seed as u64, n, dim, perturbed).map(|session| Explorer { session }).map_err(js_err)
    }

    pub fn from_text(a: &str, b: &str) -> Result<Explorer, JsValue> {
        DemoSession::from_text(a, b).map(|session| Explorer { session }).map_err(js_err)
    }

    pub fn k_max(&self) -> usize {
        self.session.k_max()
    }

    pub fn compare(&mut self, k: usize, metric: &str) -> Result<String, JsValue> {
        self.session.compare(k, metric).map_err(js_err)
    }

    pub fn projection(&self, which: usize) -> Result<String, JsValue> {
        self.session.projection(which).map_err(js_err)
    }

    /// `selection` is a comma-separated index list; `None` means no
    /// selection filter.
    pub fn dominoes(&self, order: &str, lo: f64, hi: f64, selection: Option<String>, limit: usize) -> Result<String, JsValue> {
        let selection = match selection {
            None => None,
            Some(s) if s.trim().is_empty() => Some(Vec::new()),
            Some(s) => Some(
                s.split(',')
                    .map(|t| t.trim().parse::<u32>().map_err(|_| JsValue::from_str(&format!("bad index {t:?}"))))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
        };
        self.session.dominoes(order, lo, hi, selection, limit).map_err(js_err)
    }

    pub fn domino(&self, index: usize) -> Result<String, JsValue> {
        self.session.domino(index).map_err(js_err)
    }
}
