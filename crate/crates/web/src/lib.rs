//! Browser bindings for a few linekit operations.
//!
//! Each exported function wraps a plain Rust function returning
//! `Result<_, String>` so the logic is testable off the browser.

use linekit::eigenmetrics::{effective_phase, Scaling};
use linekit::medium::{DispersionModel, FrequencyGrid};
use linekit::rulers::{design_by_ruler, RulerFamily, RulerRequest};
use linekit::trl_classic::{band_edges, design_trl, BandSpec};
use linekit::LineSet;
use wasm_bindgen::prelude::*;

const GHZ: f64 = 1e9;

/// Frequencies in GHz followed by φ in degrees, `points` of each.
/// Degenerate points carry φ = 0.
pub fn phase_curve(
    lengths_mm: &[f64],
    eps_real: f64,
    eps_imag: f64,
    f_min_ghz: f64,
    f_max_ghz: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    let lines = LineSet::from_mm(lengths_mm).map_err(|e| e.to_string())?;
    let model = DispersionModel::constant(eps_real, eps_imag).map_err(|e| e.to_string())?;
    let grid = FrequencyGrid::linspace(f_min_ghz * GHZ, f_max_ghz * GHZ, points).map_err(|e| e.to_string())?;
    let curve = effective_phase(&lines, &model, &grid, Scaling::None).map_err(|e| e.to_string())?;
    let mut out: Vec<f64> = curve.points.iter().map(|p| p.frequency_hz / GHZ).collect();
    out.extend(curve.points.iter().map(|p| if p.degenerate { 0.0 } else { p.phi_deg }));
    Ok(out)
}

#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct RulerResult {
    marks: Vec<u32>,
    lengths_mm: Vec<f64>,
    family: String,
    min_phase_deg: f64,
    meets_margin: bool,
    suggested_order: usize,
}

#[wasm_bindgen]
impl RulerResult {
    #[wasm_bindgen(getter)]
    pub fn marks(&self) -> Vec<u32> {
        self.marks.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn lengths_mm(&self) -> Vec<f64> {
        self.lengths_mm.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn family(&self) -> String {
        self.family.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn min_phase_deg(&self) -> f64 {
        self.min_phase_deg
    }
    #[wasm_bindgen(getter)]
    pub fn meets_margin(&self) -> bool {
        self.meets_margin
    }
    #[wasm_bindgen(getter)]
    pub fn suggested_order(&self) -> usize {
        self.suggested_order
    }
}

fn family(name: &str) -> Result<RulerFamily, String> {
    match name {
        "golomb" => Ok(RulerFamily::Golomb),
        "wichmann" => Ok(RulerFamily::Wichmann),
        "perfect" => Ok(RulerFamily::Perfect),
        other => Err(format!("unknown ruler family `{other}`")),
    }
}

/// `n_lines == 0` lets the designer pick the order.
pub fn ruler_design(
    f_min_ghz: f64,
    f_max_ghz: f64,
    eps_real: f64,
    margin_deg: f64,
    family_name: &str,
    n_lines: usize,
) -> Result<RulerResult, String> {
    let d = design_by_ruler(&RulerRequest {
        f_min: f_min_ghz * GHZ,
        f_max: f_max_ghz * GHZ,
        margin_deg,
        model: DispersionModel::constant(eps_real, 0.0).map_err(|e| e.to_string())?,
        band_n: 0,
        n_lines: (n_lines > 0).then_some(n_lines),
        family: family(family_name)?,
    })
    .map_err(|e| e.to_string())?;
    Ok(RulerResult {
        marks: d.ruler.marks.clone(),
        lengths_mm: d.lengths.lengths().iter().map(|l| l * 1e3).collect(),
        family: d.ruler.family.name().to_string(),
        min_phase_deg: d.min_phase_deg,
        meets_margin: d.meets_margin,
        suggested_order: d.suggested_order,
    })
}

#[wasm_bindgen]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrlResult {
    pub length_mm: f64,
    pub achieved_margin_deg: f64,
    pub band_index: u32,
    pub center_ghz: f64,
    pub band_lo_ghz: f64,
    pub band_hi_ghz: f64,
    pub meets_margin: bool,
}

/// Classical two-line TRL; the band fields are where φ stays above `margin_deg`.
pub fn trl_band(f_min_ghz: f64, f_max_ghz: f64, eps_real: f64, margin_deg: f64) -> Result<TrlResult, String> {
    let spec = BandSpec {
        f_min: f_min_ghz * GHZ,
        f_max: f_max_ghz * GHZ,
        phase_margin_deg: margin_deg,
        band_index: 0,
    };
    let d = design_trl(&spec, eps_real).map_err(|e| e.to_string())?;
    let (lo, hi) = band_edges(d.length_diff, eps_real, margin_deg, d.band_index);
    Ok(TrlResult {
        length_mm: d.length_diff * 1e3,
        achieved_margin_deg: d.achieved_margin,
        band_index: d.band_index,
        center_ghz: d.center_frequency / GHZ,
        band_lo_ghz: lo / GHZ,
        band_hi_ghz: hi / GHZ,
        meets_margin: d.meets_margin,
    })
}

#[wasm_bindgen(js_name = phaseCurve)]
pub fn phase_curve_js(
    lengths_mm: &[f64],
    eps_real: f64,
    eps_imag: f64,
    f_min_ghz: f64,
    f_max_ghz: f64,
    points: usize,
) -> Result<Vec<f64>, JsValue> {
    phase_curve(lengths_mm, eps_real, eps_imag, f_min_ghz, f_max_ghz, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = rulerDesign)]
pub fn ruler_design_js(
    f_min_ghz: f64,
    f_max_ghz: f64,
    eps_real: f64,
    margin_deg: f64,
    family_name: &str,
    n_lines: usize,
) -> Result<RulerResult, JsValue> {
    ruler_design(f_min_ghz, f_max_ghz, eps_real, margin_deg, family_name, n_lines).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = trlBand)]
pub fn trl_band_js(f_min_ghz: f64, f_max_ghz: f64, eps_real: f64, margin_deg: f64) -> Result<TrlResult, JsValue> {
    trl_band(f_min_ghz, f_max_ghz, eps_real, margin_deg).map_err(|e| JsValue::from_str(&e))
}
