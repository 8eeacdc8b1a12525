//! Number of lines for a lossless kit.
//!
//! The longest line l_max spans x = 2 l_max f √ε′ / c0 half-waves at f.
//! Covering that span with pair bands of margin φ needs
//! M = ⌈x − 1 + φ/180⌉ + 1 pairs, and N lines give N(N−1)/2 pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::medium::{DispersionModel, C0};

/// Pair count for a span of `half_waves` electrical half-wavelengths.
pub fn pairs_for_half_waves(half_waves: f64, margin_deg: f64) -> u32 {
    // tolerance keeps exact integer spans from rounding up one pair
    let v = (half_waves - 1.0 + margin_deg / 180.0 - 1e-9).ceil();
    (v.max(0.0) as u32) + 1
}

fn half_waves(l_max: f64, f: f64, eps_real: f64) -> f64 {
    2.0 * l_max * f * eps_real.sqrt() / C0
}

/// Pairs needed from DC to `f_max`.
pub fn pairs_full_band(l_max: f64, f_max: f64, eps_real: f64, margin_deg: f64) -> u32 {
    pairs_for_half_waves(half_waves(l_max, f_max, eps_real), margin_deg)
}

/// Pairs needed over the bandwidth f_max − f_min.
pub fn pairs_banded(l_max: f64, f_min: f64, f_max: f64, eps_real: f64, margin_deg: f64) -> u32 {
    pairs_full_band(l_max, (f_max - f_min).max(0.0), eps_real, margin_deg)
}

/// Smallest m in [m_min, m_max] dividing m_max.
pub fn pairs_harmonic(m_min: u32, m_max: u32) -> u32 {
    let lo = m_min.clamp(1, m_max.max(1));
    (lo..=m_max).find(|m| m_max % m == 0).unwrap_or(m_max)
}

/// N with N(N−1)/2 closest to `m`, rounding half up.
pub fn lines_from_pairs(m: u32) -> u32 {
    let n = (1.0 + (1.0 + 8.0 * m as f64).sqrt()) / 2.0;
    ((n + 0.5).floor() as u32).max(2)
}

pub fn is_prime(m: u32) -> bool {
    m >= 2 && (2..).take_while(|d| d * d <= m).all(|d| m % d != 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineCountResult {
    pub m_max: u32,
    pub m_min: u32,
    pub m: u32,
    pub n_lines: u32,
    /// N−1, N, N+1, with the lower end kept at 2 or more.
    pub n_band: [u32; 3],
    /// m_max is prime, so the harmonic search returns full coverage.
    pub m_max_prime: bool,
}

impl LineCountResult {
    fn from_pairs(m_max: u32, m_min: u32, m: u32) -> Self {
        let n = lines_from_pairs(m);
        LineCountResult {
            m_max,
            m_min,
            m,
            n_lines: n,
            n_band: [(n - 1).max(2), n, n + 1],
            m_max_prime: is_prime(m_max),
        }
    }
}

/// Line count for a sparse-ruler (harmonically related) kit.
pub fn recommend(l_max: f64, f_min: f64, f_max: f64, eps_real: f64, margin_deg: f64) -> Result<LineCountResult> {
    if !(l_max > 0.0 && eps_real > 0.0 && f_min >= 0.0 && f_min < f_max) {
        return Err(Error::InvalidInput(format!(
            "line count needs l_max > 0, eps_real > 0 and 0 <= f_min < f_max, got l_max={l_max}, eps_real={eps_real}, [{f_min}, {f_max}]"
        )));
    }
    if !(margin_deg > 0.0 && margin_deg < 90.0) {
        return Err(Error::InvalidInput(format!("phase margin must lie in (0, 90), got {margin_deg}")));
    }
    let m_max = pairs_full_band(l_max, f_max, eps_real, margin_deg);
    let m_min = pairs_banded(l_max, f_min, f_max, eps_real, margin_deg).min(m_max);
    let m = pairs_harmonic(m_min, m_max);
    Ok(LineCountResult::from_pairs(m_max, m_min, m))
}

/// Line count for an optimised kit over [f_lo, f_hi].
///
/// Uses the electrical length β(f)·l_max, so dispersive media are handled
/// exactly, and takes m = m_min since optimised lengths need not be
/// harmonically related.
pub fn recommend_for_band(
    model: &DispersionModel,
    l_max: f64,
    f_lo: f64,
    f_hi: f64,
    margin_deg: f64,
) -> Result<LineCountResult> {
    if !(l_max > 0.0 && f_lo > 0.0 && f_lo < f_hi) {
        return Err(Error::InvalidInput(format!(
            "line count needs l_max > 0 and 0 < f_lo < f_hi, got l_max={l_max}, [{f_lo}, {f_hi}]"
        )));
    }
    let hw = |f: f64| -> Result<f64> { Ok(model.electrical_length(l_max, f)? / std::f64::consts::PI) };
    let hi = hw(f_hi)?;
    let m_max = pairs_for_half_waves(hi, margin_deg);
    let m_min = pairs_for_half_waves(hi - hw(f_lo)?, margin_deg).min(m_max);
    Ok(LineCountResult::from_pairs(m_max, m_min, m_min))
}
