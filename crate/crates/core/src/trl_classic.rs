//! Two-line TRL band arithmetic.
//!
//! A line pair with length difference l and constant ε′ has a usable band
//! of phase margin φ around each quarter-wave frequency,
//!
//! ```text
//! f_min = (n + φ/180)     · c0 / (2 l √ε′)
//! f_max = (n + 1 − φ/180) · c0 / (2 l √ε′)
//! ```
//!
//! where n counts half-wave wraps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::medium::C0;

/// A frequency band with the phase margin it is designed for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub f_min: f64,
    pub f_max: f64,
    pub phase_margin_deg: f64,
    pub band_index: u32,
}

impl BandSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_min > 0.0 && self.f_min < self.f_max && self.f_max.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "band needs 0 < f_min < f_max, got [{}, {}]",
                self.f_min, self.f_max
            )));
        }
        if !(self.phase_margin_deg > 0.0 && self.phase_margin_deg < 90.0) {
            return Err(Error::InvalidInput(format!(
                "phase margin must lie in (0, 90) degrees, got {}",
                self.phase_margin_deg
            )));
        }
        Ok(())
    }

    pub fn ratio(&self) -> f64 {
        self.f_min / self.f_max
    }
}

/// Which band edge a length is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrlDesign {
    pub length_diff: f64,
    pub achieved_margin: f64,
    pub band_index: u32,
    /// Quarter-wave frequency of the pair in the chosen band.
    pub center_frequency: f64,
    pub meets_margin: bool,
}

/// Frequency at which a length difference of `l_diff` spans one half-wave.
fn half_wave_frequency(l_diff: f64, eps_real: f64) -> f64 {
    C0 / (2.0 * l_diff * eps_real.sqrt())
}

/// (f_min, f_max) of band `n` for a pair with length difference `l_diff`.
///
/// A margin of 90° collapses the band to the quarter-wave frequency.
pub fn band_edges(l_diff: f64, eps_real: f64, margin_deg: f64, n: u32) -> (f64, f64) {
    let h = half_wave_frequency(l_diff, eps_real);
    let p = margin_deg / 180.0;
    let n = n as f64;
    ((n + p) * h, (n + 1.0 - p) * h)
}

/// Quarter-wave frequency of band `n`.
pub fn quarter_wave_frequency(l_diff: f64, eps_real: f64, n: u32) -> f64 {
    band_edges(l_diff, eps_real, 90.0, n).0
}

/// Highest band index whose band still spans [f_min, f_max] at the given
/// margin, clamped at 0.
pub fn band_index(f_min: f64, f_max: f64, margin_deg: f64) -> u32 {
    let q = f_min / f_max;
    if q >= 1.0 {
        return u32::MAX;
    }
    let x = (q - (q + 1.0) * margin_deg / 180.0) / (1.0 - q);
    // the exact boundary cases (e.g. q = 1/8 at 20°) land a few ulps below
    // an integer
    let n = (x + 1e-9).floor();
    if n <= 0.0 {
        0
    } else if n >= u32::MAX as f64 {
        u32::MAX
    } else {
        n as u32
    }
}

/// Margin achieved over [f_min, f_max] by the best length in band `n`.
///
/// Fails with [`Error::Infeasible`] when no positive margin is possible.
pub fn achieved_margin(f_min: f64, f_max: f64, n: u32) -> Result<f64> {
    let q = f_min / f_max;
    let n = n as f64;
    let phi = 180.0 * (n * q - n + q) / (q + 1.0);
    if phi < 0.0 {
        return Err(Error::Infeasible(format!(
            "band {n} cannot cover a frequency ratio of {q} (margin {phi:.3}°)"
        )));
    }
    Ok(phi)
}

/// Length difference placing `f` on the chosen edge of band `n`.
pub fn length_for_band(f: f64, eps_real: f64, margin_deg: f64, n: u32, anchor: Anchor) -> f64 {
    let p = margin_deg / 180.0;
    let n = n as f64;
    let k = match anchor {
        Anchor::Low => n + p,
        Anchor::High => n + 1.0 - p,
    };
    C0 / (2.0 * f * eps_real.sqrt()) * k
}

/// Classical two-line design for a band: the highest usable band index and
/// the length that centres the band on [f_min, f_max].
///
/// When the ratio forces n = 0 with less than the requested margin the
/// design is still returned, with `meets_margin` false.
pub fn design_trl(spec: &BandSpec, eps_real: f64) -> Result<TrlDesign> {
    spec.validate()?;
    if !(eps_real > 0.0) {
        return Err(Error::InvalidInput(format!("eps_real must be > 0, got {eps_real}")));
    }
    let n = band_index(spec.f_min, spec.f_max, spec.phase_margin_deg);
    let phi = achieved_margin(spec.f_min, spec.f_max, n)?;
    let length_diff = length_for_band(spec.f_min, eps_real, phi, n, Anchor::Low);
    Ok(TrlDesign {
        length_diff,
        achieved_margin: phi,
        band_index: n,
        center_frequency: quarter_wave_frequency(length_diff, eps_real, n),
        meets_margin: phi >= spec.phase_margin_deg - 1e-9,
    })
}
