//! Transmission media: relative effective permittivity and propagation constant.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const C0: f64 = 299_792_458.0;

/// Complex relative effective permittivity ε′ − jε″.
///
/// `eps_imag` holds the magnitude ε″, so a passive medium always has
/// `eps_imag >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Permittivity {
    pub eps_real: f64,
    pub eps_imag: f64,
}

impl Permittivity {
    pub fn new(eps_real: f64, eps_imag: f64) -> Result<Self> {
        let p = Permittivity { eps_real, eps_imag };
        p.validate()?;
        Ok(p)
    }

    pub fn lossless(eps_real: f64) -> Result<Self> {
        Self::new(eps_real, 0.0)
    }

    /// ε′(1 − j·tanδ), the way lossy media are usually quoted.
    pub fn with_loss_tangent(eps_real: f64, tan_delta: f64) -> Result<Self> {
        Self::new(eps_real, eps_real * tan_delta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_real.is_finite() && self.eps_real > 0.0) {
            return Err(Error::InvalidInput(format!(
                "eps_real must be finite and > 0, got {}",
                self.eps_real
            )));
        }
        if !(self.eps_imag.is_finite() && self.eps_imag >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "eps_imag must be finite and >= 0, got {}",
                self.eps_imag
            )));
        }
        Ok(())
    }

    pub fn is_lossless(&self) -> bool {
        self.eps_imag == 0.0
    }
}

/// One row of a tabulated permittivity model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TablePoint {
    pub frequency_hz: f64,
    pub permittivity: Permittivity,
}

/// Frequency → permittivity model of the line medium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DispersionModel {
    Constant(Permittivity),
    /// Linear interpolation of ε′ and ε″ separately. No extrapolation.
    Tabulated { points: Vec<TablePoint> },
    /// Hollow rectangular waveguide, TE10 mode, lossless.
    Waveguide { width_m: f64, eps_r: f64 },
}

impl DispersionModel {
    pub fn constant(eps_real: f64, eps_imag: f64) -> Result<Self> {
        Ok(DispersionModel::Constant(Permittivity::new(eps_real, eps_imag)?))
    }

    pub fn tabulated(points: Vec<(f64, Permittivity)>) -> Result<Self> {
        let model = DispersionModel::Tabulated {
            points: points
                .into_iter()
                .map(|(frequency_hz, permittivity)| TablePoint {
                    frequency_hz,
                    permittivity,
                })
                .collect(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn waveguide(width_m: f64, eps_r: f64) -> Result<Self> {
        let model = DispersionModel::Waveguide { width_m, eps_r };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DispersionModel::Constant(p) => p.validate(),
            DispersionModel::Tabulated { points } => {
                if points.len() < 2 {
                    return Err(Error::InvalidInput(
                        "tabulated model needs at least 2 points".into(),
                    ));
                }
                for p in points {
                    p.permittivity.validate()?;
                    if !(p.frequency_hz.is_finite() && p.frequency_hz > 0.0) {
                        return Err(Error::InvalidInput(format!(
                            "tabulated frequency must be > 0, got {}",
                            p.frequency_hz
                        )));
                    }
                }
                if points
                    .windows(2)
                    .any(|w| w[1].frequency_hz <= w[0].frequency_hz)
                {
                    return Err(Error::InvalidInput(
                        "tabulated frequencies must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
            DispersionModel::Waveguide { width_m, eps_r } => {
                if !(width_m.is_finite() && *width_m > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "waveguide width must be > 0, got {width_m}"
                    )));
                }
                if !(eps_r.is_finite() && *eps_r >= 1.0) {
                    return Err(Error::InvalidInput(format!(
                        "waveguide filling eps_r must be >= 1, got {eps_r}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// TE10 cutoff frequency for the waveguide variant.
    pub fn cutoff_frequency(&self) -> Option<f64> {
        match self {
            DispersionModel::Waveguide { width_m, eps_r } => {
                Some(C0 / (2.0 * width_m * eps_r.sqrt()))
            }
            _ => None,
        }
    }

    pub fn is_lossless(&self) -> bool {
        match self {
            DispersionModel::Constant(p) => p.is_lossless(),
            DispersionModel::Tabulated { points } => {
                points.iter().all(|p| p.permittivity.is_lossless())
            }
            DispersionModel::Waveguide { .. } => true,
        }
    }

    /// False only for the constant model.
    pub fn is_dispersive(&self) -> bool {
        !matches!(self, DispersionModel::Constant(_))
    }

    pub fn permittivity_at(&self, f: f64) -> Result<Permittivity> {
        if !(f.is_finite() && f > 0.0) {
            return Err(Error::InvalidInput(format!(
                "frequency must be finite and > 0, got {f}"
            )));
        }
        match self {
            DispersionModel::Constant(p) => Ok(*p),
            DispersionModel::Tabulated { points } => {
                let lo = points[0].frequency_hz;
                let hi = points[points.len() - 1].frequency_hz;
                if f < lo || f > hi {
                    return Err(Error::OutOfRange { f, lo, hi });
                }
                // first index whose frequency is >= f
                let k = points.partition_point(|p| p.frequency_hz < f);
                if k == 0 {
                    return Ok(points[0].permittivity);
                }
                let (a, b) = (&points[k - 1], &points[k]);
                let t = (f - a.frequency_hz) / (b.frequency_hz - a.frequency_hz);
                let lerp = |x: f64, y: f64| x + t * (y - x);
                Ok(Permittivity {
                    eps_real: lerp(a.permittivity.eps_real, b.permittivity.eps_real),
                    eps_imag: lerp(a.permittivity.eps_imag, b.permittivity.eps_imag),
                })
            }
            DispersionModel::Waveguide { eps_r, .. } => {
                let fc = self.cutoff_frequency().expect("waveguide has a cutoff");
                if f <= fc {
                    return Err(Error::BelowCutoff { f, cutoff: fc });
                }
                let r = fc / f;
                Ok(Permittivity {
                    eps_real: eps_r * (1.0 - r * r),
                    eps_imag: 0.0,
                })
            }
        }
    }

    pub fn gamma(&self, f: f64) -> Result<Complex64> {
        Ok(gamma_from_permittivity(self.permittivity_at(f)?, f))
    }

    /// Open/closed interval of frequencies where the model is defined.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            DispersionModel::Constant(_) => (0.0, f64::INFINITY),
            DispersionModel::Tabulated { points } => {
                (points[0].frequency_hz, points[points.len() - 1].frequency_hz)
            }
            DispersionModel::Waveguide { .. } => (
                self.cutoff_frequency().expect("waveguide has a cutoff"),
                f64::INFINITY,
            ),
        }
    }

    /// Mean ε′ over `n` equally spaced points of [f_lo, f_hi].
    pub fn mean_eps_real(&self, f_lo: f64, f_hi: f64, n: usize) -> Result<f64> {
        let grid = FrequencyGrid::linspace(f_lo, f_hi, n.max(2))?;
        if let DispersionModel::Constant(p) = self {
            return Ok(p.eps_real);
        }
        let mut sum = 0.0;
        for &f in grid.as_slice() {
            sum += self.permittivity_at(f)?.eps_real;
        }
        Ok(sum / grid.len() as f64)
    }

    /// Electrical length β(f)·l in radians.
    pub fn electrical_length(&self, length: f64, f: f64) -> Result<f64> {
        Ok(self.gamma(f)?.im * length)
    }

    /// Frequency at which β(f)·length equals `phase` radians.
    ///
    /// Solved by bisection; β(f) is increasing for every supported model
    /// with physical data.
    pub fn frequency_at_electrical_length(&self, length: f64, phase: f64) -> Result<f64> {
        if !(length > 0.0 && phase > 0.0) {
            return Err(Error::InvalidInput(format!(
                "need length > 0 and phase > 0, got {length} and {phase}"
            )));
        }
        if let DispersionModel::Constant(p) = self {
            return Ok(phase * C0 / (2.0 * PI * length * p.eps_real.sqrt()));
        }
        let (dom_lo, dom_hi) = self.domain();
        let beta_l = |f: f64| self.electrical_length(length, f);
        let mut lo = if dom_lo > 0.0 {
            dom_lo * (1.0 + 1e-12)
        } else {
            f64::MIN_POSITIVE
        };
        if beta_l(lo)? >= phase {
            return Ok(lo);
        }
        let mut hi = if dom_hi.is_finite() {
            dom_hi
        } else {
            (2.0 * lo).max(1e6)
        };
        while beta_l(hi)? < phase {
            if !dom_hi.is_finite() {
                lo = hi;
                hi *= 2.0;
                if hi > 1e18 {
                    return Err(Error::Infeasible(
                        "electrical length target not reached below 1e18 Hz".into(),
                    ));
                }
            } else {
                return Err(Error::OutOfRange {
                    f: f64::INFINITY,
                    lo: dom_lo,
                    hi: dom_hi,
                });
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if beta_l(mid)? < phase {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// γ = (2πf/c0)·√(−(ε′ − jε″)) on the passive, forward-wave branch.
pub fn gamma_from_permittivity(eps: Permittivity, f: f64) -> Complex64 {
    let k0 = 2.0 * PI * f / C0;
    if eps.eps_imag == 0.0 {
        return Complex64::new(0.0, k0 * eps.eps_real.sqrt());
    }
    // principal root of a number in the upper half plane lands in the
    // first quadrant: Re ≥ 0, Im > 0
    k0 * Complex64::new(-eps.eps_real, eps.eps_imag).sqrt()
}

/// Strictly increasing list of positive frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FrequencyGrid(Vec<f64>);

impl FrequencyGrid {
    pub fn new(frequencies: Vec<f64>) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::InvalidInput("frequency grid is empty".into()));
        }
        if frequencies.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::InvalidInput(
                "grid frequencies must be finite and > 0".into(),
            ));
        }
        if frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "grid frequencies must be strictly increasing".into(),
            ));
        }
        Ok(FrequencyGrid(frequencies))
    }

    pub fn linspace(start: f64, stop: f64, points: usize) -> Result<Self> {
        if points == 1 {
            return Self::new(vec![start]);
        }
        if points == 0 || stop <= start {
            return Err(Error::InvalidInput(format!(
                "linspace needs points >= 1 and stop > start, got {points} points on [{start}, {stop}]"
            )));
        }
        let step = (stop - start) / (points - 1) as f64;
        let mut v: Vec<f64> = (0..points).map(|i| start + step * i as f64).collect();
        v[points - 1] = stop;
        Self::new(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.0[0]
    }

    pub fn last(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    /// γ at every grid point.
    pub fn gammas(&self, model: &DispersionModel) -> Result<Vec<Complex64>> {
        self.0.iter().map(|&f| model.gamma(f)).collect()
    }
}

impl TryFrom<Vec<f64>> for FrequencyGrid {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        FrequencyGrid::new(v)
    }
}

impl From<FrequencyGrid> for Vec<f64> {
    fn from(g: FrequencyGrid) -> Self {
        g.0
    }
}
