//! Sparse-ruler line kits.
//!
//! Lengths are integer marks times a unit length l0, so every pair
//! difference is a multiple of l0 and the eigenvalue is a Fourier series in
//! 2βl0. The response repeats with period f_p = c0/(2 l0 √ε′) and vanishes
//! at every multiple of f_p.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::eigenmetrics::{effective_phase, LineSet, Scaling};
use crate::error::{Error, Result};
use crate::line_count;
use crate::medium::{DispersionModel, FrequencyGrid, C0};
use crate::trl_classic::{self, Anchor, BandSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RulerFamily {
    Perfect,
    #[default]
    Golomb,
    Wichmann,
}

impl RulerFamily {
    pub fn name(&self) -> &'static str {
        match self {
            RulerFamily::Perfect => "perfect",
            RulerFamily::Golomb => "golomb",
            RulerFamily::Wichmann => "wichmann",
        }
    }

    /// Supported orders (number of marks).
    pub fn orders(&self) -> std::ops::RangeInclusive<usize> {
        match self {
            RulerFamily::Perfect => 2..=4,
            RulerFamily::Golomb => 2..=(GOLOMB.len() + 1),
            RulerFamily::Wichmann => 3..=(WICHMANN.len() + 2),
        }
    }
}

/// Shortest known Golomb rulers, orders 2 through 20.
pub const GOLOMB: [&[u32]; 19] = [
    &[0, 1],
    &[0, 1, 3],
    &[0, 1, 4, 6],
    &[0, 1, 4, 9, 11],
    &[0, 1, 4, 10, 12, 17],
    &[0, 1, 4, 10, 18, 23, 25],
    &[0, 1, 4, 9, 15, 22, 32, 34],
    &[0, 1, 5, 12, 25, 27, 35, 41, 44],
    &[0, 1, 6, 10, 23, 26, 34, 41, 53, 55],
    &[0, 1, 4, 13, 28, 33, 47, 54, 64, 70, 72],
    &[0, 2, 6, 24, 29, 40, 43, 55, 68, 75, 76, 85],
    &[0, 2, 5, 25, 37, 43, 59, 70, 85, 89, 98, 99, 106],
    &[0, 4, 6, 20, 35, 52, 59, 77, 78, 86, 89, 99, 122, 127],
    &[0, 4, 20, 30, 57, 59, 62, 76, 100, 111, 123, 136, 144, 145, 151],
    &[0, 1, 4, 11, 26, 32, 56, 68, 76, 115, 117, 134, 150, 163, 168, 177],
    &[0, 5, 7, 17, 52, 56, 67, 80, 81, 100, 122, 138, 159, 165, 168, 191, 199],
    &[0, 2, 10, 22, 53, 56, 82, 83, 89, 98, 130, 148, 153, 167, 188, 192, 205, 216],
    &[0, 1, 6, 25, 32, 72, 100, 108, 120, 130, 153, 169, 187, 190, 204, 231, 233, 242, 246],
    &[0, 1, 8, 11, 68, 77, 94, 116, 121, 156, 158, 179, 194, 208, 212, 228, 240, 253, 259, 283],
];

/// Longest Wichmann ruler W(r, s) of each order 3 through 20.
pub const WICHMANN: [&[u32]; 18] = [
    &[0, 1, 3],
    &[0, 1, 4, 6],
    &[0, 1, 4, 7, 9],
    &[0, 1, 4, 7, 10, 12],
    &[0, 1, 4, 7, 10, 13, 15],
    &[0, 1, 3, 6, 13, 17, 21, 22],
    &[0, 1, 3, 6, 13, 20, 24, 28, 29],
    &[0, 1, 3, 6, 13, 20, 27, 31, 35, 36],
    &[0, 1, 3, 6, 13, 20, 27, 34, 38, 42, 43],
    &[0, 1, 3, 6, 13, 20, 27, 34, 41, 45, 49, 50],
    &[0, 1, 3, 6, 13, 20, 27, 34, 41, 48, 52, 56, 57],
    &[0, 1, 2, 5, 10, 15, 26, 37, 48, 54, 60, 66, 67, 68],
    &[0, 1, 2, 5, 10, 15, 26, 37, 48, 59, 65, 71, 77, 78, 79],
    &[0, 1, 2, 5, 10, 15, 26, 37, 48, 59, 70, 76, 82, 88, 89, 90],
    &[0, 1, 2, 5, 10, 15, 26, 37, 48, 59, 70, 81, 87, 93, 99, 100, 101],
    &[0, 1, 2, 5, 10, 15, 26, 37, 48, 59, 70, 81, 92, 98, 104, 110, 111, 112],
    &[0, 1, 2, 5, 10, 15, 26, 37, 48, 59, 70, 81, 92, 103, 109, 115, 121, 122, 123],
    &[0, 1, 2, 3, 7, 14, 21, 28, 43, 58, 73, 88, 103, 111, 119, 127, 135, 136, 137, 138],
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ruler {
    pub family: RulerFamily,
    pub marks: Vec<u32>,
}

impl Ruler {
    pub fn new(family: RulerFamily, marks: Vec<u32>) -> Result<Self> {
        if marks.len() < 2 || marks[0] != 0 || marks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "ruler marks must start at 0 and strictly increase, got {marks:?}"
            )));
        }
        Ok(Ruler { family, marks })
    }

    pub fn order(&self) -> usize {
        self.marks.len()
    }

    pub fn length(&self) -> u32 {
        *self.marks.last().expect("ruler has marks")
    }
}

pub fn ruler_for_order(n_lines: usize, family: RulerFamily) -> Result<Ruler> {
    if !family.orders().contains(&n_lines) {
        return Err(Error::UnsupportedOrder {
            order: n_lines,
            family: family.name().into(),
        });
    }
    let marks = match family {
        RulerFamily::Perfect | RulerFamily::Golomb => GOLOMB[n_lines - 2],
        RulerFamily::Wichmann => WICHMANN[n_lines - 3],
    };
    Ok(Ruler {
        family,
        marks: marks.to_vec(),
    })
}

/// Census of the pairwise differences of a ruler.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RulerCensus {
    pub is_golomb: bool,
    /// Full coverage of 1..=length.
    pub is_complete: bool,
    pub covered: BTreeSet<u32>,
    pub gaps: BTreeSet<u32>,
}

pub fn verify_ruler(r: &Ruler) -> RulerCensus {
    let mut covered = BTreeSet::new();
    let mut is_golomb = true;
    for (i, a) in r.marks.iter().enumerate() {
        for b in &r.marks[i + 1..] {
            is_golomb &= covered.insert(b - a);
        }
    }
    let gaps: BTreeSet<u32> = (1..=r.length()).filter(|d| !covered.contains(d)).collect();
    RulerCensus {
        is_golomb,
        is_complete: gaps.is_empty(),
        covered,
        gaps,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulerRequest {
    pub f_min: f64,
    pub f_max: f64,
    pub margin_deg: f64,
    pub model: DispersionModel,
    #[serde(default)]
    pub band_n: u32,
    #[serde(default)]
    pub n_lines: Option<usize>,
    #[serde(default)]
    pub family: RulerFamily,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulerDesign {
    pub ruler: Ruler,
    pub l0: f64,
    pub lengths: LineSet,
    /// ε′ used for the band arithmetic (mean over the band for dispersive media).
    pub eps_real: f64,
    pub covered_bands: Vec<BandSpec>,
    pub min_phase_deg: f64,
    pub meets_margin: bool,
    /// Order suggested by the line-count rule before any increase.
    pub suggested_order: usize,
}

/// Points of the margin check grid.
pub const CHECK_POINTS: usize = 501;

/// Unit length and marks for a band, then lengths = marks × l0.
///
/// Without an explicit order the line-count rule picks a starting order,
/// which is increased until φ ≥ margin on the check grid. When no table
/// order reaches the margin the starting order is returned with
/// `meets_margin` false.
pub fn design_by_ruler(req: &RulerRequest) -> Result<RulerDesign> {
    if !(req.f_min > 0.0 && req.f_min < req.f_max && req.f_max.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "ruler design needs 0 < f_min < f_max, got [{}, {}]",
            req.f_min, req.f_max
        )));
    }
    if !(req.margin_deg > 0.0 && req.margin_deg < 90.0) {
        return Err(Error::InvalidInput(format!(
            "phase margin must lie in (0, 90), got {}",
            req.margin_deg
        )));
    }
    req.model.validate()?;
    let eps = req.model.mean_eps_real(req.f_min, req.f_max, CHECK_POINTS)?;
    let l0 = trl_classic::length_for_band(req.f_max, eps, req.margin_deg, req.band_n, Anchor::High);
    let f_p = C0 / (2.0 * l0 * eps.sqrt());
    let f_null = req.band_n as f64 * f_p;
    if req.f_min <= f_null {
        return Err(Error::Infeasible(format!(
            "band {} of the unit length has a null at {:.6e} Hz inside [{:.6e}, {:.6e}] Hz",
            req.band_n, f_null, req.f_min, req.f_max
        )));
    }
    // longest line that puts f_min on the lower band edge, shifted into band 0
    let l_max = req.margin_deg / 180.0 * C0 / (2.0 * eps.sqrt() * (req.f_min - f_null));
    let count = line_count::recommend(l_max, req.f_min - f_null, req.f_max - f_null, eps, req.margin_deg)?;
    let suggested = count.n_lines as usize;

    let grid = FrequencyGrid::linspace(req.f_min, req.f_max, CHECK_POINTS)?;
    let build = |order: usize| -> Result<RulerDesign> {
        let ruler = ruler_for_order(order, req.family)?;
        let lengths = LineSet::new(ruler.marks.iter().map(|&m| m as f64 * l0).collect())?;
        let curve = effective_phase(&lengths, &req.model, &grid, Scaling::None)?;
        let min_phase = curve.min_phase_deg();
        let covered_bands = covered_bands(&ruler, f_p, req.margin_deg, req.band_n);
        Ok(RulerDesign {
            ruler,
            l0,
            lengths,
            eps_real: eps,
            covered_bands,
            min_phase_deg: min_phase,
            meets_margin: min_phase >= req.margin_deg,
            suggested_order: suggested,
        })
    };

    if let Some(n) = req.n_lines {
        return build(n);
    }
    let first = suggested.max(*req.family.orders().start());
    let initial = build(first)?;
    if initial.meets_margin {
        return Ok(initial);
    }
    for order in (first + 1)..=*req.family.orders().end() {
        let d = build(order)?;
        if d.meets_margin {
            return Ok(d);
        }
    }
    Ok(initial)
}

/// Bands 0..=band_n of a harmonic kit with period `f_p`: the lower edge
/// comes from the longest line, the upper edge from l0.
pub fn covered_bands(ruler: &Ruler, f_p: f64, margin_deg: f64, band_n: u32) -> Vec<BandSpec> {
    let p = margin_deg / 180.0;
    let k_max = ruler.length() as f64;
    (0..=band_n)
        .map(|k| BandSpec {
            f_min: (k as f64 + p / k_max) * f_p,
            f_max: (k as f64 + 1.0 - p) * f_p,
            phase_margin_deg: margin_deg,
            band_index: k,
        })
        .collect()
}
