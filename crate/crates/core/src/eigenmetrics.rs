//! Multiline TRL eigenvalue metrics.
//!
//! For N lines with lengths l_i the weighted eigenproblem of the multiline
//! TRL calibration has the eigenvalue
//!
//! ```text
//! λ = Σ_{i<j} |e^{γ l_ij} − e^{−γ l_ij}|² = ½‖W‖_F²,    l_ij = l_i − l_j
//! ```
//!
//! and the normalized eigenvalue κ = ‖vec W‖₂² / ‖vec W‖₁ is a self-weighted
//! average pair eigengap. The effective phase φ = arcsin(κ/2) is the
//! multiline counterpart of the classical TRL phase.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::medium::{DispersionModel, FrequencyGrid};

/// Line lengths in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LineSet(Vec<f64>);

impl LineSet {
    pub fn new(lengths: Vec<f64>) -> Result<Self> {
        if lengths.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a line set needs at least 2 lines, got {}",
                lengths.len()
            )));
        }
        if let Some(bad) = lengths.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "line lengths must be finite and >= 0, got {bad}"
            )));
        }
        Ok(LineSet(lengths))
    }

    /// Convenience for literals in centimeters.
    pub fn from_cm(lengths_cm: &[f64]) -> Result<Self> {
        Self::new(lengths_cm.iter().map(|l| l * 1e-2).collect())
    }

    pub fn from_mm(lengths_mm: &[f64]) -> Result<Self> {
        Self::new(lengths_mm.iter().map(|l| l * 1e-3).collect())
    }

    pub fn lengths(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_length(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    /// Sorted ascending with the thru at zero.
    pub fn is_design_form(&self) -> bool {
        self.0[0] == 0.0 && self.0.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn translated(&self, offset: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|l| l + offset).collect())
    }

    pub fn pair_count(&self) -> usize {
        self.0.len() * (self.0.len() - 1) / 2
    }
}

impl TryFrom<Vec<f64>> for LineSet {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        LineSet::new(v)
    }
}

impl From<LineSet> for Vec<f64> {
    fn from(l: LineSet) -> Self {
        l.0
    }
}

/// e^{γd} − e^{−γd}, the eigengap phasor of a pair with length difference d.
#[inline]
pub fn pair_phasor(gamma: Complex64, d: f64) -> Complex64 {
    let e = (gamma * d).exp();
    e - 1.0 / e
}

/// N×N skew-symmetric weighting matrix of the multiline eigenproblem.
///
/// Entry (i, j), i < j, is the conjugate of e^{γ l_ij} − e^{−γ l_ij}; that
/// conjugation is what turns L·W·Lᵀ·P·Q into diag(−λ, 0, 0, λ) for lossy
/// lines too. Only moduli enter λ and κ.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightingMatrix {
    n: usize,
    entries: Vec<Complex64>,
}

impl WeightingMatrix {
    pub fn build(lines: &LineSet, gamma: Complex64) -> Self {
        let l = lines.lengths();
        let n = l.len();
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let w = pair_phasor(gamma, l[i] - l[j]).conj();
                entries[i * n + j] = w;
                entries[j * n + i] = -w;
            }
        }
        WeightingMatrix { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.n + j]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.entries.iter().map(|w| w.norm_sqr()).sum()
    }

    /// ‖vec W‖₁.
    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|w| w.norm()).sum()
    }

    /// |w_ij| for i < j in row-major pair order.
    pub fn pair_gaps(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * (self.n - 1) / 2);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                out.push(self.get(i, j).norm());
            }
        }
        out
    }

    /// max |W + Wᵀ| entry.
    pub fn skew_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                r = r.max((self.get(i, j) + self.get(j, i)).norm());
            }
        }
        r
    }

    /// S ⊙ W.
    pub fn hadamard(&self, s: &ScalingMatrix) -> WeightingMatrix {
        assert_eq!(self.n, s.n, "scaling matrix size mismatch");
        WeightingMatrix {
            n: self.n,
            entries: self
                .entries
                .iter()
                .zip(&s.entries)
                .map(|(w, s)| w * *s)
                .collect(),
        }
    }
}

/// Symmetric, element-wise non-negative scaling of the weighting matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl ScalingMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "scaling matrix needs {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        if entries.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidInput(
                "scaling entries must be finite and >= 0".into(),
            ));
        }
        for i in 0..n {
            for j in 0..i {
                if entries[i * n + j] != entries[j * n + i] {
                    return Err(Error::InvalidInput("scaling matrix must be symmetric".into()));
                }
            }
        }
        if entries.iter().all(|s| *s == 0.0) {
            return Err(Error::InvalidInput("scaling matrix is identically zero".into()));
        }
        Ok(ScalingMatrix { n, entries })
    }

    pub fn ones(n: usize) -> Self {
        ScalingMatrix {
            n,
            entries: vec![1.0; n * n],
        }
    }

    /// S = q qᵀ.
    pub fn occurrence(q: &[f64]) -> Result<Self> {
        let n = q.len();
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = q[i] * q[j];
            }
        }
        Self::new(n, entries)
    }

    /// q_i = 1 / (number of lines with the same length as line i).
    pub fn occurrence_of(lines: &LineSet) -> Self {
        let q = occurrence_weights(lines);
        Self::occurrence(&q).expect("occurrence weights are positive")
    }

    /// |W|^{⊙(m−1)}, giving the Lm-norm pair weighting.
    pub fn norm_order(w: &WeightingMatrix, m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("norm order must be >= 1".into()));
        }
        let entries: Vec<f64> = w
            .entries
            .iter()
            .map(|x| if m == 1 { 1.0 } else { x.norm().powi(m as i32 - 1) })
            .collect();
        if entries.iter().all(|s| *s == 0.0) {
            // all pairs null at this frequency; any non-zero scaling gives the
            // same (degenerate) answer
            return Ok(Self::ones(w.n));
        }
        Ok(ScalingMatrix { n: w.n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }
}

/// Per-line occurrence weights 1/multiplicity.
pub fn occurrence_weights(lines: &LineSet) -> Vec<f64> {
    let l = lines.lengths();
    l.iter()
        .map(|a| {
            let count = l
                .iter()
                .filter(|b| (*a - **b).abs() <= 1e-12 * a.abs().max(1e-3))
                .count();
            1.0 / count as f64
        })
        .collect()
}

/// How the weighting matrix is scaled before computing κ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    #[default]
    None,
    Occurrence,
    NormOrder(u32),
}

impl Scaling {
    pub fn matrix(&self, lines: &LineSet, w: &WeightingMatrix) -> Result<ScalingMatrix> {
        match self {
            Scaling::None => Ok(ScalingMatrix::ones(w.n())),
            Scaling::Occurrence => Ok(ScalingMatrix::occurrence_of(lines)),
            Scaling::NormOrder(m) => ScalingMatrix::norm_order(w, *m),
        }
    }
}

/// λ = ½‖W‖_F².
pub fn lambda_value(w: &WeightingMatrix) -> f64 {
    0.5 * w.frobenius_sq()
}

/// λ_S = ½ Re(vec(S⊙W)ᴴ vec(W)).
pub fn lambda_scaled(w: &WeightingMatrix, s: &ScalingMatrix) -> f64 {
    let ws = w.hadamard(s);
    0.5 * ws
        .entries
        .iter()
        .zip(&w.entries)
        .map(|(a, b)| (a.conj() * b).re)
        .sum::<f64>()
}

/// Normalized eigenvalue with a flag for the all-null case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa {
    pub value: f64,
    pub degenerate: bool,
}

/// κ_S = 2λ_S / ‖vec(S⊙W)‖₁; κ = 0 with `degenerate` set when every
/// weighted eigengap vanishes.
pub fn kappa_value(w: &WeightingMatrix, s: &ScalingMatrix) -> Kappa {
    let l1 = w.hadamard(s).l1_norm();
    if l1 == 0.0 || !l1.is_finite() {
        return Kappa {
            value: 0.0,
            degenerate: true,
        };
    }
    Kappa {
        value: 2.0 * lambda_scaled(w, s) / l1,
        degenerate: false,
    }
}

/// φ = arcsin(κ/2) in degrees, clipped to 90° when κ > 2 (lossy lines).
pub fn phase_from_kappa(kappa: f64) -> f64 {
    (0.5 * kappa).clamp(0.0, 1.0).asin().to_degrees()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub frequency_hz: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub phi_deg: f64,
    pub degenerate: bool,
}

/// λ, κ and φ over a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCurve {
    pub points: Vec<PhasePoint>,
}

pub const PHASE_CSV_HEADER: [&str; 5] =
    ["frequency_hz", "lambda", "kappa", "phi_deg", "degenerate_flag"];

impl PhaseCurve {
    pub fn frequencies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.frequency_hz).collect()
    }

    pub fn phases(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.phi_deg).collect()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lambda).collect()
    }

    pub fn min_phase_deg(&self) -> f64 {
        self.points.iter().map(|p| p.phi_deg).fold(f64::INFINITY, f64::min)
    }

    pub fn mean_phase_deg(&self) -> f64 {
        self.points.iter().map(|p| p.phi_deg).sum::<f64>() / self.points.len() as f64
    }

    /// Point with the smallest φ.
    pub fn worst_point(&self) -> Option<&PhasePoint> {
        self.points
            .iter()
            .min_by(|a, b| a.phi_deg.total_cmp(&b.phi_deg))
    }

    /// Maximal runs of consecutive grid points with φ ≥ margin.
    pub fn bands_above(&self, margin_deg: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut start: Option<f64> = None;
        let mut prev = 0.0;
        for p in &self.points {
            if p.phi_deg >= margin_deg {
                if start.is_none() {
                    start = Some(p.frequency_hz);
                }
            } else if let Some(s) = start.take() {
                out.push((s, prev));
            }
            prev = p.frequency_hz;
        }
        if let Some(s) = start {
            out.push((s, prev));
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(PHASE_CSV_HEADER)?;
        for p in &self.points {
            w.write_record(&[
                p.frequency_hz.to_string(),
                p.lambda.to_string(),
                p.kappa.to_string(),
                p.phi_deg.to_string(),
                u8::from(p.degenerate).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn phase_point(lines: &LineSet, gamma: Complex64, f: f64, scaling: Scaling) -> Result<PhasePoint> {
    let w = WeightingMatrix::build(lines, gamma);
    let s = scaling.matrix(lines, &w)?;
    let k = kappa_value(&w, &s);
    Ok(PhasePoint {
        frequency_hz: f,
        lambda: lambda_scaled(&w, &s),
        kappa: k.value,
        phi_deg: phase_from_kappa(k.value),
        degenerate: k.degenerate,
    })
}

pub fn effective_phase(
    lines: &LineSet,
    model: &DispersionModel,
    grid: &FrequencyGrid,
    scaling: Scaling,
) -> Result<PhaseCurve> {
    let points = grid
        .as_slice()
        .iter()
        .map(|&f| phase_point(lines, model.gamma(f)?, f, scaling))
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseCurve { points })
}

/// Phase from the pair-count RMS normalization arcsin(√(λ/C(N,2))/2).
///
/// Kept for comparison; it mis-normalizes repeated lines.
pub fn effective_phase_rms(lines: &LineSet, model: &DispersionModel, f: f64) -> Result<f64> {
    let w = WeightingMatrix::build(lines, model.gamma(f)?);
    let pairs = lines.pair_count() as f64;
    Ok(phase_from_kappa((lambda_value(&w) / pairs).sqrt()))
}

/// ∂λ/∂l_i = 2 Σ_{j≠i} Re{γ z̄_ij (e^{γ l_ij} + e^{−γ l_ij})}, z_ij = e^{γ l_ij} − e^{−γ l_ij}.
pub fn lambda_jacobian_gamma(lines: &LineSet, gamma: Complex64) -> Vec<f64> {
    let l = lines.lengths();
    let n = l.len();
    let mut jac = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let e = (gamma * (l[i] - l[j])).exp();
            let ei = 1.0 / e;
            let z = e - ei;
            jac[i] += 2.0 * (gamma * z.conj() * (e + ei)).re;
        }
    }
    jac
}

pub fn lambda_jacobian(lines: &LineSet, model: &DispersionModel, f: f64) -> Result<Vec<f64>> {
    Ok(lambda_jacobian_gamma(lines, model.gamma(f)?))
}

/// λ (and optionally ∂λ/∂l) for one length vector over many γ values.
///
/// This is the optimizer's inner loop: e^{±γ l_i} is computed once per line,
/// pair terms are products of those.
pub(crate) struct Sweep {
    pub lambda: Vec<f64>,
    /// Row per frequency, N columns.
    pub jacobian: Option<Vec<Vec<f64>>>,
}

pub(crate) fn lambda_sweep(lengths: &[f64], gammas: &[Complex64], with_jacobian: bool) -> Sweep {
    let n = lengths.len();
    let mut lambda = Vec::with_capacity(gammas.len());
    let mut jacobian = with_jacobian.then(|| Vec::with_capacity(gammas.len()));
    let mut ep = vec![Complex64::new(0.0, 0.0); n];
    let mut em = vec![Complex64::new(0.0, 0.0); n];
    for &g in gammas {
        for (k, &l) in lengths.iter().enumerate() {
            let e = (g * l).exp();
            ep[k] = e;
            em[k] = if g.re == 0.0 { e.conj() } else { 1.0 / e };
        }
        let mut lam = 0.0;
        let mut row = if with_jacobian { vec![0.0; n] } else { Vec::new() };
        for i in 0..n {
            for j in (i + 1)..n {
                let a = ep[i] * em[j];
                let b = em[i] * ep[j];
                let z = a - b;
                lam += z.norm_sqr();
                if with_jacobian {
                    let t = 2.0 * (g * z.conj() * (a + b)).re;
                    row[i] += t;
                    row[j] -= t;
                }
            }
        }
        lambda.push(lam);
        if let Some(j) = jacobian.as_mut() {
            j.push(row);
        }
    }
    Sweep { lambda, jacobian }
}
