//! Monte Carlo sensitivity of the multiline TRL error terms.
//!
//! Line measurements follow M_i = k·A·L_i·B with L_i = diag(e^{−γ l_i}, e^{γ l_i}).
//! Stacking vec(M_i) column-wise gives M = k·X·L with X = Bᵀ ⊗ A, and
//!
//! ```text
//! F = M W D⁻¹ Mᵀ P Q = X (L W Lᵀ P Q) X⁻¹ = X diag(−λ, 0, 0, λ) X⁻¹
//! ```
//!
//! so the eigenvectors of F for ∓λ are the first and last columns of X,
//! which carry the normalized error terms.

use std::io::Write;

use nalgebra::{DMatrix, Matrix2, Matrix4, Vector4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::eigenmetrics::{lambda_value, LineSet, WeightingMatrix};
use crate::error::{Error, Result};
use crate::medium::{gamma_from_permittivity, DispersionModel, FrequencyGrid, Permittivity};
use crate::par;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Row/column swap of the two middle entries of a vectorized 2×2 matrix.
pub const P_MATRIX: [[f64; 4]; 4] = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

pub const Q_MATRIX: [[f64; 4]; 4] = [
    [0.0, 0.0, 0.0, 1.0],
    [0.0, -1.0, 0.0, 0.0],
    [0.0, 0.0, -1.0, 0.0],
    [1.0, 0.0, 0.0, 0.0],
];

fn to_complex(m: &[[f64; 4]; 4]) -> Matrix4<C> {
    Matrix4::from_fn(|i, j| C::new(m[i][j], 0.0))
}

pub fn p_matrix() -> Matrix4<C> {
    to_complex(&P_MATRIX)
}

pub fn q_matrix() -> Matrix4<C> {
    to_complex(&Q_MATRIX)
}

/// Column-major vec of a 2×2 matrix.
pub fn vec2(m: &Matrix2<C>) -> Vector4<C> {
    Vector4::new(m[(0, 0)], m[(1, 0)], m[(0, 1)], m[(1, 1)])
}

pub fn kron2(a: &Matrix2<C>, b: &Matrix2<C>) -> Matrix4<C> {
    Matrix4::from_fn(|i, j| a[(i / 2, j / 2)] * b[(i % 2, j % 2)])
}

/// T-parameters of one line measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineMeasurement {
    pub t_matrix: Matrix2<C>,
}

/// Error boxes A and B and the transmission scale k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBoxes {
    pub a: Matrix2<C>,
    pub b: Matrix2<C>,
    pub k: C,
}

impl ErrorBoxes {
    pub fn ideal() -> Self {
        ErrorBoxes {
            a: Matrix2::identity(),
            b: Matrix2::identity(),
            k: ONE,
        }
    }

    /// Normalized terms these boxes should produce.
    pub fn terms(&self) -> ErrorTerms {
        ErrorTerms {
            a21_over_a11: self.a[(1, 0)] / self.a[(0, 0)],
            a12: self.a[(0, 1)] / self.a[(1, 1)],
            b12_over_b11: self.b[(0, 1)] / self.b[(0, 0)],
            b21: self.b[(1, 0)] / self.b[(1, 1)],
        }
    }
}

/// Ideal line T-matrix diag(e^{−γl}, e^{γl}).
pub fn line_t_matrix(gamma: C, length: f64) -> Matrix2<C> {
    let e = (gamma * length).exp();
    Matrix2::new(1.0 / e, ZERO, ZERO, e)
}

fn complex_noise<R: Rng>(rng: &mut R, sigma: f64) -> C {
    if sigma == 0.0 {
        return ZERO;
    }
    let s = sigma / std::f64::consts::SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C::new(s * re, s * im)
}

/// k·A·L_i·B plus i.i.d. complex Gaussian noise of std `noise_sigma` per entry.
pub fn synthesize_with<R: Rng>(lines: &LineSet, gamma: C, boxes: &ErrorBoxes, noise_sigma: f64, rng: &mut R) -> Vec<LineMeasurement> {
    lines
        .lengths()
        .iter()
        .map(|&l| {
            let mut t = boxes.a * line_t_matrix(gamma, l) * boxes.b * boxes.k;
            for v in t.iter_mut() {
                *v += complex_noise(rng, noise_sigma);
            }
            LineMeasurement { t_matrix: t }
        })
        .collect()
}

/// Ideal error boxes (A = B = I, k = 1) with measurement noise.
pub fn synthesize<R: Rng>(lines: &LineSet, model: &DispersionModel, f: f64, noise_sigma: f64, rng: &mut R) -> Result<Vec<LineMeasurement>> {
    Ok(synthesize_with(lines, model.gamma(f)?, &ErrorBoxes::ideal(), noise_sigma, rng))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    /// 4×N, column i = vec(M_i).
    pub m: DMatrix<C>,
    /// det(M_i).
    pub d: Vec<C>,
    pub f: Matrix4<C>,
}

fn weighting_dmatrix(w: &WeightingMatrix) -> DMatrix<C> {
    DMatrix::from_fn(w.n(), w.n(), |i, j| w.get(i, j))
}

/// F = M W D⁻¹ Mᵀ P Q.
pub fn build_f(measurements: &[LineMeasurement], w: &WeightingMatrix) -> Result<SystemMatrices> {
    let n = measurements.len();
    if n < 2 || w.n() != n {
        return Err(Error::InvalidInput(format!(
            "need at least 2 measurements matching the weighting matrix, got {n} and {}",
            w.n()
        )));
    }
    let mut m = DMatrix::zeros(4, n);
    let mut d = Vec::with_capacity(n);
    for (i, meas) in measurements.iter().enumerate() {
        let det = meas.t_matrix.determinant();
        let scale = meas.t_matrix.iter().map(|x| x.norm_sqr()).sum::<f64>();
        if !(det.norm() > 1e-14 * scale) || !det.is_finite() {
            return Err(Error::DegenerateMeasurement { line: i });
        }
        d.push(det);
        m.set_column(i, &vec2(&meas.t_matrix));
    }
    let mut mwd = &m * weighting_dmatrix(w);
    for (i, det) in d.iter().enumerate() {
        let inv = 1.0 / det;
        mwd.column_mut(i).iter_mut().for_each(|x| *x *= inv);
    }
    let prod = mwd * m.transpose();
    let f: Matrix4<C> = Matrix4::from_fn(|i, j| prod[(i, j)]) * p_matrix() * q_matrix();
    Ok(SystemMatrices { m, d, f })
}

/// H = L W Lᵀ P Q for ideal lines.
pub fn h_matrix(lines: &LineSet, gamma: C, w: &WeightingMatrix) -> Matrix4<C> {
    let n = lines.len();
    let mut l = DMatrix::zeros(4, n);
    for (i, &len) in lines.lengths().iter().enumerate() {
        l.set_column(i, &vec2(&line_t_matrix(gamma, len)));
    }
    let prod = &l * weighting_dmatrix(w) * l.transpose();
    Matrix4::from_fn(|i, j| prod[(i, j)]) * p_matrix() * q_matrix()
}

/// Normalized error terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorTerms {
    pub a21_over_a11: C,
    pub a12: C,
    pub b12_over_b11: C,
    pub b21: C,
}

pub const TERM_NAMES: [&str; 4] = ["a21_over_a11", "a12", "b12_over_b11", "b21"];

impl ErrorTerms {
    pub fn as_array(&self) -> [C; 4] {
        [self.a21_over_a11, self.a12, self.b12_over_b11, self.b21]
    }

    pub fn conj(&self) -> Self {
        ErrorTerms {
            a21_over_a11: self.a21_over_a11.conj(),
            a12: self.a12.conj(),
            b12_over_b11: self.b12_over_b11.conj(),
            b21: self.b21.conj(),
        }
    }
}

fn frob(m: &Matrix4<C>) -> f64 {
    m.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Right singular vector of the smallest singular value.
fn null_vector(m: &Matrix4<C>) -> Vector4<C> {
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let k = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .expect("4 singular values");
    Vector4::from_fn(|i, _| v_t[(k, i)].conj())
}

/// Simple eigenpair near `mu0`: eigenvalue, right vector u and left vector v
/// (vᵀF = μvᵀ), refined by two-sided Rayleigh quotients.
fn refine_eigenpair(f: &Matrix4<C>, mu0: C) -> (C, Vector4<C>, Vector4<C>) {
    let id = Matrix4::<C>::identity();
    let mut mu = mu0;
    let mut u = null_vector(&(f - id * mu));
    let mut v = null_vector(&(f.transpose() - id * mu));
    for _ in 0..4 {
        let den = (v.transpose() * u)[(0, 0)];
        if den.norm() == 0.0 {
            break;
        }
        let next = (v.transpose() * f * u)[(0, 0)] / den;
        if (next - mu).norm() <= 1e-15 * mu.norm() {
            break;
        }
        mu = next;
        u = null_vector(&(f - id * mu));
        v = null_vector(&(f.transpose() - id * mu));
    }
    (mu, u, v)
}

/// √(tr(F²)/2) on the branch nearest `lambda_nominal`.
pub fn measured_lambda(f: &Matrix4<C>, lambda_nominal: f64) -> C {
    let s = ((f * f).trace() * 0.5).sqrt();
    let target = C::new(lambda_nominal, 0.0);
    if (s - target).norm() <= (-s - target).norm() {
        s
    } else {
        -s
    }
}

/// Eigenpair (μ, u, v) for index 0 (−λ) or 3 (+λ).
pub fn eigenpair(f: &Matrix4<C>, index: usize, lambda_nominal: f64) -> Result<(C, Vector4<C>, Vector4<C>)> {
    let lam = measured_lambda(f, lambda_nominal);
    if !(lam.norm() > 1e-9 * frob(f)) || lambda_nominal == 0.0 {
        return Err(Error::DegenerateFrequency { lambda: lam.norm() });
    }
    match index {
        0 => Ok(refine_eigenpair(f, -lam)),
        3 => Ok(refine_eigenpair(f, lam)),
        i => Err(Error::UnsupportedIndex(i)),
    }
}

pub fn extract_error_terms(f: &Matrix4<C>, lambda_nominal: f64) -> Result<ErrorTerms> {
    let (_, um, _) = eigenpair(f, 0, lambda_nominal)?;
    let (_, up, _) = eigenpair(f, 3, lambda_nominal)?;
    if um[0].norm() == 0.0 || up[3].norm() == 0.0 {
        return Err(Error::DegenerateFrequency { lambda: 0.0 });
    }
    Ok(ErrorTerms {
        a21_over_a11: um[1] / um[0],
        b12_over_b11: um[2] / um[0],
        b21: up[1] / up[3],
        a12: up[2] / up[3],
    })
}

/// Moore–Penrose pseudo-inverse with singular values below `rel_tol`·σ_max
/// treated as zero.
pub fn pseudo_inverse4(m: &Matrix4<C>, rel_tol: f64) -> Matrix4<C> {
    let svd = m.svd(true, true);
    let smax = svd.singular_values.max();
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut out = Matrix4::<C>::zeros();
    for k in 0..4 {
        let s = svd.singular_values[k];
        if s > rel_tol * smax && s > 0.0 {
            let vk = v_t.row(k).adjoint();
            let uk = u.column(k).adjoint();
            out += vk * uk * C::new(1.0 / s, 0.0);
        }
    }
    out
}

/// Jacobian of the eigenvector u_index with respect to the parameters whose
/// effect on vec(F) (column-major) is `j_f` (16×p):
/// J_u = (F − μI)⁺ [ (uᵀ ⊗ u vᵀ)/(vᵀu) − (uᵀ ⊗ I) ] J_F.
///
/// Returns (u, J_u) with u as returned by [`eigenpair`].
pub fn eigenvector_jacobian(f: &Matrix4<C>, j_f: &DMatrix<C>, index: usize, lambda_nominal: f64) -> Result<(Vector4<C>, DMatrix<C>)> {
    if j_f.nrows() != 16 {
        return Err(Error::InvalidInput(format!("J_F needs 16 rows, got {}", j_f.nrows())));
    }
    if index == 1 || index == 2 {
        return Err(Error::UnsupportedIndex(index));
    }
    let (mu, u, v) = eigenpair(f, index, lambda_nominal)?;
    let vtu = (v.transpose() * u)[(0, 0)];
    let uvt = u * v.transpose();
    let mut k = DMatrix::<C>::zeros(4, 16);
    for c in 0..4 {
        for r in 0..4 {
            for s in 0..4 {
                // block c of uᵀ ⊗ (u vᵀ) is u_c·(u vᵀ); of uᵀ ⊗ I it is u_c·I
                let mut val = u[c] * uvt[(r, s)] / vtu;
                if r == s {
                    val -= u[c];
                }
                k[(r, 4 * c + s)] = val;
            }
        }
    }
    let shifted = f - Matrix4::<C>::identity() * mu;
    let pinv = pseudo_inverse4(&shifted, 1e-10);
    let pinv = DMatrix::from_fn(4, 4, |i, j| pinv[(i, j)]);
    Ok((u, pinv * k * j_f))
}

/// Derivative of u/u[k] given du, invariant to adding multiples of u to du.
pub fn normalized_derivative(u: &Vector4<C>, du: &Vector4<C>, k: usize) -> Vector4<C> {
    let u0 = u[k];
    du / u0 - u * (du[k] / (u0 * u0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: usize,
    pub noise_sigma: f64,
    pub length_sigma: f64,
    /// Std of the (ε′, ε″) perturbation, shared by all lines in a trial.
    pub eps_sigma: (f64, f64),
    pub seed: u64,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be >= 1".into()));
        }
        let sigmas = [self.noise_sigma, self.length_sigma, self.eps_sigma.0, self.eps_sigma.1];
        if sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidInput("standard deviations must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub frequencies: Vec<f64>,
    /// Mean absolute error per frequency, in [`TERM_NAMES`] order.
    pub mae: Vec<[f64; 4]>,
    /// Trials excluded at each frequency because the point was degenerate.
    pub excluded: Vec<usize>,
    /// Nominal λ per frequency.
    pub lambda: Vec<f64>,
    pub trials: usize,
}

pub const MAE_CSV_HEADER: [&str; 4] = ["frequency_hz", "term_name", "mae", "excluded_trials"];
pub const INV_LAMBDA_CSV_HEADER: [&str; 3] = ["frequency_hz", "lambda", "inverse_lambda"];

impl McReport {
    /// Mean of the four term MAEs at each frequency.
    pub fn mean_mae(&self) -> Vec<f64> {
        self.mae.iter().map(|m| m.iter().sum::<f64>() / 4.0).collect()
    }

    pub fn inverse_lambda(&self) -> Vec<f64> {
        self.lambda.iter().map(|l| 1.0 / l).collect()
    }

    pub fn write_mae_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(MAE_CSV_HEADER)?;
        for ((f, m), x) in self.frequencies.iter().zip(&self.mae).zip(&self.excluded) {
            for (name, v) in TERM_NAMES.iter().zip(m) {
                w.write_record(&[f.to_string(), name.to_string(), v.to_string(), x.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_inverse_lambda_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(INV_LAMBDA_CSV_HEADER)?;
        for (f, l) in self.frequencies.iter().zip(&self.lambda) {
            w.write_record(&[f.to_string(), l.to_string(), (1.0 / l).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Absolute term errors per frequency for one trial; `None` where the
/// frequency point was degenerate.
fn run_trial(
    lines: &LineSet,
    perms: &[Permittivity],
    grid: &[f64],
    weights: &[(WeightingMatrix, f64)],
    cfg: &McConfig,
    trial: usize,
) -> Result<Vec<Option<[f64; 4]>>> {
    let mut rng = trial_rng(cfg.seed, trial);
    let mut normal = |s: f64| -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        s * z
    };
    let perturbed: Vec<f64> = lines.lengths().iter().map(|l| l + normal(cfg.length_sigma)).collect();
    let d_re = normal(cfg.eps_sigma.0);
    let d_im = normal(cfg.eps_sigma.1);
    let true_lines = PerturbedLines(perturbed);
    let mut out = Vec::with_capacity(grid.len());
    for ((&f, eps), (w, lam)) in grid.iter().zip(perms).zip(weights) {
        let eps = Permittivity {
            eps_real: (eps.eps_real + d_re).max(f64::MIN_POSITIVE),
            eps_imag: (eps.eps_imag + d_im).max(0.0),
        };
        let gamma = gamma_from_permittivity(eps, f);
        let meas: Vec<LineMeasurement> = true_lines
            .0
            .iter()
            .map(|&l| {
                let mut t = line_t_matrix(gamma, l);
                for v in t.iter_mut() {
                    *v += complex_noise(&mut rng, cfg.noise_sigma);
                }
                LineMeasurement { t_matrix: t }
            })
            .collect();
        let terms = build_f(&meas, w).and_then(|s| extract_error_terms(&s.f, *lam));
        match terms {
            Ok(t) => out.push(Some(t.as_array().map(|x| x.norm()))),
            Err(e) if e.is_degenerate() => out.push(None),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// True lengths of a trial; may be slightly negative, so not a [`LineSet`].
struct PerturbedLines(Vec<f64>);

/// MAE of the normalized error terms over `cfg.trials` synthetic trials.
///
/// Each trial perturbs the lengths and ε, synthesizes noisy measurements of
/// ideal error boxes and extracts the terms with W built from the nominal
/// lengths and γ. Trials use independent RNG streams and are summed in trial
/// order, so results do not depend on scheduling.
pub fn run_mc(lines: &LineSet, model: &DispersionModel, grid: &FrequencyGrid, cfg: &McConfig) -> Result<McReport> {
    cfg.validate()?;
    let freqs = grid.as_slice();
    let perms = freqs.iter().map(|&f| model.permittivity_at(f)).collect::<Result<Vec<_>>>()?;
    let weights: Vec<(WeightingMatrix, f64)> = freqs
        .iter()
        .zip(&perms)
        .map(|(&f, p)| {
            let w = WeightingMatrix::build(lines, gamma_from_permittivity(*p, f));
            let lam = lambda_value(&w);
            (w, lam)
        })
        .collect();
    let per_trial = par::map_range(cfg.trials, |t| run_trial(lines, &perms, freqs, &weights, cfg, t));
    let mut sums = vec![[0.0; 4]; freqs.len()];
    let mut counts = vec![0usize; freqs.len()];
    for trial in per_trial {
        for (k, r) in trial?.into_iter().enumerate() {
            if let Some(e) = r {
                for (s, v) in sums[k].iter_mut().zip(e) {
                    *s += v;
                }
                counts[k] += 1;
            }
        }
    }
    let mae = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s.map(|v| if c == 0 { f64::NAN } else { v / c as f64 }))
        .collect();
    Ok(McReport {
        frequencies: freqs.to_vec(),
        mae,
        excluded: counts.iter().map(|c| cfg.trials - c).collect(),
        lambda: weights.iter().map(|(_, l)| *l).collect(),
        trials: cfg.trials,
    })
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties; pairs with a
/// non-finite member are dropped.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (a, b): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .unzip();
    let (ra, rb) = (ranks(&a), ranks(&b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (p, q) in ra.iter().zip(&rb) {
        sab += (p - ma) * (q - mb);
        saa += (p - ma).powi(2);
        sbb += (q - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn p_and_q_constants() {
        let p = p_matrix();
        assert_eq!(p * p, Matrix4::identity());
        let pq = p * q_matrix();
        let expected = [
            [0.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0, 0.0],
            [0.0, -1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
        ];
        assert_eq!(pq, to_complex(&expected));
        assert_eq!(q_matrix().determinant().re, -1.0);
    }

    #[test]
    fn kron_vec_identity() {
        let a = Matrix2::new(C::new(1.0, 0.2), C::new(0.3, -0.1), C::new(-0.5, 0.0), C::new(0.9, 0.4));
        let b = Matrix2::new(C::new(0.7, 0.0), C::new(0.1, 0.1), C::new(0.2, -0.3), C::new(1.1, 0.0));
        let x = Matrix2::new(C::new(0.3, 0.1), C::new(2.0, 0.0), C::new(-1.0, 0.5), C::new(0.0, 1.0));
        let lhs = vec2(&(a * x * b));
        let rhs = kron2(&b.transpose(), &a) * vec2(&x);
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn thru_is_identity_and_lossless_det_is_one() {
        let lines = LineSet::from_mm(&[0.0, 3.0]).unwrap();
        let model = DispersionModel::constant(5.2, 0.0).unwrap();
        let mut rng = trial_rng(1, 0);
        let m = synthesize(&lines, &model, 40e9, 0.0, &mut rng).unwrap();
        assert_eq!(m[0].t_matrix, Matrix2::identity());
        assert_relative_eq!(m[1].t_matrix.determinant().norm(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn ideal_system_is_diagonal() {
        let lines = LineSet::from_cm(&[0.0, 1.0, 4.0, 6.0]).unwrap();
        let g = DispersionModel::constant(2.6, 0.156).unwrap().gamma(3e9).unwrap();
        let w = WeightingMatrix::build(&lines, g);
        let lam = lambda_value(&w);
        let meas = synthesize_with(&lines, g, &ErrorBoxes::ideal(), 0.0, &mut trial_rng(0, 0));
        let s = build_f(&meas, &w).unwrap();
        let diag = Matrix4::from_diagonal(&Vector4::new(C::new(-lam, 0.0), ZERO, ZERO, C::new(lam, 0.0)));
        assert!(frob(&(s.f - diag)) <= 1e-10 * lam);
        assert!(frob(&(h_matrix(&lines, g, &w) - diag)) <= 1e-10 * lam);
        assert_relative_eq!(measured_lambda(&s.f, lam).re, lam, max_relative = 1e-10);
        let t = extract_error_terms(&s.f, lam).unwrap();
        assert!(t.as_array().iter().all(|x| x.norm() < 1e-10));
    }

    #[test]
    fn singular_measurement_is_rejected() {
        let lines = LineSet::from_cm(&[0.0, 1.0]).unwrap();
        let w = WeightingMatrix::build(&lines, C::new(0.0, 100.0));
        let bad = [
            LineMeasurement { t_matrix: Matrix2::identity() },
            LineMeasurement { t_matrix: Matrix2::new(ONE, ONE, ONE, ONE) },
        ];
        assert!(matches!(build_f(&bad, &w), Err(Error::DegenerateMeasurement { line: 1 })));
    }

    #[test]
    fn null_frequency_is_degenerate() {
        let lines = LineSet::from_cm(&[0.0, 0.0]).unwrap();
        let w = WeightingMatrix::build(&lines, C::new(0.0, 100.0));
        let meas = synthesize_with(&lines, C::new(0.0, 100.0), &ErrorBoxes::ideal(), 0.0, &mut trial_rng(0, 0));
        let s = build_f(&meas, &w).unwrap();
        assert!(matches!(extract_error_terms(&s.f, 0.0), Err(Error::DegenerateFrequency { .. })));
    }

    #[test]
    fn zero_pair_indices_are_unsupported() {
        let f = Matrix4::from_diagonal(&Vector4::new(C::new(-2.0, 0.0), ZERO, ZERO, C::new(2.0, 0.0)));
        let j = DMatrix::zeros(16, 1);
        assert!(matches!(eigenvector_jacobian(&f, &j, 1, 2.0), Err(Error::UnsupportedIndex(1))));
        let (_, ju) = eigenvector_jacobian(&f, &j, 3, 2.0).unwrap();
        assert!(ju.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn spearman_examples() {
        assert_relative_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 25.0, 100.0]), 1.0);
        assert_relative_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
        assert_eq!(ranks(&[2.0, 1.0, 2.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn zero_sigmas_give_zero_mae() {
        let lines = LineSet::from_mm(&[0.0, 0.25, 0.7, 1.6]).unwrap();
        let model = DispersionModel::constant(5.2, 0.0).unwrap();
        let grid = FrequencyGrid::linspace(5e9, 60e9, 12).unwrap();
        let cfg = McConfig { trials: 3, noise_sigma: 0.0, length_sigma: 0.0, eps_sigma: (0.0, 0.0), seed: 1 };
        let r = run_mc(&lines, &model, &grid, &cfg).unwrap();
        assert!(r.mae.iter().flatten().all(|v| *v < 1e-10), "{:?}", r.mae);
        assert!(r.excluded.iter().all(|x| *x == 0));
    }
}
