//! Constrained line-length optimisation.
//!
//! The loss rewards a large and flat eigenvalue over the optimisation band,
//!
//! ```text
//! L(l) = ½ (max_f(−λ(l, f)) − mean_f λ(l, f))  [+ √(mean_f J_λ Σ J_λᵀ)]
//! ```
//!
//! with the thru fixed at 0 and the longest line fixed at l_max. The
//! interior lengths are searched by differential evolution (rand/1/bin).
//! Every candidate is repaired into the ordered, gap-respecting simplex
//! (and onto any equality constraints) before it is evaluated.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eigenmetrics::{effective_phase, lambda_sweep, LineSet, PhaseCurve, Scaling};
use crate::error::{Error, Result};
use crate::line_count::{self, LineCountResult};
use crate::medium::{DispersionModel, FrequencyGrid};
use crate::par;

const GAP_PENALTY: f64 = 1e6;

/// One linear equality Σ c_i l_i = rhs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualityRow {
    pub coefficients: Vec<f64>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub l_max: f64,
    #[serde(default)]
    pub l_min_gap: f64,
    #[serde(default)]
    pub extra_equalities: Vec<EqualityRow>,
    #[serde(default)]
    pub quantization_step: Option<f64>,
}

impl ConstraintSet {
    pub fn new(l_max: f64) -> Self {
        ConstraintSet {
            l_max,
            l_min_gap: 0.0,
            extra_equalities: Vec::new(),
            quantization_step: None,
        }
    }

    pub fn validate(&self, n_lines: usize) -> Result<()> {
        if n_lines < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 lines, got {n_lines}")));
        }
        if !(self.l_max > 0.0 && self.l_max.is_finite()) {
            return Err(Error::InvalidInput(format!("l_max must be > 0, got {}", self.l_max)));
        }
        if !(self.l_min_gap >= 0.0 && self.l_min_gap.is_finite()) {
            return Err(Error::InvalidInput(format!("l_min_gap must be >= 0, got {}", self.l_min_gap)));
        }
        if self.l_max < (n_lines - 1) as f64 * self.l_min_gap {
            return Err(Error::Infeasible(format!(
                "{} lines with minimum gap {} m do not fit below l_max = {} m",
                n_lines, self.l_min_gap, self.l_max
            )));
        }
        if let Some(q) = self.quantization_step {
            if !(q > 0.0 && q.is_finite()) {
                return Err(Error::InvalidInput(format!("quantization step must be > 0, got {q}")));
            }
        }
        for (k, row) in self.extra_equalities.iter().enumerate() {
            if row.coefficients.len() != n_lines {
                return Err(Error::InvalidInput(format!(
                    "equality row {k} has {} coefficients, expected {n_lines}",
                    row.coefficients.len()
                )));
            }
            if row.coefficients.iter().chain([&row.rhs]).any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput(format!("equality row {k} is not finite")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    MinmaxMean,
    Regularized,
    RegularizedEquality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    #[serde(default)]
    pub kind: LossKind,
    /// Standard deviation of each length, giving Σ = σ²·I.
    #[serde(default)]
    pub length_sigma: f64,
    /// Full N×N length covariance in m², overriding `length_sigma`.
    #[serde(default)]
    pub length_cov: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_equality_weight")]
    pub equality_penalty_weight: f64,
}

fn default_equality_weight() -> f64 {
    1e8
}

impl Default for LossSpec {
    fn default() -> Self {
        LossSpec {
            kind: LossKind::MinmaxMean,
            length_sigma: 0.0,
            length_cov: None,
            equality_penalty_weight: default_equality_weight(),
        }
    }
}

impl LossSpec {
    pub fn regularized(length_sigma: f64) -> Self {
        LossSpec {
            kind: LossKind::Regularized,
            length_sigma,
            ..Default::default()
        }
    }

    fn covariance(&self, n: usize) -> Result<Option<Covariance>> {
        if self.kind == LossKind::MinmaxMean {
            return Ok(None);
        }
        if let Some(cov) = &self.length_cov {
            if cov.len() != n || cov.iter().any(|r| r.len() != n) {
                return Err(Error::InvalidInput(format!("length_cov must be {n}x{n}")));
            }
            let m = DMatrix::from_fn(n, n, |i, j| cov[i][j]);
            if (&m - m.transpose()).abs().max() > 1e-12 * m.abs().max().max(f64::MIN_POSITIVE) {
                return Err(Error::InvalidInput("length_cov must be symmetric".into()));
            }
            let min_eig = m.clone().symmetric_eigenvalues().min();
            if min_eig < -1e-12 * m.abs().max() {
                return Err(Error::InvalidInput("length_cov must be positive semidefinite".into()));
            }
            return Ok(Some(Covariance::Full(m)));
        }
        if !(self.length_sigma >= 0.0 && self.length_sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("length_sigma must be >= 0, got {}", self.length_sigma)));
        }
        Ok(Some(Covariance::Isotropic(self.length_sigma * self.length_sigma)))
    }
}

#[derive(Debug, Clone)]
enum Covariance {
    Isotropic(f64),
    Full(DMatrix<f64>),
}

impl Covariance {
    fn quad(&self, j: &[f64]) -> f64 {
        match self {
            Covariance::Isotropic(v) => v * j.iter().map(|x| x * x).sum::<f64>(),
            Covariance::Full(m) => {
                let n = j.len();
                let mut s = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        s += j[a] * m[(a, b)] * j[b];
                    }
                }
                s.max(0.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub population_factor: usize,
    pub max_generations: usize,
    pub mutation: f64,
    pub crossover: f64,
    pub seed: u64,
    pub grid_points: usize,
    /// Stop when the population loss spread falls below this fraction of
    /// its mean magnitude.
    pub convergence_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            population_factor: 15,
            max_generations: 2000,
            mutation: 0.7,
            crossover: 0.9,
            seed: 0,
            grid_points: 201,
            convergence_tol: 1e-6,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mutation > 0.0 && self.mutation < 2.0) {
            return Err(Error::InvalidInput(format!("mutation F must lie in (0, 2), got {}", self.mutation)));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return Err(Error::InvalidInput(format!("crossover CR must lie in [0, 1], got {}", self.crossover)));
        }
        if self.grid_points < 2 {
            return Err(Error::InvalidInput(format!("grid_points must be >= 2, got {}", self.grid_points)));
        }
        if self.population_factor == 0 {
            return Err(Error::InvalidInput("population_factor must be >= 1".into()));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::InvalidInput("convergence_tol must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignProblem {
    pub n_lines: usize,
    pub constraints: ConstraintSet,
    pub loss: LossSpec,
    pub model: DispersionModel,
    pub f_lo_target: f64,
    pub f_hi_target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub lengths: LineSet,
    pub loss: f64,
    pub anchors_used: (f64, f64),
    pub grid_points_used: usize,
    pub phase_curve: PhaseCurve,
    pub min_phase_deg: f64,
    pub feasible: bool,
    pub converged: bool,
    pub generations_run: usize,
    pub equality_residual: f64,
    /// Best population loss after initialisation and after each generation.
    #[serde(skip)]
    pub best_history: Vec<f64>,
}

/// Quarter-wave centre of band `n` of a line of length `l`.
fn band_centre(model: &DispersionModel, l: f64, n: u64) -> Result<f64> {
    model.frequency_at_electrical_length(l, (n as f64 + 0.5) * std::f64::consts::PI)
}

/// Electrical length in half-waves, 0 below a waveguide cutoff.
fn half_waves(model: &DispersionModel, l: f64, f: f64) -> Result<f64> {
    match model.electrical_length(l, f) {
        Ok(x) => Ok(x / std::f64::consts::PI),
        Err(Error::BelowCutoff { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Optimisation band from the quarter-wave centres of the longest line.
///
/// The lower anchor is the highest centre at or below `f_lo_target` (band 0
/// if there is none), the upper anchor the lowest centre at or above
/// `f_hi_target`.
pub fn anchor_frequencies(l_max: f64, model: &DispersionModel, f_lo_target: f64, f_hi_target: f64) -> Result<(f64, f64)> {
    if !(l_max > 0.0 && f_lo_target > 0.0 && f_lo_target <= f_hi_target) {
        return Err(Error::InvalidInput(format!(
            "anchors need l_max > 0 and 0 < f_lo <= f_hi, got l_max={l_max}, [{f_lo_target}, {f_hi_target}]"
        )));
    }
    let x_lo = half_waves(model, l_max, f_lo_target)?;
    let x_hi = half_waves(model, l_max, f_hi_target)?;
    let n_lo = (x_lo - 0.5 + 1e-9).floor().max(0.0) as u64;
    let n_hi = (x_hi - 0.5 - 1e-9).ceil().max(0.0) as u64;
    Ok((band_centre(model, l_max, n_lo)?, band_centre(model, l_max, n_hi.max(n_lo))?))
}

/// Optimisation grid over the anchors, at least 8 points per half-wave of
/// the longest line.
fn optimisation_grid(model: &DispersionModel, l_max: f64, anchors: (f64, f64), points: usize) -> Result<FrequencyGrid> {
    if anchors.0 >= anchors.1 {
        return FrequencyGrid::new(vec![anchors.0]);
    }
    let span = half_waves(model, l_max, anchors.1)? - half_waves(model, l_max, anchors.0)?;
    let m = points.max((8.0 * span).ceil() as usize);
    FrequencyGrid::linspace(anchors.0, anchors.1, m)
}

fn minmax_mean(lambda: &[f64]) -> f64 {
    let min = lambda.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = lambda.iter().sum::<f64>() / lambda.len() as f64;
    0.5 * (-min - mean)
}

/// ½ (max_f(−λ) − mean_f λ).
pub fn loss_minmax_mean(lines: &LineSet, model: &DispersionModel, grid: &FrequencyGrid) -> Result<f64> {
    let gammas = grid.gammas(model)?;
    Ok(minmax_mean(&lambda_sweep(lines.lengths(), &gammas, false).lambda))
}

/// Min-max-mean loss plus √(mean_f J_λ Σ J_λᵀ) for the N×N covariance `cov`.
pub fn loss_regularized(lines: &LineSet, model: &DispersionModel, grid: &FrequencyGrid, cov: &[Vec<f64>]) -> Result<f64> {
    let spec = LossSpec {
        kind: LossKind::Regularized,
        length_cov: Some(cov.to_vec()),
        ..Default::default()
    };
    let cov = spec.covariance(lines.len())?;
    let gammas = grid.gammas(model)?;
    Ok(Objective { gammas, cov }.loss(lines.lengths()))
}

struct Objective {
    gammas: Vec<Complex64>,
    cov: Option<Covariance>,
}

impl Objective {
    fn loss(&self, lengths: &[f64]) -> f64 {
        let sweep = lambda_sweep(lengths, &self.gammas, self.cov.is_some());
        let base = minmax_mean(&sweep.lambda);
        match (&self.cov, &sweep.jacobian) {
            (Some(cov), Some(jac)) => {
                let mean = jac.iter().map(|j| cov.quad(j)).sum::<f64>() / jac.len() as f64;
                base + mean.sqrt()
            }
            _ => base,
        }
    }
}

/// Maps free (interior) variables onto feasible full length vectors.
struct Feasible {
    n: usize,
    l_max: f64,
    gap: f64,
    /// Rows on the free variables, their right-hand sides and A⁺.
    eq: Option<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)>,
    eq_weight: f64,
}

impl Feasible {
    fn new(n: usize, c: &ConstraintSet, eq_weight: f64) -> Result<Self> {
        let d = n - 2;
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for (k, row) in c.extra_equalities.iter().enumerate() {
            let r = row.rhs - row.coefficients[n - 1] * c.l_max;
            let free = &row.coefficients[1..n - 1];
            if free.iter().all(|x| *x == 0.0) {
                if r.abs() > 1e-9 {
                    return Err(Error::Infeasible(format!(
                        "equality row {k} fixes only the anchors and is violated by {r} m"
                    )));
                }
                continue;
            }
            rows.push(free.to_vec());
            rhs.push(r);
        }
        let eq = if rows.is_empty() {
            None
        } else {
            let a = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
            let pinv = a
                .clone()
                .pseudo_inverse(1e-12)
                .map_err(|e| Error::InvalidInput(format!("equality rows: {e}")))?;
            Some((a, rhs, pinv))
        };
        Ok(Feasible {
            n,
            l_max: c.l_max,
            gap: c.l_min_gap,
            eq,
            eq_weight,
        })
    }

    fn dims(&self) -> usize {
        self.n - 2
    }

    /// Clip, sort and push apart so that consecutive lines are at least
    /// `gap` apart with 0 and l_max fixed.
    fn order(&self, x: &mut [f64]) {
        let d = x.len();
        for v in x.iter_mut() {
            *v = v.clamp(self.gap, self.l_max - self.gap);
        }
        x.sort_by(f64::total_cmp);
        let mut prev = 0.0;
        for v in x.iter_mut() {
            *v = v.max(prev + self.gap);
            prev = *v;
        }
        let mut next = self.l_max;
        for k in (0..d).rev() {
            x[k] = x[k].min(next - self.gap);
            next = x[k];
        }
    }

    fn eq_residual(&self, x: &[f64]) -> f64 {
        match &self.eq {
            None => 0.0,
            Some((a, r, _)) => (0..a.nrows())
                .map(|i| {
                    let s: f64 = (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum();
                    (s - r[i]).powi(2)
                })
                .sum::<f64>()
                .sqrt(),
        }
    }

    fn repair(&self, x: &mut [f64]) {
        self.order(x);
        let Some((a, r, pinv)) = &self.eq else { return };
        for _ in 0..50 {
            let xv = nalgebra::DVector::from_column_slice(x);
            let res = a * &xv - nalgebra::DVector::from_column_slice(r);
            let y = xv - pinv * res;
            x.copy_from_slice(y.as_slice());
            let before: Vec<f64> = x.to_vec();
            self.order(x);
            let moved = x.iter().zip(&before).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if moved <= 1e-15 * self.l_max {
                break;
            }
        }
    }

    fn full(&self, x: &[f64]) -> Vec<f64> {
        let mut l = Vec::with_capacity(self.n);
        l.push(0.0);
        l.extend_from_slice(x);
        l.push(self.l_max);
        l
    }

    fn gap_violation(&self, l: &[f64]) -> f64 {
        l.windows(2).map(|w| (self.gap - (w[1] - w[0])).max(0.0)).sum()
    }

    fn penalty(&self, x: &[f64]) -> f64 {
        let l = self.full(x);
        let e = self.eq_residual(x);
        GAP_PENALTY * self.gap_violation(&l) + self.eq_weight * e * e
    }

    fn satisfied(&self, x: &[f64], tol: f64) -> bool {
        let l = self.full(x);
        l.windows(2).all(|w| w[1] - w[0] >= self.gap - 1e-12)
            && x.iter().all(|v| *v >= 0.0 && *v <= self.l_max)
            && self.eq_residual(x) <= tol
    }
}

fn member_rng(seed: u64, generation: usize, member: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | member as u64);
    rng
}

/// Progress report: generation index and best loss so far.
pub type Progress<'a> = &'a mut dyn FnMut(usize, f64);

pub fn optimize(problem: &DesignProblem, cfg: &OptimizerConfig) -> Result<DesignResult> {
    optimize_with_progress(problem, cfg, &mut |_, _| {})
}

pub fn optimize_with_progress(problem: &DesignProblem, cfg: &OptimizerConfig, progress: Progress) -> Result<DesignResult> {
    cfg.validate()?;
    let n = problem.n_lines;
    let c = &problem.constraints;
    c.validate(n)?;
    problem.model.validate()?;
    if problem.loss.kind == LossKind::RegularizedEquality && c.extra_equalities.is_empty() {
        return Err(Error::InvalidInput("regularized_equality loss needs at least one equality row".into()));
    }
    if !(problem.loss.equality_penalty_weight >= 0.0) {
        return Err(Error::InvalidInput("equality_penalty_weight must be >= 0".into()));
    }
    let anchors = anchor_frequencies(c.l_max, &problem.model, problem.f_lo_target, problem.f_hi_target)?;
    let grid = optimisation_grid(&problem.model, c.l_max, anchors, cfg.grid_points)?;
    let objective = Objective {
        gammas: grid.gammas(&problem.model)?,
        cov: problem.loss.covariance(n)?,
    };
    let feas = Feasible::new(n, c, problem.loss.equality_penalty_weight)?;
    let d = feas.dims();
    let eval = |x: &[f64]| objective.loss(&feas.full(x)) + feas.penalty(x);

    let (mut best, mut history, generations, converged) = if d == 0 {
        (Vec::new(), vec![eval(&[])], 0, true)
    } else {
        differential_evolution(&feas, &eval, cfg, progress)
    };

    if let Some(step) = c.quantization_step {
        best = quantize(&feas, &eval, &best, step);
        history.push(eval(&best));
    }

    let loss = eval(&best);
    let lengths = LineSet::new(feas.full(&best))?;
    let eq_tol = c.quantization_step.map_or(1e-9, |q| 0.5 * q * n as f64);
    let feasible = feas.satisfied(&best, eq_tol);
    let check = check_grid(&problem.model, c.l_max, problem.f_lo_target, problem.f_hi_target)?;
    let phase_curve = effective_phase(&lengths, &problem.model, &check, Scaling::None)?;
    Ok(DesignResult {
        min_phase_deg: phase_curve.min_phase_deg(),
        lengths,
        loss,
        anchors_used: anchors,
        grid_points_used: grid.len(),
        phase_curve,
        feasible,
        converged,
        generations_run: generations,
        equality_residual: feas.eq_residual(&best),
        best_history: history,
    })
}

/// Reporting grid over the target range, 501 points or 16 per half-wave.
fn check_grid(model: &DispersionModel, l_max: f64, f_lo: f64, f_hi: f64) -> Result<FrequencyGrid> {
    if f_lo >= f_hi {
        return FrequencyGrid::new(vec![f_lo]);
    }
    let span = half_waves(model, l_max, f_hi)? - half_waves(model, l_max, f_lo)?;
    FrequencyGrid::linspace(f_lo, f_hi, 501usize.max((16.0 * span).ceil() as usize))
}

fn differential_evolution<E>(feas: &Feasible, eval: &E, cfg: &OptimizerConfig, progress: Progress) -> (Vec<f64>, Vec<f64>, usize, bool)
where
    E: Fn(&[f64]) -> f64 + Sync,
{
    let d = feas.dims();
    let np = (cfg.population_factor * d).max(5);
    let init: Vec<(Vec<f64>, f64)> = par::map_range(np, |i| {
        let mut rng = member_rng(cfg.seed, 0, i);
        let mut x: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * feas.l_max).collect();
        feas.repair(&mut x);
        let f = eval(&x);
        (x, f)
    });
    let (mut pop, mut fit): (Vec<Vec<f64>>, Vec<f64>) = init.into_iter().unzip();
    let best_of = |fit: &[f64]| {
        fit.iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, f)| (i, *f))
            .expect("population is not empty")
    };
    let mut history = vec![best_of(&fit).1];
    let mut converged = false;
    let mut generations = 0;
    for gen in 1..=cfg.max_generations {
        let trials: Vec<(Vec<f64>, f64)> = par::map_range(np, |i| {
            let mut rng = member_rng(cfg.seed, gen, i);
            let mut pick = |taken: &[usize]| loop {
                let r = rng.random_range(0..np);
                if r != i && !taken.contains(&r) {
                    break r;
                }
            };
            let r1 = pick(&[]);
            let r2 = pick(&[r1]);
            let r3 = pick(&[r1, r2]);
            let jrand = rng.random_range(0..d);
            let mut x = pop[i].clone();
            for k in 0..d {
                if k == jrand || rng.random::<f64>() < cfg.crossover {
                    x[k] = pop[r1][k] + cfg.mutation * (pop[r2][k] - pop[r3][k]);
                }
            }
            feas.repair(&mut x);
            let f = eval(&x);
            (x, f)
        });
        for (i, (x, f)) in trials.into_iter().enumerate() {
            if f <= fit[i] {
                pop[i] = x;
                fit[i] = f;
            }
        }
        generations = gen;
        let best = best_of(&fit).1;
        history.push(best);
        progress(gen, best);
        let mean = fit.iter().sum::<f64>() / np as f64;
        let std = (fit.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / np as f64).sqrt();
        if std <= cfg.convergence_tol * mean.abs() {
            converged = true;
            break;
        }
    }
    let (i, _) = best_of(&fit);
    (pop.swap_remove(i), history, generations, converged)
}

/// Round the free lengths to the step grid, then polish over ±1 step.
fn quantize<E>(feas: &Feasible, eval: &E, x: &[f64], step: f64) -> Vec<f64>
where
    E: Fn(&[f64]) -> f64 + Sync,
{
    let d = x.len();
    let to_grid = |v: f64| (v / step).round() as i64;
    let mut base: Vec<i64> = x.iter().map(|v| to_grid(*v)).collect();
    let lengths = |k: &[i64]| -> Vec<f64> { k.iter().map(|&m| m as f64 * step).collect() };
    // ordering/gap repair on the integer grid
    let gap_steps = (feas.gap / step - 1e-9).ceil() as i64;
    let top = ((feas.l_max - feas.gap) / step + 1e-9).floor() as i64;
    base.sort_unstable();
    let mut prev = 0;
    for v in base.iter_mut() {
        *v = (*v).max(prev + gap_steps).max(gap_steps);
        prev = *v;
    }
    let mut next = top + gap_steps;
    for k in (0..d).rev() {
        base[k] = base[k].min(next - gap_steps);
        next = base[k];
    }
    let admissible = |k: &[i64]| k.windows(2).all(|w| w[1] - w[0] >= gap_steps.max(0)) && k.iter().all(|&m| m >= gap_steps && m <= top);
    let score = |k: &[i64]| -> f64 {
        if admissible(k) {
            eval(&lengths(k))
        } else {
            f64::INFINITY
        }
    };
    let mut best_f = score(&base);
    let exhaustive = d <= 7; // 3^7 = 2187 ≤ 4096
    if exhaustive {
        let total = 3usize.pow(d as u32);
        let scored = par::map_range(total, |code| {
            let mut k = base.clone();
            let mut c = code;
            for v in k.iter_mut() {
                *v += (c % 3) as i64 - 1;
                c /= 3;
            }
            (score(&k), code)
        });
        let (f, code) = scored
            .into_iter()
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .expect("non-empty neighbourhood");
        if f < best_f {
            let mut c = code;
            for v in base.iter_mut() {
                *v += (c % 3) as i64 - 1;
                c /= 3;
            }
        }
    } else {
        loop {
            let mut improved = false;
            for k in 0..d {
                for delta in [-1, 1] {
                    let mut cand = base.clone();
                    cand[k] += delta;
                    let f = score(&cand);
                    if f < best_f {
                        best_f = f;
                        base = cand;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }
    lengths(&base)
}

/// How the number of lines of a kit was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineCountSource {
    Given,
    Formula,
    Incremented,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KitRequest {
    pub f_min: f64,
    pub f_max: f64,
    pub model: DispersionModel,
    #[serde(default = "default_margin")]
    pub margin_deg: f64,
    #[serde(default)]
    pub l_max: Option<f64>,
    #[serde(default)]
    pub n_lines: Option<usize>,
    #[serde(default)]
    pub l_min_gap: f64,
    #[serde(default)]
    pub extra_equalities: Vec<EqualityRow>,
    #[serde(default)]
    pub quantization_step: Option<f64>,
    #[serde(default)]
    pub loss: LossSpec,
}

fn default_margin() -> f64 {
    30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KitDesign {
    pub l_max: f64,
    pub n_lines: usize,
    pub n_lines_source: LineCountSource,
    pub line_count: Option<LineCountResult>,
    pub meets_margin: bool,
    pub result: DesignResult,
}

/// Upper bound on the line count tried for lossy media.
pub const MAX_INCREMENTED_LINES: usize = 24;

/// Full kit design: longest line, number of lines, anchors, optimisation.
///
/// Without l_max the longest line puts `f_min` at the margin edge of its
/// first band. Without n_lines, lossless media use the pair-count rule over
/// the anchored band and lossy media add lines until the margin is met.
pub fn design_kit(req: &KitRequest, cfg: &OptimizerConfig, progress: Progress) -> Result<KitDesign> {
    req.model.validate()?;
    if !(req.f_min > 0.0 && req.f_min < req.f_max) {
        return Err(Error::InvalidInput(format!("need 0 < f_min < f_max, got [{}, {}]", req.f_min, req.f_max)));
    }
    if !(req.margin_deg > 0.0 && req.margin_deg < 90.0) {
        return Err(Error::InvalidInput(format!("phase margin must lie in (0, 90), got {}", req.margin_deg)));
    }
    let l_max = match req.l_max {
        Some(l) => l,
        None => {
            let beta = req.model.gamma(req.f_min)?.im;
            req.margin_deg / 180.0 * std::f64::consts::PI / beta
        }
    };
    let anchors = anchor_frequencies(l_max, &req.model, req.f_min, req.f_max)?;
    let problem = |n: usize| DesignProblem {
        n_lines: n,
        constraints: ConstraintSet {
            l_max,
            l_min_gap: req.l_min_gap,
            extra_equalities: req.extra_equalities.clone(),
            quantization_step: req.quantization_step,
        },
        loss: req.loss.clone(),
        model: req.model.clone(),
        f_lo_target: req.f_min,
        f_hi_target: req.f_max,
    };
    let finish = |n, source, count, result: DesignResult| KitDesign {
        l_max,
        n_lines: n,
        n_lines_source: source,
        line_count: count,
        meets_margin: result.min_phase_deg >= req.margin_deg,
        result,
    };
    if let Some(n) = req.n_lines {
        let r = optimize_with_progress(&problem(n), cfg, progress)?;
        return Ok(finish(n, LineCountSource::Given, None, r));
    }
    if req.model.is_lossless() {
        let count = line_count::recommend_for_band(&req.model, l_max, anchors.0, anchors.1.max(anchors.0 * (1.0 + 1e-12)), req.margin_deg)?;
        let n = count.n_lines as usize;
        let r = optimize_with_progress(&problem(n), cfg, progress)?;
        return Ok(finish(n, LineCountSource::Formula, Some(count), r));
    }
    let mut last = None;
    for n in 2..=MAX_INCREMENTED_LINES {
        let r = optimize_with_progress(&problem(n), cfg, progress)?;
        let done = r.min_phase_deg >= req.margin_deg;
        last = Some(finish(n, LineCountSource::Incremented, None, r));
        if done {
            break;
        }
    }
    Ok(last.expect("at least one line count tried"))
}
