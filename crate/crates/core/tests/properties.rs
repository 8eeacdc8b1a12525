use linekit::eigenmetrics::*;
use linekit::line_count::*;
use linekit::medium::*;
use linekit::trl_classic::*;
use linekit::Complex64 as C;
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn lengths(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..0.08, n)
}

fn medium() -> impl Strategy<Value = (f64, f64)> {
    (1.0f64..12.0, prop_oneof![Just(0.0), 0.0f64..0.5])
}

fn pair_moduli(w: &WeightingMatrix) -> Vec<f64> {
    let n = w.n();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            out.push(w.get(i, j).norm());
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn gamma_branch_and_square((er, ei) in medium(), f in 1e6f64..2e12) {
        let g = DispersionModel::constant(er, ei).unwrap().gamma(f).unwrap();
        prop_assert!(g.re >= 0.0 && g.im > 0.0);
        let k0 = 2.0 * std::f64::consts::PI * f / C0;
        let want = -C::new(er, -ei) * k0 * k0;
        prop_assert!((g * g - want).norm() <= 1e-12 * want.norm());
    }

    #[test]
    fn waveguide_approaches_eps_from_below(a in 2e-4f64..5e-2, er in 1.0f64..4.0, x in 1.01f64..50.0) {
        let wg = DispersionModel::waveguide(a, er).unwrap();
        let fc = wg.cutoff_frequency().unwrap();
        let e1 = wg.permittivity_at(fc * x).unwrap().eps_real;
        let e2 = wg.permittivity_at(fc * x * 1.5).unwrap().eps_real;
        prop_assert!(e1 < e2 && e2 < er);
        let g = wg.gamma(fc * x).unwrap();
        prop_assert!(g.re >= 0.0 && g.im > 0.0);
    }

    #[test]
    fn metrics_are_translation_invariant(l in lengths(2..7), shift in 0.0f64..0.1, (er, ei) in medium(), f in 1e8f64..3e10) {
        let g = DispersionModel::constant(er, ei).unwrap().gamma(f).unwrap();
        let a = LineSet::new(l.clone()).unwrap();
        let b = a.translated(shift).unwrap();
        let (wa, wb) = (WeightingMatrix::build(&a, g), WeightingMatrix::build(&b, g));
        let (la, lb) = (lambda_value(&wa), lambda_value(&wb));
        prop_assume!(la > 1e-6);
        prop_assert!(rel(la, lb) < 1e-12);
        let s = ScalingMatrix::ones(a.len());
        let (ka, kb) = (kappa_value(&wa, &s).value, kappa_value(&wb, &s).value);
        prop_assert!(rel(ka, kb) < 1e-12);
    }

    #[test]
    fn metrics_are_permutation_invariant(l in lengths(2..7), seed in any::<u64>(), (er, ei) in medium(), f in 1e8f64..3e10) {
        let g = DispersionModel::constant(er, ei).unwrap().gamma(f).unwrap();
        let mut p = l.clone();
        let n = p.len();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            p.swap(i, (s >> 33) as usize % (i + 1));
        }
        let (a, b) = (LineSet::new(l).unwrap(), LineSet::new(p).unwrap());
        let (wa, wb) = (WeightingMatrix::build(&a, g), WeightingMatrix::build(&b, g));
        prop_assert!(rel(lambda_value(&wa), lambda_value(&wb)) < 1e-12);
        let one = ScalingMatrix::ones(n);
        prop_assert!(rel(kappa_value(&wa, &one).value, kappa_value(&wb, &one).value) < 1e-12);
    }

    #[test]
    fn kappa_lies_between_pair_extremes(l in lengths(2..8), (er, ei) in medium(), f in 1e8f64..3e10) {
        let g = DispersionModel::constant(er, ei).unwrap().gamma(f).unwrap();
        let w = WeightingMatrix::build(&LineSet::new(l).unwrap(), g);
        let k = kappa_value(&w, &ScalingMatrix::ones(w.n()));
        let m = pair_moduli(&w);
        let hi = m.iter().cloned().fold(0.0, f64::max);
        let lo = m.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(k.value <= hi * (1.0 + 1e-12) && k.value >= lo * (1.0 - 1e-12));
        prop_assert!(w.skew_residual() <= 1e-14 * hi.max(1.0));
        let pairwise: f64 = m.iter().map(|x| x * x).sum();
        prop_assert!(rel(lambda_value(&w), pairwise) < 1e-12 || pairwise == 0.0);
    }

    #[test]
    fn norm_order_moves_kappa_to_the_best_pair(l in lengths(3..7), er in 1.0f64..12.0, f in 1e8f64..3e10) {
        let g = DispersionModel::constant(er, 0.0).unwrap().gamma(f).unwrap();
        let w = WeightingMatrix::build(&LineSet::new(l).unwrap(), g);
        let hi = pair_moduli(&w).into_iter().fold(0.0, f64::max);
        prop_assume!(hi > 1e-6);
        let ks: Vec<f64> = [1u32, 2, 4]
            .iter()
            .map(|&m| kappa_value(&w, &ScalingMatrix::norm_order(&w, m).unwrap()).value)
            .collect();
        prop_assert!(ks[0] <= ks[1] * (1.0 + 1e-12) && ks[1] <= ks[2] * (1.0 + 1e-12), "{ks:?}");
        prop_assert!(ks[2] <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn phase_never_clips_below_two(k in 0.0f64..2.0) {
        let phi = phase_from_kappa(k);
        prop_assert!((phi.to_radians().sin() * 2.0 - k).abs() < 1e-12);
    }

    #[test]
    fn band_round_trip(l in 1e-4f64..0.5, er in 1.0f64..12.0, m in 1.0f64..89.0, n in 0u32..8) {
        let (lo, hi) = band_edges(l, er, m, n);
        let a = length_for_band(lo, er, m, n, Anchor::Low);
        let b = length_for_band(hi, er, m, n, Anchor::High);
        prop_assert!(rel(a, l) < 1e-12 && rel(b, l) < 1e-12);
    }

    #[test]
    fn band_edges_increase_with_index(l in 1e-4f64..0.5, er in 1.0f64..12.0, m in 1.0f64..89.0, n in 0u32..50) {
        let (a0, b0) = band_edges(l, er, m, n);
        let (a1, b1) = band_edges(l, er, m, n + 1);
        prop_assert!(a1 > a0 && b1 > b0);
    }

    #[test]
    fn recommended_count_is_consistent(l in 1e-3f64..0.2, er in 1.0f64..12.0, f_hi in 1e9f64..1e11, frac in 0.0f64..0.9, m in 5.0f64..80.0) {
        let r = recommend(l, frac * f_hi, f_hi, er, m).unwrap();
        prop_assert!(r.m_min <= r.m && r.m <= r.m_max);
        prop_assert!(r.m_max % r.m == 0);
        prop_assert!(r.n_lines >= 2 && r.n_band[0] >= 2);
    }
}

#[test]
fn margin_ratio_relation_is_exact() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let phi: f64 = rng.random_range(1e-6..90.0);
        let f_min = rng.random_range(1e6..1e11);
        let f_max = (180.0 - phi) / phi * f_min;
        assert_eq!(band_index(f_min, f_max, phi), 0);
        let got = achieved_margin(f_min, f_max, 0).unwrap();
        assert!((got - phi).abs() <= 1e-12 * 90.0, "{phi} {got}");
    }
    assert_eq!(band_index(1.0, 8.0, 20.0), 0);
    assert_eq!(achieved_margin(1.0, 8.0, 0).unwrap(), 20.0);
}

#[test]
fn pair_and_line_counts_round_trip() {
    for n in 2..30u32 {
        assert_eq!(lines_from_pairs(n * (n - 1) / 2), n);
    }
    for m_max in 1..200 {
        for m_min in 1..=m_max {
            let m = pairs_harmonic(m_min, m_max);
            assert!(m >= m_min && m_max % m == 0);
        }
    }
}

#[test]
fn lambda_jacobian_matches_central_differences() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    let mut worst_sum = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..8);
        let l: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.05)).collect();
        let er = rng.random_range(1.0..10.0);
        let ei = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..0.5) };
        let model = DispersionModel::constant(er, ei).unwrap();
        let f = rng.random_range(1e8..2e10);
        let g = model.gamma(f).unwrap();
        let lines = LineSet::new(l.clone()).unwrap();
        let jac = lambda_jacobian(&lines, &model, f).unwrap();
        let scale = jac.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let h = 1e-4 / g.norm();
        for i in 0..n {
            let at = |d: f64| {
                let mut p = l.clone();
                p[i] += d;
                lambda_value(&WeightingMatrix::build(&LineSet::new(p).unwrap(), g))
            };
            // fourth-order stencil
            let fd = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
            worst = worst.max((fd - jac[i]).abs() / scale.max(1e-12));
        }
        worst_sum = worst_sum.max(jac.iter().sum::<f64>().abs() / scale.max(1e-12));
    }
    assert!(worst < 1e-6, "{worst}");
    assert!(worst_sum < 1e-10, "{worst_sum}");
}
