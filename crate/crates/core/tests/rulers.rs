mod common;

use common::shortest_golomb;
use linekit::eigenmetrics::{effective_phase, Scaling};
use linekit::medium::{DispersionModel, FrequencyGrid};
use linekit::rulers::*;
use proptest::prelude::*;

#[test]
fn golomb_table_is_optimal_for_small_orders() {
    for n in 2..=6 {
        let r = ruler_for_order(n, RulerFamily::Golomb).unwrap();
        let census = verify_ruler(&r);
        assert!(census.is_golomb);
        assert_eq!(r.length(), shortest_golomb(n), "order {n}");
    }
}

#[test]
fn every_table_entry_passes_its_census() {
    for n in RulerFamily::Golomb.orders() {
        assert!(verify_ruler(&ruler_for_order(n, RulerFamily::Golomb).unwrap()).is_golomb);
    }
    for n in RulerFamily::Wichmann.orders() {
        let r = ruler_for_order(n, RulerFamily::Wichmann).unwrap();
        assert_eq!(r.order(), n);
        assert!(verify_ruler(&r).is_complete, "wichmann {n}");
    }
    for n in RulerFamily::Perfect.orders() {
        let c = verify_ruler(&ruler_for_order(n, RulerFamily::Perfect).unwrap());
        assert!(c.is_golomb && c.is_complete);
    }
}

#[test]
fn four_mark_census_is_complete() {
    let c = verify_ruler(&Ruler::new(RulerFamily::Golomb, vec![0, 1, 4, 6]).unwrap());
    assert!(c.is_golomb && c.is_complete);
    assert_eq!(c.covered.into_iter().collect::<Vec<_>>(), vec![1, 2, 3, 4, 5, 6]);
    assert!(c.gaps.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn designs_meet_the_margin_and_stay_harmonic(
        f_max in 5e9f64..2e11,
        ratio in 0.02f64..0.5,
        er in 1.5f64..10.0,
        margin in 15.0f64..40.0,
        family in prop_oneof![Just(RulerFamily::Golomb), Just(RulerFamily::Wichmann)],
    ) {
        let model = DispersionModel::constant(er, 0.0).unwrap();
        let req = RulerRequest {
            f_min: ratio * f_max,
            f_max,
            margin_deg: margin,
            model: model.clone(),
            band_n: 0,
            n_lines: None,
            family,
        };
        let d = design_by_ruler(&req).unwrap();
        let grid = FrequencyGrid::linspace(req.f_min, req.f_max, CHECK_POINTS).unwrap();
        let min_phase = effective_phase(&d.lengths, &model, &grid, Scaling::None).unwrap().min_phase_deg();
        prop_assert_eq!(min_phase, d.min_phase_deg);
        prop_assert!(d.meets_margin, "{} < {}", min_phase, margin);
        prop_assert!(min_phase >= margin);
        for (l, m) in d.lengths.lengths().iter().zip(&d.ruler.marks) {
            prop_assert_eq!(*l, *m as f64 * d.l0);
        }
    }
}
