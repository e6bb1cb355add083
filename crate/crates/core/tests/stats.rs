use proptest::prelude::*;
use sivplant::stats::{
    activation_yield, emitters_from_countrate, fluence_for_mean, halving_ladder, nominal_spot_area_cm2, plan_session,
    poisson_spot_distribution, single_emitter_fraction, CalibrationConstants, SessionSpec, StatsError, YieldEntry,
    YieldModel,
};

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

#[test]
fn single_emitter_fractions() {
    for (lambda, p1) in [(0.5, 0.3033), (1.0, 0.3679), (2.0, 0.2707)] {
        let got = single_emitter_fraction(lambda).unwrap();
        assert!((got - p1).abs() < 1e-4, "{lambda}: {got}");
        assert!((got - lambda * (-lambda as f64).exp()).abs() < 1e-12);
    }
    assert_eq!(poisson_spot_distribution(0.0).unwrap()[0], 1.0);
    assert!(matches!(poisson_spot_distribution(-1.0), Err(StatsError::Domain(_))));
}

#[test]
fn pmf_against_closed_form() {
    let pmf = poisson_spot_distribution(3.2).unwrap();
    for (k, p) in pmf.iter().enumerate().take(15) {
        let exact = 3.2f64.powi(k as i32) * (-3.2f64).exp() / factorial(k);
        assert!((p - exact).abs() < 1e-12, "k={k}");
    }
}

#[test]
fn planning_fluence_for_one_emitter() {
    let area = nominal_spot_area_cm2();
    let f = fluence_for_mean(1.0, 0.021, area).unwrap();
    assert!((f / 0.6e10 - 1.0).abs() < 0.05, "{f:e}");
    let ions = 0.6e10 * area;
    assert!((ions - 47.1).abs() < 0.1);
    assert!(matches!(fluence_for_mean(1.0, 0.0, area), Err(StatsError::Infeasible(_))));
}

#[test]
fn session_c_ladder() {
    let spec = SessionSpec::preset("C").unwrap();
    let expected = [1.28e11, 6.4e10, 3.2e10, 1.6e10, 8e9, 4e9, 2e9, 1e9];
    assert_eq!(spec.fluences_cm2, expected);
    assert_eq!(halving_ladder(1.28e11, 8), expected);
}

#[test]
fn session_d_single_emitter_fraction() {
    let plan = plan_session(&SessionSpec::preset("D").unwrap(), &YieldModel::default()).unwrap();
    let lattice: Vec<_> = plan.lattice().collect();
    assert_eq!(lattice.len(), 5);
    let lambda = lattice[0].expected_emitters;
    assert!((lambda - 1.6 / 0.6).abs() < 1e-9);
    let p1 = single_emitter_fraction(lambda).unwrap();
    assert!((p1 - 0.1858).abs() < 1e-3, "{p1}");
    assert_eq!(plan.spots.iter().filter(|s| s.marker).count(), 1);
}

#[test]
fn countrate_with_uncertainty() {
    let c = CalibrationConstants::default();
    let e = emitters_from_countrate(2700.0, 1.0, &c).unwrap();
    assert!((e.count - 1.0).abs() < 1e-12);
    assert!((e.sigma - 0.1111).abs() < 1e-3);
    assert_eq!(emitters_from_countrate(5400.0, 2.0, &c).unwrap().count, 4.0);
    assert!(emitters_from_countrate(100.0, 0.5, &c).is_err());
}

#[test]
fn yield_above_one_is_inconsistent() {
    let area = nominal_spot_area_cm2();
    assert!((activation_yield(1e8 * area, 1e8, area, 1.0).unwrap() - 1.0).abs() < 1e-12);
    assert!(matches!(activation_yield(2e8 * area, 1e8, area, 1.0), Err(StatsError::YieldAboveOne(_))));
}

#[test]
fn constant_below_1e12() {
    let m = YieldModel {
        entries: vec![
            YieldEntry { energy_mev: 2.9, fluence_cm2: 1e12, activation_yield: 0.03 },
            YieldEntry { energy_mev: 2.9, fluence_cm2: 1e14, activation_yield: 0.008 },
        ],
        ..YieldModel::default()
    };
    assert_eq!(m.yield_at(2.9, 1e9), 0.03);
    assert_eq!(m.yield_at(2.9, 1e14), 0.008);
    let mid = m.yield_at(2.9, 1e13);
    assert!((mid - 0.019).abs() < 1e-12);
}

proptest! {
    #[test]
    fn fluence_and_yield_round_trip(lambda in 0.01f64..50.0, y in 1e-4f64..1.0) {
        let area = nominal_spot_area_cm2();
        let f = fluence_for_mean(lambda, y, area).unwrap();
        let back = activation_yield(lambda, f, area, 1.0).unwrap();
        prop_assert!((back / y - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pmf_normalized_with_mean_lambda(lambda in 0.0f64..200.0) {
        let pmf = poisson_spot_distribution(lambda).unwrap();
        let total: f64 = pmf.iter().sum();
        let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!((mean - lambda).abs() < 1e-6 * lambda.max(1.0));
    }

    #[test]
    fn countrate_is_linear(rate in 0.0f64..1e6, ratio in 1.0f64..20.0, k in 0.0f64..10.0) {
        let c = CalibrationConstants::default();
        let a = emitters_from_countrate(rate, ratio, &c).unwrap().count;
        let b = emitters_from_countrate(k * rate, ratio, &c).unwrap().count;
        prop_assert!((b - k * a).abs() <= 1e-9 * b.abs().max(1.0));
    }

    #[test]
    fn plan_lattice_and_expectations(rows in 1usize..6, cols in 1usize..6, sep in 1.0f64..20.0, f in 1e8f64..1e14) {
        let spec = SessionSpec {
            label: "p".into(),
            energy_mev: 1.0,
            fluences_cm2: vec![f],
            separation_um: sep,
            rows,
            columns: cols,
            marker_offset_um: None,
            marker_fluence_cm2: 1e14,
            spot_diameter_um: 1.0,
            throughput_correction: 1.0,
        };
        let y = YieldModel::constant(0.02).unwrap();
        let plan = plan_session(&spec, &y).unwrap();
        prop_assert_eq!(plan.spots.len(), rows * cols);
        for s in &plan.spots {
            let (cx, cy) = (s.x_um / sep, s.y_um / sep);
            prop_assert!((cx - cx.round()).abs() < 1e-9 && (cy - cy.round()).abs() < 1e-9);
            prop_assert!((s.expected_ions - f * nominal_spot_area_cm2()).abs() <= 1e-9 * s.expected_ions);
            prop_assert!((s.expected_emitters - 0.02 * s.expected_ions).abs() <= 1e-9 * s.expected_ions);
        }
    }

    #[test]
    fn yield_constant_below_threshold(f in 1e8f64..1e12, y in 0.0f64..1.0) {
        let m = YieldModel {
            entries: vec![YieldEntry { energy_mev: 0.4, fluence_cm2: 1e12, activation_yield: y }],
            ..YieldModel::default()
        };
        prop_assert_eq!(m.yield_at(0.4, f), y);
    }
}
