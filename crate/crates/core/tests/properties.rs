use hawkes_stein::distance::{empirical_w1_to_gaussian, fit_power_law};
use hawkes_stein::stein::{total_bound, Budget};
use hawkes_stein::{
    expected_count, expected_intensity, simulate_shift, HawkesModel, Kernel, MarkDistribution, RandomState,
};
use proptest::prelude::*;

fn kernel_strategy() -> impl Strategy<Value = Kernel> {
    prop_oneof![
        (0.05f64..0.9, 0.5f64..3.0).prop_map(|(r, b)| Kernel::exponential(r * b, b).unwrap()),
        (0.05f64..0.9, 0.5f64..3.0).prop_map(|(r, b)| Kernel::erlang(r * b * b, b).unwrap()),
        Just(Kernel::zero()),
        (0.05f64..0.9, 0.2f64..2.0).prop_map(|(r, end)| {
            // A decreasing ramp on [0, end] with mass r.
            Kernel::tabulated(vec![0.0, end], vec![2.0 * r / end, 0.0]).unwrap()
        }),
    ]
}

fn marks_strategy() -> impl Strategy<Value = MarkDistribution> {
    prop_oneof![
        Just(MarkDistribution::point_mass_one()),
        (-2.0f64..2.0, 0.1f64..2.0).prop_map(|(m, s)| MarkDistribution::gaussian(m, s).unwrap()),
        (-2.0f64..0.0, 0.0f64..3.0, 0.05f64..0.95).prop_map(|(a, b, p)| MarkDistribution::two_point(a, b, p).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn w1_scale_equivariance(samples in prop::collection::vec(-10.0f64..10.0, 1..200), gamma2 in 0.1f64..5.0, c in 0.1f64..10.0) {
        let base = empirical_w1_to_gaussian(&samples, gamma2).unwrap();
        let scaled: Vec<f64> = samples.iter().map(|x| c * x).collect();
        let d = empirical_w1_to_gaussian(&scaled, c * c * gamma2).unwrap();
        prop_assert!((d - c * base).abs() <= 1e-9 * (1.0 + c * base));
    }

    #[test]
    fn w1_translation_is_lipschitz(samples in prop::collection::vec(-5.0f64..5.0, 1..200), gamma2 in 0.1f64..5.0, delta in -3.0f64..3.0) {
        let base = empirical_w1_to_gaussian(&samples, gamma2).unwrap();
        let shifted: Vec<f64> = samples.iter().map(|x| x + delta).collect();
        let d = empirical_w1_to_gaussian(&shifted, gamma2).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!((d - base).abs() <= delta.abs() + 1e-12);
    }

    #[test]
    fn w1_ignores_sample_order(mut samples in prop::collection::vec(-5.0f64..5.0, 1..100), gamma2 in 0.1f64..5.0) {
        let a = empirical_w1_to_gaussian(&samples, gamma2).unwrap();
        samples.reverse();
        prop_assert_eq!(a, empirical_w1_to_gaussian(&samples, gamma2).unwrap());
    }

    #[test]
    fn power_law_slope_recovered(c in 0.01f64..10.0, s in -2.0f64..1.0) {
        let pts: Vec<(f64, f64)> = [25.0f64, 50.0, 100.0, 200.0, 400.0].iter().map(|&t| (t, c * t.powf(s))).collect();
        let fit = fit_power_law(&pts).unwrap();
        prop_assert!((fit.slope - s).abs() < 1e-9);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-8);
    }

    #[test]
    fn mean_count_differentiates_to_mean_intensity(kernel in kernel_strategy(), mu in 0.1f64..3.0, t in 0.5f64..30.0) {
        let h = 1e-4;
        let slope = (expected_count(&kernel, mu, t + h) - expected_count(&kernel, mu, t - h)) / (2.0 * h);
        let target = expected_intensity(&kernel, mu, t);
        prop_assert!((slope - target).abs() < 1e-4 * target.max(1.0), "{} vs {}", slope, target);
        prop_assert!(target >= mu * (1.0 - 1e-12));
    }

    #[test]
    fn resolvent_is_nonnegative_and_bounded(kernel in kernel_strategy(), t in 0.0f64..20.0) {
        let psi = kernel.psi(t).unwrap();
        prop_assert!(psi >= 0.0);
        prop_assert!(kernel.psi_integral(t) <= kernel.psi_l1() * (1.0 + 1e-6) + 1e-9);
    }

    #[test]
    fn simulated_paths_are_consistent(kernel in kernel_strategy(), marks in marks_strategy(), mu in 0.1f64..2.0, horizon in 1.0f64..30.0, seed in any::<u64>()) {
        let model = HawkesModel::new(kernel, mu, marks).unwrap();
        let state = RandomState::new(seed, 0);
        let path = model.simulate(horizon, &state).unwrap();
        prop_assert!(path.event_times.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(path.event_times.iter().all(|&t| t > 0.0 && t <= horizon));
        prop_assert_eq!(path.marks.len(), path.count());
        for (&t, &pre) in path.event_times.iter().zip(&path.intensity_pre) {
            let direct = model.intensity_at(&path, t).unwrap();
            prop_assert!(pre >= mu * (1.0 - 1e-12));
            prop_assert!((pre - direct).abs() <= 1e-9 * direct);
        }
        prop_assert_eq!(&model.simulate(horizon, &state).unwrap(), &path);
        let split = horizon * 0.37;
        let whole = model.compensator(&path);
        let parts = model.intensity_integral(&path, 0.0, split) + model.intensity_integral(&path, split, horizon);
        prop_assert!((whole - parts).abs() <= 1e-9 * whole);
    }

    #[test]
    fn shifts_stay_in_window(kernel in kernel_strategy(), mu in 0.1f64..2.0, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let model = HawkesModel::new(kernel, mu, MarkDistribution::point_mass_one()).unwrap();
        let state = RandomState::new(seed, 1);
        let base = model.simulate(20.0, &state).unwrap();
        let t = 20.0 * frac;
        let shift = simulate_shift(&model, &base, t, &state.derive(9)).unwrap();
        prop_assert!(shift.hat_event_times.iter().all(|&s| s > t && s <= 20.0));
        prop_assert!(shift.hat_compensator >= 0.0);
        let m = shift.count() as f64 - shift.hat_compensator;
        prop_assert!((shift.terminal_martingale - m).abs() <= 1e-9 * (1.0 + m.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn poisson_bound_is_closed_form(marks in marks_strategy(), mu in 0.2f64..3.0, horizon in 5.0f64..200.0) {
        let model = HawkesModel::new(Kernel::zero(), mu, marks.clone()).unwrap();
        let r = total_bound(&model, horizon, Budget { n_outer: 20, k_grid: 4 }, 1, 0).unwrap();
        let expected = mu * marks.abs3() / horizon.sqrt();
        prop_assert!((r.total - expected).abs() <= 1e-12 * (1.0 + expected));
    }
}
