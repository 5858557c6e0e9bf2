use avalanche::meanfield::*;
use proptest::prelude::*;

/// Plain explicit Euler on the untruncated-in-spirit system written out term
/// by term, used as a slow independent reference.
fn euler_reference(c0: &[f64], t_end: f64, h: f64) -> Vec<f64> {
    let n = c0.len();
    let mut c = c0.to_vec();
    let steps = (t_end / h).round() as usize;
    for _ in 0..steps {
        let m0: f64 = c.iter().sum();
        let mut d = vec![0.0; n];
        let mut frag = 0.0;
        for k in 2..=n {
            frag += ((k - 1) * k) as f64 * c[k - 1];
        }
        d[0] = -2.0 * c[0] + frag;
        for k in 2..=n {
            let mut gain = 0.0;
            for i in 1..k {
                gain += c[i - 1] * c[k - i - 1];
            }
            d[k - 1] = -2.0 * c[k - 1] - (k - 1) as f64 * c[k - 1] + gain / m0;
        }
        for k in 0..n {
            c[k] += h * d[k];
        }
    }
    c
}

#[test]
fn g_matches_reference_value() {
    let g = solve_g(DEFAULT_ORDER, 1e-10).unwrap();
    assert!((g - 1.4458).abs() < 5e-4, "g = {g}");
}

#[test]
fn steady_state_moments() {
    let s = steady_state(DEFAULT_ORDER, 1e-10).unwrap();
    assert!(s.residual <= 1e-10);
    assert!((s.c.get(1) - 0.5).abs() < 1e-9);
    assert!((s.m2() - 2.0).abs() < 1e-6);
    assert!((s.m0() - 1.0 / s.g).abs() < 1e-9);
    assert!((s.m1() - 1.0).abs() < 1e-6);
    assert!((s.m0() - 0.6916).abs() < 1e-4);
}

#[test]
fn steady_state_table_values() {
    // c_4 and c_5 agree with the reference table to every printed digit
    let s = steady_state(DEFAULT_ORDER, 1e-12).unwrap();
    assert!((s.c.get(4) - 0.01679).abs() < 1e-5);
    assert!((s.c.get(5) - 0.006574).abs() < 1e-6);
    // hand evaluation: a_6 = 11/420, so c_6 = (11/420) g^5 / 64
    let c6 = 11.0 / 420.0 * s.g.powi(5) / 64.0;
    assert!((s.c.get(6) - c6).abs() < 1e-15);
}

#[test]
fn series_identities_hold() {
    let s = steady_state(DEFAULT_ORDER, 1e-12).unwrap();
    let id = series_identities(&s.a, s.g);
    assert!(id.gap_square < 1e-8);
    assert!(id.gap_linear < 1e-8);
    assert!((id.g_moment - s.g).abs() < 1e-8);
}

#[test]
fn steady_state_is_stationary() {
    let s = steady_state(200, 1e-14).unwrap();
    let d = ode_rhs(&s.c).unwrap();
    assert!(d.iter().all(|x| x.abs() < 1e-12), "{:?}", &d[..6]);
}

#[test]
fn leakage_matches_wide_embedding() {
    let c = MeanFieldVector::new(vec![0.3, 0.2, 0.1, 0.05]).unwrap();
    let leak = leakage_rate(&c).unwrap();
    // coagulations i + j > 4 among masses 1..4, each carrying i + j
    let m0 = c.m0();
    let mut direct = 0.0;
    for i in 1..=4 {
        for j in 1..=4 {
            if i + j > 4 {
                direct += (i + j) as f64 * c.get(i) * c.get(j) / m0;
            }
        }
    }
    assert!((leak - direct).abs() < 1e-14);
    let d = ode_rhs(&c).unwrap();
    let dm1: f64 = d.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x).sum();
    assert!((dm1 + leak).abs() < 1e-14);
}

#[test]
fn rk4_agrees_with_euler_reference() {
    let c0 = MeanFieldVector::monodisperse(64).unwrap();
    let control = StepControl {
        h: 1e-2,
        max_halvings: 8,
        record_every: 10,
    };
    let tr = integrate(&c0, 2.0, control).unwrap();
    let reference = euler_reference(c0.as_slice(), 2.0, 1e-5);
    let reference = MeanFieldVector::new(reference).unwrap();
    assert!(tr.last().max_abs_diff(&reference) < 1e-4);
}

#[test]
fn mass_drift_bounded_by_leakage() {
    let c0 = MeanFieldVector::new(vec![0.0, 0.0, 0.0, 0.25]).unwrap();
    let c0 = c0.resized(16).unwrap();
    let tr = integrate(&c0, 10.0, StepControl::default()).unwrap();
    for (drift, leaked) in tr.m1_drift.iter().zip(&tr.leaked) {
        assert!(drift.abs() <= leaked + 1e-12);
        assert!((drift + leaked).abs() < 1e-12);
    }
}

#[test]
fn converges_from_several_initial_data() {
    let order = 64;
    let target = steady_state(order, 1e-14).unwrap().c;
    let starts = [
        MeanFieldVector::monodisperse(order).unwrap(),
        MeanFieldVector::new(vec![0.0, 0.5]).unwrap().resized(order).unwrap(),
        MeanFieldVector::new(vec![0.2, 0.1, 0.1, 0.05, 0.02])
            .unwrap()
            .resized(order)
            .unwrap(),
    ];
    for c0 in &starts {
        let m1 = c0.m1();
        let tr = integrate(c0, 60.0, StepControl::default()).unwrap();
        // the system is homogeneous of degree one, so mass m relaxes to m c*
        let scaled = MeanFieldVector::new(tr.last().as_slice().iter().map(|x| x / m1).collect())
            .unwrap();
        assert!(scaled.max_abs_diff(&target) < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn coefficients_in_unit_interval(order in 1usize..400) {
        let a = compute_a(order).unwrap();
        prop_assert!(a.iter().all(|&x| x > 0.0 && x <= 1.0));
    }

    #[test]
    fn rhs_conserves_particle_balance(c in proptest::collection::vec(0.0f64..1.0, 2..20)) {
        prop_assume!(c.iter().sum::<f64>() > 1e-3);
        let v = MeanFieldVector::new(c).unwrap();
        let d = ode_rhs(&v).unwrap();
        let dm1: f64 = d.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x).sum();
        let leak = leakage_rate(&v).unwrap();
        prop_assert!(leak >= 0.0);
        prop_assert!((dm1 + leak).abs() < 1e-9 * (1.0 + leak));
    }

    #[test]
    fn integration_keeps_concentrations_nonnegative(
        c in proptest::collection::vec(0.0f64..1.0, 1..12),
    ) {
        prop_assume!(c.iter().sum::<f64>() > 1e-2);
        let v = MeanFieldVector::new(c).unwrap().resized(24).unwrap();
        let tr = integrate(&v, 1.0, StepControl { h: 0.01, max_halvings: 10, record_every: 20 }).unwrap();
        for s in &tr.states {
            prop_assert!(s.as_slice().iter().all(|&x| x >= -1e-12));
        }
    }
}
