use avalanche::harness::*;
use avalanche::meanfield::steady_state;
use avalanche::sampler::Variant;

#[test]
fn histogram_is_normalized() {
    let stats = estimate_cluster_mass_distribution(20_000, 50, Variant::Step1Prime, 2).unwrap();
    let h = &stats.histogram;
    assert_eq!(h.total, 20_000);
    assert!((h.m1() - 1.0).abs() < 1e-12);
    let mass: f64 = h.counts.keys().map(|&k| k as f64 * h.c_hat(k).value).sum();
    assert!((mass - 1.0).abs() < 1e-12);
    assert!(stats.warnings.is_empty());
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let one = estimate_cluster_mass_distribution(3_000, 51, Variant::Step1, 1).unwrap();
    let four = estimate_cluster_mass_distribution(3_000, 51, Variant::Step1, 4).unwrap();
    assert_eq!(one, four);
    assert_eq!(y1_statistics(5_000, 52, 1).unwrap(), y1_statistics(5_000, 52, 3).unwrap());
}

#[test]
fn dependence_is_translation_invariant() {
    let a = mixing_estimate(0, 2, 200_000, 53, 4).unwrap();
    let b = mixing_estimate(5, 2, 200_000, 54, 4).unwrap();
    let diff = a.covariance.value - b.covariance.value;
    let se = a.covariance.se.hypot(b.covariance.se);
    assert!(diff.abs() <= 3.0 * se, "{a:?} {b:?}");
    assert!(a.covariance.value > 3.0 * a.covariance.se);
}

#[test]
fn distance_at_time_zero_is_the_density() {
    let e = tte_estimate(InitialCondition::AllVacant, 0.0, 0, 0, 200_000, 55, 4).unwrap();
    let se = (0.3076f64 * 0.6924 / 200_000.0).sqrt();
    assert!((e.tv - 0.3076).abs() <= 3.0 * se, "{e:?}");
}

#[test]
fn comparison_flags_the_gap() {
    let stats = estimate_cluster_mass_distribution(50_000, 56, Variant::Step1Prime, 4).unwrap();
    let steady = steady_state(2000, 1e-12).unwrap();
    let cmp = compare_with_meanfield(&stats.histogram, &steady, 6);
    assert_eq!(cmp.rows.len(), 8);
    assert_eq!(cmp.rows[0].quantity, "c_1");
    for row in &cmp.rows {
        assert_eq!(row.distinguishable, row.z.abs() > 3.0);
        assert_eq!(cmp.near_equalities.contains(&row.quantity), !row.distinguishable);
    }
}
