use std::collections::BTreeMap;

use avalanche::forward::*;
use avalanche::harness::stats::{align_counts, chi_square_homogeneity, proportion};
use avalanche::harness::window_key;
use avalanche::lattice::sample_bernoulli_config;
use avalanche::{Config, RngStream, Window};
use proptest::prelude::*;

fn bits(width: usize) -> impl Strategy<Value = Vec<bool>> {
    proptest::collection::vec(any::<bool>(), width)
}

fn marks(width: usize, len: usize) -> impl Strategy<Value = Vec<(i64, bool)>> {
    proptest::collection::vec((0..width as i64, any::<bool>()), 0..len)
}

fn log_of(width: usize, marks: &[(i64, bool)]) -> EventLog {
    EventLog {
        window: Window::new(0, width as i64 - 1).unwrap(),
        horizon: Horizon::Events(marks.len() as u64),
        marks: marks
            .iter()
            .enumerate()
            .map(|(k, &(site, grey))| Mark {
                site,
                color: Color::from_coin(grey),
                ordinal: k as u64 + 1,
                time: None,
            })
            .collect(),
    }
}

proptest! {
    #[test]
    fn coupled_runs_stay_dominated(
        (z, mask, ms) in (1usize..10).prop_flat_map(|w| (bits(w), bits(w), marks(w, 60)))
    ) {
        let width = z.len();
        let e: Vec<bool> = z.iter().zip(&mask).map(|(&a, &b)| a && b).collect();
        let zeta0 = Config::from_bits(0, &z);
        let traj = run_coupled(&zeta0, &Config::from_bits(0, &e), &log_of(width, &ms)).unwrap();
        for s in traj.states() {
            prop_assert!(s.is_dominated());
        }
        // the Bernoulli layer only sees the parity of its black marks
        let log = log_of(width, &ms);
        prop_assert_eq!(traj.final_state().zeta, evolve_bernoulli(&zeta0, &log.counts(Color::Black)));
    }

    #[test]
    fn avalanche_leaves_the_rest_alone(
        (e, site) in (1usize..12).prop_flat_map(|w| (bits(w), 0..w as i64))
    ) {
        let before = Config::from_bits(0, &e);
        let mut after = before.clone();
        let changed = avalanche_apply_mark(&mut after, site);
        for s in 0..e.len() as i64 {
            if !changed.contains(&s) {
                prop_assert_eq!(before.get(s), after.get(s));
            }
        }
        if e[site as usize] {
            prop_assert!(changed.iter().all(|&s| !after.is_occupied(s)));
            // the cleared run is bounded by vacant sites (or the window edge)
            let lo = *changed.iter().min().unwrap();
            let hi = *changed.iter().max().unwrap();
            prop_assert!(!before.is_occupied(lo - 1) && !before.is_occupied(hi + 1));
            prop_assert_eq!(changed.len() as i64, hi - lo + 1);
        } else {
            prop_assert_eq!(changed, vec![site]);
        }
    }

    #[test]
    fn pair_order_and_absorption(
        (lo, hi_mask, ms) in (1usize..8).prop_flat_map(|w| (bits(w), bits(w), marks(w, 40)))
    ) {
        let width = lo.len();
        let hi: Vec<bool> = lo.iter().zip(&hi_mask).map(|(&a, &b)| a || b).collect();
        let pair = run_coupled_bernoulli_pair(&Config::from_bits(0, &lo), &Config::from_bits(0, &hi), &log_of(width, &ms)).unwrap();
        let states = pair.states();
        let mut met = vec![false; width];
        for (a, b) in &states {
            for (s, met) in met.iter_mut().enumerate() {
                let s = s as i64;
                prop_assert!(!a.is_occupied(s) || b.is_occupied(s));
                let equal = a.get(s) == b.get(s);
                prop_assert!(!*met || equal, "coalescence undone at {}", s);
                *met |= equal;
            }
        }
    }
}

#[test]
fn equal_pair_moves_together() {
    let mut rng = RngStream::new(31, 0);
    let w = Window::new(0, 6).unwrap();
    let z = Config::from_bits(0, &[true, false, true, true, false, false, true]);
    let log = generate_event_log(w, Horizon::Events(200), &mut rng).unwrap();
    let pair = run_coupled_bernoulli_pair(&z, &z, &log).unwrap();
    assert!(pair.states().iter().all(|(a, b)| a == b));
}

#[test]
fn coalescence_tail_at_time_one() {
    // a single disagreeing site coalesces at the first mark of either colour
    let w = Window::new(0, 0).unwrap();
    let (a, b) = (Config::from_bits(0, &[false]), Config::from_bits(0, &[true]));
    let n = 100_000;
    let mut late = 0;
    for r in 0..n {
        let log = generate_event_log(w, Horizon::Time(1.0), &mut RngStream::replica(32, r)).unwrap();
        if !run_coupled_bernoulli_pair(&a, &b, &log).unwrap().coalescence.contains_key(&0) {
            late += 1;
        }
    }
    let p = proportion(late, n);
    assert!(p.value <= (-2.0f64).exp() + 3.0 * p.se, "{p:?}");
}

#[test]
fn poisson_counts_and_fair_colours() {
    let w = Window::new(0, 0).unwrap();
    let n = 100_000u64;
    let blacks: Vec<f64> = (0..n)
        .map(|r| {
            let log = generate_event_log(w, Horizon::Time(1.0), &mut RngStream::replica(33, r)).unwrap();
            log.marks.iter().filter(|m| m.color == Color::Black).count() as f64
        })
        .collect();
    let mean = blacks.iter().sum::<f64>() / n as f64;
    assert!((mean - 1.0).abs() <= 3.0 / (n as f64).sqrt(), "{mean}");

    let log = generate_event_log(Window::centered(5), Horizon::Events(100_000), &mut RngStream::new(34, 0)).unwrap();
    let grey = log.marks.iter().filter(|m| m.color == Color::Grey).count() as u64;
    assert!(proportion(grey, 100_000).within(0.5, 3.0));
    assert!(log.marks.iter().enumerate().all(|(k, m)| m.ordinal == k as u64 + 1));
}

#[test]
fn time_mode_is_increasing() {
    let log = generate_event_log(Window::centered(3), Horizon::Time(20.0), &mut RngStream::new(35, 0)).unwrap();
    let times: Vec<f64> = log.marks.iter().map(|m| m.time.unwrap()).collect();
    assert!(times.windows(2).all(|p| p[0] < p[1]));
    assert!(times.iter().all(|&t| t <= 20.0));
}

#[test]
fn bernoulli_layer_relaxes_to_one_half() {
    let w = Window::centered(5);
    let replicas = 20_000u64;
    let mut occupied = 0u64;
    for r in 0..replicas {
        let mut rng = RngStream::replica(36, r);
        let log = generate_event_log(w, Horizon::Events(300), &mut rng).unwrap();
        let traj = run_coupled(&Config::vacant(w), &Config::vacant(w), &log).unwrap();
        occupied += traj.final_state().zeta.occupied_count() as u64;
    }
    assert!(proportion(occupied, replicas * 11).within(0.5, 3.0));
}

#[test]
fn stationary_bernoulli_is_reversible() {
    // transitions (x_s, x_t) and their reversals (x_t, x_s) share one law
    let w = Window::new(0, 1).unwrap();
    let mut forward = BTreeMap::new();
    let mut backward = BTreeMap::new();
    for r in 0..40_000u64 {
        let mut rng = RngStream::replica(37, r);
        let lazy = sample_bernoulli_config(w, &mut rng).unwrap();
        let zeta0 = Config::from_states(0, lazy.states().collect());
        let log = generate_event_log(w, Horizon::Time(1.0), &mut rng).unwrap();
        let at = |t: f64| {
            let mut counts = std::collections::HashMap::new();
            for m in log.marks.iter().filter(|m| m.color == Color::Black && m.time.unwrap() <= t) {
                *counts.entry(m.site).or_insert(0u64) += 1;
            }
            window_key(&evolve_bernoulli(&zeta0, &counts))
        };
        let (x, y) = (at(0.3), at(1.0));
        *forward.entry(format!("{x}>{y}")).or_insert(0u64) += 1;
        *backward.entry(format!("{y}>{x}")).or_insert(0u64) += 1;
    }
    let (a, b) = align_counts(&forward, &backward);
    let t = chi_square_homogeneity(&a, &b).unwrap();
    assert!(t.p_value > 0.01, "{t:?}");
}
