//! Monte-Carlo experiments built on the samplers and the mean-field model.
//!
//! Replica `i` of a run with master seed `s` draws from
//! [`RngStream::replica`]`(s, i)` (or a stream derived from it), so results
//! do not depend on the number of workers.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{self, Estimate};
use crate::contour::{init_right_contour, run_until_meet, sample_y1, MeetRecord};
use crate::error::{Error, Result};
use crate::forward::run_avalanche_for;
use crate::lattice::{particle_mass_at_edge, sample_bernoulli_config, Config, SiteIndex, SiteState, Window};
use crate::meanfield::SteadyStateSolution;
use crate::rng::RngStream;
use crate::sampler::{Sampler, Variant};

/// Initial window radius of the adaptive cluster-mass estimator.
pub const ADAPTIVE_START_L: u64 = 16;
/// Discard rate above which an adaptive-window warning is raised.
pub const ADAPTIVE_WARN_RATE: f64 = 0.01;
const BOOTSTRAP_ROUNDS: usize = 200;

const TAG_FORWARD: u64 = 0x666f7277;
const TAG_EXACT: u64 = 0x65786163;
const TAG_BOOT: u64 = 0x626f6f74;

/// Runs `f(state, i)` for `i in 0..n`, fanning out over `workers` threads
/// with one `init()` state per worker. Output is in replica order.
pub fn run_replicas<T, S, I, F>(n: u64, workers: usize, init: I, f: F) -> Vec<T>
where
    T: Send,
    I: Fn() -> S + Send + Sync,
    F: Fn(&mut S, u64) -> T + Send + Sync,
{
    if workers <= 1 {
        let mut state = init();
        return (0..n).map(|i| f(&mut state, i)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool");
    pool.install(|| (0..n).into_par_iter().map_init(&init, |s, i| f(s, i)).collect())
}

/// Warnings attached to experiment results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Warning {
    AdaptiveWindowWarning { discards: u64, replicas: u64, rate: f64 },
    /// A replica ran out of its event budget and was left out.
    BudgetWarning { replica: u64, budget: u64 },
}

/// 0/1 string of a configuration over its window.
pub fn window_key(config: &Config) -> String {
    config
        .states()
        .map(|s| if s.is_occupied() { '1' } else { '0' })
        .collect()
}

/// Histogram of the mass `M` of the particle holding the edge `(0, 1)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MassHistogram {
    pub counts: BTreeMap<u64, u64>,
    pub total: u64,
}

impl MassHistogram {
    pub fn from_masses(masses: impl IntoIterator<Item = u64>) -> Self {
        let mut h = Self::default();
        for m in masses {
            *h.counts.entry(m).or_default() += 1;
            h.total += 1;
        }
        h
    }

    /// `c_k = P[M = k] / k`.
    pub fn c_hat(&self, k: u64) -> Estimate {
        let p = stats::proportion(*self.counts.get(&k).unwrap_or(&0), self.total);
        Estimate::new(p.value / k as f64, p.se / k as f64)
    }

    /// Mean of `f(M)` with its standard error.
    fn moment(&self, f: impl Fn(f64) -> f64) -> Estimate {
        let n = self.total as f64;
        let mean = self.counts.iter().map(|(&m, &c)| c as f64 * f(m as f64)).sum::<f64>() / n;
        let var = self
            .counts
            .iter()
            .map(|(&m, &c)| c as f64 * (f(m as f64) - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0).max(1.0);
        Estimate::new(mean, (var / n).sqrt())
    }

    /// `sum_k c_k = E[1/M]`, the particle density.
    pub fn sum_c(&self) -> Estimate {
        self.moment(|m| 1.0 / m)
    }

    /// `sum_k k^2 c_k = E[M]`.
    pub fn m2(&self) -> Estimate {
        self.moment(|m| m)
    }

    /// `sum_k k c_k`, one by construction.
    pub fn m1(&self) -> f64 {
        self.counts.values().sum::<u64>() as f64 / self.total as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub histogram: MassHistogram,
    pub variant: Variant,
    pub start_l: u64,
    /// Samples thrown away because the run at the edge reached the window.
    pub discards: u64,
    pub warnings: Vec<Warning>,
}

/// Monte-Carlo estimate of the cluster-mass law under the invariant measure,
/// starting every replica on `[-16, 16]`.
pub fn estimate_cluster_mass_distribution(samples: u64, seed: u64, variant: Variant, workers: usize) -> Result<ClusterStats> {
    estimate_cluster_mass_distribution_from(samples, seed, variant, ADAPTIVE_START_L, workers)
}

/// As [`estimate_cluster_mass_distribution`] with a chosen starting radius.
/// A replica whose edge particle touches the window boundary is discarded
/// and rerun from scratch at twice the radius.
pub fn estimate_cluster_mass_distribution_from(
    samples: u64,
    seed: u64,
    variant: Variant,
    start_l: u64,
    workers: usize,
) -> Result<ClusterStats> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    if start_l < 2 {
        return Err(Error::InvalidArgument("starting radius must be at least 2".into()));
    }
    let results = run_replicas(
        samples,
        workers,
        || Sampler::new(variant),
        |sampler, i| -> Result<(u64, u64)> {
            let mut rng = RngStream::replica(seed, i);
            let mut l = start_l;
            let mut discards = 0;
            loop {
                let sample = sampler.sample(l, &mut rng)?;
                match particle_mass_at_edge(&sample.config) {
                    Ok(m) => return Ok((m, discards)),
                    Err(Error::BoundaryTruncated { .. }) => {
                        discards += 1;
                        l *= 2;
                    }
                    Err(e) => return Err(e),
                }
            }
        },
    );
    let mut masses = Vec::with_capacity(samples as usize);
    let mut discards = 0;
    for r in results {
        let (m, d) = r?;
        masses.push(m);
        discards += d;
    }
    let rate = discards as f64 / (samples + discards) as f64;
    let mut warnings = Vec::new();
    if rate > ADAPTIVE_WARN_RATE {
        warnings.push(Warning::AdaptiveWindowWarning {
            discards,
            replicas: samples,
            rate,
        });
    }
    Ok(ClusterStats {
        histogram: MassHistogram::from_masses(masses),
        variant,
        start_l,
        discards,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub quantity: String,
    pub mean_field: f64,
    pub monte_carlo: Estimate,
    pub z: f64,
    /// `|z| > 3`
    pub distinguishable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Quantities on which the two models are not told apart at 3 sigma.
    pub near_equalities: Vec<String>,
}

/// Side-by-side mean-field and Monte-Carlo values of `c_1..c_{k_max}`, the
/// particle density and `sum k^2 c_k`.
pub fn compare_with_meanfield(hist: &MassHistogram, steady: &SteadyStateSolution, k_max: u64) -> Comparison {
    let row = |quantity: String, mean_field: f64, monte_carlo: Estimate| {
        let z = monte_carlo.z(mean_field);
        ComparisonRow {
            quantity,
            mean_field,
            monte_carlo,
            z,
            distinguishable: z.abs() > 3.0,
        }
    };
    let mut rows: Vec<ComparisonRow> = (1..=k_max.min(steady.c.order() as u64))
        .map(|k| row(format!("c_{k}"), steady.c.get(k as usize), hist.c_hat(k)))
        .collect();
    rows.push(row("sum_c".into(), steady.m0(), hist.sum_c()));
    rows.push(row("sum_k2_c".into(), steady.m2(), hist.m2()));
    let near_equalities = rows
        .iter()
        .filter(|r| !r.distinguishable)
        .map(|r| r.quantity.clone())
        .collect();
    Comparison { rows, near_equalities }
}

/// Dependence between the states of two sites under the invariant law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingEstimate {
    pub k: SiteIndex,
    pub n: u64,
    pub samples: u64,
    /// `sum_{a,b} |P[ab] - P[a]P[b]|`
    pub statistic: f64,
    /// Covariance of the two occupation indicators, with its standard error.
    pub covariance: Estimate,
    /// Bootstrap 95% interval for the statistic.
    pub ci: (f64, f64),
    /// 95% level of the statistic under independence at this sample size.
    pub noise_floor: f64,
}

fn dependence(cells: &[f64; 4]) -> (f64, f64) {
    let n: f64 = cells.iter().sum();
    let p: Vec<f64> = cells.iter().map(|c| c / n).collect();
    let a = [p[0] + p[1], p[2] + p[3]];
    let b = [p[0] + p[2], p[1] + p[3]];
    let mut stat = 0.0;
    for x in 0..2 {
        for y in 0..2 {
            stat += (p[2 * x + y] - a[x] * b[y]).abs();
        }
    }
    (stat, p[3] - a[1] * b[1])
}

/// Point estimate plus replica-bootstrap interval for per-replica cell
/// counts. On a 2x2 table every cell deviates from independence by the
/// covariance, so the statistic is `4 |cov|`; the noise floor is the 95%
/// level of that quantity when the true covariance is zero.
fn mixing_summary(k: SiteIndex, n: u64, per_replica: &[[u32; 4]], seed: u64) -> MixingEstimate {
    let total = per_replica.iter().fold([0.0; 4], |mut acc, c| {
        for i in 0..4 {
            acc[i] += c[i] as f64;
        }
        acc
    });
    let (statistic, cov) = dependence(&total);
    let mut rng = RngStream::new(seed, TAG_BOOT ^ n);
    let reps = per_replica.len() as u64;
    let mut boot_stats = Vec::with_capacity(BOOTSTRAP_ROUNDS);
    let mut boot_covs = Vec::with_capacity(BOOTSTRAP_ROUNDS);
    for _ in 0..BOOTSTRAP_ROUNDS {
        let mut cells = [0.0; 4];
        for _ in 0..reps {
            let c = &per_replica[rng.below(reps) as usize];
            for i in 0..4 {
                cells[i] += c[i] as f64;
            }
        }
        let (s, c) = dependence(&cells);
        boot_stats.push(s);
        boot_covs.push(c);
    }
    let cov_se = stats::mean_estimate(&boot_covs).se * (BOOTSTRAP_ROUNDS as f64).sqrt();
    MixingEstimate {
        k,
        n,
        samples: reps,
        statistic,
        covariance: Estimate::new(cov, cov_se),
        ci: (stats::quantile(&boot_stats, 0.025), stats::quantile(&boot_stats, 0.975)),
        noise_floor: 4.0 * 1.96 * cov_se,
    }
}

/// Dependence between `eta(k)` and `eta(k + n)` from exact samples on the
/// smallest centred window holding both sites.
pub fn mixing_estimate(k: SiteIndex, n: u64, samples: u64, seed: u64, workers: usize) -> Result<MixingEstimate> {
    let far = k + n as SiteIndex;
    let l = k.unsigned_abs().max(far.unsigned_abs());
    let per = run_replicas(
        samples,
        workers,
        || Sampler::new(Variant::Step1Prime),
        |sampler, i| -> Result<[u32; 4]> {
            let mut rng = RngStream::replica(seed, i);
            let c = sampler.sample(l, &mut rng)?.config;
            let mut cell = [0; 4];
            cell[2 * c.is_occupied(k) as usize + c.is_occupied(far) as usize] = 1;
            Ok(cell)
        },
    )
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(mixing_summary(k, n, &per, seed))
}

/// Translation-averaged version of [`mixing_estimate`]: every exact sample
/// on `[-l, l]` contributes all pairs `(j, j + n)` inside the window. The
/// invariant law is translation invariant, so this estimates the same
/// quantity with far smaller variance. Returns one estimate per `n`.
pub fn mixing_profile(ns: &[u64], l: u64, samples: u64, seed: u64, workers: usize) -> Result<Vec<MixingEstimate>> {
    let width = 2 * l + 1;
    if ns.iter().any(|&n| n >= width) {
        return Err(Error::InvalidArgument(format!("all separations must be below the window width {width}")));
    }
    let per = run_replicas(
        samples,
        workers,
        || Sampler::new(Variant::Step1Prime),
        |sampler, i| -> Result<Vec<[u32; 4]>> {
            let mut rng = RngStream::replica(seed, i);
            let c = sampler.sample(l, &mut rng)?.config;
            let x: Vec<usize> = c.states().map(|s| s.is_occupied() as usize).collect();
            Ok(ns
                .iter()
                .map(|&n| {
                    let n = n as usize;
                    let mut cell = [0; 4];
                    for p in 0..x.len() - n {
                        cell[2 * x[p] + x[p + n]] += 1;
                    }
                    cell
                })
                .collect())
        },
    )
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(ns
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let column: Vec<[u32; 4]> = per.iter().map(|r| r[j]).collect();
            mixing_summary(-(l as SiteIndex), n, &column, seed)
        })
        .collect())
}

/// Initial configurations for trend-to-equilibrium runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InitialCondition {
    AllVacant,
    Alternating,
    RandomHalf,
}

impl InitialCondition {
    pub fn build(self, window: Window, rng: &mut RngStream) -> Result<Config> {
        Ok(match self {
            InitialCondition::AllVacant => Config::vacant(window),
            InitialCondition::Alternating => {
                Config::from_states(window.left, window.sites().map(|s| SiteState::from_bool(s.rem_euclid(2) == 1)).collect())
            }
            InitialCondition::RandomHalf => {
                let lazy = sample_bernoulli_config(window, rng)?;
                Config::from_states(window.left, lazy.states().collect())
            }
        })
    }
}

/// Histogram of window patterns on `[-l, l]` of exact samples.
pub fn exact_window_counts(l: u64, samples: u64, variant: Variant, seed: u64, workers: usize) -> Result<BTreeMap<String, u64>> {
    let keys = run_replicas(
        samples,
        workers,
        || Sampler::new(variant),
        |sampler, i| -> Result<String> {
            let mut rng = RngStream::replica(seed, i).derive(TAG_EXACT);
            Ok(window_key(&sampler.sample(l, &mut rng)?.config))
        },
    );
    let mut counts = BTreeMap::new();
    for k in keys {
        *counts.entry(k?).or_default() += 1;
    }
    Ok(counts)
}

/// Histogram of window patterns on `[-l, l]` at time `t` of the avalanche
/// process on `[-radius, radius]` (vacant outside) started from `phi`.
pub fn forward_window_counts(
    phi: InitialCondition,
    t: f64,
    l: u64,
    radius: u64,
    samples: u64,
    seed: u64,
    workers: usize,
) -> Result<BTreeMap<String, u64>> {
    let keys = run_replicas(
        samples,
        workers,
        || (),
        |_, i| -> Result<String> {
            let mut rng = RngStream::replica(seed, i).derive(TAG_FORWARD);
            let mut eta = phi.build(Window::centered(radius), &mut rng)?;
            run_avalanche_for(&mut eta, t, &mut rng);
            Ok(window_key(&eta.restrict(Window::centered(l))?))
        },
    );
    let mut counts = BTreeMap::new();
    for k in keys {
        *counts.entry(k?).or_default() += 1;
    }
    Ok(counts)
}

/// Window patterns on `[-l, l]` seen along one long forward run on
/// `[-radius, radius]` from the empty configuration, read every `spacing`
/// time units after `burn_in`.
pub fn forward_time_average(
    l: u64,
    radius: u64,
    burn_in: f64,
    spacing: f64,
    observations: u64,
    seed: u64,
) -> Result<BTreeMap<String, u64>> {
    let mut rng = RngStream::new(seed, TAG_FORWARD);
    let mut eta = Config::vacant(Window::centered(radius));
    run_avalanche_for(&mut eta, burn_in, &mut rng);
    let window = Window::centered(l);
    let mut counts = BTreeMap::new();
    for _ in 0..observations {
        run_avalanche_for(&mut eta, spacing, &mut rng);
        *counts.entry(window_key(&eta.restrict(window)?)).or_default() += 1;
    }
    Ok(counts)
}

/// Mean total variation between two independent empirical laws of the given
/// sizes drawn from the pooled histogram.
pub fn tv_noise_floor(a: &BTreeMap<String, u64>, b: &BTreeMap<String, u64>, seed: u64) -> f64 {
    let (ca, cb) = stats::align_counts(a, b);
    let na: u64 = ca.iter().sum();
    let nb: u64 = cb.iter().sum();
    let pooled: Vec<f64> = ca.iter().zip(&cb).map(|(x, y)| (x + y) as f64 / (na + nb) as f64).collect();
    let mut rng = RngStream::new(seed, TAG_BOOT);
    let rounds = 100;
    let mut acc = 0.0;
    for _ in 0..rounds {
        let xa = stats::multinomial(na, &pooled, &mut rng);
        let xb = stats::multinomial(nb, &pooled, &mut rng);
        acc += 0.5
            * xa.iter()
                .zip(&xb)
                .map(|(&x, &y)| (x as f64 / na as f64 - y as f64 / nb as f64).abs())
                .sum::<f64>();
    }
    acc / rounds as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TteEstimate {
    pub phi: InitialCondition,
    pub t: f64,
    pub l: u64,
    pub samples: u64,
    pub tv: f64,
    pub noise_floor: f64,
}

/// Forward replicas at time `t` against exact samples, compared on `[-l, l]`.
/// The forward process lives on `[-radius, radius]`.
pub fn tte_estimate(
    phi: InitialCondition,
    t: f64,
    l: u64,
    radius: u64,
    samples: u64,
    seed: u64,
    workers: usize,
) -> Result<TteEstimate> {
    if l > 3 {
        return Err(Error::InvalidArgument("window radius for total variation is capped at 3".into()));
    }
    if radius < l {
        return Err(Error::InvalidArgument("forward window must contain the observation window".into()));
    }
    let forward = forward_window_counts(phi, t, l, radius, samples, seed, workers)?;
    let exact = exact_window_counts(l, samples, Variant::Step1Prime, seed, workers)?;
    Ok(TteEstimate {
        phi,
        t,
        l,
        samples,
        tv: stats::total_variation(&forward, &exact),
        noise_floor: tv_noise_floor(&forward, &exact, seed),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantBench {
    pub variant: Variant,
    pub median_ns: f64,
    pub mean_ns: f64,
    pub median_width: f64,
    pub mean_events: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub l: u64,
    pub samples: u64,
    pub step1: VariantBench,
    pub step1prime: VariantBench,
    /// Median time of Step 1 over median time of Step 1'.
    pub speedup: f64,
}

fn bench_one(variant: Variant, l: u64, samples: u64, seed: u64) -> Result<VariantBench> {
    let mut sampler = Sampler::new(variant);
    // warm the buffers
    for i in 0..samples.min(100) {
        sampler.sample(l, &mut RngStream::replica(seed ^ 1, i))?;
    }
    let mut times = Vec::with_capacity(samples as usize);
    let mut widths = Vec::with_capacity(samples as usize);
    let mut events = 0u64;
    for i in 0..samples {
        let mut rng = RngStream::replica(seed, i);
        let start = Instant::now();
        let s = sampler.sample(l, &mut rng)?;
        times.push(start.elapsed().as_nanos() as f64);
        widths.push(s.domain_width as f64);
        events += s.events;
    }
    Ok(VariantBench {
        variant,
        median_ns: stats::median(&times),
        mean_ns: times.iter().sum::<f64>() / samples as f64,
        median_width: stats::median(&widths),
        mean_events: events as f64 / samples as f64,
    })
}

/// Wall time and terminal domain width of both forward-pass variants on the
/// same replica streams.
pub fn bench_variants(l: u64, samples: u64, seed: u64) -> Result<BenchReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let step1 = bench_one(Variant::Step1, l, samples, seed)?;
    let step1prime = bench_one(Variant::Step1Prime, l, samples, seed)?;
    Ok(BenchReport {
        l,
        samples,
        speedup: step1.median_ns / step1prime.median_ns,
        step1,
        step1prime,
    })
}

/// Draws of `r - i` for the first stationary-vacant site `r >= i`.
pub fn r0_offsets(samples: u64, seed: u64, workers: usize) -> Result<Vec<u64>> {
    run_replicas(
        samples,
        workers,
        || (),
        |_, i| -> Result<u64> {
            let mut rng = RngStream::replica(seed, i);
            let mut zeta = sample_bernoulli_config(Window::new(0, 0)?, &mut rng)?;
            Ok(init_right_contour(&mut zeta, 0)? as u64)
        },
    )
    .into_iter()
    .collect()
}

/// Contour-pair runs around site `i` from stationary environments.
pub fn contour_runs(i: SiteIndex, replicas: u64, seed: u64, workers: usize) -> Result<Vec<MeetRecord>> {
    run_replicas(
        replicas,
        workers,
        || (),
        |_, r| -> Result<MeetRecord> {
            let mut rng = RngStream::replica(seed, r);
            let zeta = sample_bernoulli_config(Window::new(i, i)?, &mut rng)?;
            run_until_meet(zeta, i, &mut rng)
        },
    )
    .into_iter()
    .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Y1Report {
    pub samples: u64,
    pub mean: Estimate,
    /// `(k, P[Y1 >= k], 2^(1-k))` for `k = 2..=10`.
    pub tail: Vec<(i64, Estimate, f64)>,
    pub histogram: BTreeMap<i64, u64>,
}

pub fn y1_statistics(samples: u64, seed: u64, workers: usize) -> Result<Y1Report> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two draws".into()));
    }
    let draws = run_replicas(samples, workers, || (), |_, i| sample_y1(&mut RngStream::replica(seed, i)));
    let mut histogram = BTreeMap::new();
    for &y in &draws {
        *histogram.entry(y).or_insert(0u64) += 1;
    }
    let values: Vec<f64> = draws.iter().map(|&y| y as f64).collect();
    let tail = (2..=10)
        .map(|k| {
            let count = draws.iter().filter(|&&y| y >= k).count() as u64;
            (k, stats::proportion(count, samples), 2f64.powi(1 - k as i32))
        })
        .collect();
    Ok(Y1Report {
        samples,
        mean: stats::mean_estimate(&values),
        tail,
        histogram,
    })
}
