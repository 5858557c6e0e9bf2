//! The `avalanche` command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use super::experiments::{self, InitialCondition, Warning};
use super::records::{Format, ResultRecord};
use crate::contour::{init_right_contour, run_until_meet_with_budget, DEFAULT_CONTOUR_BUDGET};
use crate::error::{Error, Result};
use crate::forward::{generate_event_log, run_coupled, Horizon};
use crate::lattice::{sample_bernoulli_config, Config, Window};
use crate::meanfield::{self, MeanFieldVector, StepControl};
use crate::rng::RngStream;
use crate::sampler::{Sampler, Variant, DEFAULT_EVENT_BUDGET};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_STRICT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "avalanche", version, about = "Simulation and exact sampling of the avalanche particle system")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, serde::Serialize)]
struct Global {
    /// Master seed; replica i uses an independent stream derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (standard output if absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for replica fan-out.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Jsonl)]
    format: Format,
    /// Exit with status 3 when the run raised warnings.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Debug, Subcommand, serde::Serialize)]
#[serde(untagged)]
enum Command {
    /// Exact samples of the invariant law on [-l, l].
    Sample(SampleArgs),
    /// Coupled Bernoulli/avalanche run with a per-event dump.
    Forward(ForwardArgs),
    /// Histogram of a contour-pair statistic.
    Contour(ContourArgs),
    /// Histogram of the renewal increment Y1.
    Y1(Y1Args),
    /// Mean-field steady state, optionally with an ODE relaxation run.
    Meanfield(MeanfieldArgs),
    /// Monte-Carlo law of the mass of the particle at the edge (0, 1).
    ClusterStats(ClusterArgs),
    /// Mean-field against Monte-Carlo particle masses.
    Compare(CompareArgs),
    /// Dependence between distant sites under the invariant law.
    Mixing(MixingArgs),
    /// Distance to equilibrium of the forward process.
    Tte(TteArgs),
    /// Timing of the two forward-pass variants.
    Bench(BenchArgs),
}

#[derive(Debug, Args, serde::Serialize)]
struct SampleArgs {
    #[arg(long, default_value_t = 3)]
    l: u64,
    #[arg(long, default_value_t = 1000)]
    samples: u64,
    #[arg(long, default_value = "step1prime")]
    variant: Variant,
    #[arg(long, default_value_t = DEFAULT_EVENT_BUDGET)]
    budget: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
enum EtaStart {
    Vacant,
    Zeta,
}

#[derive(Debug, Args, serde::Serialize)]
struct ForwardArgs {
    /// Window radius; sites outside stay vacant.
    #[arg(long, default_value_t = 10)]
    radius: u64,
    /// Number of marks.
    #[arg(long, conflicts_with = "time")]
    events: Option<u64>,
    /// Continuous time horizon.
    #[arg(long)]
    time: Option<f64>,
    /// Avalanche initial state: empty, or equal to the Bernoulli state.
    #[arg(long, value_enum, default_value_t = EtaStart::Vacant)]
    eta: EtaStart,
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
enum ContourStat {
    RhoEvents,
    RMax,
    LMin,
    R0,
    Fictitious,
}

#[derive(Debug, Args, serde::Serialize)]
struct ContourArgs {
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    i: i64,
    #[arg(long, default_value_t = 10_000)]
    replicas: u64,
    #[arg(long, value_enum, default_value_t = ContourStat::RhoEvents)]
    stat: ContourStat,
    #[arg(long, default_value_t = DEFAULT_CONTOUR_BUDGET)]
    budget: u64,
}

#[derive(Debug, Args, serde::Serialize)]
struct Y1Args {
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
}

#[derive(Debug, Args, serde::Serialize)]
struct MeanfieldArgs {
    /// Truncation order.
    #[arg(long = "K", default_value_t = meanfield::DEFAULT_ORDER)]
    k: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Integrate from the monodisperse state up to this time.
    #[arg(long = "ode-T")]
    ode_t: Option<f64>,
    /// Truncation order of the ODE run.
    #[arg(long = "ode-K", default_value_t = 64)]
    ode_k: usize,
    #[arg(long = "ode-h", default_value_t = 1e-2)]
    ode_h: f64,
}

#[derive(Debug, Args, serde::Serialize)]
struct ClusterArgs {
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value = "step1prime")]
    variant: Variant,
    /// Starting window radius.
    #[arg(long, default_value_t = experiments::ADAPTIVE_START_L)]
    l: u64,
}

#[derive(Debug, Args, serde::Serialize)]
struct CompareArgs {
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long = "K", default_value_t = meanfield::DEFAULT_ORDER)]
    k: usize,
    /// Largest mass listed.
    #[arg(long, default_value_t = 6)]
    k_max: u64,
}

#[derive(Debug, Args, serde::Serialize)]
struct MixingArgs {
    /// First site of the pair.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    k: i64,
    /// Separations, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    n: Vec<u64>,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Average over every pair of an exact sample on [-l, l] instead of the
    /// single pair at k.
    #[arg(long)]
    pooled_l: Option<u64>,
}

#[derive(Debug, Args, serde::Serialize)]
struct TteArgs {
    #[arg(long, value_enum, default_value_t = InitialCondition::AllVacant)]
    phi: InitialCondition,
    /// Times, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    t: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    l: u64,
    /// Radius of the forward window.
    #[arg(long, default_value_t = 50)]
    radius: u64,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
}

#[derive(Debug, Args, serde::Serialize)]
struct BenchArgs {
    #[arg(long, default_value_t = 3)]
    l: u64,
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
}

/// Runs the command line on `argv` (program name first) and returns the
/// process exit status.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr().lock();
    run(argv, &mut stdout, &mut stderr)
}

/// [`cli_main`] with explicit output streams.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let start = Instant::now();
    let mut record = match execute(&cli) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_FAILURE;
        }
    };
    record.wall_time = start.elapsed().as_secs_f64();
    let written = match &cli.global.out {
        Some(path) => std::fs::File::create(path)
            .map_err(Error::from)
            .and_then(|f| {
                let mut w = std::io::BufWriter::new(f);
                record.write(cli.global.format, &mut w)?;
                w.flush().map_err(Error::from)
            }),
        None => record.write(cli.global.format, stdout),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: {e}");
        return EXIT_FAILURE;
    }
    for w in &record.warnings {
        let _ = writeln!(stderr, "warning: {}", serde_json::to_string(w).unwrap_or_default());
    }
    if cli.global.strict && !record.warnings.is_empty() {
        return EXIT_STRICT;
    }
    EXIT_OK
}

fn parameters(cli: &Cli) -> Value {
    json!({
        "global": cli.global,
        "command": cli.command,
    })
}

fn histogram_rows(record: &mut ResultRecord, histogram: &BTreeMap<i64, u64>) {
    let total: u64 = histogram.values().sum();
    for (value, count) in histogram {
        record.push_row(vec![json!(value), json!(count), json!(total)]);
    }
}

fn execute(cli: &Cli) -> Result<ResultRecord> {
    let seed = cli.global.seed;
    let workers = cli.global.workers.max(1);
    let params = parameters(cli);
    match &cli.command {
        Command::Sample(a) => {
            let mut rec = ResultRecord::new("sample", params, seed, &["replica", "config", "T", "domain_width"]);
            let results = experiments::run_replicas(
                a.samples,
                workers,
                || Sampler::new(a.variant).with_budget(a.budget),
                |sampler, i| sampler.sample(a.l, &mut RngStream::replica(seed, i)),
            );
            for (i, r) in results.into_iter().enumerate() {
                match r {
                    Ok(s) => rec.push_row(vec![
                        json!(i),
                        json!(s.config.to_string()),
                        json!(s.events),
                        json!(s.domain_width),
                    ]),
                    Err(Error::BudgetExceeded { budget }) => rec.warnings.push(Warning::BudgetWarning {
                        replica: i as u64,
                        budget,
                    }),
                    Err(e) => return Err(e),
                }
            }
            Ok(rec)
        }
        Command::Forward(a) => {
            let window = Window::centered(a.radius);
            let horizon = match (a.events, a.time) {
                (_, Some(t)) => Horizon::Time(t),
                (Some(n), None) => Horizon::Events(n),
                (None, None) => Horizon::Events(100),
            };
            let mut rng = RngStream::new(seed, 0);
            let lazy = sample_bernoulli_config(window, &mut rng)?;
            let zeta0 = Config::from_states(window.left, lazy.states().collect());
            let eta0 = match a.eta {
                EtaStart::Vacant => Config::vacant(window),
                EtaStart::Zeta => zeta0.clone(),
            };
            let log = generate_event_log(window, horizon, &mut rng)?;
            let traj = run_coupled(&zeta0, &eta0, &log)?;
            let mut rec = ResultRecord::new("forward", params, seed, &["ordinal", "site", "color", "time", "changed_sites"]);
            for step in &traj.steps {
                rec.push_row(vec![
                    json!(step.ordinal),
                    json!(step.site),
                    json!(step.color),
                    json!(step.time),
                    json!(step.changed_sites),
                ]);
            }
            let last = traj.final_state();
            rec.summary = json!({
                "zeta0": zeta0.to_string(),
                "eta0": eta0.to_string(),
                "zeta": last.zeta.to_string(),
                "eta": last.eta.to_string(),
                "events": traj.steps.len(),
            });
            Ok(rec)
        }
        Command::Contour(a) => {
            let mut rec = ResultRecord::new("contour", params, seed, &["value", "count", "total"]);
            let results = experiments::run_replicas(a.replicas, workers, || (), |_, r| -> Result<i64> {
                let mut rng = RngStream::replica(seed, r);
                let mut zeta = sample_bernoulli_config(Window::new(a.i, a.i)?, &mut rng)?;
                if let ContourStat::R0 = a.stat {
                    return Ok(init_right_contour(&mut zeta, a.i)? - a.i);
                }
                let m = run_until_meet_with_budget(zeta, a.i, &mut rng, a.budget)?;
                Ok(match a.stat {
                    ContourStat::RhoEvents => m.rho_events as i64,
                    ContourStat::RMax => m.r_max - a.i,
                    ContourStat::LMin => a.i - m.l_min,
                    ContourStat::Fictitious => m.fictitious as i64,
                    ContourStat::R0 => unreachable!(),
                })
            });
            let mut hist = BTreeMap::new();
            for (r, v) in results.into_iter().enumerate() {
                match v {
                    Ok(v) => *hist.entry(v).or_insert(0u64) += 1,
                    Err(Error::BudgetExceeded { budget }) => rec.warnings.push(Warning::BudgetWarning {
                        replica: r as u64,
                        budget,
                    }),
                    Err(e) => return Err(e),
                }
            }
            histogram_rows(&mut rec, &hist);
            let total: u64 = hist.values().sum();
            let mean = hist.iter().map(|(&v, &c)| v as f64 * c as f64).sum::<f64>() / total.max(1) as f64;
            rec.summary = json!({ "mean": mean, "total": total });
            Ok(rec)
        }
        Command::Y1(a) => {
            let report = experiments::y1_statistics(a.samples, seed, workers)?;
            let mut rec = ResultRecord::new("y1", params, seed, &["value", "count", "total"]);
            histogram_rows(&mut rec, &report.histogram);
            let (lo, hi) = report.mean.interval(3.0);
            rec.summary = json!({
                "mean": report.mean.value,
                "se": report.mean.se,
                "ci3": [lo, hi],
                "analytic_mean_bound": crate::contour::analytic_increment_constants().mean_bound,
                "tail": report.tail.iter().map(|(k, p, b)| json!({"k": k, "p_ge": p.value, "se": p.se, "bound": b})).collect::<Vec<_>>(),
            });
            Ok(rec)
        }
        Command::Meanfield(a) => {
            let s = meanfield::steady_state(a.k, a.tol)?;
            let mut rec = ResultRecord::new("meanfield", params, seed, &["k", "a_k", "c_k"]);
            for k in 1..=a.k {
                rec.push_row(vec![json!(k), json!(s.a[k - 1]), json!(s.c.get(k))]);
            }
            let id = meanfield::series_identities(&s.a, s.g);
            let mut summary = json!({
                "g": s.g,
                "m0": s.m0(),
                "m1": s.m1(),
                "m2": s.m2(),
                "residual": s.residual,
                "identities": id,
            });
            if let Some(t) = a.ode_t {
                let c0 = MeanFieldVector::monodisperse(a.ode_k)?;
                let control = StepControl { h: a.ode_h, ..StepControl::default() };
                let traj = meanfield::integrate(&c0, t, control)?;
                let target = meanfield::steady_state(a.ode_k, a.tol)?;
                summary["ode"] = json!({
                    "K": a.ode_k,
                    "T": t,
                    "max_abs_error": traj.last().max_abs_diff(&target.c),
                    "m1_drift": traj.m1_drift.last(),
                    "leaked": traj.leaked.last(),
                });
            }
            rec.summary = summary;
            Ok(rec)
        }
        Command::ClusterStats(a) => {
            let st = experiments::estimate_cluster_mass_distribution_from(a.samples, seed, a.variant, a.l, workers)?;
            let mut rec = ResultRecord::new("cluster-stats", params, seed, &["k", "count", "c_hat", "se"]);
            for (&k, &count) in &st.histogram.counts {
                let c = st.histogram.c_hat(k);
                rec.push_row(vec![json!(k), json!(count), json!(c.value), json!(c.se)]);
            }
            rec.summary = json!({
                "samples": st.histogram.total,
                "sum_c": st.histogram.sum_c(),
                "sum_k2_c": st.histogram.m2(),
                "sum_k_c": st.histogram.m1(),
                "discards": st.discards,
                "start_l": st.start_l,
                "window_policy": "restart at doubled radius when the edge particle reaches the window",
            });
            rec.warnings = st.warnings;
            Ok(rec)
        }
        Command::Compare(a) => {
            let st = experiments::estimate_cluster_mass_distribution(a.samples, seed, Variant::Step1Prime, workers)?;
            let steady = meanfield::steady_state(a.k, 1e-12)?;
            let cmp = experiments::compare_with_meanfield(&st.histogram, &steady, a.k_max);
            let mut rec = ResultRecord::new(
                "compare",
                params,
                seed,
                &["quantity", "mean_field", "monte_carlo", "se", "z", "distinguishable"],
            );
            for r in &cmp.rows {
                rec.push_row(vec![
                    json!(r.quantity),
                    json!(r.mean_field),
                    json!(r.monte_carlo.value),
                    json!(r.monte_carlo.se),
                    json!(r.z),
                    json!(r.distinguishable),
                ]);
            }
            rec.summary = json!({ "near_equalities": cmp.near_equalities, "discards": st.discards });
            rec.warnings = st.warnings;
            Ok(rec)
        }
        Command::Mixing(a) => {
            let estimates = match a.pooled_l {
                Some(l) => experiments::mixing_profile(&a.n, l, a.samples, seed, workers)?,
                None => a
                    .n
                    .iter()
                    .map(|&n| experiments::mixing_estimate(a.k, n, a.samples, seed, workers))
                    .collect::<Result<Vec<_>>>()?,
            };
            let mut rec = ResultRecord::new(
                "mixing",
                params,
                seed,
                &["k", "n", "samples", "statistic", "ci_low", "ci_high", "covariance", "covariance_se", "noise_floor"],
            );
            for e in &estimates {
                rec.push_row(vec![
                    json!(e.k),
                    json!(e.n),
                    json!(e.samples),
                    json!(e.statistic),
                    json!(e.ci.0),
                    json!(e.ci.1),
                    json!(e.covariance.value),
                    json!(e.covariance.se),
                    json!(e.noise_floor),
                ]);
            }
            Ok(rec)
        }
        Command::Tte(a) => {
            let mut rec = ResultRecord::new("tte", params, seed, &["phi", "t", "l", "samples", "tv", "noise_floor"]);
            for &t in &a.t {
                let e = experiments::tte_estimate(a.phi, t, a.l, a.radius, a.samples, seed, workers)?;
                rec.push_row(vec![
                    json!(e.phi),
                    json!(e.t),
                    json!(e.l),
                    json!(e.samples),
                    json!(e.tv),
                    json!(e.noise_floor),
                ]);
            }
            Ok(rec)
        }
        Command::Bench(a) => {
            let b = experiments::bench_variants(a.l, a.samples, seed)?;
            let mut rec = ResultRecord::new(
                "bench",
                params,
                seed,
                &["variant", "median_ns", "mean_ns", "median_width", "mean_events"],
            );
            for v in [&b.step1, &b.step1prime] {
                rec.push_row(vec![
                    json!(v.variant),
                    json!(v.median_ns),
                    json!(v.mean_ns),
                    json!(v.median_width),
                    json!(v.mean_events),
                ]);
            }
            rec.summary = json!({ "speedup": b.speedup });
            Ok(rec)
        }
    }
}
