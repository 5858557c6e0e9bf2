//! Estimators and goodness-of-fit tests used by the experiments.

use std::collections::BTreeMap;

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// A point estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn new(value: f64, se: f64) -> Self {
        Self { value, se }
    }

    /// Standardized distance to `target`; infinite if the error is zero and
    /// the values differ.
    pub fn z(&self, target: f64) -> f64 {
        let d = self.value - target;
        if d == 0.0 {
            0.0
        } else {
            d / self.se
        }
    }

    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        (self.value - target).abs() <= sigmas * self.se
    }

    pub fn interval(&self, sigmas: f64) -> (f64, f64) {
        (self.value - sigmas * self.se, self.value + sigmas * self.se)
    }
}

/// Sample mean with the standard error of the mean.
pub fn mean_estimate(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    if values.is_empty() {
        return Estimate::new(f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Estimate::new(mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate::new(mean, (var / n).sqrt())
}

/// Proportion `count / total` with the binomial standard error.
pub fn proportion(count: u64, total: u64) -> Estimate {
    let n = total as f64;
    let p = count as f64 / n;
    Estimate::new(p, (p * (1.0 - p) / n).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn chi_square_p(statistic: f64, dof: usize) -> Result<f64> {
    if dof == 0 {
        return Err(Error::InvalidArgument("chi-square test needs at least two cells".into()));
    }
    let law = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(law.sf(statistic))
}

/// Groups consecutive cells until each group reaches `min` by `weight`; a
/// short remainder joins the last group.
fn pool_cells(weights: &[f64], min: f64) -> Vec<std::ops::Range<usize>> {
    let mut groups = Vec::new();
    let mut start = 0;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if acc >= min {
            groups.push(start..i + 1);
            start = i + 1;
            acc = 0.0;
        }
    }
    if start < weights.len() {
        match groups.last_mut() {
            Some(last) => last.end = weights.len(),
            None => groups.push(0..weights.len()),
        }
    }
    groups
}

/// Pearson goodness of fit of `observed` against cell probabilities `probs`
/// (which must sum to one). Cells are pooled so that every expected count is
/// at least 5.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<ChiSquare> {
    if observed.len() != probs.len() {
        return Err(Error::InvalidArgument("observed and expected cells differ in number".into()));
    }
    let total_p: f64 = probs.iter().sum();
    if (total_p - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("cell probabilities sum to {total_p}")));
    }
    let n: u64 = observed.iter().sum();
    let expected: Vec<f64> = probs.iter().map(|p| p * n as f64).collect();
    let groups = pool_cells(&expected, 5.0);
    let mut statistic = 0.0;
    for g in &groups {
        let o: u64 = observed[g.clone()].iter().sum();
        let e: f64 = expected[g.clone()].iter().sum();
        statistic += (o as f64 - e).powi(2) / e;
    }
    let dof = groups.len().saturating_sub(1);
    Ok(ChiSquare {
        statistic,
        dof,
        p_value: chi_square_p(statistic, dof)?,
    })
}

/// Pearson test that two count vectors over the same cells come from one law.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> Result<ChiSquare> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument("count vectors differ in length".into()));
    }
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let n = (na + nb) as f64;
    // the smaller expected count of a cell is min(na, nb) * pooled / n
    let small = na.min(nb) as f64 / n;
    let weights: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x + y) as f64 * small).collect();
    let groups = pool_cells(&weights, 5.0);
    let mut statistic = 0.0;
    for g in &groups {
        let oa: u64 = a[g.clone()].iter().sum();
        let ob: u64 = b[g.clone()].iter().sum();
        let pooled = (oa + ob) as f64;
        let ea = pooled * na as f64 / n;
        let eb = pooled * nb as f64 / n;
        statistic += (oa as f64 - ea).powi(2) / ea + (ob as f64 - eb).powi(2) / eb;
    }
    let dof = groups.len().saturating_sub(1);
    Ok(ChiSquare {
        statistic,
        dof,
        p_value: chi_square_p(statistic, dof)?,
    })
}

/// Aligns two keyed histograms onto a common cell order.
pub fn align_counts<K: Ord + Clone>(a: &BTreeMap<K, u64>, b: &BTreeMap<K, u64>) -> (Vec<u64>, Vec<u64>) {
    let mut keys: Vec<&K> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.iter()
        .map(|k| (*a.get(*k).unwrap_or(&0), *b.get(*k).unwrap_or(&0)))
        .unzip()
}

/// Total variation distance `1/2 sum |p_a - p_b|` between two empirical laws.
pub fn total_variation<K: Ord + Clone>(a: &BTreeMap<K, u64>, b: &BTreeMap<K, u64>) -> f64 {
    let (ca, cb) = align_counts(a, b);
    let na: u64 = ca.iter().sum();
    let nb: u64 = cb.iter().sum();
    0.5 * ca
        .iter()
        .zip(&cb)
        .map(|(&x, &y)| (x as f64 / na as f64 - y as f64 / nb as f64).abs())
        .sum::<f64>()
}

/// Multinomial draw of `n` items over cell probabilities `probs`.
pub fn multinomial(n: u64, probs: &[f64], rng: &mut RngStream) -> Vec<u64> {
    let mut out = vec![0; probs.len()];
    let mut left = n;
    let mut mass = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == probs.len() || mass <= 0.0 {
            out[i] = left;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = Binomial::new(left, q).expect("probability in [0, 1]").sample(rng);
        out[i] = k;
        left -= k;
        mass -= p;
    }
    out
}

/// Kolmogorov-Smirnov statistic of `samples` against `cdf`, with the
/// asymptotic p-value.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sn = n.sqrt();
    (d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d))
}

/// `P[K > x]` for the Kolmogorov distribution.
fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Straight-line description of a log-survival curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailLine {
    /// Least-squares slope of `ln P[X > x]` over the tail half of the range.
    pub slope: f64,
    pub slope_se: f64,
    /// Smallest intercept for which `ln P[X > x] <= intercept + slope * x`
    /// at every reliable point.
    pub intercept: f64,
    /// Points `(x, ln P[X > x])` with at least `min_tail` observations beyond.
    pub points: Vec<(f64, f64)>,
}

impl TailLine {
    /// The line has negative slope, three standard errors clear of zero.
    pub fn decays(&self) -> bool {
        self.slope + 3.0 * self.slope_se < 0.0
    }
}

/// Fits an upper bounding line to the empirical log-survival function,
/// keeping only points with at least `min_tail` observations beyond them.
/// Returns `None` if fewer than four such points exist.
pub fn log_survival_line(values: &[f64], min_tail: usize) -> Option<TailLine> {
    let mut xs = values.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let mut points = Vec::new();
    let mut i = 0;
    while i < n {
        let x = xs[i];
        let mut j = i;
        while j < n && xs[j] == x {
            j += 1;
        }
        let beyond = n - j;
        if beyond < min_tail {
            break;
        }
        points.push((x, (beyond as f64 / n as f64).ln()));
        i = j;
    }
    // continuous data produce one point per observation; thin to at most 200
    if points.len() > 200 {
        let step = points.len() as f64 / 200.0;
        points = (0..200).map(|k| points[(k as f64 * step) as usize]).collect();
    }
    if points.len() < 4 {
        return None;
    }
    let tail = &points[points.len() / 2..];
    let m = tail.len() as f64;
    let mx = tail.iter().map(|p| p.0).sum::<f64>() / m;
    let my = tail.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let resid: f64 = tail.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    let slope_se = if m > 2.0 { (resid / (m - 2.0) / sxx).sqrt() } else { f64::INFINITY };
    let intercept = points
        .iter()
        .map(|p| p.1 - slope * p.0)
        .fold(f64::NEG_INFINITY, f64::max);
    Some(TailLine {
        slope,
        slope_se,
        intercept,
        points,
    })
}

/// `q`-quantile of `values` (nearest rank).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut xs = values.to_vec();
    xs.sort_by(f64::total_cmp);
    if xs.is_empty() {
        return f64::NAN;
    }
    let idx = ((q * xs.len() as f64).ceil() as usize).clamp(1, xs.len()) - 1;
    xs[idx]
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gof_accepts_exact_counts() {
        let t = chi_square_gof(&[500, 250, 250], &[0.5, 0.25, 0.25]).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.dof, 2);
        assert!((t.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gof_pools_small_cells() {
        // expected counts 90, 6, 2, 2: the short remainder joins the 6
        let t = chi_square_gof(&[90, 6, 2, 2], &[0.9, 0.06, 0.02, 0.02]).unwrap();
        assert_eq!(t.dof, 1);
        assert!(t.statistic.abs() < 1e-12);
    }

    #[test]
    fn homogeneity_statistic() {
        // 2x2 table [[30, 70], [50, 50]]: expected 40/60 in both rows
        let t = chi_square_homogeneity(&[30, 70], &[50, 50]).unwrap();
        let expected = 2.0 * (100.0 / 40.0 + 100.0 / 60.0);
        assert!((t.statistic - expected).abs() < 1e-12);
        assert_eq!(t.dof, 1);
    }

    #[test]
    fn kolmogorov_tail_values() {
        assert!((kolmogorov_sf(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_sf(1.63) - 0.0098).abs() < 1e-3);
    }

    #[test]
    fn multinomial_preserves_total() {
        let mut rng = RngStream::new(3, 0);
        let c = multinomial(1000, &[0.1, 0.2, 0.3, 0.4], &mut rng);
        assert_eq!(c.iter().sum::<u64>(), 1000);
    }

    #[test]
    fn geometric_tail_decays() {
        let mut rng = RngStream::new(5, 0);
        let xs: Vec<f64> = (0..20_000)
            .map(|_| crate::lattice::sample_geometric_half(&mut rng) as f64)
            .collect();
        let line = log_survival_line(&xs, 30).unwrap();
        assert!(line.decays());
        assert!((line.slope + std::f64::consts::LN_2).abs() < 0.15);
        assert!(line.points.iter().all(|p| p.1 <= line.intercept + line.slope * p.0 + 1e-12));
    }

    #[test]
    fn total_variation_of_disjoint_laws() {
        let a = BTreeMap::from([(0u8, 10u64)]);
        let b = BTreeMap::from([(1u8, 5u64)]);
        assert_eq!(total_variation(&a, &b), 1.0);
    }
}
