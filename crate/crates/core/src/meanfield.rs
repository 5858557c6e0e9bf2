//! The mean-field coagulation-fragmentation model for particle masses.
//!
//! `c_k` is the number of mass-`k` particles per unit length. Neighbouring
//! particles merge at rate 1 per flock falling between them, and a mass-`k`
//! particle shatters into `k` unit particles at rate `k - 1`:
//!
//! ```text
//! c_1' = -2 c_1 + sum_k (k-1) k c_k
//! c_k' = -(k+1) c_k + (1/m_0) sum_{i<k} c_i c_{k-i}        (k >= 2)
//! ```
//!
//! The unique steady state is `c_k = a_k g^(k-1) 2^(-k)` with `a_1 = 1`,
//! `a_k = (1/(k+1)) sum_{j<k} a_j a_{k-j}` and `g` the root of
//! `sum_k a_k (g/2)^k = 1`.
//!
//! Systems are truncated at order `K`; mass coagulating above `K` leaves the
//! system and is accounted for as leakage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ORDER: usize = 10_000;

/// Concentrations `c_1..c_K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldVector {
    c: Vec<f64>,
}

impl MeanFieldVector {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::EmptyTruncation);
        }
        Ok(Self { c })
    }

    /// All mass in unit particles: `c_1 = 1`.
    pub fn monodisperse(order: usize) -> Result<Self> {
        let mut c = vec![0.0; order];
        if let Some(first) = c.first_mut() {
            *first = 1.0;
        }
        Self::new(c)
    }

    pub fn order(&self) -> usize {
        self.c.len()
    }

    /// `c_k` for `1 <= k <= K`.
    pub fn get(&self, k: usize) -> f64 {
        self.c[k - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.c
    }

    /// Copy padded with zeros (or cut) to `order`.
    pub fn resized(&self, order: usize) -> Result<Self> {
        let mut c = self.c.clone();
        c.resize(order, 0.0);
        Self::new(c)
    }

    /// Particles per unit length.
    pub fn m0(&self) -> f64 {
        self.c.iter().sum()
    }

    /// Mass per unit length.
    pub fn m1(&self) -> f64 {
        self.c.iter().enumerate().map(|(i, c)| (i + 1) as f64 * c).sum()
    }

    pub fn m2(&self) -> f64 {
        self.c
            .iter()
            .enumerate()
            .map(|(i, c)| ((i + 1) * (i + 1)) as f64 * c)
            .sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let n = self.order().max(other.order());
        (0..n)
            .map(|i| (self.c.get(i).unwrap_or(&0.0) - other.c.get(i).unwrap_or(&0.0)).abs())
            .fold(0.0, f64::max)
    }
}

/// `a_1..a_K`, exact up to floating-point rounding.
pub fn compute_a(order: usize) -> Result<Vec<f64>> {
    if order == 0 {
        return Err(Error::EmptyTruncation);
    }
    let mut a = vec![0.0; order];
    a[0] = 1.0;
    for k in 2..=order {
        // symmetric convolution: pair j with k - j once
        let mut s = 0.0;
        for j in 1..=(k - 1) / 2 {
            s += a[j - 1] * a[k - j - 1];
        }
        s *= 2.0;
        if k % 2 == 0 {
            let h = a[k / 2 - 1];
            s += h * h;
        }
        a[k - 1] = s / (k + 1) as f64;
    }
    Ok(a)
}

/// `sum_k coeffs[k-1] z^k`.
pub fn power_series(coeffs: &[f64], z: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &a| (acc + a) * z)
}

/// Root `g` of `sum_k a_k (g/2)^k = 1` for the given coefficients, by
/// bisection on `z = g/2` in `(0, 1)`. Returns `g` and the residual.
pub fn solve_g_from(a: &[f64], tol: f64) -> Result<(f64, f64)> {
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let f = |z: f64| power_series(a, z) - 1.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    if f(hi) <= 0.0 {
        return Err(Error::BracketFailure);
    }
    let mut mid = 0.5;
    let mut val = f(mid);
    for _ in 0..200 {
        if val.abs() <= tol {
            break;
        }
        if val < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        let next = 0.5 * (lo + hi);
        if next == mid {
            break;
        }
        mid = next;
        val = f(mid);
    }
    if val.abs() > tol {
        return Err(Error::BracketFailure);
    }
    Ok((2.0 * mid, val.abs()))
}

pub fn solve_g(order: usize, tol: f64) -> Result<f64> {
    Ok(solve_g_from(&compute_a(order)?, tol)?.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateSolution {
    pub a: Vec<f64>,
    pub g: f64,
    pub c: MeanFieldVector,
    /// `|sum_k a_k (g/2)^k - 1|`
    pub residual: f64,
}

impl SteadyStateSolution {
    pub fn m0(&self) -> f64 {
        self.c.m0()
    }

    pub fn m1(&self) -> f64 {
        self.c.m1()
    }

    pub fn m2(&self) -> f64 {
        self.c.m2()
    }
}

pub fn steady_state(order: usize, tol: f64) -> Result<SteadyStateSolution> {
    let a = compute_a(order)?;
    let (g, residual) = solve_g_from(&a, tol)?;
    let q = g / 2.0;
    // c_k = a_k q^k / g, built incrementally to avoid powi overflow
    let mut qk = 1.0;
    let c = a
        .iter()
        .map(|&ak| {
            qk *= q;
            ak * qk / g
        })
        .collect();
    Ok(SteadyStateSolution {
        a,
        g,
        c: MeanFieldVector::new(c)?,
        residual,
    })
}

/// The two evaluations of `S = sum_{k>=2} (k+1) a_k q^k` used to pin down
/// the steady state: `S = (sum a_k q^k)^2 = 1` and `S = g' + 1 - 2q` with
/// `g' = sum_k k a_k q^k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesIdentities {
    pub q: f64,
    pub s: f64,
    /// `sum_k k a_k q^k`
    pub g_moment: f64,
    /// `|S - 1|`
    pub gap_square: f64,
    /// `|S - (g + 1 - 2q)|` with the solved `g`
    pub gap_linear: f64,
}

pub fn series_identities(a: &[f64], g: f64) -> SeriesIdentities {
    let q = g / 2.0;
    let mut qk = 1.0;
    let (mut s, mut g_moment) = (0.0, 0.0);
    for (i, &ak) in a.iter().enumerate() {
        let k = (i + 1) as f64;
        qk *= q;
        if i >= 1 {
            s += (k + 1.0) * ak * qk;
        }
        g_moment += k * ak * qk;
    }
    SeriesIdentities {
        q,
        s,
        g_moment,
        gap_square: (s - 1.0).abs(),
        gap_linear: (s - (g + 1.0 - 2.0 * q)).abs(),
    }
}

/// Right-hand side of the truncated system, together with the rate at which
/// mass coagulates past the truncation order.
fn rhs_with_leak(c: &[f64]) -> Result<(Vec<f64>, f64)> {
    let order = c.len();
    let m0: f64 = c.iter().sum();
    if m0 <= 0.0 || !m0.is_finite() {
        return Err(Error::DegenerateState { m0 });
    }
    let mut out = vec![0.0; order];
    let mut frag = 0.0;
    for (i, &ci) in c.iter().enumerate() {
        let k = (i + 1) as f64;
        out[i] = -(k + 1.0) * ci;
        frag += (k - 1.0) * k * ci;
    }
    out[0] = -2.0 * c[0] + frag;
    let mut leak = 0.0;
    for i in 1..=order {
        let ci = c[i - 1];
        if ci == 0.0 {
            continue;
        }
        for j in 1..=order {
            let prod = ci * c[j - 1];
            if i + j <= order {
                out[i + j - 1] += prod / m0;
            } else {
                leak += (i + j) as f64 * prod / m0;
            }
        }
    }
    Ok((out, leak))
}

/// Right-hand side of the system truncated at the order of `c`.
pub fn ode_rhs(c: &MeanFieldVector) -> Result<Vec<f64>> {
    Ok(rhs_with_leak(&c.c)?.0)
}

/// Rate at which mass leaves the truncated system: the mass derivative the
/// same state would send above `K` in a system of order `2K`.
pub fn leakage_rate(c: &MeanFieldVector) -> Result<f64> {
    let order = c.order();
    let wide = ode_rhs(&c.resized(2 * order)?)?;
    Ok(wide
        .iter()
        .enumerate()
        .skip(order)
        .map(|(i, r)| (i + 1) as f64 * r)
        .sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub h: f64,
    /// How many times a step may be halved after producing a negative entry.
    pub max_halvings: u32,
    /// Record every this many steps (the final state is always recorded).
    pub record_every: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            h: 1e-2,
            max_halvings: 12,
            record_every: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<MeanFieldVector>,
    /// `m_1(t) - m_1(0)` at each recorded time.
    pub m1_drift: Vec<f64>,
    /// Mass leaked past the truncation order up to each recorded time.
    pub leaked: Vec<f64>,
}

impl Trajectory {
    pub fn last(&self) -> &MeanFieldVector {
        self.states.last().expect("trajectory holds the initial state")
    }
}

const NEGATIVITY_FLOOR: f64 = -1e-12;

/// Classical fourth-order Runge-Kutta on `[0, t_end]` at the order of `c0`.
///
/// The leaked mass is integrated as an extra component of the same system, so
/// `m_1 + leaked` is conserved by the scheme up to rounding.
pub fn integrate(c0: &MeanFieldVector, t_end: f64, control: StepControl) -> Result<Trajectory> {
    if t_end.is_nan() || t_end < 0.0 || control.h.is_nan() || control.h <= 0.0 {
        return Err(Error::InvalidArgument("need t_end >= 0 and h > 0".into()));
    }
    let m1_0 = c0.m1();
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![c0.clone()],
        m1_drift: vec![0.0],
        leaked: vec![0.0],
    };
    let mut state = c0.c.clone();
    state.push(0.0);
    let mut t = 0.0;
    let mut steps = 0usize;
    while t < t_end {
        let h = control.h.min(t_end - t);
        state = advance(&state, h, control.max_halvings)?;
        steps += 1;
        t = (steps as f64 * control.h).min(t_end);
        if steps.is_multiple_of(control.record_every.max(1)) || t >= t_end {
            let c = MeanFieldVector::new(state[..state.len() - 1].to_vec())?;
            traj.m1_drift.push(c.m1() - m1_0);
            traj.leaked.push(state[state.len() - 1]);
            traj.states.push(c);
            traj.times.push(t);
        }
    }
    Ok(traj)
}

fn augmented_rhs(y: &[f64]) -> Result<Vec<f64>> {
    let (mut d, leak) = rhs_with_leak(&y[..y.len() - 1])?;
    d.push(leak);
    Ok(d)
}

fn rk4_step(y: &[f64], h: f64) -> Result<Vec<f64>> {
    let axpy = |a: f64, x: &[f64]| -> Vec<f64> { y.iter().zip(x).map(|(yi, xi)| yi + a * xi).collect() };
    let k1 = augmented_rhs(y)?;
    let k2 = augmented_rhs(&axpy(h / 2.0, &k1))?;
    let k3 = augmented_rhs(&axpy(h / 2.0, &k2))?;
    let k4 = augmented_rhs(&axpy(h, &k3))?;
    Ok((0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

fn advance(y: &[f64], h: f64, halvings_left: u32) -> Result<Vec<f64>> {
    let next = rk4_step(y, h)?;
    let worst = next[..next.len() - 1]
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, &v)| (i + 1, v))
        .expect("nonempty state");
    if worst.1 >= NEGATIVITY_FLOOR {
        return Ok(next);
    }
    if halvings_left == 0 {
        return Err(Error::NegativityBreach {
            k: worst.0,
            value: worst.1,
        });
    }
    let mid = advance(y, h / 2.0, halvings_left - 1)?;
    advance(&mid, h / 2.0, halvings_left - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_coefficients() {
        let a = compute_a(4).unwrap();
        assert_eq!(a[0], 1.0);
        assert!((a[1] - 1.0 / 3.0).abs() < 1e-16);
        assert!((a[2] - 1.0 / 6.0).abs() < 1e-16);
        // a_4 = (2 a_1 a_3 + a_2^2) / 5
        assert!((a[3] - (2.0 / 6.0 + 1.0 / 9.0) / 5.0).abs() < 1e-16);
        assert_eq!(compute_a(0), Err(Error::EmptyTruncation));
    }

    #[test]
    fn coefficients_bounded_by_one() {
        assert!(compute_a(600).unwrap().iter().all(|&a| a > 0.0 && a <= 1.0));
        assert!(compute_a(5000).unwrap().iter().all(|&a| (0.0..=1.0).contains(&a)));
    }

    #[test]
    fn bracket_failure_for_order_one() {
        assert_eq!(solve_g(1, 1e-10), Err(Error::BracketFailure));
    }

    #[test]
    fn series_strictly_increasing() {
        let a = compute_a(500).unwrap();
        let mut prev = power_series(&a, 0.0);
        for i in 1..=100 {
            let v = power_series(&a, i as f64 / 100.0);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn monodisperse_rhs() {
        let c = MeanFieldVector::monodisperse(3).unwrap();
        let d = ode_rhs(&c).unwrap();
        assert_eq!(d, vec![-2.0, 1.0, 0.0]);
    }

    #[test]
    fn degenerate_state_rejected() {
        let c = MeanFieldVector::new(vec![0.0, 0.0]).unwrap();
        assert!(matches!(ode_rhs(&c), Err(Error::DegenerateState { .. })));
    }

    #[test]
    fn zero_horizon_returns_initial() {
        let c = MeanFieldVector::monodisperse(8).unwrap();
        let tr = integrate(&c, 0.0, StepControl::default()).unwrap();
        assert_eq!(tr.states.len(), 1);
        assert_eq!(tr.last(), &c);
    }
}
