//! Exact samples of the invariant law restricted to `[-l, l]` by coupling
//! from the past.
//!
//! The forward pass tracks a Bernoulli configuration with three values per
//! site: `0` vacant, `1` occupied outside the box, `2` occupied inside the box
//! bounded by the contour processes. Marks fall on a uniform site of the
//! current domain with a fair color until the box closes (no `2` left). The
//! avalanche configuration at time 0 is then rebuilt by walking the marks
//! backward from an all-vacant configuration.
//!
//! Two rule sets are provided: [`Variant::Step1`] tracks the whole box between
//! the contours; [`Variant::Step1Prime`] keeps only the sites that can still
//! influence the output and usually touches far fewer sites.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::Color;
use crate::lattice::{sample_geometric_half, Config, SiteIndex, SiteState, Window};
use crate::rng::RngStream;

pub const DEFAULT_EVENT_BUDGET: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Step1,
    Step1Prime,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Step1 => "step1",
            Variant::Step1Prime => "step1prime",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "step1" => Ok(Variant::Step1),
            "step1prime" | "step1'" => Ok(Variant::Step1Prime),
            other => Err(Error::InvalidArgument(format!("unknown variant `{other}`"))),
        }
    }
}

/// The sampler's `{0, 1, 2}` array on the domain `[left, right]`.
///
/// The number of `2`s is kept up to date, together with lazy bounds on the
/// extreme positions of the `2`s: no `2` lies left of `lo2` or right of `hi2`.
#[derive(Clone, Debug)]
pub struct BoxState {
    left: SiteIndex,
    values: VecDeque<u8>,
    twos: usize,
    lo2: SiteIndex,
    hi2: SiteIndex,
}

impl PartialEq for BoxState {
    fn eq(&self, other: &Self) -> bool {
        self.left == other.left && self.values == other.values
    }
}

impl Eq for BoxState {}

impl BoxState {
    pub fn from_values(left: SiteIndex, values: Vec<u8>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyWindow {
                left,
                right: left - 1,
            });
        }
        if let Some(v) = values.iter().find(|&&v| v > 2) {
            return Err(Error::InvalidArgument(format!("box value {v} outside {{0,1,2}}")));
        }
        let twos = values.iter().filter(|&&v| v == 2).count();
        let right = left + values.len() as i64 - 1;
        Ok(Self {
            left,
            values: values.into(),
            twos,
            lo2: left,
            hi2: right,
        })
    }

    pub fn left(&self) -> SiteIndex {
        self.left
    }

    pub fn right(&self) -> SiteIndex {
        self.left + self.values.len() as i64 - 1
    }

    pub fn window(&self) -> Window {
        Window {
            left: self.left(),
            right: self.right(),
        }
    }

    pub fn width(&self) -> u64 {
        self.values.len() as u64
    }

    /// Value at `site`; `None` outside the domain.
    pub fn get(&self, site: SiteIndex) -> Option<u8> {
        if site < self.left {
            return None;
        }
        self.values.get((site - self.left) as usize).copied()
    }

    #[inline]
    fn at(&self, site: SiteIndex) -> u8 {
        self.values[(site - self.left) as usize]
    }

    /// Value with sites outside the domain read as vacant.
    #[inline]
    fn at_or_zero(&self, site: SiteIndex) -> u8 {
        self.get(site).unwrap_or(0)
    }

    pub fn values(&self) -> impl Iterator<Item = u8> + '_ {
        self.values.iter().copied()
    }

    pub fn twos(&self) -> usize {
        self.twos
    }

    /// The underlying Bernoulli configuration (values `1` and `2` occupied).
    pub fn bernoulli(&self) -> Config {
        Config::from_states(
            self.left,
            self.values.iter().map(|&v| SiteState::from_bool(v >= 1)).collect(),
        )
    }

    fn set(&mut self, site: SiteIndex, value: u8, journal: &mut Vec<Delta>) {
        let slot = &mut self.values[(site - self.left) as usize];
        let old = *slot;
        if old == value {
            return;
        }
        *slot = value;
        journal.push(Delta {
            site,
            old,
            new: value,
        });
        if old == 2 {
            self.twos -= 1;
        }
        if value == 2 {
            self.twos += 1;
            self.lo2 = self.lo2.min(site);
            self.hi2 = self.hi2.max(site);
        }
    }

    /// Leftmost `2`, if any.
    fn min_two(&mut self) -> Option<SiteIndex> {
        if self.twos == 0 {
            return None;
        }
        self.lo2 = self.lo2.max(self.left);
        while self.at(self.lo2) != 2 {
            self.lo2 += 1;
        }
        Some(self.lo2)
    }

    /// Rightmost `2`, if any.
    fn max_two(&mut self) -> Option<SiteIndex> {
        if self.twos == 0 {
            return None;
        }
        self.hi2 = self.hi2.min(self.right());
        while self.at(self.hi2) != 2 {
            self.hi2 -= 1;
        }
        Some(self.hi2)
    }

    fn push_right(&mut self, value: u8) {
        self.values.push_back(value);
        if value == 2 {
            self.twos += 1;
            self.hi2 = self.right();
        }
    }

    fn push_left(&mut self, value: u8) {
        self.values.push_front(value);
        self.left -= 1;
        if value == 2 {
            self.twos += 1;
            self.lo2 = self.left;
        }
    }

    fn truncate_to(&mut self, window: Window) {
        while self.left < window.left {
            if self.values.pop_front() == Some(2) {
                self.twos -= 1;
            }
            self.left += 1;
        }
        while self.right() > window.right {
            if self.values.pop_back() == Some(2) {
                self.twos -= 1;
            }
        }
    }
}

impl std::fmt::Display for BoxState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{},{}]:", self.left(), self.right())?;
        for v in &self.values {
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// A value change at one site of the box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delta {
    pub site: SiteIndex,
    pub old: u8,
    pub new: u8,
}

/// One mark of the forward pass with the domain it fell in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub site: SiteIndex,
    pub color: Color,
    /// Domain before the mark.
    pub domain: Window,
    deltas: (usize, usize),
}

/// The forward pass: final box plus per-event reversible deltas.
#[derive(Clone, Debug, Default)]
pub struct SamplerTrace {
    events: Vec<TraceEvent>,
    deltas: Vec<Delta>,
    terminal: Option<BoxState>,
}

impl SamplerTrace {
    /// Empty trace starting from `initial`.
    pub fn new(initial: BoxState) -> Self {
        Self {
            events: Vec::new(),
            deltas: Vec::new(),
            terminal: Some(initial),
        }
    }

    fn reset(&mut self, initial: BoxState) {
        self.events.clear();
        self.deltas.clear();
        self.terminal = Some(initial);
    }

    /// Number of marks, the terminal index `T`.
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn deltas_of(&self, event: &TraceEvent) -> &[Delta] {
        &self.deltas[event.deltas.0..event.deltas.1]
    }

    /// Box after the last mark.
    pub fn terminal(&self) -> &BoxState {
        self.terminal.as_ref().expect("trace has a box")
    }

    /// Appends a hand-written mark that sets the listed values without
    /// changing the domain. Meant for worked examples.
    pub fn push_manual(&mut self, site: SiteIndex, color: Color, changes: &[(SiteIndex, u8)]) -> Result<()> {
        let state = self.terminal.as_mut().expect("trace has a box");
        let domain = state.window();
        for &(k, _) in changes.iter().chain(std::iter::once(&(site, 0))) {
            if !domain.contains(k) {
                return Err(Error::OutOfDomain {
                    site: k,
                    left: domain.left,
                    right: domain.right,
                });
            }
        }
        let start = self.deltas.len();
        for &(k, v) in changes {
            state.set(k, v, &mut self.deltas);
        }
        self.events.push(TraceEvent {
            site,
            color,
            domain,
            deltas: (start, self.deltas.len()),
        });
        Ok(())
    }

    /// Every box state `0..=T`, rebuilt from the deltas.
    pub fn states(&self) -> Vec<BoxState> {
        let mut cur = self.terminal().clone();
        let mut out = vec![cur.clone()];
        for ev in self.events.iter().rev() {
            undo(&mut cur, ev, self.deltas_of(ev));
            out.push(cur.clone());
        }
        out.reverse();
        out
    }
}

fn undo(state: &mut BoxState, ev: &TraceEvent, deltas: &[Delta]) {
    state.truncate_to(ev.domain);
    let mut sink = Vec::new();
    for d in deltas.iter().rev() {
        if ev.domain.contains(d.site) {
            state.set(d.site, d.old, &mut sink);
            sink.clear();
        }
    }
}

/// Outcome of the initialization step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step0 {
    /// `[-l, l]` drew all vacant; the output is all vacant and no mark is needed.
    FinishedAllVacant { domain: Window },
    Box(BoxState),
}

/// Draws the initial Bernoulli configuration on `[l0, r0]`, where `l0` and
/// `r0` are the first vacant sites beyond `-l` and `l`.
pub fn step0_init(l: u64, rng: &mut RngStream) -> Step0 {
    let l = l as i64;
    let inner: Vec<bool> = (0..2 * l + 1).map(|_| rng.coin()).collect();
    let left_over = sample_geometric_half(rng) as i64;
    let right_over = sample_geometric_half(rng) as i64;
    let domain = Window {
        left: -l - left_over,
        right: l + right_over,
    };
    if inner.iter().all(|&b| !b) {
        return Step0::FinishedAllVacant { domain };
    }
    let mut values = Vec::with_capacity(domain.width());
    values.push(0);
    values.extend(std::iter::repeat_n(2, (left_over - 1) as usize));
    values.extend(inner.iter().map(|&b| if b { 2 } else { 0 }));
    values.extend(std::iter::repeat_n(2, (right_over - 1) as usize));
    values.push(0);
    Step0::Box(BoxState::from_values(domain.left, values).expect("nonempty"))
}

fn check_domain(state: &BoxState, site: SiteIndex) -> Result<()> {
    if site < state.left() || site > state.right() {
        return Err(Error::OutOfDomain {
            site,
            left: state.left(),
            right: state.right(),
        });
    }
    Ok(())
}

/// One mark of the full-box rules, including the boundary extension.
pub fn step1_apply_event(state: &mut BoxState, site: SiteIndex, color: Color, rng: &mut RngStream) -> Result<()> {
    check_domain(state, site)?;
    apply_step1(state, site, color, rng, &mut Vec::new());
    Ok(())
}

/// One mark of the reduced rules, including the boundary extension.
pub fn step1prime_apply_event(
    state: &mut BoxState,
    site: SiteIndex,
    color: Color,
    rng: &mut RngStream,
) -> Result<()> {
    check_domain(state, site)?;
    apply_step1prime(state, site, color, rng, &mut Vec::new());
    Ok(())
}

fn apply_step1(state: &mut BoxState, i: SiteIndex, color: Color, rng: &mut RngStream, journal: &mut Vec<Delta>) {
    let right_edge = state.right();
    let left_edge = state.left();
    let v = state.at(i);
    match (color, v) {
        (Color::Black, 1 | 2) => state.set(i, 0, journal),
        (Color::Grey, 2) => {
            let isolated = state.at_or_zero(i - 1) == 0 && state.at_or_zero(i + 1) == 0;
            if isolated && (state.min_two() == Some(i) || state.max_two() == Some(i)) {
                state.set(i, 1, journal);
            }
        }
        (Color::Black, _) if v == 0 => {
            let mut lo = i;
            while lo > left_edge && state.at(lo - 1) >= 1 {
                lo -= 1;
            }
            let mut hi = i;
            while hi < right_edge && state.at(hi + 1) >= 1 {
                hi += 1;
            }
            let clear_right = state.max_two().is_none_or(|m| m < lo);
            let clear_left = state.min_two().is_none_or(|m| m > hi);
            if clear_right || clear_left {
                state.set(i, 1, journal);
            } else {
                for k in lo..=hi {
                    state.set(k, 2, journal);
                }
            }
        }
        _ => {}
    }
    if state.at(right_edge) == 2 {
        let s = sample_geometric_half(rng);
        for _ in 1..s {
            state.push_right(2);
        }
        state.push_right(0);
    }
    if state.at(left_edge) == 2 {
        let s = sample_geometric_half(rng);
        for _ in 1..s {
            state.push_left(2);
        }
        state.push_left(0);
    }
}

fn apply_step1prime(state: &mut BoxState, i: SiteIndex, color: Color, rng: &mut RngStream, journal: &mut Vec<Delta>) {
    let right_edge = state.right();
    let left_edge = state.left();
    let v = state.at(i);
    match (color, v) {
        (Color::Black, 1 | 2) => state.set(i, 0, journal),
        (Color::Grey, 2) => {
            if state.at_or_zero(i - 1) <= 1 || state.at_or_zero(i + 1) <= 1 {
                state.set(i, 1, journal);
            }
        }
        (Color::Black, _) if v == 0 => {
            let mut hi = None;
            let mut k = i + 1;
            while k <= right_edge && state.at(k) >= 1 {
                if state.at(k) == 2 {
                    hi = Some(k);
                }
                k += 1;
            }
            let mut lo = None;
            let mut k = i - 1;
            while k >= left_edge && state.at(k) >= 1 {
                if state.at(k) == 2 {
                    lo = Some(k);
                }
                k -= 1;
            }
            if lo.is_none() && hi.is_none() {
                state.set(i, 1, journal);
            } else {
                for k in lo.unwrap_or(i)..=hi.unwrap_or(i) {
                    state.set(k, 2, journal);
                }
            }
        }
        _ => {}
    }
    if two_reaches(state, left_edge, 1) {
        let s = sample_geometric_half(rng);
        for _ in 1..s {
            state.push_left(1);
        }
        state.push_left(0);
    }
    if two_reaches(state, right_edge, -1) {
        let s = sample_geometric_half(rng);
        for _ in 1..s {
            state.push_right(1);
        }
        state.push_right(0);
    }
}

/// Whether a `2` is joined to the domain edge `from` through occupied sites.
fn two_reaches(state: &BoxState, from: SiteIndex, step: i64) -> bool {
    let mut k = from;
    while state.get(k).is_some_and(|v| v >= 1) {
        if state.at(k) == 2 {
            return true;
        }
        k += step;
    }
    false
}

/// Rebuilds the avalanche configuration at time 0 on `[l0, r0]` by walking
/// the marks backward from an all-vacant configuration at the terminal index.
pub fn step2_reconstruct(trace: &SamplerTrace) -> Result<Config> {
    let mut eta = Vec::new();
    let (left, eta) = reconstruct_into(trace, &mut eta)?;
    Ok(Config::from_states(
        left,
        eta.iter().map(|&b| SiteState::from_bool(b)).collect(),
    ))
}

fn reconstruct_into<'a>(trace: &SamplerTrace, eta: &'a mut Vec<bool>) -> Result<(SiteIndex, &'a [bool])> {
    let terminal = trace.terminal();
    if terminal.twos() > 0 {
        return Err(Error::IncompleteTrace {
            remaining: terminal.twos(),
        });
    }
    let mut zeta = terminal.clone();
    let domain = zeta.window();
    eta.clear();
    eta.resize(domain.width(), false);
    let base = domain.left;
    let idx = |k: SiteIndex| (k - base) as usize;
    for ev in trace.events.iter().rev() {
        let i = ev.site;
        let zeta_after = zeta.at(i);
        let deltas = trace.deltas_of(ev);
        undo(&mut zeta, ev, deltas);
        let zeta_before = zeta.at(i);
        match ev.color {
            Color::Black if eta[idx(i)] => {
                let mut k = i;
                while k >= ev.domain.left && eta[idx(k)] {
                    eta[idx(k)] = false;
                    k -= 1;
                }
                let mut k = i + 1;
                while k <= ev.domain.right && eta[idx(k)] {
                    eta[idx(k)] = false;
                    k += 1;
                }
            }
            Color::Black => {
                if zeta_after == 0 {
                    eta[idx(i)] = true;
                }
            }
            Color::Grey => {
                if zeta_before >= 1 {
                    eta[idx(i)] = true;
                }
            }
        }
        for k in deltas.iter().map(|d| d.site).chain(std::iter::once(i)) {
            if ev.domain.contains(k) && eta[idx(k)] && zeta.at(k) == 0 {
                return Err(Error::CouplingBroken { site: k });
            }
        }
    }
    let start = trace.events.first().map_or(domain, |ev| ev.domain);
    let lo = idx(start.left);
    let hi = idx(start.right);
    Ok((start.left, &eta[lo..=hi]))
}

/// One exact sample and its cost.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    /// The avalanche configuration on `[-l, l]`.
    pub config: Config,
    /// Number of marks `T` of the forward pass.
    pub events: u64,
    /// Width of the terminal domain `[l_T, r_T]`.
    pub domain_width: u64,
}

/// Reusable sampler; keeps its buffers between samples.
#[derive(Clone, Debug)]
pub struct Sampler {
    variant: Variant,
    budget: u64,
    trace: SamplerTrace,
    eta: Vec<bool>,
}

impl Sampler {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            budget: DEFAULT_EVENT_BUDGET,
            trace: SamplerTrace::default(),
            eta: Vec::new(),
        }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// The trace of the most recent sample.
    pub fn last_trace(&self) -> &SamplerTrace {
        &self.trace
    }

    /// Runs the forward pass only, leaving the trace in the sampler.
    /// Returns `None` when the initialization finishes at once.
    pub fn forward_pass(&mut self, l: u64, rng: &mut RngStream) -> Result<Option<Window>> {
        let initial = match step0_init(l, rng) {
            Step0::FinishedAllVacant { .. } => {
                self.trace = SamplerTrace::default();
                return Ok(None);
            }
            Step0::Box(b) => b,
        };
        self.trace.reset(initial);
        let trace = &mut self.trace;
        let state = trace.terminal.as_mut().expect("box");
        let mut n = 0;
        while state.twos() > 0 {
            if n == self.budget {
                return Err(Error::BudgetExceeded { budget: self.budget });
            }
            n += 1;
            let domain = state.window();
            let site = rng.site_in(domain.left, domain.right);
            let color = Color::from_coin(rng.coin());
            let start = trace.deltas.len();
            match self.variant {
                Variant::Step1 => apply_step1(state, site, color, rng, &mut trace.deltas),
                Variant::Step1Prime => apply_step1prime(state, site, color, rng, &mut trace.deltas),
            }
            trace.events.push(TraceEvent {
                site,
                color,
                domain,
                deltas: (start, trace.deltas.len()),
            });
        }
        Ok(Some(state.window()))
    }

    /// One exact sample of the invariant law on `[-l, l]`.
    pub fn sample(&mut self, l: u64, rng: &mut RngStream) -> Result<Sample> {
        let li = l as i64;
        let window = Window::centered(l);
        let Some(terminal) = self.forward_pass(l, rng)? else {
            return Ok(Sample {
                config: Config::vacant(window),
                events: 0,
                domain_width: 0,
            });
        };
        let (left, eta) = reconstruct_into(&self.trace, &mut self.eta)?;
        let off = (-li - left) as usize;
        let states = eta[off..off + window.width()]
            .iter()
            .map(|&b| SiteState::from_bool(b))
            .collect();
        Ok(Sample {
            config: Config::from_states(-li, states),
            events: self.trace.len() as u64,
            domain_width: terminal.width() as u64,
        })
    }
}

/// One exact sample on `[-l, l]` with the default event budget.
pub fn sample_invariant_window(l: u64, variant: Variant, rng: &mut RngStream) -> Result<Sample> {
    Sampler::new(variant).sample(l, rng)
}
