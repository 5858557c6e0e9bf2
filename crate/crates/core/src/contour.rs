//! Contour processes bracketing a site by Bernoulli-vacant sites.
//!
//! Positions are half-integers in the continuum picture. They are stored as
//! integers: the right contour keeps the vacant site on its right (`r` for the
//! position `r - 1/2`), the left contour the vacant site on its left (`l` for
//! `l + 1/2`). The pair has met once `r <= l`.
//!
//! A contour is driven by three rate-1 streams: black marks on its outer
//! site, black marks on its inner neighbour and grey marks on that inner
//! neighbour. The left contour is the mirror image of the right one, so both
//! share one implementation parameterized by a direction.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{Color, EventLog};
use crate::lattice::{Config, EnvPolicy, SiteIndex, SiteState};
use crate::rng::{RngStream, SiteCoins};

pub const DEFAULT_CONTOUR_BUDGET: u64 = 10_000_000;

/// How far a scan for an occupied or vacant site may run before giving up.
const SCAN_LIMIT: i64 = 1 << 22;

/// Read/flip access to a Bernoulli configuration.
pub trait Environment {
    fn occupied(&mut self, site: SiteIndex) -> Result<bool>;
    fn flip(&mut self, site: SiteIndex) -> Result<()>;
}

/// Fixed windows refuse reads past their edge with `BoundaryTruncated`: a
/// contour that gets there would see ghosts instead of the process.
impl Environment for Config {
    fn occupied(&mut self, site: SiteIndex) -> Result<bool> {
        if self.policy() == EnvPolicy::FixedVacantOutside && !self.window().contains(site) {
            return Err(Error::BoundaryTruncated { site });
        }
        Ok(self.read(site)?.is_occupied())
    }

    fn flip(&mut self, site: SiteIndex) -> Result<()> {
        if !self.window().contains(site) {
            if self.policy() == EnvPolicy::FixedVacantOutside {
                return Err(Error::OutOfWindow { site });
            }
            self.extend_to(site)?;
        }
        let s = self.get(site);
        self.set(site, s.flipped());
        Ok(())
    }
}

/// Initial law of an environment, read site by site.
pub trait SiteLaw {
    fn initial(&self, site: SiteIndex) -> bool;
}

impl SiteLaw for Config {
    fn initial(&self, site: SiteIndex) -> bool {
        self.get(site).is_occupied()
    }
}

/// The renewal environment: occupied on `(-inf, 0]`, vacant at 1, i.i.d.
/// fair coins from 2 on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct XiConfig {
    coins: SiteCoins,
}

impl XiConfig {
    pub fn new(coins: SiteCoins) -> Self {
        Self { coins }
    }

    pub fn sample(rng: &mut RngStream) -> Self {
        Self::new(SiteCoins::from_stream(rng))
    }

    pub fn get(&self, site: SiteIndex) -> SiteState {
        SiteState::from_bool(self.initial(site))
    }
}

impl SiteLaw for XiConfig {
    fn initial(&self, site: SiteIndex) -> bool {
        match site {
            s if s <= 0 => true,
            1 => false,
            s => self.coins.coin(s),
        }
    }
}

/// A Bernoulli process on all of `Z`, materialized lazily in time.
///
/// Sites whose marks are simulated explicitly ("watched" sites) are kept in
/// sync with the clock. Any other site is brought up to date on read: over an
/// unobserved stretch of length `dt` its value flips with probability
/// `(1 - e^{-2 dt}) / 2`, the chance of an odd number of rate-1 marks.
#[derive(Clone, Debug)]
pub struct EvolvingEnv<L> {
    law: L,
    sites: HashMap<SiteIndex, (bool, f64)>,
    now: f64,
    rng: RngStream,
}

impl<L: SiteLaw> EvolvingEnv<L> {
    pub fn new(law: L, rng: RngStream) -> Self {
        Self {
            law,
            sites: HashMap::new(),
            now: 0.0,
            rng,
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Moves the clock forward by `dt`. The `watched` sites saw no mark in the
    /// elapsed stretch, so they keep their value.
    pub fn advance(&mut self, dt: f64, watched: &[SiteIndex]) {
        for &w in watched {
            self.sync(w);
        }
        self.now += dt;
        for &w in watched {
            if let Some(entry) = self.sites.get_mut(&w) {
                entry.1 = self.now;
            }
        }
    }

    fn sync(&mut self, site: SiteIndex) -> bool {
        let now = self.now;
        let law = &self.law;
        let entry = self
            .sites
            .entry(site)
            .or_insert_with(|| (law.initial(site), 0.0));
        let dt = now - entry.1;
        if dt > 0.0 {
            let p_odd = 0.5 * (1.0 - (-2.0 * dt).exp());
            if self.rng.bernoulli(p_odd) {
                entry.0 = !entry.0;
            }
            entry.1 = now;
        }
        entry.0
    }
}

impl<L: SiteLaw> Environment for EvolvingEnv<L> {
    fn occupied(&mut self, site: SiteIndex) -> Result<bool> {
        Ok(self.sync(site))
    }

    fn flip(&mut self, site: SiteIndex) -> Result<()> {
        self.sync(site);
        let entry = self.sites.get_mut(&site).expect("synced site");
        entry.0 = !entry.0;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Right,
    Left,
}

impl Side {
    #[inline]
    fn dir(self) -> i64 {
        match self {
            Side::Right => 1,
            Side::Left => -1,
        }
    }
}

/// A driving event, named in the right contour's frame. For the left
/// contour the roles of left and right are exchanged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContourEvent {
    /// Black mark on the outer vacant site: a jump outward.
    BlackRight,
    /// Black mark on the inner neighbour: a jump inward.
    BlackLeft,
    /// Grey mark on the inner neighbour: an inward jump if the next site
    /// inward is vacant, a fictitious jump otherwise.
    GreyLeft,
}

impl ContourEvent {
    pub const ALL: [ContourEvent; 3] = [
        ContourEvent::BlackRight,
        ContourEvent::BlackLeft,
        ContourEvent::GreyLeft,
    ];

    /// The marked site and mark color for a contour at `pos` on `side`.
    pub fn mark(self, side: Side, pos: SiteIndex) -> (SiteIndex, Color) {
        let d = side.dir();
        match self {
            ContourEvent::BlackRight => (pos, Color::Black),
            ContourEvent::BlackLeft => (pos - d, Color::Black),
            ContourEvent::GreyLeft => (pos - d, Color::Grey),
        }
    }

    fn from_mark(side: Side, pos: SiteIndex, site: SiteIndex, color: Color) -> Option<Self> {
        ContourEvent::ALL
            .into_iter()
            .find(|e| e.mark(side, pos) == (site, color))
    }
}

/// Both contours around a site, with running extrema.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContourState {
    pub r: SiteIndex,
    pub l: SiteIndex,
    pub r_max: SiteIndex,
    pub l_min: SiteIndex,
    pub met: bool,
    /// Driving events consumed, fictitious ones included.
    pub events: u64,
    /// Grey events that left a contour in place.
    pub fictitious: u64,
}

impl ContourState {
    pub fn new(r: SiteIndex, l: SiteIndex) -> Self {
        Self {
            r,
            l,
            r_max: r,
            l_min: l,
            met: r <= l,
            events: 0,
            fictitious: 0,
        }
    }

    pub fn position(&self, side: Side) -> SiteIndex {
        match side {
            Side::Right => self.r,
            Side::Left => self.l,
        }
    }

    fn set_position(&mut self, side: Side, pos: SiteIndex) {
        match side {
            Side::Right => {
                self.r = pos;
                self.r_max = self.r_max.max(pos);
            }
            Side::Left => {
                self.l = pos;
                self.l_min = self.l_min.min(pos);
            }
        }
    }

    /// The distinct `(site, color)` streams driving the pair.
    pub fn active_streams(&self) -> Vec<(SiteIndex, Color)> {
        let mut out = Vec::with_capacity(6);
        for side in [Side::Right, Side::Left] {
            for e in ContourEvent::ALL {
                let m = e.mark(side, self.position(side));
                if !out.contains(&m) {
                    out.push(m);
                }
            }
        }
        out
    }
}

fn scan(env: &mut impl Environment, from: SiteIndex, step: i64, want: bool) -> Result<SiteIndex> {
    let mut k = from;
    for _ in 0..SCAN_LIMIT {
        if env.occupied(k)? == want {
            return Ok(k);
        }
        k += step;
    }
    Err(if want {
        Error::NoOccupiedSite { site: from }
    } else {
        Error::NoVacantSite { site: from }
    })
}

/// First vacant site at or beyond `i` in the direction of `side`.
fn init_contour(env: &mut impl Environment, i: SiteIndex, side: Side) -> Result<SiteIndex> {
    scan(env, i, side.dir(), false)
}

/// First site `k >= i` with `zeta0(k)` vacant. Lazy configurations are
/// extended as needed; fixed ones are searched inside their window only.
pub fn init_right_contour(zeta0: &mut Config, i: SiteIndex) -> Result<SiteIndex> {
    if zeta0.policy() == EnvPolicy::FixedVacantOutside {
        return (i.max(zeta0.left())..=zeta0.right())
            .find(|&k| !zeta0.is_occupied(k))
            .ok_or(Error::NoVacantSite { site: i });
    }
    init_contour(zeta0, i, Side::Right)
}

/// Mirror image of [`init_right_contour`]: first site `k <= i` vacant.
pub fn init_left_contour(zeta0: &mut Config, i: SiteIndex) -> Result<SiteIndex> {
    if zeta0.policy() == EnvPolicy::FixedVacantOutside {
        return (zeta0.left()..=i.min(zeta0.right()))
            .rev()
            .find(|&k| !zeta0.is_occupied(k))
            .ok_or(Error::NoVacantSite { site: i });
    }
    init_contour(zeta0, i, Side::Left)
}

/// New position of a contour after `event`, the environment already showing
/// the effect of the mark. Returns `None` for a fictitious jump.
fn relocate(env: &mut impl Environment, side: Side, pos: SiteIndex, event: ContourEvent) -> Result<Option<SiteIndex>> {
    let d = side.dir();
    match event {
        ContourEvent::BlackRight => Ok(Some(scan(env, pos + d, d, false)?)),
        ContourEvent::BlackLeft => Ok(Some(scan(env, pos - d, -d, true)? + d)),
        ContourEvent::GreyLeft => {
            if env.occupied(pos - 2 * d)? {
                Ok(None)
            } else {
                Ok(Some(scan(env, pos - 2 * d, -d, true)? + d))
            }
        }
    }
}

/// Applies one driving event to the contour on `side`: flips the marked site
/// for black events, then moves the contour.
pub fn contour_step(
    state: &mut ContourState,
    env: &mut impl Environment,
    side: Side,
    event: ContourEvent,
) -> Result<()> {
    if state.met {
        return Err(Error::AlreadyStopped);
    }
    let (site, color) = event.mark(side, state.position(side));
    apply_mark(state, env, site, color)
}

/// Applies a mark at `(site, color)` to every contour it drives.
fn apply_mark(state: &mut ContourState, env: &mut impl Environment, site: SiteIndex, color: Color) -> Result<()> {
    let hits: Vec<(Side, ContourEvent)> = [Side::Right, Side::Left]
        .into_iter()
        .filter_map(|side| ContourEvent::from_mark(side, state.position(side), site, color).map(|e| (side, e)))
        .collect();
    if color == Color::Black {
        env.flip(site)?;
    }
    for (side, event) in hits {
        match relocate(env, side, state.position(side), event)? {
            Some(pos) => state.set_position(side, pos),
            None => state.fictitious += 1,
        }
    }
    state.events += 1;
    state.met = state.r <= state.l;
    Ok(())
}

/// Outcome of one contour pair run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeetRecord {
    pub rho_events: u64,
    pub rho_time: f64,
    pub r_max: SiteIndex,
    pub l_min: SiteIndex,
    pub fictitious: u64,
    pub r0: SiteIndex,
    pub l0: SiteIndex,
}

/// Runs both contours around `i` until they meet.
pub fn run_until_meet(zeta0: Config, i: SiteIndex, rng: &mut RngStream) -> Result<MeetRecord> {
    run_until_meet_with_budget(zeta0, i, rng, DEFAULT_CONTOUR_BUDGET)
}

/// [`run_until_meet`] with an explicit cap on driving events.
///
/// Time runs continuously: the next event comes after an exponential holding
/// time at rate equal to the number of distinct active streams, and picks
/// one of them uniformly.
pub fn run_until_meet_with_budget(zeta0: Config, i: SiteIndex, rng: &mut RngStream, budget: u64) -> Result<MeetRecord> {
    let mut env = EvolvingEnv::new(zeta0, rng.split());
    let r0 = init_contour(&mut env, i, Side::Right)?;
    let l0 = init_contour(&mut env, i, Side::Left)?;
    let mut state = ContourState::new(r0, l0);
    let mut watched = Vec::with_capacity(6);
    while !state.met {
        if state.events == budget {
            return Err(Error::BudgetExceeded { budget });
        }
        let streams = state.active_streams();
        watched.clear();
        for &(s, _) in &streams {
            if !watched.contains(&s) {
                watched.push(s);
            }
        }
        env.advance(rng.exponential(streams.len() as f64), &watched);
        let (site, color) = streams[rng.below(streams.len() as u64) as usize];
        apply_mark(&mut state, &mut env, site, color)?;
    }
    Ok(MeetRecord {
        rho_events: state.events,
        rho_time: env.now(),
        r_max: state.r_max,
        l_min: state.l_min,
        fictitious: state.fictitious,
        r0,
        l0,
    })
}

/// Runs the pair on a fully drawn mark log over a fixed window. Returns
/// `None` if the log ends first or a contour reaches the window edge.
pub fn run_until_meet_on_log(zeta0: &Config, i: SiteIndex, log: &EventLog) -> Result<Option<MeetRecord>> {
    match meet_on_log(zeta0, i, log) {
        Err(Error::BoundaryTruncated { .. }) => Ok(None),
        other => other,
    }
}

fn meet_on_log(zeta0: &Config, i: SiteIndex, log: &EventLog) -> Result<Option<MeetRecord>> {
    let mut env = zeta0.clone();
    let r0 = init_right_contour(&mut env, i)?;
    let l0 = init_left_contour(&mut env, i)?;
    let mut state = ContourState::new(r0, l0);
    if state.met {
        return Ok(Some(meet_record(&state, 0.0, r0, l0)));
    }
    for mark in &log.marks {
        let drives = [Side::Right, Side::Left]
            .into_iter()
            .any(|side| ContourEvent::from_mark(side, state.position(side), mark.site, mark.color).is_some());
        if drives {
            apply_mark(&mut state, &mut env, mark.site, mark.color)?;
            if state.met {
                let t = mark.time.unwrap_or(mark.ordinal as f64);
                return Ok(Some(meet_record(&state, t, r0, l0)));
            }
        } else if mark.color == Color::Black {
            env.flip(mark.site)?;
        }
    }
    Ok(None)
}

fn meet_record(state: &ContourState, t: f64, r0: SiteIndex, l0: SiteIndex) -> MeetRecord {
    MeetRecord {
        rho_events: state.events,
        rho_time: t,
        r_max: state.r_max,
        l_min: state.l_min,
        fictitious: state.fictitious,
        r0,
        l0,
    }
}

/// Right contours started around each of `starts` on one shared environment
/// and mark log, run independently of any left contour. Returns the position
/// of every contour after each mark that drives at least one of them.
pub fn right_contours_on_log(zeta0: &Config, starts: &[SiteIndex], log: &EventLog) -> Result<Vec<Vec<SiteIndex>>> {
    let mut env = zeta0.clone();
    let mut pos: Vec<SiteIndex> = starts
        .iter()
        .map(|&i| init_right_contour(&mut env, i))
        .collect::<Result<_>>()?;
    let mut out = vec![pos.clone()];
    for mark in &log.marks {
        let hits: Vec<(usize, ContourEvent)> = pos
            .iter()
            .enumerate()
            .filter_map(|(k, &p)| ContourEvent::from_mark(Side::Right, p, mark.site, mark.color).map(|e| (k, e)))
            .collect();
        if mark.color == Color::Black {
            env.flip(mark.site)?;
        }
        if hits.is_empty() {
            continue;
        }
        for (k, e) in hits {
            if let Some(p) = relocate(&mut env, Side::Right, pos[k], e)? {
                pos[k] = p;
            }
        }
        out.push(pos.clone());
    }
    Ok(out)
}

/// Arrival times of the three driving streams of a lone right contour
/// started around `i`, run until every stream has fired `per_stream` times.
/// Indexed in the order of [`ContourEvent::ALL`].
pub fn right_contour_stream_times(zeta0: Config, i: SiteIndex, rng: &mut RngStream, per_stream: usize) -> Result<[Vec<f64>; 3]> {
    let mut env = EvolvingEnv::new(zeta0, rng.split());
    let mut r = init_contour(&mut env, i, Side::Right)?;
    let mut times: [Vec<f64>; 3] = Default::default();
    while times.iter().any(|t| t.len() < per_stream) {
        env.advance(rng.exponential(3.0), &[r, r - 1]);
        let k = rng.below(3) as usize;
        let event = ContourEvent::ALL[k];
        let (site, color) = event.mark(Side::Right, r);
        if color == Color::Black {
            env.flip(site)?;
        }
        if let Some(p) = relocate(&mut env, Side::Right, r, event)? {
            r = p;
        }
        if times[k].len() < per_stream {
            times[k].push(env.now());
        }
    }
    Ok(times)
}

/// The renewal increment: start the right contour at `r = 1` in a fresh
/// renewal environment and return its displacement (in sites) at its first
/// outward jump, together with the number of driving events used.
pub fn sample_y1_with_events(rng: &mut RngStream) -> (i64, u64) {
    let xi = XiConfig::sample(rng);
    let mut env = EvolvingEnv::new(xi, rng.split());
    let mut r: SiteIndex = 1;
    let mut events = 0;
    loop {
        env.advance(rng.exponential(3.0), &[r, r - 1]);
        events += 1;
        let event = ContourEvent::ALL[rng.below(3) as usize];
        let (site, color) = event.mark(Side::Right, r);
        if color == Color::Black {
            env.flip(site).expect("evolving environment never fails");
        }
        let next = relocate(&mut env, Side::Right, r, event).expect("renewal environment has occupied sites");
        if event == ContourEvent::BlackRight {
            return (next.expect("outward jumps always move") - 1, events);
        }
        if let Some(p) = next {
            r = p;
        }
    }
}

pub fn sample_y1(rng: &mut RngStream) -> i64 {
    sample_y1_with_events(rng).0
}

/// Closed forms of the integrals bounding the mean renewal increment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementConstants {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    /// `i1 + i2 + i3 / 2 + i4 / 2`
    pub i: f64,
    /// Upper bound on the mean increment, `1 - i`.
    pub mean_bound: f64,
}

pub fn analytic_increment_constants() -> IncrementConstants {
    use std::f64::consts::FRAC_PI_2;
    let i1 = FRAC_PI_2 - 1.0;
    let i2 = 1.0 / 3.0;
    let i3 = 1.0 / 3.0;
    let i4 = 1.0 / 5.0;
    let i = i1 + i2 + i3 / 2.0 + i4 / 2.0;
    IncrementConstants {
        i1,
        i2,
        i3,
        i4,
        i,
        mean_bound: 1.0 - i,
    }
}
