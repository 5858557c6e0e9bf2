//! Lattice configurations on finite windows of Z.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{RngStream, SiteCoins};

/// Integer lattice coordinate.
pub type SiteIndex = i64;

/// Default cap on how wide a lazily extended window may grow.
pub const DEFAULT_EXTENSION_LIMIT: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum SiteState {
    Vacant = 0,
    Occupied = 1,
}

impl SiteState {
    #[inline]
    pub fn from_bool(occupied: bool) -> Self {
        if occupied {
            SiteState::Occupied
        } else {
            SiteState::Vacant
        }
    }

    #[inline]
    pub fn is_occupied(self) -> bool {
        self == SiteState::Occupied
    }

    #[inline]
    pub fn flipped(self) -> Self {
        match self {
            SiteState::Vacant => SiteState::Occupied,
            SiteState::Occupied => SiteState::Vacant,
        }
    }

    fn as_char(self) -> char {
        match self {
            SiteState::Vacant => '0',
            SiteState::Occupied => '1',
        }
    }
}

/// Inclusive site interval `[left, right]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub left: SiteIndex,
    pub right: SiteIndex,
}

impl Window {
    pub fn new(left: SiteIndex, right: SiteIndex) -> Result<Self> {
        if left > right {
            return Err(Error::EmptyWindow { left, right });
        }
        Ok(Self { left, right })
    }

    /// `[-radius, radius]`.
    pub fn centered(radius: u64) -> Self {
        Self {
            left: -(radius as i64),
            right: radius as i64,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        (self.right - self.left + 1) as usize
    }

    #[inline]
    pub fn contains(&self, site: SiteIndex) -> bool {
        self.left <= site && site <= self.right
    }

    pub fn sites(&self) -> std::ops::RangeInclusive<SiteIndex> {
        self.left..=self.right
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.left, self.right)
    }
}

/// What a configuration reports for sites outside its window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvPolicy {
    /// Out-of-window sites read as vacant ghosts; the window never grows.
    FixedVacantOutside,
    /// Out-of-window sites are i.i.d. fair coins, materialized on first read.
    LazyBernoulliHalf,
}

/// Occupancy map over a finite window.
#[derive(Clone, Debug)]
pub struct Config {
    left: SiteIndex,
    states: VecDeque<SiteState>,
    policy: EnvPolicy,
    coins: Option<SiteCoins>,
    extension_limit: usize,
}

impl PartialEq for Config {
    fn eq(&self, other: &Self) -> bool {
        self.left == other.left && self.states == other.states && self.policy == other.policy
    }
}

impl Eq for Config {}

impl Config {
    /// All-vacant configuration with ghost vacant sites outside.
    pub fn vacant(window: Window) -> Self {
        Self::from_states(window.left, vec![SiteState::Vacant; window.width()])
    }

    pub fn from_states(left: SiteIndex, states: Vec<SiteState>) -> Self {
        assert!(!states.is_empty(), "configuration needs at least one site");
        Self {
            left,
            states: states.into(),
            policy: EnvPolicy::FixedVacantOutside,
            coins: None,
            extension_limit: DEFAULT_EXTENSION_LIMIT,
        }
    }

    /// Builds a fixed configuration from 0/1 flags.
    pub fn from_bits(left: SiteIndex, bits: &[bool]) -> Self {
        Self::from_states(left, bits.iter().map(|&b| SiteState::from_bool(b)).collect())
    }

    /// Lazily extendable configuration backed by random-access site coins.
    pub fn lazy(window: Window, coins: SiteCoins) -> Self {
        let states = window
            .sites()
            .map(|s| SiteState::from_bool(coins.coin(s)))
            .collect();
        Self {
            left: window.left,
            states,
            policy: EnvPolicy::LazyBernoulliHalf,
            coins: Some(coins),
            extension_limit: DEFAULT_EXTENSION_LIMIT,
        }
    }

    pub fn with_extension_limit(mut self, limit: usize) -> Self {
        self.extension_limit = limit.max(self.width());
        self
    }

    pub fn window(&self) -> Window {
        Window {
            left: self.left,
            right: self.right(),
        }
    }

    #[inline]
    pub fn left(&self) -> SiteIndex {
        self.left
    }

    #[inline]
    pub fn right(&self) -> SiteIndex {
        self.left + self.states.len() as i64 - 1
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.states.len()
    }

    pub fn policy(&self) -> EnvPolicy {
        self.policy
    }

    /// State of an in-window site, or the ghost value under the fixed policy.
    /// Lazy configurations answer out-of-window reads from their coins without
    /// materializing; use [`Config::read`] to extend.
    #[inline]
    pub fn get(&self, site: SiteIndex) -> SiteState {
        if site >= self.left {
            let idx = (site - self.left) as usize;
            if idx < self.states.len() {
                return self.states[idx];
            }
        }
        match self.coins {
            Some(coins) => SiteState::from_bool(coins.coin(site)),
            None => SiteState::Vacant,
        }
    }

    #[inline]
    pub fn is_occupied(&self, site: SiteIndex) -> bool {
        self.get(site).is_occupied()
    }

    /// Reads a site, materializing lazily drawn sites up to it.
    pub fn read(&mut self, site: SiteIndex) -> Result<SiteState> {
        if self.policy == EnvPolicy::LazyBernoulliHalf {
            self.extend_to(site)?;
        }
        Ok(self.get(site))
    }

    /// Grows a lazy window so it contains `site`. No-op under the fixed policy.
    pub fn extend_to(&mut self, site: SiteIndex) -> Result<()> {
        let Some(coins) = self.coins else {
            return Ok(());
        };
        let new_left = self.left.min(site);
        let new_right = self.right().max(site);
        if (new_right - new_left + 1) as usize > self.extension_limit {
            return Err(Error::OutOfWindow { site });
        }
        while self.left > new_left {
            self.left -= 1;
            self.states.push_front(SiteState::from_bool(coins.coin(self.left)));
        }
        let mut right = self.right();
        while right < new_right {
            right += 1;
            self.states.push_back(SiteState::from_bool(coins.coin(right)));
        }
        Ok(())
    }

    /// Sets an in-window site. Panics outside the window.
    #[inline]
    pub fn set(&mut self, site: SiteIndex, state: SiteState) {
        let idx = self.index(site);
        self.states[idx] = state;
    }

    #[inline]
    fn index(&self, site: SiteIndex) -> usize {
        assert!(
            self.window().contains(site),
            "site {site} outside window {}",
            self.window()
        );
        (site - self.left) as usize
    }

    pub fn states(&self) -> impl Iterator<Item = SiteState> + '_ {
        self.states.iter().copied()
    }

    pub fn occupied_count(&self) -> usize {
        self.states.iter().filter(|s| s.is_occupied()).count()
    }

    /// Copy of the states on `window`, which must lie inside this window
    /// (lazy configurations are extended first).
    pub fn restrict(&mut self, window: Window) -> Result<Config> {
        self.extend_to(window.left)?;
        self.extend_to(window.right)?;
        if !(self.window().contains(window.left) && self.window().contains(window.right)) {
            return Err(Error::OutOfWindow {
                site: if self.window().contains(window.left) {
                    window.right
                } else {
                    window.left
                },
            });
        }
        Ok(Config::from_states(
            window.left,
            window.sites().map(|s| self.get(s)).collect(),
        ))
    }

    /// Packs the window into an integer code, site `left` in the highest bit.
    /// Only meaningful for windows of at most 63 sites.
    pub fn code(&self) -> u64 {
        debug_assert!(self.width() <= 63);
        self.states
            .iter()
            .fold(0u64, |acc, s| (acc << 1) | s.is_occupied() as u64)
    }

    /// Pointwise `self <= other` on this window.
    pub fn dominated_by(&self, other: &Config) -> bool {
        self.window()
            .sites()
            .all(|s| !self.is_occupied(s) || other.is_occupied(s))
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.window())?;
        for s in &self.states {
            write!(f, "{}", s.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for Config {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let bad = || Error::Parse(text.to_string());
        let (bounds, bits) = text.split_once(':').ok_or_else(bad)?;
        let inner = bounds
            .strip_prefix('[')
            .and_then(|b| b.strip_suffix(']'))
            .ok_or_else(bad)?;
        let (l, r) = inner.split_once(',').ok_or_else(bad)?;
        let left: i64 = l.trim().parse().map_err(|_| bad())?;
        let right: i64 = r.trim().parse().map_err(|_| bad())?;
        let window = Window::new(left, right)?;
        let states = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(SiteState::Vacant),
                '1' => Ok(SiteState::Occupied),
                _ => Err(bad()),
            })
            .collect::<Result<Vec<_>>>()?;
        if states.len() != window.width() {
            return Err(bad());
        }
        Ok(Config::from_states(left, states))
    }
}

/// Product Bernoulli(1/2) configuration on `window`, lazily extendable.
pub fn sample_bernoulli_config(window: Window, rng: &mut RngStream) -> Result<Config> {
    let window = Window::new(window.left, window.right)?;
    Ok(Config::lazy(window, SiteCoins::from_stream(rng)))
}

/// Geometric draw on {1, 2, ...} with `P[k] = 2^-k`.
#[inline]
pub fn sample_geometric_half(rng: &mut RngStream) -> u64 {
    use rand::RngCore;
    let mut offset = 0;
    loop {
        let bits = rng.next_u64();
        if bits != 0 {
            return offset + bits.trailing_zeros() as u64 + 1;
        }
        offset += 64;
    }
}

/// Maximal occupied interval containing `site`, or `None` if it is vacant.
///
/// Lazy configurations are extended while scanning; the fixed policy stops at
/// the ghost vacant sites.
pub fn connected_component(config: &mut Config, site: SiteIndex) -> Result<Option<Window>> {
    if config.policy() == EnvPolicy::LazyBernoulliHalf && !config.window().contains(site) {
        config.extend_to(site)?;
    }
    if !config.read(site)?.is_occupied() {
        return Ok(None);
    }
    let mut left = site;
    while config.read(left - 1)?.is_occupied() {
        left -= 1;
    }
    let mut right = site;
    while config.read(right + 1)?.is_occupied() {
        right += 1;
    }
    Ok(Some(Window { left, right }))
}

/// Mass of the particle holding the edge `(0, 1)`: one plus the length of the
/// occupied run touching site 0 or 1.
pub fn particle_mass_at_edge(config: &Config) -> Result<u64> {
    let window = config.window();
    for site in -1..=2 {
        if !window.contains(site) {
            return Err(Error::BoundaryTruncated { site });
        }
    }
    let seed = if config.is_occupied(0) {
        0
    } else if config.is_occupied(1) {
        1
    } else {
        return Ok(1);
    };
    let mut left = seed;
    while config.is_occupied(left - 1) {
        left -= 1;
        if left == window.left {
            return Err(Error::BoundaryTruncated { site: left });
        }
    }
    let mut right = seed;
    while config.is_occupied(right + 1) {
        right += 1;
        if right == window.right {
            return Err(Error::BoundaryTruncated { site: right });
        }
    }
    Ok((right - left + 2) as u64)
}
