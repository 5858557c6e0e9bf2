//! Event-driven forward dynamics: the Bernoulli process, the avalanche process
//! and their monotone couplings, all driven by explicit mark logs.
//!
//! Forward runs live on a finite window with vacant ghost sites outside, so an
//! avalanche never propagates past the window edge. Equilibrium statistics
//! should come from the exact sampler; these runs serve as oracles and for
//! pathwise invariants.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Config, SiteIndex, SiteState, Window};
use crate::rng::RngStream;

/// Mark color: black marks belong to the rate-1 family `N`, grey marks to the
/// independent family `V`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Black,
    Grey,
}

impl Color {
    #[inline]
    pub fn from_coin(grey: bool) -> Self {
        if grey {
            Color::Grey
        } else {
            Color::Black
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mark {
    pub site: SiteIndex,
    pub color: Color,
    pub ordinal: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
}

/// How long a log runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Horizon {
    /// Jump chain with a fixed number of marks.
    Events(u64),
    /// Continuous time on `[0, T]`.
    Time(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventLog {
    pub window: Window,
    pub horizon: Horizon,
    pub marks: Vec<Mark>,
}

impl EventLog {
    /// Per-site number of marks of `color`.
    pub fn counts(&self, color: Color) -> HashMap<SiteIndex, u64> {
        let mut out = HashMap::new();
        for m in self.marks.iter().filter(|m| m.color == color) {
            *out.entry(m.site).or_insert(0) += 1;
        }
        out
    }

    /// Merges two continuous-time logs on the same window into one, ordered by
    /// time, with ordinals renumbered from 1.
    pub fn merge(a: &EventLog, b: &EventLog) -> Result<EventLog> {
        let (Horizon::Time(ta), Horizon::Time(tb)) = (a.horizon, b.horizon) else {
            return Err(Error::InvalidArgument(
                "only continuous-time logs can be merged".into(),
            ));
        };
        if a.window != b.window {
            return Err(Error::WindowMismatch);
        }
        let mut marks: Vec<Mark> = a.marks.iter().chain(&b.marks).copied().collect();
        marks.sort_by(|x, y| x.time.partial_cmp(&y.time).expect("finite times"));
        for (k, m) in marks.iter_mut().enumerate() {
            m.ordinal = k as u64 + 1;
        }
        Ok(EventLog {
            window: a.window,
            horizon: Horizon::Time(ta.min(tb)),
            marks,
        })
    }
}

/// Draws a mark log on `window`.
///
/// In event mode each mark picks a uniform site and a fair color. In time mode
/// every `(site, color)` pair carries its own rate-1 Poisson clock; the
/// superposition is drawn directly as a rate-`2w` clock with uniform labels.
pub fn generate_event_log(window: Window, horizon: Horizon, rng: &mut RngStream) -> Result<EventLog> {
    let window = Window::new(window.left, window.right)?;
    let mut marks = Vec::new();
    match horizon {
        Horizon::Events(n) => {
            marks.reserve(n as usize);
            for ordinal in 1..=n {
                marks.push(Mark {
                    site: rng.site_in(window.left, window.right),
                    color: Color::from_coin(rng.coin()),
                    ordinal,
                    time: None,
                });
            }
        }
        Horizon::Time(t_end) => {
            let rate = 2.0 * window.width() as f64;
            let mut t = 0.0;
            let mut ordinal = 0;
            loop {
                t += rng.exponential(rate);
                if t > t_end {
                    break;
                }
                ordinal += 1;
                marks.push(Mark {
                    site: rng.site_in(window.left, window.right),
                    color: Color::from_coin(rng.coin()),
                    ordinal,
                    time: Some(t),
                });
            }
        }
    }
    Ok(EventLog {
        window,
        horizon,
        marks,
    })
}

/// Bernoulli process at a time where site `i` has seen `counts[i]` black
/// marks: each site keeps its parity-flipped initial value.
pub fn evolve_bernoulli(zeta0: &Config, counts: &HashMap<SiteIndex, u64>) -> Config {
    let mut out = zeta0.clone();
    for site in zeta0.window().sites() {
        if counts.get(&site).copied().unwrap_or(0) % 2 == 1 {
            out.set(site, zeta0.get(site).flipped());
        }
    }
    out
}

/// Applies one avalanche mark at `site` in place and returns the sites that
/// changed: a vacant site fills, an occupied site empties its whole run.
pub fn avalanche_apply_mark(eta: &mut Config, site: SiteIndex) -> Vec<SiteIndex> {
    let mut changed = Vec::new();
    avalanche_apply_mark_into(eta, site, &mut changed);
    changed
}

fn avalanche_apply_mark_into(eta: &mut Config, site: SiteIndex, changed: &mut Vec<SiteIndex>) {
    if !eta.is_occupied(site) {
        eta.set(site, SiteState::Occupied);
        changed.push(site);
        return;
    }
    let window = eta.window();
    let mut left = site;
    while left > window.left && eta.is_occupied(left - 1) {
        left -= 1;
    }
    let mut right = site;
    while right < window.right && eta.is_occupied(right + 1) {
        right += 1;
    }
    for k in left..=right {
        eta.set(k, SiteState::Vacant);
        changed.push(k);
    }
}

/// Runs the avalanche jump chain for `events` marks at uniform sites.
pub fn run_avalanche_events(eta: &mut Config, events: u64, rng: &mut RngStream) {
    let w = eta.window();
    let mut scratch = Vec::new();
    for _ in 0..events {
        scratch.clear();
        let site = rng.site_in(w.left, w.right);
        avalanche_apply_mark_into(eta, site, &mut scratch);
    }
}

/// Runs the avalanche process for continuous time `duration`; every window
/// site carries a rate-1 clock. Returns the number of marks applied.
pub fn run_avalanche_for(eta: &mut Config, duration: f64, rng: &mut RngStream) -> u64 {
    let w = eta.window();
    let rate = w.width() as f64;
    let mut t = rng.exponential(rate);
    let mut applied = 0;
    let mut scratch = Vec::new();
    while t <= duration {
        scratch.clear();
        let site = rng.site_in(w.left, w.right);
        avalanche_apply_mark_into(eta, site, &mut scratch);
        applied += 1;
        t += rng.exponential(rate);
    }
    applied
}

/// Which component of a coupled state a change refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Zeta,
    Eta,
    First,
    Second,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteChange {
    pub site: SiteIndex,
    pub layer: Layer,
    pub state: SiteState,
}

/// One event of a sparse trajectory: the mark plus the sites it changed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub ordinal: u64,
    pub site: SiteIndex,
    pub color: Color,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    pub changed_sites: Vec<SiteChange>,
}

/// Bernoulli component `zeta` dominating avalanche component `eta`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoupledState {
    pub zeta: Config,
    pub eta: Config,
}

impl CoupledState {
    pub fn new(zeta: Config, eta: Config) -> Result<Self> {
        if zeta.window() != eta.window() {
            return Err(Error::WindowMismatch);
        }
        if let Some(site) = zeta
            .window()
            .sites()
            .find(|&s| eta.is_occupied(s) && !zeta.is_occupied(s))
        {
            return Err(Error::DominationViolated { site });
        }
        Ok(Self { zeta, eta })
    }

    pub fn is_dominated(&self) -> bool {
        self.eta.dominated_by(&self.zeta)
    }

    fn apply(&mut self, changes: &[SiteChange]) {
        for c in changes {
            match c.layer {
                Layer::Zeta => self.zeta.set(c.site, c.state),
                Layer::Eta => self.eta.set(c.site, c.state),
                _ => unreachable!("pair layers in a Bernoulli-avalanche trajectory"),
            }
        }
    }
}

/// One mark of the coupled Bernoulli-avalanche graphical construction.
///
/// Black marks drive `zeta` (flip) and `eta` (kill the run on an occupied
/// site, fill a vacant site only when `zeta` was vacant too). A grey mark
/// fills a vacant `eta` site exactly when `zeta` is occupied there.
pub fn coupled_step(state: &mut CoupledState, mark: &Mark) -> Result<Vec<SiteChange>> {
    let i = mark.site;
    let zeta_occ = state.zeta.is_occupied(i);
    let eta_occ = state.eta.is_occupied(i);
    if eta_occ && !zeta_occ {
        return Err(Error::CouplingBroken { site: i });
    }
    let mut changes = Vec::new();
    match mark.color {
        Color::Black if zeta_occ => {
            state.zeta.set(i, SiteState::Vacant);
            changes.push(SiteChange {
                site: i,
                layer: Layer::Zeta,
                state: SiteState::Vacant,
            });
            if eta_occ {
                for k in avalanche_apply_mark(&mut state.eta, i) {
                    changes.push(SiteChange {
                        site: k,
                        layer: Layer::Eta,
                        state: SiteState::Vacant,
                    });
                }
            }
        }
        Color::Black => {
            state.zeta.set(i, SiteState::Occupied);
            state.eta.set(i, SiteState::Occupied);
            changes.push(SiteChange {
                site: i,
                layer: Layer::Zeta,
                state: SiteState::Occupied,
            });
            changes.push(SiteChange {
                site: i,
                layer: Layer::Eta,
                state: SiteState::Occupied,
            });
        }
        Color::Grey => {
            if zeta_occ && !eta_occ {
                state.eta.set(i, SiteState::Occupied);
                changes.push(SiteChange {
                    site: i,
                    layer: Layer::Eta,
                    state: SiteState::Occupied,
                });
            }
        }
    }
    for c in &changes {
        if state.eta.is_occupied(c.site) && !state.zeta.is_occupied(c.site) {
            return Err(Error::CouplingBroken { site: c.site });
        }
    }
    Ok(changes)
}

/// Sparse trajectory: the initial state plus per-event changes.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledTrajectory {
    pub initial: CoupledState,
    pub steps: Vec<StepRecord>,
}

impl CoupledTrajectory {
    /// Every state of the run, starting with the initial one.
    pub fn states(&self) -> Vec<CoupledState> {
        let mut cur = self.initial.clone();
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        out.push(cur.clone());
        for step in &self.steps {
            cur.apply(&step.changed_sites);
            out.push(cur.clone());
        }
        out
    }

    pub fn final_state(&self) -> CoupledState {
        let mut cur = self.initial.clone();
        for step in &self.steps {
            cur.apply(&step.changed_sites);
        }
        cur
    }

    /// JSON lines, one event per line.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for step in &self.steps {
            out.push_str(&serde_json::to_string(step).expect("serializable step"));
            out.push('\n');
        }
        out
    }
}

/// Folds [`coupled_step`] over a log, checking domination at every event.
pub fn run_coupled(zeta0: &Config, eta0: &Config, log: &EventLog) -> Result<CoupledTrajectory> {
    let initial = CoupledState::new(zeta0.clone(), eta0.clone())?;
    let mut state = initial.clone();
    let mut steps = Vec::with_capacity(log.marks.len());
    for mark in &log.marks {
        let changed_sites = coupled_step(&mut state, mark)?;
        steps.push(StepRecord {
            ordinal: mark.ordinal,
            site: mark.site,
            color: mark.color,
            time: mark.time,
            changed_sites,
        });
    }
    Ok(CoupledTrajectory { initial, steps })
}

/// Two Bernoulli processes coupled site by site.
#[derive(Clone, Debug, PartialEq)]
pub struct PairTrajectory {
    pub first: Config,
    pub second: Config,
    pub steps: Vec<StepRecord>,
    /// Per site, the time (or ordinal in event mode) at which the two
    /// components first agree; absent if they never do within the log.
    pub coalescence: HashMap<SiteIndex, f64>,
}

impl PairTrajectory {
    pub fn states(&self) -> Vec<(Config, Config)> {
        let mut a = self.first.clone();
        let mut b = self.second.clone();
        let mut out = vec![(a.clone(), b.clone())];
        for step in &self.steps {
            for c in &step.changed_sites {
                match c.layer {
                    Layer::First => a.set(c.site, c.state),
                    Layer::Second => b.set(c.site, c.state),
                    _ => unreachable!(),
                }
            }
            out.push((a.clone(), b.clone()));
        }
        out
    }
}

/// Coupled pair of Bernoulli processes. Black marks form the family `N`, grey
/// marks the family `V`. Where the components differ, the first follows `N`
/// and the second follows `V`; once they agree they both follow `N`.
pub fn run_coupled_bernoulli_pair(
    zeta0_1: &Config,
    zeta0_2: &Config,
    log: &EventLog,
) -> Result<PairTrajectory> {
    if zeta0_1.window() != zeta0_2.window() {
        return Err(Error::WindowMismatch);
    }
    let mut a = zeta0_1.clone();
    let mut b = zeta0_2.clone();
    let mut coalescence = HashMap::new();
    for site in a.window().sites() {
        if a.get(site) == b.get(site) {
            coalescence.insert(site, 0.0);
        }
    }
    let mut steps = Vec::with_capacity(log.marks.len());
    for mark in &log.marks {
        let i = mark.site;
        let mut changed_sites = Vec::new();
        let agree = a.get(i) == b.get(i);
        let mut flip = |cfg: &mut Config, layer: Layer| {
            let new = cfg.get(i).flipped();
            cfg.set(i, new);
            changed_sites.push(SiteChange {
                site: i,
                layer,
                state: new,
            });
        };
        match (mark.color, agree) {
            (Color::Black, true) => {
                flip(&mut a, Layer::First);
                flip(&mut b, Layer::Second);
            }
            (Color::Black, false) => flip(&mut a, Layer::First),
            (Color::Grey, false) => flip(&mut b, Layer::Second),
            (Color::Grey, true) => {}
        }
        if !agree && a.get(i) == b.get(i) {
            coalescence.insert(i, mark.time.unwrap_or(mark.ordinal as f64));
        }
        debug_assert!(!agree || a.get(i) == b.get(i), "coalescence must be absorbing");
        steps.push(StepRecord {
            ordinal: mark.ordinal,
            site: i,
            color: mark.color,
            time: mark.time,
            changed_sites,
        });
    }
    Ok(PairTrajectory {
        first: zeta0_1.clone(),
        second: zeta0_2.clone(),
        steps,
        coalescence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Config {
        text.parse().unwrap()
    }

    fn mark(site: i64, color: Color) -> Mark {
        Mark {
            site,
            color,
            ordinal: 1,
            time: None,
        }
    }

    #[test]
    fn bernoulli_parity() {
        let z0 = cfg("[0,2]:101");
        let counts = HashMap::from([(0, 2), (1, 3), (2, 1)]);
        assert_eq!(evolve_bernoulli(&z0, &counts).to_string(), "[0,2]:110");
        assert_eq!(evolve_bernoulli(&z0, &HashMap::new()), z0);
    }

    #[test]
    fn avalanche_mark_cases() {
        let mut eta = cfg("[0,6]:0111110");
        assert_eq!(avalanche_apply_mark(&mut eta, 2), vec![1, 2, 3, 4, 5]);
        assert_eq!(eta.to_string(), "[0,6]:0000000");

        let mut eta = cfg("[0,4]:00100");
        assert_eq!(avalanche_apply_mark(&mut eta, 0), vec![0]);
        assert_eq!(eta.to_string(), "[0,4]:10100");
        assert_eq!(avalanche_apply_mark(&mut eta, 2), vec![2]);
        assert_eq!(eta.to_string(), "[0,4]:10000");
    }

    #[test]
    fn coupled_step_rules() {
        // grey fills a vacant eta site under an occupied zeta site
        let mut s = CoupledState::new(cfg("[0,2]:010"), cfg("[0,2]:000")).unwrap();
        coupled_step(&mut s, &mark(1, Color::Grey)).unwrap();
        assert_eq!(s.eta.to_string(), "[0,2]:010");

        // grey on a vacant zeta site does nothing
        let mut s = CoupledState::new(cfg("[0,2]:010"), cfg("[0,2]:000")).unwrap();
        assert!(coupled_step(&mut s, &mark(0, Color::Grey)).unwrap().is_empty());

        // black on a doubly occupied site clears zeta there and the eta run
        let mut s = CoupledState::new(cfg("[0,3]:1111"), cfg("[0,3]:0111")).unwrap();
        coupled_step(&mut s, &mark(2, Color::Black)).unwrap();
        assert_eq!(s.zeta.to_string(), "[0,3]:1101");
        assert_eq!(s.eta.to_string(), "[0,3]:0000");

        // black on a vacant zeta site fills both
        let mut s = CoupledState::new(cfg("[0,1]:00"), cfg("[0,1]:00")).unwrap();
        coupled_step(&mut s, &mark(1, Color::Black)).unwrap();
        assert_eq!((s.zeta.to_string(), s.eta.to_string()), ("[0,1]:01".into(), "[0,1]:01".into()));

        // black on zeta-occupied, eta-vacant site only empties zeta
        let mut s = CoupledState::new(cfg("[0,1]:11"), cfg("[0,1]:01")).unwrap();
        coupled_step(&mut s, &mark(0, Color::Black)).unwrap();
        assert_eq!((s.zeta.to_string(), s.eta.to_string()), ("[0,1]:01".into(), "[0,1]:01".into()));
    }

    #[test]
    fn broken_input_detected() {
        let mut s = CoupledState {
            zeta: cfg("[0,1]:00"),
            eta: cfg("[0,1]:10"),
        };
        assert_eq!(
            coupled_step(&mut s, &mark(0, Color::Grey)),
            Err(Error::CouplingBroken { site: 0 })
        );
        assert_eq!(
            run_coupled(&cfg("[0,1]:00"), &cfg("[0,1]:10"), &EventLog {
                window: Window::new(0, 1).unwrap(),
                horizon: Horizon::Events(0),
                marks: vec![],
            }),
            Err(Error::DominationViolated { site: 0 })
        );
    }

    #[test]
    fn empty_log_keeps_initial_state() {
        let mut rng = RngStream::new(1, 1);
        let w = Window::new(0, 4).unwrap();
        let log = generate_event_log(w, Horizon::Events(0), &mut rng).unwrap();
        assert!(log.marks.is_empty());
        let traj = run_coupled(&cfg("[0,4]:11010"), &cfg("[0,4]:10000"), &log).unwrap();
        assert_eq!(traj.states().len(), 1);
    }

    #[test]
    fn event_log_ordinals_are_contiguous() {
        let mut rng = RngStream::new(2, 1);
        let w = Window::new(-3, 3).unwrap();
        let log = generate_event_log(w, Horizon::Events(50), &mut rng).unwrap();
        assert!(log.marks.iter().enumerate().all(|(k, m)| m.ordinal == k as u64 + 1));
        assert!(log.marks.iter().all(|m| w.contains(m.site)));
        let timed = generate_event_log(w, Horizon::Time(5.0), &mut rng).unwrap();
        assert!(timed
            .marks
            .windows(2)
            .all(|p| p[0].time.unwrap() < p[1].time.unwrap()));
    }

    #[test]
    fn pair_with_equal_starts_stays_equal() {
        let mut rng = RngStream::new(3, 1);
        let w = Window::new(0, 5).unwrap();
        let log = generate_event_log(w, Horizon::Events(200), &mut rng).unwrap();
        let z = cfg("[0,5]:101100");
        let pair = run_coupled_bernoulli_pair(&z, &z, &log).unwrap();
        assert!(pair.states().iter().all(|(a, b)| a == b));
    }

    #[test]
    fn json_line_shape() {
        let mut s = CoupledState::new(cfg("[0,1]:00"), cfg("[0,1]:00")).unwrap();
        let changes = coupled_step(&mut s, &mark(1, Color::Black)).unwrap();
        let rec = StepRecord {
            ordinal: 1,
            site: 1,
            color: Color::Black,
            time: None,
            changed_sites: changes,
        };
        let line = serde_json::to_string(&rec).unwrap();
        assert_eq!(
            line,
            r#"{"ordinal":1,"site":1,"color":"black","changed_sites":[{"site":1,"layer":"zeta","state":"Occupied"},{"site":1,"layer":"eta","state":"Occupied"}]}"#
        );
    }
}
