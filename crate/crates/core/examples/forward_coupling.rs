//! Runs the coupled Bernoulli/avalanche process from a Bernoulli start and
//! shows both layers after every tenth mark.

use avalanche::forward::{generate_event_log, run_coupled, Horizon};
use avalanche::lattice::sample_bernoulli_config;
use avalanche::{Config, RngStream, Window};

fn main() -> avalanche::Result<()> {
    let window = Window::centered(15);
    let mut rng = RngStream::new(2, 0);
    let lazy = sample_bernoulli_config(window, &mut rng)?;
    let zeta0 = Config::from_states(window.left, lazy.states().collect());
    let log = generate_event_log(window, Horizon::Time(3.0), &mut rng)?;
    let traj = run_coupled(&zeta0, &Config::vacant(window), &log)?;
    for (n, s) in traj.states().iter().enumerate().step_by(10) {
        assert!(s.is_dominated());
        println!("{n:4}  zeta {}  eta {}", s.zeta, s.eta);
    }
    Ok(())
}
