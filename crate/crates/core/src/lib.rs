//! Simulation and exact sampling for the one-dimensional avalanche particle
//! system.
//!
//! Sites of `Z` are vacant or occupied. A vacant site fills at rate 1; a mark
//! falling on an occupied site empties the whole occupied run containing it.
//! The crate provides
//!
//! * [`lattice`]: configurations, lazy stationary environments and primitive samplers,
//! * [`forward`]: mark-driven forward dynamics and the monotone couplings,
//! * [`contour`]: the contour processes bracketing a site and the `Y1` increment,
//! * [`sampler`]: exact (coupling-from-the-past) samples of the invariant law,
//! * [`meanfield`]: the coagulation-fragmentation mean-field model,
//! * [`harness`]: statistics, Monte-Carlo experiments and the command line.

pub mod contour;
pub mod error;
pub mod forward;
pub mod harness;
pub mod meanfield;
pub mod lattice;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use lattice::{Config, EnvPolicy, SiteIndex, SiteState, Window};
pub use rng::{RngStream, SiteCoins};
