//! Draws exact samples of the invariant law on a window and prints them.

use avalanche::sampler::{Sampler, Variant};
use avalanche::RngStream;

fn main() -> avalanche::Result<()> {
    let mut sampler = Sampler::new(Variant::Step1Prime);
    let mut rng = RngStream::new(1, 0);
    for _ in 0..10 {
        let s = sampler.sample(20, &mut rng)?;
        println!("{}  T = {:5}  width = {}", s.config, s.events, s.domain_width);
    }
    Ok(())
}
