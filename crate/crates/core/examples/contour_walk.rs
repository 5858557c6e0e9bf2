//! Contour pairs around the origin and the first-jump increment of the
//! dominating walk.

use avalanche::contour::{analytic_increment_constants, run_until_meet, sample_y1};
use avalanche::harness::stats::mean_estimate;
use avalanche::{Config, RngStream, SiteCoins, Window};

fn main() -> avalanche::Result<()> {
    let mut rng = RngStream::new(3, 0);
    for _ in 0..5 {
        let zeta0 = Config::lazy(Window::centered(0), SiteCoins::from_stream(&mut rng));
        let m = run_until_meet(zeta0, 0, &mut rng)?;
        println!(
            "met after {:3} events (t = {:.3}), box [{}, {}]",
            m.rho_events, m.rho_time, m.l_min, m.r_max
        );
    }
    let draws: Vec<f64> = (0..200_000).map(|_| sample_y1(&mut rng) as f64).collect();
    let mean = mean_estimate(&draws);
    println!("E[Y1] ~ {:.4} +- {:.4}", mean.value, mean.se);
    println!("{:?}", analytic_increment_constants());
    Ok(())
}
