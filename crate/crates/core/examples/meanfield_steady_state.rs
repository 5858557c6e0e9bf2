//! Solves the truncated steady state and relaxes a monodisperse start to it.

use avalanche::meanfield::{integrate, series_identities, steady_state, MeanFieldVector, StepControl};

fn main() -> avalanche::Result<()> {
    let s = steady_state(10_000, 1e-12)?;
    println!("g = {:.7}  (1/g = {:.5})", s.g, 1.0 / s.g);
    for k in 1..=6 {
        println!("c_{k} = {:.7}", s.c.get(k));
    }
    let id = series_identities(&s.a, s.g);
    println!("identity gaps: {:.1e} {:.1e}", id.gap_square, id.gap_linear);

    let target = steady_state(64, 1e-14)?.c;
    let tr = integrate(&MeanFieldVector::monodisperse(64)?, 12.0, StepControl::default())?;
    for (t, c) in tr.times.iter().zip(&tr.states).step_by(2) {
        println!("t = {t:5.1}  max |c - c*| = {:.2e}", c.max_abs_diff(&target));
    }
    Ok(())
}
