//! Times the two forward-pass variants on the same window.

use avalanche::harness::bench_variants;

fn main() -> avalanche::Result<()> {
    let report = bench_variants(3, 20_000, 5)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    Ok(())
}
