//! Raw random-walk patches have dot products that grow with time; differenced
//! patches do not. Compares Monte Carlo with the closed form over t.
//!
//! cargo run --release --example spurious_attention

use timebridge::synth::{monte_carlo_patch_score, spurious_score_expectation};

fn main() -> timebridge::Result<()> {
    let (s, i, j) = (8, 0, 16);
    println!(
        "{:>5} {:>10} {:>10} {:>10}",
        "t", "expected", "raw MC", "diff MC"
    );
    for t in [0, 25, 50, 100, 200, 400] {
        let raw = monte_carlo_patch_score(s, t, i, j, 1.0, false, 20_000, t as u64)?;
        let diff = monte_carlo_patch_score(s, t, i, j, 1.0, true, 20_000, t as u64)?;
        println!(
            "{t:>5} {:>10.1} {:>10.1} {:>10.3}",
            spurious_score_expectation(s, t, i, j, 1.0),
            raw.mean,
            diff.mean
        );
    }
    Ok(())
}
