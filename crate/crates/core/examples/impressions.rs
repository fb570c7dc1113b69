//! Scores a cited answer for every source and reports how sensitive an
//! instance is to the choice of rewriting strategy.
//!
//!     cargo run --example impressions

use geo_evolve::impressions::{compute_all_impressions, normalize_shares, sensitivity_profile};
use geo_evolve::parse_cited_answer;

fn main() -> geo_evolve::Result<()> {
    let raw = "Tidal power is predictable because tides follow the moon [1]. \
               Turbines sit in narrow channels where currents are fastest [2][1]. \
               Costs remain high compared with offshore wind [3]. \
               Several pilot plants operate in Europe and Korea [2].";
    let answer = parse_cited_answer(raw, 3);
    let scores = compute_all_impressions(&answer, 3);
    let shares = normalize_shares(&scores);
    println!("{:<6} {:>8} {:>8} {:>8} {:>8}", "source", "word", "pos", "overall", "share");
    for (i, (s, n)) in scores.iter().zip(&shares).enumerate() {
        println!("[{}]    {:>8.3} {:>8.3} {:>8.3} {:>8.3}", i + 1, s.word, s.pos, s.overall, n.overall);
    }

    // Overall impressions of one document after each of nine rewrites.
    let after_rewrites = [4.1, 3.9, 12.0, 4.0, 11.5, 3.8, 4.2, 4.4, 3.7];
    let p = sensitivity_profile(&after_rewrites)?;
    println!("\nmax gain {:.2}, sensitivity {:.3}", p.max_gain, p.sensitivity);
    Ok(())
}
