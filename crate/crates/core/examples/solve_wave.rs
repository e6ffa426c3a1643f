//! Traces the wave family up to a target steepness and prints the final wave.
//!
//! `cargo run --release --example solve_wave -- 0.13660354990`

use std::time::Instant;

use babenko::conserved::{wave_energy, wave_momentum};
use babenko::continuation::{trace_branch_observed, ContinuationConfig};

fn main() -> babenko::Result<()> {
    let s: f64 = std::env::args()
        .nth(1)
        .map(|a| a.parse().expect("steepness"))
        .unwrap_or(0.1);
    let t0 = Instant::now();
    let cfg = ContinuationConfig::default();
    let trace = trace_branch_observed(&cfg, s, |p| {
        eprintln!(
            "{:8.2}s  s = {:.11}  c = {:.10}  N = {}",
            t0.elapsed().as_secs_f64(),
            p.s,
            p.c,
            p.n
        );
    })?;
    let w = trace.waves.last().expect("at least the flat state");
    println!("s        = {:.11}", w.s);
    println!("c        = {:.10}", w.c);
    println!("H        = {:.11}", wave_energy(w));
    println!("P        = {:.11}", wave_momentum(w));
    println!("residual = {:.3e}", w.residual_norm);
    println!("N        = {}", w.n());
    Ok(())
}
