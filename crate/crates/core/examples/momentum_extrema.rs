//! Locates the first momentum extremum along the branch and refines it.
//!
//! `cargo run --release --example momentum_extrema`

use babenko::conserved::{find_momentum_extrema, refine_extremum};
use babenko::continuation::{trace_branch, ContinuationConfig};
use babenko::NewtonConfig;

fn main() -> babenko::Result<()> {
    let trace = trace_branch(&ContinuationConfig::default(), 0.138)?;
    let extrema = find_momentum_extrema(&trace.branch);
    for e in &extrema {
        println!(
            "interpolated: s* = {:.11}  c* = {:.10}  P = {:.11}  P'' = {:.4}",
            e.s, e.c, e.p, e.d2p_dc2
        );
    }
    let Some(first) = extrema.first() else {
        println!("no extremum below s = 0.138");
        return Ok(());
    };
    let near = trace
        .waves
        .iter()
        .min_by(|a, b| (a.s - first.s).abs().total_cmp(&(b.s - first.s).abs()))
        .expect("nonempty trace");
    let cp = refine_extremum(near, first.s, &NewtonConfig::default())?;
    println!(
        "refined:      s* = {:.11}  c* = {:.10}  P'(c) = {:.2e}  P'' = {:.4}",
        cp.wave.s, cp.wave.c, cp.p_prime, cp.p_doubleprime
    );
    Ok(())
}
