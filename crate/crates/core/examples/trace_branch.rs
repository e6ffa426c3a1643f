//! Traces the branch to a target steepness and writes it as CSV.
//!
//! `cargo run --release --example trace_branch -- 0.138 branch.csv`

use std::path::PathBuf;

use babenko::continuation::{trace_branch, ContinuationConfig};
use babenko::store::save_branch;

fn main() -> babenko::Result<()> {
    let mut args = std::env::args().skip(1);
    let target: f64 = args.next().map_or(0.12, |a| a.parse().expect("steepness"));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "branch.csv".into()));
    let trace = trace_branch(&ContinuationConfig::default(), target)?;
    for p in trace.branch.points.iter().step_by(10) {
        println!("s = {:.6}  c = {:.10}  P = {:.10}  N = {}", p.s, p.c, p.p, p.n);
    }
    save_branch(&trace.branch, &out)?;
    println!("{} points written to {}", trace.branch.points.len(), out.display());
    Ok(())
}
