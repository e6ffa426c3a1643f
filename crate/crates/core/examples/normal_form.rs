//! Compares the predicted eigenvalue splitting near the first momentum
//! extremum with eigenvalues measured on neighbouring waves.
//!
//! `cargo run --release --example normal_form`

use babenko::cli::{fitted_slope, splitting_table};
use babenko::conserved::refine_extremum;
use babenko::continuation::{trace_branch, ContinuationConfig};
use babenko::jordan::{build_chain, NormalFormPrediction};
use babenko::NewtonConfig;

fn main() -> babenko::Result<()> {
    let trace = trace_branch(&ContinuationConfig::default(), 0.1366)?;
    let cp = refine_extremum(trace.waves.last().expect("nonempty"), 0.1366035, &NewtonConfig::default())?;
    let chain = build_chain(&cp.wave)?;
    let pred = NormalFormPrediction::from_branch(cp.wave.c, cp.wave.s, cp.p_doubleprime, chain.b_coeff)?;
    println!("c0 = {:.10}  B = {:.5}  predicted slope = {:.4}", cp.wave.c, chain.b_coeff, pred.slope());
    let eps = [-2e-5, -1e-5, 1e-5, 2e-5];
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let rows = splitting_table(&cp.wave, &pred, &eps, threads)?;
    for r in &rows {
        println!("eps = {:+.2e}  lambda^2 = {:+.6e}  predicted = {:+.6e}", r.eps, r.measured, r.predicted);
    }
    println!("fitted slope = {:.4}", fitted_slope(&rows));
    Ok(())
}
