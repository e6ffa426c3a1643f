//! Builds the Jordan chain at a generic steepness and at the first momentum
//! extremum, and reports the size of the generalized kernel.
//!
//! `cargo run --release --example jordan_chain`

use babenko::conserved::refine_extremum;
use babenko::continuation::{trace_branch, ContinuationConfig};
use babenko::jordan::{build_chain, generalized_kernel_dimension};
use babenko::{NewtonConfig, StokesWave};

fn report(label: &str, wave: &StokesWave) -> babenko::Result<()> {
    let chain = build_chain(wave)?;
    let dim = generalized_kernel_dimension(wave, &chain, &Default::default());
    println!(
        "{label}: s = {:.11}  D = {:+.3e}  B = {:.6}  residuals = {:.1e}/{:.1e}  kernel dimension = {dim}",
        wave.s, chain.d, chain.b_coeff, chain.residuals[1], chain.residuals[2]
    );
    Ok(())
}

fn main() -> babenko::Result<()> {
    let trace = trace_branch(&ContinuationConfig::default(), 0.1366)?;
    let generic = trace
        .waves
        .iter()
        .find(|w| w.s >= 0.1)
        .expect("branch passes s = 0.1");
    report("generic ", generic)?;
    let cp = refine_extremum(trace.waves.last().expect("nonempty"), 0.1366035, &NewtonConfig::default())?;
    report("extremum", &cp.wave)
}
