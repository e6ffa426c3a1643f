//! Computes eigenvalues of the linearized pencil nearest a shift.
//!
//! `cargo run --release --example stability_spectrum -- 0.1 0.3 6`

use babenko::continuation::{trace_branch, ContinuationConfig};
use babenko::spectrum::{eigen_near, PencilOperators};
use num_complex::Complex64;

fn main() -> babenko::Result<()> {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("number"))
        .collect();
    let s = args.first().copied().unwrap_or(0.1);
    let sigma = Complex64::new(0.0, args.get(1).copied().unwrap_or(0.3));
    let k = args.get(2).map_or(6, |&k| k as usize);
    let trace = trace_branch(&ContinuationConfig::default(), s)?;
    let wave = trace.waves.last().expect("nonempty");
    let result = eigen_near(&PencilOperators::new(wave), sigma, k)?;
    println!("s = {:.6}  c = {:.10}  N = {}  shift = {sigma}", wave.s, wave.c, wave.n());
    for p in &result.pairs {
        println!("{:+.12} {:+.12}i   residual {:.1e}", p.lambda.re, p.lambda.im, p.residual);
    }
    Ok(())
}
