//! Saves a wave with its checksum, reloads it, and shows that a corrupted
//! file is rejected.
//!
//! `cargo run --release --example artifacts`

use babenko::continuation::{trace_branch, ContinuationConfig};
use babenko::store::{load_wave, save_wave};

fn main() -> babenko::Result<()> {
    let dir = std::env::temp_dir().join("babenko-artifacts-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("wave.json");
    let trace = trace_branch(&ContinuationConfig::default(), 0.08)?;
    let wave = trace.waves.last().expect("nonempty");
    let checksum = save_wave(wave, &path)?;
    println!("saved {} (sha256 {checksum})", path.display());
    let back = load_wave(&path)?;
    println!("reloaded: s = {:.11}  c = {:.12}  N = {}", back.s, back.c, back.n());
    let text = std::fs::read_to_string(&path)?;
    std::fs::write(&path, &text[..text.len() / 2])?;
    match load_wave(&path) {
        Ok(_) => println!("truncated file unexpectedly accepted"),
        Err(e) => println!("truncated file rejected: {e}"),
    }
    Ok(())
}
