use std::fs;

use babenko::babenko::NewtonConfig;
use babenko::continuation::{trace_branch, Branch, BranchPoint, ContinuationConfig};
use babenko::error::Error;
use babenko::store::{
    load_branch, load_chain_report, load_component, load_extrema, load_spectrum, load_wave,
    read_wave_file, save_branch, save_chain_report, save_component, save_extrema, save_spectrum,
    save_wave, write_wave_file, ArtifactIndex, ArtifactKind, ChainReport, ChainResiduals,
    ExtremumEntry, IndexEntry, SpectrumReport, WaveFile, BRANCH_HEADER, FORMAT_VERSION,
};
use babenko::{babenko_residual, GridFunction, StokesWave};
use tempfile::tempdir;

fn point(s: f64) -> BranchPoint {
    BranchPoint {
        s,
        c: 1.0 + s / 3.0,
        h: s * s + 0.1,
        p: (s * 7.0).sin() / 3.0,
        e: -s / 7.0,
        m_residual: 1e-17 * s,
        n: 256,
    }
}

#[test]
fn zero_wave_round_trip() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("w0.json");
    let w = StokesWave::flat(64, 1.0).unwrap();
    save_wave(&w, &path).unwrap();
    let back = load_wave(&path).unwrap();
    assert_eq!(back.eta.samples(), w.eta.samples());
    assert_eq!((back.c, back.s, back.residual_norm, back.tol), (w.c, w.s, w.residual_norm, w.tol));
}

#[test]
fn steep_wave_round_trip_is_lossless() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("w1.json");
    let trace = trace_branch(&ContinuationConfig::default(), 0.1366035499).unwrap();
    let w = trace.waves.last().unwrap();
    let sum = save_wave(w, &path).unwrap();
    assert_eq!(sum.len(), 64);
    let file = read_wave_file(&path).unwrap();
    assert_eq!(file.n, w.n());
    assert_eq!(file.coefficients.len(), w.n() / 2 + 1);
    let stored = file.coefficient_values().unwrap();
    for (a, b) in stored.iter().zip(w.eta.cosine_coefficients()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    let back = load_wave(&path).unwrap();
    assert_eq!(back.c.to_bits(), w.c.to_bits());
    let recomputed = babenko_residual(&back.eta, back.c).norm();
    assert!(recomputed <= 2.0 * w.residual_norm, "{recomputed:e} vs {:e}", w.residual_norm);
    // re-saving the loaded wave reproduces the coefficients to roundoff
    let again = dir.path().join("w1b.json");
    save_wave(&back, &again).unwrap();
    let resaved = read_wave_file(&again).unwrap().coefficient_values().unwrap();
    for (a, b) in resaved.iter().zip(&stored) {
        assert!((a - b).abs() <= 1e-16 + 1e-13 * b.abs());
    }
}

#[test]
fn truncated_file_is_a_checksum_mismatch() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("w.json");
    let (eta, c) = babenko::babenko::stokes_expansion(64, 0.1).unwrap();
    let w = babenko::solve_at_steepness(&eta, c, 0.1 / std::f64::consts::PI, &NewtonConfig::default()).unwrap();
    save_wave(&w, &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, &text[..text.len() * 2 / 3]).unwrap();
    assert!(matches!(load_wave(&path), Err(Error::ChecksumMismatch { .. })));
    // an edited digit is caught as well
    let edited = text.replacen("\"c\": 1.", "\"c\": 2.", 1);
    assert_ne!(edited, text);
    fs::write(&path, edited).unwrap();
    assert!(matches!(load_wave(&path), Err(Error::ChecksumMismatch { .. })));
}

#[test]
fn unknown_version_is_rejected() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("w.json");
    let mut file = WaveFile::from_wave(&StokesWave::flat(32, 1.0).unwrap());
    file.format_version = FORMAT_VERSION + 1;
    write_wave_file(&file, &path).unwrap();
    assert!(matches!(load_wave(&path), Err(Error::VersionUnsupported(v)) if v == FORMAT_VERSION + 1));
}

#[test]
fn invariant_violations_are_rejected_on_load() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("w.json");
    let (eta, c) = babenko::babenko::stokes_expansion(64, 0.1).unwrap();
    let w = babenko::solve_at_steepness(&eta, c, 0.1 / std::f64::consts::PI, &NewtonConfig::default()).unwrap();
    let mut file = WaveFile::from_wave(&w);
    file.s += 1e-3;
    write_wave_file(&file, &path).unwrap();
    assert!(matches!(load_wave(&path), Err(Error::InvariantViolation(_))));
    let mut file = WaveFile::from_wave(&w);
    file.coefficients.pop();
    write_wave_file(&file, &path).unwrap();
    assert!(matches!(load_wave(&path), Err(Error::InvariantViolation(_))));
}

#[test]
fn odd_components_round_trip() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("v.json");
    let f = GridFunction::from_fn(64, |u| (3.0 * u).sin() - 0.25 * (2.0 * u).cos() + 0.1).unwrap();
    save_component(&f, &path).unwrap();
    let back = load_component(&path).unwrap();
    assert!((&back - &f).max_abs() < 1e-15);
    // components are not waves
    assert!(matches!(load_wave(&path), Err(Error::InvariantViolation(_))));
}

#[test]
fn empty_branch_is_header_only() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("b.csv");
    save_branch(&Branch::default(), &path).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap().trim(), BRANCH_HEADER.join(","));
    assert!(load_branch(&path).unwrap().is_empty());
}

#[test]
fn branch_round_trip_is_exact() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("b.csv");
    let b = Branch {
        points: vec![point(0.0), point(0.1 / 3.0), point(std::f64::consts::FRAC_1_PI / 3.0)],
    };
    save_branch(&b, &path).unwrap();
    assert_eq!(load_branch(&path).unwrap(), b);
}

#[test]
fn non_monotone_branch_reports_the_line() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("b.csv");
    save_branch(&Branch { points: vec![point(0.0), point(0.02), point(0.04)] }, &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(2, 3);
    fs::write(&path, lines.join("\n")).unwrap();
    assert!(matches!(load_branch(&path), Err(Error::MonotonicityViolation { line: 4 })));
}

#[test]
fn malformed_branch_reports_the_line() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("b.csv");
    let header = BRANCH_HEADER.join(",");
    fs::write(&path, format!("{header}\n0,1,0,0,0,0,256\n0.01,x,0,0,0,0,256\n")).unwrap();
    assert!(matches!(load_branch(&path), Err(Error::Parse { line: 3, .. })));
    fs::write(&path, format!("{header}\n0,1,0,0,0,0\n")).unwrap();
    assert!(matches!(load_branch(&path), Err(Error::Parse { line: 2, .. })));
    fs::write(&path, "s,c,P\n").unwrap();
    assert!(matches!(load_branch(&path), Err(Error::Parse { line: 1, .. })));
}

#[test]
fn reports_round_trip() {
    let dir = tempdir().unwrap();
    let spec = SpectrumReport {
        checksum: String::new(),
        format_version: FORMAT_VERSION,
        s: 0.1,
        c: 1.05,
        n: 512,
        sigma: babenko::store::Complex { re: 0.0, im: 0.5 },
        seed: 7,
        eigenvalues: vec![babenko::store::EigenvalueEntry {
            re: 1e-13,
            im: 0.61,
            residual: 3e-12,
            constraint1: 1e-17,
            constraint2: 2e-17,
        }],
    };
    let p = dir.path().join("spectrum.json");
    let sum = save_spectrum(&spec, &p).unwrap();
    let back = load_spectrum(&p).unwrap();
    assert_eq!(back.checksum, sum);
    assert_eq!(SpectrumReport { checksum: String::new(), ..back }, spec);

    let chain = ChainReport {
        checksum: String::new(),
        format_version: FORMAT_VERSION,
        s0: 0.13,
        c0: 1.09,
        n: 8192,
        D: 1.5e-8,
        P2: Some(-325.0),
        alpha: -0.03,
        B: 10.1,
        lambda1_sq: Some(32.1),
        eta_prime_norm: 0.3,
        kernel_dimension: 6,
        residuals: ChainResiduals { chain1: 1e-12, chain2: 2e-12, chain3: 3e-12 },
        parity_defects: vec![1e-16; 6],
    };
    let p = dir.path().join("chain.json");
    save_chain_report(&chain, &p).unwrap();
    assert_eq!(ChainReport { checksum: String::new(), ..load_chain_report(&p).unwrap() }, chain);

    let ex = vec![ExtremumEntry { s_star: 0.1366, c_star: 1.092, P: 0.447, H: 0.465, d2P_dc2: -2045.0 }];
    let p = dir.path().join("extrema.json");
    save_extrema(&ex, &p).unwrap();
    assert_eq!(load_extrema(&p).unwrap(), ex);
}

#[test]
fn index_records_and_verifies() {
    let dir = tempdir().unwrap();
    let root = dir.path();
    let w = StokesWave::flat(32, 1.0).unwrap();
    let path = root.join("waves").join("w.json");
    let sum = save_wave(&w, &path).unwrap();
    let mut index = ArtifactIndex::load(root).unwrap();
    let entry = IndexEntry {
        kind: ArtifactKind::Wave,
        path: path.to_string_lossy().into_owned(),
        s: Some(0.0),
        c: Some(1.0),
        n: Some(32),
        checksum: Some(sum),
    };
    index.record(root, entry.clone());
    index.record(root, entry);
    assert_eq!(index.entries.len(), 1);
    assert_eq!(index.entries[0].path, "waves/w.json");
    index.save(root).unwrap();
    let loaded = ArtifactIndex::load(root).unwrap();
    assert_eq!(loaded, index);
    assert!(loaded.verify(root).is_empty());
    // replace the file behind the index's back
    save_wave(&StokesWave::flat(64, 1.0).unwrap(), &path).unwrap();
    assert_eq!(loaded.verify(root).len(), 1);
}
