//! Command-line front end. Machine-readable results go to stdout, progress
//! and diagnostics to stderr. Exit codes: 0 success, 1 usage or input error,
//! 2 numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use num_complex::Complex64;

use crate::babenko::{newton_solve, stokes_expansion, NewtonConfig, StokesWave};
use crate::conserved::{find_momentum_extrema, refine_extremum, wave_energy, wave_momentum};
use crate::continuation::{
    trace_branch, trace_branch_observed, ContinuationConfig, ContinuationMode, LIMITING_STEEPNESS,
};
use crate::error::{Error, Result};
use crate::jordan::{build_chain, generalized_kernel_dimension, predict_splitting, NormalFormPrediction};
use crate::spectrum::{eigen_near_with, EigenConfig, PencilOperators, DEFAULT_SEED};
use crate::store::{self, ArtifactIndex, ArtifactKind, ExtremumEntry, IndexEntry};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

/// `|𝓓|` below which a wave is treated as a momentum extremum.
pub const EXTREMUM_D_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "babenko", version, about = "Stokes waves, their branch and co-periodic stability")]
pub struct CommandConfig {
    /// Workspace root for relative paths and index.json (overrides $BABENKO_WORKSPACE).
    #[arg(long, global = true)]
    pub workspace: Option<PathBuf>,
    /// Worker threads for commands that process independent waves.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one wave at a given steepness or speed.
    Solve(SolveArgs),
    /// Trace the wave branch from flat water.
    Branch(BranchArgs),
    /// Build the Jordan chain of the zero eigenvalue.
    Jordan(JordanArgs),
    /// Eigenvalues of the stability pencil near a shift.
    Spectrum(SpectrumArgs),
    /// Compare measured and predicted eigenvalue splitting near an extremum.
    Normalform(NormalFormArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("target").required(true).args(["steepness", "speed"])))]
pub struct SolveArgs {
    #[arg(long)]
    pub steepness: Option<f64>,
    #[arg(long)]
    pub speed: Option<f64>,
    /// Grid size of the returned wave.
    #[arg(long)]
    pub modes: Option<usize>,
    #[arg(long, default_value_t = 1e-13)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BranchArgs {
    #[arg(long)]
    pub to: f64,
    #[arg(long, default_value = "steepness")]
    pub mode: String,
    #[arg(long, default_value = "branch")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 16384)]
    pub max_modes: usize,
    #[arg(long, default_value_t = 0.004)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-13)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct JordanArgs {
    #[arg(long)]
    pub wave: PathBuf,
    /// Branch CSV or branch directory used to locate the extremum.
    #[arg(long)]
    pub branch: Option<PathBuf>,
    #[arg(long, default_value = "chain")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub wave: PathBuf,
    /// Shift as `re,im`.
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: String,
    #[arg(long, default_value_t = 6)]
    pub num: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NormalFormArgs {
    /// Steepness of the momentum extremum.
    #[arg(long)]
    pub critical: f64,
    /// Branch directory (with wave files) or branch CSV.
    #[arg(long)]
    pub branch: Option<PathBuf>,
    /// Comma-separated speed offsets from the critical speed.
    #[arg(long, allow_hyphen_values = true)]
    pub eps_list: String,
    #[arg(long, default_value = "normalform.csv")]
    pub out: PathBuf,
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match CommandConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&config) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence { .. }
        | Error::SingularJacobian { .. }
        | Error::FoldPoint { .. }
        | Error::StepFailure { .. }
        | Error::SolvabilityViolation { .. }
        | Error::DegenerateExtremum { .. }
        | Error::IterationFailure { .. }
        | Error::ArnoldiBreakdown(_)
        | Error::InnerSolveFailure { .. } => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

struct Context {
    root: PathBuf,
    threads: usize,
}

impl Context {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    fn record(&self, entries: Vec<IndexEntry>) -> Result<()> {
        let mut index = ArtifactIndex::load(&self.root)?;
        for e in entries {
            index.record(&self.root, e);
        }
        index.save(&self.root)
    }
}

fn entry(kind: ArtifactKind, path: &Path, wave: Option<&StokesWave>, checksum: Option<String>) -> IndexEntry {
    IndexEntry {
        kind,
        path: path.to_string_lossy().into_owned(),
        s: wave.map(|w| w.s),
        c: wave.map(|w| w.c),
        n: wave.map(StokesWave::n),
        checksum,
    }
}

pub fn execute(config: &CommandConfig) -> Result<()> {
    let ctx = Context {
        root: config.workspace.clone().unwrap_or_else(store::workspace_root),
        threads: config
            .threads
            .map(usize::from)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
    };
    match &config.command {
        Command::Solve(a) => cmd_solve(&ctx, a),
        Command::Branch(a) => cmd_branch(&ctx, a),
        Command::Jordan(a) => cmd_jordan(&ctx, a),
        Command::Spectrum(a) => cmd_spectrum(&ctx, a),
        Command::Normalform(a) => cmd_normalform(&ctx, a),
    }
}

fn out_line(line: &str) {
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{line}");
}

fn check_modes(n: usize) -> Result<()> {
    crate::grid::GridFunction::zeros(n).map(|_| ())
}

/// Wave at steepness `s` on `n` modes: continuation from flat water, then a
/// re-solve on the requested grid.
fn wave_at_steepness(s: f64, n: Option<usize>, tol: f64) -> Result<StokesWave> {
    let n_req = n.unwrap_or(0);
    let config = ContinuationConfig {
        tol,
        max_modes: n.unwrap_or(16384).max(256),
        start_modes: 256.min(n.unwrap_or(256)),
        ..ContinuationConfig::default()
    };
    let trace = trace_branch_observed(&config, s, |p| {
        eprintln!("  s={:.11} c={:.10} N={}", p.s, p.c, p.n);
    })?;
    let wave = trace.waves.last().expect("nonempty trace").clone();
    if n_req > 0 && wave.n() != n_req {
        wave.resampled(n_req, &NewtonConfig::with_tol(tol))
    } else {
        Ok(wave)
    }
}

fn cmd_solve(ctx: &Context, a: &SolveArgs) -> Result<()> {
    if let Some(n) = a.modes {
        check_modes(n)?;
    }
    if !(a.tol >= 1e-14) {
        return Err(Error::InvalidArgument(format!("tol {} below 1e-14", a.tol)));
    }
    let wave = if let Some(s) = a.steepness {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::InvalidArgument(format!("steepness {s} must be non-negative")));
        }
        if s >= LIMITING_STEEPNESS {
            // no wave exists: a numerical, not a usage, failure
            return Err(Error::NonConvergence {
                iterations: 0,
                residual: f64::INFINITY,
            });
        }
        if s == 0.0 {
            StokesWave::flat(a.modes.unwrap_or(256), 1.0)?
        } else {
            wave_at_steepness(s, a.modes, a.tol)?
        }
    } else {
        let c = a.speed.expect("group requires one target");
        if !(c >= 1.0) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("speed {c} must be at least 1")));
        }
        let n = a.modes.unwrap_or(256);
        if c == 1.0 {
            StokesWave::flat(n, 1.0)?
        } else {
            // Stokes expansion guess on the low-steepness side of the branch
            let amp = (c * c - 1.0).sqrt();
            let (eta0, _) = stokes_expansion(n, amp)?;
            let wave = newton_solve(&eta0, c, a.tol)?;
            if wave.eta.max_abs() < 1e-12 {
                return Err(Error::NonConvergence {
                    iterations: 0,
                    residual: f64::NAN,
                });
            }
            wave
        }
    };
    out_line(&format!(
        "s={:.14} c={:.14} residual={:.3e} N={} H={:.14} P={:.14}",
        wave.s,
        wave.c,
        wave.residual_norm,
        wave.n(),
        wave_energy(&wave),
        wave_momentum(&wave)
    ));
    if let Some(out) = &a.out {
        let path = ctx.resolve(out);
        let sum = store::save_wave(&wave, &path)?;
        ctx.record(vec![entry(ArtifactKind::Wave, &path, Some(&wave), Some(sum))])?;
    }
    Ok(())
}

fn cmd_branch(ctx: &Context, a: &BranchArgs) -> Result<()> {
    let mode: ContinuationMode = a.mode.parse()?;
    let config = ContinuationConfig {
        mode,
        step: a.step,
        tol: a.tol,
        max_modes: a.max_modes,
        ..ContinuationConfig::default()
    };
    config.validate()?;
    if !(a.to > 0.0) {
        return Err(Error::InvalidArgument(format!("target steepness {} must be positive", a.to)));
    }
    let dir = ctx.resolve(&a.out);
    let trace = trace_branch_observed(&config, a.to, |p| {
        eprintln!("  s={:.11} c={:.10} P={:.11} N={}", p.s, p.c, p.p, p.n);
    })?;
    let mut entries = Vec::new();
    let csv = dir.join("branch.csv");
    store::save_branch(&trace.branch, &csv)?;
    entries.push(entry(ArtifactKind::Branch, &csv, None, None));
    for (i, w) in trace.waves.iter().enumerate() {
        let path = dir.join("waves").join(format!("wave_{i:04}.json"));
        let sum = store::save_wave(w, &path)?;
        entries.push(entry(ArtifactKind::Wave, &path, Some(w), Some(sum)));
    }
    let extrema: Vec<ExtremumEntry> = find_momentum_extrema(&trace.branch)
        .into_iter()
        .map(|e| ExtremumEntry {
            s_star: e.s,
            c_star: e.c,
            P: e.p,
            H: e.h,
            d2P_dc2: e.d2p_dc2,
        })
        .collect();
    let ex_path = dir.join("extrema.json");
    let sum = store::save_extrema(&extrema, &ex_path)?;
    entries.push(entry(ArtifactKind::Extrema, &ex_path, None, Some(sum)));
    ctx.record(entries)?;
    out_line(&format!("points={} csv={}", trace.branch.len(), csv.display()));
    if extrema.is_empty() {
        out_line("extrema=0");
    }
    for e in &extrema {
        out_line(&format!(
            "extremum s*={:.11} c*={:.10} P={:.11} H={:.11} d2P_dc2={:.6e}",
            e.s_star, e.c_star, e.P, e.H, e.d2P_dc2
        ));
    }
    Ok(())
}

fn load_branch_arg(ctx: &Context, p: &Path) -> Result<(crate::continuation::Branch, Option<PathBuf>)> {
    let p = ctx.resolve(p);
    if p.is_dir() {
        Ok((store::load_branch(&p.join("branch.csv"))?, Some(p.join("waves"))))
    } else {
        Ok((store::load_branch(&p)?, None))
    }
}

fn cmd_jordan(ctx: &Context, a: &JordanArgs) -> Result<()> {
    let wave = store::load_wave(&ctx.resolve(&a.wave))?;
    let branch = match &a.branch {
        Some(p) => Some(load_branch_arg(ctx, p)?.0),
        None => None,
    };
    let chain = build_chain(&wave)?;
    let dim = generalized_kernel_dimension(&wave, &chain, &Default::default());
    let extremum = chain.d.abs() <= EXTREMUM_D_TOL;
    let mut p2 = None;
    let mut lambda1_sq = None;
    if extremum {
        let guess = branch
            .as_ref()
            .and_then(|b| {
                find_momentum_extrema(b)
                    .into_iter()
                    .min_by(|x, y| (x.s - wave.s).abs().total_cmp(&(y.s - wave.s).abs()))
            })
            .map_or(wave.s, |e| e.s);
        let cp = refine_extremum(&wave, guess, &NewtonConfig::with_tol(wave.tol.max(1e-13)))?;
        let pred = NormalFormPrediction::from_branch(wave.c, wave.s, cp.p_doubleprime, chain.b_coeff)?;
        p2 = Some(pred.p2);
        lambda1_sq = Some(pred.slope());
    }
    let dir = ctx.resolve(&a.out);
    let report = store::ChainReport {
        checksum: String::new(),
        format_version: store::FORMAT_VERSION,
        s0: wave.s,
        c0: wave.c,
        n: wave.n(),
        D: chain.d,
        P2: p2,
        alpha: chain.alpha,
        B: chain.b_coeff,
        lambda1_sq,
        eta_prime_norm: chain.eta_prime_norm,
        kernel_dimension: dim,
        residuals: store::ChainResiduals {
            chain1: chain.residuals[0],
            chain2: chain.residuals[1],
            chain3: chain.residuals[2],
        },
        parity_defects: chain.parity_defects.to_vec(),
    };
    let report_path = dir.join("chain.json");
    let sum = store::save_chain_report(&report, &report_path)?;
    let mut entries = vec![entry(ArtifactKind::Chain, &report_path, Some(&wave), Some(sum))];
    let parts = [
        ("v1", &chain.v1),
        ("w1", &chain.w1),
        ("v2", &chain.v2),
        ("w2", &chain.w2),
        ("v3", &chain.v3),
        ("w3", &chain.w3),
    ];
    for (name, f) in parts {
        let path = dir.join(format!("chain_{name}.json"));
        let sum = store::save_component(f, &path)?;
        entries.push(entry(ArtifactKind::Wave, &path, None, Some(sum)));
    }
    ctx.record(entries)?;
    out_line(&format!("s0={:.11} c0={:.10} N={}", wave.s, wave.c, wave.n()));
    out_line(&format!("D={:.6e}", chain.d));
    out_line(&format!("kernel_dimension={dim}"));
    if extremum {
        out_line(&format!("alpha={:.10}", chain.alpha));
        out_line(&format!("B={:.6}", chain.b_coeff));
        out_line(&format!("P2={:.6}", p2.expect("set at extremum")));
        out_line(&format!("lambda1_sq={:.6}", lambda1_sq.expect("set at extremum")));
    } else {
        out_line("no extremum: chain terminates at length 2");
    }
    Ok(())
}

fn parse_sigma(s: &str) -> Result<Complex64> {
    let parts: Vec<&str> = s.split(',').collect();
    let bad = || Error::InvalidArgument(format!("shift `{s}` is not `re,im`"));
    match parts.as_slice() {
        [re] => Ok(Complex64::new(re.trim().parse().map_err(|_| bad())?, 0.0)),
        [re, im] => Ok(Complex64::new(
            re.trim().parse().map_err(|_| bad())?,
            im.trim().parse().map_err(|_| bad())?,
        )),
        _ => Err(bad()),
    }
}

fn cmd_spectrum(ctx: &Context, a: &SpectrumArgs) -> Result<()> {
    if a.num == 0 {
        return Err(Error::InvalidArgument("--num must be positive".into()));
    }
    let sigma = parse_sigma(&a.sigma)?;
    if sigma.norm() == 0.0 {
        return Err(Error::InvalidArgument("shift must be nonzero".into()));
    }
    let wave = store::load_wave(&ctx.resolve(&a.wave))?;
    let ops = PencilOperators::new(&wave);
    let cfg = EigenConfig {
        seed: a.seed,
        ..EigenConfig::default()
    };
    let result = eigen_near_with(&ops, sigma, a.num, &cfg)?;
    let report = store::SpectrumReport::new(&wave, &result);
    let path = ctx.resolve(a.out.as_deref().unwrap_or(Path::new("spectrum.json")));
    let sum = store::save_spectrum(&report, &path)?;
    ctx.record(vec![entry(ArtifactKind::Spectrum, &path, Some(&wave), Some(sum))])?;
    out_line("re,im,residual,constraint1,constraint2");
    for e in &report.eigenvalues {
        out_line(&format!(
            "{:.15e},{:.15e},{:.3e},{:.3e},{:.3e}",
            e.re, e.im, e.residual, e.constraint1, e.constraint2
        ));
    }
    Ok(())
}

fn parse_eps_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::InvalidArgument(format!("bad offset `{t}` in --eps-list")))
        })
        .collect()
}

/// Row of the splitting table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplittingRow {
    pub eps: f64,
    pub measured: f64,
    pub predicted: f64,
    /// `None` when both sides vanish.
    pub relative_error: Option<f64>,
}

/// Smallest nonzero eigenvalue squared of the wave at `c₀ + ε`, with the shift
/// placed on the axis where the prediction puts it.
pub fn measure_splitting(critical: &StokesWave, eps: f64, predicted: f64) -> Result<f64> {
    if eps == 0.0 {
        return Ok(0.0);
    }
    let wave = newton_solve(&critical.eta, critical.c + eps, 1e-13)?;
    let ops = PencilOperators::new(&wave);
    let r = 1.25 * predicted.abs().sqrt().max(1e-4);
    let sigma = if predicted >= 0.0 {
        Complex64::new(r, 0.0)
    } else {
        Complex64::new(0.0, r)
    };
    let result = eigen_near_with(&ops, sigma, 2, &EigenConfig::default())?;
    let nearest = result
        .pairs
        .iter()
        .min_by(|a, b| a.lambda.norm().total_cmp(&b.lambda.norm()))
        .expect("k = 2 pairs");
    Ok((nearest.lambda * nearest.lambda).re)
}

/// Measured and predicted `λ²` for each offset, processed by up to `threads`
/// workers.
pub fn splitting_table(
    critical: &StokesWave,
    pred: &NormalFormPrediction,
    eps_list: &[f64],
    threads: usize,
) -> Result<Vec<SplittingRow>> {
    let threads = threads.max(1).min(eps_list.len().max(1));
    let mut results: Vec<Option<Result<SplittingRow>>> = (0..eps_list.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunks: Vec<_> = results.chunks_mut(eps_list.len().div_ceil(threads).max(1)).collect();
        let mut start = 0;
        for chunk in chunks {
            let offset = start;
            start += chunk.len();
            scope.spawn(move || {
                for (i, slot) in chunk.iter_mut().enumerate() {
                    let eps = eps_list[offset + i];
                    *slot = Some((|| {
                        let predicted = predict_splitting(pred, eps)?;
                        let measured = measure_splitting(critical, eps, predicted)?;
                        let relative_error = if eps == 0.0 {
                            None
                        } else {
                            Some((measured - predicted).abs() / predicted.abs())
                        };
                        eprintln!("  eps={eps:e} measured={measured:.6e} predicted={predicted:.6e}");
                        Ok(SplittingRow {
                            eps,
                            measured,
                            predicted,
                            relative_error,
                        })
                    })());
                }
            });
        }
    });
    results.into_iter().map(|r| r.expect("every row computed")).collect()
}

/// Least-squares slope of `λ²` against `ε` through the origin.
pub fn fitted_slope(rows: &[SplittingRow]) -> f64 {
    let num: f64 = rows.iter().map(|r| r.eps * r.measured).sum();
    let den: f64 = rows.iter().map(|r| r.eps * r.eps).sum();
    if den > 0.0 {
        num / den
    } else {
        f64::NAN
    }
}

pub fn write_splitting_table(rows: &[SplittingRow], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["eps", "lambda_sq_measured", "lambda_sq_predicted", "relative_error"])?;
    for r in rows {
        w.write_record([
            store::format_f64(r.eps),
            store::format_f64(r.measured),
            store::format_f64(r.predicted),
            r.relative_error.map_or_else(|| "-".to_string(), store::format_f64),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_normalform(ctx: &Context, a: &NormalFormArgs) -> Result<()> {
    let eps_list = parse_eps_list(&a.eps_list)?;
    if !(a.critical > 0.0 && a.critical < LIMITING_STEEPNESS) {
        return Err(Error::InvalidArgument(format!("critical steepness {} out of range", a.critical)));
    }
    // start from the stored wave nearest the extremum when a branch directory is given
    let start = match &a.branch {
        Some(p) => {
            let (branch, waves) = load_branch_arg(ctx, p)?;
            let idx = branch
                .points
                .iter()
                .enumerate()
                .min_by(|x, y| (x.1.s - a.critical).abs().total_cmp(&(y.1.s - a.critical).abs()))
                .map(|(i, _)| i)
                .ok_or_else(|| Error::InvalidArgument("empty branch".into()))?;
            match waves {
                Some(dir) => Some(store::load_wave(&dir.join(format!("wave_{idx:04}.json")))?),
                None => None,
            }
        }
        None => None,
    };
    let start = match start {
        Some(w) => w,
        None => trace_branch(&ContinuationConfig::default(), a.critical)?
            .waves
            .pop()
            .expect("nonempty trace"),
    };
    let cp = refine_extremum(&start, a.critical, &NewtonConfig::default())?;
    let chain = build_chain(&cp.wave)?;
    let pred = NormalFormPrediction::from_branch(cp.wave.c, cp.wave.s, cp.p_doubleprime, chain.b_coeff)?;
    eprintln!(
        "critical s0={:.11} c0={:.10} P2={:.6} B={:.6}",
        cp.wave.s, cp.wave.c, pred.p2, pred.b_coeff
    );
    let rows = splitting_table(&cp.wave, &pred, &eps_list, ctx.threads)?;
    let path = ctx.resolve(&a.out);
    write_splitting_table(&rows, &path)?;
    ctx.record(vec![entry(ArtifactKind::Table, &path, Some(&cp.wave), None)])?;
    out_line("eps,lambda_sq_measured,lambda_sq_predicted,relative_error");
    for r in &rows {
        out_line(&format!(
            "{:.6e},{:.10e},{:.10e},{}",
            r.eps,
            r.measured,
            r.predicted,
            r.relative_error.map_or_else(|| "-".to_string(), |e| format!("{e:.3e}"))
        ));
    }
    if rows.iter().any(|r| r.eps != 0.0) {
        eprintln!("slope measured={:.6} predicted={:.6}", fitted_slope(&rows), pred.slope());
    }
    Ok(())
}
