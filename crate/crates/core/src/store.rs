//! On-disk artifacts: waves, branches, spectra, chain reports, extrema and
//! the workspace index. Floats are written with 17 significant digits, which
//! round-trips every `f64` exactly. JSON artifacts carry a SHA-256 checksum of
//! their canonical serialization (the same object with an empty checksum).

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::babenko::{steepness, StokesWave};
use crate::continuation::{Branch, BranchPoint};
use crate::error::{Error, Result};
use crate::grid::GridFunction;

pub const FORMAT_VERSION: u32 = 1;

/// Environment variable overriding the workspace root.
pub const WORKSPACE_ENV: &str = "BABENKO_WORKSPACE";

pub const BRANCH_HEADER: [&str; 7] = ["s", "c", "H", "P", "E", "M_residual", "N"];

/// 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    s.trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}"))
}

/// Artifacts whose first field is a checksum.
trait Checked: Serialize + DeserializeOwned + Clone {
    fn checksum(&self) -> &str;
    fn set_checksum(&mut self, c: String);
    fn version(&self) -> u32;
}

macro_rules! checked {
    ($t:ty) => {
        impl Checked for $t {
            fn checksum(&self) -> &str {
                &self.checksum
            }
            fn set_checksum(&mut self, c: String) {
                self.checksum = c;
            }
            fn version(&self) -> u32 {
                self.format_version
            }
        }
    };
}

fn canonical_hash<T: Checked>(value: &T) -> Result<String> {
    let mut blank = value.clone();
    blank.set_checksum(String::new());
    let bytes = serde_json::to_vec(&blank)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_checked<T: Checked>(path: &Path, value: &T) -> Result<String> {
    let mut v = value.clone();
    let sum = canonical_hash(&v)?;
    v.set_checksum(sum.clone());
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, serde_json::to_string_pretty(&v)?)?;
    Ok(sum)
}

/// The declared checksum, found without parsing the (possibly damaged) rest.
fn declared_checksum(text: &str) -> Option<String> {
    let at = text.find("\"checksum\"")?;
    let rest = &text[at + "\"checksum\"".len()..];
    let open = rest.find('"')?;
    let rest = &rest[open + 1..];
    let close = rest.find('"')?;
    Some(rest[..close].to_string())
}

fn read_checked<T: Checked>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    let declared = declared_checksum(&text);
    let value: T = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => {
            return Err(match declared {
                Some(expected) => Error::ChecksumMismatch {
                    expected,
                    found: format!("unreadable content ({e})"),
                },
                None => Error::Json(e),
            })
        }
    };
    let found = canonical_hash(&value)?;
    if found != value.checksum() {
        return Err(Error::ChecksumMismatch {
            expected: value.checksum().to_string(),
            found,
        });
    }
    if value.version() != FORMAT_VERSION {
        return Err(Error::VersionUnsupported(value.version()));
    }
    Ok(value)
}

/// Wave file contents.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WaveFile {
    pub checksum: String,
    pub format_version: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub c: f64,
    pub s: f64,
    pub residual_norm: f64,
    pub tol: f64,
    /// Cosine coefficients `a₀..a_{N/2}` of `η = Σ aₖ cos ku`.
    pub coefficients: Vec<String>,
    /// Sine coefficients `b₁..b_{N/2-1}`, present only for vector dumps with
    /// odd content; a wave never carries them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sine_coefficients: Option<Vec<String>>,
}
checked!(WaveFile);

impl WaveFile {
    pub fn from_wave(wave: &StokesWave) -> Self {
        Self {
            checksum: String::new(),
            format_version: FORMAT_VERSION,
            n: wave.n(),
            c: wave.c,
            s: wave.s,
            residual_norm: wave.residual_norm,
            tol: wave.tol,
            coefficients: wave
                .eta
                .cosine_coefficients()
                .into_iter()
                .map(format_f64)
                .collect(),
            sine_coefficients: None,
        }
    }

    fn parse_list(list: &[String]) -> Result<Vec<f64>> {
        list.iter()
            .enumerate()
            .map(|(i, s)| {
                parse_f64(s).map_err(|message| Error::Parse {
                    line: i + 1,
                    message,
                })
            })
            .collect()
    }

    /// Rebuilds a general real function from cosine and sine coefficients.
    pub fn to_function(&self) -> Result<GridFunction> {
        let a = Self::parse_list(&self.coefficients)?;
        let b = match &self.sine_coefficients {
            Some(list) => Self::parse_list(list)?,
            None => Vec::new(),
        };
        if a.len() != self.n / 2 + 1 || (!b.is_empty() && b.len() != self.n / 2 - 1) {
            return Err(Error::InvariantViolation(format!(
                "coefficient counts ({}, {}) do not match N = {}",
                a.len(),
                b.len(),
                self.n
            )));
        }
        let coeffs: Vec<Complex64> = (0..=self.n / 2)
            .map(|k| {
                if k == 0 || 2 * k == self.n {
                    Complex64::new(a[k], 0.0)
                } else {
                    Complex64::new(0.5 * a[k], -0.5 * b.get(k - 1).copied().unwrap_or(0.0))
                }
            })
            .collect();
        GridFunction::from_coefficients(self.n, &coeffs)
    }

    pub fn coefficient_values(&self) -> Result<Vec<f64>> {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, s)| {
                parse_f64(s).map_err(|message| Error::Parse {
                    line: i + 1,
                    message,
                })
            })
            .collect()
    }

    /// Rebuilds the wave and checks its invariants.
    pub fn to_wave(&self) -> Result<StokesWave> {
        if self.sine_coefficients.is_some() {
            return Err(Error::InvariantViolation("a wave profile must be even".into()));
        }
        let a = self.coefficient_values()?;
        if a.len() != self.n / 2 + 1 {
            return Err(Error::InvariantViolation(format!(
                "{} coefficients for N = {}",
                a.len(),
                self.n
            )));
        }
        if a.iter().any(|x| !x.is_finite()) || !self.c.is_finite() || !self.s.is_finite() {
            return Err(Error::InvariantViolation("non-finite value".into()));
        }
        if self.residual_norm > self.tol {
            return Err(Error::InvariantViolation(format!(
                "residual {} exceeds tolerance {}",
                self.residual_norm, self.tol
            )));
        }
        let eta = GridFunction::from_cosine_coefficients(self.n, &a)
            .map_err(|e| Error::InvariantViolation(e.to_string()))?;
        let s_eta = steepness(&eta);
        if (s_eta - self.s).abs() > 1e-12 {
            return Err(Error::InvariantViolation(format!(
                "stored steepness {} but profile has {}",
                self.s, s_eta
            )));
        }
        if eta.max_abs() > 0.0 && !(self.c > 1.0) {
            return Err(Error::InvariantViolation(format!("speed {} not above 1", self.c)));
        }
        Ok(StokesWave {
            eta,
            c: self.c,
            s: self.s,
            residual_norm: self.residual_norm,
            tol: self.tol,
        })
    }
}

/// Writes a wave and returns its checksum.
pub fn save_wave(wave: &StokesWave, path: &Path) -> Result<String> {
    write_checked(path, &WaveFile::from_wave(wave))
}

pub fn load_wave(path: &Path) -> Result<StokesWave> {
    read_wave_file(path)?.to_wave()
}

/// Writes a wave file as given, with a freshly computed checksum.
pub fn write_wave_file(file: &WaveFile, path: &Path) -> Result<String> {
    write_checked(path, file)
}

/// Reads a wave file with checksum and version validated.
pub fn read_wave_file(path: &Path) -> Result<WaveFile> {
    read_checked(path)
}

/// Writes a general real function (an eigenvector or chain component) in the
/// wave format with `c = s = 0` and sine coefficients appended.
pub fn save_component(f: &GridFunction, path: &Path) -> Result<String> {
    let n = f.len();
    let coeffs = f.coefficients();
    let mut file = WaveFile::from_wave(&StokesWave {
        eta: f.clone(),
        c: 0.0,
        s: 0.0,
        residual_norm: 0.0,
        tol: 0.0,
    });
    file.sine_coefficients = Some((1..n / 2).map(|k| format_f64(-2.0 * coeffs[k].im)).collect());
    write_checked(path, &file)
}

pub fn load_component(path: &Path) -> Result<GridFunction> {
    read_wave_file(path)?.to_function()
}

pub fn save_branch(branch: &Branch, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(BRANCH_HEADER)?;
    for p in &branch.points {
        w.write_record([
            format_f64(p.s),
            format_f64(p.c),
            format_f64(p.h),
            format_f64(p.p),
            format_f64(p.e),
            format_f64(p.m_residual),
            p.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_branch(path: &Path) -> Result<Branch> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut records = r.records();
    let header = match records.next() {
        Some(h) => h.map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    if header.iter().collect::<Vec<_>>() != BRANCH_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`", BRANCH_HEADER.join(",")),
        });
    }
    let mut points = Vec::new();
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if rec.len() != BRANCH_HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", BRANCH_HEADER.len(), rec.len()),
            });
        }
        let f = |j: usize| parse_f64(&rec[j]).map_err(|message| Error::Parse { line, message });
        let n = rec[6].trim().parse::<usize>().map_err(|e| Error::Parse {
            line,
            message: format!("`{}`: {e}", &rec[6]),
        })?;
        let p = BranchPoint {
            s: f(0)?,
            c: f(1)?,
            h: f(2)?,
            p: f(3)?,
            e: f(4)?,
            m_residual: f(5)?,
            n,
        };
        if let Some(prev) = points.last() {
            let prev: &BranchPoint = prev;
            if !(p.s > prev.s) {
                return Err(Error::MonotonicityViolation { line });
            }
        }
        points.push(p);
    }
    Ok(Branch { points })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EigenvalueEntry {
    pub re: f64,
    pub im: f64,
    pub residual: f64,
    pub constraint1: f64,
    pub constraint2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpectrumReport {
    pub checksum: String,
    pub format_version: u32,
    pub s: f64,
    pub c: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub sigma: Complex,
    pub seed: u64,
    pub eigenvalues: Vec<EigenvalueEntry>,
}
checked!(SpectrumReport);

impl SpectrumReport {
    pub fn new(wave: &StokesWave, result: &crate::spectrum::SpectrumResult) -> Self {
        Self {
            checksum: String::new(),
            format_version: FORMAT_VERSION,
            s: wave.s,
            c: wave.c,
            n: wave.n(),
            sigma: Complex {
                re: result.shift.re,
                im: result.shift.im,
            },
            seed: result.seed,
            eigenvalues: result
                .pairs
                .iter()
                .map(|p| EigenvalueEntry {
                    re: p.lambda.re,
                    im: p.lambda.im,
                    residual: p.residual,
                    constraint1: p.constraints.0,
                    constraint2: p.constraints.1,
                })
                .collect(),
        }
    }
}

pub fn save_spectrum(report: &SpectrumReport, path: &Path) -> Result<String> {
    write_checked(path, report)
}

pub fn load_spectrum(path: &Path) -> Result<SpectrumReport> {
    read_checked(path)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChainResiduals {
    pub chain1: f64,
    pub chain2: f64,
    pub chain3: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[allow(non_snake_case)]
pub struct ChainReport {
    pub checksum: String,
    pub format_version: u32,
    pub s0: f64,
    pub c0: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub D: f64,
    /// Normalized `𝓟''(c₀)`, absent when no branch was supplied.
    pub P2: Option<f64>,
    pub alpha: f64,
    pub B: f64,
    pub lambda1_sq: Option<f64>,
    pub eta_prime_norm: f64,
    pub kernel_dimension: usize,
    pub residuals: ChainResiduals,
    pub parity_defects: Vec<f64>,
}
checked!(ChainReport);

pub fn save_chain_report(report: &ChainReport, path: &Path) -> Result<String> {
    write_checked(path, report)
}

pub fn load_chain_report(path: &Path) -> Result<ChainReport> {
    read_checked(path)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[allow(non_snake_case)]
pub struct ExtremumEntry {
    pub s_star: f64,
    pub c_star: f64,
    pub P: f64,
    pub H: f64,
    pub d2P_dc2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExtremaReport {
    pub checksum: String,
    pub format_version: u32,
    pub extrema: Vec<ExtremumEntry>,
}
checked!(ExtremaReport);

pub fn save_extrema(extrema: &[ExtremumEntry], path: &Path) -> Result<String> {
    write_checked(
        path,
        &ExtremaReport {
            checksum: String::new(),
            format_version: FORMAT_VERSION,
            extrema: extrema.to_vec(),
        },
    )
}

pub fn load_extrema(path: &Path) -> Result<Vec<ExtremumEntry>> {
    read_checked::<ExtremaReport>(path).map(|r| r.extrema)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactKind {
    Wave,
    Branch,
    Spectrum,
    Chain,
    Extrema,
    Table,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IndexEntry {
    pub kind: ArtifactKind,
    /// Relative to the workspace root when possible.
    pub path: String,
    pub s: Option<f64>,
    pub c: Option<f64>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub checksum: Option<String>,
}

/// `index.json` at the workspace root.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct ArtifactIndex {
    pub format_version: u32,
    pub entries: Vec<IndexEntry>,
}

impl ArtifactIndex {
    pub const FILE: &'static str = "index.json";

    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join(Self::FILE);
        if !path.exists() {
            return Ok(Self {
                format_version: FORMAT_VERSION,
                entries: Vec::new(),
            });
        }
        let idx: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        if idx.format_version != FORMAT_VERSION {
            return Err(Error::VersionUnsupported(idx.format_version));
        }
        Ok(idx)
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        fs::create_dir_all(root)?;
        fs::write(root.join(Self::FILE), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Adds an entry, replacing any previous entry for the same path.
    pub fn record(&mut self, root: &Path, mut entry: IndexEntry) {
        if let Ok(rel) = Path::new(&entry.path).strip_prefix(root) {
            entry.path = rel.to_string_lossy().into_owned();
        }
        self.entries.retain(|e| e.path != entry.path);
        self.entries.push(entry);
    }

    /// Re-reads every checksummed artifact and returns the paths that fail.
    pub fn verify(&self, root: &Path) -> Vec<(String, Error)> {
        let mut bad = Vec::new();
        for e in &self.entries {
            let path = root.join(&e.path);
            let res = match e.kind {
                ArtifactKind::Wave => read_wave_file(&path).map(|f| f.checksum),
                ArtifactKind::Spectrum => load_spectrum(&path).map(|f| f.checksum),
                ArtifactKind::Chain => load_chain_report(&path).map(|f| f.checksum),
                ArtifactKind::Extrema => read_checked::<ExtremaReport>(&path).map(|f| f.checksum),
                ArtifactKind::Branch => load_branch(&path).map(|_| String::new()),
                ArtifactKind::Table => Ok(String::new()),
            };
            match (res, &e.checksum) {
                (Err(err), _) => bad.push((e.path.clone(), err)),
                (Ok(found), Some(expected)) if !found.is_empty() && &found != expected => bad.push((
                    e.path.clone(),
                    Error::ChecksumMismatch {
                        expected: expected.clone(),
                        found,
                    },
                )),
                _ => {}
            }
        }
        bad
    }
}

/// Workspace root: `$BABENKO_WORKSPACE` if set, else the current directory.
pub fn workspace_root() -> PathBuf {
    std::env::var_os(WORKSPACE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}
