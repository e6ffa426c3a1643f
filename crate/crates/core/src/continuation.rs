//! Continuation of the Stokes-wave branch from flat water toward the limiting
//! wave, in speed, steepness or pseudo-arclength.

use crate::babenko::{
    newton_solve_constrained, newton_solve_with, solve_at_steepness, stokes_expansion, Constraint,
    NewtonConfig, StokesWave,
};
use crate::conserved::{wave_action, wave_energy, wave_mass, wave_momentum};
use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// Steepness of the limiting (peaked) wave, rounded up; continuation targets
/// must stay below it.
pub const LIMITING_STEEPNESS: f64 = 0.1411;

/// Smallest step tried before a continuation step is declared failed.
pub const MIN_STEP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContinuationMode {
    Speed,
    Steepness,
    Arclength,
}

impl std::str::FromStr for ContinuationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "speed" => Ok(Self::Speed),
            "steepness" => Ok(Self::Steepness),
            "arclength" => Ok(Self::Arclength),
            other => Err(Error::InvalidArgument(format!("unknown continuation mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ContinuationConfig {
    pub mode: ContinuationMode,
    /// Initial and largest step, in units of the continuation parameter.
    pub step: f64,
    pub tol: f64,
    pub start_modes: usize,
    pub max_modes: usize,
    /// Relative top-octave amplitude that triggers doubling of `N`.
    pub spectral_tail_threshold: f64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            mode: ContinuationMode::Steepness,
            step: 0.004,
            tol: 1e-13,
            start_modes: 256,
            max_modes: 16384,
            spectral_tail_threshold: 1e-13,
        }
    }
}

impl ContinuationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol >= 1e-14) {
            return Err(Error::InvalidArgument(format!("tol {} below 1e-14", self.tol)));
        }
        if !(self.step > 0.0) {
            return Err(Error::InvalidArgument("step must be positive".into()));
        }
        GridFunction::zeros(self.start_modes)?;
        GridFunction::zeros(self.max_modes)?;
        if self.max_modes < self.start_modes {
            return Err(Error::InvalidArgument("max_modes below start_modes".into()));
        }
        Ok(())
    }

    fn newton(&self) -> NewtonConfig {
        NewtonConfig::with_tol(self.tol)
    }
}

/// One accepted point: steepness, speed, energy, momentum, action, mass
/// residual and grid size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPoint {
    pub s: f64,
    pub c: f64,
    pub h: f64,
    pub p: f64,
    pub e: f64,
    pub m_residual: f64,
    pub n: usize,
}

impl BranchPoint {
    pub fn from_wave(wave: &StokesWave) -> Self {
        Self {
            s: wave.s,
            c: wave.c,
            h: wave_energy(wave),
            p: wave_momentum(wave),
            e: wave_action(wave),
            m_residual: wave_mass(wave),
            n: wave.n(),
        }
    }
}

/// Points ordered by strictly increasing steepness.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
}

impl Branch {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the first point whose steepness does not exceed its
    /// predecessor's; `None` when ordered.
    pub fn monotonicity_defect(&self) -> Option<usize> {
        self.points
            .windows(2)
            .position(|w| !(w[1].s > w[0].s))
            .map(|i| i + 1)
    }
}

/// A branch together with the converged waves of its points.
#[derive(Debug, Clone)]
pub struct BranchTrace {
    pub branch: Branch,
    pub waves: Vec<StokesWave>,
}

impl BranchTrace {
    fn push(&mut self, wave: StokesWave) {
        self.branch.points.push(BranchPoint::from_wave(&wave));
        self.waves.push(wave);
    }
}

/// Continues from flat water to `s_max` and returns the branch.
pub fn continue_branch(config: &ContinuationConfig, s_max: f64) -> Result<Branch> {
    trace_branch(config, s_max).map(|t| t.branch)
}

/// Continues from flat water to `s_max`, keeping every converged wave.
pub fn trace_branch(config: &ContinuationConfig, s_max: f64) -> Result<BranchTrace> {
    trace_branch_observed(config, s_max, |_| {})
}

/// [`trace_branch`] with a callback invoked on every accepted point.
pub fn trace_branch_observed(
    config: &ContinuationConfig,
    s_max: f64,
    mut observe: impl FnMut(&BranchPoint),
) -> Result<BranchTrace> {
    config.validate()?;
    if !(s_max < LIMITING_STEEPNESS) {
        return Err(Error::InvalidArgument(format!(
            "target steepness {s_max} is not below the limiting value {LIMITING_STEEPNESS}"
        )));
    }
    let newton = config.newton();
    let mut trace = BranchTrace {
        branch: Branch::default(),
        waves: Vec::new(),
    };
    trace.push(StokesWave::flat(config.start_modes, 1.0)?);
    observe(&trace.branch.points[0]);
    let mut n = config.start_modes;
    let mut step = config.step;

    loop {
        let last = trace.waves.last().expect("nonempty").clone();
        if last.s >= s_max {
            break;
        }
        let nontrivial = trace.waves.len() - 1;
        let cap = (LIMITING_STEEPNESS - last.s) / 8.0;
        let attempt = match (config.mode, nontrivial) {
            (ContinuationMode::Steepness, _) | (_, 0 | 1) => {
                let h = step.min(cap);
                let s_next = (last.s + h).min(s_max);
                let (eta0, c0) = guess_in_steepness(&trace, n, s_next)?;
                solve_at_steepness(&eta0, c0, s_next, &newton)
            }
            (ContinuationMode::Speed, _) => {
                let prev = &trace.waves[trace.waves.len() - 2];
                let c_next = last.c + step;
                let t = (c_next - last.c) / (last.c - prev.c);
                let eta0 = extrapolate(&prev.eta, &last.eta, n, t)?;
                newton_solve_with(&eta0, c_next, &newton)
            }
            (ContinuationMode::Arclength, _) => {
                let prev = &trace.waves[trace.waves.len() - 2];
                arclength_step(prev, &last, n, step, &newton)
            }
        };
        let accepted = attempt.and_then(|w| {
            if w.s > last.s && w.c.is_finite() {
                Ok(w)
            } else {
                Err(Error::NonConvergence {
                    iterations: 0,
                    residual: f64::NAN,
                })
            }
        });
        match accepted {
            Ok(mut wave) => {
                if wave.s > s_max {
                    wave = solve_at_steepness(&wave.eta, wave.c, s_max, &newton)?;
                }
                while wave.eta.top_octave_tail() > config.spectral_tail_threshold
                    && n < config.max_modes
                {
                    n *= 2;
                    wave = wave.resampled(n, &newton)?;
                }
                trace.push(wave);
                observe(trace.branch.points.last().expect("pushed"));
                step = (step * 1.5).min(config.step);
            }
            Err(_) => {
                step *= 0.5;
                if step < MIN_STEP {
                    return Err(Error::StepFailure {
                        s: last.s + step,
                        last_good: last.s,
                    });
                }
            }
        }
    }
    Ok(trace)
}

/// Linear extrapolation `b + t(b - a)` on an `n`-point grid.
fn extrapolate(a: &GridFunction, b: &GridFunction, n: usize, t: f64) -> Result<GridFunction> {
    let a = a.resample(n)?;
    let mut out = b.resample(n)?;
    let d = &out - &a;
    out.axpy(t, &d);
    Ok(out)
}

fn guess_in_steepness(trace: &BranchTrace, n: usize, s_next: f64) -> Result<(GridFunction, f64)> {
    let k = trace.waves.len();
    if k < 3 {
        return stokes_expansion(n, std::f64::consts::PI * s_next);
    }
    let (a, b) = (&trace.waves[k - 2], &trace.waves[k - 1]);
    let t = (s_next - b.s) / (b.s - a.s);
    Ok((extrapolate(&a.eta, &b.eta, n, t)?, b.c + t * (b.c - a.c)))
}

/// Pseudo-arclength step of length `ds` along the secant through `prev`, `last`.
fn arclength_step(
    prev: &StokesWave,
    last: &StokesWave,
    n: usize,
    ds: f64,
    newton: &NewtonConfig,
) -> Result<StokesWave> {
    let eta_prev = prev.eta.resample(n)?;
    let eta_last = last.eta.resample(n)?;
    let tau_eta = &eta_last - &eta_prev;
    let tau_c = last.c - prev.c;
    let len = (tau_eta.dot(&tau_eta) + tau_c * tau_c).sqrt();
    let tau_eta = tau_eta.scale(1.0 / len);
    let tau_c = tau_c / len;
    let mut eta0 = eta_last.clone();
    eta0.axpy(ds, &tau_eta);
    let c0 = last.c + ds * tau_c;
    let weights: Vec<f64> = tau_eta.samples().iter().map(|x| x / n as f64).collect();
    let constraint = Constraint {
        weights,
        c_coeff: tau_c,
        target: tau_eta.dot(&eta_last) + tau_c * last.c + ds,
    };
    newton_solve_constrained(&eta0, c0, &constraint, newton)
}
