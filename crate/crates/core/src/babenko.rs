//! Babenko's equation `(c²K - 1)η = ½K(η²) + ηKη` for the Stokes-wave
//! profile, its linearization `𝓛`, and Newton–MINRES solvers.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{self, GridFunction};
use crate::krylov::{minres, KrylovConfig};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A converged traveling wave.
#[derive(Debug, Clone, PartialEq)]
pub struct StokesWave {
    pub eta: GridFunction,
    pub c: f64,
    pub s: f64,
    pub residual_norm: f64,
    /// Tolerance the solve was accepted at: the requested one, raised to the
    /// roundoff floor of the residual on this grid when that is larger.
    pub tol: f64,
}

impl StokesWave {
    /// Flat water at speed `c`.
    pub fn flat(n: usize, c: f64) -> Result<Self> {
        Ok(Self {
            eta: GridFunction::zeros(n)?,
            c,
            s: 0.0,
            residual_norm: 0.0,
            tol: 0.0,
        })
    }

    pub fn n(&self) -> usize {
        self.eta.len()
    }

    /// Re-solves on a finer or coarser grid.
    pub fn resampled(&self, n: usize, cfg: &NewtonConfig) -> Result<Self> {
        let eta = self.eta.resample(n)?;
        solve_at_steepness(&eta, self.c, self.s, cfg)
    }
}

/// Crest-to-trough height over wavelength, `(η(0) - η(π))/2π`.
pub fn steepness(eta: &GridFunction) -> f64 {
    let n = eta.len();
    (eta.samples()[0] - eta.samples()[n / 2]) / (2.0 * PI)
}

fn half_spectrum(samples: &[f64]) -> Vec<Complex64> {
    let n = samples.len();
    let mut c = grid::forward(samples);
    c[n / 2] = ZERO;
    c
}

/// `(c²K - 1)η - ½K(η²) - ηKη` with de-aliased quadratic terms.
pub fn babenko_residual(eta: &GridFunction, c: f64) -> GridFunction {
    let n = eta.len();
    let eh = half_spectrum(eta.samples());
    let keh: Vec<Complex64> = eh.iter().enumerate().map(|(k, z)| z * k as f64).collect();
    let fe = grid::to_fine(n, &eh);
    let fke = grid::to_fine(n, &keh);
    let sq: Vec<f64> = fe.iter().map(|x| x * x).collect();
    let cross: Vec<f64> = fe.iter().zip(&fke).map(|(a, b)| a * b).collect();
    let sqh = grid::from_fine(n, &sq);
    let crossh = grid::from_fine(n, &cross);
    let mut out: Vec<Complex64> = (0..=n / 2)
        .map(|k| {
            let kf = k as f64;
            (c * c * kf - 1.0) * eh[k] - 0.5 * kf * sqh[k] - crossh[k]
        })
        .collect();
    out[n / 2] = ZERO;
    GridFunction::from_raw(grid::inverse(n, &out))
}

/// Safety factor applied to the measured residual noise.
pub const ROUNDOFF_FLOOR_FACTOR: f64 = 4.0;

/// Smallest residual norm resolvable in double precision at `(η, c)`:
/// the change in `S` caused by perturbing every sample by one ulp with a fixed
/// sign pattern, times [`ROUNDOFF_FLOOR_FACTOR`]. Grows like `N` because `K`
/// amplifies high-mode noise.
pub fn roundoff_floor(eta: &GridFunction, c: f64) -> f64 {
    let base = babenko_residual(eta, c);
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    let perturbed: Vec<f64> = eta
        .samples()
        .iter()
        .map(|x| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let sign = if state & 1 == 0 { 1.0 } else { -1.0 };
            x + sign * f64::EPSILON * x.abs()
        })
        .collect();
    let p = GridFunction::from_raw(perturbed);
    ROUNDOFF_FLOOR_FACTOR * (&babenko_residual(&p, c) - &base).norm()
}

/// `𝓛 = c²K - (1 + Kη) - ηK - K(η·)` at a fixed profile, with the profile's
/// padded-grid samples cached for repeated application.
#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    n: usize,
    c: f64,
    fine_eta: Vec<f64>,
    fine_xi_u: Vec<f64>,
}

impl LinearizedOperator {
    pub fn new(eta: &GridFunction, c: f64) -> Self {
        let n = eta.len();
        let eh = half_spectrum(eta.samples());
        let keh: Vec<Complex64> = eh.iter().enumerate().map(|(k, z)| z * k as f64).collect();
        let fine_eta = grid::to_fine(n, &eh);
        let fine_xi_u = grid::to_fine(n, &keh).iter().map(|x| 1.0 + x).collect();
        Self {
            n,
            c,
            fine_eta,
            fine_xi_u,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn speed(&self) -> f64 {
        self.c
    }

    pub fn apply_slice(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let vh = half_spectrum(v);
        let kvh: Vec<Complex64> = vh.iter().enumerate().map(|(k, z)| z * k as f64).collect();
        let fv = grid::to_fine(n, &vh);
        let fkv = grid::to_fine(n, &kvh);
        let a: Vec<f64> = (0..fv.len())
            .map(|j| self.fine_xi_u[j] * fv[j] + self.fine_eta[j] * fkv[j])
            .collect();
        let b: Vec<f64> = fv.iter().zip(&self.fine_eta).map(|(x, e)| x * e).collect();
        let ah = grid::from_fine(n, &a);
        let bh = grid::from_fine(n, &b);
        let c2 = self.c * self.c;
        let mut out: Vec<Complex64> = (0..=n / 2)
            .map(|k| {
                let kf = k as f64;
                c2 * kf * vh[k] - ah[k] - kf * bh[k]
            })
            .collect();
        out[n / 2] = ZERO;
        grid::inverse(n, &out)
    }

    pub fn apply(&self, v: &GridFunction) -> GridFunction {
        GridFunction::from_raw(self.apply_slice(v.samples()))
    }

    /// `(1 + c²K)⁻¹`, the symmetric positive definite preconditioner.
    pub fn precondition_slice(&self, r: &[f64]) -> Vec<f64> {
        let n = self.n;
        let c2 = self.c * self.c;
        let mut h = grid::forward(r);
        for (k, z) in h.iter_mut().enumerate() {
            *z /= 1.0 + c2 * k as f64;
        }
        h[n / 2] = ZERO;
        grid::inverse(n, &h)
    }
}

/// Applies `𝓛v` for the profile `eta` at speed `c`.
pub fn linearized_apply(eta: &GridFunction, c: f64, v: &GridFunction) -> GridFunction {
    LinearizedOperator::new(eta, c).apply(v)
}

/// Restriction of a solve of `𝓛x = b` to a parity class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    /// Odd functions orthogonal to the kernel vector `η'`.
    OddOrthogonal,
}

/// Outcome of an accurate `𝓛` solve.
#[derive(Debug, Clone)]
pub struct SymmetricSolve {
    pub x: GridFunction,
    /// `‖b - 𝓛x‖ / ‖b‖` measured after the final refinement sweep.
    pub relative_residual: f64,
    pub iterations: usize,
}

/// Solves `𝓛x = b` on a parity subspace with MINRES and a few sweeps of
/// iterative refinement. For [`Parity::OddOrthogonal`], `kernel` must be `η'`;
/// the right-hand side and the solution are projected orthogonal to it.
pub fn solve_linearized(
    op: &LinearizedOperator,
    b: &GridFunction,
    parity: Parity,
    kernel: Option<&GridFunction>,
    rtol: f64,
    max_iter: usize,
) -> SymmetricSolve {
    let project = |f: &GridFunction| -> GridFunction {
        match parity {
            Parity::Even => f.project_even(),
            Parity::OddOrthogonal => {
                let mut g = f.project_odd();
                if let Some(k) = kernel {
                    let kk = k.dot(k);
                    if kk > 0.0 {
                        let a = k.dot(&g) / kk;
                        g.axpy(-a, k);
                    }
                }
                g
            }
        }
    };
    let rhs = project(b);
    let bnorm = rhs.norm();
    let n = op.n();
    if bnorm == 0.0 {
        return SymmetricSolve {
            x: GridFunction::from_raw(vec![0.0; n]),
            relative_residual: 0.0,
            iterations: 0,
        };
    }
    let cfg = KrylovConfig {
        rtol: rtol.max(1e-15),
        max_iter,
        restart: 0,
    };
    let mut x = GridFunction::from_raw(vec![0.0; n]);
    let mut r = rhs.clone();
    let mut rel = 1.0;
    let mut iterations = 0;
    // rank-one shift `𝓛 + η'⟨η', ·⟩/‖η'‖²` removes the near-null kernel direction
    let shift = match (parity, kernel) {
        (Parity::OddOrthogonal, Some(k)) if k.dot(k) > 0.0 => {
            Some((k.samples().to_vec(), 1.0 / grid::dot(k.samples(), k.samples())))
        }
        _ => None,
    };
    let apply = |v: &[f64]| {
        let mut out = op.apply_slice(v);
        if let Some((k, scale)) = &shift {
            let a = grid::dot(k, v) * scale;
            out.iter_mut().zip(k).for_each(|(o, ki)| *o += a * ki);
        }
        out
    };
    for _sweep in 0..4 {
        let out = minres(
            apply,
            |v| op.precondition_slice(v),
            r.samples(),
            &cfg,
        );
        iterations += out.iterations;
        x.axpy(1.0, &GridFunction::from_raw(out.x));
        x = project(&x);
        r = project(&(&rhs - &op.apply(&x)));
        let new_rel = r.norm() / bnorm;
        let stalled = new_rel > 0.5 * rel;
        rel = new_rel;
        if rel <= rtol || stalled {
            break;
        }
    }
    SymmetricSolve {
        x,
        relative_residual: rel,
        iterations,
    }
}

/// Newton–MINRES settings.
#[derive(Debug, Clone, Copy)]
pub struct NewtonConfig {
    /// Absolute target for the L² norm of the Babenko residual.
    pub tol: f64,
    pub max_newton: usize,
    /// Inner MINRES stopping rule; `rtol` is relative to the current Newton
    /// residual.
    pub inner: KrylovConfig,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            max_newton: 40,
            inner: KrylovConfig {
                rtol: 1e-3,
                max_iter: 500,
                restart: 0,
            },
        }
    }
}

impl NewtonConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// Linear scalar constraint `Σⱼ wⱼ η(uⱼ) + c_coeff·c = target` closing the
/// Newton system when the speed is an unknown.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub weights: Vec<f64>,
    pub c_coeff: f64,
    pub target: f64,
}

impl Constraint {
    /// `η(0) - η(π) = 2πs`.
    pub fn steepness(n: usize, s: f64) -> Self {
        let mut weights = vec![0.0; n];
        weights[0] = 1.0;
        weights[n / 2] = -1.0;
        Self {
            weights,
            c_coeff: 0.0,
            target: 2.0 * PI * s,
        }
    }

    fn eval_eta(&self, eta: &GridFunction) -> f64 {
        grid::dot(&self.weights, eta.samples())
    }

    fn defect(&self, eta: &GridFunction, c: f64) -> f64 {
        self.eval_eta(eta) + self.c_coeff * c - self.target
    }
}

fn inner_step(
    op: &LinearizedOperator,
    rhs: &GridFunction,
    cfg: &KrylovConfig,
) -> Result<GridFunction> {
    let out = minres(
        |v| op.apply_slice(v),
        |v| op.precondition_slice(v),
        rhs.samples(),
        cfg,
    );
    if !out.converged && out.relative_residual > 0.5 {
        return Err(Error::SingularJacobian {
            residual: out.relative_residual,
        });
    }
    Ok(GridFunction::from_raw(out.x).project_even())
}

/// Newton iteration at fixed speed: each step solves `𝓛δη = -S` by MINRES
/// preconditioned with `(1 + c²K)` and re-projects onto even functions.
pub fn newton_solve_with(eta0: &GridFunction, c: f64, cfg: &NewtonConfig) -> Result<StokesWave> {
    let mut eta = eta0.project_even();
    let tol = cfg.tol.max(roundoff_floor(&eta, c));
    let mut r = babenko_residual(&eta, c);
    let mut res = r.norm();
    let mut stalls = 0;
    for it in 0..=cfg.max_newton {
        if !res.is_finite() {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: res,
            });
        }
        if res <= tol {
            return Ok(StokesWave {
                s: steepness(&eta),
                eta,
                c,
                residual_norm: res,
                tol,
            });
        }
        if it == cfg.max_newton {
            break;
        }
        let op = LinearizedOperator::new(&eta, c);
        let delta = inner_step(&op, &(-&r), &cfg.inner)?;
        let (next, next_r, next_res) = damped_update(&eta, &delta, c, res);
        stalls = if next_res > 0.9 * res { stalls + 1 } else { 0 };
        eta = next;
        r = next_r;
        res = next_res;
        if stalls >= 4 {
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_newton,
        residual: res,
    })
}

fn damped_update(
    eta: &GridFunction,
    delta: &GridFunction,
    c: f64,
    res: f64,
) -> (GridFunction, GridFunction, f64) {
    let mut t = 1.0;
    loop {
        let mut next = eta.clone();
        next.axpy(t, delta);
        let r = babenko_residual(&next, c);
        let nr = r.norm();
        if nr < 2.0 * res || t < 1.0 / 16.0 {
            return (next, r, nr);
        }
        t *= 0.5;
    }
}

/// [`newton_solve_with`] using the default inner settings.
pub fn newton_solve(eta0: &GridFunction, c: f64, tol: f64) -> Result<StokesWave> {
    newton_solve_with(eta0, c, &NewtonConfig::with_tol(tol))
}

/// Newton iteration on the extended unknown `(η, c)` closed by a linear
/// constraint, using the bordering formulas with two MINRES solves per step.
pub fn newton_solve_constrained(
    eta0: &GridFunction,
    c0: f64,
    constraint: &Constraint,
    cfg: &NewtonConfig,
) -> Result<StokesWave> {
    let mut eta = eta0.project_even();
    let mut c = c0;
    let tol = cfg.tol.max(roundoff_floor(&eta, c0));
    let gtol = 1e-13 * (1.0 + constraint.target.abs());
    let mut stalls = 0;
    let mut res = f64::INFINITY;
    for it in 0..=cfg.max_newton {
        let r = babenko_residual(&eta, c);
        let new_res = r.norm();
        let g = constraint.defect(&eta, c);
        if !new_res.is_finite() || !c.is_finite() {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: new_res,
            });
        }
        stalls = if new_res > 0.9 * res { stalls + 1 } else { 0 };
        res = new_res;
        if res <= tol && g.abs() <= gtol {
            return Ok(StokesWave {
                s: steepness(&eta),
                eta,
                c,
                residual_norm: res,
                tol,
            });
        }
        if it == cfg.max_newton || stalls >= 4 {
            break;
        }
        let op = LinearizedOperator::new(&eta, c);
        let x1 = if res > 0.0 {
            inner_step(&op, &(-&r), &cfg.inner)?
        } else {
            GridFunction::from_raw(vec![0.0; eta.len()])
        };
        let dsdc = eta.k_op().scale(-2.0 * c);
        let mut x2_cfg = cfg.inner;
        x2_cfg.rtol = cfg.inner.rtol.min(1e-6);
        let x2 = inner_step(&op, &dsdc, &x2_cfg)?;
        let denom = constraint.c_coeff + constraint.eval_eta(&x2);
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::SingularJacobian { residual: 1.0 });
        }
        let dc = (-g - constraint.eval_eta(&x1)) / denom;
        eta.axpy(1.0, &x1);
        eta.axpy(dc, &x2);
        c += dc;
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_newton,
        residual: res,
    })
}

/// Solves for the wave of steepness `s` starting from `(eta0, c0)`.
pub fn solve_at_steepness(
    eta0: &GridFunction,
    c0: f64,
    s: f64,
    cfg: &NewtonConfig,
) -> Result<StokesWave> {
    if s == 0.0 {
        return StokesWave::flat(eta0.len(), c0.max(1.0));
    }
    let mut wave = newton_solve_constrained(eta0, c0, &Constraint::steepness(eta0.len(), s), cfg)?;
    wave.s = s;
    Ok(wave)
}

/// Small-amplitude expansion `η ≈ a cos u + a²(cos 2u - ½) + (3/2)a³ cos 3u`,
/// `c² ≈ 1 + a²`, returned as `(η, c)`.
pub fn stokes_expansion(n: usize, a: f64) -> Result<(GridFunction, f64)> {
    let eta = GridFunction::from_fn(n, |u| {
        a * u.cos() + a * a * ((2.0 * u).cos() - 0.5) + 1.5 * a * a * a * (3.0 * u).cos()
    })?;
    Ok((eta, (1.0 + a * a).sqrt()))
}

/// `∂_cη` from `𝓛(∂_cη) = -2cKη` on the even subspace, verified to a relative
/// residual of `1e-10`.
pub fn d_eta_dc(wave: &StokesWave) -> Result<GridFunction> {
    let op = LinearizedOperator::new(&wave.eta, wave.c);
    d_eta_dc_with(&op, wave)
}

pub(crate) fn d_eta_dc_with(op: &LinearizedOperator, wave: &StokesWave) -> Result<GridFunction> {
    let rhs = wave.eta.k_op().scale(-2.0 * wave.c);
    let sol = solve_linearized(op, &rhs, Parity::Even, None, 1e-12, 20_000);
    if sol.relative_residual > 1e-10 {
        return Err(Error::FoldPoint {
            residual: sol.relative_residual,
        });
    }
    Ok(sol.x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_water_residual_vanishes() {
        let eta = GridFunction::zeros(64).unwrap();
        assert_eq!(babenko_residual(&eta, 1.1).max_abs(), 0.0);
    }

    #[test]
    fn residual_of_pure_cosine_matches_expansion() {
        // S(a cos u, c) = (c²-1) a cos u - a²(½ + cos 2u)
        let n = 64;
        let (a, c) = (0.3, 1.2);
        let eta = GridFunction::from_fn(n, |u| a * u.cos()).unwrap();
        let want =
            GridFunction::from_fn(n, |u| (c * c - 1.0) * a * u.cos() - a * a * (0.5 + (2.0 * u).cos()))
                .unwrap();
        assert!((&babenko_residual(&eta, c) - &want).max_abs() < 1e-14);
        let tiny = GridFunction::from_fn(n, |u| 1e-6 * u.cos()).unwrap();
        assert!(babenko_residual(&tiny, 1.0).norm() <= 1e-11);
    }

    #[test]
    fn linearization_in_flat_water() {
        let n = 32;
        let eta = GridFunction::zeros(n).unwrap();
        let c = 1.3;
        let v = GridFunction::from_fn(n, f64::cos).unwrap();
        let lv = linearized_apply(&eta, c, &v);
        assert!((&lv - &v.scale(c * c - 1.0)).max_abs() < 1e-14);
    }

    #[test]
    fn linearization_matches_directional_derivative() {
        let n = 64;
        let (eta, c) = stokes_expansion(n, 0.2).unwrap();
        let v = GridFunction::from_fn(n, |u| (2.0 * u).cos() + 0.3 * (5.0 * u).sin()).unwrap();
        let h = 1e-6;
        let mut ep = eta.clone();
        ep.axpy(h, &v);
        let mut em = eta.clone();
        em.axpy(-h, &v);
        let fd = (&babenko_residual(&ep, c) - &babenko_residual(&em, c)).scale(0.5 / h);
        assert!((&fd - &linearized_apply(&eta, c, &v)).max_abs() < 1e-8);
    }

    #[test]
    fn newton_from_zero_is_immediate() {
        let eta = GridFunction::zeros(64).unwrap();
        let w = newton_solve(&eta, 1.05, 1e-13).unwrap();
        assert_eq!(w.residual_norm, 0.0);
        assert_eq!(w.eta.max_abs(), 0.0);
    }

    #[test]
    fn newton_converges_from_small_amplitude_guess() {
        let n = 64;
        let a = 0.01;
        let c = (1.0_f64 + a * a).sqrt();
        let eta0 = GridFunction::from_fn(n, |u| a * u.cos()).unwrap();
        let w = newton_solve(&eta0, c, 1e-13).unwrap();
        assert!(w.residual_norm <= 1e-13);
        assert!((w.eta.cosine_coefficients()[1] - a).abs() < 1e-5);
        assert!(w.eta.project_odd().norm() <= 1e-12 * w.eta.norm());
    }

    #[test]
    fn steepness_constraint_is_met() {
        let n = 128;
        let s = 0.04;
        let (eta0, c0) = stokes_expansion(n, PI * s).unwrap();
        let w = solve_at_steepness(&eta0, c0, s, &NewtonConfig::default()).unwrap();
        assert!((steepness(&w.eta) - s).abs() < 1e-14);
        assert!(w.residual_norm <= 1e-13);
        assert!(w.c > 1.0);
    }

    #[test]
    fn d_eta_dc_of_flat_water_is_zero() {
        let w = StokesWave::flat(32, 1.1).unwrap();
        assert_eq!(d_eta_dc(&w).unwrap().max_abs(), 0.0);
    }
}
