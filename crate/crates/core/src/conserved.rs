//! Conserved functionals of the water-wave problem and their derivatives
//! along a branch of Stokes waves.
//!
//! Branch-level functionals carry the loop-integral factor `∮ f du = 2π⟨1, f⟩`.

use std::f64::consts::PI;

use crate::babenko::{d_eta_dc, solve_at_steepness, NewtonConfig, StokesWave};
use crate::continuation::Branch;
use crate::error::{Error, Result};
use crate::grid::GridFunction;

const TWO_PI: f64 = 2.0 * PI;

/// Mass, horizontal momentum, vertical momentum and energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservedSet {
    pub m: f64,
    pub p: f64,
    pub q: f64,
    pub h: f64,
}

fn check_len(a: &GridFunction, b: &GridFunction) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// `M = ∮η(1+Kη)`, `P = -∮ψη'`, `Q = ∮ψ(1+Kη)`, `H = ½∮(ψKψ + η²(1+Kη))`.
pub fn conserved_eval(psi: &GridFunction, eta: &GridFunction) -> Result<ConservedSet> {
    check_len(psi, eta)?;
    let keta = eta.k_op();
    let eta_sq = eta.product(eta)?;
    let m = TWO_PI * (eta.mean() + eta.dot(&keta));
    let p = -TWO_PI * psi.dot(&eta.derivative());
    let q = TWO_PI * (psi.mean() + psi.dot(&keta));
    let h = PI * (psi.dot(&psi.k_op()) + eta_sq.mean() + eta_sq.dot(&keta));
    Ok(ConservedSet { m, p, q, h })
}

/// Velocity potential `ψ = -c𝓗η` on the surface of a traveling wave.
pub fn traveling_potential(wave: &StokesWave) -> GridFunction {
    wave.eta.hilbert().scale(-wave.c)
}

/// `𝓟 = ∮ cηKη`.
pub fn wave_momentum(wave: &StokesWave) -> f64 {
    TWO_PI * wave.c * wave.eta.dot(&wave.eta.k_op())
}

/// `𝓗 = ∮ (c²/2)ηKη + ½η²(1+Kη)`.
pub fn wave_energy(wave: &StokesWave) -> f64 {
    let eta = &wave.eta;
    let keta = eta.k_op();
    let eta_sq = eta.product(eta).expect("same grid");
    TWO_PI * (0.5 * wave.c * wave.c * eta.dot(&keta) + 0.5 * (eta_sq.mean() + eta_sq.dot(&keta)))
}

/// `𝓔 = ∮ ½η(c²K-1)η - ½ηK(η²)`, equal to `c𝓟 - 𝓗`.
pub fn wave_action(wave: &StokesWave) -> f64 {
    let eta = &wave.eta;
    let c2 = wave.c * wave.c;
    let keta = eta.k_op();
    let eta_sq = eta.product(eta).expect("same grid");
    TWO_PI * (0.5 * (c2 * eta.dot(&keta) - eta.dot(eta)) - 0.5 * eta_sq.k_op().dot(eta))
}

/// Mass `∮η(1+Kη)`, zero for every Stokes wave.
pub fn wave_mass(wave: &StokesWave) -> f64 {
    TWO_PI * (wave.eta.mean() + wave.eta.dot(&wave.eta.k_op()))
}

/// `𝓟'(c) = ∮ ηKη + 2cKη·∂_cη`, given `∂_cη`.
pub fn momentum_slope_with(wave: &StokesWave, deta_dc: &GridFunction) -> f64 {
    let keta = wave.eta.k_op();
    TWO_PI * (keta.dot(&wave.eta) + 2.0 * wave.c * keta.dot(deta_dc))
}

/// `𝓟'(c)` evaluated directly through `∂_cη`.
pub fn momentum_slope(wave: &StokesWave) -> Result<f64> {
    Ok(momentum_slope_with(wave, &d_eta_dc(wave)?))
}

/// Finite-difference weights for derivatives `0..=m` at `z` from nodes `x`
/// (Fornberg's recursion).
pub fn fd_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

fn apply_weights(w: &[f64], f: &[f64]) -> f64 {
    w.iter().zip(f).map(|(a, b)| a * b).sum()
}

/// Derivatives in `s` at a branch point and their conversions to `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchDerivatives {
    pub dp_ds: f64,
    pub dc_ds: f64,
    pub d2p_ds2: f64,
    pub d2c_ds2: f64,
    pub dh_ds: f64,
    pub de_ds: f64,
    /// `P_s / c_s`.
    pub p_prime_c: f64,
    /// `(P_ss - P_s c_ss / c_s) / c_s²`.
    pub p_doubleprime_c: f64,
}

impl BranchDerivatives {
    /// Builds the derivatives from samples `(s, c, P, H, E)` with five-point
    /// stencils centred at `z`.
    pub fn from_samples(z: f64, s: &[f64], c: &[f64], p: &[f64], h: &[f64], e: &[f64]) -> Self {
        let w = fd_weights(z, s, 2);
        let dp_ds = apply_weights(&w[1], p);
        let dc_ds = apply_weights(&w[1], c);
        let d2p_ds2 = apply_weights(&w[2], p);
        let d2c_ds2 = apply_weights(&w[2], c);
        Self {
            dp_ds,
            dc_ds,
            d2p_ds2,
            d2c_ds2,
            dh_ds: apply_weights(&w[1], h),
            de_ds: apply_weights(&w[1], e),
            p_prime_c: dp_ds / dc_ds,
            p_doubleprime_c: (d2p_ds2 - dp_ds * d2c_ds2 / dc_ds) / (dc_ds * dc_ds),
        }
    }
}

/// Centered fourth-order derivatives at `branch.points[index]`.
pub fn branch_derivatives(branch: &Branch, index: usize) -> Result<BranchDerivatives> {
    let len = branch.points.len();
    if index < 2 || index + 2 >= len {
        return Err(Error::BoundaryPoint { index, len });
    }
    let pts = &branch.points[index - 2..=index + 2];
    let col = |f: fn(&crate::continuation::BranchPoint) -> f64| pts.iter().map(f).collect::<Vec<_>>();
    Ok(BranchDerivatives::from_samples(
        branch.points[index].s,
        &col(|p| p.s),
        &col(|p| p.c),
        &col(|p| p.p),
        &col(|p| p.h),
        &col(|p| p.e),
    ))
}

/// Stationary point of the momentum along the branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumExtremum {
    pub s: f64,
    pub c: f64,
    pub p: f64,
    pub h: f64,
    /// `𝓟''(c)` at the extremum.
    pub d2p_dc2: f64,
}

/// Speeds below which `dc/ds` counts as a fold.
pub const FOLD_THRESHOLD: f64 = 1e-6;

/// Interpolation stencil size used to refine extrema.
pub const EXTREMUM_STENCIL: usize = 9;

/// Locates sign changes of `dP/ds` and refines each as the stationary point of
/// the interpolating polynomial through the [`EXTREMUM_STENCIL`] nearest
/// points. Candidates where `|dc/ds|` falls below [`FOLD_THRESHOLD`] are
/// dropped.
pub fn find_momentum_extrema(branch: &Branch) -> Vec<MomentumExtremum> {
    let pts = &branch.points;
    let mut out = Vec::new();
    if pts.len() < 6 {
        return out;
    }
    let slopes: Vec<Option<f64>> = (0..pts.len())
        .map(|i| branch_derivatives(branch, i).ok().map(|d| d.dp_ds))
        .collect();
    for i in 2..pts.len() - 3 {
        let (Some(a), Some(b)) = (slopes[i], slopes[i + 1]) else {
            continue;
        };
        if a == 0.0 || a.signum() == b.signum() {
            continue;
        }
        let width = EXTREMUM_STENCIL.min(pts.len());
        let lo = i.saturating_sub((width - 1) / 2).min(pts.len() - width);
        let window = &pts[lo..lo + width];
        let s: Vec<f64> = window.iter().map(|p| p.s).collect();
        let col = |f: fn(&crate::continuation::BranchPoint) -> f64| window.iter().map(f).collect::<Vec<_>>();
        let (pv, cv, hv) = (col(|p| p.p), col(|p| p.c), col(|p| p.h));
        let dp = |z: f64| apply_weights(&fd_weights(z, &s, 1)[1], &pv);
        // bisection on the interpolant's slope between the bracketing points
        let (mut z_lo, mut z_hi) = (pts[i].s, pts[i + 1].s);
        let mut f_lo = dp(z_lo);
        if f_lo.signum() == dp(z_hi).signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (z_lo + z_hi);
            if mid <= z_lo || mid >= z_hi {
                break;
            }
            let fm = dp(mid);
            if fm.signum() == f_lo.signum() {
                z_lo = mid;
                f_lo = fm;
            } else {
                z_hi = mid;
            }
        }
        let z = 0.5 * (z_lo + z_hi);
        let w = fd_weights(z, &s, 2);
        let dc = apply_weights(&w[1], &cv);
        if dc.abs() < FOLD_THRESHOLD {
            continue;
        }
        let p_ss = apply_weights(&w[2], &pv);
        out.push(MomentumExtremum {
            s: z,
            c: apply_weights(&w[0], &cv),
            p: apply_weights(&w[0], &pv),
            h: apply_weights(&w[0], &hv),
            d2p_dc2: p_ss / (dc * dc),
        });
    }
    out
}

/// Momentum extremum resolved with converged waves.
#[derive(Debug, Clone)]
pub struct CriticalPoint {
    pub wave: StokesWave,
    /// `𝓟'(c)` at the refined point, evaluated directly.
    pub p_prime: f64,
    pub p: f64,
    pub h: f64,
    /// `𝓟''(c)` from a local five-point branch.
    pub p_doubleprime: f64,
    pub dc_ds: f64,
}

/// Spacing of the local branch used for `𝓟''`.
pub const LOCAL_STENCIL_STEP: f64 = 1e-4;

/// Refines an extremum by a secant iteration on the directly evaluated
/// `𝓟'(c(s))`, starting from a nearby converged wave and the estimate `s_guess`.
pub fn refine_extremum(
    near: &StokesWave,
    s_guess: f64,
    cfg: &NewtonConfig,
) -> Result<CriticalPoint> {
    let eval = |s: f64, from: &StokesWave| -> Result<(StokesWave, f64)> {
        let w = solve_at_steepness(&from.eta, from.c, s, cfg)?;
        let d = momentum_slope(&w)?;
        Ok((w, d))
    };
    let (mut w0, mut d0) = eval(s_guess, near)?;
    let mut s0 = s_guess;
    let mut s1 = s_guess + 1e-6;
    let (mut w1, mut d1) = eval(s1, &w0)?;
    for _ in 0..30 {
        if d1.abs() <= 1e-12 * TWO_PI || (s1 - s0).abs() < 1e-15 || d1 == d0 {
            break;
        }
        let s2 = s1 - d1 * (s1 - s0) / (d1 - d0);
        let (w2, d2) = eval(s2, &w1)?;
        s0 = s1;
        d0 = d1;
        w0 = w1;
        s1 = s2;
        d1 = d2;
        w1 = w2;
    }
    let _ = w0;
    let wave = w1;
    let h = LOCAL_STENCIL_STEP;
    let mut ss = Vec::with_capacity(5);
    let mut cs = Vec::with_capacity(5);
    let mut ps = Vec::with_capacity(5);
    let mut hs = Vec::with_capacity(5);
    let mut es = Vec::with_capacity(5);
    for k in -2..=2 {
        let s = s1 + k as f64 * h;
        let w = if k == 0 {
            wave.clone()
        } else {
            solve_at_steepness(&wave.eta, wave.c, s, cfg)?
        };
        ss.push(s);
        cs.push(w.c);
        ps.push(wave_momentum(&w));
        hs.push(wave_energy(&w));
        es.push(wave_action(&w));
    }
    let der = BranchDerivatives::from_samples(s1, &ss, &cs, &ps, &hs, &es);
    if der.dc_ds.abs() < FOLD_THRESHOLD {
        return Err(Error::FoldPoint { residual: der.dc_ds });
    }
    Ok(CriticalPoint {
        p: wave_momentum(&wave),
        h: wave_energy(&wave),
        p_prime: d1,
        p_doubleprime: der.p_doubleprime_c,
        dc_ds: der.dc_ds,
        wave,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_fields_give_zero() {
        let z = GridFunction::zeros(32).unwrap();
        let cs = conserved_eval(&z, &z).unwrap();
        assert_eq!(cs, ConservedSet { m: 0.0, p: 0.0, q: 0.0, h: 0.0 });
        let w = StokesWave::flat(32, 1.0).unwrap();
        assert_eq!((wave_momentum(&w), wave_energy(&w), wave_action(&w)), (0.0, 0.0, 0.0));
    }

    #[test]
    fn cosine_profile_integrals() {
        // η = a cos u, ψ = 0: M = πa², H = πa²/2 (the cubic term integrates to zero)
        let a = 0.3;
        let eta = GridFunction::from_fn(32, |u| a * u.cos()).unwrap();
        let psi = GridFunction::zeros(32).unwrap();
        let cs = conserved_eval(&psi, &eta).unwrap();
        assert!((cs.m - PI * a * a).abs() < 1e-14);
        assert_eq!(cs.p, 0.0);
        assert!(cs.q.abs() < 1e-15);
        assert!((cs.h - 0.5 * PI * a * a).abs() < 1e-14);
    }

    #[test]
    fn fd_weights_reproduce_polynomials() {
        let x = [0.0, 0.1, 0.25, 0.3, 0.5];
        let w = fd_weights(0.2, &x, 2);
        let f: Vec<f64> = x.iter().map(|t| t * t * t).collect();
        assert!((apply_weights(&w[1], &f) - 3.0 * 0.04).abs() < 1e-12);
        assert!((apply_weights(&w[2], &f) - 6.0 * 0.2).abs() < 1e-10);
    }

    #[test]
    fn symmetric_stencil_on_even_function() {
        let s: Vec<f64> = (-2..=2).map(|k| k as f64 * 1e-3).collect();
        let c: Vec<f64> = s.iter().map(|t| 1.0 + t).collect();
        let p: Vec<f64> = s.iter().map(|t| t * t).collect();
        let d = BranchDerivatives::from_samples(0.0, &s, &c, &p, &p, &p);
        assert!(d.dp_ds.abs() < 1e-8);
        assert!((d.p_doubleprime_c - 2.0).abs() < 1e-6);
    }
}
