//! Jordan chain of the zero eigenvalue of the stability pencil, the
//! normal-form coefficient `𝓑`, and the predicted eigenvalue splitting near a
//! momentum extremum.
//!
//! Inner products are normalized, `⟨f, g⟩ = (1/2π)∮ f g du`, so `𝓓` and `𝓟''`
//! here are the branch quantities of [`crate::conserved`] divided by `2π`.

use std::f64::consts::PI;

use crate::babenko::{d_eta_dc_with, solve_linearized, Parity, StokesWave};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::spectrum::PencilOperators;

/// Largest zero mode tolerated on the right-hand side of a `K` solve.
pub const K_SOLVABILITY_TOL: f64 = 1e-9;
/// Relative residual targeted by the `𝓛` solves of the chain.
pub const CHAIN_RTOL: f64 = 1e-12;
/// Residual above which an even-subspace `𝓛` solve signals a fold.
pub const FOLD_RESIDUAL: f64 = 1e-9;

/// Solves `Kw = f` by spectral division; the zero mode of `f` must vanish.
fn solve_k(f: &GridFunction, what: &'static str) -> Result<GridFunction> {
    let (w, zero_mode) = f.inverse_k();
    if zero_mode.abs() > K_SOLVABILITY_TOL {
        return Err(Error::SolvabilityViolation {
            what,
            defect: zero_mode,
        });
    }
    Ok(w)
}

fn rel(err: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

/// The chain `(η', 0) → (v₁, w₁) → (ṽ₂, w̃₂) → (ṽ₃, w̃₃)` with its diagnostics.
#[derive(Debug, Clone)]
pub struct JordanChain {
    pub eta_prime: GridFunction,
    pub d_eta_dc: GridFunction,
    pub v1: GridFunction,
    pub w1: GridFunction,
    pub v2: GridFunction,
    pub w2: GridFunction,
    pub v3: GridFunction,
    pub w3: GridFunction,
    /// `𝓓 = ⟨Kη, η⟩ + 2c⟨Kη, ∂_cη⟩`.
    pub d: f64,
    /// `⟨1 + 2Kη, ṽ₃⟩`.
    pub alpha: f64,
    /// `⟨1, 𝓜ṽ₃⟩ / ⟨1, 𝓜1⟩`.
    pub alpha_ratio: f64,
    /// `⟨η', w̃₃⟩ - 2c⟨Kη, ṽ₃⟩`.
    pub b_coeff: f64,
    pub eta_prime_norm: f64,
    /// Relative back-substitution residuals of the three stages.
    pub residuals: [f64; 3],
    /// `‖w₁ - 𝓗η‖/‖η‖` and `‖v₁ + ∂_cη‖/‖∂_cη‖`.
    pub closed_form_defects: [f64; 2],
    /// Relative norms of the wrong-parity parts of `v₁, w₁, ṽ₂, w̃₂, ṽ₃, w̃₃`.
    pub parity_defects: [f64; 6],
    /// `⟨1, w̃₂⟩, ⟨η', ṽ₂⟩, ⟨1, w̃₃⟩, ⟨η', ṽ₃⟩`.
    pub orthogonality_defects: [f64; 4],
}

impl JordanChain {
    pub fn max_parity_defect(&self) -> f64 {
        self.parity_defects.iter().fold(0.0, |a, b| a.max(*b))
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |a, b| a.max(*b))
    }
}

fn wrong_parity(f: &GridFunction, even: bool) -> f64 {
    let bad = if even { f.project_odd() } else { f.project_even() };
    rel(bad.norm(), f.norm())
}

fn solve_even(ops: &PencilOperators, rhs: &GridFunction) -> Result<(GridFunction, f64)> {
    let odd = rhs.project_odd().norm();
    if odd > 1e-9 * rhs.norm().max(1e-300) {
        return Err(Error::SolvabilityViolation {
            what: "even-subspace right-hand side",
            defect: odd,
        });
    }
    let sol = solve_linearized(ops.linearized(), rhs, Parity::Even, None, CHAIN_RTOL, 20_000);
    if sol.relative_residual > FOLD_RESIDUAL {
        return Err(Error::FoldPoint {
            residual: sol.relative_residual,
        });
    }
    Ok((sol.x, sol.relative_residual))
}

/// First element: `Kw₁ = 𝓜η'`, `𝓛v₁ = -2c𝓗η'`, with `⟨1, w₁⟩ = ⟨η', v₁⟩ = 0`.
pub fn chain_first(ops: &PencilOperators) -> Result<(GridFunction, GridFunction)> {
    let c = ops.speed();
    let ep = ops.eta_prime();
    let w1 = solve_k(&ops.m(ep), "first chain element")?;
    let (v1, _) = solve_even(ops, &ep.hilbert().scale(-2.0 * c))?;
    Ok((v1, w1))
}

/// `𝓓 = ⟨Kη, η⟩ + 2c⟨Kη, ∂_cη⟩`.
pub fn momentum_slope_normalized(wave: &StokesWave, deta_dc: &GridFunction) -> f64 {
    let keta = wave.eta.k_op();
    keta.dot(&wave.eta) + 2.0 * wave.c * keta.dot(deta_dc)
}

/// Second element: `Kw̃₂ = -𝓜∂_cη`,
/// `𝓛ṽ₂ = 2c𝓗∂_cη + 𝓜*𝓗η - (𝓓/‖η'‖²)η'`, with `⟨1, w̃₂⟩ = ⟨η', ṽ₂⟩ = 0`.
/// Returns `(ṽ₂, w̃₂, relative residual of the 𝓛 equation)`.
pub fn chain_second(
    ops: &PencilOperators,
    deta_dc: &GridFunction,
    d: f64,
) -> Result<(GridFunction, GridFunction, f64)> {
    let wave = ops.wave();
    let c = wave.c;
    let ep = ops.eta_prime();
    let w2 = solve_k(&ops.m(deta_dc).scale(-1.0), "second chain element")?;
    let ep2 = ep.dot(ep);
    let mut rhs = deta_dc.hilbert().scale(2.0 * c);
    rhs.axpy(1.0, &ops.m_adjoint(&wave.eta.hilbert()));
    if ep2 > 0.0 {
        rhs.axpy(-d / ep2, ep);
    }
    let sol = solve_linearized(
        ops.linearized(),
        &rhs,
        Parity::OddOrthogonal,
        Some(ep),
        CHAIN_RTOL,
        20_000,
    );
    // residual of the unprojected equation: small only if the system is solvable
    let r = rel((&ops.l(&sol.x) - &rhs).norm(), rhs.norm());
    if r > FOLD_RESIDUAL {
        return Err(Error::SolvabilityViolation {
            what: "second chain element",
            defect: r,
        });
    }
    Ok((sol.x, w2, r))
}

/// Third element: `Kw̃₃ = 𝓜ṽ₂`, `𝓛ṽ₃ = -2c𝓗ṽ₂ + 𝓜*w̃₂`, with
/// `⟨1, w̃₃⟩ = ⟨η', ṽ₃⟩ = 0`. Returns `(ṽ₃, w̃₃, relative residual)`.
pub fn chain_third(
    ops: &PencilOperators,
    v2: &GridFunction,
    w2: &GridFunction,
) -> Result<(GridFunction, GridFunction, f64)> {
    let c = ops.speed();
    let w3 = solve_k(&ops.m(v2), "third chain element")?;
    let mut rhs = v2.hilbert().scale(-2.0 * c);
    rhs.axpy(1.0, &ops.m_adjoint(w2));
    let (v3, r) = solve_even(ops, &rhs)?;
    Ok((v3, w3, r))
}

/// `𝓑 = ⟨η', w̃₃⟩ - 2c⟨Kη, ṽ₃⟩`.
pub fn coefficient_b(ops: &PencilOperators, v3: &GridFunction, w3: &GridFunction) -> f64 {
    let wave = ops.wave();
    ops.eta_prime().dot(w3) - 2.0 * wave.c * wave.eta.k_op().dot(v3)
}

/// `α = ⟨1 + 2Kη, ṽ₃⟩`.
pub fn alpha_constant(ops: &PencilOperators, v3: &GridFunction) -> f64 {
    ops.one_plus_two_k_eta().dot(v3)
}

/// `α = ⟨1, 𝓜ṽ₃⟩ / ⟨1, 𝓜1⟩`.
pub fn alpha_ratio(ops: &PencilOperators, v3: &GridFunction) -> f64 {
    let one = GridFunction::constant(ops.n(), 1.0).expect("valid grid");
    ops.m(v3).mean() / ops.m(&one).mean()
}

/// Builds the full chain and its diagnostics.
pub fn build_chain(wave: &StokesWave) -> Result<JordanChain> {
    let ops = PencilOperators::new(wave);
    let c = wave.c;
    let ep = ops.eta_prime().clone();
    let deta_dc = d_eta_dc_with(ops.linearized(), wave)?;
    let d = momentum_slope_normalized(wave, &deta_dc);

    let (v1, w1) = chain_first(&ops)?;
    let r1k = rel((&w1.k_op() - &ops.m(&ep)).norm(), ep.norm());
    let rhs1 = ep.hilbert().scale(-2.0 * c);
    let r1l = rel((&ops.l(&v1) - &rhs1).norm(), rhs1.norm());

    let (v2, w2, r2l) = chain_second(&ops, &deta_dc, d)?;
    let rhs2k = ops.m(&deta_dc).scale(-1.0);
    let r2k = rel((&w2.k_op() - &rhs2k).norm(), rhs2k.norm());

    let (v3, w3, r3l) = chain_third(&ops, &v2, &w2)?;
    let rhs3k = ops.m(&v2);
    let r3k = rel((&w3.k_op() - &rhs3k).norm(), rhs3k.norm());

    let eta_norm = wave.eta.norm();
    let closed_form_defects = [
        rel((&w1 - &wave.eta.hilbert()).norm(), eta_norm),
        rel((&v1 + &deta_dc).norm(), deta_dc.norm()),
    ];
    let parity_defects = [
        wrong_parity(&v1, true),
        wrong_parity(&w1, false),
        wrong_parity(&v2, false),
        wrong_parity(&w2, true),
        wrong_parity(&v3, true),
        wrong_parity(&w3, false),
    ];
    let orthogonality_defects = [w2.mean(), ep.dot(&v2), w3.mean(), ep.dot(&v3)];

    Ok(JordanChain {
        alpha: alpha_constant(&ops, &v3),
        alpha_ratio: alpha_ratio(&ops, &v3),
        b_coeff: coefficient_b(&ops, &v3, &w3),
        eta_prime_norm: ep.norm(),
        residuals: [r1k.max(r1l), r2k.max(r2l), r3k.max(r3l)],
        closed_form_defects,
        parity_defects,
        orthogonality_defects,
        eta_prime: ep,
        d_eta_dc: deta_dc,
        v1,
        w1,
        v2,
        w2,
        v3,
        w3,
        d,
    })
}

/// Thresholds deciding solvability of successive chain equations.
#[derive(Debug, Clone, Copy)]
pub struct MultiplicityTolerances {
    /// Largest relative residual for a solved chain stage.
    pub residual: f64,
    /// `|𝓓|` below which the second stage counts as solvable.
    pub d: f64,
    /// `|𝓑|` below which the chain would extend past the third stage.
    pub b: f64,
}

impl Default for MultiplicityTolerances {
    fn default() -> Self {
        Self {
            residual: 1e-8,
            d: 1e-6,
            b: 1e-6,
        }
    }
}

/// Numerical algebraic multiplicity of the zero eigenvalue.
///
/// The block started by `(0, 1)` always has length two: its first element is
/// `(-1, 0)` and the next equation needs `Kw = -(1 + Kη)`, whose zero mode is
/// `-1`. The block started by `(η', 0)` has length two when `𝓓 ≠ 0` and extends
/// through the third element when `𝓓 = 0`, terminating there when `𝓑 ≠ 0`.
pub fn generalized_kernel_dimension(
    wave: &StokesWave,
    chain: &JordanChain,
    tol: &MultiplicityTolerances,
) -> usize {
    let ops = PencilOperators::new(wave);
    // (0, 1) block
    let one = GridFunction::constant(wave.n(), 1.0).expect("valid grid");
    let minus_one = one.scale(-1.0);
    let l_defect = rel(
        (&ops.l(&minus_one) - &ops.m_adjoint(&one)).norm(),
        ops.m_adjoint(&one).norm(),
    );
    let mut dim = 1;
    if l_defect <= tol.residual {
        dim += 1;
        let zero_mode = ops.m(&minus_one).mean();
        if zero_mode.abs() <= K_SOLVABILITY_TOL {
            dim += 1;
        }
    }
    // (η', 0) block
    dim += 1;
    if chain.residuals[0] <= tol.residual {
        dim += 1;
        if chain.d.abs() <= tol.d && chain.residuals[1] <= tol.residual {
            dim += 1;
            if chain.residuals[2] <= tol.residual {
                dim += 1;
                if chain.b_coeff.abs() <= tol.b {
                    dim += 1;
                }
            }
        }
    }
    dim
}

/// Splitting law at a momentum extremum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalFormPrediction {
    pub c0: f64,
    pub s0: f64,
    /// Normalized `𝓟''(c₀)`.
    pub p2: f64,
    pub b_coeff: f64,
}

/// `|𝓟''|` below which an extremum counts as degenerate.
pub const DEGENERATE_P2: f64 = 1e-8;

impl NormalFormPrediction {
    /// From a branch-convention `𝓟''` (carrying `2π`).
    pub fn from_branch(c0: f64, s0: f64, p2_branch: f64, b_coeff: f64) -> Result<Self> {
        let p2 = p2_branch / (2.0 * PI);
        if p2.abs() < DEGENERATE_P2 || !p2.is_finite() {
            return Err(Error::DegenerateExtremum { p2 });
        }
        Ok(Self { c0, s0, p2, b_coeff })
    }

    /// `λ₁² = -sgn(ε)𝓟''(c₀)/𝓑` on the side of `ε`.
    pub fn lambda1_sq(&self, eps: f64) -> f64 {
        -eps.signum() * self.p2 / self.b_coeff
    }

    /// Slope of `λ²` against `ε = c - c₀`, `-𝓟''(c₀)/𝓑`.
    pub fn slope(&self) -> f64 {
        -self.p2 / self.b_coeff
    }
}

/// `λ² = |ε|λ₁²(ε) = -ε𝓟''(c₀)/𝓑`: a real pair when positive, an imaginary
/// pair when negative.
pub fn predict_splitting(pred: &NormalFormPrediction, eps: f64) -> Result<f64> {
    if pred.p2.abs() < DEGENERATE_P2 {
        return Err(Error::DegenerateExtremum { p2: pred.p2 });
    }
    if eps == 0.0 {
        return Ok(0.0);
    }
    Ok(eps.abs() * pred.lambda1_sq(eps))
}
