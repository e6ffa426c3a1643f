//! The linear stability pencil `A x = λ B x` of a Stokes wave under
//! co-periodic perturbations and a shift-and-invert eigensolver for it.
//!
//! With `x = (v, w)`:
//! `A = [[0, K], [𝓛, 0]]`, `B = [[𝓜, 0], [-2c𝓗, 𝓜*]]`,
//! `𝓜 = 1 + Kη + η'𝓗`, `𝓜* = 1 + Kη - 𝓗(η'·)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::babenko::{LinearizedOperator, StokesWave};
use crate::error::{Error, Result};
use crate::grid::{self, GridFunction};
use crate::krylov::{gmres, KrylovConfig, KrylovOutcome};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Eigenvalues smaller than this are treated as part of the zero block and
/// never reported.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-8;

/// Seed of the Arnoldi starting vector.
pub const DEFAULT_SEED: u64 = 0x5EED_2024;

fn half_spectrum(v: &[f64]) -> Vec<Complex64> {
    let n = v.len();
    let mut h = grid::forward(v);
    h[n / 2] = ZERO;
    h
}

fn hilbert_half(h: &[Complex64]) -> Vec<Complex64> {
    h.iter()
        .enumerate()
        .map(|(k, z)| if k == 0 { ZERO } else { Complex64::new(-z.im, z.re) })
        .collect()
}

fn k_half(h: &[Complex64]) -> Vec<Complex64> {
    h.iter().enumerate().map(|(k, z)| z * k as f64).collect()
}

/// Matrix-free blocks of the stability pencil at a fixed wave.
#[derive(Debug, Clone)]
pub struct PencilOperators {
    wave: StokesWave,
    lin: LinearizedOperator,
    fine_xi_u: Vec<f64>,
    fine_eta_prime: Vec<f64>,
    eta_prime: GridFunction,
    keta: GridFunction,
}

impl PencilOperators {
    pub fn new(wave: &StokesWave) -> Self {
        let n = wave.n();
        let eh = half_spectrum(wave.eta.samples());
        let fine_xi_u = grid::to_fine(n, &k_half(&eh)).iter().map(|x| 1.0 + x).collect();
        let deh: Vec<Complex64> = eh
            .iter()
            .enumerate()
            .map(|(k, z)| z * Complex64::new(0.0, k as f64))
            .collect();
        let fine_eta_prime = grid::to_fine(n, &deh);
        Self {
            lin: LinearizedOperator::new(&wave.eta, wave.c),
            wave: wave.clone(),
            fine_xi_u,
            fine_eta_prime,
            eta_prime: wave.eta.derivative(),
            keta: wave.eta.k_op(),
        }
    }

    pub fn wave(&self) -> &StokesWave {
        &self.wave
    }

    pub fn n(&self) -> usize {
        self.wave.n()
    }

    pub fn speed(&self) -> f64 {
        self.wave.c
    }

    pub fn eta_prime(&self) -> &GridFunction {
        &self.eta_prime
    }

    pub fn linearized(&self) -> &LinearizedOperator {
        &self.lin
    }

    /// `1 + 2Kη`.
    pub fn one_plus_two_k_eta(&self) -> GridFunction {
        self.keta.scale(2.0).map_spectrum(|k, z| if k == 0 { z + 1.0 } else { z })
    }

    pub fn k_slice(&self, v: &[f64]) -> Vec<f64> {
        grid::inverse(v.len(), &k_half(&half_spectrum(v)))
    }

    pub fn hilbert_slice(&self, v: &[f64]) -> Vec<f64> {
        grid::inverse(v.len(), &hilbert_half(&half_spectrum(v)))
    }

    /// `𝓜v = (1 + Kη)v + η'𝓗v`.
    pub fn m_slice(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let vh = half_spectrum(v);
        let fv = grid::to_fine(n, &vh);
        let fhv = grid::to_fine(n, &hilbert_half(&vh));
        let prod: Vec<f64> = (0..fv.len())
            .map(|j| self.fine_xi_u[j] * fv[j] + self.fine_eta_prime[j] * fhv[j])
            .collect();
        let mut out = grid::from_fine(n, &prod);
        out[n / 2] = ZERO;
        grid::inverse(n, &out)
    }

    /// `𝓜*f = (1 + Kη)f - 𝓗(η'f)`.
    pub fn m_adjoint_slice(&self, f: &[f64]) -> Vec<f64> {
        let n = f.len();
        let fh = half_spectrum(f);
        let ff = grid::to_fine(n, &fh);
        let a: Vec<f64> = ff.iter().zip(&self.fine_xi_u).map(|(x, y)| x * y).collect();
        let b: Vec<f64> = ff.iter().zip(&self.fine_eta_prime).map(|(x, y)| x * y).collect();
        let ah = grid::from_fine(n, &a);
        let bh = hilbert_half(&grid::from_fine(n, &b));
        let mut out: Vec<Complex64> = ah.iter().zip(&bh).map(|(x, y)| x - y).collect();
        out[n / 2] = ZERO;
        grid::inverse(n, &out)
    }

    pub fn m(&self, v: &GridFunction) -> GridFunction {
        GridFunction::from_raw(self.m_slice(v.samples()))
    }

    pub fn m_adjoint(&self, f: &GridFunction) -> GridFunction {
        GridFunction::from_raw(self.m_adjoint_slice(f.samples()))
    }

    pub fn l(&self, v: &GridFunction) -> GridFunction {
        self.lin.apply(v)
    }

    /// `A(v, w) = (Kw, 𝓛v)` on the stacked vector `[v; w]`.
    pub fn apply_a_stacked(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let (v, w) = x.split_at(n);
        let mut out = self.k_slice(w);
        out.extend(self.lin.apply_slice(v));
        out
    }

    /// `B(v, w) = (𝓜v, -2c𝓗v + 𝓜*w)` on the stacked vector `[v; w]`.
    pub fn apply_b_stacked(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let (v, w) = x.split_at(n);
        let mut out = self.m_slice(v);
        let hv = self.hilbert_slice(v);
        let mw = self.m_adjoint_slice(w);
        let two_c = 2.0 * self.speed();
        out.extend(hv.iter().zip(&mw).map(|(h, m)| m - two_c * h));
        out
    }

    pub fn apply_a(&self, v: &GridFunction, w: &GridFunction) -> (GridFunction, GridFunction) {
        split(self.apply_a_stacked(&stack(v, w)))
    }

    pub fn apply_b(&self, v: &GridFunction, w: &GridFunction) -> (GridFunction, GridFunction) {
        split(self.apply_b_stacked(&stack(v, w)))
    }
}

fn stack(v: &GridFunction, w: &GridFunction) -> Vec<f64> {
    let mut x = v.samples().to_vec();
    x.extend_from_slice(w.samples());
    x
}

fn split(x: Vec<f64>) -> (GridFunction, GridFunction) {
    let n = x.len() / 2;
    let w = x[n..].to_vec();
    let mut v = x;
    v.truncate(n);
    (GridFunction::from_raw(v), GridFunction::from_raw(w))
}

/// Relative residual targeted by the inner solves of `B⁻¹`.
pub const B_INVERSE_RTOL: f64 = 1e-12;

/// `B⁻¹(r₁, r₂)` by block substitution: `𝓜v = r₁`, then `𝓜*w = r₂ + 2c𝓗v`,
/// each by unpreconditioned GMRES.
pub fn apply_b_inverse(
    ops: &PencilOperators,
    r1: &GridFunction,
    r2: &GridFunction,
) -> Result<(GridFunction, GridFunction)> {
    let cfg = KrylovConfig {
        rtol: B_INVERSE_RTOL,
        max_iter: 2000,
        restart: 80,
    };
    let solve = |op: &dyn Fn(&[f64]) -> Vec<f64>, b: &GridFunction| -> Result<GridFunction> {
        let out = gmres(op, |r| r.to_vec(), b.samples(), None, &cfg);
        if !out.converged {
            return Err(Error::IterationFailure {
                what: "B inverse",
                residual: out.relative_residual,
            });
        }
        Ok(GridFunction::from_raw(out.x))
    };
    let v = solve(&|x| ops.m_slice(x), r1)?;
    let mut rhs = r2.clone();
    rhs.axpy(2.0 * ops.speed(), &v.hilbert());
    let w = solve(&|x| ops.m_adjoint_slice(x), &rhs)?;
    Ok((v, w))
}

/// `(⟨1 + 2Kη, v⟩, ⟨η', w⟩ - 2c⟨Kη, v⟩)`, both zero for every eigenvector with
/// nonzero eigenvalue.
pub fn constraint_residuals(ops: &PencilOperators, v: &GridFunction, w: &GridFunction) -> (f64, f64) {
    let l1 = v.mean() + 2.0 * ops.keta.dot(v);
    let l2 = ops.eta_prime.dot(w) - 2.0 * ops.speed() * ops.keta.dot(v);
    (l1, l2)
}

/// Complex eigenpair of the pencil.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub lambda: Complex64,
    pub v: (GridFunction, GridFunction),
    pub w: (GridFunction, GridFunction),
    /// `‖Ax - λBx‖` for `x` normalized to unit Euclidean norm.
    pub residual: f64,
    /// Moduli of the two constraint functionals at `x`.
    pub constraints: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub shift: Complex64,
    /// Ordered by distance from the shift.
    pub pairs: Vec<Eigenpair>,
    pub seed: u64,
    pub krylov_dimension: usize,
}

impl SpectrumResult {
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.pairs.iter().map(|p| p.lambda).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EigenConfig {
    pub seed: u64,
    /// Largest Krylov basis before giving up.
    pub max_dimension: usize,
    /// Ritz pairs are accepted when the estimated eigenvalue error is below
    /// `ritz_tol·max(1, |λ|)`.
    pub ritz_tol: f64,
    pub inner: KrylovConfig,
    /// Inner solves that stagnate above `inner.rtol` are still used when their
    /// relative residual is below this.
    pub inner_accept: f64,
    /// Accepted pairs must have `‖Ax - λBx‖ ≤ residual_tol·‖x‖`.
    pub residual_tol: f64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            max_dimension: 400,
            ritz_tol: 1e-11,
            inner: KrylovConfig {
                rtol: 1e-10,
                max_iter: 6000,
                restart: 300,
            },
            inner_accept: 1e-6,
            residual_tol: 1e-7,
        }
    }
}

type CVec = Vec<Complex64>;

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn cnorm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn re_im(x: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    (x.iter().map(|z| z.re).collect(), x.iter().map(|z| z.im).collect())
}

fn join(re: &[f64], im: &[f64]) -> CVec {
    re.iter().zip(im).map(|(a, b)| Complex64::new(*a, *b)).collect()
}

/// Shift-and-invert application `x ↦ (A - σB)⁻¹Bx` restricted to the
/// constraint subspace.
struct ShiftInvert<'a> {
    ops: &'a PencilOperators,
    sigma: Complex64,
    inner: KrylovConfig,
    inner_accept: f64,
    /// `(functional, correction vector)` pairs of the oblique projector.
    deflation: Vec<(CVec, CVec)>,
}

impl ShiftInvert<'_> {
    /// Applies a real operator to a complex vector.
    fn real_op(f: impl Fn(&[f64]) -> Vec<f64>, x: &[Complex64]) -> CVec {
        let (xr, xi) = re_im(x);
        join(&f(&xr), &f(&xi))
    }

    /// `K⁺`, the inverse of `K` on mean-free functions, zero on constants.
    fn k_pinv(x: &[f64]) -> Vec<f64> {
        let h = half_spectrum(x);
        let h: Vec<Complex64> = h
            .iter()
            .enumerate()
            .map(|(k, z)| if k == 0 { ZERO } else { z / k as f64 })
            .collect();
        grid::inverse(x.len(), &h)
    }

    /// Schur complement `S(σ)v = 𝓛v + 2cσ𝓗v - σ²𝓜*K⁺𝓜v` bordered by the mean
    /// of `𝓜v`, acting on `(v, ω)`.
    fn schur_apply(&self, v: &[Complex64], omega: Complex64) -> (CVec, Complex64) {
        let ops = self.ops;
        let sigma = self.sigma;
        let two_c = 2.0 * ops.speed();
        let lv = Self::real_op(|x| ops.lin.apply_slice(x), v);
        let hv = Self::real_op(|x| ops.hilbert_slice(x), v);
        let mv = Self::real_op(|x| ops.m_slice(x), v);
        let kmv = Self::real_op(|x| ops.m_adjoint_slice(&Self::k_pinv(x)), &mv);
        let m_star_one = ops.m_adjoint_slice(&vec![1.0; v.len()]);
        let out = (0..v.len())
            .map(|j| lv[j] + two_c * sigma * hv[j] - sigma * sigma * kmv[j] - omega * m_star_one[j])
            .collect();
        let mean = mv.iter().sum::<Complex64>() / v.len() as f64;
        (out, mean)
    }

    fn accept(&self, out: KrylovOutcome) -> Result<Vec<f64>> {
        if out.converged || out.relative_residual <= self.inner_accept {
            Ok(out.x)
        } else {
            Err(Error::InnerSolveFailure {
                residual: out.relative_residual,
            })
        }
    }

    /// `(A - σB)⁻¹r` by eliminating `w = K⁺(r₁ + σ𝓜v) + ω/σ`.
    fn solve(&self, r: &[Complex64]) -> Result<CVec> {
        let ops = self.ops;
        let n = ops.n();
        let sigma = self.sigma;
        let (r1, r2) = r.split_at(n);
        let kr1 = Self::real_op(|x| ops.m_adjoint_slice(&Self::k_pinv(x)), r1);
        let rhs_v: CVec = r2.iter().zip(&kr1).map(|(a, b)| a + sigma * b).collect();
        let rhs_omega = -r1.iter().sum::<Complex64>() / (n as f64) / sigma;

        // unknowns stacked as [v; ω], real and imaginary parts side by side
        let m = n + 1;
        let pack = |v: &[Complex64], om: Complex64| -> Vec<f64> {
            let mut out: Vec<f64> = v.iter().map(|z| z.re).collect();
            out.push(om.re);
            out.extend(v.iter().map(|z| z.im));
            out.push(om.im);
            out
        };
        let unpack = |x: &[f64]| -> (CVec, Complex64) {
            let v = (0..n).map(|j| Complex64::new(x[j], x[m + j])).collect();
            (v, Complex64::new(x[n], x[m + n]))
        };
        let op = |x: &[f64]| {
            let (v, om) = unpack(x);
            let (sv, mean) = self.schur_apply(&v, om);
            pack(&sv, mean)
        };
        let pre = |x: &[f64]| {
            let mut out = ops.lin.precondition_slice(&x[..n]);
            out.push(x[n]);
            out.extend(ops.lin.precondition_slice(&x[m..m + n]));
            out.push(x[m + n]);
            out
        };
        let b = pack(&rhs_v, rhs_omega);
        let sol = if sigma.im == 0.0 {
            // real shift: real and imaginary parts decouple
            let mut x = vec![0.0; 2 * m];
            for half in 0..2 {
                let part = &b[half * m..(half + 1) * m];
                if part.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let op_r = |y: &[f64]| {
                    let mut full = vec![0.0; 2 * m];
                    full[..m].copy_from_slice(y);
                    let mut out = op(&full);
                    out.truncate(m);
                    out
                };
                let pre_r = |y: &[f64]| {
                    let mut out = ops.lin.precondition_slice(&y[..n]);
                    out.push(y[n]);
                    out
                };
                let out = self.accept(gmres(op_r, pre_r, part, None, &self.inner))?;
                x[half * m..(half + 1) * m].copy_from_slice(&out);
            }
            x
        } else {
            self.accept(gmres(op, pre, &b, None, &self.inner))?
        };
        let (v, omega) = unpack(&sol);
        let mv = Self::real_op(|x| ops.m_slice(x), &v);
        let t: CVec = r1.iter().zip(&mv).map(|(a, b)| a + sigma * b).collect();
        let w0 = omega / sigma;
        let w = Self::real_op(Self::k_pinv, &t).into_iter().map(|z| z + w0);
        Ok(v.into_iter().chain(w).collect())
    }

    fn project(&self, x: &mut CVec) {
        for (ell, z) in &self.deflation {
            let a: Complex64 = ell.iter().zip(x.iter()).map(|(l, xi)| l * xi).sum();
            for (xi, zi) in x.iter_mut().zip(z) {
                *xi -= a * zi;
            }
        }
    }

    fn apply(&self, x: &[Complex64]) -> Result<CVec> {
        let ops = self.ops;
        let bx = Self::real_op(|y| ops.apply_b_stacked(y), x);
        let mut y = self.solve(&bx)?;
        self.project(&mut y);
        Ok(y)
    }
}

/// Constraint functionals and their dual corrections: `ℓ₁ = ⟨1 + 2Kη, v⟩`
/// with `z₁ = (1, 0)`, and `ℓ₂ = ⟨η', w⟩ - 2c⟨Kη, v⟩` with `z₂ = (0, η'/‖η'‖²)`.
/// Rows are Euclidean weights on the stacked vector.
fn deflation_pairs(ops: &PencilOperators) -> Vec<(CVec, CVec)> {
    let n = ops.n();
    let nf = n as f64;
    let to_c = |x: Vec<f64>| x.into_iter().map(|r| Complex64::new(r, 0.0)).collect::<CVec>();
    let mut out = Vec::new();
    let mut ell1 = ops.one_plus_two_k_eta().samples().iter().map(|x| x / nf).collect::<Vec<_>>();
    ell1.extend(vec![0.0; n]);
    let mut z1 = vec![1.0; n];
    z1.extend(vec![0.0; n]);
    out.push((to_c(ell1), to_c(z1)));
    let ep = ops.eta_prime();
    let ep2 = ep.dot(ep);
    if ep2 > 0.0 {
        let two_c = 2.0 * ops.speed();
        let mut ell2: Vec<f64> = ops.keta.samples().iter().map(|x| -two_c * x / nf).collect();
        ell2.extend(ep.samples().iter().map(|x| x / nf));
        let mut z2 = vec![0.0; n];
        z2.extend(ep.samples().iter().map(|x| x / ep2));
        out.push((to_c(ell2), to_c(z2)));
    }
    out
}

/// Exact kernel vectors `(η', 0)` and `(0, 1)`, normalized; both lie in the
/// constraint subspace.
fn kernel_vectors(ops: &PencilOperators) -> Vec<CVec> {
    let n = ops.n();
    let mut out = Vec::new();
    let ep = ops.eta_prime();
    if ep.max_abs() > 0.0 {
        let mut k: CVec = ep.samples().iter().map(|x| Complex64::new(*x, 0.0)).collect();
        k.extend(vec![ZERO; n]);
        let s = cnorm(&k);
        k.iter_mut().for_each(|z| *z /= s);
        out.push(k);
    }
    let mut k = vec![ZERO; n];
    k.extend(vec![Complex64::new(1.0 / (n as f64).sqrt(), 0.0); n]);
    out.push(k);
    out
}

/// Ritz vectors are orthogonal to the locked kernel, so an eigenvector is
/// `x + Qc`. Since `AQ = 0`, `c` solves `λBQc = (A - λB)x` in least squares.
fn restore_kernel_component(ops: &PencilOperators, lambda: Complex64, locked: &[CVec], x: &mut CVec) {
    if locked.is_empty() {
        return;
    }
    let apply = |f: &dyn Fn(&[f64]) -> Vec<f64>, y: &[Complex64]| {
        let (yr, yi) = re_im(y);
        join(&f(&yr), &f(&yi))
    };
    let ax = apply(&|y| ops.apply_a_stacked(y), x);
    let bx = apply(&|y| ops.apply_b_stacked(y), x);
    let rhs: CVec = ax.iter().zip(&bx).map(|(a, b)| a - lambda * b).collect();
    let cols: Vec<CVec> = locked
        .iter()
        .map(|q| apply(&|y| ops.apply_b_stacked(y), q).into_iter().map(|z| lambda * z).collect())
        .collect();
    let m = DMatrix::from_fn(rhs.len(), cols.len(), |i, j| cols[j][i]);
    let b = nalgebra::DVector::from_column_slice(&rhs);
    if let Ok(c) = m.svd(true, true).solve(&b, 1e-14) {
        for (q, cj) in locked.iter().zip(c.iter()) {
            for (xi, qi) in x.iter_mut().zip(q) {
                *xi += cj * qi;
            }
        }
    }
}

/// Eigenvalues and eigenvectors of a small complex upper-Hessenberg matrix.
fn small_eig(h: &DMatrix<Complex64>) -> Vec<(Complex64, CVec)> {
    let m = h.nrows();
    let (q, t) = h.clone().schur().unpack();
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let ti = t[(i, i)];
        let mut y = vec![ZERO; m];
        y[i] = Complex64::new(1.0, 0.0);
        for r in (0..i).rev() {
            let mut s = ZERO;
            for c in r + 1..=i {
                s += t[(r, c)] * y[c];
            }
            let mut d = t[(r, r)] - ti;
            if d.norm() < 1e-300 {
                d = Complex64::new(1e-300, 0.0);
            }
            y[r] = -s / d;
        }
        let mut s = vec![ZERO; m];
        for r in 0..m {
            for c in 0..=i {
                s[r] += q[(r, c)] * y[c];
            }
        }
        let nrm = cnorm(&s);
        s.iter_mut().for_each(|z| *z /= nrm);
        out.push((ti, s));
    }
    out
}

/// The `k` eigenvalues of `B⁻¹A` nearest `sigma` (zero eigenvalues excluded),
/// by Arnoldi iteration on `(A - σB)⁻¹B` restricted to the constraint subspace
/// with the kernel vectors locked.
pub fn eigen_near(ops: &PencilOperators, sigma: Complex64, k: usize) -> Result<SpectrumResult> {
    eigen_near_with(ops, sigma, k, &EigenConfig::default())
}

pub fn eigen_near_with(
    ops: &PencilOperators,
    sigma: Complex64,
    k: usize,
    cfg: &EigenConfig,
) -> Result<SpectrumResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("requested zero eigenvalues".into()));
    }
    if sigma.norm() == 0.0 {
        return Err(Error::InvalidArgument("shift must be nonzero: zero is always an eigenvalue".into()));
    }
    let n = ops.n();
    let dim = 2 * n;
    let si = ShiftInvert {
        ops,
        sigma,
        inner: cfg.inner,
        inner_accept: cfg.inner_accept,
        deflation: deflation_pairs(ops),
    };
    let locked = kernel_vectors(ops);
    let free_dim = dim - si.deflation.len() - locked.len();
    let max_m = cfg.max_dimension.min(free_dim);
    if k > max_m {
        return Err(Error::InvalidArgument(format!(
            "{k} eigenvalues requested but the Krylov space is capped at {max_m}"
        )));
    }

    let orthogonalize = |x: &mut CVec, basis: &[CVec], coeffs: Option<&mut Vec<Complex64>>| {
        let mut acc = vec![ZERO; basis.len()];
        for _ in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let h = cdot(q, x);
                acc[i] += h;
                for (xi, qi) in x.iter_mut().zip(q) {
                    *xi -= h * qi;
                }
            }
        }
        if let Some(c) = coeffs {
            *c = acc;
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x0: CVec = (0..dim)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, 0.0))
        .collect();
    si.project(&mut x0);
    orthogonalize(&mut x0, &locked, None);
    let nrm = cnorm(&x0);
    x0.iter_mut().for_each(|z| *z /= nrm);

    let mut basis: Vec<CVec> = vec![x0];
    let mut h = DMatrix::<Complex64>::zeros(max_m + 1, max_m);
    let mut converged: Vec<(Complex64, CVec)> = Vec::new();
    let mut m = 0;
    while m < max_m {
        let mut y = si.apply(&basis[m])?;
        orthogonalize(&mut y, &locked, None);
        let mut coeffs = Vec::new();
        orthogonalize(&mut y, &basis, Some(&mut coeffs));
        for (i, c) in coeffs.iter().enumerate() {
            h[(i, m)] = *c;
        }
        let beta = cnorm(&y);
        h[(m + 1, m)] = Complex64::new(beta, 0.0);
        m += 1;
        let breakdown = beta <= 1e-14 * h.column(m - 1).norm();
        if (m >= k + 4 && m % 4 == 0) || breakdown || m == max_m {
            let hm = h.view((0, 0), (m, m)).into_owned();
            let mut ritz: Vec<(Complex64, CVec, f64)> = small_eig(&hm)
                .into_iter()
                .filter(|(theta, _)| {
                    theta.norm() > 0.0 && (sigma + 1.0 / theta).norm() > ZERO_EIGENVALUE_TOL
                })
                .map(|(theta, s)| {
                    let est = beta * s[m - 1].norm() / theta.norm_sqr();
                    (theta, s, est)
                })
                .collect();
            ritz.sort_by(|a, b| b.0.norm().total_cmp(&a.0.norm()));
            let good: Vec<_> = ritz
                .iter()
                .take(k)
                .filter(|(theta, _, est)| {
                    let lam = sigma + 1.0 / theta;
                    *est <= cfg.ritz_tol * lam.norm().max(1.0)
                })
                .collect();
            if good.len() == k || breakdown || m == max_m {
                converged = ritz
                    .into_iter()
                    .take(k)
                    .map(|(theta, s, _)| (theta, s))
                    .collect();
                break;
            }
        }
        if breakdown {
            break;
        }
        y.iter_mut().for_each(|z| *z /= beta);
        basis.push(y);
    }
    if converged.len() < k {
        return Err(Error::ArnoldiBreakdown(format!(
            "only {} of {k} Ritz pairs available at dimension {m}",
            converged.len()
        )));
    }

    let mut pairs = Vec::with_capacity(k);
    for (theta, s) in converged {
        let lambda = sigma + 1.0 / theta;
        let mut x = vec![ZERO; dim];
        for (sj, q) in s.iter().zip(&basis) {
            for (xi, qi) in x.iter_mut().zip(q) {
                *xi += sj * qi;
            }
        }
        restore_kernel_component(ops, lambda, &locked, &mut x);
        let nrm = cnorm(&x);
        x.iter_mut().for_each(|z| *z /= nrm);
        let (xr, xi) = re_im(&x);
        let (ar, ai) = (ops.apply_a_stacked(&xr), ops.apply_a_stacked(&xi));
        let (br, bi) = (ops.apply_b_stacked(&xr), ops.apply_b_stacked(&xi));
        let residual = (0..dim)
            .map(|j| {
                let ax = Complex64::new(ar[j], ai[j]);
                let bx = Complex64::new(br[j], bi[j]);
                (ax - lambda * bx).norm_sqr()
            })
            .sum::<f64>()
            .sqrt();
        if residual > cfg.residual_tol {
            return Err(Error::ArnoldiBreakdown(format!(
                "eigenpair near {lambda} has residual {residual:.3e}"
            )));
        }
        let (vr, wr) = split(xr);
        let (vi, wi) = split(xi);
        let (c1r, c2r) = constraint_residuals(ops, &vr, &wr);
        let (c1i, c2i) = constraint_residuals(ops, &vi, &wi);
        pairs.push(Eigenpair {
            lambda,
            v: (vr, vi),
            w: (wr, wi),
            residual,
            constraints: (c1r.hypot(c1i), c2r.hypot(c2i)),
        });
    }
    pairs.sort_by(|a, b| (a.lambda - sigma).norm().total_cmp(&(b.lambda - sigma).norm()));
    Ok(SpectrumResult {
        shift: sigma,
        pairs,
        seed: cfg.seed,
        krylov_dimension: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::babenko::{solve_at_steepness, stokes_expansion, NewtonConfig};

    fn small_wave() -> StokesWave {
        let (eta, c) = stokes_expansion(64, 0.1).unwrap();
        solve_at_steepness(&eta, c, 0.1 / std::f64::consts::PI, &NewtonConfig::default()).unwrap()
    }

    #[test]
    fn m_identities() {
        let w = small_wave();
        let ops = PencilOperators::new(&w);
        let ep = ops.eta_prime().clone();
        assert!((&ops.m(&ep) - &ep).max_abs() < 1e-11);
        let one = GridFunction::constant(64, 1.0).unwrap();
        assert!((&ops.m_adjoint(&one) - &ops.one_plus_two_k_eta()).max_abs() < 1e-11);
        let f = GridFunction::from_fn(64, |u| (3.0 * u).sin() + 0.2 * u.cos()).unwrap();
        let g = GridFunction::from_fn(64, |u| (2.0 * u).cos() - 0.5 * (5.0 * u).sin()).unwrap();
        let lhs = f.dot(&ops.m(&g));
        let rhs = ops.m_adjoint(&f).dot(&g);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn b_inverse_in_flat_water() {
        let w = StokesWave::flat(32, 1.2).unwrap();
        let ops = PencilOperators::new(&w);
        let r1 = GridFunction::from_fn(32, |u| u.sin()).unwrap();
        let r2 = GridFunction::from_fn(32, |u| (2.0 * u).cos()).unwrap();
        let (v, x) = apply_b_inverse(&ops, &r1, &r2).unwrap();
        assert!((&v - &r1).max_abs() < 1e-14);
        let mut want = r2.clone();
        want.axpy(2.4, &r1.hilbert());
        assert!((&x - &want).max_abs() < 1e-13);
    }

    #[test]
    fn b_inverse_round_trip() {
        let w = small_wave();
        let ops = PencilOperators::new(&w);
        let r1 = GridFunction::from_fn(64, |u| u.sin() + 0.3 * (4.0 * u).cos() + 0.1 * (7.0 * u).sin()).unwrap();
        let r2 = GridFunction::from_fn(64, |u| (2.0 * u).cos() * u.sin()).unwrap();
        let (v, x) = apply_b_inverse(&ops, &r1, &r2).unwrap();
        let (b1, b2) = ops.apply_b(&v, &x);
        assert!((&b1 - &r1).max_abs() < 1e-11);
        assert!((&b2 - &r2).max_abs() < 1e-11);
    }

    #[test]
    fn constraints_vanish_on_kernel() {
        let w = small_wave();
        let ops = PencilOperators::new(&w);
        let z = GridFunction::zeros(64).unwrap();
        let one = GridFunction::constant(64, 1.0).unwrap();
        let (a, b) = constraint_residuals(&ops, ops.eta_prime(), &z);
        assert!(a.abs() < 1e-15 && b.abs() < 1e-15);
        let (a, b) = constraint_residuals(&ops, &z, &one);
        assert!(a == 0.0 && b.abs() < 1e-15);
    }

    #[test]
    fn flat_water_dispersion() {
        // λ = i(cn ± √|n|)
        let c = 1.2;
        let w = StokesWave::flat(64, c).unwrap();
        let ops = PencilOperators::new(&w);
        let sigma = Complex64::new(0.0, 1.0);
        let res = eigen_near(&ops, sigma, 4).unwrap();
        let mut want: Vec<f64> = (1..32)
            .flat_map(|n| {
                let nf = n as f64;
                [c * nf + nf.sqrt(), c * nf - nf.sqrt(), -c * nf + nf.sqrt(), -c * nf - nf.sqrt()]
            })
            .collect();
        want.sort_by(|a, b| (a - 1.0).abs().total_cmp(&(b - 1.0).abs()));
        for (p, wv) in res.pairs.iter().zip(&want) {
            assert!(p.lambda.re.abs() < 1e-10);
            assert!((p.lambda.im - wv).abs() < 1e-10, "{} vs {}", p.lambda, wv);
        }
    }
}
