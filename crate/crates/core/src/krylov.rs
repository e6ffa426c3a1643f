//! Matrix-free Krylov solvers.
//!
//! Operators and preconditioners are closures on flat `f64` slices. Vectors
//! use the plain Euclidean dot product; both methods are invariant under a
//! constant rescaling of the inner product, so the normalized grid inner
//! product needs no special treatment.

use crate::grid::dot;

/// Stopping rule shared by the solvers.
#[derive(Debug, Clone, Copy)]
pub struct KrylovConfig {
    /// Relative residual target `‖b - A x‖ / ‖b‖` (MINRES measures it in the
    /// preconditioner norm).
    pub rtol: f64,
    pub max_iter: usize,
    /// GMRES restart length; ignored by MINRES.
    pub restart: usize,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            max_iter: 500,
            restart: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KrylovOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual estimate at exit.
    pub relative_residual: f64,
    pub converged: bool,
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Preconditioned MINRES for a symmetric (possibly indefinite or singular
/// but consistent) operator. `precond` applies the inverse of a symmetric
/// positive definite preconditioner.
pub fn minres<A, M>(op: A, precond: M, b: &[f64], cfg: &KrylovConfig) -> KrylovOutcome
where
    A: Fn(&[f64]) -> Vec<f64>,
    M: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r1 = b.to_vec();
    let mut y = precond(&r1);
    let beta1 = dot(&r1, &y);
    if beta1 <= 0.0 {
        return KrylovOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let beta1 = beta1.sqrt();
    let mut r2 = r1.clone();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut rel = 1.0;

    for itn in 1..=cfg.max_iter {
        let s = 1.0 / beta;
        let v: Vec<f64> = y.iter().map(|yi| s * yi).collect();
        y = op(&v);
        if itn >= 2 {
            let f = beta / oldb;
            for (yi, ri) in y.iter_mut().zip(&r1) {
                *yi -= f * ri;
            }
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        for (yi, ri) in y.iter_mut().zip(&r2) {
            *yi -= f * ri;
        }
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        y = precond(&r2);
        oldb = beta;
        let bb = dot(&r2, &y);
        if bb < 0.0 {
            // preconditioner not positive definite
            break;
        }
        beta = bb.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        let w1 = std::mem::replace(&mut w2, std::mem::take(&mut w));
        w = v
            .iter()
            .zip(w1.iter().zip(&w2))
            .map(|(vi, (a, b))| (vi - oldeps * a - delta * b) * denom)
            .collect();
        for (xi, wi) in x.iter_mut().zip(&w) {
            *xi += phi * wi;
        }
        rel = phibar / beta1;
        if rel <= cfg.rtol || beta == 0.0 {
            return KrylovOutcome {
                x,
                iterations: itn,
                relative_residual: rel,
                converged: true,
            };
        }
    }
    KrylovOutcome {
        x,
        iterations: cfg.max_iter,
        relative_residual: rel,
        converged: false,
    }
}

/// Restarted GMRES stops once a cycle reduces the true residual by less than this factor.
pub const STAGNATION_RATIO: f64 = 0.9;

/// Restarted GMRES with right preconditioning, so the monitored residual is
/// the true one. `x0` is an optional initial guess.
pub fn gmres<A, M>(
    op: A,
    precond: M,
    b: &[f64],
    x0: Option<&[f64]>,
    cfg: &KrylovConfig,
) -> KrylovOutcome
where
    A: Fn(&[f64]) -> Vec<f64>,
    M: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    if bnorm == 0.0 {
        return KrylovOutcome {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let m = cfg.restart.max(1);
    let mut total = 0;
    let mut rel = f64::INFINITY;
    let mut last_cycle = f64::INFINITY;

    while total < cfg.max_iter {
        let ax = op(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        rel = beta / bnorm;
        // a restart cycle that gains less than 10% has hit the roundoff floor
        if rel > STAGNATION_RATIO * last_cycle {
            break;
        }
        last_cycle = rel;
        if rel <= cfg.rtol {
            return KrylovOutcome {
                x,
                iterations: total,
                relative_residual: rel,
                converged: true,
            };
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;

        for j in 0..m {
            if total >= cfg.max_iter {
                break;
            }
            total += 1;
            let z = precond(&basis[j]);
            let mut wv = op(&z);
            zs.push(z);
            // modified Gram-Schmidt, two passes
            for _ in 0..2 {
                for (i, qi) in basis.iter().enumerate() {
                    let hij = dot(&wv, qi);
                    h[i][j] += hij;
                    for (wk, qk) in wv.iter_mut().zip(qi) {
                        *wk -= hij * qk;
                    }
                }
            }
            let hn = norm(&wv);
            h[j + 1][j] = hn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let d = h[j][j].hypot(h[j + 1][j]);
            if d == 0.0 {
                cs[j] = 1.0;
                sn[j] = 0.0;
            } else {
                cs[j] = h[j][j] / d;
                sn[j] = h[j + 1][j] / d;
            }
            h[j][j] = d;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            k_used = j + 1;
            rel = g[j + 1].abs() / bnorm;
            if rel <= cfg.rtol || hn == 0.0 {
                break;
            }
            basis.push(wv.iter().map(|wk| wk / hn).collect());
        }
        // back substitution
        let mut yv = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for l in i + 1..k_used {
                s -= h[i][l] * yv[l];
            }
            yv[i] = s / h[i][i];
        }
        for (yi, z) in yv.iter().zip(&zs) {
            for (xk, zk) in x.iter_mut().zip(z) {
                *xk += yi * zk;
            }
        }
        if rel <= cfg.rtol {
            let ax = op(&x);
            let true_rel = norm(
                &b.iter()
                    .zip(&ax)
                    .map(|(bi, ai)| bi - ai)
                    .collect::<Vec<_>>(),
            ) / bnorm;
            if true_rel <= cfg.rtol * 10.0 {
                return KrylovOutcome {
                    x,
                    iterations: total,
                    relative_residual: true_rel,
                    converged: true,
                };
            }
            rel = true_rel;
        }
    }
    KrylovOutcome {
        x,
        iterations: total,
        relative_residual: rel,
        converged: false,
    }
}
