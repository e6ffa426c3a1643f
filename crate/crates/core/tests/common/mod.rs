//! Dense reference for the stability pencil, assembled directly in the complex
//! Fourier basis `e^{iku}`, `|k| < N/2`, from the wave's coefficients. Products
//! are Galerkin convolutions, so nothing here touches the matrix-free code.
#![allow(dead_code)]

use babenko::GridFunction;
use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

pub struct DensePencil {
    pub a: CMat,
    pub b: CMat,
}

fn modes(n: usize) -> Vec<i64> {
    let h = n as i64 / 2;
    (-(h - 1)..h).collect()
}

/// Full two-sided coefficient `f̂_k` for `|k| < N/2`.
fn two_sided(f: &GridFunction) -> impl Fn(i64) -> Complex64 {
    let half = f.coefficients();
    let n = f.len() as i64;
    move |k: i64| {
        if k.abs() >= n / 2 {
            Complex64::new(0.0, 0.0)
        } else if k >= 0 {
            half[k as usize]
        } else {
            half[(-k) as usize].conj()
        }
    }
}

fn diag(ks: &[i64], f: impl Fn(i64) -> Complex64) -> CMat {
    let m = ks.len();
    CMat::from_fn(m, m, |i, j| if i == j { f(ks[i]) } else { Complex64::new(0.0, 0.0) })
}

/// Multiplication by the function with coefficients `gh`, truncated to the
/// retained modes.
fn mult(ks: &[i64], gh: impl Fn(i64) -> Complex64) -> CMat {
    let m = ks.len();
    CMat::from_fn(m, m, |i, j| gh(ks[i] - ks[j]))
}

pub fn dense_pencil(eta: &GridFunction, c: f64) -> DensePencil {
    let n = eta.len();
    let ks = modes(n);
    let m = ks.len();
    let one = CMat::identity(m, m);
    let k = diag(&ks, |k| Complex64::new(k.abs() as f64, 0.0));
    let h = diag(&ks, |k| Complex64::new(0.0, (k.signum()) as f64));
    let d = diag(&ks, |k| Complex64::new(0.0, k as f64));
    let eta_hat = two_sided(eta);
    let m_eta = mult(&ks, &eta_hat);
    let m_keta = mult(&ks, |q| eta_hat(q) * q.abs() as f64);
    let m_deta = &d * &m_eta - &m_eta * &d;
    let l = &k * Complex64::new(c * c, 0.0) - (&one + &m_keta) - &m_eta * &k - &k * &m_eta;
    let mm = &one + &m_keta + &m_deta * &h;
    let mm_star = &one + &m_keta - &h * &m_deta;
    let mut a = CMat::zeros(2 * m, 2 * m);
    a.view_mut((0, m), (m, m)).copy_from(&k);
    a.view_mut((m, 0), (m, m)).copy_from(&l);
    let mut b = CMat::zeros(2 * m, 2 * m);
    b.view_mut((0, 0), (m, m)).copy_from(&mm);
    b.view_mut((m, 0), (m, m)).copy_from(&(&h * Complex64::new(-2.0 * c, 0.0)));
    b.view_mut((m, m), (m, m)).copy_from(&mm_star);
    DensePencil { a, b }
}

/// All eigenvalues of `B⁻¹A`.
pub fn dense_eigenvalues(p: &DensePencil) -> Vec<Complex64> {
    let binv_a = p.b.clone().lu().solve(&p.a).expect("B invertible");
    binv_a.schur().eigenvalues().expect("complex Schur").iter().copied().collect()
}

/// The `k` eigenvalues of smallest modulus above `zero_tol`.
pub fn nearest_origin(eigs: &[Complex64], k: usize, zero_tol: f64) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = eigs.iter().copied().filter(|z| z.norm() > zero_tol).collect();
    v.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    v.truncate(k);
    v
}
