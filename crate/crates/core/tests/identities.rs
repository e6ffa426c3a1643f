use std::f64::consts::PI;

use babenko::babenko::{stokes_expansion, NewtonConfig};
use babenko::conserved::{conserved_eval, traveling_potential, wave_action, wave_energy, wave_mass, wave_momentum};
use babenko::continuation::{trace_branch, ContinuationConfig};
use babenko::{babenko_residual, linearized_apply, solve_at_steepness, GridFunction, StokesWave};
use num_complex::Complex64;
use proptest::prelude::*;

const N: usize = 256;

fn band_limited(coeffs: &[(f64, f64)]) -> GridFunction {
    let mut h = vec![Complex64::new(0.0, 0.0); N / 2 + 1];
    for (k, (re, im)) in coeffs.iter().enumerate() {
        h[k] = if k == 0 { Complex64::new(*re, 0.0) } else { Complex64::new(*re, *im) / (1.0 + k as f64) };
    }
    GridFunction::from_coefficients(N, &h).unwrap()
}

fn coeffs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..N / 2)
}

fn wave_at(s: f64) -> StokesWave {
    let (eta, c) = stokes_expansion(N, PI * s).unwrap();
    solve_at_steepness(&eta, c, s, &NewtonConfig::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symbols_are_adjoint_and_positive(a in coeffs(), b in coeffs()) {
        let (f, g) = (band_limited(&a), band_limited(&b));
        let scale = (1.0 + f.norm()) * (1.0 + g.norm()) * N as f64;
        let k_sym = f.k_op().inner(&g).unwrap() - f.inner(&g.k_op()).unwrap();
        prop_assert!(k_sym.abs() <= 1e-12 * scale);
        let h_skew = f.hilbert().inner(&g).unwrap() + f.inner(&g.hilbert()).unwrap();
        prop_assert!(h_skew.abs() <= 1e-12 * scale);
        prop_assert!(f.k_op().inner(&f).unwrap() >= -1e-12 * scale);
        // 𝓗² = -(1 - mean) and K = -𝓗∂
        let mut hh = f.hilbert().hilbert();
        hh.axpy(1.0, &f);
        let mean = GridFunction::constant(N, f.mean()).unwrap();
        prop_assert!((&hh - &mean).max_abs() <= 1e-12 * (1.0 + f.max_abs()));
        let k_from_d = f.derivative().hilbert().scale(-1.0);
        prop_assert!((&k_from_d - &f.k_op()).max_abs() <= 1e-12 * N as f64 * (1.0 + f.max_abs()));
    }

    #[test]
    fn product_commutes_and_distributes(a in coeffs(), b in coeffs(), c in coeffs()) {
        let (f, g, h) = (band_limited(&a), band_limited(&b), band_limited(&c));
        let fg = f.product(&g).unwrap();
        prop_assert!((&fg - &g.product(&f).unwrap()).max_abs() <= 1e-12 * (1.0 + fg.max_abs()));
        let lhs = f.product(&(&g + &h)).unwrap();
        let rhs = &fg + &f.product(&h).unwrap();
        prop_assert!((&lhs - &rhs).max_abs() <= 1e-12 * (1.0 + lhs.max_abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn linearization_kernel_and_constant(s in 0.005..0.09f64) {
        let w = wave_at(s);
        let ep = w.eta.derivative();
        let l_ep = linearized_apply(&w.eta, w.c, &ep);
        prop_assert!(l_ep.max_abs() <= 1e-10, "L eta' = {:e}", l_ep.max_abs());
        let one = GridFunction::constant(N, 1.0).unwrap();
        let l_one = linearized_apply(&w.eta, w.c, &one);
        let mut want = w.eta.k_op().scale(-2.0);
        want.axpy(-1.0, &one);
        prop_assert!((&l_one - &want).max_abs() <= 1e-10);
    }

    #[test]
    fn linearization_matches_finite_difference(s in 0.005..0.09f64, a in coeffs()) {
        let w = wave_at(s);
        let v = band_limited(&a).project_even();
        let v = v.scale(1.0 / (1.0 + v.max_abs()));
        let h = 1e-5;
        let mut up = w.eta.clone();
        up.axpy(h, &v);
        let mut down = w.eta.clone();
        down.axpy(-h, &v);
        let fd = (&babenko_residual(&up, w.c) - &babenko_residual(&down, w.c)).scale(0.5 / h);
        let lv = linearized_apply(&w.eta, w.c, &v);
        prop_assert!((&fd - &lv).max_abs() <= 1e-6 * (1.0 + lv.max_abs()));
    }

    #[test]
    fn action_identity(s in 0.005..0.09f64) {
        let w = wave_at(s);
        let (p, h, e) = (wave_momentum(&w), wave_energy(&w), wave_action(&w));
        prop_assert!((e - (w.c * p - h)).abs() <= 1e-11 * e.abs().max(h.abs()));
    }

    #[test]
    fn stokes_wave_functionals(s in 0.005..0.09f64) {
        let w = wave_at(s);
        let set = conserved_eval(&traveling_potential(&w), &w.eta).unwrap();
        prop_assert!(set.m.abs() <= 1e-10);
        prop_assert!(set.q.abs() <= 1e-10);
        let p = 2.0 * PI * w.c * w.eta.k_op().inner(&w.eta).unwrap();
        prop_assert!((set.p - p).abs() <= 1e-11 * p);
        prop_assert!((set.p - wave_momentum(&w)).abs() <= 1e-11 * p);
        prop_assert!((set.h - wave_energy(&w)).abs() <= 1e-11 * set.h);
    }
}

#[test]
fn zero_state_functionals_vanish() {
    let z = GridFunction::zeros(N).unwrap();
    let set = conserved_eval(&z, &z).unwrap();
    assert_eq!((set.m, set.p, set.q, set.h), (0.0, 0.0, 0.0, 0.0));
    let flat = StokesWave::flat(N, 1.0).unwrap();
    assert_eq!((wave_momentum(&flat), wave_energy(&flat), wave_action(&flat)), (0.0, 0.0, 0.0));
}

#[test]
fn cosine_profile_functionals() {
    // ∮ a cos u (1 + a|1| cos u) du = πa², ½∮ a² cos² u (1 + a cos u) du = πa²/2
    for a in [1e-3, 0.05, 0.3] {
        let eta = GridFunction::from_fn(N, |u| a * u.cos()).unwrap();
        let psi = GridFunction::zeros(N).unwrap();
        let set = conserved_eval(&psi, &eta).unwrap();
        assert!((set.m - PI * a * a).abs() < 1e-14);
        assert!((set.h - PI * a * a / 2.0).abs() < 1e-14);
        assert!(set.p.abs() < 1e-15 && set.q.abs() < 1e-15);
    }
}

#[test]
fn zero_mean_on_every_branch_point() {
    let trace = trace_branch(&ContinuationConfig::default(), 0.12).unwrap();
    for (p, w) in trace.branch.points.iter().zip(&trace.waves) {
        assert!(p.m_residual.abs() <= 1e-10, "s = {}: M = {:e}", p.s, p.m_residual);
        assert!(wave_mass(w).abs() <= 1e-10);
    }
}

#[test]
fn branch_derivative_identities() {
    // 𝓔'(c) = 𝓟(c) and 𝓗'(c) = c𝓟'(c), as derivatives in s over a 5-point stencil
    let h = 2e-4;
    for s0 in [0.03, 0.07] {
        let waves: Vec<StokesWave> = (-2..=2).map(|j| wave_at(s0 + j as f64 * h)).collect();
        let d = |f: &dyn Fn(&StokesWave) -> f64| {
            (f(&waves[0]) - 8.0 * f(&waves[1]) + 8.0 * f(&waves[3]) - f(&waves[4])) / (12.0 * h)
        };
        let c_s = d(&|w| w.c);
        let (p, c) = (wave_momentum(&waves[2]), waves[2].c);
        let e_c = d(&wave_action) / c_s;
        let h_c = d(&wave_energy) / c_s;
        let p_c = d(&wave_momentum) / c_s;
        assert!((e_c - p).abs() <= 1e-6 * p.abs().max(1.0), "E' {e_c} vs P {p}");
        assert!((h_c - c * p_c).abs() <= 1e-6 * (c * p_c).abs().max(1.0), "H' {h_c} vs cP' {}", c * p_c);
    }
}
