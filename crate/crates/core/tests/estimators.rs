use std::sync::Arc;

mod common;

use common::brute_force_nnls;
use asfcov::channel::{asf_covariance, draw_samples, rng_for, sample_covariance_h, two_spike_two_rect_scene};
use asfcov::dictionary::{assemble_design, reconstruct_covariance, Atom, Dictionary};
use asfcov::estimators::{
    em_estimate, em_estimate_cov, estimate_nnls, estimate_qp, ml_gradient, neg_log_likelihood, nnls,
    nnls_full_matrix, EmOptions, QpOptions,
};
use asfcov::linalg::{ComplexMatrix, C64};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn nnls_matches_enumeration() {
    let mut rng = rng_for(11, 0);
    for _ in 0..200 {
        let a = DMatrix::from_fn(6, 3, |_, _| rng.random_range(-1.0..1.0));
        let f = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
        let got = nnls(&a, &f, 1e-10, 9).unwrap();
        assert!(got.converged);
        let want = brute_force_nnls(&a, &f);
        for (g, w) in got.x.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9, "{:?} vs {want:?}", got.x);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn nnls_kkt_certificate(seed in 0u64..10_000, rows in 3usize..12, cols in 1usize..9) {
        let mut rng = rng_for(seed, 1);
        let a = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
        let f = DVector::from_fn(rows, |_, _| rng.random_range(-1.0..1.0));
        let tol = 1e-10;
        let sol = nnls(&a, &f, tol, 3 * cols).unwrap();
        let x = DVector::from_vec(sol.x.clone());
        let w = a.transpose() * (&f - &a * &x);
        let scale = (a.transpose() * &f).amax();
        // Loosened for roundoff in the passive solve of near-singular subsets.
        let slack = 1e-7 * scale.max(1.0);
        for j in 0..cols {
            prop_assert!(x[j] >= 0.0);
            if x[j] == 0.0 {
                prop_assert!(w[j] <= tol * scale + slack, "dual infeasible: {}", w[j]);
            } else {
                prop_assert!(w[j].abs() <= tol * scale + slack, "slack: {}", w[j]);
            }
        }
    }
}

#[test]
fn nnls_recovers_a_single_dirac_atom() {
    let dict = Arc::new(Dictionary::dirac(16));
    let target = Atom::Dirac { location: dict.atoms()[5].support().0 };
    let s = ComplexMatrix::hermitian_toeplitz(&target.moments(8, 1.0));
    let sys = assemble_design(dict, &[], &s, 1.0).unwrap();
    let rep = estimate_nnls(&sys).unwrap();
    for (i, &v) in rep.u.iter().enumerate() {
        let want = if i == 5 { 1.0 } else { 0.0 };
        assert!((v - want).abs() < 1e-6, "{:?}", rep.u);
    }
    assert!(sys.weighted_residual(&rep.u) <= sys.weighted_residual(&vec![0.0; sys.len()]));
}

#[test]
fn reduced_and_full_objectives_agree() {
    let mut rng = rng_for(5, 0);
    for trial in 0..10 {
        let m = 8;
        let x = ComplexMatrix::from_fn(m, m, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let s = x.matmul(&x.adjoint()).unwrap();
        let sys = assemble_design(Arc::new(Dictionary::dirac(6)), &[0.13], &s, 1.0).unwrap();
        let reduced = estimate_nnls(&sys).unwrap().u;
        let full = nnls_full_matrix(&s, &sys).unwrap();
        let d: f64 = reduced.iter().zip(&full).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(d <= 1e-6, "trial {trial}: {d}");
    }
}

#[test]
fn qp_recovers_one_gaussian_atom() {
    let dict = Arc::new(Dictionary::gaussian(8));
    let s = ComplexMatrix::hermitian_toeplitz(&dict.atoms()[3].moments(16, 1.0));
    let sys = assemble_design(dict, &[], &s, 1.0).unwrap();
    let rep = estimate_qp(&sys, &QpOptions::default()).unwrap();
    for (i, &v) in rep.u.iter().enumerate() {
        let want = if i == 3 { 1.0 } else { 0.0 };
        assert!((v - want).abs() < 1e-4, "{:?}", rep.u);
    }
}

#[test]
fn qp_matches_nnls_on_dirac_systems() {
    // Fewer atoms than real equations, so the minimizer is unique.
    let s = asf_covariance(&two_spike_two_rect_scene(), 16, 1.0).unwrap();
    let batch = draw_samples(&s, 0.05, 24, 3).unwrap();
    let sh = sample_covariance_h(&batch);
    let sys = assemble_design(Arc::new(Dictionary::dirac(10)), &[-0.2, 0.4], &sh, 1.0).unwrap();
    let a = estimate_nnls(&sys).unwrap().u;
    let b = estimate_qp(&sys, &QpOptions::default()).unwrap().u;
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-5, "{a:?}\n{b:?}");
    }
}

#[test]
fn qp_allows_negative_continuous_weights() {
    let wide = Atom::rect(-1.0, 1.0).unwrap();
    let bump = Atom::trunc_gauss(0.0, 0.3, 0.9, false).unwrap();
    let dict = Arc::new(Dictionary::new(vec![wide, bump]));
    let m = 16;
    let lags: Vec<C64> =
        wide.moments(m, 1.0).iter().zip(bump.moments(m, 1.0)).map(|(a, b)| a * 2.0 - b * 0.5).collect();
    for xi in [-0.95, -0.5, 0.0, 0.3, 0.89] {
        assert!(2.0 * wide.density(xi) - 0.5 * bump.density(xi) > 0.0);
    }
    let sys = assemble_design(dict, &[], &ComplexMatrix::hermitian_toeplitz(&lags), 1.0).unwrap();
    let rep = estimate_qp(&sys, &QpOptions::default()).unwrap();
    assert!(rep.u[1] < 0.0, "{:?}", rep.u);
    assert!((rep.u[0] - 2.0).abs() < 1e-4 && (rep.u[1] + 0.5).abs() < 1e-4, "{:?}", rep.u);
    let g = 10_000;
    for i in 1..=g {
        let xi = -1.0 + (2 * i - 1) as f64 / g as f64;
        assert!(rep.u[0] * wide.density(xi) + rep.u[1] * bump.density(xi) >= -1e-8);
    }
}

fn random_instance(seed: u64, m: usize, g: usize) -> (asfcov::dictionary::DesignSystem, Vec<f64>, ComplexMatrix, f64) {
    let mut rng = rng_for(seed, 0);
    let sys = assemble_design(Arc::new(Dictionary::dirac(g)), &[], &ComplexMatrix::identity(m), 1.0).unwrap();
    let u: Vec<f64> = (0..g).map(|_| rng.random_range(0.0..1.0)).collect();
    let x = ComplexMatrix::from_fn(m, 2 * m, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let r = x.matmul(&x.adjoint()).unwrap().scale(1.0 / (2 * m) as f64);
    (sys, u, r, rng.random_range(0.05..0.5))
}

#[test]
fn gradient_matches_central_differences() {
    for seed in 0..20 {
        let (sys, u, r, n0) = random_instance(seed, 6, 9);
        let g = ml_gradient(&u, &sys, &r, n0).unwrap();
        let h = 1e-5;
        for i in 0..u.len() {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (neg_log_likelihood(&up, &sys, &r, n0).unwrap() - neg_log_likelihood(&dn, &sys, &r, n0).unwrap())
                / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-4 * g[i].abs().max(1e-3), "seed {seed} i {i}: {fd} vs {}", g[i]);
        }
    }
}

#[test]
fn em_is_monotone() {
    for seed in 0..50 {
        let (sys, _, r, n0) = random_instance(100 + seed, 6, 12);
        let opts = EmOptions { u0: Some(vec![0.5; 12]), eps_em: Some(0.0), max_iter: 60 };
        let rep = em_estimate_cov(&r, n0, &sys, &opts).unwrap();
        assert!(rep.u.iter().all(|&v| v >= 0.0));
        for w in rep.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "seed {seed}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn em_from_batch_improves_on_its_start() {
    let s = asf_covariance(&two_spike_two_rect_scene(), 16, 1.0).unwrap();
    let batch = draw_samples(&s, 0.019, 64, 8).unwrap();
    let sys = assemble_design(Arc::new(Dictionary::dirac(32)), &[], &sample_covariance_h(&batch), 1.0).unwrap();
    let rep = em_estimate(&batch, &sys, &EmOptions::default()).unwrap();
    assert!(rep.objective_trace.last().unwrap() <= &rep.objective_trace[0]);
    let recon = reconstruct_covariance(&sys, &rep.u, 1.0).unwrap();
    assert!(recon.sub(&s).unwrap().frobenius_norm() < s.frobenius_norm());
}
