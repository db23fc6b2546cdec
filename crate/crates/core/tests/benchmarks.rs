mod common;

use std::sync::Arc;

use common::{brute_force_2x2, coordinate_descent, spice_objective, to_na};

use asfcov::benchmarks::{convex_projection, spice, toeplitz_psd, ProjectionOptions, SpiceOptions};
use asfcov::channel::{asf_covariance, rng_for, Asf, Piece};
use asfcov::dictionary::{assemble_design, Dictionary};
use asfcov::linalg::{hermitian_eig, psd_project, toeplitz_project, ComplexMatrix, C64};
use nalgebra::DMatrix;
use rand::Rng;

fn random_hermitian(rng: &mut impl Rng, m: usize) -> ComplexMatrix {
    let x = ComplexMatrix::from_fn(m, m, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    x.add(&x.adjoint()).unwrap().scale(0.5)
}

fn assert_toeplitz_psd(s: &ComplexMatrix) {
    let (t, _) = toeplitz_project(s).unwrap();
    assert!(t.max_abs_diff(s) <= 1e-8 * s.frobenius_norm().max(1.0));
    let e = hermitian_eig(s).unwrap();
    let tr = s.trace().re;
    assert!(*e.eigenvalues.last().unwrap() >= -1e-8 * tr.abs().max(1.0));
}

#[test]
fn toeplitz_psd_fixed_point() {
    let asf = asfcov::channel::two_spike_two_rect_scene();
    let s = asf_covariance(&asf, 10, 1.0).unwrap();
    let rep = toeplitz_psd(&s, 1e-8, 500).unwrap();
    assert!(rep.converged);
    assert!(rep.covariance.max_abs_diff(&s) < 1e-9);
}

#[test]
fn toeplitz_psd_two_by_two_brute_force() {
    let d = ComplexMatrix::from_real_diag(&[1.0, -1.0]);
    let rep = toeplitz_psd(&d, 1e-8, 500).unwrap();
    assert_toeplitz_psd(&rep.covariance);
    assert!(rep.covariance.max_abs_diff(&brute_force_2x2(&d)) < 1e-6);

    let mut rng = rng_for(21, 0);
    for _ in 0..10 {
        let a = random_hermitian(&mut rng, 2);
        let rep = toeplitz_psd(&a, 1e-8, 500).unwrap();
        let oracle = brute_force_2x2(&a);
        assert!(rep.covariance.max_abs_diff(&oracle) < 1e-6, "{:?} vs {:?}", rep.covariance, oracle);
    }
}

#[test]
fn toeplitz_psd_on_indefinite_input_is_monotone() {
    let mut rng = rng_for(22, 0);
    for m in [3, 6, 12] {
        let a = random_hermitian(&mut rng, m);
        let (t, _) = toeplitz_project(&a).unwrap();
        let rep = toeplitz_psd(&t, 1e-8, 500).unwrap();
        assert_toeplitz_psd(&rep.covariance);
        // The first step leaves the arbitrary input; POCS monotonicity
        // applies from the first iterate inside one of the sets.
        for w in rep.trace[1..].windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-12, "{:?}", rep.trace);
        }
        let direct = psd_project(&t).unwrap();
        assert!(rep.covariance.sub(&t).unwrap().frobenius_norm() >= direct.sub(&t).unwrap().frobenius_norm() - 1e-9);
    }
}

#[test]
fn spice_matches_coordinate_descent_oracle() {
    let mut rng = rng_for(31, 0);
    for (trial, n) in [(0, 2usize), (1, 2), (2, 8), (3, 8)] {
        let m = 3;
        let x = ComplexMatrix::from_fn(m, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let r = x.matmul(&x.adjoint()).unwrap().scale(1.0 / n as f64);
        let sys = assemble_design(Arc::new(Dictionary::dirac(4)), &[], &r, 1.0).unwrap();
        let rep = spice(&r, &sys, n, &SpiceOptions::default()).unwrap();
        let rn = to_na(&r.symmetrized().unwrap());
        let d = to_na(&sys.a_tilde);
        let eps = 1e-8 * r.trace().re / m as f64;
        let many = n >= m;
        let (_, oracle) = coordinate_descent(|u| spice_objective(&rn, &d, u, eps, many), 4, 4.0 * r.trace().re);
        let ours = spice_objective(&rn, &d, &rep.measure.as_ref().unwrap().weights, eps, many);
        assert!(ours <= oracle + 1e-4, "trial {trial}: ours {ours} oracle {oracle}");
    }
}

#[test]
fn spice_exact_representability() {
    let m = 6;
    let sys0 = assemble_design(Arc::new(Dictionary::dirac(8)), &[], &ComplexMatrix::identity(m), 1.0).unwrap();
    let col = sys0.a_tilde.column(2);
    let s = ComplexMatrix::hermitian_toeplitz(&col);
    let eps = 1e-8 * s.trace().re / m as f64;
    let mut r = s.clone();
    r.add_diag(eps);
    let rep = spice(&r, &sys0, 3, &SpiceOptions::default()).unwrap();
    let u = &rep.measure.as_ref().unwrap().weights;
    assert!((u[2] - 1.0).abs() < 1e-3, "{u:?}");
    // Few-snapshot gradient `M − a_iᴴ Σ⁻¹ R² Σ⁻¹ a_i`, checked densely.
    let rn = to_na(&r);
    let d = to_na(&sys0.a_tilde);
    let mut sig = DMatrix::<C64>::identity(m, m) * C64::new(eps, 0.0);
    for (i, &w) in u.iter().enumerate() {
        let a = d.column(i);
        sig += &a * a.adjoint() * C64::new(w, 0.0);
    }
    let p = sig.try_inverse().unwrap();
    let q = &p * &rn * &rn * &p;
    for (i, &w) in u.iter().enumerate() {
        let a = d.column(i);
        let g = (m as f64 - a.dotc(&(&q * a)).re) / m as f64;
        if w > 1e-6 {
            assert!(g.abs() <= 1e-4, "atom {i}: gradient {g}");
        } else {
            assert!(g >= -1e-4, "atom {i}: gradient {g}");
        }
    }
    assert!(rep.covariance.sub(&s).unwrap().frobenius_norm() < 1e-3 * s.frobenius_norm());
}

#[test]
fn spice_scales_linearly_in_few_snapshot_branch() {
    let mut rng = rng_for(32, 0);
    let m = 4;
    let x = ComplexMatrix::from_fn(m, 2, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let r = x.matmul(&x.adjoint()).unwrap().scale(0.5);
    let sys = assemble_design(Arc::new(Dictionary::dirac(6)), &[], &r, 1.0).unwrap();
    let opts = SpiceOptions::default();
    let base = spice(&r, &sys, 2, &opts).unwrap();
    let alpha = 3.5;
    let scaled = spice(&r.scale(alpha), &sys, 2, &opts).unwrap();
    let a = &base.measure.unwrap().weights;
    let b = &scaled.measure.unwrap().weights;
    for (x, y) in a.iter().zip(b) {
        assert!((alpha * x - y).abs() <= 1e-3 * alpha * a.iter().cloned().fold(0.0, f64::max), "{a:?} {b:?}");
    }
}

#[test]
fn spice_output_is_psd() {
    let asf = asfcov::channel::two_spike_two_rect_scene();
    let s = asf_covariance(&asf, 8, 1.0).unwrap();
    let batch = asfcov::channel::draw_samples(&s, 0.05, 4, 1).unwrap();
    let r = asfcov::channel::sample_covariance_y(&batch);
    let sys = assemble_design(Arc::new(Dictionary::dirac(16)), &[], &r, 1.0).unwrap();
    let rep = spice(&r, &sys, 4, &SpiceOptions::default()).unwrap();
    let e = hermitian_eig(&rep.covariance).unwrap();
    assert!(*e.eigenvalues.last().unwrap() >= -1e-10 * rep.covariance.trace().re);
    for w in rep.trace.windows(2) {
        assert!(w[1] <= w[0]);
    }
}

#[test]
fn projection_fixed_point_at_truth() {
    let m = 8;
    let grid = 5000;
    let (xs, ws) = asfcov::benchmarks::trapezoid_grid(grid);
    let truth: Vec<f64> = xs.iter().map(|&x| if (-0.3..=0.2).contains(&x) { 1.0 + x } else { 0.0 }).collect();
    let mut lags = vec![C64::new(0.0, 0.0); m];
    for ((&x, &w), &g) in xs.iter().zip(&ws).zip(&truth) {
        for (k, l) in lags.iter_mut().enumerate() {
            *l += C64::from_polar(w * g, std::f64::consts::PI * k as f64 * x);
        }
    }
    let s = ComplexMatrix::hermitian_toeplitz(&lags);
    let opts = ProjectionOptions { grid_size: grid, init: Some(truth.clone()), ..Default::default() };
    let rep = convex_projection(&s, &opts).unwrap();
    assert!(rep.converged);
    assert_eq!(rep.iterations, 0);
    let weights = &rep.measure.unwrap().weights;
    for ((w, g), q) in weights.iter().zip(&truth).zip(&ws) {
        assert!((w - g * q).abs() < 1e-10);
    }
}

#[test]
fn projection_recovers_wide_rect_mass() {
    let asf = Asf::new(vec![], vec![Piece::Rect { alpha: -0.6, beta: 0.6, height: 1.0 / 1.2 }]).unwrap();
    let m = 32;
    let s = asf_covariance(&asf, m, 1.0).unwrap();
    let rep = convex_projection(&s, &ProjectionOptions::default()).unwrap();
    let measure = rep.measure.as_ref().unwrap();
    let on_support: f64 = measure
        .locations
        .iter()
        .zip(&measure.weights)
        .filter(|(x, _)| (-0.6..=0.6).contains(*x))
        .map(|(_, w)| w)
        .sum();
    assert!((on_support - 1.0).abs() < 0.01, "mass on support {on_support}");
    for w in rep.trace.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-12);
    }
    assert_toeplitz_psd(&rep.covariance);
}

#[test]
fn projection_output_is_toeplitz_psd_on_noisy_input() {
    let asf = asfcov::channel::two_spike_two_rect_scene();
    let s = asf_covariance(&asf, 12, 1.0).unwrap();
    let batch = asfcov::channel::draw_samples(&s, 0.019, 6, 4).unwrap();
    let sh = asfcov::channel::sample_covariance_h(&batch);
    let rep = convex_projection(&sh, &ProjectionOptions { max_iter: 300, ..Default::default() }).unwrap();
    assert_toeplitz_psd(&rep.covariance);
    for w in rep.trace.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-12);
    }
}
