//! Estimator variances on small Hamiltonians, by exact enumeration and by sampling.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use subspec::diagnostics::{alt_estimator_variance, dense_propagator, sampling_strategy_variance};
use subspec::eigen::DenseEigen;

fn rng(seed: u64) -> impl FnMut() -> f64 {
    let mut s = seed.wrapping_mul(0x2545_f491_4f6c_dd1d) | 1;
    move || {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }
}

/// Symmetric matrix with entries in `[-1/2, 1/2)`, zero outside the diagonal blocks.
fn random_hamiltonian(blocks: &[usize], seed: u64) -> DenseEigen {
    let d: usize = blocks.iter().sum();
    let mut next = rng(seed);
    let mut m = DMatrix::zeros(d, d);
    let mut start = 0;
    for &b in blocks {
        for i in start..start + b {
            for j in start..=i {
                let v = next();
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        start += b;
    }
    DenseEigen::from_dense(m)
}

fn random_state(d: usize, support: &[usize], seed: u64) -> Vec<Complex64> {
    let mut next = rng(seed ^ 0xabcdef);
    let mut psi = vec![Complex64::new(0.0, 0.0); d];
    for &i in support {
        psi[i] = Complex64::new(next() + 0.7_f64.copysign(next()), next());
    }
    let n = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    psi.iter_mut().for_each(|a| *a /= n);
    psi
}

fn l_a(psi: &[Complex64], eig: &DenseEigen, t: f64) -> Complex64 {
    let d = psi.len();
    let u = dense_propagator(eig, t).unwrap();
    (0..d)
        .map(|x| psi[x].conj() * (0..d).map(|y| u[x * d + y] * psi[y]).sum::<Complex64>())
        .sum()
}

const EPS: f64 = 1e-12;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// With full support the sampling-strategy variance is exactly `1 - |L_A|^2`.
    #[test]
    fn sampling_variance_full_support(d in 2usize..=16, seed in any::<u64>(), t in 0.0f64..20.0) {
        let eig = random_hamiltonian(&[d], seed);
        let psi = random_state(d, &(0..d).collect::<Vec<_>>(), seed);
        let r = sampling_strategy_variance(&psi, &eig, t, 0, 0).unwrap();
        prop_assert!((r.exact_var - r.predicted_var).abs() < 1e-12);
        let l = l_a(&psi, &eig, t);
        prop_assert!((Complex64::new(r.exact_mean.0, r.exact_mean.1) - l).norm() < 1e-12);
    }

    /// With partial support the estimator stays unbiased and the variance is bounded.
    #[test]
    fn sampling_variance_partial_support(d in 3usize..=16, seed in any::<u64>(), t in 0.0f64..20.0) {
        let eig = random_hamiltonian(&[d], seed);
        let support: Vec<usize> = (0..d).step_by(2).collect();
        let psi = random_state(d, &support, seed);
        let r = sampling_strategy_variance(&psi, &eig, t, 0, 0).unwrap();
        let l = l_a(&psi, &eig, t);
        prop_assert!((Complex64::new(r.exact_mean.0, r.exact_mean.1) - l).norm() < 1e-12);
        prop_assert!(r.exact_var <= r.predicted_var + 1e-12);
        prop_assert!(r.exact_var >= -1e-12);
    }

    /// The alternative estimator is unbiased and its variance is `sum_y p(y) dim S_y - |L_A|^2`.
    #[test]
    fn alt_variance_formula(
        blocks in prop::collection::vec(1usize..=5, 1..=3),
        seed in any::<u64>(),
        t in 0.1f64..20.0,
    ) {
        let eig = random_hamiltonian(&blocks, seed);
        let d = eig.dim();
        let psi = random_state(d, &(0..d).collect::<Vec<_>>(), seed);
        let r = alt_estimator_variance(&psi, &eig, t, 0, 0, EPS).unwrap();
        prop_assert!((r.exact_var - r.predicted_var).abs() < 1e-10, "{} vs {}", r.exact_var, r.predicted_var);
        let l = l_a(&psi, &eig, t);
        prop_assert!((Complex64::new(r.exact_mean.0, r.exact_mean.1) - l).norm() < 1e-10);
        // Dynamics never leaves a block.
        let mut start = 0;
        for &b in &blocks {
            for y in start..start + b {
                prop_assert!(r.support_profile[y] <= b);
            }
            start += b;
        }
    }
}

#[test]
fn alt_variance_full_support_is_dimension_minus_overlap() {
    let d = 8;
    let eig = random_hamiltonian(&[d], 17);
    let psi = random_state(d, &(0..d).collect::<Vec<_>>(), 17);
    for t in [0.7, 1.9, 4.2] {
        let r = alt_estimator_variance(&psi, &eig, t, 0, 0, EPS).unwrap();
        assert!(r.support_profile.iter().all(|&s| s == d), "{:?}", r.support_profile);
        let l = Complex64::new(r.l_a_exact.0, r.l_a_exact.1).norm_sqr();
        assert!((r.exact_var - (d as f64 - l)).abs() < 1e-10);
    }
}

#[test]
fn zero_time_is_degenerate() {
    let d = 6;
    let eig = random_hamiltonian(&[d], 3);
    let psi = random_state(d, &(0..d).collect::<Vec<_>>(), 3);
    let alt = alt_estimator_variance(&psi, &eig, 0.0, 100, 1, EPS).unwrap();
    let smp = sampling_strategy_variance(&psi, &eig, 0.0, 100, 1).unwrap();
    let l = Complex64::new(alt.l_a_exact.0, alt.l_a_exact.1);
    assert!((l - 1.0).norm() < 1e-12);
    assert!(alt.support_profile.iter().all(|&s| s == 1));
    for r in [&alt, &smp] {
        assert!((r.exact_var - (1.0 - l.norm_sqr())).abs() < 1e-12);
        assert!(r.empirical_var.abs() < 1e-12);
    }
}

#[test]
fn empirical_variances_converge() {
    let d = 10;
    let eig = random_hamiltonian(&[4, 6], 29);
    let psi = random_state(d, &(0..d).collect::<Vec<_>>(), 29);
    let n = 40_000;
    for t in [0.5, 2.0, 6.0] {
        let smp = sampling_strategy_variance(&psi, &eig, t, n, 5).unwrap();
        let alt = alt_estimator_variance(&psi, &eig, t, n, 5, EPS).unwrap();
        for r in [smp, alt] {
            // Sample variance of a bounded estimator; 5% covers the fourth-moment spread here.
            assert!(
                (r.empirical_var - r.exact_var).abs() < 0.05 * r.exact_var.max(0.1),
                "t = {t}: {} vs {}",
                r.empirical_var,
                r.exact_var
            );
        }
    }
}

#[test]
fn enumeration_respects_cap() {
    let eig = DenseEigen::from_dense(DMatrix::identity(2049, 2049));
    assert!(dense_propagator(&eig, 1.0).is_err());
}
