mod common;

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;

use mvgdp::budget::{
    alpha_beta, check_condition, harmonic_numbers, phi_bound, precision_budget_equimodal,
    precision_budget_unimodal, zeta,
};
use mvgdp::mechanisms::{equimodal_design, unimodal_design};
use mvgdp::{NoiseDesign, PrecisionAllocation, PrivacyParams, QueryKind, QuerySpec};

use common::{invert, jacobi_eigen, random_orthonormal, rng};

/// Positive root of a x² + b x − c by bisection.
fn bisect_root(a: f64, b: f64, c: f64) -> f64 {
    let f = |x: f64| a * x * x + b * x - c;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid
        } else {
            hi = mid
        }
    }
    0.5 * (lo + hi)
}

/// ‖σ(A⁻¹)‖₂ via dense inversion and an independent eigensolver.
fn inverse_singular_l2(a: &DMatrix<f64>) -> f64 {
    let inv = invert(a);
    let sym = (&inv + inv.transpose()) * 0.5;
    jacobi_eigen(&sym)
        .0
        .iter()
        .map(|l| l * l)
        .sum::<f64>()
        .sqrt()
}

fn harmonic_oracle(r: usize) -> (f64, f64) {
    (1..=r).fold((0.0, 0.0), |(h, hh), i| {
        (h + 1.0 / i as f64, hh + 1.0 / (i as f64).sqrt())
    })
}

#[test]
fn zeta_at_unit_log() {
    // -ln δ = 1, mn = 4: 2·2 + 2 + 4
    assert_relative_eq!(
        zeta((-1.0f64).exp(), 2, 2).unwrap(),
        10.0,
        max_relative = 1e-14
    );
}

#[test]
fn alpha_beta_by_hand() {
    let q = QuerySpec::new(2, 3, 0.5, 2.0, QueryKind::Custom).unwrap();
    let p = PrivacyParams::new(1.0, 0.01).unwrap();
    let (h, hh) = (1.5, 1.0 + 0.5f64.sqrt());
    let z = 2.0 * (-6.0 * 0.01f64.ln()).sqrt() - 2.0 * 0.01f64.ln() + 6.0;
    let (a, b) = alpha_beta(&q, &p).unwrap();
    assert_relative_eq!(
        a,
        (h + hh) * 4.0 + 2.0 * h * 2.0 * 0.5,
        max_relative = 1e-14
    );
    assert_relative_eq!(b, 2.0 * 6f64.powf(0.25) * h * 0.5 * z, max_relative = 1e-14);
}

#[test]
fn condition_matches_dense_oracle() {
    let mut r = rng(11);
    let q = QuerySpec::new(3, 4, 1.0, 5.0, QueryKind::Custom).unwrap();
    let p = PrivacyParams::new(0.7, 1e-3).unwrap();
    let design = NoiseDesign::new(
        random_orthonormal(3, &mut r),
        vec![2.0, 0.5, 7.0],
        random_orthonormal(4, &mut r),
        vec![1.0, 3.0, 0.25, 1.5],
    )
    .unwrap();
    let c = check_condition(&design, &q, &p).unwrap();
    let lhs = inverse_singular_l2(&design.sigma()) * inverse_singular_l2(&design.psi());
    assert_relative_eq!(c.lhs, lhs, max_relative = 1e-9);
    let (a, b) = alpha_beta(&q, &p).unwrap();
    assert_relative_eq!(c.rhs, bisect_root(a, b, 1.4).powi(2), max_relative = 1e-12);
}

#[test]
fn designs_saturate_dense_oracle() {
    let mut r = rng(5);
    let q = QuerySpec::new(4, 4, 0.3, 2.0, QueryKind::Covariance).unwrap();
    let p = PrivacyParams::new(1.0, 1e-4).unwrap();
    let theta = PrecisionAllocation::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
    let w = random_orthonormal(4, &mut r);
    let phi = precision_budget_unimodal(&q, &p).unwrap().phi_max;
    for (design, _) in [
        unimodal_design(&q, &p, &theta, &w).unwrap(),
        equimodal_design(&q, &p, &theta, &w).unwrap(),
    ] {
        let lhs = inverse_singular_l2(&design.sigma()) * inverse_singular_l2(&design.psi());
        assert_relative_eq!(lhs, phi * phi, max_relative = 1e-8);
    }
}

proptest! {
    #[test]
    fn phi_solves_quadratic(eps in 1e-3f64..10.0, ld in -20f64..-0.01, m in 1usize..50, n in 1usize..50,
                            gamma in 0.01f64..100.0, frac in 1e-3f64..2.0) {
        let q = QuerySpec::new(m, n, frac * gamma, gamma, QueryKind::Custom).unwrap();
        let p = PrivacyParams::new(eps, ld.exp()).unwrap();
        let (a, b) = alpha_beta(&q, &p).unwrap();
        let phi = phi_bound(a, b, eps).unwrap();
        prop_assert!(phi > 0.0);
        prop_assert!(((a * phi * phi + b * phi) - 2.0 * eps).abs() <= 1e-12 * 2.0 * eps);
        let oracle = bisect_root(a, b, 2.0 * eps);
        prop_assert!((phi - oracle).abs() <= 1e-10 * oracle);
    }

    #[test]
    fn harmonic_matches_sum(r in 1usize..500) {
        let (h, hh) = harmonic_numbers(r).unwrap();
        let (ho, hho) = harmonic_oracle(r);
        prop_assert!((h - ho).abs() < 1e-12 * ho);
        prop_assert!((hh - hho).abs() < 1e-12 * hho);
    }

    #[test]
    fn equi_budget_is_root_of_n_times_uni(m in 1usize..40, eps in 0.01f64..5.0, ld in -15f64..-0.1) {
        let q = QuerySpec::new(m, m, 1.0, 3.0, QueryKind::Covariance).unwrap();
        let p = PrivacyParams::new(eps, ld.exp()).unwrap();
        let uni = precision_budget_unimodal(&q, &p).unwrap().precision_budget;
        let equi = precision_budget_equimodal(&q, &p).unwrap().precision_budget;
        prop_assert!((equi - (m as f64 * uni).sqrt()).abs() <= 1e-12 * equi);
    }

    #[test]
    fn condition_is_rotation_invariant(seed in 0u64..1000, l in prop::collection::vec(0.1f64..10.0, 3)) {
        let mut r = rng(seed);
        let q = QuerySpec::new(3, 3, 1.0, 2.0, QueryKind::Custom).unwrap();
        let p = PrivacyParams::new(1.0, 0.01).unwrap();
        let a = NoiseDesign::new(DMatrix::identity(3, 3), l.clone(), DMatrix::identity(3, 3), l.clone()).unwrap();
        let b = NoiseDesign::new(random_orthonormal(3, &mut r), l.clone(), random_orthonormal(3, &mut r), l).unwrap();
        let (ca, cb) = (check_condition(&a, &q, &p).unwrap(), check_condition(&b, &q, &p).unwrap());
        prop_assert!((ca.lhs - cb.lhs).abs() <= 1e-12 * ca.lhs);
        prop_assert_eq!(ca.holds, cb.holds);
    }

    #[test]
    fn condition_transposes(m in 1usize..6, n in 1usize..6, s in 0.1f64..10.0, t in 0.1f64..10.0) {
        let q = QuerySpec::new(m, n, 1.0, 2.0, QueryKind::Custom).unwrap();
        let p = PrivacyParams::new(1.0, 0.01).unwrap();
        let d = NoiseDesign::isotropic(m, n, s, t).unwrap();
        let c = check_condition(&d, &q, &p).unwrap();
        let ct = check_condition(&d.transposed(), &q.transposed(), &p).unwrap();
        prop_assert!((c.lhs - ct.lhs).abs() <= 1e-12 * c.lhs);
        prop_assert!((c.rhs - ct.rhs).abs() <= 1e-12 * c.rhs);
    }
}
