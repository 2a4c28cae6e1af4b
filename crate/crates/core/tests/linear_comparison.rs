use trafficstab_core::certify::{certify_linear_comparison, Verdict};
use trafficstab_core::spectral::{spectral_radius, tridiagonal_toeplitz_rho, NonnegativeMatrix};

/// Comparison matrix of the discretized heat equation.
fn heat(n: usize, r: f64) -> NonnegativeMatrix {
    NonnegativeMatrix::tridiagonal(n, (1.0 - 2.0 * r).abs(), r).unwrap()
}

#[test]
fn power_iteration_matches_closed_form() {
    for r in [0.1, 0.25, 0.5] {
        for n in [3, 10, 50] {
            let closed = 1.0 - 2.0 * r + 2.0 * r * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert!((tridiagonal_toeplitz_rho(n, 1.0 - 2.0 * r, r) - closed).abs() < 1e-12);
            let est = spectral_radius(&heat(n, r), 1e-10).unwrap();
            assert!((est.value - closed).abs() < 1e-8, "r={r} n={n}: {} vs {closed}", est.value);
        }
    }
}

#[test]
fn certifies_exactly_below_cfl_limit() {
    for r in [0.1, 0.25, 0.5, 0.6, 0.75] {
        for n in [3, 10, 50] {
            let c = certify_linear_comparison(&heat(n, r));
            assert_eq!(c.verdict == Verdict::Certified, r <= 0.5, "r={r} n={n} rho={}", c.rho);
        }
    }
}
