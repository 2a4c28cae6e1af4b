mod common;

use trafficstab_core::certify::{certify_network, AuditSubject, NetworkOptions, OmegaChoice, Verdict};
use trafficstab_core::comparison::{build_gamma_general, gamma_params, GammaMatrix};
use trafficstab_core::model::System;
use trafficstab_core::simulator::{check_lyapunov_inequality, estimate_decay, simulate, DisturbancePolicy};
use trafficstab_core::trapping::StateBox;

#[test]
fn equilibrium_solves_routing() {
    let eq = common::ring().equilibrium().unwrap();
    let f = [0.5, 0.5, 0.5, 0.45, 0.45];
    for i in 0..5 {
        assert!((eq.f_star[i] - f[i]).abs() < 1e-12);
        assert!((eq.x_star[i] - f[i] / 0.55).abs() < 1e-12);
    }
}

#[test]
fn auto_omega_certifies_the_ring() {
    let net = common::ring();
    let c = certify_network(&net, None, &OmegaChoice::Auto, &NetworkOptions::default());
    assert_eq!(c.verdict, Verdict::Certified, "{:?}", c.reason);
    assert!(c.row_sum <= 0.9855, "row sum {}", c.row_sum);
    assert!(c.rho < c.row_sum);
    let g = |i: usize, j: usize| c.gamma[i * 5 + j];
    // Demand coupling along the main loop and into the side branches.
    for (i, j) in [(1, 0), (2, 1), (0, 2)] {
        assert!((g(i, j) - 0.11).abs() < 0.002, "gamma[{i}][{j}] = {}", g(i, j));
    }
    for (i, j) in [(3, 2), (4, 1)] {
        assert!((g(i, j) - 0.055).abs() < 0.002, "gamma[{i}][{j}] = {}", g(i, j));
    }
    for (i, j) in [(0, 3), (0, 4), (3, 0), (4, 0), (3, 4), (4, 3)] {
        assert_eq!(g(i, j), 0.0);
    }
    let audit = c.reverify(AuditSubject::Network(&net)).unwrap();
    assert!(audit.consistent, "{audit:?}");
}

#[test]
fn published_omega_reproduces_self_coupling() {
    let net = common::ring();
    let eq = net.equilibrium().unwrap();
    let region = StateBox::full(&[10.0; 5]);
    let omega = [9.14, 9.14, 9.5, 9.3697, 9.329];
    let params = gamma_params(&net, &eq, &region, &omega, 2000).unwrap();
    for (i, want) in [0.7905, 0.8166, 0.7905, 0.7869, 0.7869].into_iter().enumerate() {
        assert!((params.lambda[i] - want).abs() < 0.005, "lambda[{i}] = {}", params.lambda[i]);
    }
    let gamma = build_gamma_general(&net, &eq, params).unwrap();
    assert!(gamma.rho(1e-10) < 1.0);
}

#[test]
fn emitted_gamma_bounds_one_step() {
    let net = common::ring();
    let c = certify_network(&net, None, &OmegaChoice::Auto, &NetworkOptions::default());
    let eq = c.equilibrium.clone().unwrap();
    let params = c.params.clone().unwrap();
    let gamma: GammaMatrix = build_gamma_general(&net, &eq, params.clone()).unwrap();
    let report = check_lyapunov_inequality(&net, &gamma, &params.region, &eq, 10_000, 7);
    assert!(report.passed(), "{report:?}");
}

#[test]
fn congested_start_decays_to_equilibrium() {
    let net = common::ring();
    let eq = net.equilibrium().unwrap();
    let traj = simulate(&net, &[9.0; 5], &DisturbancePolicy::Uniform, 400, 0).unwrap();
    let err: f64 = traj.last().iter().zip(&eq.x_star).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-6, "final error {err}");
    let fit = estimate_decay(&traj, &eq.x_star).unwrap();
    assert!(fit.rate > 0.0);
}
