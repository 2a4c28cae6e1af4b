mod common;

use std::sync::Arc;

use proptest::prelude::*;
use trafficstab_core::certify::{certify_freeway, FreewayOptions};
use trafficstab_core::comparison::build_gamma_freeway;
use trafficstab_core::demand::{DemandRef, DisturbanceMode, PiecewiseLinearDemand};
use trafficstab_core::disturbance::DisturbanceBox;
use trafficstab_core::model::{validate_network, System, ValidatedNetwork};
use trafficstab_core::simulator::check_lyapunov_inequality;
use trafficstab_core::spectral::{row_sum_bound, spectral_radius, NonnegativeMatrix};
use trafficstab_core::trapping::{freeway_trap_algorithm, verify_trap_empirically, TrapOptions};

/// Ring network with a disturbed congestion slope on every component.
fn disturbed_ring(main: f64, side: f64, inflow: f64) -> Option<ValidatedNetwork> {
    let mut spec = common::ring_spec(main, side, inflow);
    spec.disturbance = DisturbanceBox::new(vec![0.05], vec![0.15]).ok()?;
    spec.demands = (0..5)
        .map(|_| -> DemandRef {
            Arc::new(
                PiecewiseLinearDemand::new(10.0, 0.55, 5.0, 0.1)
                    .unwrap()
                    .with_mode(DisturbanceMode::CongestionSlope { coord: 0 }),
            )
        })
        .collect();
    let net = validate_network(spec).ok()?;
    net.equilibrium().ok()?;
    Some(net)
}

fn ring_params() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.0..0.45f64, 0.0..0.3f64, 0.05..0.6f64)
}

fn unit_state(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, n)
}

proptest! {
    #[test]
    fn equilibrium_is_fixed((main, side, v) in ring_params(), d in 0.05..=0.15f64) {
        let net = disturbed_ring(main, side, v);
        prop_assume!(net.is_some());
        let net = net.unwrap();
        let eq = net.equilibrium().unwrap();
        let next = net.step(&eq.x_star, &[d]).unwrap();
        for (a, b) in next.iter().zip(&eq.x_star) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mass_balance((main, side, v) in ring_params(), u in unit_state(5), d in 0.05..=0.15f64) {
        let net = disturbed_ring(main, side, v);
        prop_assume!(net.is_some());
        let net = net.unwrap();
        let x: Vec<f64> = u.iter().map(|t| t * 10.0).collect();
        let flows = net.step_flows(&x, &[d]);
        let before: f64 = x.iter().sum();
        let after: f64 = flows.next.iter().sum();
        let gain: f64 = flows.external.iter().sum::<f64>() - flows.exit.iter().sum::<f64>();
        prop_assert!((after - before - gain).abs() < 1e-12 * (1.0 + before));
    }

    #[test]
    fn freeway_step_matches_network_bitwise(p in 0.0..0.4f64, u in unit_state(5)) {
        let spec = common::freeway(p);
        let net = spec.to_network();
        let x: Vec<f64> = u.iter().map(|t| t * 10.0).collect();
        prop_assert_eq!(spec.step(&x, &[]).unwrap(), net.step(&x, &[]).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn state_space_is_invariant(u in unit_state(5), d in 0.05..=0.15f64) {
        let net = disturbed_ring(0.2, 0.1, 0.4).unwrap();
        let x: Vec<f64> = u.iter().map(|t| t * 10.0).collect();
        let next = net.step(&x, &[d]).unwrap();
        prop_assert!(next.iter().all(|s| (0.0..=10.0).contains(s)));
    }
}

fn nonnegative_matrix() -> impl Strategy<Value = NonnegativeMatrix> {
    (1usize..8).prop_flat_map(|n| prop::collection::vec(0.0..5.0f64, n * n).prop_map(move |e| NonnegativeMatrix::new(n, e).unwrap()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn radius_below_row_sum(m in nonnegative_matrix()) {
        let rho = spectral_radius(&m, 1e-10).unwrap();
        prop_assert!(rho.value <= row_sum_bound(&m) + 1e-9);
        prop_assert!(rho.value >= 0.0);
    }

    #[test]
    fn radius_scales_linearly(m in nonnegative_matrix(), c in 0.1..10.0f64) {
        let base = spectral_radius(&m, 1e-10).unwrap().value;
        let scaled = spectral_radius(&m.scaled(c).unwrap(), 1e-10).unwrap().value;
        prop_assert!((scaled - c * base).abs() <= 1e-8 * (1.0 + c * base));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn forward_pass_refines_backward(p in 0.0..0.24f64) {
        let r = freeway_trap_algorithm(&common::freeway(p), 400, TrapOptions::default());
        prop_assume!(r.is_ok());
        let r = r.unwrap();
        for i in 1..5 {
            prop_assert!(r.region.hi()[i] <= r.backward[i].unwrap());
        }
    }

    #[test]
    fn grid_refinement_is_monotone(p in 0.0..0.16f64) {
        let coarse = freeway_trap_algorithm(&common::freeway(p), 200, TrapOptions::default());
        let fine = freeway_trap_algorithm(&common::freeway(p), 400, TrapOptions::default());
        prop_assume!(coarse.is_ok());
        let (coarse, fine) = (coarse.unwrap(), fine.unwrap());
        let cell = 10.0 / 200.0;
        for i in 0..5 {
            prop_assert!(fine.region.hi()[i] <= coarse.region.hi()[i] + cell + 1e-12);
            if let (Some(kf), Some(kc)) = (fine.backward[i], coarse.backward[i]) {
                prop_assert!(kf <= kc + cell + 1e-12);
            }
        }
    }
}

#[test]
fn freeway_boxes_trap_random_trajectories() {
    for p in [0.0, 0.05, 0.1, 0.15, 0.2, 0.24] {
        let spec = common::freeway(p);
        let report = freeway_trap_algorithm(&spec, 1000, TrapOptions::default()).unwrap();
        let v = verify_trap_empirically(&spec, &report.region, 100, 500, 2);
        assert!(!v.violated, "p = {p}: {v:?}");
    }
}

#[test]
fn freeway_gamma_bounds_one_step() {
    for p in [0.0, 0.1, 0.2] {
        let spec = common::freeway(p);
        let c = certify_freeway(&spec, &FreewayOptions { grid_n: 1000, ..FreewayOptions::default() });
        assert!(c.is_certified(), "p = {p}: {:?}", c.reason);
        let eq = c.equilibrium.clone().unwrap();
        let params = c.params.clone().unwrap();
        let gamma = build_gamma_freeway(&spec, &eq, params.clone()).unwrap();
        let report = check_lyapunov_inequality(&spec, &gamma, &params.region, &eq, 10_000, 13);
        assert!(report.passed(), "p = {p}: {report:?}");
    }
}

#[test]
fn disturbed_network_gamma_bounds_one_step() {
    use trafficstab_core::certify::{certify_network, NetworkOptions, OmegaChoice};
    use trafficstab_core::comparison::build_gamma_general;
    let net = disturbed_ring(0.2, 0.1, 0.4).unwrap();
    let c = certify_network(&net, None, &OmegaChoice::Auto, &NetworkOptions { grid_n: 500, mu_inflation: 1.0 });
    // The inequality must hold whether or not the radius is below one.
    let eq = c.equilibrium.clone().unwrap();
    let params = c.params.clone().unwrap();
    let gamma = build_gamma_general(&net, &eq, params.clone()).unwrap();
    let report = check_lyapunov_inequality(&net, &gamma, &params.region, &eq, 10_000, 17);
    assert!(report.passed(), "{report:?}");
}
