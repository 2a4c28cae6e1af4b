#![allow(dead_code)]

use std::sync::Arc;

use trafficstab_core::demand::{DemandRef, PiecewiseLinearDemand};
use trafficstab_core::disturbance::DisturbanceBox;
use trafficstab_core::model::{validate_network, FreewaySpec, NetworkSpec, ValidatedNetwork};

pub fn pl(a: f64, r: f64, delta: f64, q: f64) -> DemandRef {
    Arc::new(PiecewiseLinearDemand::new(a, r, delta, q).unwrap())
}

/// Five components, capacity 10, main loop 1 -> 2 -> 3 -> 1 with rate 0.2
/// and side branches 2 -> 5, 3 -> 4 with rate 0.1.
pub fn ring_spec(main: f64, side: f64, inflow: f64) -> NetworkSpec {
    let n = 5;
    let mut routing = vec![0.0; n * n];
    routing[1] = main;
    routing[n + 2] = main;
    routing[n + 4] = side;
    routing[2 * n] = main;
    routing[2 * n + 3] = side;
    NetworkSpec {
        capacities: vec![10.0; n],
        exit_rates: NetworkSpec::complementary_exit_rates(n, &routing),
        routing,
        inflows: vec![inflow; n],
        demands: (0..n).map(|_| pl(10.0, 0.55, 5.0, 0.1)).collect(),
        disturbance: DisturbanceBox::empty(),
    }
}

pub fn ring() -> ValidatedNetwork {
    validate_network(ring_spec(0.2, 0.1, 0.4)).unwrap()
}

/// Five cells of capacity 10 with inflow 1; the last cell has free slope
/// 0.4 and capacity-drop slope `p`.
pub fn freeway(p: f64) -> FreewaySpec {
    let mut d: Vec<DemandRef> = (0..4).map(|_| pl(10.0, 0.5, 5.0, 0.1)).collect();
    d.push(pl(10.0, 0.4, 5.0, p));
    FreewaySpec::new(vec![10.0; 5], d, 1.0).unwrap()
}

pub const FREEWAY_THRESHOLDS: [f64; 5] = [0.5, 0.5, 0.5, 0.5, 0.6];
