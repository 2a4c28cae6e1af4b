//! Compartmental network model: validation, uncongested equilibrium and
//! the one-step map.
//!
//! Component `i` holds mass `x_i` in `[0, a_i]`, requests outflow
//! `f_i(d, x_i)`, sends fraction `p_ij` of it towards `j` and the rest `Q_i`
//! out of the network. Receivers admit at most their free space, and the
//! curtailment is shared proportionally among senders.

use alloc::vec::Vec;
use core::fmt;

use crate::demand::{DemandError, DemandRef};
use crate::disturbance::DisturbanceBox;
use crate::linalg;

/// Tolerance on `sum_j p_ij + Q_i = 1`.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Tolerance on the equilibrium residual and flow matching.
pub const EQUILIBRIUM_TOL: f64 = 1e-10;

/// Indices in errors are zero-based component numbers.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    Empty,
    DimensionMismatch { field: &'static str, expected: usize, found: usize },
    NegativeParameter { field: &'static str, index: usize },
    SelfLoop(usize),
    RowSumViolation(usize),
    SingularRouting,
    Demand { index: usize, source: DemandError },
    CapacityMismatch(usize),
    InfeasibleEquilibrium(usize),
    NoFreeFlowPreimage(usize),
    DisturbanceDependentEquilibrium(usize),
    DomainViolation(usize),
    DisturbanceOutOfBox,
    TooFewCells(usize),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => write!(f, "network has no components"),
            Self::DimensionMismatch { field, expected, found } => {
                write!(f, "{field} has length {found}, expected {expected}")
            }
            Self::NegativeParameter { field, index } => {
                write!(f, "{field} of component {} is out of range", index + 1)
            }
            Self::SelfLoop(i) => write!(f, "component {} routes to itself", i + 1),
            Self::RowSumViolation(i) => {
                write!(f, "turning and exit rates of component {} do not sum to 1", i + 1)
            }
            Self::SingularRouting => write!(f, "I - P^T is singular"),
            Self::Demand { index, source } => write!(f, "demand of component {}: {source}", index + 1),
            Self::CapacityMismatch(i) => {
                write!(f, "demand domain of component {} differs from its capacity", i + 1)
            }
            Self::InfeasibleEquilibrium(i) => {
                write!(f, "equilibrium violates the capacity of component {}", i + 1)
            }
            Self::NoFreeFlowPreimage(i) => {
                write!(f, "equilibrium flow of component {} exceeds its free-flow capacity", i + 1)
            }
            Self::DisturbanceDependentEquilibrium(i) => {
                write!(f, "equilibrium mass of component {} depends on the disturbance", i + 1)
            }
            Self::DomainViolation(i) => write!(f, "state of component {} outside [0, a]", i + 1),
            Self::DisturbanceOutOfBox => write!(f, "disturbance outside its admissible box"),
            Self::TooFewCells(n) => write!(f, "freeway needs at least 3 cells, got {n}"),
        }
    }
}

impl core::error::Error for ModelError {}

/// Uncongested equilibrium: masses and the flows they produce.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub x_star: Vec<f64>,
    pub f_star: Vec<f64>,
}

/// Anything with a state space `[0, a]`, a disturbance box and a step map.
pub trait System {
    fn dim(&self) -> usize;

    fn capacities(&self) -> &[f64];

    fn disturbance_box(&self) -> &DisturbanceBox;

    /// Unchecked step. `x` must lie in the state space and `d` in the box.
    fn step_into(&self, x: &[f64], d: &[f64], out: &mut [f64]);

    fn equilibrium(&self) -> Result<Equilibrium, ModelError>;

    fn contains_state(&self, x: &[f64]) -> Result<(), ModelError> {
        let a = self.capacities();
        if x.len() != a.len() {
            return Err(ModelError::DimensionMismatch { field: "state", expected: a.len(), found: x.len() });
        }
        match x.iter().zip(a).position(|(xi, ai)| !(*xi >= 0.0 && *xi <= *ai)) {
            Some(i) => Err(ModelError::DomainViolation(i)),
            None => Ok(()),
        }
    }

    /// Checked step.
    fn step(&self, x: &[f64], d: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.contains_state(x)?;
        if !self.disturbance_box().contains(d) {
            return Err(ModelError::DisturbanceOutOfBox);
        }
        let mut out = alloc::vec![0.0; x.len()];
        self.step_into(x, d, &mut out);
        Ok(out)
    }
}

/// Raw network description. Validate with [`validate_network`].
#[derive(Debug, Clone)]
pub struct NetworkSpec {
    pub capacities: Vec<f64>,
    /// Row-major `n x n` turning rates `p_ij`.
    pub routing: Vec<f64>,
    pub exit_rates: Vec<f64>,
    pub inflows: Vec<f64>,
    pub demands: Vec<DemandRef>,
    pub disturbance: DisturbanceBox,
}

impl NetworkSpec {
    /// Exit rates completing each routing row to one.
    pub fn complementary_exit_rates(n: usize, routing: &[f64]) -> Vec<f64> {
        (0..n).map(|i| 1.0 - routing[i * n..(i + 1) * n].iter().sum::<f64>()).collect()
    }
}

/// A network whose structural invariants have been checked.
#[derive(Debug, Clone)]
pub struct ValidatedNetwork {
    spec: NetworkSpec,
}

/// Per-component flows of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFlows {
    pub demand: Vec<f64>,
    /// Attempted inflow `v_j + sum_k p_kj f_k`.
    pub attempted: Vec<f64>,
    /// Actual inflow `min(a_j - x_j, attempted_j)`.
    pub admitted: Vec<f64>,
    /// Actual outflow, routed plus exiting.
    pub outflow: Vec<f64>,
    /// Actual exit flow `Q_i f_i`.
    pub exit: Vec<f64>,
    /// Actual external inflow `s_j v_j`.
    pub external: Vec<f64>,
    /// Fraction of attempted inflow admitted; one when nothing is attempted.
    pub supply_ratio: Vec<f64>,
    pub next: Vec<f64>,
}

/// Checks the structural invariants, reporting the first violation in the
/// order: dimensions, signs, self-loops, row sums, demands, singularity.
pub fn validate_network(spec: NetworkSpec) -> Result<ValidatedNetwork, ModelError> {
    let n = spec.capacities.len();
    if n == 0 {
        return Err(ModelError::Empty);
    }
    let dims = [
        ("routing", n * n, spec.routing.len()),
        ("exit_rates", n, spec.exit_rates.len()),
        ("inflows", n, spec.inflows.len()),
        ("demands", n, spec.demands.len()),
    ];
    for (field, expected, found) in dims {
        if expected != found {
            return Err(ModelError::DimensionMismatch { field, expected, found });
        }
    }
    for i in 0..n {
        if !(spec.capacities[i] > 0.0) || !spec.capacities[i].is_finite() {
            return Err(ModelError::NegativeParameter { field: "capacity", index: i });
        }
        if !(spec.inflows[i] >= 0.0) || !spec.inflows[i].is_finite() {
            return Err(ModelError::NegativeParameter { field: "inflow", index: i });
        }
        if !(spec.exit_rates[i] >= 0.0) {
            return Err(ModelError::NegativeParameter { field: "exit_rate", index: i });
        }
        if spec.routing[i * n..(i + 1) * n].iter().any(|p| !(*p >= 0.0)) {
            return Err(ModelError::NegativeParameter { field: "turning_rate", index: i });
        }
    }
    for i in 0..n {
        if spec.routing[i * n + i] != 0.0 {
            return Err(ModelError::SelfLoop(i));
        }
    }
    for i in 0..n {
        let total: f64 = spec.routing[i * n..(i + 1) * n].iter().sum::<f64>() + spec.exit_rates[i];
        if crate::math::abs(total - 1.0) > ROW_SUM_TOL {
            return Err(ModelError::RowSumViolation(i));
        }
    }
    for (i, demand) in spec.demands.iter().enumerate() {
        if demand.capacity() != spec.capacities[i] {
            return Err(ModelError::CapacityMismatch(i));
        }
        demand.validate(&spec.disturbance).map_err(|source| ModelError::Demand { index: i, source })?;
    }
    let m = i_minus_pt(n, &spec.routing);
    if linalg::solve(n, &m, &alloc::vec![0.0; n]).is_none() {
        return Err(ModelError::SingularRouting);
    }
    Ok(ValidatedNetwork { spec })
}

fn i_minus_pt(n: usize, routing: &[f64]) -> Vec<f64> {
    let mut m = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = if i == j { 1.0 } else { 0.0 } - routing[j * n + i];
        }
    }
    m
}

impl ValidatedNetwork {
    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.capacities.len()
    }

    #[inline]
    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.spec.routing[i * self.n() + j]
    }

    pub fn exit_rate(&self, i: usize) -> f64 {
        self.spec.exit_rates[i]
    }

    pub fn inflows(&self) -> &[f64] {
        &self.spec.inflows
    }

    pub fn demands(&self) -> &[DemandRef] {
        &self.spec.demands
    }

    /// Flows `f = (I - P^T)^{-1} v`.
    pub fn equilibrium_flows(&self) -> Result<Vec<f64>, ModelError> {
        let n = self.n();
        linalg::solve(n, &i_minus_pt(n, &self.spec.routing), &self.spec.inflows).ok_or(ModelError::SingularRouting)
    }

    /// One step with all intermediate flows.
    pub fn step_flows(&self, x: &[f64], d: &[f64]) -> StepFlows {
        let n = self.n();
        let a = &self.spec.capacities;
        let demand: Vec<f64> = (0..n).map(|i| self.spec.demands[i].eval(d, x[i])).collect();
        let attempted: Vec<f64> = (0..n)
            .map(|j| {
                let mut acc = self.spec.inflows[j];
                for k in 0..n {
                    acc += self.p(k, j) * demand[k];
                }
                acc
            })
            .collect();
        let admitted: Vec<f64> = (0..n).map(|j| (a[j] - x[j]).min(attempted[j])).collect();
        let supply_ratio: Vec<f64> =
            (0..n).map(|j| if attempted[j] > 0.0 { admitted[j] / attempted[j] } else { 1.0 }).collect();
        let exit: Vec<f64> = (0..n).map(|i| self.spec.exit_rates[i] * demand[i]).collect();
        let outflow: Vec<f64> = (0..n)
            .map(|i| {
                let mut acc = exit[i];
                for j in 0..n {
                    let share = if attempted[j] > 0.0 { self.p(i, j) * demand[i] / attempted[j] } else { 0.0 };
                    acc += admitted[j] * share;
                }
                acc
            })
            .collect();
        let external: Vec<f64> = (0..n)
            .map(|j| if attempted[j] > 0.0 { admitted[j] * (self.spec.inflows[j] / attempted[j]) } else { 0.0 })
            .collect();
        let next = (0..n).map(|i| (x[i] - outflow[i] + admitted[i]).clamp(0.0, a[i])).collect();
        StepFlows { demand, attempted, admitted, outflow, exit, external, supply_ratio, next }
    }
}

impl System for ValidatedNetwork {
    fn dim(&self) -> usize {
        self.n()
    }

    fn capacities(&self) -> &[f64] {
        &self.spec.capacities
    }

    fn disturbance_box(&self) -> &DisturbanceBox {
        &self.spec.disturbance
    }

    fn step_into(&self, x: &[f64], d: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.step_flows(x, d).next);
    }

    /// `x*` is taken on the free-flow branch at the box center, then checked
    /// at every check point of the box.
    fn equilibrium(&self) -> Result<Equilibrium, ModelError> {
        let n = self.n();
        let f_star = self.equilibrium_flows()?;
        let center = self.spec.disturbance.center();
        let mut x_star = Vec::with_capacity(n);
        for i in 0..n {
            if f_star[i] < -EQUILIBRIUM_TOL {
                return Err(ModelError::InfeasibleEquilibrium(i));
            }
            let fi = f_star[i].max(0.0);
            let xi = self.spec.demands[i].free_flow_preimage(&center, fi).ok_or(ModelError::NoFreeFlowPreimage(i))?;
            x_star.push(xi);
        }
        let f_star: Vec<f64> = f_star.into_iter().map(|v| v.max(0.0)).collect();
        for d in self.spec.disturbance.check_points() {
            for i in 0..n {
                if crate::math::abs(self.spec.demands[i].eval(&d, x_star[i]) - f_star[i]) > EQUILIBRIUM_TOL {
                    return Err(ModelError::DisturbanceDependentEquilibrium(i));
                }
            }
        }
        for i in 0..n {
            let mut load = self.spec.inflows[i] + x_star[i];
            for j in 0..n {
                load += self.p(j, i) * f_star[j];
            }
            if load > self.spec.capacities[i] + ROW_SUM_TOL {
                return Err(ModelError::InfeasibleEquilibrium(i));
            }
        }
        Ok(Equilibrium { x_star, f_star })
    }
}

/// Freeway: cells in series, inflow `v` entering cell 1, everything leaving
/// cell `n` exits. Disturbance-free.
#[derive(Debug, Clone)]
pub struct FreewaySpec {
    capacities: Vec<f64>,
    demands: Vec<DemandRef>,
    inflow: f64,
    no_disturbance: DisturbanceBox,
}

impl FreewaySpec {
    pub fn new(capacities: Vec<f64>, demands: Vec<DemandRef>, inflow: f64) -> Result<Self, ModelError> {
        let n = capacities.len();
        if n < 3 {
            return Err(ModelError::TooFewCells(n));
        }
        if demands.len() != n {
            return Err(ModelError::DimensionMismatch { field: "demands", expected: n, found: demands.len() });
        }
        if let Some(i) = capacities.iter().position(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(ModelError::NegativeParameter { field: "capacity", index: i });
        }
        if !(inflow >= 0.0) || !inflow.is_finite() {
            return Err(ModelError::NegativeParameter { field: "inflow", index: 0 });
        }
        let none = DisturbanceBox::empty();
        for (i, demand) in demands.iter().enumerate() {
            if demand.capacity() != capacities[i] {
                return Err(ModelError::CapacityMismatch(i));
            }
            demand.validate(&none).map_err(|source| ModelError::Demand { index: i, source })?;
        }
        Ok(Self { capacities, demands, inflow, no_disturbance: none })
    }

    pub fn n(&self) -> usize {
        self.capacities.len()
    }

    pub fn inflow(&self) -> f64 {
        self.inflow
    }

    pub fn demands(&self) -> &[DemandRef] {
        &self.demands
    }

    /// Demand of cell `i` at mass `s`.
    #[inline]
    pub fn demand(&self, i: usize, s: f64) -> f64 {
        self.demands[i].eval(&[], s)
    }

    /// The equivalent general network.
    pub fn to_network(&self) -> ValidatedNetwork {
        let n = self.n();
        let mut routing = alloc::vec![0.0; n * n];
        for i in 0..n - 1 {
            routing[i * n + i + 1] = 1.0;
        }
        let mut exit_rates = alloc::vec![0.0; n];
        exit_rates[n - 1] = 1.0;
        let mut inflows = alloc::vec![0.0; n];
        inflows[0] = self.inflow;
        let spec = NetworkSpec {
            capacities: self.capacities.clone(),
            routing,
            exit_rates,
            inflows,
            demands: self.demands.clone(),
            disturbance: DisturbanceBox::empty(),
        };
        validate_network(spec).expect("series routing is always valid")
    }
}

impl System for FreewaySpec {
    fn dim(&self) -> usize {
        self.n()
    }

    fn capacities(&self) -> &[f64] {
        &self.capacities
    }

    fn disturbance_box(&self) -> &DisturbanceBox {
        &self.no_disturbance
    }

    fn step_into(&self, x: &[f64], _d: &[f64], out: &mut [f64]) {
        let n = self.n();
        let a = &self.capacities;
        let f: Vec<f64> = (0..n).map(|i| self.demand(i, x[i])).collect();
        for i in 0..n {
            let inflow = if i == 0 { (a[0] - x[0]).min(self.inflow) } else { (a[i] - x[i]).min(f[i - 1]) };
            let outflow = if i + 1 < n { (a[i + 1] - x[i + 1]).min(f[i]) } else { f[i] };
            out[i] = (x[i] - outflow + inflow).clamp(0.0, a[i]);
        }
    }

    /// All flows equal `v`; `x*` is the free-flow preimage and must leave
    /// room for the inflow: `x_i* + v < a_i`.
    fn equilibrium(&self) -> Result<Equilibrium, ModelError> {
        let n = self.n();
        let f_star = alloc::vec![self.inflow; n];
        let mut x_star = Vec::with_capacity(n);
        for i in 0..n {
            let xi = self.demands[i].free_flow_preimage(&[], self.inflow).ok_or(ModelError::NoFreeFlowPreimage(i))?;
            if !(xi + self.inflow < self.capacities[i]) {
                return Err(ModelError::InfeasibleEquilibrium(i));
            }
            x_star.push(xi);
        }
        Ok(Equilibrium { x_star, f_star })
    }
}

/// Convenience wrapper over [`System::step`] for freeways.
pub fn freeway_step(spec: &FreewaySpec, x: &[f64]) -> Result<Vec<f64>, ModelError> {
    spec.step(x, &[])
}
