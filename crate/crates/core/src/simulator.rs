//! Trajectories, decay fits, sampled comparison-inequality checks and
//! threshold sweeps.
//!
//! Randomness comes from ChaCha streams keyed by `(seed, trial)`, so every
//! trial is reproducible on its own and trials can run in any order.

use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::comparison::GammaMatrix;
use crate::math::{abs, dist2, exp, ln};
use crate::model::{Equilibrium, ModelError, System};
use crate::trapping::StateBox;

/// Errors at or below this norm are treated as exact convergence.
pub const ERROR_FLOOR: f64 = 1e-12;
/// Slack on the sampled comparison inequality.
pub const LYAPUNOV_SLACK: f64 = 1e-9;
/// Default bisection tolerance for sweeps.
pub const SWEEP_TOL: f64 = 1e-6;

/// Independent generator for one trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    Model(ModelError),
    InvalidHorizon,
    SequenceTooShort { needed: usize, found: usize },
    DisturbanceOutOfBox(usize),
    DegenerateTrajectory,
    InsufficientData,
    NeverCertifies,
    AlwaysCertifies,
    InvalidRange,
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Model(e) => write!(f, "{e}"),
            Self::InvalidHorizon => write!(f, "horizon must be at least 1"),
            Self::SequenceTooShort { needed, found } => {
                write!(f, "disturbance sequence has {found} entries, {needed} needed")
            }
            Self::DisturbanceOutOfBox(t) => write!(f, "disturbance at step {t} is outside its box"),
            Self::DegenerateTrajectory => write!(f, "trajectory starts at the equilibrium"),
            Self::InsufficientData => write!(f, "fewer than two error samples above the floor"),
            Self::NeverCertifies => write!(f, "the lower end of the range does not certify"),
            Self::AlwaysCertifies => write!(f, "the upper end of the range certifies"),
            Self::InvalidRange => write!(f, "parameter range must satisfy lo <= hi"),
        }
    }
}

impl core::error::Error for SimError {}

impl From<ModelError> for SimError {
    fn from(e: ModelError) -> Self {
        Self::Model(e)
    }
}

/// How disturbances are chosen along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum DisturbancePolicy {
    Constant(Vec<f64>),
    Uniform,
    Sequence(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `T + 1` states, starting with the initial one.
    pub states: Vec<Vec<f64>>,
    /// `T` disturbances; entry `t` drives the step from `t` to `t + 1`.
    pub disturbances: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.disturbances.len()
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory is nonempty")
    }
}

/// Iterates the step map `horizon` times from `x0`.
pub fn simulate<S: System + ?Sized>(
    system: &S,
    x0: &[f64],
    policy: &DisturbancePolicy,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory, SimError> {
    if horizon == 0 {
        return Err(SimError::InvalidHorizon);
    }
    system.contains_state(x0)?;
    let dbox = system.disturbance_box();
    let mut rng = trial_rng(seed, 0);
    let mut states = Vec::with_capacity(horizon + 1);
    let mut disturbances = Vec::with_capacity(horizon);
    states.push(x0.to_vec());
    if let DisturbancePolicy::Sequence(seq) = policy {
        if seq.len() < horizon {
            return Err(SimError::SequenceTooShort { needed: horizon, found: seq.len() });
        }
    }
    let mut next = alloc::vec![0.0; x0.len()];
    for t in 0..horizon {
        let d = match policy {
            DisturbancePolicy::Constant(d) => d.clone(),
            DisturbancePolicy::Uniform => dbox.sample(&mut rng),
            DisturbancePolicy::Sequence(seq) => seq[t].clone(),
        };
        if !dbox.contains(&d) {
            return Err(SimError::DisturbanceOutOfBox(t));
        }
        system.step_into(&states[t], &d, &mut next);
        states.push(next.clone());
        disturbances.push(d);
    }
    Ok(Trajectory { states, disturbances })
}

/// Fitted `|x(t) - x*| ~ M exp(-sigma t) |x(0) - x*|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayEstimate {
    pub overshoot: f64,
    pub rate: f64,
    pub r_squared: f64,
    /// Number of points in the fit window.
    pub points: usize,
}

/// Least-squares fit of `ln |x(t) - x*|` against `t`.
///
/// The first `max(5, T/10)` steps are skipped and only errors above
/// [`ERROR_FLOOR`] are used. When fewer than three points survive, the skip
/// falls back to 5 steps and then to none.
pub fn estimate_decay(traj: &Trajectory, x_star: &[f64]) -> Result<DecayEstimate, SimError> {
    let e0 = dist2(&traj.states[0], x_star);
    if !(e0 > 0.0) {
        return Err(SimError::DegenerateTrajectory);
    }
    let errs: Vec<(f64, f64)> = traj
        .states
        .iter()
        .enumerate()
        .map(|(t, x)| (t as f64, dist2(x, x_star)))
        .filter(|(_, e)| *e > ERROR_FLOOR)
        .collect();
    let skip = 5usize.max(traj.horizon() / 10);
    let window = |from: usize| -> Vec<(f64, f64)> {
        errs.iter().filter(|(t, _)| *t >= from as f64).map(|(t, e)| (*t, ln(*e))).collect()
    };
    let mut pts = window(skip);
    if pts.len() < 3 {
        pts = window(5);
    }
    if pts.len() < 3 {
        pts = window(0);
    }
    if pts.len() < 2 {
        return Err(SimError::InsufficientData);
    }
    let m = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let r_squared = if syy == 0.0 { 1.0 } else { (sty * sty / (stt * syy)).clamp(0.0, 1.0) };
    Ok(DecayEstimate { overshoot: exp(intercept) / e0, rate: -slope, r_squared, points: pts.len() })
}

/// Worst sampled violation of `V(x+) <= Gamma V(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovReport {
    pub samples: usize,
    /// Largest `V_i(x+) - (Gamma V(x))_i`; nonpositive means every sample passed.
    pub max_violation: f64,
    pub worst_state: Vec<f64>,
    pub worst_disturbance: Vec<f64>,
    pub worst_component: usize,
}

impl LyapunovReport {
    pub fn passed(&self) -> bool {
        self.max_violation <= LYAPUNOV_SLACK
    }
}

/// Componentwise `V(x+) - Gamma V(x)` with `V_i(x) = |x_i - x_i*|`.
pub fn lyapunov_gap<S: System + ?Sized>(system: &S, gamma: &GammaMatrix, eq: &Equilibrium, x: &[f64], d: &[f64]) -> Vec<f64> {
    let n = system.dim();
    let mut next = alloc::vec![0.0; n];
    system.step_into(x, d, &mut next);
    let v: Vec<f64> = (0..n).map(|i| abs(x[i] - eq.x_star[i])).collect();
    let bound = gamma.apply(&v);
    (0..n).map(|i| abs(next[i] - eq.x_star[i]) - bound[i]).collect()
}

/// Samples `(x, d)` uniformly from the box and the disturbance box.
pub fn check_lyapunov_inequality<S: System + ?Sized>(
    system: &S,
    gamma: &GammaMatrix,
    region: &StateBox,
    eq: &Equilibrium,
    samples: usize,
    seed: u64,
) -> LyapunovReport {
    let n = system.dim();
    let dbox = system.disturbance_box();
    let mut rng = trial_rng(seed, 0);
    let mut report = LyapunovReport {
        samples,
        max_violation: f64::NEG_INFINITY,
        worst_state: Vec::new(),
        worst_disturbance: Vec::new(),
        worst_component: 0,
    };
    for _ in 0..samples {
        let x: Vec<f64> = (0..n).map(|i| region.lo()[i] + rng.gen::<f64>() * (region.hi()[i] - region.lo()[i])).collect();
        let d = dbox.sample(&mut rng);
        for (i, g) in lyapunov_gap(system, gamma, eq, &x, &d).into_iter().enumerate() {
            if g > report.max_violation {
                report.max_violation = g;
                report.worst_state = x.clone();
                report.worst_disturbance = d.clone();
                report.worst_component = i;
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Largest parameter found to certify.
    pub threshold: f64,
    /// Every evaluated `(parameter, certified)` pair in evaluation order.
    pub evaluations: Vec<(f64, bool)>,
}

/// Bisection for the largest certifying parameter in `[lo, hi]`.
///
/// Assumes certifiability is monotone in the parameter; this is not checked.
pub fn sweep_parameter<C: FnMut(f64) -> bool>(lo: f64, hi: f64, tol: f64, mut certifies: C) -> Result<SweepResult, SimError> {
    if !(lo <= hi) {
        return Err(SimError::InvalidRange);
    }
    let mut evaluations = Vec::new();
    let mut eval = |p: f64, log: &mut Vec<(f64, bool)>| {
        let ok = certifies(p);
        log.push((p, ok));
        ok
    };
    if eval(hi, &mut evaluations) {
        return Err(SimError::AlwaysCertifies);
    }
    if lo == hi || !eval(lo, &mut evaluations) {
        return Err(SimError::NeverCertifies);
    }
    let (mut good, mut bad) = (lo, hi);
    while bad - good > tol {
        let mid = 0.5 * (good + bad);
        if eval(mid, &mut evaluations) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(SweepResult { threshold: good, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{DemandRef, PiecewiseLinearDemand};
    use crate::disturbance::DisturbanceBox;
    use crate::model::{validate_network, NetworkSpec};
    use alloc::sync::Arc;
    use alloc::vec;

    /// One isolated cell with `f(x) = 0.5 x` and no inflow: `x+ = 0.5 x`.
    fn halving() -> crate::model::ValidatedNetwork {
        let f: DemandRef = Arc::new(PiecewiseLinearDemand::new(10.0, 0.5, 9.999, 0.0).unwrap());
        validate_network(NetworkSpec {
            capacities: vec![10.0],
            routing: vec![0.0],
            exit_rates: vec![1.0],
            inflows: vec![0.0],
            demands: vec![f],
            disturbance: DisturbanceBox::empty(),
        })
        .unwrap()
    }

    #[test]
    fn geometric_decay_fit_is_exact() {
        let net = halving();
        let traj = simulate(&net, &[8.0], &DisturbancePolicy::Uniform, 40, 0).unwrap();
        let est = estimate_decay(&traj, &[0.0]).unwrap();
        assert!((est.rate - core::f64::consts::LN_2).abs() < 1e-10);
        assert!((est.overshoot - 1.0).abs() < 1e-9);
        assert!((est.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_trajectory_is_degenerate() {
        let net = halving();
        let traj = simulate(&net, &[0.0], &DisturbancePolicy::Uniform, 10, 0).unwrap();
        assert!(traj.states.iter().all(|x| x[0] == 0.0));
        assert_eq!(estimate_decay(&traj, &[0.0]).unwrap_err(), SimError::DegenerateTrajectory);
    }

    #[test]
    fn rejects_bad_initial_state() {
        let net = halving();
        assert!(matches!(
            simulate(&net, &[11.0], &DisturbancePolicy::Uniform, 5, 0),
            Err(SimError::Model(ModelError::DomainViolation(0)))
        ));
    }

    #[test]
    fn streams_are_independent_and_reproducible() {
        let a: f64 = trial_rng(7, 1).gen();
        let b: f64 = trial_rng(7, 1).gen();
        let c: f64 = trial_rng(7, 2).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sweep_finds_step_threshold() {
        let r = sweep_parameter(0.0, 1.0, 1e-6, |p| p <= 0.3).unwrap();
        assert!((r.threshold - 0.3).abs() < 1e-6 && r.threshold <= 0.3);
    }

    #[test]
    fn sweep_reports_endpoint_failures() {
        assert_eq!(sweep_parameter(0.0, 1.0, 1e-6, |_| true).unwrap_err(), SimError::AlwaysCertifies);
        assert_eq!(sweep_parameter(0.0, 1.0, 1e-6, |_| false).unwrap_err(), SimError::NeverCertifies);
        assert_eq!(sweep_parameter(0.3, 0.3, 1e-6, |_| false).unwrap_err(), SimError::NeverCertifies);
    }
}
