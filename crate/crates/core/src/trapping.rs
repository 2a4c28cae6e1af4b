//! Trapping boxes: product regions that every trajectory enters in finitely
//! many steps and never leaves.
//!
//! For freeways the boxes are built cell by cell. An upper bound `c_i` can be
//! lowered when, above it, the cell drains faster than it fills and, below
//! it, one step cannot overshoot it. The grid search realizes this on
//! `s_l = l a_i / N`.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::demand::{interval_points, max_over, DemandRef};
use crate::disturbance::DisturbanceBox;
use crate::math::ceil;
use crate::model::{FreewaySpec, ModelError, System};
use crate::simulator::trial_rng;

/// Slack on box membership during empirical verification.
pub const MEMBERSHIP_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum BoxError {
    LengthMismatch { lo: usize, hi: usize },
    Inverted(usize),
    NonFinite(usize),
}

impl fmt::Display for BoxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LengthMismatch { lo, hi } => write!(f, "box bounds have lengths {lo} and {hi}"),
            Self::Inverted(i) => write!(f, "box interval {} has lo > hi", i + 1),
            Self::NonFinite(i) => write!(f, "box interval {} is not finite", i + 1),
        }
    }
}

impl core::error::Error for BoxError {}

/// Product of intervals `[lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl StateBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, BoxError> {
        if lo.len() != hi.len() {
            return Err(BoxError::LengthMismatch { lo: lo.len(), hi: hi.len() });
        }
        for i in 0..lo.len() {
            if !lo[i].is_finite() || !hi[i].is_finite() {
                return Err(BoxError::NonFinite(i));
            }
            if lo[i] > hi[i] {
                return Err(BoxError::Inverted(i));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The whole state space `[0, a]`.
    pub fn full(capacities: &[f64]) -> Self {
        Self { lo: alloc::vec![0.0; capacities.len()], hi: capacities.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_with(x, 0.0)
    }

    pub fn contains_with(&self, x: &[f64], slack: f64) -> bool {
        x.len() == self.dim() && (0..x.len()).all(|i| x[i] >= self.lo[i] - slack && x[i] <= self.hi[i] + slack)
    }

    /// Largest coordinate distance from `x` to the box.
    pub fn excursion(&self, x: &[f64]) -> f64 {
        (0..x.len()).map(|i| (self.lo[i] - x[i]).max(x[i] - self.hi[i]).max(0.0)).fold(0.0, f64::max)
    }

    fn with_hi(&self, i: usize, c: f64) -> Self {
        let mut b = self.clone();
        b.hi[i] = c;
        b
    }

    fn with_lo(&self, i: usize, lo: f64) -> Self {
        let mut b = self.clone();
        b.lo[i] = lo;
        b
    }
}

/// Which grid condition failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// Net drain above the new bound (or net fill below it) is not positive.
    MinPositivity,
    /// One step from inside can overshoot the new bound.
    MaxBound,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrapError {
    Model(ModelError),
    Box(BoxError),
    DimensionMismatch { expected: usize, found: usize },
    CellOutOfRange(usize),
    /// The requested bound does not keep the equilibrium inside.
    PreconditionViolation { cell: usize, value: f64 },
    ConditionFails { which: Condition, at: f64 },
    /// `0 < f_i(s) < a_{i+1}` fails for this cell at `s`.
    HypothesisViolation { cell: usize, at: f64 },
    /// Algorithm step (one-based) with no admissible grid point.
    NoFeasibleGridPoint { step: usize, cell: usize },
    EmptyGrid,
}

impl fmt::Display for TrapError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Model(e) => write!(f, "{e}"),
            Self::Box(e) => write!(f, "{e}"),
            Self::DimensionMismatch { expected, found } => write!(f, "box has dimension {found}, expected {expected}"),
            Self::CellOutOfRange(i) => write!(f, "cell {} does not exist", i + 1),
            Self::PreconditionViolation { cell, value } => {
                write!(f, "bound {value} for cell {} would exclude the equilibrium or widen the box", cell + 1)
            }
            Self::ConditionFails { which, at } => {
                let what = match which {
                    Condition::MinPositivity => "positivity",
                    Condition::MaxBound => "overshoot bound",
                };
                write!(f, "{what} condition fails at s = {at}")
            }
            Self::HypothesisViolation { cell, at } => {
                write!(f, "demand of cell {} at s = {at} is not strictly between 0 and the next capacity", cell + 1)
            }
            Self::NoFeasibleGridPoint { step, cell } => {
                write!(f, "step {step} (cell {}) has no admissible grid point", cell + 1)
            }
            Self::EmptyGrid => write!(f, "grid must have at least one cell"),
        }
    }
}

impl core::error::Error for TrapError {}

impl From<ModelError> for TrapError {
    fn from(e: ModelError) -> Self {
        Self::Model(e)
    }
}

fn none() -> DisturbanceBox {
    DisturbanceBox::empty()
}

fn peak(demand: &DemandRef, lo: f64, hi: f64, grid_n: usize) -> f64 {
    max_over(demand.as_ref(), &none(), lo, hi, grid_n)
}

fn trough(demand: &DemandRef, lo: f64, hi: f64, grid_n: usize) -> f64 {
    interval_points(lo, hi, grid_n, &demand.breakpoints(&[]))
        .into_iter()
        .map(|s| demand.eval(&[], s))
        .fold(f64::INFINITY, f64::min)
}

fn check_cell(spec: &FreewaySpec, region: &StateBox, i: usize) -> Result<(), TrapError> {
    if region.dim() != spec.n() {
        return Err(TrapError::DimensionMismatch { expected: spec.n(), found: region.dim() });
    }
    if i >= spec.n() {
        return Err(TrapError::CellOutOfRange(i));
    }
    Ok(())
}

/// Kinks of `min(room, f(s)) - min(a - s, supply)`.
fn drain_kinks(demand: &DemandRef, capacity: f64, room: Option<f64>, supply: f64) -> Vec<f64> {
    let mut k = demand.breakpoints(&[]);
    k.push(capacity - supply);
    if let Some(room) = room {
        k.extend(demand.preimages(&[], room));
    }
    k
}

/// Lowers `c_i` to `c_new` after checking on the grid that, with every other
/// interval fixed, the cell drains strictly on `[c_new, c_i]` and one step
/// from `[b_i, c_new]` stays below `c_new`.
pub fn shrink_upper(spec: &FreewaySpec, region: &StateBox, i: usize, c_new: f64, grid_n: usize) -> Result<StateBox, TrapError> {
    check_cell(spec, region, i)?;
    let eq = spec.equilibrium()?;
    let (b, c) = (region.lo()[i], region.hi()[i]);
    if !(eq.x_star[i] <= c_new && c_new <= c) {
        return Err(TrapError::PreconditionViolation { cell: i, value: c_new });
    }
    if c_new == c {
        return Ok(region.clone());
    }
    let n = spec.n();
    let a = spec.capacities();
    let demand = &spec.demands()[i];
    let supply = if i == 0 {
        spec.inflow()
    } else {
        peak(&spec.demands()[i - 1], region.lo()[i - 1], region.hi()[i - 1], grid_n)
    };
    let room = (i + 1 < n).then(|| a[i + 1] - region.hi()[i + 1]);
    let drain = |s: f64| {
        let f = demand.eval(&[], s);
        room.map_or(f, |r| r.min(f)) - (a[i] - s).min(supply)
    };
    let kinks = drain_kinks(demand, a[i], room, supply);
    if let Some(s) = interval_points(c_new, c, grid_n, &kinks).into_iter().find(|&s| !(drain(s) > 0.0)) {
        return Err(TrapError::ConditionFails { which: Condition::MinPositivity, at: s });
    }
    if let Some(s) = interval_points(b, c_new, grid_n, &kinks).into_iter().find(|&s| s - drain(s) > c_new) {
        return Err(TrapError::ConditionFails { which: Condition::MaxBound, at: s });
    }
    Ok(region.with_hi(i, c_new))
}

/// Raises `b_i` to `b_new` after checking on the grid that the cell fills
/// strictly on `[b_i, b_new]` and one step from `[b_new, c_i]` stays above
/// `b_new`. For cell 1 the fill condition is `v > f_1(s)`.
pub fn raise_lower(spec: &FreewaySpec, region: &StateBox, i: usize, b_new: f64, grid_n: usize) -> Result<StateBox, TrapError> {
    check_cell(spec, region, i)?;
    let eq = spec.equilibrium()?;
    let (b, c) = (region.lo()[i], region.hi()[i]);
    if !(b <= b_new && b_new <= eq.x_star[i]) {
        return Err(TrapError::PreconditionViolation { cell: i, value: b_new });
    }
    if b_new == b {
        return Ok(region.clone());
    }
    let n = spec.n();
    let a = spec.capacities();
    let demand = &spec.demands()[i];
    let supply = if i == 0 {
        spec.inflow()
    } else {
        trough(&spec.demands()[i - 1], region.lo()[i - 1], region.hi()[i - 1], grid_n)
    };
    let room = (i + 1 < n).then(|| a[i + 1] - region.lo()[i + 1]);
    let out = |s: f64| {
        let f = demand.eval(&[], s);
        room.map_or(f, |r| r.min(f))
    };
    let inflow = |s: f64| (a[i] - s).min(supply);
    let kinks = drain_kinks(demand, a[i], room, supply);
    let fill = |s: f64| if i == 0 { supply - demand.eval(&[], s) } else { inflow(s) - out(s) };
    if let Some(s) = interval_points(b, b_new, grid_n, &kinks).into_iter().find(|&s| !(fill(s) > 0.0)) {
        return Err(TrapError::ConditionFails { which: Condition::MinPositivity, at: s });
    }
    if let Some(s) = interval_points(b_new, c, grid_n, &kinks).into_iter().find(|&s| s - out(s) + inflow(s) < b_new) {
        return Err(TrapError::ConditionFails { which: Condition::MaxBound, at: s });
    }
    Ok(region.with_lo(i, b_new))
}

/// Acceptance rule for the drain margin at grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PositivityTest {
    /// Margin must be strictly positive.
    Strict,
    /// Exact zeros at grid points are accepted.
    #[default]
    NonNegative,
}

impl PositivityTest {
    fn accepts(self, margin: f64) -> bool {
        match self {
            Self::Strict => margin > 0.0,
            Self::NonNegative => margin >= 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pass {
    /// Upper bound `k_i` from the backward pass.
    Backward,
    /// Final upper bound `c_i` from the forward pass.
    Forward,
}

/// One step of the freeway algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapStep {
    /// One-based step number, `1..=2n-1`.
    pub step: usize,
    pub cell: usize,
    pub pass: Pass,
    pub value: f64,
    pub grid_index: usize,
    /// Smallest drain margin on the checked range.
    pub margin: f64,
    /// Upstream supply bound used (`v` for cell 1).
    pub supply: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrapReport {
    pub region: StateBox,
    /// Steps after which every trajectory is inside; `None` when a margin
    /// is zero.
    pub transient_bound: Option<u64>,
    /// Backward-pass bounds, `None` for cell 1.
    pub backward: Vec<Option<f64>>,
    pub steps: Vec<TrapStep>,
}

/// Result of one grid search.
struct Pick {
    index: usize,
    value: f64,
    margin: f64,
}

/// Smallest grid index `j` in `[first, limit)` such that the drain is
/// admissible on `[j, end]` and `max_{l <= j} (s_l - q_l) < s_j`.
fn pick(grid: &[f64], q: &[f64], first: usize, limit: usize, end: Option<usize>, test: PositivityTest) -> Option<Pick> {
    let nn = grid.len();
    let mut suffix_min = alloc::vec![f64::INFINITY; nn + 1];
    for l in (0..nn).rev() {
        suffix_min[l] = suffix_min[l + 1].min(q[l]);
    }
    let mut prefix_max = f64::NEG_INFINITY;
    for j in 0..limit.min(nn) {
        prefix_max = prefix_max.max(grid[j] - q[j]);
        if j < first {
            continue;
        }
        let margin = match end {
            None => suffix_min[j],
            Some(e) => q[j..=e].iter().copied().fold(f64::INFINITY, f64::min),
        };
        if test.accepts(margin) && prefix_max < grid[j] {
            return Some(Pick { index: j, value: grid[j], margin });
        }
    }
    None
}

/// How the grid points `l a / N` are formed in floating point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridRule {
    /// Each point computed as `l * a / N`.
    #[default]
    Exact,
    /// Running sum of the step `a / N`, capped at `a`. Rounding breaks
    /// exact ties between supply and inflow in the favourable direction.
    Accumulated,
}

impl GridRule {
    pub fn points(self, a: f64, grid_n: usize) -> Vec<f64> {
        match self {
            Self::Exact => (0..=grid_n).map(|l| l as f64 * a / grid_n as f64).collect(),
            Self::Accumulated => {
                let h = a / grid_n as f64;
                let mut s = 0.0;
                let mut out = Vec::with_capacity(grid_n + 1);
                out.push(0.0);
                for _ in 0..grid_n {
                    s += h;
                    out.push(s.min(a));
                }
                out
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Accumulated => "accumulated",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exact" => Some(Self::Exact),
            "accumulated" => Some(Self::Accumulated),
            _ => None,
        }
    }
}

/// Options for [`freeway_trap_algorithm`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrapOptions {
    pub positivity: PositivityTest,
    pub grid: GridRule,
}

/// Checks `0 < f_i(s) < a_{i+1}` on `(0, a_i]` for every cell but the last.
pub fn check_supply_hypothesis(spec: &FreewaySpec, grid_n: usize) -> Result<(), TrapError> {
    let a = spec.capacities();
    for i in 0..spec.n() - 1 {
        let demand = &spec.demands()[i];
        for s in interval_points(0.0, a[i], grid_n, &demand.breakpoints(&[])) {
            if s == 0.0 {
                continue;
            }
            let f = demand.eval(&[], s);
            if !(f > 0.0 && f < a[i + 1]) {
                return Err(TrapError::HypothesisViolation { cell: i, at: s });
            }
        }
    }
    Ok(())
}

/// Builds a trapping box `[0, c]` for a freeway.
///
/// A backward pass bounds cells `n, ..., 2` from above assuming only that
/// upstream cells stay in `[0, a]`; a forward pass then tightens cells
/// `1, ..., n` using the bounds already found upstream. Each bound is the
/// smallest admissible point of the cell's grid at or above `x_i*`.
pub fn freeway_trap_algorithm(spec: &FreewaySpec, grid_n: usize, options: TrapOptions) -> Result<TrapReport, TrapError> {
    if grid_n == 0 {
        return Err(TrapError::EmptyGrid);
    }
    check_supply_hypothesis(spec, grid_n)?;
    let eq = spec.equilibrium()?;
    let n = spec.n();
    let a = spec.capacities().to_vec();
    let demands = spec.demands();
    let grids: Vec<Vec<f64>> = (0..n).map(|i| options.grid.points(a[i], grid_n)).collect();
    let first = |i: usize| grids[i].iter().position(|s| *s >= eq.x_star[i]).unwrap_or(grid_n + 1);

    // Drain of cell i given downstream room and upstream supply.
    let drain_values = |i: usize, room: Option<f64>, supply: f64| -> Vec<f64> {
        grids[i]
            .iter()
            .map(|&s| {
                let f = demands[i].eval(&[], s);
                room.map_or(f, |r| r.min(f)) - (a[i] - s).min(supply)
            })
            .collect()
    };

    let mut steps = Vec::with_capacity(2 * n - 1);
    let mut backward: Vec<Option<f64>> = alloc::vec![None; n];
    let mut backward_index = alloc::vec![grid_n; n];
    let mut transient: Option<u64> = Some(0);
    let mut accumulate = |old: f64, new: f64, margin: f64| {
        transient = match transient {
            Some(m) if margin > 0.0 => Some(m + ceil((old - new) / margin) as u64 + 1),
            _ => None,
        };
    };

    for (step, i) in (1..n).rev().enumerate().map(|(k, i)| (k + 1, i)) {
        let supply = peak(&demands[i - 1], 0.0, a[i - 1], grid_n);
        let room = (i + 1 < n).then(|| a[i + 1] - backward[i + 1].expect("downstream bound is set"));
        let q = drain_values(i, room, supply);
        let p = pick(&grids[i], &q, first(i), grid_n, None, options.positivity)
            .ok_or(TrapError::NoFeasibleGridPoint { step, cell: i })?;
        accumulate(a[i], p.value, p.margin);
        backward[i] = Some(p.value);
        backward_index[i] = p.index;
        steps.push(TrapStep { step, cell: i, pass: Pass::Backward, value: p.value, grid_index: p.index, margin: p.margin, supply });
    }

    let mut upper = alloc::vec![0.0; n];
    for i in 0..n {
        let step = n + i;
        let supply = if i == 0 { spec.inflow() } else { peak(&demands[i - 1], 0.0, upper[i - 1], grid_n) };
        let room = (i + 1 < n).then(|| a[i + 1] - backward[i + 1].expect("downstream bound is set"));
        let q = drain_values(i, room, supply);
        let (limit, end, old) = if i == 0 {
            (grid_n, None, a[0])
        } else {
            (backward_index[i], Some(backward_index[i]), backward[i].expect("backward bound is set"))
        };
        let p = pick(&grids[i], &q, first(i), limit, end, options.positivity)
            .ok_or(TrapError::NoFeasibleGridPoint { step, cell: i })?;
        accumulate(old, p.value, p.margin);
        upper[i] = p.value;
        steps.push(TrapStep { step, cell: i, pass: Pass::Forward, value: p.value, grid_index: p.index, margin: p.margin, supply });
    }

    Ok(TrapReport {
        region: StateBox::new(alloc::vec![0.0; n], upper).map_err(TrapError::Box)?,
        transient_bound: transient,
        backward,
        steps,
    })
}

/// Outcome of [`verify_trap_empirically`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrapVerification {
    pub trials: usize,
    pub horizon: usize,
    pub entered: usize,
    pub max_entry_time: Option<usize>,
    pub mean_entry_time: Option<f64>,
    /// Steps spent outside the box after first entry, over all trials.
    pub post_entry_excursions: usize,
    pub worst_excursion: f64,
    /// Set when some trajectory left after entering or never entered.
    pub violated: bool,
}

/// Simulates random initial states (and random disturbance sequences) and
/// records entry into the box and any later exit.
pub fn verify_trap_empirically<S: System + ?Sized>(system: &S, region: &StateBox, trials: usize, horizon: usize, seed: u64) -> TrapVerification {
    let n = system.dim();
    let a = system.capacities().to_vec();
    let dbox = system.disturbance_box().clone();
    let mut entered = 0;
    let mut entry_sum = 0usize;
    let mut max_entry: Option<usize> = None;
    let mut excursions = 0;
    let mut worst = 0.0f64;
    let mut x = alloc::vec![0.0; n];
    let mut next = alloc::vec![0.0; n];
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial as u64);
        for i in 0..n {
            x[i] = rng.gen::<f64>() * a[i];
        }
        let mut entry: Option<usize> = None;
        for t in 0..=horizon {
            let inside = region.contains_with(&x, MEMBERSHIP_SLACK);
            match (entry, inside) {
                (None, true) => entry = Some(t),
                (Some(_), false) => {
                    excursions += 1;
                    worst = worst.max(region.excursion(&x));
                }
                _ => {}
            }
            if t == horizon {
                break;
            }
            let d = dbox.sample(&mut rng);
            system.step_into(&x, &d, &mut next);
            core::mem::swap(&mut x, &mut next);
        }
        if let Some(t) = entry {
            entered += 1;
            entry_sum += t;
            max_entry = Some(max_entry.map_or(t, |m| m.max(t)));
        }
    }
    TrapVerification {
        trials,
        horizon,
        entered,
        max_entry_time: max_entry,
        mean_entry_time: (entered > 0).then(|| entry_sum as f64 / entered as f64),
        post_entry_excursions: excursions,
        worst_excursion: worst,
        violated: excursions > 0 || entered < trials,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::PiecewiseLinearDemand;
    use alloc::sync::Arc;
    use alloc::vec;

    fn pl(r: f64, q: f64) -> DemandRef {
        Arc::new(PiecewiseLinearDemand::new(10.0, r, 5.0, q).unwrap())
    }

    fn freeway(p: f64) -> FreewaySpec {
        let mut d: Vec<DemandRef> = (0..4).map(|_| pl(0.5, 0.1)).collect();
        d.push(pl(0.4, p));
        FreewaySpec::new(vec![10.0; 5], d, 1.0).unwrap()
    }

    #[test]
    fn unchanged_bounds_are_accepted() {
        let fw = freeway(0.1);
        let s = StateBox::full(&[10.0; 5]);
        assert_eq!(shrink_upper(&fw, &s, 2, 10.0, 100).unwrap(), s);
        assert_eq!(raise_lower(&fw, &s, 2, 0.0, 100).unwrap(), s);
    }

    #[test]
    fn bounds_excluding_equilibrium_are_rejected() {
        let fw = freeway(0.1);
        let s = StateBox::full(&[10.0; 5]);
        assert!(matches!(shrink_upper(&fw, &s, 0, 1.0, 100), Err(TrapError::PreconditionViolation { .. })));
        assert!(matches!(raise_lower(&fw, &s, 0, 2.5, 100), Err(TrapError::PreconditionViolation { .. })));
    }

    #[test]
    fn first_cell_lower_bound_can_rise() {
        let fw = freeway(0.1);
        let s = StateBox::full(&[10.0; 5]);
        let raised = raise_lower(&fw, &s, 0, 1.5, 1000).unwrap();
        assert_eq!(raised.lo()[0], 1.5);
    }

    #[test]
    fn last_cell_shrinks_to_backward_bound() {
        let fw = freeway(0.1);
        let report = freeway_trap_algorithm(&fw, 1000, TrapOptions::default()).unwrap();
        let k5 = report.backward[4].unwrap();
        let s = StateBox::full(&[10.0; 5]);
        assert_eq!(shrink_upper(&fw, &s, 4, k5, 1000).unwrap().hi()[4], k5);
    }

    #[test]
    fn algorithm_steps_are_ordered() {
        let report = freeway_trap_algorithm(&freeway(0.1), 1000, TrapOptions::default()).unwrap();
        let order: Vec<(usize, usize)> = report.steps.iter().map(|s| (s.step, s.cell)).collect();
        assert_eq!(order, vec![(1, 4), (2, 3), (3, 2), (4, 1), (5, 0), (6, 1), (7, 2), (8, 3), (9, 4)]);
        for i in 1..5 {
            assert!(report.region.hi()[i] <= report.backward[i].unwrap());
        }
    }

    #[test]
    fn algorithm_fails_for_steep_capacity_drop() {
        let err = freeway_trap_algorithm(&freeway(0.3), 1000, TrapOptions::default()).unwrap_err();
        assert!(matches!(err, TrapError::NoFeasibleGridPoint { .. }));
    }

    #[test]
    fn free_flow_chain_gets_small_box() {
        let d: Vec<DemandRef> = (0..3).map(|_| Arc::new(PiecewiseLinearDemand::new(10.0, 0.5, 9.99, 0.0).unwrap()) as DemandRef).collect();
        let fw = FreewaySpec::new(vec![10.0; 3], d, 1.0).unwrap();
        let report = freeway_trap_algorithm(&fw, 1000, TrapOptions::default()).unwrap();
        assert!(report.region.hi().iter().all(|c| *c < 5.0), "{:?}", report.region);
    }

    #[test]
    fn full_space_is_entered_immediately() {
        let fw = freeway(0.1);
        let v = verify_trap_empirically(&fw, &StateBox::full(&[10.0; 5]), 10, 50, 3);
        assert_eq!(v.max_entry_time, Some(0));
        assert!(!v.violated);
    }
}
