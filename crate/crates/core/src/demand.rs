//! Demand functions `f(d, x)`: outflow requested by a component holding
//! mass `x` under disturbance `d`.
//!
//! Every demand lives on `[0, a]`, satisfies `0 <= f(d, x) <= x` and is
//! Lipschitz in `x`. Hot-path evaluation is unchecked; use [`eval_checked`]
//! at API boundaries.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::disturbance::DisturbanceBox;
use crate::math::abs;

/// Margin below which a point is treated as the equilibrium itself.
pub const EXCLUSION_WINDOW: f64 = 1e-9;

const FEASIBILITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum DemandError {
    DomainViolation { x: f64, capacity: f64 },
    DisturbanceOutOfBox,
    InvalidParameter(&'static str),
    DisturbanceCoordinate { coord: usize, dim: usize },
    IntervalExcludesEquilibrium { lo: f64, hi: f64, x_star: f64 },
    NotSubUnit { x: f64, value: f64 },
}

impl fmt::Display for DemandError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DomainViolation { x, capacity } => {
                write!(f, "state {x} outside demand domain [0, {capacity}]")
            }
            Self::DisturbanceOutOfBox => write!(f, "disturbance outside its admissible box"),
            Self::InvalidParameter(what) => write!(f, "invalid demand parameter: {what}"),
            Self::DisturbanceCoordinate { coord, dim } => {
                write!(f, "demand reads disturbance coordinate {} but the box has dimension {dim}", coord + 1)
            }
            Self::IntervalExcludesEquilibrium { lo, hi, x_star } => {
                write!(f, "interval [{lo}, {hi}] does not contain equilibrium {x_star}")
            }
            Self::NotSubUnit { x, value } => {
                write!(f, "demand value {value} at x = {x} violates 0 <= f(x) <= x")
            }
        }
    }
}

impl core::error::Error for DemandError {}

/// Direction of a one-sided derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A disturbance-parametrized demand function on `[0, capacity]`.
pub trait Demand: fmt::Debug + Send + Sync {
    fn capacity(&self) -> f64;

    fn eval(&self, d: &[f64], x: f64) -> f64;

    /// One-sided derivative in `x`. The default is a finite difference.
    fn slope(&self, d: &[f64], x: f64, side: Side) -> f64 {
        let a = self.capacity();
        let h = 1e-7 * a.max(1.0);
        let forward = |x: f64| (self.eval(d, x + h) - self.eval(d, x)) / h;
        let backward = |x: f64| (self.eval(d, x) - self.eval(d, x - h)) / h;
        match side {
            Side::Right if x + h <= a => forward(x),
            Side::Left if x - h >= 0.0 => backward(x),
            Side::Right => backward(x),
            Side::Left => forward(x),
        }
    }

    /// Points where the slope may jump. Suprema always include them.
    fn breakpoints(&self, _d: &[f64]) -> Vec<f64> {
        Vec::new()
    }

    /// Points of `[0, capacity]` with `f(d, x) = y`, when cheaply known.
    fn preimages(&self, _d: &[f64], _y: f64) -> Vec<f64> {
        Vec::new()
    }

    /// Smallest `x` with `f(d, x) = y`, on the increasing branch.
    fn free_flow_preimage(&self, d: &[f64], y: f64) -> Option<f64> {
        let a = self.capacity();
        let n = 2000;
        let (mut peak, mut peak_val) = (0.0, self.eval(d, 0.0));
        for l in 1..=n {
            let s = l as f64 * a / n as f64;
            let v = self.eval(d, s);
            if v > peak_val {
                peak = s;
                peak_val = v;
            }
        }
        if y < self.eval(d, 0.0) || y > peak_val {
            return None;
        }
        let (mut lo, mut hi) = (0.0, peak);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(d, mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(hi)
    }

    /// Checks `0 <= f(d, x) <= x` and parameter constraints over the box.
    fn validate(&self, dbox: &DisturbanceBox) -> Result<(), DemandError> {
        let a = self.capacity();
        let n = 2000;
        for d in dbox.check_points() {
            for l in 0..=n {
                let x = l as f64 * a / n as f64;
                let v = self.eval(&d, x);
                if !(v >= -FEASIBILITY_SLACK && v <= x + FEASIBILITY_SLACK) {
                    return Err(DemandError::NotSubUnit { x, value: v });
                }
            }
        }
        Ok(())
    }

    /// True when `f` does not depend on the disturbance.
    fn is_disturbance_free(&self) -> bool {
        false
    }
}

/// Shared handle to a demand.
pub type DemandRef = Arc<dyn Demand>;

/// How a disturbance coordinate enters a piecewise-linear demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DisturbanceMode {
    #[default]
    Unaffected,
    /// Free-flow slope becomes `r + d[coord]`.
    FreeFlowSlope { coord: usize },
    /// Congested slope magnitude becomes `q + d[coord]`.
    CongestionSlope { coord: usize },
}

/// Triangular demand: `r x` up to the critical mass `delta`, then decreasing
/// with slope `-q` up to the capacity `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiecewiseLinearDemand {
    capacity: f64,
    free_slope: f64,
    critical: f64,
    congestion_slope: f64,
    mode: DisturbanceMode,
}

impl PiecewiseLinearDemand {
    pub fn new(capacity: f64, free_slope: f64, critical: f64, congestion_slope: f64) -> Result<Self, DemandError> {
        let dmd = Self { capacity, free_slope, critical, congestion_slope, mode: DisturbanceMode::Unaffected };
        dmd.check_params(free_slope, congestion_slope)?;
        Ok(dmd)
    }

    pub fn with_mode(mut self, mode: DisturbanceMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn free_slope(&self) -> f64 {
        self.free_slope
    }

    pub fn critical(&self) -> f64 {
        self.critical
    }

    pub fn congestion_slope(&self) -> f64 {
        self.congestion_slope
    }

    pub fn mode(&self) -> DisturbanceMode {
        self.mode
    }

    /// Largest congested slope keeping the demand nonnegative at capacity.
    pub fn max_congestion_slope(capacity: f64, free_slope: f64, critical: f64) -> f64 {
        free_slope * critical / (capacity - critical)
    }

    fn check_params(&self, r: f64, q: f64) -> Result<(), DemandError> {
        let (a, delta) = (self.capacity, self.critical);
        let finite = [a, r, delta, q].iter().all(|v| v.is_finite());
        if !finite {
            return Err(DemandError::InvalidParameter("non-finite value"));
        }
        if a <= 0.0 {
            return Err(DemandError::InvalidParameter("capacity must be positive"));
        }
        if !(r > 0.0 && r <= 1.0) {
            return Err(DemandError::InvalidParameter("free-flow slope must lie in (0, 1]"));
        }
        if !(delta > 0.0 && delta < a) {
            return Err(DemandError::InvalidParameter("critical mass must lie in (0, capacity)"));
        }
        let q_max = Self::max_congestion_slope(a, r, delta);
        if !(q >= 0.0 && q <= q_max * (1.0 + 1e-12)) {
            return Err(DemandError::InvalidParameter("congested slope must lie in [0, r delta / (a - delta)]"));
        }
        Ok(())
    }

    /// Effective `(r, q)` under disturbance `d`.
    #[inline]
    pub fn slopes(&self, d: &[f64]) -> (f64, f64) {
        match self.mode {
            DisturbanceMode::Unaffected => (self.free_slope, self.congestion_slope),
            DisturbanceMode::FreeFlowSlope { coord } => (self.free_slope + d[coord], self.congestion_slope),
            DisturbanceMode::CongestionSlope { coord } => (self.free_slope, self.congestion_slope + d[coord]),
        }
    }
}

impl Demand for PiecewiseLinearDemand {
    fn capacity(&self) -> f64 {
        self.capacity
    }

    #[inline]
    fn eval(&self, d: &[f64], x: f64) -> f64 {
        let (r, q) = self.slopes(d);
        if x <= self.critical {
            r * x
        } else {
            r * self.critical - q * (x - self.critical)
        }
    }

    fn slope(&self, d: &[f64], x: f64, side: Side) -> f64 {
        let (r, q) = self.slopes(d);
        let free = match side {
            Side::Left => x <= self.critical,
            Side::Right => x < self.critical,
        };
        if free {
            r
        } else {
            -q
        }
    }

    fn breakpoints(&self, _d: &[f64]) -> Vec<f64> {
        alloc::vec![self.critical]
    }

    fn preimages(&self, d: &[f64], y: f64) -> Vec<f64> {
        let (r, q) = self.slopes(d);
        let mut out = Vec::new();
        let x = y / r;
        if (0.0..=self.critical).contains(&x) {
            out.push(x);
        }
        if q > 0.0 {
            let x = self.critical + (r * self.critical - y) / q;
            if x > self.critical && x <= self.capacity {
                out.push(x);
            }
        }
        out
    }

    fn free_flow_preimage(&self, d: &[f64], y: f64) -> Option<f64> {
        let (r, _) = self.slopes(d);
        if y < 0.0 || y > r * self.critical {
            return None;
        }
        Some(y / r)
    }

    fn validate(&self, dbox: &DisturbanceBox) -> Result<(), DemandError> {
        let coord = match self.mode {
            DisturbanceMode::Unaffected => None,
            DisturbanceMode::FreeFlowSlope { coord } | DisturbanceMode::CongestionSlope { coord } => Some(coord),
        };
        if let Some(coord) = coord {
            if coord >= dbox.dim() {
                return Err(DemandError::DisturbanceCoordinate { coord, dim: dbox.dim() });
            }
        }
        for d in dbox.corners() {
            let (r, q) = self.slopes(&d);
            self.check_params(r, q)?;
        }
        Ok(())
    }

    fn is_disturbance_free(&self) -> bool {
        self.mode == DisturbanceMode::Unaffected
    }
}

/// Demand given by a plain function, for shapes other than piecewise linear.
#[derive(Clone, Copy)]
pub struct FnDemand {
    capacity: f64,
    f: fn(&[f64], f64) -> f64,
}

impl FnDemand {
    pub fn new(capacity: f64, f: fn(&[f64], f64) -> f64) -> Self {
        Self { capacity, f }
    }
}

impl fmt::Debug for FnDemand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnDemand").field("capacity", &self.capacity).finish_non_exhaustive()
    }
}

impl Demand for FnDemand {
    fn capacity(&self) -> f64 {
        self.capacity
    }

    fn eval(&self, d: &[f64], x: f64) -> f64 {
        (self.f)(d, x)
    }
}

/// Evaluates with domain checks on both `x` and `d`.
pub fn eval_checked(demand: &dyn Demand, dbox: &DisturbanceBox, d: &[f64], x: f64) -> Result<f64, DemandError> {
    let a = demand.capacity();
    if !(0.0..=a).contains(&x) {
        return Err(DemandError::DomainViolation { x, capacity: a });
    }
    if !dbox.contains(d) {
        return Err(DemandError::DisturbanceOutOfBox);
    }
    Ok(demand.eval(d, x))
}

/// Uniform grid on `[lo, hi]` with `grid_n` cells, merged with the `extra`
/// points that fall inside, sorted and deduplicated.
pub fn interval_points(lo: f64, hi: f64, grid_n: usize, extra: &[f64]) -> Vec<f64> {
    let n = grid_n.max(1);
    let mut pts: Vec<f64> = (0..=n).map(|l| lo + l as f64 * (hi - lo) / n as f64).collect();
    pts.extend(extra.iter().copied().filter(|s| *s >= lo && *s <= hi));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Lipschitz constant of `x -> f(d, x)`, uniform over the box.
pub fn lipschitz_constant(demand: &dyn Demand, dbox: &DisturbanceBox, grid_n: usize) -> f64 {
    let a = demand.capacity();
    let mut best = 0.0f64;
    for d in dbox.check_points() {
        let pts = interval_points(0.0, a, grid_n, &demand.breakpoints(&d));
        for s in &pts {
            best = best
                .max(abs(demand.slope(&d, *s, Side::Left)))
                .max(abs(demand.slope(&d, *s, Side::Right)));
        }
    }
    best
}

/// `max f(d, s)` over `s` in `[lo, hi]` and `d` in the box.
pub fn max_over(demand: &dyn Demand, dbox: &DisturbanceBox, lo: f64, hi: f64, grid_n: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for d in dbox.check_points() {
        for s in interval_points(lo, hi, grid_n, &demand.breakpoints(&d)) {
            best = best.max(demand.eval(&d, s));
        }
    }
    best
}

/// Smallest `m` with `|f_star - f(d, s)| <= m |s - x_star|` for all `s` in
/// `[lo, hi]` and `d` in the box.
///
/// The supremum combines the grid, the demand's breakpoints and the one-sided
/// slope limits at `x_star`. It is infinite when `f(d, x_star) != f_star` for
/// some admissible `d`.
pub fn mu_coefficient(
    demand: &dyn Demand,
    dbox: &DisturbanceBox,
    x_star: f64,
    f_star: f64,
    lo: f64,
    hi: f64,
    grid_n: usize,
) -> Result<f64, DemandError> {
    let a = demand.capacity();
    if lo < 0.0 || hi > a {
        return Err(DemandError::DomainViolation { x: if lo < 0.0 { lo } else { hi }, capacity: a });
    }
    if !(lo <= x_star && x_star <= hi) {
        return Err(DemandError::IntervalExcludesEquilibrium { lo, hi, x_star });
    }
    let mut best = 0.0f64;
    for d in dbox.check_points() {
        if abs(demand.eval(&d, x_star) - f_star) > 1e-12 {
            return Ok(f64::INFINITY);
        }
        for s in interval_points(lo, hi, grid_n, &demand.breakpoints(&d)) {
            let gap = abs(s - x_star);
            if gap < EXCLUSION_WINDOW {
                continue;
            }
            best = best.max(abs(f_star - demand.eval(&d, s)) / gap);
        }
        if x_star < hi {
            best = best.max(abs(demand.slope(&d, x_star, Side::Right)));
        }
        if x_star > lo {
            best = best.max(abs(demand.slope(&d, x_star, Side::Left)));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell() -> PiecewiseLinearDemand {
        PiecewiseLinearDemand::new(10.0, 0.5, 5.0, 0.1).unwrap()
    }

    #[test]
    fn evaluates_both_branches() {
        let f = cell();
        assert_eq!(f.eval(&[], 3.0), 1.5);
        assert_eq!(f.eval(&[], 5.0), 2.5);
        assert!((f.eval(&[], 10.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_negative_at_capacity() {
        assert!(PiecewiseLinearDemand::new(10.0, 0.5, 5.0, 0.6).is_err());
        assert!(PiecewiseLinearDemand::new(10.0, 0.5, 5.0, 0.5).is_ok());
        assert!(PiecewiseLinearDemand::new(10.0, 1.2, 5.0, 0.1).is_err());
    }

    #[test]
    fn one_sided_slopes_at_kink() {
        let f = cell();
        assert_eq!(f.slope(&[], 5.0, Side::Left), 0.5);
        assert_eq!(f.slope(&[], 5.0, Side::Right), -0.1);
    }

    #[test]
    fn lipschitz_is_max_slope() {
        let f = cell();
        assert!((lipschitz_constant(&f, &DisturbanceBox::empty(), 100) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_tracks_disturbed_slope() {
        let f = cell().with_mode(DisturbanceMode::FreeFlowSlope { coord: 0 });
        let dbox = DisturbanceBox::new(alloc::vec![-0.1], alloc::vec![0.1]).unwrap();
        f.validate(&dbox).unwrap();
        assert!((lipschitz_constant(&f, &dbox, 100) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn mu_on_free_flow_equals_slope() {
        let f = cell();
        let m = mu_coefficient(&f, &DisturbanceBox::empty(), 2.0, 1.0, 0.0, 5.0, 500).unwrap();
        assert!((m - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mu_attains_sup_at_capacity() {
        // |1 - f(10)| / 8 = 1/8 is below the slope 0.5.
        let f = cell();
        let m = mu_coefficient(&f, &DisturbanceBox::empty(), 2.0, 1.0, 0.0, 10.0, 500).unwrap();
        assert!((m - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mu_rejects_interval_without_equilibrium() {
        let f = cell();
        let err = mu_coefficient(&f, &DisturbanceBox::empty(), 2.0, 1.0, 3.0, 5.0, 10).unwrap_err();
        assert!(matches!(err, DemandError::IntervalExcludesEquilibrium { .. }));
    }

    #[test]
    fn checked_eval_reports_domain() {
        let f = cell();
        let b = DisturbanceBox::empty();
        assert!(matches!(eval_checked(&f, &b, &[], 10.5), Err(DemandError::DomainViolation { .. })));
        assert!(matches!(eval_checked(&f, &b, &[0.0], 1.0), Err(DemandError::DisturbanceOutOfBox)));
    }

    #[test]
    fn preimages_cover_both_branches() {
        let f = cell();
        let mut p = f.preimages(&[], 2.2);
        p.sort_by(f64::total_cmp);
        assert_eq!(p.len(), 2);
        assert!((p[0] - 4.4).abs() < 1e-12 && (p[1] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn generic_preimage_by_bisection() {
        let f = FnDemand::new(4.0, |_, x| x * (1.0 - x / 8.0));
        let x = f.free_flow_preimage(&[], 1.5).unwrap();
        assert!((f.eval(&[], x) - 1.5).abs() < 1e-9);
        assert!(f.validate(&DisturbanceBox::empty()).is_ok());
    }
}
