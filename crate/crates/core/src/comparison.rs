//! Linear comparison matrix `Gamma` for the error dynamics.
//!
//! With `V_i(x) = |x_i - x_i*|`, every admissible step from the box satisfies
//! `V(x+) <= Gamma V(x)` componentwise. `Gamma` has the diagonal `lambda`
//! (self-coupling bound) and off-diagonal terms from supply coupling
//! (through `omega`) and demand coupling (through `mu`).

use alloc::vec::Vec;
use core::fmt;

use crate::demand::{self, interval_points, DemandError, Side, EXCLUSION_WINDOW};
use crate::disturbance::DisturbanceBox;
use crate::math::abs;
use crate::model::{Equilibrium, FreewaySpec, ValidatedNetwork};
use crate::spectral::{self, NonnegativeMatrix, SpectralError};
use crate::trapping::StateBox;

/// Grid points per coordinate for the `omega` search.
pub const OMEGA_GRID: usize = 200;
/// Full coordinate passes for the `omega` search.
pub const OMEGA_PASSES: usize = 2;

const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum GammaError {
    DimensionMismatch { field: &'static str, expected: usize, found: usize },
    DegenerateInterval(usize),
    BoxExcludesEquilibrium(usize),
    BoxOutsideStateSpace(usize),
    OmegaOutOfRange(usize),
    Condition318Violation { from: usize, to: usize },
    SupplyHypothesisViolation(usize),
    Demand { index: usize, source: DemandError },
}

impl fmt::Display for GammaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DimensionMismatch { field, expected, found } => {
                write!(f, "{field} has length {found}, expected {expected}")
            }
            Self::DegenerateInterval(i) => write!(f, "box interval of component {} is a single point", i + 1),
            Self::BoxExcludesEquilibrium(i) => {
                write!(f, "box interval of component {} does not contain the equilibrium", i + 1)
            }
            Self::BoxOutsideStateSpace(i) => write!(f, "box interval of component {} leaves [0, a]", i + 1),
            Self::OmegaOutOfRange(i) => write!(f, "omega of component {} is outside [x*, a]", i + 1),
            Self::Condition318Violation { from, to } => write!(
                f,
                "peak demand of component {} can overload component {} (f_j* + p_ij (F_i - f_i*) > a_j)",
                from + 1,
                to + 1
            ),
            Self::SupplyHypothesisViolation(i) => {
                write!(f, "peak demand of cell {} exceeds the capacity of cell {}", i + 1, i + 2)
            }
            Self::Demand { index, source } => write!(f, "demand of component {}: {source}", index + 1),
        }
    }
}

impl core::error::Error for GammaError {}

/// Coefficients behind a comparison matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaParams {
    pub region: StateBox,
    pub omega: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    /// Peak demand over the box interval and the disturbance box.
    pub f_max: Vec<f64>,
}

/// Comparison matrix with provenance. Entries may be infinite when a
/// coefficient is unbounded, so the matrix is stored raw.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaMatrix {
    n: usize,
    entries: Vec<f64>,
    pub params: GammaParams,
}

impl GammaMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }

    pub fn to_nonnegative(&self) -> Result<NonnegativeMatrix, SpectralError> {
        NonnegativeMatrix::new(self.n, self.entries.clone())
    }

    /// `Gamma v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (0..self.n)
                    .map(|j| {
                        let g = self.get(i, j);
                        if g == 0.0 || v[j] == 0.0 {
                            0.0
                        } else {
                            g * v[j]
                        }
                    })
                    .sum()
            })
            .collect()
    }

    /// Spectral radius, infinite when an entry is.
    pub fn rho(&self, tol: f64) -> f64 {
        match self.to_nonnegative() {
            Ok(m) => spectral::spectral_radius(&m, tol).map(|r| r.value).unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        }
    }
}

fn check_len(field: &'static str, expected: usize, found: usize) -> Result<(), GammaError> {
    if expected == found {
        Ok(())
    } else {
        Err(GammaError::DimensionMismatch { field, expected, found })
    }
}

fn check_region(net: &ValidatedNetwork, eq: &Equilibrium, region: &StateBox) -> Result<(), GammaError> {
    let n = net.n();
    check_len("box", n, region.dim())?;
    let a = net.spec().capacities.as_slice();
    for i in 0..n {
        let (b, c) = (region.lo()[i], region.hi()[i]);
        if b < 0.0 || c > a[i] {
            return Err(GammaError::BoxOutsideStateSpace(i));
        }
        if !(b <= eq.x_star[i] && eq.x_star[i] <= c) {
            return Err(GammaError::BoxExcludesEquilibrium(i));
        }
        if b == c {
            return Err(GammaError::DegenerateInterval(i));
        }
    }
    Ok(())
}

fn check_omega(net: &ValidatedNetwork, eq: &Equilibrium, omega: &[f64]) -> Result<(), GammaError> {
    check_len("omega", net.n(), omega.len())?;
    let a = net.spec().capacities.as_slice();
    match (0..net.n()).find(|&i| !(omega[i] >= eq.x_star[i] && omega[i] <= a[i])) {
        Some(i) => Err(GammaError::OmegaOutOfRange(i)),
        None => Ok(()),
    }
}

/// The two endpoint error quotients of component `i`, with every other
/// component frozen at equilibrium.
struct SelfCoupling<'a> {
    net: &'a ValidatedNetwork,
    i: usize,
    x_star: f64,
    /// Equilibrium inflow into `i`.
    inflow_star: f64,
    /// `(j, p_ij, rest_j, a_j, a_j - omega_j)` for every target `j`, where
    /// `rest_j` is the attempted inflow into `j` not coming from `i`.
    targets: Vec<(usize, f64, f64, f64, f64)>,
}

impl<'a> SelfCoupling<'a> {
    fn new(net: &'a ValidatedNetwork, eq: &Equilibrium, omega: &[f64], i: usize) -> Self {
        let n = net.n();
        let a = &net.spec().capacities;
        let v = net.inflows();
        let inflow_star = v[i] + (0..n).map(|j| net.p(j, i) * eq.f_star[j]).sum::<f64>();
        let targets = (0..n)
            .filter(|&j| net.p(i, j) > 0.0)
            .map(|j| {
                let rest = v[j] + (0..n).filter(|&k| k != i).map(|k| net.p(k, j) * eq.f_star[k]).sum::<f64>();
                (j, net.p(i, j), rest, a[j], a[j] - omega[j])
            })
            .collect();
        Self { net, i, x_star: eq.x_star[i], inflow_star, targets }
    }

    fn capacity(&self) -> f64 {
        self.net.spec().capacities[self.i]
    }

    /// Admitted share of `f` routed into a receiver with free space `cap`.
    #[inline]
    fn admitted(f: f64, p: f64, rest: f64, cap: f64) -> f64 {
        let attempted = rest + p * f;
        if attempted <= cap || attempted <= 0.0 {
            f
        } else {
            cap * f / attempted
        }
    }

    /// `(E1, E2)`: the quotient numerators for the minimal and maximal
    /// supply restriction.
    #[inline]
    fn numerators(&self, d: &[f64], s: f64) -> (f64, f64) {
        let f = self.net.demands()[self.i].eval(d, s);
        let q = self.net.exit_rate(self.i);
        let mut out_loose = q * f;
        let mut out_tight = q * f;
        for &(_, p, rest, cap_loose, cap_tight) in &self.targets {
            out_loose += p * Self::admitted(f, p, rest, cap_loose);
            out_tight += p * Self::admitted(f, p, rest, cap_tight);
        }
        let inflow = (self.capacity() - s).min(self.inflow_star);
        (self.x_star - s + out_loose - inflow, s - self.x_star - out_tight + inflow)
    }

    /// One-sided derivatives of `(E1, E2)` at the equilibrium.
    fn slopes_at_equilibrium(&self, d: &[f64], side: Side) -> (f64, f64) {
        let dir = match side {
            Side::Right => 1.0,
            Side::Left => -1.0,
        };
        let demand = &self.net.demands()[self.i];
        let f = demand.eval(d, self.x_star);
        let df = demand.slope(d, self.x_star, side);
        let q = self.net.exit_rate(self.i);
        let branch = |p: f64, rest: f64, cap: f64| {
            let attempted = rest + p * f;
            let rising = dir * p * df > 0.0;
            let capped = attempted > cap || (attempted == cap && rising);
            if !capped {
                df
            } else if cap <= 0.0 {
                0.0
            } else {
                cap * df * rest / (attempted * attempted)
            }
        };
        let mut d_loose = q * df;
        let mut d_tight = q * df;
        for &(_, p, rest, cap_loose, cap_tight) in &self.targets {
            d_loose += p * branch(p, rest, cap_loose);
            d_tight += p * branch(p, rest, cap_tight);
        }
        let room = self.capacity() - self.x_star;
        let room_binds = room < self.inflow_star || (room == self.inflow_star && dir > 0.0);
        let d_inflow = if room_binds { -1.0 } else { 0.0 };
        (-1.0 + d_loose - d_inflow, 1.0 - d_tight + d_inflow)
    }

    fn kinks(&self, d: &[f64]) -> Vec<f64> {
        let demand = &self.net.demands()[self.i];
        let mut pts = demand.breakpoints(d);
        pts.push(self.capacity() - self.inflow_star);
        for &(_, p, rest, cap_loose, cap_tight) in &self.targets {
            for cap in [cap_loose, cap_tight] {
                pts.extend(demand.preimages(d, (cap - rest) / p));
            }
        }
        pts
    }

    fn quotient(&self, d: &[f64], s: f64) -> f64 {
        let (e1, e2) = self.numerators(d, s);
        e1.max(e2) / abs(s - self.x_star)
    }

    /// Supremum of the quotient over `[lo, hi]` for one disturbance.
    fn sup(&self, d: &[f64], lo: f64, hi: f64, grid_n: usize) -> f64 {
        let (e1, e2) = self.numerators(d, self.x_star);
        let scale = 1.0 + self.capacity();
        if e1.max(e2) > ZERO_TOL * scale {
            return f64::INFINITY;
        }
        let pts = interval_points(lo, hi, grid_n, &self.kinks(d));
        let mut best = 0.0f64;
        let mut arg = None;
        for (k, &s) in pts.iter().enumerate() {
            if abs(s - self.x_star) < EXCLUSION_WINDOW {
                continue;
            }
            let v = self.quotient(d, s);
            if v > best {
                best = v;
                arg = Some(k);
            }
        }
        if let Some(k) = arg {
            best = best.max(self.refine(d, &pts, k));
        }
        if self.x_star < hi {
            best = best.max(self.slopes_at_equilibrium(d, Side::Right).0);
            best = best.max(self.slopes_at_equilibrium(d, Side::Right).1);
        }
        if self.x_star > lo {
            let (d1, d2) = self.slopes_at_equilibrium(d, Side::Left);
            best = best.max(-d1).max(-d2);
        }
        best
    }

    /// Golden-section search between the neighbours of the best grid point,
    /// kept on the same side of the equilibrium.
    fn refine(&self, d: &[f64], pts: &[f64], k: usize) -> f64 {
        let s = pts[k];
        let mut lo = if k > 0 { pts[k - 1] } else { s };
        let mut hi = if k + 1 < pts.len() { pts[k + 1] } else { s };
        if s > self.x_star {
            lo = lo.max(self.x_star + EXCLUSION_WINDOW);
        } else {
            hi = hi.min(self.x_star - EXCLUSION_WINDOW);
        }
        if !(hi > lo) {
            return 0.0;
        }
        let g = 0.618_033_988_749_894_9;
        let (mut a, mut b) = (lo, hi);
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let (mut f1, mut f2) = (self.quotient(d, x1), self.quotient(d, x2));
        let mut best = f1.max(f2);
        for _ in 0..60 {
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = self.quotient(d, x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = self.quotient(d, x1);
            }
            best = best.max(f1).max(f2);
        }
        best
    }
}

fn lambda_one(net: &ValidatedNetwork, eq: &Equilibrium, region: &StateBox, omega: &[f64], i: usize, grid_n: usize, dpts: &[Vec<f64>]) -> f64 {
    let cell = SelfCoupling::new(net, eq, omega, i);
    dpts.iter()
        .map(|d| cell.sup(d, region.lo()[i], region.hi()[i], grid_n))
        .fold(0.0, f64::max)
}

/// Self-coupling coefficients: the least `lambda_i` such that both endpoint
/// error quotients stay below `lambda_i |s - x_i*|` on the box interval,
/// uniformly over the disturbance box.
pub fn lambda_coefficients(
    net: &ValidatedNetwork,
    eq: &Equilibrium,
    region: &StateBox,
    omega: &[f64],
    grid_n: usize,
) -> Result<Vec<f64>, GammaError> {
    check_region(net, eq, region)?;
    check_omega(net, eq, omega)?;
    let dpts = net.spec().disturbance.check_points();
    Ok((0..net.n()).map(|i| lambda_one(net, eq, region, omega, i, grid_n, &dpts)).collect())
}

/// Demand-deviation coefficients over the box intervals.
pub fn mu_coefficients(net: &ValidatedNetwork, eq: &Equilibrium, region: &StateBox, grid_n: usize) -> Result<Vec<f64>, GammaError> {
    check_region(net, eq, region)?;
    let dbox = &net.spec().disturbance;
    (0..net.n())
        .map(|i| {
            demand::mu_coefficient(
                net.demands()[i].as_ref(),
                dbox,
                eq.x_star[i],
                eq.f_star[i],
                region.lo()[i],
                region.hi()[i],
                grid_n,
            )
            .map_err(|source| GammaError::Demand { index: i, source })
        })
        .collect()
}

/// Peak demands over the box intervals.
pub fn peak_demands(net: &ValidatedNetwork, region: &StateBox, grid_n: usize) -> Vec<f64> {
    peak_demands_over(net.demands(), &net.spec().disturbance, region, grid_n)
}

fn peak_demands_over(demands: &[crate::demand::DemandRef], dbox: &DisturbanceBox, region: &StateBox, grid_n: usize) -> Vec<f64> {
    (0..demands.len())
        .map(|i| demand::max_over(demands[i].as_ref(), dbox, region.lo()[i], region.hi()[i], grid_n))
        .collect()
}

/// Checks that peak demand cannot overload any receiver.
pub fn check_overload(net: &ValidatedNetwork, eq: &Equilibrium, f_max: &[f64]) -> Result<(), GammaError> {
    let n = net.n();
    let a = &net.spec().capacities;
    for i in 0..n {
        for j in 0..n {
            let p = net.p(i, j);
            if p > 0.0 && eq.f_star[j] + p * (f_max[i] - eq.f_star[i]) > a[j] + ZERO_TOL {
                return Err(GammaError::Condition318Violation { from: i, to: j });
            }
        }
    }
    Ok(())
}

/// `num / den`, with `0 / 0 = 0`.
#[inline]
fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Assembles the general-network comparison matrix from its coefficients.
pub fn build_gamma_general(net: &ValidatedNetwork, eq: &Equilibrium, params: GammaParams) -> Result<GammaMatrix, GammaError> {
    let n = net.n();
    check_region(net, eq, &params.region)?;
    check_omega(net, eq, &params.omega)?;
    for (field, v) in [("lambda", &params.lambda), ("mu", &params.mu), ("f_max", &params.f_max)] {
        check_len(field, n, v.len())?;
    }
    check_overload(net, eq, &params.f_max)?;
    let (fs, xs, c) = (&eq.f_star, &eq.x_star, params.region.hi());
    let mut entries = alloc::vec![0.0; n * n];
    for i in 0..n {
        let surge = params.f_max[i] - fs[i];
        for j in 0..n {
            if i == j {
                entries[i * n + j] = params.lambda[i];
                continue;
            }
            let p = net.p(i, j);
            let mut g = 0.0;
            if p > 0.0 {
                let num = params.f_max[i] * p * (c[j] - params.omega[j]).max(0.0);
                g += ratio(num, (fs[j] + p * surge) * (c[j] - xs[j]));
            }
            let mut coupling = net.p(j, i);
            for k in 0..n {
                let w = net.p(i, k) * net.p(j, k);
                if w > 0.0 {
                    coupling += ratio(params.f_max[i] * w, fs[k] + net.p(i, k) * surge);
                }
            }
            if coupling > 0.0 && params.mu[j] > 0.0 {
                g += coupling * params.mu[j];
            }
            entries[i * n + j] = g;
        }
    }
    Ok(GammaMatrix { n, entries, params })
}

/// All coefficients for a given box and `omega`.
pub fn gamma_params(
    net: &ValidatedNetwork,
    eq: &Equilibrium,
    region: &StateBox,
    omega: &[f64],
    grid_n: usize,
) -> Result<GammaParams, GammaError> {
    let lambda = lambda_coefficients(net, eq, region, omega, grid_n)?;
    let mu = mu_coefficients(net, eq, region, grid_n)?;
    let f_max = peak_demands(net, region, grid_n);
    Ok(GammaParams { region: region.clone(), omega: omega.to_vec(), lambda, mu, f_max })
}

/// Coordinate descent on `omega` minimizing `rho(Gamma)`.
///
/// Each coordinate ranges over [`OMEGA_GRID`] points of `[x_i*, a_i)`,
/// starting from `omega = x*`, sweeping `1..n` for [`OMEGA_PASSES`] passes.
/// Ties keep the lowest grid index. `mu_scale` inflates the demand-deviation
/// coefficients.
pub fn optimize_omega(
    net: &ValidatedNetwork,
    eq: &Equilibrium,
    region: &StateBox,
    grid_n: usize,
    mu_scale: f64,
) -> Result<(Vec<f64>, GammaMatrix), GammaError> {
    let n = net.n();
    check_region(net, eq, region)?;
    let a = net.spec().capacities.clone();
    let dpts = net.spec().disturbance.check_points();
    let mu: Vec<f64> = mu_coefficients(net, eq, region, grid_n)?.into_iter().map(|m| m * mu_scale).collect();
    let f_max = peak_demands(net, region, grid_n);
    check_overload(net, eq, &f_max)?;
    let mut omega = eq.x_star.clone();
    let mut lambda: Vec<f64> = (0..n).map(|i| lambda_one(net, eq, region, &omega, i, grid_n, &dpts)).collect();
    let assemble = |omega: &[f64], lambda: &[f64]| {
        let params = GammaParams { region: region.clone(), omega: omega.to_vec(), lambda: lambda.to_vec(), mu: mu.clone(), f_max: f_max.clone() };
        build_gamma_general(net, eq, params)
    };
    for _ in 0..OMEGA_PASSES {
        for j in 0..n {
            let upstream: Vec<usize> = (0..n).filter(|&i| net.p(i, j) > 0.0).collect();
            if upstream.is_empty() {
                continue;
            }
            let mut best: Option<(f64, f64, Vec<f64>)> = None;
            for k in 0..OMEGA_GRID {
                let cand = eq.x_star[j] + k as f64 * (a[j] - eq.x_star[j]) / OMEGA_GRID as f64;
                let mut trial = omega.clone();
                trial[j] = cand;
                let mut trial_lambda = lambda.clone();
                for &i in &upstream {
                    trial_lambda[i] = lambda_one(net, eq, region, &trial, i, grid_n, &dpts);
                }
                let rho = assemble(&trial, &trial_lambda)?.rho(crate::DEFAULT_RHO_TOL);
                if best.as_ref().is_none_or(|(r, _, _)| rho < *r) {
                    best = Some((rho, cand, trial_lambda));
                }
            }
            let (_, cand, new_lambda) = best.expect("grid is nonempty");
            omega[j] = cand;
            lambda = new_lambda;
        }
    }
    let gamma = assemble(&omega, &lambda)?;
    Ok((omega, gamma))
}

/// Self-coupling coefficients of a freeway, from the equivalent network.
pub fn freeway_lambda_coefficients(
    spec: &FreewaySpec,
    eq: &Equilibrium,
    region: &StateBox,
    omega: &[f64],
    grid_n: usize,
) -> Result<Vec<f64>, GammaError> {
    lambda_coefficients(&spec.to_network(), eq, region, omega, grid_n)
}

/// All freeway coefficients for a given box and `omega`.
pub fn freeway_gamma_params(
    spec: &FreewaySpec,
    eq: &Equilibrium,
    region: &StateBox,
    omega: &[f64],
    grid_n: usize,
) -> Result<GammaParams, GammaError> {
    gamma_params(&spec.to_network(), eq, region, omega, grid_n)
}

/// Tridiagonal freeway comparison matrix: diagonal `lambda`, superdiagonal
/// supply coupling, subdiagonal `mu` of the upstream cell.
pub fn build_gamma_freeway(spec: &FreewaySpec, eq: &Equilibrium, params: GammaParams) -> Result<GammaMatrix, GammaError> {
    let n = spec.n();
    check_len("box", n, params.region.dim())?;
    for (field, v) in [("omega", &params.omega), ("lambda", &params.lambda), ("mu", &params.mu), ("f_max", &params.f_max)] {
        check_len(field, n, v.len())?;
    }
    let a = crate::model::System::capacities(spec);
    for i in 0..n - 1 {
        if params.f_max[i] > a[i + 1] + ZERO_TOL {
            return Err(GammaError::SupplyHypothesisViolation(i));
        }
    }
    let c = params.region.hi();
    let mut entries = alloc::vec![0.0; n * n];
    for i in 0..n {
        entries[i * n + i] = params.lambda[i];
        if i + 1 < n {
            entries[i * n + i + 1] = ratio((c[i + 1] - params.omega[i + 1]).max(0.0), c[i + 1] - eq.x_star[i + 1]);
        }
        if i > 0 {
            entries[i * n + i - 1] = params.mu[i - 1];
        }
    }
    Ok(GammaMatrix { n, entries, params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{DemandRef, PiecewiseLinearDemand};
    use crate::model::{validate_network, NetworkSpec, System};
    use alloc::sync::Arc;
    use alloc::vec;

    fn pl(a: f64, r: f64, delta: f64, q: f64) -> DemandRef {
        Arc::new(PiecewiseLinearDemand::new(a, r, delta, q).unwrap())
    }

    fn isolated(n: usize, v: f64) -> ValidatedNetwork {
        validate_network(NetworkSpec {
            capacities: vec![10.0; n],
            routing: vec![0.0; n * n],
            exit_rates: vec![1.0; n],
            inflows: vec![v; n],
            demands: (0..n).map(|_| pl(10.0, 0.3, 5.0, 0.1)).collect(),
            disturbance: DisturbanceBox::empty(),
        })
        .unwrap()
    }

    #[test]
    fn zero_inflow_free_flow_lambda() {
        // Both quotients reduce to (1 - r) s / s on the free-flow branch.
        let net = isolated(2, 0.0);
        let eq = net.equilibrium().unwrap();
        let region = StateBox::new(vec![0.0; 2], vec![1.0; 2]).unwrap();
        let lambda = lambda_coefficients(&net, &eq, &region, &eq.x_star, 400).unwrap();
        for l in lambda {
            assert!((l - 0.7).abs() < 1e-12, "{l}");
        }
    }

    #[test]
    fn no_routing_gives_diagonal_gamma() {
        let net = isolated(3, 1.0);
        let eq = net.equilibrium().unwrap();
        let region = StateBox::full(&net.spec().capacities);
        let params = gamma_params(&net, &eq, &region, &eq.x_star, 200).unwrap();
        let g = build_gamma_general(&net, &eq, params).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(g.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn omega_is_irrelevant_without_routing() {
        let net = isolated(3, 1.0);
        let eq = net.equilibrium().unwrap();
        let region = StateBox::full(&net.spec().capacities);
        let (_, g) = optimize_omega(&net, &eq, &region, 100, 1.0).unwrap();
        let max_lambda = g.params.lambda.iter().cloned().fold(0.0, f64::max);
        assert!((g.rho(1e-12) - max_lambda).abs() < 1e-9);
    }

    #[test]
    fn omega_out_of_range_is_rejected() {
        let net = isolated(2, 1.0);
        let eq = net.equilibrium().unwrap();
        let region = StateBox::full(&net.spec().capacities);
        let err = lambda_coefficients(&net, &eq, &region, &[0.0, 5.0], 10).unwrap_err();
        assert_eq!(err, GammaError::OmegaOutOfRange(0));
    }

    #[test]
    fn degenerate_interval_is_rejected() {
        let net = isolated(1, 0.0);
        let eq = net.equilibrium().unwrap();
        let region = StateBox::new(vec![0.0], vec![0.0]).unwrap();
        assert_eq!(
            lambda_coefficients(&net, &eq, &region, &eq.x_star, 10).unwrap_err(),
            GammaError::DegenerateInterval(0)
        );
    }

    #[test]
    fn zero_coefficients_give_zero_freeway_matrix() {
        let fw = FreewaySpec::new(vec![10.0; 3], (0..3).map(|_| pl(10.0, 0.5, 5.0, 0.1)).collect(), 1.0).unwrap();
        let eq = fw.equilibrium().unwrap();
        let region = StateBox::new(vec![0.0; 3], vec![4.0; 3]).unwrap();
        let params = GammaParams { region: region.clone(), omega: region.hi().to_vec(), lambda: vec![0.0; 3], mu: vec![0.0; 3], f_max: vec![2.0; 3] };
        let g = build_gamma_freeway(&fw, &eq, params).unwrap();
        assert!(g.entries().iter().all(|v| *v == 0.0));
        assert_eq!(g.rho(1e-10), 0.0);
    }

    #[test]
    fn supply_hypothesis_is_checked() {
        let fw = FreewaySpec::new(vec![10.0, 1.0, 10.0], (0..3).map(|i| pl(if i == 1 { 1.0 } else { 10.0 }, 0.5, 0.5, 0.01)).collect(), 0.1);
        let fw = fw.unwrap();
        let eq = fw.equilibrium().unwrap();
        let region = StateBox::full(&[10.0, 1.0, 10.0]);
        let params = GammaParams { region, omega: eq.x_star.clone(), lambda: vec![0.5; 3], mu: vec![0.5; 3], f_max: vec![2.5, 0.25, 0.25] };
        assert_eq!(build_gamma_freeway(&fw, &eq, params).unwrap_err(), GammaError::SupplyHypothesisViolation(0));
    }
}
