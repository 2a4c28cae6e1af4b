//! End-to-end certificates.
//!
//! A certificate is either `GES_CERTIFIED` or `INCONCLUSIVE`; the conditions
//! checked are sufficient only, so nothing is ever reported unstable. Every
//! certificate carries the coefficients needed to rebuild its matrix.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::comparison::{self, GammaError, GammaMatrix, GammaParams};
use crate::demand::lipschitz_constant;
use crate::model::{Equilibrium, FreewaySpec, ModelError, System, ValidatedNetwork};
use crate::spectral::{self, NonnegativeMatrix};
use crate::trapping::{freeway_trap_algorithm, StateBox, TrapOptions, TrapReport};
use crate::{DEFAULT_GRID, DEFAULT_RHO_TOL};

/// Slack on user-supplied self-coupling thresholds.
pub const THRESHOLD_SLACK: f64 = 1e-9;
/// Agreement required between a certificate and its re-verification.
pub const AUDIT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Certified,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Certified => "GES_CERTIFIED",
            Self::Inconclusive => "INCONCLUSIVE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "GES_CERTIFIED" => Some(Self::Certified),
            "INCONCLUSIVE" => Some(Self::Inconclusive),
            _ => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// General network with a user-supplied trapping box.
    GeneralNetwork,
    /// Freeway with a constructed trapping box.
    FreewayTrapping,
    /// A comparison matrix given directly.
    LinearComparison,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::GeneralNetwork => "general_network",
            Self::FreewayTrapping => "freeway_trapping",
            Self::LinearComparison => "linear_comparison",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "general_network" => Some(Self::GeneralNetwork),
            "freeway_trapping" => Some(Self::FreewayTrapping),
            "linear_comparison" => Some(Self::LinearComparison),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundUsed {
    RowSum,
    EpsilonRefined,
    PowerIteration,
}

impl BoundUsed {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::RowSum => "row_sum",
            Self::EpsilonRefined => "epsilon_refined",
            Self::PowerIteration => "power_iteration",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "row_sum" => Some(Self::RowSum),
            "epsilon_refined" => Some(Self::EpsilonRefined),
            "power_iteration" => Some(Self::PowerIteration),
            _ => None,
        }
    }
}

/// How `omega` is chosen for a general network.
#[derive(Debug, Clone, PartialEq)]
pub enum OmegaChoice {
    Auto,
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkOptions {
    pub grid_n: usize,
    /// Multiplier on the demand-deviation coefficients.
    pub mu_inflation: f64,
}

impl Default for NetworkOptions {
    fn default() -> Self {
        Self { grid_n: DEFAULT_GRID, mu_inflation: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreewayOptions {
    pub grid_n: usize,
    pub trap: TrapOptions,
    /// Required upper bounds on the self-coupling coefficients. Without
    /// them each coefficient must be below one.
    pub lambda_thresholds: Option<Vec<f64>>,
}

impl Default for FreewayOptions {
    fn default() -> Self {
        Self { grid_n: DEFAULT_GRID, trap: TrapOptions::default(), lambda_thresholds: None }
    }
}

/// Spectral evidence for one matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub verdict: Verdict,
    pub bound_used: BoundUsed,
    pub bound_value: f64,
    pub rho: f64,
    pub row_sum: f64,
    pub epsilon: f64,
    pub epsilon_value: f64,
    /// Set when `rho` is a fallback upper bound.
    pub rho_fallback: bool,
}

/// Tries the row-sum bound, then the refined bound, then power iteration.
pub fn decide(m: &NonnegativeMatrix) -> Decision {
    let row_sum = spectral::row_sum_bound(m);
    let (epsilon, epsilon_value) = spectral::best_epsilon_refined(m);
    let rho = spectral::spectral_radius(m, DEFAULT_RHO_TOL).expect("tolerance is positive");
    let (bound_used, bound_value) = if row_sum < 1.0 {
        (BoundUsed::RowSum, row_sum)
    } else if epsilon_value < 1.0 {
        (BoundUsed::EpsilonRefined, epsilon_value)
    } else {
        (BoundUsed::PowerIteration, rho.value)
    };
    Decision {
        verdict: if bound_value < 1.0 { Verdict::Certified } else { Verdict::Inconclusive },
        bound_used,
        bound_value,
        rho: rho.value,
        row_sum,
        epsilon,
        epsilon_value,
        rho_fallback: rho.fallback,
    }
}

/// Decision for a matrix with an unbounded entry.
fn unbounded() -> Decision {
    Decision {
        verdict: Verdict::Inconclusive,
        bound_used: BoundUsed::PowerIteration,
        bound_value: f64::INFINITY,
        rho: f64::INFINITY,
        row_sum: f64::INFINITY,
        epsilon: 1.0,
        epsilon_value: f64::INFINITY,
        rho_fallback: false,
    }
}

fn decide_gamma(g: &GammaMatrix) -> Decision {
    match g.to_nonnegative() {
        Ok(m) => decide(&m),
        Err(_) => unbounded(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub verdict: Verdict,
    pub method: Method,
    pub rho: f64,
    pub rho_fallback: bool,
    pub bound_used: BoundUsed,
    pub bound_value: f64,
    pub row_sum: f64,
    pub epsilon: f64,
    pub epsilon_value: f64,
    pub grid_n: usize,
    pub n: usize,
    /// Row-major comparison matrix, empty when none was built.
    pub gamma: Vec<f64>,
    pub params: Option<GammaParams>,
    pub equilibrium: Option<Equilibrium>,
    pub lipschitz: Vec<f64>,
    pub lambda_thresholds: Option<Vec<f64>>,
    pub trap: Option<TrapReport>,
    pub reason: Option<String>,
    pub notes: Vec<String>,
}

impl Certificate {
    fn empty(method: Method, n: usize, grid_n: usize) -> Self {
        Self {
            verdict: Verdict::Inconclusive,
            method,
            rho: f64::INFINITY,
            rho_fallback: false,
            bound_used: BoundUsed::PowerIteration,
            bound_value: f64::INFINITY,
            row_sum: f64::INFINITY,
            epsilon: 1.0,
            epsilon_value: f64::INFINITY,
            grid_n,
            n,
            gamma: Vec::new(),
            params: None,
            equilibrium: None,
            lipschitz: Vec::new(),
            lambda_thresholds: None,
            trap: None,
            reason: None,
            notes: Vec::new(),
        }
    }

    fn inconclusive(mut self, reason: String) -> Self {
        self.verdict = Verdict::Inconclusive;
        self.reason = Some(reason);
        self
    }

    fn record(&mut self, d: Decision) {
        self.verdict = d.verdict;
        self.rho = d.rho;
        self.rho_fallback = d.rho_fallback;
        self.bound_used = d.bound_used;
        self.bound_value = d.bound_value;
        self.row_sum = d.row_sum;
        self.epsilon = d.epsilon;
        self.epsilon_value = d.epsilon_value;
        if d.rho_fallback {
            self.notes.push(String::from("power iteration stalled; rho is a Gelfand upper bound"));
        }
        if d.verdict == Verdict::Inconclusive && self.reason.is_none() {
            self.reason = Some(format!("spectral radius {} is not below 1", d.rho));
        }
    }

    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }

    pub fn gamma_matrix(&self) -> Option<Result<NonnegativeMatrix, spectral::SpectralError>> {
        (!self.gamma.is_empty()).then(|| NonnegativeMatrix::new(self.n, self.gamma.clone()))
    }

    pub fn reverify(&self, subject: AuditSubject<'_>) -> Result<AuditOutcome, AuditError> {
        audit(self, subject)
    }
}

fn lipschitz_all<S: System + ?Sized>(system: &S, demands: &[crate::demand::DemandRef], grid_n: usize) -> Vec<f64> {
    demands.iter().map(|d| lipschitz_constant(d.as_ref(), system.disturbance_box(), grid_n)).collect()
}

/// Certifies the uncongested equilibrium of a general network on a trapping
/// box (the whole state space when `region` is `None`).
pub fn certify_network(net: &ValidatedNetwork, region: Option<&StateBox>, omega: &OmegaChoice, options: &NetworkOptions) -> Certificate {
    let n = net.n();
    let mut cert = Certificate::empty(Method::GeneralNetwork, n, options.grid_n);
    cert.lipschitz = lipschitz_all(net, net.demands(), options.grid_n);
    if let Some(i) = net.inflows().iter().position(|v| *v == 0.0) {
        cert.notes.push(format!("component {} has zero external inflow; positive inflow is relaxed", i + 1));
    }
    if !net.spec().disturbance.is_degenerate() {
        cert.notes.push(String::from(
            "universal statements over the disturbance box are checked at its corners and 64 interior samples",
        ));
    }
    let eq = match net.equilibrium() {
        Ok(eq) => eq,
        Err(e) => return cert.inconclusive(format!("equilibrium: {e}")),
    };
    cert.equilibrium = Some(eq.clone());
    let full = StateBox::full(&net.spec().capacities);
    let region = region.cloned().unwrap_or(full.clone());
    if region == full {
        cert.notes.push(String::from("box is the whole state space, which is forward invariant"));
    } else {
        cert.notes.push(String::from("box accepted as a trapping region without verification"));
    }
    let built = match omega {
        OmegaChoice::Auto => {
            cert.notes.push(String::from("omega chosen by coordinate descent on rho"));
            comparison::optimize_omega(net, &eq, &region, options.grid_n, options.mu_inflation).map(|(_, g)| g)
        }
        OmegaChoice::Fixed(w) => comparison::gamma_params(net, &eq, &region, w, options.grid_n).and_then(|mut p| {
            p.mu.iter_mut().for_each(|m| *m *= options.mu_inflation);
            comparison::build_gamma_general(net, &eq, p)
        }),
    };
    let gamma = match built {
        Ok(g) => g,
        Err(e) => return cert.inconclusive(format!("comparison matrix: {e}")),
    };
    if options.mu_inflation != 1.0 {
        cert.notes.push(format!("demand-deviation coefficients inflated by {}", options.mu_inflation));
    }
    finish(cert, gamma)
}

fn finish(mut cert: Certificate, gamma: GammaMatrix) -> Certificate {
    let decision = decide_gamma(&gamma);
    if !gamma.is_finite() {
        cert.reason = Some(String::from("a comparison coefficient is unbounded"));
    }
    cert.gamma = gamma.entries().to_vec();
    cert.params = Some(gamma.params.clone());
    cert.record(decision);
    cert
}

/// λ-threshold check; returns the first offending cell.
fn threshold_violation(lambda: &[f64], thresholds: Option<&[f64]>) -> Option<(usize, f64)> {
    match thresholds {
        Some(t) => (0..lambda.len()).find(|&i| !(lambda[i] <= t[i] + THRESHOLD_SLACK)).map(|i| (i, t[i])),
        None => (0..lambda.len()).find(|&i| !(lambda[i] < 1.0)).map(|i| (i, 1.0)),
    }
}

/// Certifies a freeway: builds a trapping box, bounds the self-coupling on
/// it and tests the tridiagonal comparison matrix.
pub fn certify_freeway(spec: &FreewaySpec, options: &FreewayOptions) -> Certificate {
    let n = spec.n();
    let mut cert = Certificate::empty(Method::FreewayTrapping, n, options.grid_n);
    cert.lipschitz = lipschitz_all(spec, spec.demands(), options.grid_n);
    cert.lambda_thresholds = options.lambda_thresholds.clone();
    if let Some(t) = &options.lambda_thresholds {
        if t.len() != n {
            return cert.inconclusive(format!("{} thresholds given for {n} cells", t.len()));
        }
    }
    let eq = match spec.equilibrium() {
        Ok(eq) => eq,
        Err(e) => return cert.inconclusive(format!("equilibrium: {e}")),
    };
    cert.equilibrium = Some(eq.clone());
    let report = match freeway_trap_algorithm(spec, options.grid_n, options.trap) {
        Ok(r) => r,
        Err(e) => return cert.inconclusive(format!("trapping box: {e}")),
    };
    if report.transient_bound.is_none() {
        cert.notes.push(String::from("a drain margin is zero; no transient bound"));
    }
    let region = report.region.clone();
    cert.trap = Some(report);
    let omega = region.hi().to_vec();
    let params = match comparison::freeway_gamma_params(spec, &eq, &region, &omega, options.grid_n) {
        Ok(p) => p,
        Err(e) => return cert.inconclusive(format!("coefficients: {e}")),
    };
    let violation = threshold_violation(&params.lambda, options.lambda_thresholds.as_deref());
    let gamma = match comparison::build_gamma_freeway(spec, &eq, params) {
        Ok(g) => g,
        Err(e) => return cert.inconclusive(format!("comparison matrix: {e}")),
    };
    if let Some((i, t)) = violation {
        cert.reason = Some(format!("self-coupling of cell {} is {} (limit {t})", i + 1, gamma.params.lambda[i]));
    }
    let mut cert = finish(cert, gamma);
    if violation.is_some() {
        cert.verdict = Verdict::Inconclusive;
    }
    cert
}

/// Certifies `xi(t+1) <= M xi(t)` directly from the matrix.
pub fn certify_linear_comparison(m: &NonnegativeMatrix) -> Certificate {
    let mut cert = Certificate::empty(Method::LinearComparison, m.n(), 0);
    cert.gamma = m.entries().to_vec();
    cert.record(decide(m));
    cert
}

/// What a certificate is re-verified against.
#[derive(Debug, Clone, Copy)]
pub enum AuditSubject<'a> {
    Network(&'a ValidatedNetwork),
    Freeway(&'a FreewaySpec),
    Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AuditError {
    MissingParams,
    MethodMismatch,
    Model(ModelError),
    Gamma(GammaError),
    Spectral(spectral::SpectralError),
}

impl fmt::Display for AuditError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MissingParams => write!(f, "certificate carries no coefficients"),
            Self::MethodMismatch => write!(f, "certificate method does not match the audit subject"),
            Self::Model(e) => write!(f, "{e}"),
            Self::Gamma(e) => write!(f, "{e}"),
            Self::Spectral(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for AuditError {}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditOutcome {
    pub rho: f64,
    pub verdict: Verdict,
    pub rho_delta: f64,
    /// Same verdict and `rho` within [`AUDIT_TOL`].
    pub consistent: bool,
}

/// Rebuilds the matrix from the recorded coefficients alone and repeats the
/// spectral decision.
pub fn audit(cert: &Certificate, subject: AuditSubject<'_>) -> Result<AuditOutcome, AuditError> {
    let decision = match (cert.method, subject) {
        (Method::LinearComparison, AuditSubject::Matrix) => {
            decide(&NonnegativeMatrix::new(cert.n, cert.gamma.clone()).map_err(AuditError::Spectral)?)
        }
        (Method::GeneralNetwork, AuditSubject::Network(net)) => {
            let params = cert.params.clone().ok_or(AuditError::MissingParams)?;
            let eq = net.equilibrium().map_err(AuditError::Model)?;
            decide_gamma(&comparison::build_gamma_general(net, &eq, params).map_err(AuditError::Gamma)?)
        }
        (Method::FreewayTrapping, AuditSubject::Freeway(fw)) => {
            let params = cert.params.clone().ok_or(AuditError::MissingParams)?;
            let eq = fw.equilibrium().map_err(AuditError::Model)?;
            let violation = threshold_violation(&params.lambda, cert.lambda_thresholds.as_deref());
            let mut d = decide_gamma(&comparison::build_gamma_freeway(fw, &eq, params).map_err(AuditError::Gamma)?);
            if violation.is_some() {
                d.verdict = Verdict::Inconclusive;
            }
            d
        }
        _ => return Err(AuditError::MethodMismatch),
    };
    let rho_delta = if decision.rho == cert.rho { 0.0 } else { crate::math::abs(decision.rho - cert.rho) };
    Ok(AuditOutcome {
        rho: decision.rho,
        verdict: decision.verdict,
        rho_delta,
        consistent: decision.verdict == cert.verdict && rho_delta <= AUDIT_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{DemandRef, PiecewiseLinearDemand};
    use crate::disturbance::DisturbanceBox;
    use crate::model::{validate_network, NetworkSpec};
    use alloc::sync::Arc;
    use alloc::vec;

    #[test]
    fn identity_is_inconclusive() {
        let c = certify_linear_comparison(&NonnegativeMatrix::identity(3));
        assert_eq!(c.verdict, Verdict::Inconclusive);
        assert!((c.rho - 1.0).abs() < 1e-10);
    }

    #[test]
    fn escalation_records_cheapest_bound() {
        let c = certify_linear_comparison(&NonnegativeMatrix::tridiagonal(4, 0.2, 0.1).unwrap());
        assert_eq!(c.bound_used, BoundUsed::RowSum);
        let m = NonnegativeMatrix::from_rows(&[vec![0.5, 0.6], vec![0.1, 0.3]]).unwrap();
        let c = certify_linear_comparison(&m);
        assert_eq!(c.verdict, Verdict::Certified);
        assert_eq!(c.bound_used, BoundUsed::EpsilonRefined);
    }

    #[test]
    fn decoupled_cells_certify() {
        let f: DemandRef = Arc::new(PiecewiseLinearDemand::new(10.0, 0.5, 9.0, 0.1).unwrap());
        let net = validate_network(NetworkSpec {
            capacities: vec![10.0; 3],
            routing: vec![0.0; 9],
            exit_rates: vec![1.0; 3],
            inflows: vec![0.5; 3],
            demands: vec![f.clone(), f.clone(), f],
            disturbance: DisturbanceBox::empty(),
        })
        .unwrap();
        let c = certify_network(&net, None, &OmegaChoice::Auto, &NetworkOptions { grid_n: 400, mu_inflation: 1.0 });
        assert_eq!(c.verdict, Verdict::Certified, "{:?}", c.reason);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(c.gamma[i * 3 + j], 0.0);
                }
            }
        }
        let audit = c.reverify(AuditSubject::Network(&net)).unwrap();
        assert!(audit.consistent);
        assert_eq!(c.reverify(AuditSubject::Matrix).unwrap_err(), AuditError::MethodMismatch);
    }
}
