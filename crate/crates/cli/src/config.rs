//! TOML configuration documents.
//!
//! Component indices are one-based in the file and zero-based everywhere
//! else. Every error carries the dotted path of the offending value and its
//! line when the parser knows it.

use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use toml::Spanned;

use trafficstab_core::certify::{FreewayOptions, NetworkOptions, OmegaChoice};
use trafficstab_core::demand::{DemandRef, DisturbanceMode, PiecewiseLinearDemand};
use trafficstab_core::disturbance::DisturbanceBox;
use trafficstab_core::model::{validate_network, FreewaySpec, NetworkSpec, ValidatedNetwork};
use trafficstab_core::trapping::{GridRule, PositivityTest, StateBox, TrapOptions};
use trafficstab_core::DEFAULT_GRID;

#[derive(Debug, thiserror::Error)]
#[error("{}: {message}", location(.path, .line))]
pub struct ConfigError {
    /// Dotted path of the offending value, empty for the whole document.
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

fn location(path: &str, line: &Option<usize>) -> String {
    match (path.is_empty(), line) {
        (true, None) => String::from("config"),
        (true, Some(l)) => format!("line {l}"),
        (false, None) => path.to_string(),
        (false, Some(l)) => format!("{path} (line {l})"),
    }
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), line: None, message: message.into() }
    }

    fn at(mut self, line: Option<usize>) -> Self {
        self.line = line;
        self
    }
}

/// A number or a list; a scalar is broadcast to every component.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrVec {
    Scalar(f64),
    Vec(Vec<f64>),
}

impl ScalarOrVec {
    fn expand(&self, n: usize, path: &str) -> Result<Vec<f64>, ConfigError> {
        match self {
            Self::Scalar(v) => Ok(vec![*v; n]),
            Self::Vec(v) if v.len() == n => Ok(v.clone()),
            Self::Vec(v) => Err(ConfigError::new(path, format!("expected {n} values, found {}", v.len()))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub n: usize,
    pub capacities: ScalarOrVec,
    pub inflows: ScalarOrVec,
    /// Derived as one minus the routing row sum when omitted.
    pub exit_rates: Option<ScalarOrVec>,
    /// `[from, to, rate]` triples with one-based component indices.
    #[serde(default)]
    pub routing: Vec<Spanned<(usize, usize, f64)>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreewaySection {
    pub n: usize,
    pub capacities: ScalarOrVec,
    pub inflow: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    None,
    FreeFlowSlope,
    CongestionSlope,
}

/// Piecewise-linear demand parameters; unset fields inherit the defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DemandFields {
    pub r: Option<f64>,
    pub delta: Option<f64>,
    pub q: Option<f64>,
    pub mode: Option<ModeName>,
    /// One-based disturbance coordinate driving the perturbed slope.
    pub coord: Option<usize>,
}

impl DemandFields {
    fn overlay(self, over: DemandFields) -> Self {
        Self {
            r: over.r.or(self.r),
            delta: over.delta.or(self.delta),
            q: over.q.or(self.q),
            mode: over.mode.or(self.mode),
            coord: over.coord.or(self.coord),
        }
    }
}

fn scalar_slot<'a>(r: &'a mut Option<f64>, delta: &'a mut Option<f64>, q: &'a mut Option<f64>, name: &str) -> Option<&'a mut Option<f64>> {
    match name {
        "r" => Some(r),
        "delta" => Some(delta),
        "q" => Some(q),
        _ => None,
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDemand {
    pub index: usize,
    pub r: Option<f64>,
    pub delta: Option<f64>,
    pub q: Option<f64>,
    pub mode: Option<ModeName>,
    pub coord: Option<usize>,
}

impl ComponentDemand {
    pub fn fields(&self) -> DemandFields {
        DemandFields { r: self.r, delta: self.delta, q: self.q, mode: self.mode, coord: self.coord }
    }

    fn slot(&mut self, name: &str) -> Option<&mut Option<f64>> {
        scalar_slot(&mut self.r, &mut self.delta, &mut self.q, name)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandsSection {
    pub r: Option<f64>,
    pub delta: Option<f64>,
    pub q: Option<f64>,
    pub mode: Option<ModeName>,
    pub coord: Option<usize>,
    /// Per-component overrides.
    #[serde(default)]
    pub component: Vec<Spanned<ComponentDemand>>,
}

impl DemandsSection {
    pub fn defaults(&self) -> DemandFields {
        DemandFields { r: self.r, delta: self.delta, q: self.q, mode: self.mode, coord: self.coord }
    }

    fn slot(&mut self, name: &str) -> Option<&mut Option<f64>> {
        scalar_slot(&mut self.r, &mut self.delta, &mut self.q, name)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSection {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OmegaSetting {
    Mode(String),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSection {
    pub lo: ScalarOrVec,
    pub hi: ScalarOrVec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositivityName {
    Strict,
    Nonnegative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridRuleName {
    Exact,
    Accumulated,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySection {
    pub grid: Option<usize>,
    pub omega: Option<OmegaSetting>,
    #[serde(rename = "box")]
    pub region: Option<BoxSection>,
    pub mu_inflation: Option<f64>,
    pub lambda_thresholds: Option<ScalarOrVec>,
    pub positivity: Option<PositivityName>,
    pub grid_rule: Option<GridRuleName>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum InitialSetting {
    Named(String),
    State(ScalarOrVec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    Uniform,
    Constant,
    Center,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub horizon: usize,
    #[serde(default = "one")]
    pub trials: usize,
    pub initial: Option<InitialSetting>,
    pub policy: Option<PolicyName>,
    /// Disturbance for the constant policy.
    pub disturbance: Option<Vec<f64>>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param: String,
    pub range: (f64, f64),
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub network: Option<Spanned<NetworkSection>>,
    pub freeway: Option<Spanned<FreewaySection>>,
    #[serde(default)]
    pub demands: DemandsSection,
    pub disturbance: Option<Spanned<DisturbanceSection>>,
    #[serde(default)]
    pub certify: CertifySection,
    pub simulate: Option<SimulateSection>,
    pub sweep: Option<SweepSection>,
}

/// The model a document describes.
#[derive(Debug, Clone)]
pub enum Model {
    Network(ValidatedNetwork),
    Freeway(FreewaySpec),
}

impl Model {
    pub fn system(&self) -> &dyn trafficstab_core::model::System {
        match self {
            Self::Network(n) => n,
            Self::Freeway(f) => f,
        }
    }
}

/// A parsed document together with its source, for line lookups.
#[derive(Debug, Clone)]
pub struct Config {
    pub doc: ConfigDocument,
    source: String,
}

fn line_of(source: &str, span: Range<usize>) -> usize {
    source[..span.start.min(source.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

impl Config {
    pub fn parse(source: &str) -> Result<Self, ConfigError> {
        let doc: ConfigDocument = toml::from_str(source).map_err(|e| {
            let line = e.span().map(|s| line_of(source, s));
            ConfigError::new("", e.message().to_string()).at(line)
        })?;
        let cfg = Self { doc, source: source.to_string() };
        match (&cfg.doc.network, &cfg.doc.freeway) {
            (Some(_), Some(_)) => Err(ConfigError::new("", "exactly one of [network] and [freeway] may be present")),
            (None, None) => Err(ConfigError::new("", "one of [network] or [freeway] is required")),
            _ => Ok(cfg),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&source)
    }

    fn line(&self, span: Range<usize>) -> Option<usize> {
        Some(line_of(&self.source, span))
    }

    pub fn n(&self) -> usize {
        match (&self.doc.network, &self.doc.freeway) {
            (Some(net), _) => net.get_ref().n,
            (_, Some(fw)) => fw.get_ref().n,
            _ => unreachable!("checked at parse time"),
        }
    }

    pub fn is_freeway(&self) -> bool {
        self.doc.freeway.is_some()
    }

    pub fn capacities(&self) -> Result<Vec<f64>, ConfigError> {
        let n = self.n();
        match (&self.doc.network, &self.doc.freeway) {
            (Some(net), _) => net.get_ref().capacities.expand(n, "network.capacities").map_err(|e| e.at(self.line(net.span()))),
            (_, Some(fw)) => fw.get_ref().capacities.expand(n, "freeway.capacities").map_err(|e| e.at(self.line(fw.span()))),
            _ => unreachable!("checked at parse time"),
        }
    }

    fn disturbance(&self) -> Result<DisturbanceBox, ConfigError> {
        match &self.doc.disturbance {
            None => Ok(DisturbanceBox::empty()),
            Some(d) => {
                let s = d.get_ref();
                DisturbanceBox::new(s.lo.clone(), s.hi.clone())
                    .map_err(|e| ConfigError::new("disturbance", e.to_string()).at(self.line(d.span())))
            }
        }
    }

    fn demands(&self, capacities: &[f64], dim: usize) -> Result<Vec<DemandRef>, ConfigError> {
        let n = capacities.len();
        let mut fields = vec![self.doc.demands.defaults(); n];
        for entry in &self.doc.demands.component {
            let c = entry.get_ref();
            if c.index == 0 || c.index > n {
                return Err(ConfigError::new("demands.component.index", format!("index {} is outside 1..={n}", c.index))
                    .at(self.line(entry.span())));
            }
            fields[c.index - 1] = fields[c.index - 1].overlay(c.fields());
        }
        fields
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let path = format!("demands[{}]", i + 1);
                let need = |v: Option<f64>, name: &str| v.ok_or_else(|| ConfigError::new(format!("{path}.{name}"), "missing value"));
                let mode = match (f.mode.unwrap_or(ModeName::None), f.coord) {
                    (ModeName::None, _) => DisturbanceMode::Unaffected,
                    (_, None) => return Err(ConfigError::new(format!("{path}.coord"), "a disturbed slope needs a coordinate")),
                    (_, Some(c)) if c == 0 || c > dim => {
                        return Err(ConfigError::new(format!("{path}.coord"), format!("coordinate {c} is outside 1..={dim}")))
                    }
                    (ModeName::FreeFlowSlope, Some(c)) => DisturbanceMode::FreeFlowSlope { coord: c - 1 },
                    (ModeName::CongestionSlope, Some(c)) => DisturbanceMode::CongestionSlope { coord: c - 1 },
                };
                let d = PiecewiseLinearDemand::new(capacities[i], need(f.r, "r")?, need(f.delta, "delta")?, need(f.q, "q")?)
                    .map_err(|e| ConfigError::new(path.clone(), e.to_string()))?
                    .with_mode(mode);
                Ok(Arc::new(d) as DemandRef)
            })
            .collect()
    }

    pub fn build(&self) -> Result<Model, ConfigError> {
        let n = self.n();
        let capacities = self.capacities()?;
        let disturbance = self.disturbance()?;
        let demands = self.demands(&capacities, disturbance.dim())?;
        if let Some(fw) = &self.doc.freeway {
            if self.doc.disturbance.is_some() {
                return Err(ConfigError::new("disturbance", "freeway models are disturbance-free"));
            }
            let spec = FreewaySpec::new(capacities, demands, fw.get_ref().inflow)
                .map_err(|e| ConfigError::new("freeway", e.to_string()).at(self.line(fw.span())))?;
            return Ok(Model::Freeway(spec));
        }
        let net = self.doc.network.as_ref().expect("checked at parse time");
        let section = net.get_ref();
        let mut routing = vec![0.0; n * n];
        for entry in &section.routing {
            let (from, to, rate) = *entry.get_ref();
            if from == 0 || from > n || to == 0 || to > n {
                return Err(ConfigError::new("network.routing", format!("entry ({from}, {to}) is outside 1..={n}"))
                    .at(self.line(entry.span())));
            }
            routing[(from - 1) * n + to - 1] += rate;
        }
        let exit_rates = match &section.exit_rates {
            Some(q) => q.expand(n, "network.exit_rates")?,
            None => NetworkSpec::complementary_exit_rates(n, &routing),
        };
        let spec = NetworkSpec {
            capacities,
            routing,
            exit_rates,
            inflows: section.inflows.expand(n, "network.inflows")?,
            demands,
            disturbance,
        };
        validate_network(spec)
            .map(Model::Network)
            .map_err(|e| ConfigError::new("network", e.to_string()).at(self.line(net.span())))
    }

    pub fn grid(&self) -> usize {
        self.doc.certify.grid.unwrap_or(DEFAULT_GRID)
    }

    pub fn region(&self) -> Result<Option<StateBox>, ConfigError> {
        let Some(b) = &self.doc.certify.region else { return Ok(None) };
        let n = self.n();
        StateBox::new(b.lo.expand(n, "certify.box.lo")?, b.hi.expand(n, "certify.box.hi")?)
            .map(Some)
            .map_err(|e| ConfigError::new("certify.box", e.to_string()))
    }

    pub fn omega(&self) -> Result<OmegaChoice, ConfigError> {
        match &self.doc.certify.omega {
            None => Ok(OmegaChoice::Auto),
            Some(OmegaSetting::Mode(m)) if m == "auto" => Ok(OmegaChoice::Auto),
            Some(OmegaSetting::Mode(m)) => Err(ConfigError::new("certify.omega", format!("unknown mode {m:?}; use \"auto\" or a list"))),
            Some(OmegaSetting::Values(v)) => Ok(OmegaChoice::Fixed(ScalarOrVec::Vec(v.clone()).expand(self.n(), "certify.omega")?)),
        }
    }

    pub fn network_options(&self, grid: Option<usize>) -> NetworkOptions {
        NetworkOptions { grid_n: grid.unwrap_or(self.grid()), mu_inflation: self.doc.certify.mu_inflation.unwrap_or(1.0) }
    }

    pub fn trap_options(&self) -> TrapOptions {
        TrapOptions {
            positivity: match self.doc.certify.positivity {
                Some(PositivityName::Strict) => PositivityTest::Strict,
                Some(PositivityName::Nonnegative) | None => PositivityTest::NonNegative,
            },
            grid: match self.doc.certify.grid_rule {
                Some(GridRuleName::Accumulated) => GridRule::Accumulated,
                Some(GridRuleName::Exact) | None => GridRule::Exact,
            },
        }
    }

    pub fn freeway_options(&self, grid: Option<usize>) -> Result<FreewayOptions, ConfigError> {
        let thresholds = match &self.doc.certify.lambda_thresholds {
            None => None,
            Some(t) => Some(t.expand(self.n(), "certify.lambda_thresholds")?),
        };
        Ok(FreewayOptions { grid_n: grid.unwrap_or(self.grid()), trap: self.trap_options(), lambda_thresholds: thresholds })
    }

    /// Sets one scalar parameter.
    ///
    /// Paths: `inflow`, `demands.<field>` for every component, and
    /// `demands.<i>.<field>` for component `i`, where field is `r`, `delta`
    /// or `q`.
    pub fn set_param(&mut self, path: &str, value: f64) -> Result<(), ConfigError> {
        let bad = || ConfigError::new(path, "unknown parameter; use inflow, demands.<field> or demands.<i>.<field>");
        match path.split('.').collect::<Vec<_>>().as_slice() {
            ["inflow"] => {
                if let Some(fw) = &mut self.doc.freeway {
                    fw.get_mut().inflow = value;
                } else if let Some(net) = &mut self.doc.network {
                    net.get_mut().inflows = ScalarOrVec::Scalar(value);
                }
            }
            ["demands", name] => {
                *self.doc.demands.slot(name).ok_or_else(bad)? = Some(value);
                // Overrides of the same field would shadow the new default.
                for c in &mut self.doc.demands.component {
                    *c.get_mut().slot(name).ok_or_else(bad)? = None;
                }
            }
            ["demands", index, name] => {
                let i: usize = index.parse().map_err(|_| bad())?;
                if i == 0 || i > self.n() {
                    return Err(ConfigError::new(path, format!("index {i} is outside 1..={}", self.n())));
                }
                let list = &mut self.doc.demands.component;
                let pos = match list.iter().position(|c| c.get_ref().index == i) {
                    Some(pos) => pos,
                    None => {
                        let blank = ComponentDemand { index: i, r: None, delta: None, q: None, mode: None, coord: None };
                        list.push(Spanned::new(0..0, blank));
                        list.len() - 1
                    }
                };
                *list[pos].get_mut().slot(name).ok_or_else(bad)? = Some(value);
            }
            _ => return Err(bad()),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RING: &str = r#"
[network]
n = 3
capacities = 10.0
inflows = [0.4, 0.4, 0.4]
routing = [[1, 2, 0.2], [2, 3, 0.2], [3, 1, 0.2]]

[demands]
r = 0.5
delta = 5.0
q = 0.1
"#;

    #[test]
    fn derives_exit_rates() {
        let cfg = Config::parse(RING).unwrap();
        let Model::Network(net) = cfg.build().unwrap() else { panic!("expected a network") };
        assert!((net.exit_rate(0) - 0.8).abs() < 1e-15);
        assert_eq!(net.p(2, 0), 0.2);
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = Config::parse("[network]\nn = 3\ncapacities = [1,\n").unwrap_err();
        assert!(err.line.is_some());
    }

    #[test]
    fn routing_index_error_reports_line() {
        let src = RING.replace("[3, 1, 0.2]", "[3, 4, 0.2]");
        let err = Config::parse(&src).unwrap().build().unwrap_err();
        assert_eq!(err.path, "network.routing");
        assert_eq!(err.line, Some(6));
    }

    #[test]
    fn rejects_both_models() {
        let src = format!("{RING}\n[freeway]\nn = 3\ncapacities = 10.0\ninflow = 1.0\n");
        assert!(Config::parse(&src).is_err());
    }

    #[test]
    fn unknown_field_is_rejected() {
        let err = Config::parse(&format!("{RING}\n[certify]\ngird = 5\n")).unwrap_err();
        assert!(err.message.contains("gird"), "{err}");
    }

    #[test]
    fn component_override_and_sweep_param() {
        let src = format!("{RING}\n[[demands.component]]\nindex = 3\nq = 0.05\n");
        let mut cfg = Config::parse(&src).unwrap();
        cfg.set_param("demands.3.q", 0.02).unwrap();
        cfg.set_param("demands.2.r", 0.4).unwrap();
        let Model::Network(net) = cfg.build().unwrap() else { panic!("expected a network") };
        assert!((net.demands()[2].eval(&[], 10.0) - (2.5 - 0.02 * 5.0)).abs() < 1e-12);
        assert!((net.demands()[1].eval(&[], 1.0) - 0.4).abs() < 1e-12);
        assert!(cfg.set_param("demands.9.q", 0.1).is_err());
        assert!(cfg.set_param("network.n", 1.0).is_err());
    }
}
