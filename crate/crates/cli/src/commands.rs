//! Command implementations. Each returns its exit status together with the
//! primary artifact and a human-readable summary; `main` decides where they
//! go.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::Rng;

use trafficstab_core::certify::{audit, certify_freeway, certify_linear_comparison, certify_network, AuditSubject, Certificate, Method};
use trafficstab_core::simulator::{estimate_decay, simulate, sweep_parameter, trial_rng, DisturbancePolicy, SimError, SWEEP_TOL};
use trafficstab_core::spectral::{best_epsilon_refined, row_sum_bound, spectral_radius, NonnegativeMatrix};
use trafficstab_core::trapping::{freeway_trap_algorithm, Pass, TrapError};
use trafficstab_core::DEFAULT_RHO_TOL;

use crate::config::{Config, InitialSetting, Model, PolicyName, ScalarOrVec};
use crate::report::{fmt_f64, fmt_vec, matrix_csv, parse_report, write_report};
use crate::table;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    Error = 1,
    Inconclusive = 2,
    NeverCertifies = 3,
    AlwaysCertifies = 4,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Report,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: Status,
    /// The file-worthy output: a report, CSV table or log.
    pub artifact: String,
    /// Short text for the terminal.
    pub summary: String,
}

fn verdict_status(c: &Certificate) -> Status {
    if c.is_certified() {
        Status::Success
    } else {
        Status::Inconclusive
    }
}

/// Runs the pipeline the config describes.
pub fn certificate(cfg: &Config, grid: Option<usize>) -> Result<Certificate> {
    Ok(match cfg.build()? {
        Model::Network(net) => certify_network(&net, cfg.region()?.as_ref(), &cfg.omega()?, &cfg.network_options(grid)),
        Model::Freeway(fw) => certify_freeway(&fw, &cfg.freeway_options(grid)?),
    })
}

fn certificate_summary(c: &Certificate) -> String {
    let mut s = format!(
        "{} rho={} bound={}({}) row_sum={}",
        c.verdict.as_str(),
        fmt_f64(c.rho),
        c.bound_used.as_str(),
        fmt_f64(c.bound_value),
        fmt_f64(c.row_sum)
    );
    if let Some(r) = &c.reason {
        let _ = write!(s, "\nreason: {r}");
    }
    s
}

pub fn certify(cfg: &Config, grid: Option<usize>, format: Format) -> Result<Outcome> {
    let c = certificate(cfg, grid)?;
    let artifact = match format {
        Format::Report => write_report(&c),
        Format::Csv => matrix_csv(c.n, &c.gamma),
    };
    Ok(Outcome { status: verdict_status(&c), artifact, summary: certificate_summary(&c) })
}

fn initial_state(setting: &InitialSetting, capacities: &[f64], x_star: &[f64], trial: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(match setting {
        InitialSetting::Named(name) => match name.as_str() {
            "capacity" => capacities.to_vec(),
            "empty" => vec![0.0; capacities.len()],
            "equilibrium" => x_star.to_vec(),
            "random" => {
                let mut rng = trial_rng(seed, trial as u64);
                capacities.iter().map(|a| rng.gen::<f64>() * a).collect()
            }
            other => bail!("simulate.initial: unknown initial state {other:?}; use capacity, empty, equilibrium, random or a list"),
        },
        InitialSetting::State(v) => match v {
            ScalarOrVec::Scalar(s) => vec![*s; capacities.len()],
            ScalarOrVec::Vec(v) => v.clone(),
        },
    })
}

/// Simulates `trials` trajectories. Trial `k` draws its disturbances from
/// seed `seed + k` and, for random initial states, its state from stream
/// `k` of `seed`.
pub fn run_simulation(cfg: &Config, seed: u64, format: Format) -> Result<Outcome> {
    let section = cfg.doc.simulate.clone().context("config has no [simulate] section")?;
    let model = cfg.build()?;
    let system = model.system();
    let eq = system.equilibrium()?;
    let dbox = system.disturbance_box().clone();
    let policy = match section.policy {
        Some(PolicyName::Constant) => {
            DisturbancePolicy::Constant(section.disturbance.clone().context("simulate.disturbance is required for the constant policy")?)
        }
        Some(PolicyName::Center) => DisturbancePolicy::Constant(dbox.center()),
        Some(PolicyName::Uniform) | None => DisturbancePolicy::Uniform,
    };
    let initial = section.initial.clone().unwrap_or_else(|| InitialSetting::Named("capacity".into()));
    let capacities = system.capacities().to_vec();
    let n = system.dim();
    let multi = section.trials > 1;
    let mut header: Vec<String> = Vec::new();
    if multi {
        header.push("trial".into());
    }
    header.push("t".into());
    header.extend((1..=n).map(|i| format!("x_{i}")));
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut summary = String::new();
    let _ = writeln!(summary, "x_star: {}", fmt_vec(&eq.x_star));
    for trial in 0..section.trials {
        let x0 = initial_state(&initial, &capacities, &eq.x_star, trial, seed)?;
        let traj = simulate(system, &x0, &policy, section.horizon, seed.wrapping_add(trial as u64))?;
        for (t, x) in traj.states.iter().enumerate() {
            let mut row = Vec::with_capacity(n + 2);
            if multi {
                row.push(trial.to_string());
            }
            row.push(t.to_string());
            row.extend(x.iter().map(|v| fmt_f64(*v)));
            rows.push(row);
        }
        let err = traj.last().iter().zip(&eq.x_star).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let decay = match estimate_decay(&traj, &eq.x_star) {
            Ok(d) => format!("rate={} overshoot={} r_squared={} points={}", fmt_f64(d.rate), fmt_f64(d.overshoot), fmt_f64(d.r_squared), d.points),
            Err(SimError::DegenerateTrajectory) => String::from("starts at equilibrium"),
            Err(SimError::InsufficientData) => String::from("insufficient data"),
            Err(e) => return Err(e.into()),
        };
        let _ = writeln!(summary, "trial {}: x0={} final={} final_error={} decay: {decay}", trial, fmt_vec(&x0), fmt_vec(traj.last()), fmt_f64(err));
    }
    let csv = table::write_csv(&header, &rows)?;
    let artifact = match format {
        Format::Csv => csv,
        Format::Report => summary.clone(),
    };
    Ok(Outcome { status: Status::Success, artifact, summary })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRequest {
    pub param: Option<String>,
    pub range: Option<(f64, f64)>,
    pub grid: Option<usize>,
    pub tol: Option<f64>,
}

/// Bisects the largest certifying value of one scalar parameter. The
/// artifact is the per-candidate log as CSV.
pub fn sweep(cfg: &Config, req: &SweepRequest) -> Result<Outcome> {
    let section = cfg.doc.sweep.clone();
    let param = req.param.clone().or_else(|| section.as_ref().map(|s| s.param.clone())).context("no sweep parameter; set [sweep] param or pass --param")?;
    let (lo, hi) = req.range.or_else(|| section.as_ref().map(|s| s.range)).context("no sweep range; set [sweep] range or pass --range")?;
    let tol = req.tol.or_else(|| section.as_ref().and_then(|s| s.tol)).unwrap_or(SWEEP_TOL);
    // Validates the path once before bisecting.
    cfg.clone().set_param(&param, lo)?;
    let mut failures = Vec::new();
    let result = sweep_parameter(lo, hi, tol, |p| {
        let mut trial = cfg.clone();
        trial.set_param(&param, p).expect("path validated above");
        match certificate(&trial, req.grid) {
            Ok(c) => c.is_certified(),
            Err(e) => {
                failures.push(format!("{param}={}: {e}", fmt_f64(p)));
                false
            }
        }
    });
    let mut notes = String::new();
    for f in &failures {
        let _ = writeln!(notes, "model error treated as not certified: {f}");
    }
    match result {
        Ok(r) => {
            let rows: Vec<Vec<String>> = r.evaluations.iter().map(|(p, ok)| vec![fmt_f64(*p), ok.to_string()]).collect();
            let artifact = table::write_csv(&["param".to_string(), "certified".to_string()], &rows)?;
            Ok(Outcome { status: Status::Success, artifact, summary: format!("{notes}{:.6}", r.threshold) })
        }
        Err(SimError::NeverCertifies) => {
            Ok(Outcome { status: Status::NeverCertifies, artifact: String::new(), summary: format!("{notes}{param} does not certify at {}", fmt_f64(lo)) })
        }
        Err(SimError::AlwaysCertifies) => {
            Ok(Outcome { status: Status::AlwaysCertifies, artifact: String::new(), summary: format!("{notes}{param} still certifies at {}", fmt_f64(hi)) })
        }
        Err(e) => Err(e.into()),
    }
}

/// Reads a square matrix from CSV.
pub fn read_matrix(path: &Path) -> Result<NonnegativeMatrix> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let rows = table::read_numeric_csv(&text).with_context(|| format!("in {}", path.display()))?;
    let n = rows.len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        bail!("matrix is not square: row {} has {} entries, expected {n}", i + 1, r.len());
    }
    Ok(NonnegativeMatrix::new(n, rows.concat())?)
}

pub fn rho(m: &NonnegativeMatrix) -> Result<Outcome> {
    let row_sum = row_sum_bound(m);
    let (eps, refined) = best_epsilon_refined(m);
    let r = spectral_radius(m, DEFAULT_RHO_TOL)?;
    let c = certify_linear_comparison(m);
    let mut s = String::new();
    let _ = writeln!(s, "n: {}", m.n());
    let _ = writeln!(s, "row_sum: {}", fmt_f64(row_sum));
    let _ = writeln!(s, "epsilon: {}", fmt_f64(eps));
    let _ = writeln!(s, "epsilon_refined: {}", fmt_f64(refined));
    let _ = writeln!(s, "rho: {}", fmt_f64(r.value));
    let _ = writeln!(s, "rho_lower: {}", fmt_f64(r.lower));
    let _ = writeln!(s, "rho_upper: {}", fmt_f64(r.upper));
    let _ = writeln!(s, "rho_fallback: {}", r.fallback);
    let _ = writeln!(s, "verdict: {}", c.verdict.as_str());
    Ok(Outcome { status: Status::Success, artifact: s.clone(), summary: s })
}

pub fn trap(cfg: &Config, grid: Option<usize>, format: Format) -> Result<Outcome> {
    let Model::Freeway(spec) = cfg.build()? else { bail!("the trap command needs a [freeway] model") };
    let grid_n = grid.unwrap_or(cfg.grid());
    let report = match freeway_trap_algorithm(&spec, grid_n, cfg.trap_options()) {
        Ok(r) => r,
        Err(e @ TrapError::NoFeasibleGridPoint { .. }) => {
            return Ok(Outcome { status: Status::Inconclusive, artifact: String::new(), summary: format!("no trapping box: {e}") })
        }
        Err(e) => return Err(e.into()),
    };
    let n = spec.n();
    let artifact = match format {
        Format::Csv => {
            let rows: Vec<Vec<String>> = (0..n)
                .map(|i| {
                    vec![(i + 1).to_string(), report.backward[i].map_or_else(|| String::from("none"), fmt_f64), fmt_f64(report.region.hi()[i])]
                })
                .collect();
            table::write_csv(&["cell".to_string(), "k".to_string(), "c".to_string()], &rows)?
        }
        Format::Report => {
            let mut s = String::new();
            let _ = writeln!(s, "grid_n: {grid_n}");
            let _ = writeln!(s, "box_lo: {}", fmt_vec(report.region.lo()));
            let _ = writeln!(s, "box_hi: {}", fmt_vec(report.region.hi()));
            let k: Vec<String> = report.backward.iter().map(|k| k.map_or_else(|| String::from("none"), fmt_f64)).collect();
            let _ = writeln!(s, "k: {}", k.join(","));
            let _ = writeln!(s, "transient_bound: {}", report.transient_bound.map_or_else(|| String::from("none"), |m| m.to_string()));
            for st in &report.steps {
                let name = match st.pass {
                    Pass::Backward => "k",
                    Pass::Forward => "c",
                };
                let _ = writeln!(
                    s,
                    "step {}: {name}_{} = {} (grid index {}, margin {}, supply {})",
                    st.step,
                    st.cell + 1,
                    fmt_f64(st.value),
                    st.grid_index,
                    fmt_f64(st.margin),
                    fmt_f64(st.supply)
                );
            }
            s
        }
    };
    Ok(Outcome { status: Status::Success, summary: format!("box_hi: {}", fmt_vec(report.region.hi())), artifact })
}

/// Re-verifies a serialized certificate. Matrix certificates need no
/// config.
pub fn audit_report(report_text: &str, cfg: Option<&Config>) -> Result<Outcome> {
    let cert = parse_report(report_text)?;
    let model = match (cert.method, cfg) {
        (Method::LinearComparison, _) => None,
        (_, Some(cfg)) => Some(cfg.build()?),
        (_, None) => bail!("a {} certificate needs --config to be audited", cert.method.as_str()),
    };
    let subject = match &model {
        None => AuditSubject::Matrix,
        Some(Model::Network(net)) => AuditSubject::Network(net),
        Some(Model::Freeway(fw)) => AuditSubject::Freeway(fw),
    };
    let outcome = audit(&cert, subject)?;
    let summary = format!(
        "consistent: {}\nverdict: {}\nrho: {}\nrho_delta: {}",
        outcome.consistent,
        outcome.verdict.as_str(),
        fmt_f64(outcome.rho),
        fmt_f64(outcome.rho_delta)
    );
    let status = if outcome.consistent { Status::Success } else { Status::Inconclusive };
    Ok(Outcome { status, artifact: summary.clone() + "\n", summary })
}
