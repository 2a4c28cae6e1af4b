//! Plain-text certificate reports.
//!
//! One `key: value` line per field in a fixed order, repeated `note:` and
//! `trap_step:` lines, then `gamma:` followed by the matrix as CSV rows.
//! Vectors are comma-separated and absent values are written `none`.
//! Floats carry 17 significant digits, so a parsed report reproduces the
//! certificate bit for bit.

use std::fmt::Write as _;

use trafficstab_core::certify::{BoundUsed, Certificate, Method, Verdict};
use trafficstab_core::comparison::GammaParams;
use trafficstab_core::model::Equilibrium;
use trafficstab_core::trapping::{Pass, StateBox, TrapReport, TrapStep};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ReportError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("missing field {0}")]
    Missing(&'static str),
}

/// Formats a float with 17 significant digits, without exponent when the
/// magnitude allows.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        return String::from(if v.is_sign_negative() { "-0" } else { "0" });
    }
    if !v.is_finite() {
        return String::from(if v.is_nan() { "NaN" } else if v > 0.0 { "inf" } else { "-inf" });
    }
    let exp = v.abs().log10().floor() as i32;
    let s = if (-5..16).contains(&exp) {
        format!("{:.*}", (16 - exp).max(0) as usize, v)
    } else {
        format!("{v:.16e}")
    };
    trim_zeros(s)
}

fn trim_zeros(s: String) -> String {
    let (mantissa, exponent) = match s.find('e') {
        Some(i) => (s[..i].to_string(), s[i..].to_string()),
        None => (s, String::new()),
    };
    let mantissa = if mantissa.contains('.') {
        mantissa.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        mantissa
    };
    mantissa + &exponent
}

pub fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

fn fmt_opt_vec(v: &[Option<f64>]) -> String {
    v.iter().map(|x| x.map_or_else(|| String::from("none"), fmt_f64)).collect::<Vec<_>>().join(",")
}

fn pass_str(p: Pass) -> &'static str {
    match p {
        Pass::Backward => "backward",
        Pass::Forward => "forward",
    }
}

/// Serializes a certificate.
pub fn write_report(c: &Certificate) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k}: {v}");
    };
    kv("verdict", c.verdict.as_str().into());
    kv("method", c.method.as_str().into());
    kv("n", c.n.to_string());
    kv("rho", fmt_f64(c.rho));
    kv("rho_fallback", c.rho_fallback.to_string());
    kv("bound_used", c.bound_used.as_str().into());
    kv("bound_value", fmt_f64(c.bound_value));
    kv("row_sum", fmt_f64(c.row_sum));
    kv("epsilon", fmt_f64(c.epsilon));
    kv("epsilon_value", fmt_f64(c.epsilon_value));
    kv("grid_n", c.grid_n.to_string());
    let none = || String::from("none");
    kv("x_star", c.equilibrium.as_ref().map_or_else(none, |e| fmt_vec(&e.x_star)));
    kv("f_star", c.equilibrium.as_ref().map_or_else(none, |e| fmt_vec(&e.f_star)));
    let p = c.params.as_ref();
    kv("box_lo", p.map_or_else(none, |p| fmt_vec(p.region.lo())));
    kv("box_hi", p.map_or_else(none, |p| fmt_vec(p.region.hi())));
    kv("omega", p.map_or_else(none, |p| fmt_vec(&p.omega)));
    kv("lambda", p.map_or_else(none, |p| fmt_vec(&p.lambda)));
    kv("mu", p.map_or_else(none, |p| fmt_vec(&p.mu)));
    kv("f_max", p.map_or_else(none, |p| fmt_vec(&p.f_max)));
    kv("lipschitz", if c.lipschitz.is_empty() { none() } else { fmt_vec(&c.lipschitz) });
    kv("lambda_thresholds", c.lambda_thresholds.as_deref().map_or_else(none, fmt_vec));
    let t = c.trap.as_ref();
    kv("trap_hi", t.map_or_else(none, |t| fmt_vec(t.region.hi())));
    kv("trap_k", t.map_or_else(none, |t| fmt_opt_vec(&t.backward)));
    kv("trap_transient_bound", t.and_then(|t| t.transient_bound).map_or_else(none, |m| m.to_string()));
    if let Some(t) = t {
        for s in &t.steps {
            kv(
                "trap_step",
                format!(
                    "{},{},{},{},{},{},{}",
                    s.step,
                    s.cell + 1,
                    pass_str(s.pass),
                    fmt_f64(s.value),
                    s.grid_index,
                    fmt_f64(s.margin),
                    fmt_f64(s.supply)
                ),
            );
        }
    }
    kv("reason", c.reason.clone().unwrap_or_else(none));
    for note in &c.notes {
        kv("note", note.clone());
    }
    out.push_str("gamma:\n");
    if !c.gamma.is_empty() {
        out.push_str(&matrix_csv(c.n, &c.gamma));
    }
    out
}

/// Row-major matrix as CSV rows.
pub fn matrix_csv(n: usize, entries: &[f64]) -> String {
    let mut out = String::new();
    for row in entries.chunks(n.max(1)) {
        out.push_str(&fmt_vec(row));
        out.push('\n');
    }
    out
}

struct Fields {
    pairs: Vec<(usize, String, String)>,
}

impl Fields {
    fn get(&self, key: &'static str) -> Result<(usize, &str), ReportError> {
        self.pairs.iter().find(|(_, k, _)| k == key).map(|(l, _, v)| (*l, v.as_str())).ok_or(ReportError::Missing(key))
    }

    fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = (usize, &'a str)> + 'a {
        self.pairs.iter().filter(move |(_, k, _)| k == key).map(|(l, _, v)| (*l, v.as_str()))
    }
}

fn malformed(line: usize, message: impl Into<String>) -> ReportError {
    ReportError::Malformed { line, message: message.into() }
}

fn parse_f64(line: usize, s: &str) -> Result<f64, ReportError> {
    s.trim().parse().map_err(|_| malformed(line, format!("not a number: {s:?}")))
}

fn parse_vec(line: usize, s: &str) -> Result<Option<Vec<f64>>, ReportError> {
    if s == "none" {
        return Ok(None);
    }
    s.split(',').map(|x| parse_f64(line, x)).collect::<Result<Vec<_>, _>>().map(Some)
}

fn parse_opt_vec(line: usize, s: &str) -> Result<Option<Vec<Option<f64>>>, ReportError> {
    if s == "none" {
        return Ok(None);
    }
    s.split(',').map(|x| if x == "none" { Ok(None) } else { parse_f64(line, x).map(Some) }).collect::<Result<Vec<_>, _>>().map(Some)
}

fn parse_usize(line: usize, s: &str) -> Result<usize, ReportError> {
    s.parse().map_err(|_| malformed(line, format!("not an integer: {s:?}")))
}

fn parse_step(line: usize, s: &str) -> Result<TrapStep, ReportError> {
    let parts: Vec<&str> = s.split(',').collect();
    let [step, cell, pass, value, index, margin, supply] = parts.as_slice() else {
        return Err(malformed(line, "trap_step needs seven fields"));
    };
    let cell = parse_usize(line, cell)?;
    if cell == 0 {
        return Err(malformed(line, "cells are numbered from 1"));
    }
    Ok(TrapStep {
        step: parse_usize(line, step)?,
        cell: cell - 1,
        pass: match *pass {
            "backward" => Pass::Backward,
            "forward" => Pass::Forward,
            other => return Err(malformed(line, format!("unknown pass {other:?}"))),
        },
        value: parse_f64(line, value)?,
        grid_index: parse_usize(line, index)?,
        margin: parse_f64(line, margin)?,
        supply: parse_f64(line, supply)?,
    })
}

/// Parses a report produced by [`write_report`].
pub fn parse_report(text: &str) -> Result<Certificate, ReportError> {
    let mut pairs = Vec::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut gamma_rows = Vec::new();
    for (no, line) in lines.by_ref() {
        if line == "gamma:" {
            break;
        }
        let (k, v) = line.split_once(": ").ok_or_else(|| malformed(no, "expected `key: value`"))?;
        pairs.push((no, k.to_string(), v.to_string()));
    }
    for (no, line) in lines {
        if line.is_empty() {
            continue;
        }
        gamma_rows.push((no, parse_vec(no, line)?.unwrap_or_default()));
    }
    let f = Fields { pairs };
    let enum_field = |key: &'static str| -> Result<(usize, &str), ReportError> { f.get(key) };

    let (l, v) = enum_field("verdict")?;
    let verdict = Verdict::parse(v).ok_or_else(|| malformed(l, format!("unknown verdict {v:?}")))?;
    let (l, v) = enum_field("method")?;
    let method = Method::parse(v).ok_or_else(|| malformed(l, format!("unknown method {v:?}")))?;
    let (l, v) = enum_field("bound_used")?;
    let bound_used = BoundUsed::parse(v).ok_or_else(|| malformed(l, format!("unknown bound {v:?}")))?;
    let num = |key: &'static str| -> Result<f64, ReportError> {
        let (l, v) = f.get(key)?;
        parse_f64(l, v)
    };
    let vec = |key: &'static str| -> Result<Option<Vec<f64>>, ReportError> {
        let (l, v) = f.get(key)?;
        parse_vec(l, v)
    };
    let (l, v) = f.get("n")?;
    let n = parse_usize(l, v)?;
    let (l, v) = f.get("grid_n")?;
    let grid_n = parse_usize(l, v)?;
    let (l, v) = f.get("rho_fallback")?;
    let rho_fallback = v.parse().map_err(|_| malformed(l, "expected true or false"))?;

    let equilibrium = match (vec("x_star")?, vec("f_star")?) {
        (Some(x_star), Some(f_star)) => Some(Equilibrium { x_star, f_star }),
        _ => None,
    };
    let params = match (vec("box_lo")?, vec("box_hi")?, vec("omega")?, vec("lambda")?, vec("mu")?, vec("f_max")?) {
        (Some(lo), Some(hi), Some(omega), Some(lambda), Some(mu), Some(f_max)) => {
            let (l, _) = f.get("box_lo")?;
            let region = StateBox::new(lo, hi).map_err(|e| malformed(l, e.to_string()))?;
            Some(GammaParams { region, omega, lambda, mu, f_max })
        }
        _ => None,
    };
    let trap = match vec("trap_hi")? {
        None => None,
        Some(hi) => {
            let (l, v) = f.get("trap_k")?;
            let backward = parse_opt_vec(l, v)?.unwrap_or_default();
            let (l, v) = f.get("trap_transient_bound")?;
            let transient_bound = if v == "none" { None } else { Some(v.parse().map_err(|_| malformed(l, "not an integer"))?) };
            let steps = f.all("trap_step").map(|(l, v)| parse_step(l, v)).collect::<Result<Vec<_>, _>>()?;
            let region = StateBox::new(vec![0.0; hi.len()], hi).map_err(|e| malformed(l, e.to_string()))?;
            Some(TrapReport { region, transient_bound, backward, steps })
        }
    };
    let mut gamma = Vec::with_capacity(n * n);
    for (no, row) in &gamma_rows {
        if row.len() != n {
            return Err(malformed(*no, format!("gamma row has {} entries, expected {n}", row.len())));
        }
        gamma.extend_from_slice(row);
    }
    if !gamma_rows.is_empty() && gamma_rows.len() != n {
        return Err(malformed(gamma_rows[0].0, format!("gamma has {} rows, expected {n}", gamma_rows.len())));
    }
    let (_, reason) = f.get("reason")?;
    Ok(Certificate {
        verdict,
        method,
        rho: num("rho")?,
        rho_fallback,
        bound_used,
        bound_value: num("bound_value")?,
        row_sum: num("row_sum")?,
        epsilon: num("epsilon")?,
        epsilon_value: num("epsilon_value")?,
        grid_n,
        n,
        gamma,
        params,
        equilibrium,
        lipschitz: vec("lipschitz")?.unwrap_or_default(),
        lambda_thresholds: vec("lambda_thresholds")?,
        trap,
        reason: (reason != "none").then(|| reason.to_string()),
        notes: f.all("note").map(|(_, v)| v.to_string()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use trafficstab_core::certify::certify_linear_comparison;
    use trafficstab_core::spectral::NonnegativeMatrix;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2.5e-9, 123456.789, 9.285_714_285_714_286, 1e300, -0.75, f64::INFINITY] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v, "{}", fmt_f64(v));
        }
        assert_eq!(fmt_f64(0.5), "0.5");
        assert_eq!(fmt_f64(10.0), "10");
        assert_eq!(fmt_f64(0.0), "0");
    }

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(1.0 / 3.0), "0.33333333333333331");
        assert_eq!(fmt_f64(2.0 / 3.0 * 100.0), "66.666666666666657");
    }

    #[test]
    fn matrix_certificate_round_trips() {
        let m = NonnegativeMatrix::tridiagonal(3, 0.5, 0.2).unwrap();
        let c = certify_linear_comparison(&m);
        let text = write_report(&c);
        assert_eq!(parse_report(&text).unwrap(), c);
        assert!(text.ends_with("gamma:\n0.5,0.20000000000000001,0\n0.20000000000000001,0.5,0.20000000000000001\n0,0.20000000000000001,0.5\n"), "{text}");
    }

    #[test]
    fn malformed_line_is_located() {
        let err = parse_report("verdict: GES_CERTIFIED\nnonsense\n").unwrap_err();
        assert_eq!(err, ReportError::Malformed { line: 2, message: "expected `key: value`".into() });
    }
}
