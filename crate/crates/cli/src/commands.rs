//! Subcommand implementations. Each returns a JSON report plus any extra
//! files to write; printing and exit codes are left to the binary.

use serde::Serialize;
use serde_json::{json, Value};
use spraylab::catalog::{FACTOR_LABELS, SPRAY_LABELS};
use spraylab::completeness::{self, CompletionSettings};
use spraylab::diffops::{self, isotropy_decompose, riemann_curvature};
use spraylab::geodesics;
use spraylab::pathspace::{self, PathFamily, RoundtripSettings, FAMILY_LABELS};
use spraylab::projective;
use spraylab::sampling::seeded_states;
use spraylab::{catalog, ReparamStrategy, SprayField, TangentState};

use crate::config::{resolve_spray, RunConfig};
use crate::error::{exit, CliError};
use crate::suites;

/// Result of a command: the report, extra files and the exit code.
#[derive(Debug)]
pub struct Output {
    pub report: Value,
    /// Plain-text rendering for non-JSON mode.
    pub text: String,
    /// `(file name, contents)` pairs written to the output directory.
    pub files: Vec<(String, String)>,
    pub exit_code: u8,
}

impl Output {
    fn report(report: Value) -> Self {
        let text = render(&report);
        Output {
            report,
            text,
            files: Vec::new(),
            exit_code: exit::OK,
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

/// `key = value` lines for every leaf of a JSON value.
pub fn render(v: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut String) {
        match v {
            Value::Object(m) => {
                for (k, child) in m {
                    let p = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(&p, child, out);
                }
            }
            Value::Array(a) if a.iter().any(|c| c.is_object() || c.is_array()) => {
                for (i, child) in a.iter().enumerate() {
                    walk(&format!("{prefix}[{i}]"), child, out);
                }
            }
            other => out.push_str(&format!("{prefix} = {other}\n")),
        }
    }
    let mut out = String::new();
    walk("", v, &mut out);
    out
}

/// Listing groups in output order.
pub const LIST_GROUPS: [&str; 4] = ["sprays", "factors", "families", "strategies"];

pub fn list(filter: Option<&str>) -> Result<Output, CliError> {
    let strategies: Vec<&str> = ReparamStrategy::ALL.iter().map(|k| k.name()).collect();
    let groups: [(&str, Vec<&str>); 4] = [
        ("sprays", SPRAY_LABELS.to_vec()),
        ("factors", FACTOR_LABELS.to_vec()),
        ("families", FAMILY_LABELS.to_vec()),
        ("strategies", strategies),
    ];
    if let Some(f) = filter {
        if !LIST_GROUPS.contains(&f) {
            return Err(CliError::Config(format!(
                "unknown list group `{f}`; expected one of {LIST_GROUPS:?}"
            )));
        }
    }
    let mut entries = Vec::new();
    let mut text = String::new();
    for (kind, names) in groups {
        if filter.is_some_and(|f| f != kind) {
            continue;
        }
        let mut names = names;
        names.sort_unstable();
        text.push_str(&format!("{kind}:\n"));
        for n in names {
            text.push_str(&format!("  {n}\n"));
            entries.push(json!({ "kind": kind, "label": n }));
        }
    }
    Ok(Output {
        report: Value::Array(entries),
        text,
        files: Vec::new(),
        exit_code: exit::OK,
    })
}

fn spray_of(cfg: &RunConfig) -> Result<SprayField, CliError> {
    resolve_spray(&cfg.spray)
}

pub fn eval(cfg: &RunConfig) -> Result<Output, CliError> {
    let spray = spray_of(cfg)?;
    let s = cfg.initial_state()?;
    let g = spray.eval(&s)?;
    Ok(Output::report(
        json!({ "spray": spray.label(), "x": s.x(), "y": s.y(), "g": g }),
    ))
}

pub fn curvature(cfg: &RunConfig) -> Result<Output, CliError> {
    let spray = spray_of(cfg)?;
    let s = cfg.initial_state()?;
    let rep = riemann_curvature(&spray, &s)?;
    let iso = isotropy_decompose(&rep);
    let ric_horizontal = diffops::ricci_horizontal_derivative(&spray, &s)?;
    let mut report = json!({
        "spray": spray.label(),
        "curvature": to_value(&rep),
        "isotropy": to_value(&iso),
        "ricci_horizontal_derivative": ric_horizontal,
    });
    if cfg.factor.is_some() {
        let factor = cfg.factor()?;
        let check = diffops::projective_ricci_check(&spray, &factor, &s)?;
        report["projective_ricci"] = to_value(&check);
    }
    Ok(Output::report(report))
}

pub fn geodesic(cfg: &RunConfig) -> Result<Output, CliError> {
    let spray = spray_of(cfg)?;
    let s = cfg.initial_state()?;
    let (_, t_end) = cfg.span()?;
    let traj = geodesics::integrate(&spray, &s, t_end, &cfg.settings.integrator)?;
    let iv = geodesics::probe_maximal_interval(&spray, &s, &cfg.settings.probe)?;
    let (t0, t1) = traj.t_range();
    let summary = json!({
        "spray": spray.label(),
        "samples": traj.samples.len(),
        "t_range": [t0, t1],
        "termination": to_value(&traj.termination),
        "max_residual": traj.max_residual,
        "interval": to_value(&iv),
        "left_status": to_value(&iv.left_status),
        "right_status": to_value(&iv.right_status),
    });
    let mut out = Output::report(summary);
    out.files.push(("trajectory.csv".into(), traj.to_csv()));
    Ok(out)
}

pub fn probe(cfg: &RunConfig) -> Result<Output, CliError> {
    let spray = spray_of(cfg)?;
    let s = cfg.initial_state()?;
    let iv = geodesics::probe_maximal_interval(&spray, &s, &cfg.settings.probe)?;
    Ok(Output::report(
        json!({ "spray": spray.label(), "x": s.x(), "y": s.y(), "interval": to_value(&iv) }),
    ))
}

/// Closure checks `(λ, t0)` run by `construct`.
const CLOSURE_CHECKS: [(f64, f64); 3] = [(0.5, 0.05), (1.5, -0.1), (2.0, 0.0)];

pub fn construct(cfg: &RunConfig) -> Result<Output, CliError> {
    let family = cfg.spray.label.strip_prefix("pathspace:").ok_or_else(|| {
        CliError::Config("construct needs a `pathspace:<family>` spray label".into())
    })?;
    let fam = PathFamily::builtin(family, &cfg.spray.params)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let spray = pathspace::construct_spray(&fam)?;
    let states = seeded_states(fam.domain(), cfg.settings.samples, cfg.settings.seed)?;
    let axioms = pathspace::axioms_check(&fam, &states, &CLOSURE_CHECKS)?;
    let roundtrip =
        pathspace::roundtrip_check(&fam, &spray, &states, &RoundtripSettings::default())?;
    let mut report = json!({
        "family": fam.name(),
        "dim": fam.dim(),
        "param_dim": fam.param_dim(),
        "axioms": to_value(&axioms),
        "roundtrip_max_distance": roundtrip.max_distance,
        "roundtrip_passed": roundtrip.max_distance <= pathspace::ROUNDTRIP_TOLERANCE,
    });
    if cfg.initial.is_some() {
        let s = cfg.initial_state()?;
        report["g"] = to_value(&spray.eval(&s)?);
    }
    let mut out = Output::report(report);
    out.files
        .push(("roundtrip.json".into(), pretty(&to_value(&roundtrip))));
    Ok(out)
}

pub fn complete(cfg: &RunConfig) -> Result<Output, CliError> {
    let rest = cfg.spray.label.strip_prefix("completed:").ok_or_else(|| {
        CliError::Config("complete needs a `completed:<base>+<strategy>` spray label".into())
    })?;
    let (base, strategy) = rest.split_once('+').ok_or_else(|| {
        CliError::Config(format!(
            "expected `completed:<base>+<strategy>`, got `{}`",
            cfg.spray.label
        ))
    })?;
    let strategy: ReparamStrategy = strategy
        .parse()
        .map_err(|e: spraylab::SprayError| CliError::Config(e.to_string()))?;
    let base = catalog::named_spray(base, &cfg.spray.params)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let states: Vec<TangentState> = match &cfg.initial {
        Some(_) => vec![cfg.initial_state()?],
        None => seeded_states(base.domain(), cfg.settings.samples, cfg.settings.seed)?,
    };
    let settings = CompletionSettings {
        probe: cfg.settings.probe,
        ..Default::default()
    };
    let done = completeness::make_complete(&base, strategy, &settings)?;
    let mut entries = Vec::new();
    for s in &states {
        let iv = geodesics::probe_maximal_interval(&base, s, &cfg.settings.probe)?;
        let p = completeness::completion_factor(&base, s, strategy, &cfg.settings.probe)?;
        entries.push(json!({
            "x": s.x(), "y": s.y(), "a": iv.a, "b": iv.b, "p": p, "g": done.eval(s)?,
        }));
    }
    Ok(Output::report(
        json!({ "spray": done.label(), "strategy": strategy.name(), "entries": entries }),
    ))
}

pub fn classify(cfg: &RunConfig) -> Result<Output, CliError> {
    let spray = spray_of(cfg)?;
    let factor = cfg.factor()?;
    let s = cfg.initial_state()?;
    let (_, t_end) = cfg.span()?;
    let traj = geodesics::integrate(&spray, &s, t_end, &cfg.settings.integrator)?;
    let profile =
        projective::classify_p_profile(&projective::sample_p_along_geodesic(&factor, &traj)?)?;
    let clock = projective::reclock_geodesic(&traj, &factor)?;
    let relation = projective::fit_parameter_relation(&clock.t, &clock.s)?;
    Ok(Output::report(json!({
        "spray": spray.label(),
        "factor": factor.label(),
        "p_profile": to_value(&profile),
        "parameter_relation": to_value(&relation),
    })))
}

pub fn verify(suite: &str, seed: u64) -> Result<Output, CliError> {
    let report = suites::run(suite, seed)?;
    let mut text = String::new();
    for (line, c) in report.summary_lines().iter().zip(&report.criteria) {
        text.push_str(line);
        text.push('\n');
        for f in &c.failures {
            text.push_str(&format!("    {f}\n"));
        }
    }
    let exit_code = if report.passed {
        exit::OK
    } else {
        exit::VERIFY_FAILED
    };
    Ok(Output {
        report: to_value(&report),
        text,
        files: Vec::new(),
        exit_code,
    })
}

/// Pretty JSON with a trailing newline.
pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> RunConfig {
        RunConfig::from_json(text).unwrap()
    }

    #[test]
    fn list_is_sorted_and_filterable() {
        let all = list(None).unwrap();
        assert!(all.text.contains("  flat\n") && all.text.contains("  hyperbolic_ball\n"));
        assert!(all.text.contains("  circles\n") && all.text.contains("  ball_arcs\n"));
        let sprays = list(Some("sprays")).unwrap();
        let labels: Vec<&str> = sprays
            .report
            .as_array()
            .unwrap()
            .iter()
            .map(|e| e["label"].as_str().unwrap())
            .collect();
        let mut sorted = labels.clone();
        sorted.sort_unstable();
        assert_eq!(labels, sorted);
        assert!(!sprays.text.contains("circles"));
        assert!(matches!(list(Some("nope")), Err(CliError::Config(_))));
    }

    #[test]
    fn flat_geodesic_csv_has_x1_equal_t() {
        let out = geodesic(&cfg(
            r#"{"spray": {"label": "flat"}, "initial": {"x": [0, 0], "y": [1, 0]}, "t_span": [0, 0.5]}"#,
        ))
        .unwrap();
        let csv = &out.files[0].1;
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,x1,x2,y1,y2"));
        for row in lines {
            let v: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
            assert!((v[1] - v[0]).abs() <= 1e-12);
        }
        assert_eq!(out.report["t_range"][1], 0.5);
    }

    #[test]
    fn semicircle_geodesic_residual_is_small() {
        let out = geodesic(&cfg(
            r#"{"spray": {"label": "semicircle"}, "initial": {"x": [0, 1], "y": [1, 0]}, "horizon": 2}"#,
        ))
        .unwrap();
        assert!(out.report["max_residual"].as_f64().unwrap() <= 1e-8);
    }

    #[test]
    fn quarter_funk_forward_end_is_finite() {
        let out = geodesic(&cfg(
            r#"{"spray": {"label": "funk_scaled", "params": {"c": 0.25}},
                "initial": {"x": [0, 0], "y": [1, 0]}, "horizon": 0.5}"#,
        ))
        .unwrap();
        let status = out.report["right_status"].as_str().unwrap();
        assert!(status == "blowup" || status == "domain_exit", "{status}");
        assert!(out.report["interval"]["b"].as_f64().unwrap().is_finite());
    }

    #[test]
    fn errors_map_to_exit_codes() {
        let c = cfg(r#"{"spray": {"label": "flat_ball"}, "initial": {"x": [2, 0], "y": [1, 0]}}"#);
        assert_eq!(eval(&c).unwrap_err().exit_code(), exit::COMPUTATION);
        let c = cfg(r#"{"spray": {"label": "flat"}}"#);
        assert_eq!(eval(&c).unwrap_err().exit_code(), exit::USAGE);
        let c = cfg(r#"{"spray": {"label": "flat"}}"#);
        assert_eq!(construct(&c).unwrap_err().exit_code(), exit::USAGE);
    }

    #[test]
    fn wrappers_report() {
        let c = cfg(
            r#"{"spray": {"label": "hyperbolic_ball"}, "initial": {"x": [0, 0], "y": [0.6, 0.8]},
                       "factor": {"label": "funk", "params": {"c": 0.5}}}"#,
        );
        let out = curvature(&c).unwrap();
        assert!((out.report["curvature"]["ric"].as_f64().unwrap() + 3.0).abs() < 1e-9);
        assert!(out.report["projective_ricci"]["residual"].as_f64().unwrap() < 1e-8);
        let c = cfg(r#"{"spray": {"label": "pathspace:semicircles"}, "settings": {"samples": 3}}"#);
        let out = construct(&c).unwrap();
        assert_eq!(out.report["roundtrip_passed"], true);
        assert_eq!(out.report["axioms"]["passed"], true);
        let c = cfg(r#"{"spray": {"label": "completed:flat_ball+ln-two-sided"},
                       "initial": {"x": [0, 0], "y": [1, 0]}}"#);
        let out = complete(&c).unwrap();
        assert!(out.report["entries"][0]["p"].as_f64().unwrap().abs() < 1e-6);
        let c = cfg(
            r#"{"spray": {"label": "sphere_proj"}, "factor": {"label": "sphere_proj"},
                       "initial": {"x": [0, 0], "y": [1, 0]}, "horizon": 1.2}"#,
        );
        let out = classify(&c).unwrap();
        assert_eq!(out.report["p_profile"]["family"], "tangent");
    }
}
