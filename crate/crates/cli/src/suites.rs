//! Verification suites A1–A8. Each criterion runs deterministically from a
//! seed and reports the worst observed value of every checked quantity.

use std::collections::BTreeMap;
use std::fmt::Display;

use serde::Serialize;
use spraylab::catalog::{funk_metric_ball, named_factor, named_spray, params, SPRAY_LABELS};
use spraylab::completeness::{self, ReparamStrategy};
use spraylab::diffops::{self, isotropy_decompose, jet_at, riemann_curvature};
use spraylab::fd::{fd_jet, FdSteps};
use spraylab::geodesics::{self, Sample};
use spraylab::pathspace::{self, PathFamily, RoundtripSettings};
use spraylab::projective::{self, PFamily, StFamily};
use spraylab::sampling::{self, random_states, seeded_states, SampleRegion};
use spraylab::{
    check_homogeneity, ConicalDomain, IntegratorSettings, Params, ProjectiveFactor, SprayField,
    TangentState, Trajectory,
};

use crate::error::CliError;

/// Criterion id, suite name and title.
pub const CRITERIA: [(&str, &str, &str); 8] = [
    (
        "A1",
        "homogeneity",
        "2-homogeneity and cone domains of catalog and constructed sprays",
    ),
    (
        "A2",
        "clocks",
        "Funk clocks along the chord of the flat ball",
    ),
    (
        "A3",
        "pathspace",
        "path-space reconstruction and roundtrips",
    ),
    (
        "A4",
        "klein",
        "projective completion oracles and completeness verdicts",
    ),
    (
        "A5",
        "dichotomy",
        "P-profile dichotomy and weak Ricci constancy of P = cF",
    ),
    (
        "A6",
        "relations",
        "parameter-relation families of Funk, Klein and sphere clocks",
    ),
    ("A7", "curvature", "Riemann and Ricci curvature oracles"),
    (
        "A8",
        "derivatives",
        "dual-number partials against Richardson finite differences",
    ),
];

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub id: String,
    pub suite: String,
    pub title: String,
    pub passed: bool,
    /// Worst observed value of each checked quantity.
    pub metrics: BTreeMap<String, f64>,
    /// First failing checks, capped at [`MAX_FAILURES`].
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub passed: bool,
    pub criteria: Vec<CriterionReport>,
}

impl VerifyReport {
    /// One `PASS`/`FAIL` line per criterion.
    pub fn summary_lines(&self) -> Vec<String> {
        self.criteria
            .iter()
            .map(|c| {
                format!(
                    "{} {} ({}): {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.id,
                    c.suite,
                    c.title
                )
            })
            .collect()
    }
}

pub const MAX_FAILURES: usize = 20;

/// Runs a suite by name, criterion id (`A1`…`A8`, any case) or `all`.
pub fn run(name: &str, seed: u64) -> Result<VerifyReport, CliError> {
    let picked: Vec<_> = if name == "all" {
        CRITERIA.to_vec()
    } else {
        let hit: Vec<_> = CRITERIA
            .iter()
            .copied()
            .filter(|(id, suite, _)| id.eq_ignore_ascii_case(name) || *suite == name)
            .collect();
        if hit.is_empty() {
            let names: Vec<&str> = CRITERIA.iter().map(|c| c.1).collect();
            return Err(CliError::Config(format!(
                "unknown suite `{name}`; expected all, A1-A8 or one of {names:?}"
            )));
        }
        hit
    };
    let criteria: Vec<CriterionReport> = picked
        .into_iter()
        .map(|(id, _, _)| run_criterion(id, seed))
        .collect();
    Ok(VerifyReport {
        seed,
        passed: criteria.iter().all(|c| c.passed),
        criteria,
    })
}

pub fn run_criterion(id: &str, seed: u64) -> CriterionReport {
    let (id, suite, title) = *CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .expect("known criterion id");
    let mut ck = Check::default();
    match id {
        "A1" => a1_homogeneity(&mut ck, seed),
        "A2" => a2_clocks(&mut ck),
        "A3" => a3_pathspace(&mut ck, seed),
        "A4" => a4_completion(&mut ck, seed),
        "A5" => a5_dichotomy(&mut ck, seed),
        "A6" => a6_relations(&mut ck),
        "A7" => a7_curvature(&mut ck, seed),
        _ => a8_derivatives(&mut ck, seed),
    }
    CriterionReport {
        id: id.into(),
        suite: suite.into(),
        title: title.into(),
        passed: ck.failure_count == 0,
        metrics: ck.metrics,
        failures: ck.failures,
    }
}

#[derive(Default)]
struct Check {
    metrics: BTreeMap<String, f64>,
    failures: Vec<String>,
    failure_count: usize,
}

impl Check {
    fn fail(&mut self, msg: String) {
        self.failure_count += 1;
        if self.failures.len() < MAX_FAILURES {
            self.failures.push(msg);
        }
    }

    fn record_max(&mut self, key: &str, value: f64) {
        let e = self
            .metrics
            .entry(key.to_string())
            .or_insert(f64::NEG_INFINITY);
        if value > *e || value.is_nan() {
            *e = value;
        }
    }

    fn record_min(&mut self, key: &str, value: f64) {
        let e = self.metrics.entry(key.to_string()).or_insert(f64::INFINITY);
        if value < *e || value.is_nan() {
            *e = value;
        }
    }

    /// Requires `value <= bound`.
    fn at_most(&mut self, key: &str, value: f64, bound: f64) {
        self.record_max(key, value);
        if !(value <= bound) {
            self.fail(format!("{key}: {value:e} > {bound:e}"));
        }
    }

    /// Requires `value > bound`.
    fn above(&mut self, key: &str, value: f64, bound: f64) {
        self.record_min(key, value);
        if !(value > bound) {
            self.fail(format!("{key}: {value:e} <= {bound:e}"));
        }
    }

    fn require(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.fail(msg());
        }
    }

    /// Unwraps a result, recording the error as a failure.
    fn ok<T, E: Display>(&mut self, context: &str, r: Result<T, E>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.fail(format!("{context}: {e}"));
                None
            }
        }
    }
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn st(x: &[f64], y: &[f64]) -> TangentState {
    TangentState::new(x.to_vec(), y.to_vec()).expect("nonzero velocity")
}

/// Catalog sprays in their default dimension, plus dimension 3 where defined.
fn catalog_sprays(ck: &mut Check) -> Vec<SprayField> {
    let mut out = Vec::new();
    for label in SPRAY_LABELS {
        for dim in [2.0, 3.0] {
            if dim == 3.0 && label.starts_with("semicircle") {
                continue;
            }
            let mut p = params(&[("dim", dim)]);
            if matches!(*label, "funk_scaled" | "funk_reversible") {
                p.insert("c".into(), 0.5);
            }
            if let Some(sp) = ck.ok(label, named_spray(label, &p)) {
                out.push(sp);
            }
        }
    }
    out
}

fn spray_key(sp: &SprayField) -> String {
    format!("{}/{}d", sp.label(), sp.dim())
}

fn seeded(ck: &mut Check, domain: &ConicalDomain, count: usize, seed: u64) -> Vec<TangentState> {
    ck.ok("sampling", seeded_states(domain, count, seed))
        .unwrap_or_default()
}

const HOMOGENEITY_LAMBDAS: [f64; 3] = [0.5, 2.0, 10.0];

fn a1_homogeneity(ck: &mut Check, seed: u64) {
    let mut sprays = catalog_sprays(ck);
    let families: Vec<(&str, Params)> = vec![
        ("lines", params(&[("dim", 2.0)])),
        ("lines", params(&[("dim", 3.0)])),
        ("circles", params(&[("r", 0.5)])),
        ("circles", params(&[("r", 2.0)])),
        ("semicircles", Params::new()),
        ("ball_arcs", params(&[("dim", 2.0)])),
        ("ball_arcs", params(&[("dim", 3.0)])),
        ("cubic2d", Params::new()),
        ("cubic3d", params(&[("dim", 3.0)])),
        ("zero", Params::new()),
    ];
    for (label, p) in families {
        let Some(fam) = ck.ok(label, PathFamily::builtin(label, &p)) else {
            continue;
        };
        if let Some(sp) = ck.ok(label, pathspace::construct_spray(&fam)) {
            let tag = p.get("r").map_or(String::new(), |r| format!("(r={r})"));
            sprays.push(sp.with_label(format!("pathspace:{label}{tag}")));
        }
    }
    for (k, sp) in sprays.iter().enumerate() {
        let key = spray_key(sp);
        let states = seeded(ck, sp.domain(), 100, seed.wrapping_add(k as u64));
        if let Some(r) = ck.ok(&key, check_homogeneity(sp, &states, &HOMOGENEITY_LAMBDAS)) {
            ck.at_most(&format!("homogeneity.{key}"), r.max_deviation, 1e-9);
        }
        let outside = states
            .iter()
            .filter(|s| {
                [1e-3, 0.5, 2.0, 10.0, 1e3]
                    .iter()
                    .any(|&l| !sp.domain().contains(&s.scaled(l).expect("positive scale")))
            })
            .count();
        ck.require(outside == 0, || {
            format!("cone.{key}: {outside} states leave the domain under scaling")
        });
    }
}

fn chord() -> spraylab::Result<Trajectory> {
    let flat = named_spray("flat_ball", &Params::new())?;
    geodesics::integrate(
        &flat,
        &st(&[0.0, 0.0], &[1.0, 0.0]),
        0.99,
        &IntegratorSettings::default(),
    )
}

fn clock_gap(c: &projective::ClockSamples, exact: impl Fn(f64) -> f64) -> f64 {
    c.t.iter()
        .zip(&c.s)
        .map(|(t, s)| (s - exact(*t)).abs())
        .fold(0.0, f64::max)
}

fn a2_clocks(ck: &mut Check) {
    let Some(traj) = ck.ok("chord", chord()) else {
        return;
    };
    let half_funk = named_factor("funk", &params(&[("c", 0.5)]));
    let rev = named_factor("funk_reversible", &params(&[("c", 0.5)]));
    let (Some(half_funk), Some(rev)) = (ck.ok("factor", half_funk), ck.ok("factor", rev)) else {
        return;
    };
    if let Some(c) = ck.ok(
        "half Funk clock",
        projective::reclock_geodesic(&traj, &half_funk),
    ) {
        ck.at_most(
            "half_funk_clock_vs_minus_log",
            clock_gap(&c, |t| -(1.0 - t).ln()),
            1e-8,
        );
    }
    // The log-ratio clock has initial slope 2; with slope 1 it is atanh.
    if let Some(c) = ck.ok(
        "reversible clock",
        projective::reclock_geodesic_at(&traj, &rev, 2.0, &traj.times()),
    ) {
        ck.at_most(
            "reversible_clock_vs_log_ratio",
            clock_gap(&c, |t| ((1.0 + t) / (1.0 - t)).ln()),
            1e-8,
        );
    }
    if let Some(c) = ck.ok(
        "reversible clock",
        projective::reclock_geodesic(&traj, &rev),
    ) {
        ck.at_most("reversible_clock_vs_atanh", clock_gap(&c, f64::atanh), 1e-8);
    }
    let mut worst: f64 = 0.0;
    for i in 0..=198 {
        let t = -0.99 + 0.01 * i as f64;
        if let Some(v) = ck.ok(
            "closed-form clock",
            projective::funk_reversible_clock(&[0.0, 0.0], &[1.0, 0.0], 0.5, t),
        ) {
            worst = worst.max((v - t.atanh()).abs());
        }
    }
    ck.at_most("funk_reversible_clock_vs_atanh", worst, 1e-8);
}

fn a3_pathspace(ck: &mut Check, seed: u64) {
    let exact_pairs = [
        ("semicircles", Params::new(), "semicircle", 1e-8),
        (
            "ball_arcs",
            params(&[("dim", 2.0)]),
            "hyperbolic_ball",
            1e-7,
        ),
        (
            "ball_arcs",
            params(&[("dim", 3.0)]),
            "hyperbolic_ball",
            1e-7,
        ),
    ];
    for (k, (family, p, target, tol)) in exact_pairs.into_iter().enumerate() {
        let fam = ck.ok(family, PathFamily::builtin(family, &p));
        let built = fam
            .as_ref()
            .and_then(|f| ck.ok(family, pathspace::construct_spray(f)));
        let exact = ck.ok(target, named_spray(target, &p));
        let (Some(built), Some(exact)) = (built, exact) else {
            continue;
        };
        let key = format!("{family}/{}d", built.dim());
        let states = seeded(ck, built.domain(), 100, seed.wrapping_add(100 + k as u64));
        for s in &states {
            let (Some(g), Some(h)) = (ck.ok(&key, built.eval(s)), ck.ok(&key, exact.eval(s)))
            else {
                continue;
            };
            ck.at_most(&format!("reconstruction.{key}"), max_gap(&g, &h), tol);
            if family == "ball_arcs" {
                ck.at_most(&format!("orthogonality.{key}"), dot(&g, s.y()).abs(), 1e-10);
            }
        }
    }

    let roundtrips: Vec<(&str, Params)> = vec![
        ("semicircles", Params::new()),
        ("ball_arcs", params(&[("dim", 2.0)])),
        ("ball_arcs", params(&[("dim", 3.0)])),
        ("circles", params(&[("r", 0.5)])),
        ("circles", params(&[("r", 1.0)])),
        ("circles", params(&[("r", 2.0)])),
        ("cubic2d", Params::new()),
        ("cubic3d", params(&[("dim", 3.0)])),
    ];
    for (k, (family, p)) in roundtrips.into_iter().enumerate() {
        let Some(fam) = ck.ok(family, PathFamily::builtin(family, &p)) else {
            continue;
        };
        let Some(spray) = ck.ok(family, pathspace::construct_spray(&fam)) else {
            continue;
        };
        let key = match p.get("r") {
            Some(r) => format!("{family}(r={r})"),
            None => format!("{family}/{}d", fam.dim()),
        };
        let states = seeded(ck, fam.domain(), 5, seed.wrapping_add(200 + k as u64));
        let settings = RoundtripSettings::default();
        let Some(report) = ck.ok(
            &key,
            pathspace::roundtrip_check(&fam, &spray, &states, &settings),
        ) else {
            continue;
        };
        ck.at_most(
            &format!("roundtrip.{key}"),
            report.max_distance,
            pathspace::ROUNDTRIP_TOLERANCE,
        );
        let Some(&r) = p.get("r") else { continue };
        for (entry, s) in report.entries.iter().zip(&states) {
            let Some(fit) = &entry.fit else {
                ck.fail(format!("circle radius.{key}: no family fit at {s:?}"));
                continue;
            };
            let Some(traj) = ck.ok(
                &key,
                geodesics::integrate(&spray, s, 2.0, &IntegratorSettings::default()),
            ) else {
                continue;
            };
            let centre = &fit.params;
            let dev = traj
                .samples
                .iter()
                .map(|smp| ((smp.x[0] - centre[0]).hypot(smp.x[1] - centre[1]) - r).abs())
                .fold(0.0, f64::max);
            ck.at_most(&format!("circle_radius.{key}"), dev, 1e-7);
        }
    }
}

fn a4_completion(ck: &mut Check, seed: u64) {
    let flat = ck.ok("flat_ball", named_spray("flat_ball", &Params::new()));
    let semi = ck.ok("semicircle", named_spray("semicircle", &Params::new()));
    let klein = ck.ok(
        "klein_finsler",
        named_spray("klein_finsler", &Params::new()),
    );
    let target = ck.ok(
        "semicircle_complete",
        named_spray("semicircle_complete", &Params::new()),
    );
    let (Some(flat), Some(semi), Some(klein), Some(target)) = (flat, semi, klein, target) else {
        return;
    };
    let complete = |sp: &SprayField, k: ReparamStrategy| {
        completeness::make_complete(sp, k, &Default::default())
    };

    if let Some(done) = ck.ok("ln-two-sided", complete(&flat, ReparamStrategy::LnTwoSided)) {
        for s in seeded(ck, done.domain(), 100, seed.wrapping_add(300)) {
            if let (Some(g), Some(h)) = (
                ck.ok("ln-two-sided", done.eval(&s)),
                ck.ok("klein", klein.eval(&s)),
            ) {
                ck.at_most("ln_two_sided_vs_klein", max_gap(&g, &h), 2e-4);
            }
        }
    }
    if let Some(done) = ck.ok("ln-right", complete(&flat, ReparamStrategy::LnRight)) {
        for s in seeded(ck, done.domain(), 100, seed.wrapping_add(301)) {
            let (Some(g), Some(f)) = (
                ck.ok("ln-right", done.eval(&s)),
                ck.ok("funk", funk_metric_ball(&s)),
            ) else {
                continue;
            };
            let want: Vec<f64> = s.y().iter().map(|v| 0.5 * f * v).collect();
            ck.at_most("ln_right_vs_half_funk", max_gap(&g, &want), 2e-4);
        }
    }
    if let Some(done) = ck.ok(
        "tan-two-sided",
        complete(&semi, ReparamStrategy::TanTwoSided),
    ) {
        let states: Vec<TangentState> = seeded(ck, done.domain(), 200, seed.wrapping_add(302))
            .into_iter()
            .filter(|s| s.y()[0].abs() > 1e-3 * s.speed())
            .take(100)
            .collect();
        for s in &states {
            if let (Some(g), Some(h)) = (
                ck.ok("tan-two-sided", done.eval(s)),
                ck.ok("target", target.eval(s)),
            ) {
                ck.at_most(
                    "tan_two_sided_vs_semicircle_complete",
                    max_gap(&g, &h),
                    2e-4,
                );
            }
        }
    }

    let ball = ConicalDomain::unit_ball(2);
    let states = seeded(ck, &ball, 50, seed.wrapping_add(303));
    let probe = Default::default();
    let half = named_spray("funk_scaled", &params(&[("c", 0.5)]));
    let quarter = named_spray("funk_scaled", &params(&[("c", 0.25)]));
    let funk_log = named_spray("funk_log", &Params::new());
    let (Some(half), Some(quarter), Some(funk_log)) = (
        ck.ok("half", half),
        ck.ok("quarter", quarter),
        ck.ok("log", funk_log),
    ) else {
        return;
    };
    if let Some(r) = ck.ok(
        "klein verdict",
        completeness::verify_complete(&klein, &states, 1e4, &probe),
    ) {
        ck.require(r.complete, || {
            "klein_finsler is not certified complete".into()
        });
    }
    if let Some(r) = ck.ok(
        "funk_log verdict",
        completeness::verify_complete(&funk_log, &states, 1e4, &probe),
    ) {
        ck.require(r.complete, || "funk_log is not certified complete".into());
    }
    if let Some(r) = ck.ok(
        "half verdict",
        completeness::verify_complete(&half, &states, 1e4, &probe),
    ) {
        ck.require(r.positively_complete && !r.negatively_complete, || {
            format!(
                "funk_scaled(1/2): positive {}, negative {}",
                r.positively_complete, r.negatively_complete
            )
        });
    }
    if let Some(r) = ck.ok(
        "quarter verdict",
        completeness::verify_complete(&quarter, &states, 1e4, &probe),
    ) {
        ck.require(r.incomplete_both_ways, || {
            "funk_scaled(1/4) is not incomplete both ways".into()
        });
    }
}

/// Fraction of each finite side of the probed interval covered by
/// [`profile_geodesic`], widened up to [`MAX_INTERVAL_FRACTION`] to reach the
/// classifier's minimum span. Staying away from the ends keeps `P` and its
/// derivatives moderate, so sampled `P''` stays accurate.
const INTERVAL_FRACTION: f64 = 0.25;
const MAX_INTERVAL_FRACTION: f64 = 0.8;
/// Length covered on an infinite side in [`profile_geodesic`].
const SIDE_CAP: f64 = 2.0;
/// Tolerances for profile geodesics; the sampled `P` feeds second differences.
const PROFILE_TOLERANCE: f64 = 1e-12;
/// Base points for the profile geodesics lie in this ball.
const PROFILE_BALL_RADIUS: f64 = 0.5;

/// Geodesic over a central part of the maximal interval `(a, b)` of `s`,
/// integrated in one run from its left end so that the sample grid has no
/// interior seam.
fn profile_geodesic(spray: &SprayField, s: &TangentState) -> spraylab::Result<Trajectory> {
    let iv = geodesics::probe_maximal_interval(spray, s, &Default::default())?;
    let left = if iv.left_finite() {
        iv.a.abs()
    } else {
        f64::INFINITY
    };
    let right = if iv.right_finite() {
        iv.b
    } else {
        f64::INFINITY
    };
    let want = 1.2 * projective::MIN_PROFILE_SPAN;
    let fraction = if INTERVAL_FRACTION * (left + right) < want {
        (want / (left + right)).min(MAX_INTERVAL_FRACTION)
    } else {
        INTERVAL_FRACTION
    };
    let side = |len: f64| (fraction * len).min(SIDE_CAP);
    let (left, right) = (side(left), side(right));
    let settings = IntegratorSettings {
        atol: PROFILE_TOLERANCE,
        rtol: PROFILE_TOLERANCE,
        ..Default::default()
    };
    let back = geodesics::integrate(spray, s, -left, &settings)?;
    let first = back
        .samples
        .iter()
        .min_by(|p, q| p.t.total_cmp(&q.t))
        .expect("nonempty trajectory");
    let t0 = first.t;
    let start = TangentState::new(first.x.clone(), first.y.clone())?;
    let run = geodesics::integrate(spray, &start, right - t0, &settings)?;
    let samples: Vec<Sample> = run
        .samples
        .into_iter()
        .map(|p| Sample { t: p.t + t0, ..p })
        .collect();
    Trajectory::from_samples(spray.label(), samples)
}

fn a5_dichotomy(ck: &mut Check, seed: u64) {
    let ball = ConicalDomain::unit_ball(2);
    let region = SampleRegion::Ball {
        radius: PROFILE_BALL_RADIUS,
    };
    let states = random_states(
        &mut sampling::rng(seed.wrapping_add(400)),
        &ball,
        region,
        20,
    );
    let states = ck.ok("sampling", states).unwrap_or_default();
    for c in [0.0, 1.0, 0.5, 2.0] {
        let key = format!("c={c}");
        let spray = ck.ok(&key, named_spray("funk_scaled", &params(&[("c", c)])));
        let factor = ck.ok(&key, named_factor("funk", &params(&[("c", c)])));
        let (Some(spray), Some(factor)) = (spray, factor) else {
            continue;
        };
        let constant = c != 2.0;
        let mut worst_ode: f64 = 0.0;
        for s in &states {
            let Some(traj) = ck.ok(&key, profile_geodesic(&spray, s)) else {
                continue;
            };
            let Some(samples) = ck.ok(&key, projective::sample_p_along_geodesic(&factor, &traj))
            else {
                continue;
            };
            let Some(fit) = ck.ok(&key, projective::classify_p_profile(&samples)) else {
                continue;
            };
            if constant {
                ck.at_most(&format!("profile_residual.{key}"), fit.residual, 1e-5);
                ck.at_most(&format!("ode_residual.{key}"), fit.ode_residual, 1e-5);
            } else {
                ck.record_max(&format!("profile_residual.{key}"), fit.residual);
                worst_ode = worst_ode.max(fit.ode_residual);
            }
        }
        if !constant {
            ck.above(&format!("max_ode_residual.{key}"), worst_ode, 1e-2);
        }
        let Some(r) = ck.ok(
            &key,
            diffops::is_weakly_ricci_constant(&spray, &states, diffops::WEAK_RICCI_THRESHOLD),
        ) else {
            continue;
        };
        if constant {
            ck.at_most(&format!("ricci_horizontal.{key}"), r.max_abs, 1e-5);
        } else {
            ck.above(&format!("ricci_horizontal.{key}"), r.max_abs, 1e-2);
        }
    }
}

fn fit_clock(
    ck: &mut Check,
    key: &str,
    traj: &Trajectory,
    factor: &ProjectiveFactor,
    want: StFamily,
) {
    let Some(c) = ck.ok(key, projective::reclock_geodesic(traj, factor)) else {
        return;
    };
    let Some(fit) = ck.ok(key, projective::fit_parameter_relation(&c.t, &c.s)) else {
        return;
    };
    ck.require(fit.family == want, || {
        format!("{key}: selected {:?}, expected {want:?}", fit.family)
    });
    ck.at_most(&format!("relation_residual.{key}"), fit.residual, 1e-6);
    if want == StFamily::LogRatio {
        ck.require(fit.complete_case, || {
            format!("{key}: complete_case is false")
        });
        ck.require(fit.domain_ok, || format!("{key}: domain_ok is false"));
    }
}

fn a6_relations(ck: &mut Check) {
    let Some(traj) = ck.ok("chord", chord()) else {
        return;
    };
    let factors = [
        ("funk_half", "funk", 0.5, StFamily::Log),
        ("funk_one", "funk", 1.0, StFamily::Rational),
        ("klein", "funk_reversible", 0.5, StFamily::LogRatio),
    ];
    for (key, label, c, want) in factors {
        if let Some(f) = ck.ok(key, named_factor(label, &params(&[("c", c)]))) {
            fit_clock(ck, key, &traj, &f, want);
        }
    }

    let sphere = ck.ok("sphere_proj", named_factor("sphere_proj", &Params::new()));
    let deformed = ck.ok("sphere_proj", named_spray("sphere_proj", &Params::new()));
    let plane = ck.ok("flat", named_spray("flat", &Params::new()));
    let (Some(sphere), Some(deformed), Some(plane)) = (sphere, deformed, plane) else {
        return;
    };
    let start = st(&[0.0, 0.0], &[1.0, 0.0]);
    let settings = IntegratorSettings::default();
    if let Some(traj) = ck.ok(
        "sphere_proj geodesic",
        geodesics::integrate(&deformed, &start, 1.2, &settings),
    ) {
        let fit = ck
            .ok(
                "sphere_proj profile",
                projective::sample_p_along_geodesic(&sphere, &traj),
            )
            .and_then(|smp| ck.ok("sphere_proj profile", projective::classify_p_profile(&smp)));
        if let Some(fit) = fit {
            ck.require(fit.family == PFamily::Tangent, || {
                format!("sphere_proj profile: selected {:?}", fit.family)
            });
            ck.at_most("profile_residual.sphere_proj", fit.residual, 1e-6);
        }
    }
    if let Some(line) = ck.ok("line", geodesics::integrate(&plane, &start, 3.0, &settings)) {
        fit_clock(ck, "sphere_proj", &line, &sphere, StFamily::Arctan);
    }
}

fn a7_curvature(ck: &mut Check, seed: u64) {
    if let Some(flat) = ck.ok("flat", named_spray("flat", &Params::new())) {
        for s in seeded(ck, flat.domain(), 50, seed.wrapping_add(500)) {
            if let Some(r) = ck.ok("flat", riemann_curvature(&flat, &s)) {
                let worst =
                    r.r.iter()
                        .flatten()
                        .fold(r.ric.abs(), |m, v| m.max(v.abs()));
                ck.at_most("flat_curvature", worst, 1e-10);
            }
        }
    }

    if let Some(h) = ck.ok(
        "hyperbolic_ball",
        named_spray("hyperbolic_ball", &Params::new()),
    ) {
        let s = st(&[0.0, 0.0], &[0.6, 0.8]);
        if let Some(r) = ck.ok("hyperbolic_ball", riemann_curvature(&h, &s)) {
            ck.at_most("hyperbolic_ricci_at_origin", (r.ric + 3.0).abs(), 1e-6);
        }
        let num = SprayField::numeric("hyperbolic_ball(fd)", Params::new(), h.domain().clone(), {
            let h = h.clone();
            move |x, y| h.eval_raw(x, y)
        });
        if let Some(r) = num
            .and_then(|num| riemann_curvature(&num, &s))
            .map_err(|e| e.to_string())
            .ok()
        {
            ck.at_most("hyperbolic_ricci_at_origin_fd", (r.ric + 3.0).abs(), 1e-6);
        } else {
            ck.fail("finite-difference curvature of hyperbolic_ball failed".into());
        }
    }

    let combos: [(&str, Params, &str, Params); 10] = [
        ("flat_ball", Params::new(), "funk", params(&[("c", 0.5)])),
        ("flat_ball", Params::new(), "funk", params(&[("c", 1.0)])),
        (
            "flat_ball",
            Params::new(),
            "funk_reversible",
            params(&[("c", 0.5)]),
        ),
        ("flat_ball", Params::new(), "funk_log", Params::new()),
        (
            "hyperbolic_ball",
            Params::new(),
            "funk",
            params(&[("c", 0.5)]),
        ),
        (
            "hyperbolic_ball",
            Params::new(),
            "sphere_proj",
            Params::new(),
        ),
        (
            "klein_finsler",
            Params::new(),
            "funk",
            params(&[("c", 0.25)]),
        ),
        ("flat", Params::new(), "sphere_proj", Params::new()),
        (
            "semicircle",
            Params::new(),
            "half_plane_tilt",
            Params::new(),
        ),
        ("sphere_proj", Params::new(), "sphere_proj", Params::new()),
    ];
    let per_combo = 50 / combos.len();
    for (k, (base, bp, factor, fp)) in combos.into_iter().enumerate() {
        let key = format!("{base}+{factor}");
        let (Some(base), Some(factor)) = (
            ck.ok(&key, named_spray(base, &bp)),
            ck.ok(&key, named_factor(factor, &fp)),
        ) else {
            continue;
        };
        let domain = base.domain().intersect(factor.domain());
        for s in seeded(ck, &domain, per_combo, seed.wrapping_add(510 + k as u64)) {
            if let Some(r) = ck.ok(
                &key,
                diffops::verify_projective_ricci_relation(&base, &factor, &s),
            ) {
                ck.at_most("projective_ricci_relation", r, 1e-5);
            }
        }
    }

    if let Some(semi) = ck.ok("semicircle", named_spray("semicircle", &Params::new())) {
        for s in seeded(ck, semi.domain(), 50, seed.wrapping_add(520)) {
            if let Some(r) = ck.ok("semicircle", riemann_curvature(&semi, &s)) {
                ck.at_most("semicircle_isotropy", isotropy_decompose(&r).residual, 1e-6);
            }
        }
    }
}

fn a8_derivatives(ck: &mut Check, seed: u64) {
    for (k, sp) in catalog_sprays(ck).iter().enumerate() {
        let key = spray_key(sp);
        for s in seeded(ck, sp.domain(), 50, seed.wrapping_add(600 + k as u64)) {
            let exact = ck.ok(&key, jet_at(sp, s.x(), s.y()));
            let f = |a: &[f64], b: &[f64]| sp.eval_raw(a, b);
            let approx = ck.ok(&key, fd_jet(&f, s.x(), s.y(), FdSteps::default()));
            let (Some(exact), Some(approx)) = (exact, approx) else {
                continue;
            };
            let rel = |u: f64, v: f64| (u - v).abs() / u.abs().max(1.0);
            let mut first: f64 = 0.0;
            let mut second: f64 = 0.0;
            for i in 0..exact.g.len() {
                for m in 0..exact.grad[i].len() {
                    first = first.max(rel(exact.grad[i][m], approx.grad[i][m]));
                    for q in 0..exact.grad[i].len() {
                        second = second.max(rel(exact.hess[i][m][q], approx.hess[i][m][q]));
                    }
                }
            }
            ck.at_most(&format!("first_partials.{key}"), first, 1e-6);
            ck.at_most(&format!("second_partials.{key}"), second, 1e-6);
        }
    }
}
