//! Projective factors along geodesics: sampling, closed-form family
//! classification, geodesic re-clocking and factor recovery.
//!
//! Two families of closed forms are fitted. `P(s)` profiles solve
//! `P'' + 2PP' = 0`:
//!
//! ```text
//! zero          P = 0
//! constant      P = value
//! reciprocal    P = 1/(s + κ)
//! tangent       P = −c tan(cs + κ)
//! exponential   P = −c (1 − κe^{2cs}) / (1 + κe^{2cs})
//! ```
//!
//! Parameter relations `s(t)` with `s(0) = 0`, `s' > 0`:
//!
//! ```text
//! linear     s = a t                               a > 0
//! log        s = b ln(1 + a t)                     ab > 0
//! rational   s = b t / (1 + a t)                   a ≠ 0, b > 0
//! arctan     s = c [atan(a t + b) − atan b]        ac > 0
//! log_ratio  s = c ln((1 + b t) / (1 + a t))       (b − a)c > 0, ab ≠ 0
//! ```

use std::collections::BTreeMap;

use serde::Serialize;

use crate::catalog::funk;
use crate::error::{Result, SprayError};
use crate::field::ProjectiveFactor;
use crate::geodesics::Trajectory;
use crate::localdiff;
use crate::lsq::{self, LmSettings};
use crate::ode::{self, DenseStep, OdeSettings, Stop};
use crate::quadrature::{self, QuadSettings};

/// Samples `(s_i, P(x(s_i), y(s_i)))` of a factor along a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PSamples {
    pub s: Vec<f64>,
    pub p: Vec<f64>,
}

/// Evaluates the factor at every trajectory sample.
pub fn sample_p_along_geodesic(factor: &ProjectiveFactor, traj: &Trajectory) -> Result<PSamples> {
    let mut s = Vec::with_capacity(traj.samples.len());
    let mut p = Vec::with_capacity(traj.samples.len());
    for smp in &traj.samples {
        s.push(smp.t);
        p.push(factor.value_raw(&smp.x, &smp.y)?);
    }
    Ok(PSamples { s, p })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PFamily {
    Zero,
    Constant,
    Reciprocal,
    Tangent,
    Exponential,
}

impl PFamily {
    pub const ALL: [PFamily; 5] = [
        PFamily::Zero,
        PFamily::Constant,
        PFamily::Reciprocal,
        PFamily::Tangent,
        PFamily::Exponential,
    ];

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            PFamily::Zero => &[],
            PFamily::Constant => &["value"],
            PFamily::Reciprocal => &["kappa"],
            PFamily::Tangent | PFamily::Exponential => &["c", "kappa"],
        }
    }

    /// Family member at `s`; `None` at a pole.
    pub fn eval(self, p: &[f64], s: f64) -> Option<f64> {
        let v = match self {
            PFamily::Zero => 0.0,
            PFamily::Constant => p[0],
            PFamily::Reciprocal => 1.0 / (s + p[0]),
            PFamily::Tangent => -p[0] * (p[0] * s + p[1]).tan(),
            PFamily::Exponential => {
                let e = p[1] * (2.0 * p[0] * s).exp();
                -p[0] * (1.0 - e) / (1.0 + e)
            }
        };
        v.is_finite().then_some(v)
    }
}

/// Best closed-form fit of a `P(s)` profile.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PProfileFit {
    pub family: PFamily,
    pub params: BTreeMap<String, f64>,
    /// Max deviation of the fitted member from the samples.
    pub residual: f64,
    /// Max of `|P'' + 2PP'|` over the samples with a centred 5-point stencil.
    pub ode_residual: f64,
    /// Residual of every family that produced a fit.
    pub candidates: BTreeMap<String, f64>,
}

/// Residual differences below this count as ties, resolved toward fewer parameters.
pub const TIE_TOLERANCE: f64 = 1e-9;
/// Multi-start stops once a family fits the data to this relative accuracy.
const EXACT_FIT: f64 = 1e-13;
/// Fits whose residual exceeds this are treated as diverged.
pub const DIVERGED_RESIDUAL: f64 = 1e3;
pub const MIN_PROFILE_SAMPLES: usize = 20;
pub const MIN_PROFILE_SPAN: f64 = 0.5;

fn median(mut v: Vec<f64>) -> f64 {
    v.retain(|x| x.is_finite());
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn p_seeds(family: PFamily, s: &[f64], p: &[f64], k: f64) -> Vec<Vec<f64>> {
    let mid = s.len() / 2;
    let (s0, p0) = (s[mid], p[mid]);
    match family {
        PFamily::Zero => vec![vec![]],
        PFamily::Constant => vec![vec![median(p.to_vec())]],
        PFamily::Reciprocal => vec![vec![1.0 / p0 - s0]],
        PFamily::Tangent => {
            let c = (-k).abs().sqrt().max(1e-3);
            vec![vec![c, (-p0 / c).atan() - c * s0]]
        }
        PFamily::Exponential => {
            let c = k.abs().sqrt().max(1e-3);
            let mut out = Vec::new();
            for c in [c, -c] {
                let e = (2.0 * c * s0).exp();
                let kappa = -(c + p0) / ((p0 - c) * e);
                if kappa.is_finite() {
                    out.push(vec![c, kappa]);
                }
            }
            out
        }
    }
}

/// Picks the lowest residual, preferring fewer parameters (then earlier
/// families) among fits within [`TIE_TOLERANCE`] of the best.
fn select<F: Copy + Ord>(fits: &[(F, usize, Vec<f64>, f64)]) -> Option<usize> {
    let best = fits.iter().map(|f| f.3).fold(f64::INFINITY, f64::min);
    fits.iter()
        .enumerate()
        .filter(|(_, f)| f.3 <= best + TIE_TOLERANCE)
        .min_by_key(|(_, f)| (f.1, f.0))
        .map(|(i, _)| i)
}

fn named(names: &[&str], p: &[f64]) -> BTreeMap<String, f64> {
    names
        .iter()
        .zip(p)
        .map(|(k, v)| (k.to_string(), *v))
        .collect()
}

/// Fits every `P(s)` family by multi-start least squares and returns the best.
pub fn classify_p_profile(samples: &PSamples) -> Result<PProfileFit> {
    let (s, p) = (&samples.s, &samples.p);
    if s.len() != p.len() {
        return Err(SprayError::DimensionMismatch {
            expected: s.len(),
            got: p.len(),
        });
    }
    if s.len() < MIN_PROFILE_SAMPLES {
        return Err(SprayError::TooFewSamples {
            need: MIN_PROFILE_SAMPLES,
            got: s.len(),
        });
    }
    localdiff::check_grid(s)?;
    if s[s.len() - 1] - s[0] < MIN_PROFILE_SPAN {
        return Err(SprayError::BadParams(format!(
            "s-range must span at least {MIN_PROFILE_SPAN}"
        )));
    }
    let (d1, d2) = localdiff::derivatives(s, p)?;
    // Only nodes with a centred stencil; one-sided end stencils are extrapolations.
    let half = localdiff::STENCIL / 2;
    let ode_residual = (half..s.len() - half)
        .map(|i| (d2[i] + 2.0 * p[i] * d1[i]).abs())
        .fold(0.0, f64::max);
    // P' + P² is constant along solutions: 0 (reciprocal), −c² (tangent), c² (exponential).
    let k = median((0..s.len()).map(|i| d1[i] + p[i] * p[i]).collect());
    let scale = p.iter().fold(1.0f64, |a, v| a.max(v.abs()));

    let settings = LmSettings::default();
    let mut fits = Vec::new();
    let mut candidates = BTreeMap::new();
    for family in PFamily::ALL {
        let np = family.param_names().len();
        let resid = |q: &[f64]| -> Option<Vec<f64>> {
            s.iter()
                .zip(p)
                .map(|(&si, &pi)| family.eval(q, si).map(|m| m - pi))
                .collect()
        };
        let mut starts = p_seeds(family, s, p, k);
        starts.extend(lsq::grid_starts(np));
        if let Some(fit) = lsq::multi_start(resid, &starts, &settings, EXACT_FIT * scale) {
            if fit.max_abs.is_finite() {
                candidates.insert(format!("{family:?}").to_lowercase(), fit.max_abs);
                fits.push((family, np, fit.params, fit.max_abs));
            }
        }
    }
    let i = select(&fits).ok_or(SprayError::FitDiverged)?;
    let (family, _, params, residual) = fits.swap_remove(i);
    if !(residual <= DIVERGED_RESIDUAL) {
        return Err(SprayError::FitDiverged);
    }
    Ok(PProfileFit {
        family,
        params: named(family.param_names(), &params),
        residual,
        ode_residual,
        candidates,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StFamily {
    Linear,
    Log,
    Rational,
    Arctan,
    LogRatio,
}

impl StFamily {
    pub const ALL: [StFamily; 5] = [
        StFamily::Linear,
        StFamily::Log,
        StFamily::Rational,
        StFamily::Arctan,
        StFamily::LogRatio,
    ];

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            StFamily::Linear => &["a"],
            StFamily::Log | StFamily::Rational => &["a", "b"],
            StFamily::Arctan | StFamily::LogRatio => &["a", "b", "c"],
        }
    }

    /// Whether the parameters satisfy the family's sign constraints.
    pub fn admissible(self, p: &[f64]) -> bool {
        match self {
            StFamily::Linear => p[0] > 0.0,
            StFamily::Log => p[0] * p[1] > 0.0,
            StFamily::Rational => p[0] != 0.0 && p[1] > 0.0,
            StFamily::Arctan => p[0] * p[2] > 0.0,
            StFamily::LogRatio => (p[1] - p[0]) * p[2] > 0.0 && p[0] * p[1] != 0.0,
        }
    }

    /// `s(t)`, or `None` where the closed form is undefined.
    pub fn eval(self, p: &[f64], t: f64) -> Option<f64> {
        let v = match self {
            StFamily::Linear => p[0] * t,
            StFamily::Log => {
                let u = 1.0 + p[0] * t;
                if !(u > 0.0) {
                    return None;
                }
                p[1] * u.ln()
            }
            StFamily::Rational => {
                let u = 1.0 + p[0] * t;
                if !(u > 0.0) {
                    return None;
                }
                p[1] * t / u
            }
            StFamily::Arctan => p[2] * ((p[0] * t + p[1]).atan() - p[1].atan()),
            StFamily::LogRatio => {
                let (u, w) = (1.0 + p[0] * t, 1.0 + p[1] * t);
                if !(u > 0.0 && w > 0.0) {
                    return None;
                }
                p[2] * (w.ln() - u.ln())
            }
        };
        v.is_finite().then_some(v)
    }

    /// `s'(t)`.
    pub fn derivative(self, p: &[f64], t: f64) -> f64 {
        match self {
            StFamily::Linear => p[0],
            StFamily::Log => p[0] * p[1] / (1.0 + p[0] * t),
            StFamily::Rational => p[1] / (1.0 + p[0] * t).powi(2),
            StFamily::Arctan => p[2] * p[0] / (1.0 + (p[0] * t + p[1]).powi(2)),
            StFamily::LogRatio => p[2] * (p[1] - p[0]) / ((1.0 + p[0] * t) * (1.0 + p[1] * t)),
        }
    }
}

/// Sign pattern of `(a, b)` for the log-ratio family, each with its
/// admissible `t`-interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainCase {
    /// `a > 0, b > 0`: `t > −1/max(a, b)`.
    BothPositive,
    /// `a < 0, b < 0`: `t < −1/min(a, b)`.
    BothNegative,
    /// `a > 0, b < 0`: `−1/a < t < −1/b`.
    PositiveNegative,
    /// `a < 0, b > 0`: `−1/b < t < −1/a`.
    NegativePositive,
    /// Log-ratio fit outside the four sign cases.
    Unclassified,
    /// The fitted family is not the log-ratio family.
    NotApplicable,
}

/// Best closed-form fit of a parameter relation `s(t)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StRelationFit {
    pub family: StFamily,
    pub params: BTreeMap<String, f64>,
    pub residual: f64,
    /// For the log-ratio family: the sampled `t`-range lies in the interval of
    /// its sign case. Otherwise: the family's constraints and `s' > 0` hold
    /// over the sampled range.
    pub domain_ok: bool,
    pub domain_case: DomainCase,
    /// Log family with `ab > 0`, or log-ratio family with `(b − a)c > 0, ab < 0`.
    pub complete_case: bool,
    pub candidates: BTreeMap<String, f64>,
}

/// Interval of the log-ratio sign case, if classified.
pub fn log_ratio_interval(a: f64, b: f64) -> (DomainCase, Option<(f64, f64)>) {
    if a > 0.0 && b > 0.0 && a != b {
        (
            DomainCase::BothPositive,
            Some((-1.0 / a.max(b), f64::INFINITY)),
        )
    } else if a < 0.0 && b < 0.0 && a != b {
        (
            DomainCase::BothNegative,
            Some((f64::NEG_INFINITY, -1.0 / a.min(b))),
        )
    } else if a > 0.0 && b < 0.0 {
        (DomainCase::PositiveNegative, Some((-1.0 / a, -1.0 / b)))
    } else if a < 0.0 && b > 0.0 {
        (DomainCase::NegativePositive, Some((-1.0 / b, -1.0 / a)))
    } else {
        (DomainCase::Unclassified, None)
    }
}

/// Least-squares quadratic `q0 + q1 t + q2 t²` through `(t, v)`.
fn quadratic_fit(t: &[f64], v: &[f64]) -> Option<[f64; 3]> {
    let a = nalgebra::DMatrix::from_fn(t.len(), 3, |i, j| t[i].powi(j as i32));
    let b = nalgebra::DVector::from_column_slice(v);
    let sol = a.svd(true, true).solve(&b, 1e-14).ok()?;
    Some([sol[0], sol[1], sol[2]])
}

fn st_seeds(family: StFamily, q: Option<[f64; 3]>) -> Vec<Vec<f64>> {
    let Some([q0, q1, q2]) = q else {
        return Vec::new();
    };
    let mut out = Vec::new();
    match family {
        StFamily::Linear => out.push(vec![1.0 / q0]),
        StFamily::Log => out.push(vec![q1 / q0, 1.0 / q1]),
        StFamily::Rational => out.push(vec![q1 / (2.0 * q0), 1.0 / q0]),
        StFamily::Arctan => {
            let disc = 4.0 * q0 * q2 - q1 * q1;
            if disc > 0.0 && q2 != 0.0 {
                let a = 2.0 * q2.abs() / disc.sqrt();
                out.push(vec![a, q1 * a / (2.0 * q2), a / q2]);
            }
        }
        StFamily::LogRatio => {
            let (sum, prod) = (q1 / q0, q2 / q0);
            let disc = sum * sum - 4.0 * prod;
            if disc > 0.0 {
                let r = disc.sqrt();
                let (x, y) = (0.5 * (sum - r), 0.5 * (sum + r));
                out.push(vec![x, y, 1.0 / (q0 * (y - x))]);
                out.push(vec![y, x, 1.0 / (q0 * (x - y))]);
            }
        }
    }
    out.retain(|p| p.iter().all(|v| v.is_finite()));
    out
}

/// Shifts the samples so that `s(0) = 0`: onto the sample at `t = 0` if
/// there is one, else onto the first sample.
fn normalize_origin(t: &[f64], s: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let i = t.iter().position(|&v| v == 0.0);
    let (t0, s0) = match i {
        Some(i) => (0.0, s[i]),
        None => (t[0], s[0]),
    };
    (
        t.iter().map(|v| v - t0).collect(),
        s.iter().map(|v| v - s0).collect(),
    )
}

/// Fits every `s(t)` family and returns the best, with domain and
/// completeness verdicts.
pub fn fit_parameter_relation(t: &[f64], s: &[f64]) -> Result<StRelationFit> {
    if t.len() != s.len() {
        return Err(SprayError::DimensionMismatch {
            expected: t.len(),
            got: s.len(),
        });
    }
    localdiff::check_grid(t)?;
    if s.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SprayError::NonMonotone);
    }
    let (t, s) = normalize_origin(t, s);
    let (d1, _) = localdiff::derivatives(&t, &s)?;
    let inv: Vec<f64> = d1.iter().map(|v| 1.0 / v).collect();
    let q = quadratic_fit(&t, &inv);
    let scale = s.iter().fold(1.0f64, |a, v| a.max(v.abs()));

    let settings = LmSettings::default();
    let mut fits = Vec::new();
    let mut candidates = BTreeMap::new();
    for family in StFamily::ALL {
        let np = family.param_names().len();
        let resid = |p: &[f64]| -> Option<Vec<f64>> {
            if !family.admissible(p) {
                return None;
            }
            t.iter()
                .zip(&s)
                .map(|(&ti, &si)| family.eval(p, ti).map(|m| m - si))
                .collect()
        };
        let mut starts = st_seeds(family, q);
        starts.extend(lsq::grid_starts(np));
        if let Some(fit) = lsq::multi_start(resid, &starts, &settings, EXACT_FIT * scale) {
            candidates.insert(format!("{family:?}").to_lowercase(), fit.max_abs);
            fits.push((family, np, fit.params, fit.max_abs));
        }
    }
    let i = select(&fits).ok_or(SprayError::FitDiverged)?;
    let (family, _, p, residual) = fits.swap_remove(i);
    if !(residual <= DIVERGED_RESIDUAL) {
        return Err(SprayError::FitDiverged);
    }
    let (lo, hi) = (t[0], t[t.len() - 1]);
    let (domain_case, domain_ok) = if family == StFamily::LogRatio {
        match log_ratio_interval(p[0], p[1]) {
            (case, Some((l, h))) => (case, l < lo && hi < h),
            (case, None) => (case, false),
        }
    } else {
        let ok = family.admissible(&p)
            && t.iter()
                .all(|&ti| family.eval(&p, ti).is_some() && family.derivative(&p, ti) > 0.0);
        (DomainCase::NotApplicable, ok)
    };
    let complete_case = match family {
        StFamily::Log => p[0] * p[1] > 0.0,
        StFamily::LogRatio => (p[1] - p[0]) * p[2] > 0.0 && p[0] * p[1] < 0.0,
        _ => false,
    };
    Ok(StRelationFit {
        family,
        params: named(family.param_names(), &p),
        residual,
        domain_ok,
        domain_case,
        complete_case,
        candidates,
    })
}

/// Clock samples `s̄(t_i)` on the trajectory's own parameter grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClockSamples {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
}

/// Tolerances of the clock ODE in [`reclock_geodesic`].
pub const CLOCK_TOLERANCE: f64 = 1e-12;

fn clock_half(traj: &Trajectory, factor: &ProjectiveFactor, t_end: f64) -> Result<Vec<DenseStep>> {
    let settings = OdeSettings {
        atol: CLOCK_TOLERANCE,
        rtol: CLOCK_TOLERANCE,
        max_step: None,
        h_min_rel: 1e-15,
        max_steps: 1_000_000,
    };
    let mut steps = Vec::new();
    // w = ln s̄', with w' = 2P and s̄' = e^w.
    let rhs = |t: f64, z: &[f64]| -> Result<Vec<f64>> {
        let (x, y) = traj.state_at(t).ok_or_else(|| {
            SprayError::QuadratureFailure(format!("t = {t} outside the trajectory"))
        })?;
        let p = factor.value_raw(&x, &y)?;
        Ok(vec![2.0 * p, z[0].exp()])
    };
    let run = ode::solve(
        rhs,
        |z| z.iter().all(|v| v.is_finite()),
        0.0,
        &[0.0, 0.0],
        t_end,
        &settings,
        |st| {
            steps.push(st.clone());
            true
        },
    )
    .map_err(|e| SprayError::QuadratureFailure(e.to_string()))?;
    if run.stop != Stop::Reached {
        return Err(SprayError::QuadratureFailure(format!(
            "clock integration stopped at t = {}",
            run.t
        )));
    }
    Ok(steps)
}

/// Solves `s̄'' = 2P(t) s̄'` with `s̄(0) = 0`, `s̄'(0) = 1` along a
/// trajectory with continuous output and samples it at the trajectory's
/// own times. The trajectory's range must contain 0.
pub fn reclock_geodesic(base: &Trajectory, factor: &ProjectiveFactor) -> Result<ClockSamples> {
    reclock_geodesic_at(base, factor, 1.0, &base.times())
}

/// [`reclock_geodesic`] with initial slope `s̄'(0) = slope`, sampled at `times`.
pub fn reclock_geodesic_at(
    base: &Trajectory,
    factor: &ProjectiveFactor,
    slope: f64,
    times: &[f64],
) -> Result<ClockSamples> {
    if !base.has_dense_output() {
        return Err(SprayError::BadParams(
            "re-clocking needs an integrated trajectory".into(),
        ));
    }
    if !(slope > 0.0 && slope.is_finite()) {
        return Err(SprayError::BadParams(
            "initial slope must be positive".into(),
        ));
    }
    let (lo, hi) = base.t_range();
    if !(lo <= 0.0 && 0.0 <= hi) {
        return Err(SprayError::BadParams(
            "trajectory range must contain t = 0".into(),
        ));
    }
    if times.iter().any(|t| !(lo <= *t && *t <= hi)) {
        return Err(SprayError::BadParams(
            "sample times outside the trajectory".into(),
        ));
    }
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let t_min = times.iter().copied().fold(0.0, f64::min);
    let fwd = if t_max > 0.0 {
        clock_half(base, factor, t_max)?
    } else {
        Vec::new()
    };
    let bwd = if t_min < 0.0 {
        clock_half(base, factor, t_min)?
    } else {
        Vec::new()
    };
    let s = times
        .iter()
        .map(|&ti| {
            slope
                * if ti == 0.0 {
                    0.0
                } else if ti > 0.0 {
                    dense_lookup(&fwd, ti)
                } else {
                    dense_lookup(&bwd, ti)
                }
        })
        .collect();
    Ok(ClockSamples {
        t: times.to_vec(),
        s,
    })
}

/// Evaluates the clock at `t` from steps ordered away from 0.
fn dense_lookup(steps: &[DenseStep], t: f64) -> f64 {
    let i = steps.partition_point(|s| s.t1().abs() < t.abs());
    let st = &steps[i.min(steps.len() - 1)];
    st.eval(st.theta(t))[1]
}

/// `P(t) = ½ (s̄''/s̄' − s''/s')` from two clocks of the same curve.
pub fn recover_p_from_two_clocks(t: &[f64], s: &[f64], s_bar: &[f64]) -> Result<Vec<f64>> {
    if s.len() != t.len() || s_bar.len() != t.len() {
        return Err(SprayError::DimensionMismatch {
            expected: t.len(),
            got: s.len().min(s_bar.len()),
        });
    }
    localdiff::check_grid(t)?;
    for c in [s, s_bar] {
        if c.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SprayError::NonMonotone);
        }
    }
    let (d1, d2) = localdiff::derivatives(t, s)?;
    let (e1, e2) = localdiff::derivatives(t, s_bar)?;
    Ok((0..t.len())
        .map(|i| 0.5 * (e2[i] / e1[i] - d2[i] / d1[i]))
        .collect())
}

/// Chord interval `(−1/F(u,−v), 1/F(u,v))` of the unit-ball line through `u` along `v`.
pub fn chord_interval(u: &[f64], v: &[f64]) -> Result<(f64, f64)> {
    if u.len() != v.len() {
        return Err(SprayError::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    if !(u.iter().map(|a| a * a).sum::<f64>() < 1.0) || v.iter().all(|&a| a == 0.0) {
        return Err(SprayError::DomainViolation {
            label: "funk".into(),
        });
    }
    let minus: Vec<f64> = v.iter().map(|a| -a).collect();
    Ok((-1.0 / funk(u, &minus), 1.0 / funk(u, v)))
}

/// `s(t) = ∫₀ᵗ [(1 − τF(u,v))(1 + τF(u,−v))]^{−2c} dτ`.
pub fn funk_reversible_clock(u: &[f64], v: &[f64], c: f64, t: f64) -> Result<f64> {
    let (lo, hi) = chord_interval(u, v)?;
    if !(lo < t && t < hi) {
        return Err(SprayError::DomainViolation {
            label: "funk_reversible_clock".into(),
        });
    }
    if t >= 0.0 {
        clock_to_endpoint_distance(lo, hi, c, 1.0, hi - t)
    } else {
        clock_to_endpoint_distance(lo, hi, c, -1.0, t - lo)
    }
}

/// Reversible-Funk clock at distance `r` inside the right (`side = 1`) or
/// left (`side = −1`) chord endpoint. Near the endpoint the integrand is
/// evaluated in the distance variable, so no cancellation occurs.
fn clock_to_endpoint_distance(lo: f64, hi: f64, c: f64, side: f64, r: f64) -> Result<f64> {
    let (fp, fm) = (1.0 / hi, -1.0 / lo);
    let settings = QuadSettings {
        abs_tol: 1e-14,
        rel_tol: 1e-13,
        max_intervals: 20_000,
    };
    let g = |tau: f64| ((1.0 - tau * fp) * (1.0 + tau * fm)).powf(-2.0 * c);
    let end = if side > 0.0 { hi } else { lo };
    let t = end - side * r;
    let mid = if side > 0.0 {
        t.min(0.5 * hi)
    } else {
        t.max(0.5 * lo)
    };
    let inner = quadrature::integrate(g, 0.0, mid, &settings)?.value;
    let r_mid = side * (end - mid);
    if r >= r_mid {
        return Ok(inner);
    }
    // τ = end − side·ρ, dτ = −side·dρ.
    let near = |rho: f64| {
        let (dp, dm) = if side > 0.0 {
            (rho * fp, 1.0 + (hi - rho) * fm)
        } else {
            (1.0 - (lo + rho) * fp, rho * fm)
        };
        (dp * dm).powf(-2.0 * c)
    };
    let outer = quadrature::integrate(near, r, r_mid, &settings)?.value;
    Ok(inner + side * outer)
}

/// Clock values approaching both chord endpoints.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClockDivergence {
    /// Distances to the endpoint, shrinking by decades down to 1e−8.
    pub margins: Vec<f64>,
    pub right: Vec<f64>,
    pub left: Vec<f64>,
    /// Decay exponents `α` of successive increments, `Δ ∝ margin^α`;
    /// `α ≤ 0` means the increments stop shrinking.
    pub right_exponent: f64,
    pub left_exponent: f64,
    pub right_divergent: bool,
    pub left_divergent: bool,
}

/// Increments whose decay exponent is at most this count as divergent.
pub const DIVERGENCE_EXPONENT: f64 = 0.01;

fn decay_exponent(values: &[f64]) -> f64 {
    let inc: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let k = inc.len();
    (inc[k - 2] / inc[k - 1]).log10()
}

/// Evaluates the reversible-Funk clock at margins `10^−2 … 10^−8` from
/// both chord endpoints. The integral diverges at an endpoint iff the
/// increments per decade stop shrinking (`c ≥ 1/2`).
pub fn funk_reversible_clock_divergence(u: &[f64], v: &[f64], c: f64) -> Result<ClockDivergence> {
    let (lo, hi) = chord_interval(u, v)?;
    let margins: Vec<f64> = (2..=8).map(|k| 10f64.powi(-k)).collect();
    let mut right = Vec::new();
    let mut left = Vec::new();
    for &m in &margins {
        right.push(clock_to_endpoint_distance(lo, hi, c, 1.0, m * hi)?);
        left.push(clock_to_endpoint_distance(lo, hi, c, -1.0, -m * lo)?);
    }
    let right_exponent = decay_exponent(&right);
    let left_exponent = decay_exponent(&left);
    Ok(ClockDivergence {
        margins,
        right_divergent: right_exponent <= DIVERGENCE_EXPONENT,
        left_divergent: left_exponent <= DIVERGENCE_EXPONENT,
        right,
        left,
        right_exponent,
        left_exponent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{named_factor, named_spray, params};
    use crate::field::Params;
    use crate::geodesics::{integrate, IntegratorSettings};
    use crate::state::TangentState;

    fn st(x: &[f64], y: &[f64]) -> TangentState {
        TangentState::new(x.to_vec(), y.to_vec()).unwrap()
    }

    fn uniform(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn reciprocal_profile() {
        let s = uniform(0.0, 2.0, 201);
        let p = s.iter().map(|v| 1.0 / (v + 2.0)).collect();
        let fit = classify_p_profile(&PSamples { s, p }).unwrap();
        assert_eq!(fit.family, PFamily::Reciprocal);
        assert!((fit.params["kappa"] - 2.0).abs() < 1e-8);
        assert!(fit.residual <= 1e-8);
        assert!(fit.ode_residual < 1e-5);
    }

    #[test]
    fn tangent_and_exponential_profiles() {
        let s = uniform(0.0, 1.0, 50);
        let p = s.iter().map(|v| -0.7 * (0.7 * v + 0.2).tan()).collect();
        let fit = classify_p_profile(&PSamples { s: s.clone(), p }).unwrap();
        assert_eq!(fit.family, PFamily::Tangent);
        assert!(fit.residual < 1e-9);
        let p = s
            .iter()
            .map(|v| PFamily::Exponential.eval(&[1.3, 0.4], *v).unwrap())
            .collect();
        let fit = classify_p_profile(&PSamples { s, p }).unwrap();
        assert_eq!(fit.family, PFamily::Exponential);
        assert!(fit.residual < 1e-9);
    }

    #[test]
    fn zero_and_constant_ties() {
        let s = uniform(0.0, 1.0, 30);
        let fit = classify_p_profile(&PSamples {
            s: s.clone(),
            p: vec![0.0; 30],
        })
        .unwrap();
        assert_eq!(fit.family, PFamily::Zero);
        let fit = classify_p_profile(&PSamples {
            s,
            p: vec![-0.25; 30],
        })
        .unwrap();
        assert_eq!(fit.family, PFamily::Constant);
        assert!((fit.params["value"] + 0.25).abs() < 1e-12);
    }

    #[test]
    fn profile_preconditions() {
        let s = uniform(0.0, 1.0, 10);
        let r = classify_p_profile(&PSamples {
            s,
            p: vec![0.0; 10],
        });
        assert!(matches!(r, Err(SprayError::TooFewSamples { .. })));
        let s = uniform(0.0, 0.2, 30);
        assert!(classify_p_profile(&PSamples {
            s,
            p: vec![0.0; 30]
        })
        .is_err());
    }

    #[test]
    fn relation_families() {
        let t = uniform(0.0, 0.9, 80);
        let cases: [(StFamily, &[f64]); 5] = [
            (StFamily::Linear, &[3.0]),
            (StFamily::Log, &[-1.0, -1.5]),
            (StFamily::Rational, &[-0.8, 1.2]),
            (StFamily::Arctan, &[1.5, 0.3, 0.8]),
            (StFamily::LogRatio, &[-1.0, 0.5, 0.7]),
        ];
        for (family, p) in cases {
            let s: Vec<f64> = t.iter().map(|&v| family.eval(p, v).unwrap()).collect();
            let fit = fit_parameter_relation(&t, &s).unwrap();
            assert_eq!(fit.family, family, "{fit:?}");
            assert!(fit.residual <= 1e-9, "{fit:?}");
            assert!(fit.domain_ok);
        }
    }

    #[test]
    fn relation_verdicts() {
        let t = uniform(-0.5, 0.9, 120);
        let s: Vec<f64> = t.iter().map(|v| ((1.0 + v) / (1.0 - v)).ln()).collect();
        let fit = fit_parameter_relation(&t, &s).unwrap();
        assert_eq!(fit.family, StFamily::LogRatio);
        assert!(fit.complete_case && fit.domain_ok);
        assert_eq!(fit.domain_case, DomainCase::NegativePositive);

        let s: Vec<f64> = t.iter().map(|v| 2.0 * v).collect();
        let fit = fit_parameter_relation(&t, &s).unwrap();
        assert_eq!(fit.family, StFamily::Linear);
        assert!(!fit.complete_case);
        assert!((fit.params["a"] - 2.0).abs() < 1e-10);

        let mut s: Vec<f64> = t.clone();
        s[5] = s[4];
        assert_eq!(
            fit_parameter_relation(&t, &s).unwrap_err(),
            SprayError::NonMonotone
        );
    }

    #[test]
    fn log_ratio_cases() {
        assert_eq!(
            log_ratio_interval(1.0, 2.0),
            (DomainCase::BothPositive, Some((-0.5, f64::INFINITY)))
        );
        assert_eq!(
            log_ratio_interval(-1.0, -2.0),
            (DomainCase::BothNegative, Some((f64::NEG_INFINITY, 0.5)))
        );
        assert_eq!(
            log_ratio_interval(2.0, -1.0),
            (DomainCase::PositiveNegative, Some((-0.5, 1.0)))
        );
        assert_eq!(
            log_ratio_interval(-1.0, 2.0),
            (DomainCase::NegativePositive, Some((-0.5, 1.0)))
        );
        assert_eq!(log_ratio_interval(0.0, 2.0).0, DomainCase::Unclassified);
    }

    fn chord() -> Trajectory {
        let sp = named_spray("flat_ball", &Params::new()).unwrap();
        integrate(
            &sp,
            &st(&[0.0, 0.0], &[1.0, 0.0]),
            0.99,
            &IntegratorSettings::default(),
        )
        .unwrap()
    }

    #[test]
    fn clocks_on_the_chord() {
        let traj = chord();
        let zero = named_factor("zero", &Params::new()).unwrap();
        let c = reclock_geodesic(&traj, &zero).unwrap();
        assert!(c.t.iter().zip(&c.s).all(|(t, s)| (t - s).abs() < 1e-12));

        let half = named_factor("funk", &params(&[("c", 0.5)])).unwrap();
        let c = reclock_geodesic(&traj, &half).unwrap();
        for (t, s) in c.t.iter().zip(&c.s) {
            assert!((s + (1.0 - t).ln()).abs() < 1e-8, "{t} {s}");
        }
        // With s̄'(0) = 2 the clock is ln((1+t)/(1−t)); with s̄'(0) = 1 it is atanh t.
        let rev = named_factor("funk_reversible", &params(&[("c", 0.5)])).unwrap();
        let c = reclock_geodesic_at(&traj, &rev, 2.0, &traj.times()).unwrap();
        for (t, s) in c.t.iter().zip(&c.s) {
            assert!((s - ((1.0 + t) / (1.0 - t)).ln()).abs() < 1e-8, "{t} {s}");
        }
        let c = reclock_geodesic(&traj, &rev).unwrap();
        for (t, s) in c.t.iter().zip(&c.s) {
            assert!((s - t.atanh()).abs() < 1e-8, "{t} {s}");
        }
    }

    #[test]
    fn recovered_factor_matches_direct_evaluation() {
        let traj = chord();
        let rev = named_factor("funk_reversible", &params(&[("c", 0.5)])).unwrap();
        let grid = traj.resample(0.0, 0.9, 901).unwrap();
        let times: Vec<f64> = grid.iter().map(|g| g.t).collect();
        let c = reclock_geodesic_at(&traj, &rev, 1.0, &times).unwrap();
        let p = recover_p_from_two_clocks(&c.t, &c.t, &c.s).unwrap();
        for (i, smp) in grid.iter().enumerate() {
            let direct = rev.value_raw(&smp.x, &smp.y).unwrap();
            assert!(
                (p[i] - direct).abs() < 1e-4,
                "{} {} {}",
                smp.t,
                p[i],
                direct
            );
            assert!((direct - smp.t / (1.0 - smp.t * smp.t)).abs() < 1e-9);
        }
        let same = recover_p_from_two_clocks(&c.t, &c.s, &c.s).unwrap();
        assert!(same.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn reversible_clock_closed_forms() {
        let (u, v) = ([0.0, 0.0], [1.0, 0.0]);
        for t in [-0.9, -0.3, 0.2, 0.7, 0.999] {
            assert!((funk_reversible_clock(&u, &v, 0.0, t).unwrap() - t).abs() < 1e-12);
            assert!((funk_reversible_clock(&u, &v, 0.5, t).unwrap() - f64::atanh(t)).abs() < 1e-10);
            assert!((funk_reversible_clock(&u, &v, 0.25, t).unwrap() - t.asin()).abs() < 1e-10);
        }
        assert!(funk_reversible_clock(&u, &v, 0.5, 1.0).is_err());
    }

    #[test]
    fn reversible_clock_divergence() {
        let (u, v) = ([0.2, -0.1], [0.6, 0.8]);
        for c in [0.5, 0.75, 1.0] {
            let d = funk_reversible_clock_divergence(&u, &v, c).unwrap();
            assert!(d.right_divergent && d.left_divergent, "{c} {d:?}");
        }
        for c in [0.1, 0.25, 0.4] {
            let d = funk_reversible_clock_divergence(&u, &v, c).unwrap();
            assert!(!d.right_divergent && !d.left_divergent, "{c} {d:?}");
        }
    }
}
