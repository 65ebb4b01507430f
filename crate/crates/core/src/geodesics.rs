//! Geodesic integration, residual audits, maximal-interval probes and the
//! general-parameter function `γ(t)`.
//!
//! Geodesics solve `x' = y`, `y' = −2G(x, y)`. Residuals are reported
//! relative to `max(1, |y|², |2G|)` so that they stay meaningful when the
//! speed grows or the coefficients blow up at a boundary; for unit-speed
//! curves away from such boundaries this is the plain `|x'' + 2G(x, x')|`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SprayError};
use crate::field::SprayField;
use crate::localdiff;
use crate::ode::{self, DenseStep, OdeSettings, Stop};
use crate::state::TangentState;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSettings {
    pub atol: f64,
    pub rtol: f64,
    /// Step cap; keeps the stored samples dense enough for local differentiation.
    pub max_step: Option<f64>,
    pub residual_bound: f64,
    pub blowup_norm: f64,
    /// Integration stops once the domain clearance falls below this.
    pub boundary_clearance: f64,
    pub h_min_rel: f64,
    pub max_steps: usize,
    /// How often the run is repeated with tenfold tighter tolerances when the
    /// residual audit fails.
    pub residual_retries: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            atol: 1e-10,
            rtol: 1e-10,
            max_step: Some(0.02),
            residual_bound: 1e-8,
            blowup_norm: 1e8,
            boundary_clearance: 1e-10,
            h_min_rel: 1e-14,
            max_steps: 2_000_000,
            residual_retries: 3,
        }
    }
}

impl IntegratorSettings {
    fn ode(&self) -> OdeSettings {
        OdeSettings {
            atol: self.atol,
            rtol: self.rtol,
            max_step: self.max_step,
            h_min_rel: self.h_min_rel,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Blowup,
    DomainExit,
}

/// A sampled curve `(t, x(t), y(t))`, with continuous output when it came
/// from the integrator.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub spray_label: String,
    pub settings: IntegratorSettings,
    pub max_residual: f64,
    pub termination: Termination,
    #[serde(skip)]
    steps: Vec<DenseStep>,
}

impl Trajectory {
    /// Wraps externally produced samples; `t` must be strictly increasing.
    pub fn from_samples(label: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(SprayError::NonMonotone);
        }
        Ok(Trajectory {
            samples,
            spray_label: label.into(),
            settings: IntegratorSettings::default(),
            max_residual: f64::NAN,
            termination: Termination::Completed,
            steps: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.x.len())
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.samples[0].t, self.samples[self.samples.len() - 1].t)
    }

    pub fn has_dense_output(&self) -> bool {
        !self.steps.is_empty()
    }

    fn step_index(&self, t: f64) -> Option<usize> {
        let (lo, hi) = self.t_range();
        if t < lo || t > hi || self.steps.is_empty() {
            return None;
        }
        let idx = self.steps.partition_point(|s| s.t0.max(s.t1()) < t);
        Some(idx.min(self.steps.len() - 1))
    }

    /// Position and velocity at `t` from the continuous output.
    pub fn state_at(&self, t: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let st = &self.steps[self.step_index(t)?];
        let mut z = st.eval(st.theta(t));
        let y = z.split_off(self.dim());
        Some((z, y))
    }

    /// Velocity and acceleration at `t` from the continuous output.
    pub fn derivative_at(&self, t: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let st = &self.steps[self.step_index(t)?];
        let mut z = st.deriv(st.theta(t));
        let a = z.split_off(self.dim());
        Some((z, a))
    }

    /// `count` samples evenly spaced over `[t0, t1]`, from the continuous output.
    pub fn resample(&self, t0: f64, t1: f64, count: usize) -> Result<Vec<Sample>> {
        if count < 2 {
            return Err(SprayError::TooFewSamples {
                need: 2,
                got: count,
            });
        }
        (0..count)
            .map(|i| {
                let t = t0 + (t1 - t0) * i as f64 / (count - 1) as f64;
                let (x, y) = self.state_at(t).ok_or_else(|| {
                    SprayError::BadParams(format!("t = {t} outside the trajectory"))
                })?;
                Ok(Sample { t, x, y })
            })
            .collect()
    }

    /// Distance from `p` to the curve, minimized over the continuous output.
    pub fn distance_to_point(&self, p: &[f64]) -> f64 {
        let n = self.dim();
        let dist = |x: &[f64]| {
            x.iter()
                .zip(p)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let (j, mut best) = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| (i, dist(&s.x)))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        if self.steps.is_empty() {
            return best;
        }
        let t = self.samples[j].t;
        let k = self.step_index(t).unwrap_or(0);
        for idx in k.saturating_sub(1)..(k + 2).min(self.steps.len()) {
            let st = &self.steps[idx];
            let f = |th: f64| dist(&st.eval(th)[..n]);
            best = best.min(golden_min(f, 0.0, 1.0));
        }
        best
    }

    /// CSV with header `t,x1..xn,y1..yn` and shortest round-trip decimals.
    pub fn to_csv(&self) -> String {
        let n = self.dim();
        let mut out = String::from("t");
        for i in 1..=n {
            out.push_str(&format!(",x{i}"));
        }
        for i in 1..=n {
            out.push_str(&format!(",y{i}"));
        }
        out.push('\n');
        for s in &self.samples {
            out.push_str(&format!("{:?}", s.t));
            for v in s.x.iter().chain(&s.y) {
                out.push_str(&format!(",{v:?}"));
            }
            out.push('\n');
        }
        out
    }

    /// Euclidean arc length from the first sample to each sample.
    pub fn arc_lengths(&self) -> Vec<f64> {
        let mut acc = vec![0.0];
        for w in self.samples.windows(2) {
            let d = w[0]
                .x
                .iter()
                .zip(&w[1].x)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            acc.push(acc[acc.len() - 1] + d);
        }
        acc
    }
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    fc.min(fd).min(f(0.0)).min(f(1.0))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `|ẏ + 2G(x, y)| / max(1, |y|², |2G|)`.
fn scaled_residual(yd: &[f64], g: &[f64], y: &[f64]) -> f64 {
    let r: Vec<f64> = yd.iter().zip(g).map(|(a, b)| a + 2.0 * b).collect();
    norm(&r) / norm(y).powi(2).max(2.0 * norm(g)).max(1.0)
}

fn geodesic_rhs(spray: &SprayField) -> impl FnMut(f64, &[f64]) -> Result<Vec<f64>> + '_ {
    let n = spray.dim();
    move |_, z: &[f64]| {
        let g = spray.eval_raw(&z[..n], &z[n..])?;
        let mut out = z[n..].to_vec();
        out.extend(g.iter().map(|v| -2.0 * v));
        Ok(out)
    }
}

fn inside(spray: &SprayField) -> impl Fn(&[f64]) -> bool + '_ {
    let n = spray.dim();
    move |z: &[f64]| spray.domain().contains_raw(&z[..n], &z[n..])
}

fn check_initial(spray: &SprayField, initial: &TangentState) -> Result<()> {
    if initial.dim() != spray.dim() {
        return Err(SprayError::DimensionMismatch {
            expected: spray.dim(),
            got: initial.dim(),
        });
    }
    if !spray.domain().contains(initial) {
        return Err(SprayError::ImmediateDomainViolation);
    }
    Ok(())
}

fn integrate_once(
    spray: &SprayField,
    initial: &TangentState,
    t_end: f64,
    settings: &IntegratorSettings,
) -> Result<Trajectory> {
    let n = spray.dim();
    let z0: Vec<f64> = initial.x().iter().chain(initial.y()).copied().collect();
    let mut samples = vec![Sample {
        t: 0.0,
        x: initial.x().to_vec(),
        y: initial.y().to_vec(),
    }];
    let mut steps = Vec::new();
    let mut max_residual: f64 = 0.0;
    let mut blowup = false;
    let mut audit_error = None;
    let mut contact = false;
    let run = ode::solve(
        geodesic_rhs(spray),
        inside(spray),
        0.0,
        &z0,
        t_end,
        &settings.ode(),
        |st| {
            let mid = st.eval(0.5);
            // Steps this short only occur at a boundary; their continuous
            // derivative is dominated by roundoff and is not audited.
            let roundoff =
                8.0 * f64::EPSILON * mid.iter().fold(1.0f64, |m, v| m.max(v.abs())) / st.h.abs();
            if roundoff < 0.1 * settings.residual_bound {
                let dmid = st.deriv(0.5);
                match spray.eval_raw(&mid[..n], &mid[n..]) {
                    Ok(g) => {
                        max_residual = max_residual.max(scaled_residual(&dmid[n..], &g, &mid[n..]))
                    }
                    Err(e) => audit_error = Some(e),
                }
            }
            let mut z = st.eval(1.0);
            let y = z.split_off(n);
            blowup = norm(&y) > settings.blowup_norm;
            contact = spray.domain().clearance(&z, &y) < settings.boundary_clearance;
            samples.push(Sample {
                t: st.t1(),
                x: z,
                y,
            });
            steps.push(st.clone());
            audit_error.is_none() && !blowup && !contact
        },
    )?;
    if let Some(e) = audit_error {
        return Err(e);
    }
    let termination = match run.stop {
        Stop::Reached => Termination::Completed,
        Stop::Callback if contact => Termination::DomainExit,
        Stop::Callback => Termination::Blowup,
        Stop::MaxSteps => return Err(SprayError::StepBudget { t: run.t }),
        Stop::Underflow => {
            let last = &samples[samples.len() - 1];
            let clearance = spray.domain().clearance(&last.x, &last.y);
            if clearance < 1e-6 {
                Termination::DomainExit
            } else if norm(&last.y) > 1e-3 * settings.blowup_norm {
                Termination::Blowup
            } else {
                return Err(SprayError::StepUnderflow { t: run.t });
            }
        }
    };
    if t_end < 0.0 {
        samples.reverse();
        steps.reverse();
    }
    Ok(Trajectory {
        samples,
        spray_label: spray.label().to_string(),
        settings: *settings,
        max_residual,
        termination,
        steps,
    })
}

/// Integrates the geodesic through `initial` from `t = 0` to `t_end`
/// (negative for backwards). Stops early at blow-up or domain exit.
pub fn integrate(
    spray: &SprayField,
    initial: &TangentState,
    t_end: f64,
    settings: &IntegratorSettings,
) -> Result<Trajectory> {
    check_initial(spray, initial)?;
    if t_end == 0.0 || !t_end.is_finite() {
        return Err(SprayError::BadParams(
            "t_end must be finite and nonzero".into(),
        ));
    }
    let mut s = *settings;
    let mut traj = integrate_once(spray, initial, t_end, &s)?;
    for _ in 0..settings.residual_retries {
        if traj.max_residual <= settings.residual_bound {
            break;
        }
        s.atol *= 0.1;
        s.rtol *= 0.1;
        traj = integrate_once(spray, initial, t_end, &s)?;
    }
    if !(traj.max_residual <= settings.residual_bound) {
        return Err(SprayError::ResidualBoundExceeded {
            residual: traj.max_residual,
            bound: settings.residual_bound,
        });
    }
    Ok(traj)
}

/// Recomputes the geodesic residual of stored samples, differentiating the
/// velocity samples with 5-point stencils.
pub fn geodesic_residual(traj: &Trajectory, spray: &SprayField) -> Result<f64> {
    let t = traj.times();
    let ys: Vec<Vec<f64>> = traj.samples.iter().map(|s| s.y.clone()).collect();
    let (yd, _) = localdiff::vector_derivatives(&t, &ys)?;
    let mut worst: f64 = 0.0;
    for (s, a) in traj.samples.iter().zip(&yd) {
        let g = spray.eval(&TangentState::new(s.x.clone(), s.y.clone())?)?;
        worst = worst.max(scaled_residual(a, &g, &s.y));
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointStatus {
    Blowup,
    DomainExit,
    HorizonReached,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSettings {
    pub atol: f64,
    pub rtol: f64,
    pub horizon: f64,
    pub blowup_norm: f64,
    /// Boundary approaches `clearance ~ (T − t)^p` with a larger estimated
    /// `p` are treated as asymptotic, i.e. never reaching the boundary.
    pub max_exit_order: f64,
    /// Probing stops once the domain clearance falls below this.
    pub boundary_clearance: f64,
    pub h_min_rel: f64,
    pub max_steps: usize,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings {
            atol: 1e-10,
            rtol: 1e-10,
            horizon: 1e4,
            blowup_norm: 1e8,
            max_exit_order: 8.0,
            boundary_clearance: 1e-10,
            h_min_rel: 1e-14,
            max_steps: 2_000_000,
        }
    }
}

/// Maximal interval `(a, b)` of the geodesic through a state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntervalEstimate {
    pub a: f64,
    pub b: f64,
    pub left_status: EndpointStatus,
    pub right_status: EndpointStatus,
    /// Relative uncertainty of the finite endpoints.
    pub refinement_error: f64,
    /// Estimated vanishing orders `p` of the terminating quantity at each end.
    pub left_order: Option<f64>,
    pub right_order: Option<f64>,
}

impl IntervalEstimate {
    pub fn left_finite(&self) -> bool {
        self.left_status != EndpointStatus::HorizonReached
    }
    pub fn right_finite(&self) -> bool {
        self.right_status != EndpointStatus::HorizonReached
    }
}

struct Endpoint {
    t: f64,
    status: EndpointStatus,
    rel_error: f64,
    order: Option<f64>,
}

/// Last accepted points, as `(u, τ)` with `u = ±t` increasing and
/// `τ = q / |q̇|` for the quantity `q` that vanishes at the endpoint.
fn extrapolate(points: &[(f64, f64)], max_order: f64) -> Option<(f64, f64, f64)> {
    let k = points.len();
    if k < 3 || points.iter().any(|p| !p.1.is_finite()) {
        return None;
    }
    let mu = points.iter().map(|p| p.0).sum::<f64>() / k as f64;
    let mt = points.iter().map(|p| p.1).sum::<f64>() / k as f64;
    let sxx: f64 = points.iter().map(|p| (p.0 - mu).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let beta = points.iter().map(|p| (p.0 - mu) * (p.1 - mt)).sum::<f64>() / sxx;
    if !(beta < 0.0) {
        return None;
    }
    let order = -1.0 / beta;
    if order > max_order {
        return None;
    }
    let alpha = mt - beta * mu;
    let ss: f64 = points
        .iter()
        .map(|p| (p.1 - alpha - beta * p.0).powi(2))
        .sum();
    let dbeta = (ss / (k as f64 - 2.0).max(1.0) / sxx).sqrt();
    let (u_last, tau_last) = points[k - 1];
    let end = u_last + order * tau_last;
    let d_order = dbeta / (beta * beta);
    let rel =
        (end - u_last).abs() * d_order / order.max(1e-300) / end.abs().max(1e-300) + f64::EPSILON;
    Some((end, order, rel))
}

fn probe_direction(
    spray: &SprayField,
    initial: &TangentState,
    sign: f64,
    s: &ProbeSettings,
) -> Result<Endpoint> {
    let n = spray.dim();
    let z0: Vec<f64> = initial.x().iter().chain(initial.y()).copied().collect();
    let ode_settings = OdeSettings {
        atol: s.atol,
        rtol: s.rtol,
        max_step: None,
        h_min_rel: s.h_min_rel,
        max_steps: s.max_steps,
    };
    const KEEP: usize = 5;
    // (t, z, ż) at the ends of the last accepted steps.
    let mut tail: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
    let run = ode::solve(
        geodesic_rhs(spray),
        inside(spray),
        0.0,
        &z0,
        sign * s.horizon,
        &ode_settings,
        |st| {
            let z = st.eval(1.0);
            let zd = st.deriv(1.0);
            let blown = norm(&z[n..]) > s.blowup_norm;
            let near = spray.domain().clearance(&z[..n], &z[n..]) < s.boundary_clearance;
            if tail.len() == KEEP {
                tail.remove(0);
            }
            tail.push((st.t1(), z, zd));
            !blown && !near
        },
    )
    .map_err(|e| match e {
        SprayError::ImmediateDomainViolation => e,
        other => SprayError::ProbeFailure(other.to_string()),
    })?;

    let horizon = Endpoint {
        t: sign * s.horizon,
        status: EndpointStatus::HorizonReached,
        rel_error: 0.0,
        order: None,
    };
    let (status, points): (EndpointStatus, Vec<(f64, f64)>) = match run.stop {
        Stop::Reached => return Ok(horizon),
        Stop::MaxSteps => {
            return Err(SprayError::ProbeFailure(format!(
                "step budget exhausted at t = {}",
                run.t
            )))
        }
        Stop::Callback if norm(&tail[tail.len() - 1].1[n..]) <= s.blowup_norm => {
            let pts = tail
                .iter()
                .map(|(t, z, zd)| {
                    let (q, qd) =
                        spray
                            .domain()
                            .clearance_with_rate(&z[..n], &z[n..], &zd[..n], &zd[n..]);
                    (sign * t, q / qd.abs())
                })
                .collect();
            (EndpointStatus::DomainExit, pts)
        }
        Stop::Callback => {
            let pts = tail
                .iter()
                .map(|(t, z, zd)| {
                    let y = &z[n..];
                    let ny = norm(y);
                    let q = 1.0 / ny;
                    let qd = -y.iter().zip(&zd[n..]).map(|(a, b)| a * b).sum::<f64>() / ny.powi(3);
                    (sign * t, q / qd.abs())
                })
                .collect();
            (EndpointStatus::Blowup, pts)
        }
        Stop::Underflow => {
            let (_, z, _) = tail
                .last()
                .ok_or_else(|| SprayError::ProbeFailure("no accepted step".into()))?;
            let clearance = spray.domain().clearance(&z[..n], &z[n..]);
            let speed = norm(&z[n..]);
            if clearance < 1e-6 {
                let pts = tail
                    .iter()
                    .map(|(t, z, zd)| {
                        let (q, qd) = spray.domain().clearance_with_rate(
                            &z[..n],
                            &z[n..],
                            &zd[..n],
                            &zd[n..],
                        );
                        (sign * t, q / qd.abs())
                    })
                    .collect();
                (EndpointStatus::DomainExit, pts)
            } else if speed > 1e-3 * s.blowup_norm {
                let pts = tail
                    .iter()
                    .map(|(t, z, zd)| {
                        let y = &z[n..];
                        let ny = norm(y);
                        let qd =
                            -y.iter().zip(&zd[n..]).map(|(a, b)| a * b).sum::<f64>() / ny.powi(3);
                        (sign * t, (1.0 / ny) / qd.abs())
                    })
                    .collect();
                (EndpointStatus::Blowup, pts)
            } else {
                return Err(SprayError::ProbeFailure(format!(
                    "step size underflow away from the boundary at t = {}",
                    run.t
                )));
            }
        }
    };
    match extrapolate(&points, s.max_exit_order) {
        Some((end, order, rel)) => Ok(Endpoint {
            t: sign * end,
            status,
            rel_error: rel,
            order: Some(order),
        }),
        None => Ok(horizon),
    }
}

/// Probes both ends of the maximal interval of the geodesic through `initial`.
pub fn probe_maximal_interval(
    spray: &SprayField,
    initial: &TangentState,
    settings: &ProbeSettings,
) -> Result<IntervalEstimate> {
    check_initial(spray, initial)?;
    let right = probe_direction(spray, initial, 1.0, settings)?;
    let left = probe_direction(spray, initial, -1.0, settings)?;
    Ok(IntervalEstimate {
        a: left.t,
        b: right.t,
        left_status: left.status,
        right_status: right.status,
        refinement_error: left.rel_error.max(right.rel_error),
        left_order: left.order,
        right_order: right.order,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaReport {
    pub t: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Max over samples of `|x'' + 2G − γx'| / (1 + |x''|)`.
    pub orthogonal_residual: f64,
    /// `s'(t) = exp(∫γ)`, normalized to 1 at the first sample.
    pub s_prime: Vec<f64>,
    pub s: Vec<f64>,
    /// Max distance between the curve and the affine geodesic evaluated at `s(t)`.
    pub clock_residual: f64,
}

pub const GAMMA_TOLERANCE: f64 = 1e-5;

/// `γ(t)` with `x'' + 2G(x, x') = γ(t) x'` for a geodesic in a general parameter.
pub fn gamma_of_general_parameter(curve: &Trajectory, spray: &SprayField) -> Result<GammaReport> {
    let t = curve.times();
    let ys: Vec<Vec<f64>> = curve.samples.iter().map(|s| s.y.clone()).collect();
    let (acc, _) = localdiff::vector_derivatives(&t, &ys)?;
    let mut gamma = Vec::with_capacity(t.len());
    let mut orth: f64 = 0.0;
    for (s, a) in curve.samples.iter().zip(&acc) {
        let g = spray.eval(&TangentState::new(s.x.clone(), s.y.clone())?)?;
        let r: Vec<f64> = a.iter().zip(&g).map(|(p, q)| p + 2.0 * q).collect();
        let yy: f64 = s.y.iter().map(|v| v * v).sum();
        let gm = r.iter().zip(&s.y).map(|(p, q)| p * q).sum::<f64>() / yy;
        let perp: Vec<f64> = r.iter().zip(&s.y).map(|(p, q)| p - gm * q).collect();
        orth = orth.max(norm(&perp) / (1.0 + norm(a)));
        gamma.push(gm);
    }
    if !(orth <= GAMMA_TOLERANCE) {
        return Err(SprayError::NotAGeodesicPointSet(orth));
    }
    let log_sp = localdiff::cumulative_integral(&t, &gamma)?;
    let s_prime: Vec<f64> = log_sp.iter().map(|v| v.exp()).collect();
    let s = localdiff::cumulative_integral(&t, &s_prime)?;

    let first = &curve.samples[0];
    let start = TangentState::new(first.x.clone(), first.y.clone())?;
    let s_end = s[s.len() - 1];
    let settings = IntegratorSettings {
        residual_bound: f64::INFINITY,
        ..Default::default()
    };
    let geo = integrate(spray, &start, s_end, &settings)?;
    let mut clock: f64 = 0.0;
    for (si, smp) in s.iter().zip(&curve.samples) {
        let (x, _) = match geo.state_at(*si) {
            Some(v) => v,
            None => break,
        };
        let d: Vec<f64> = x.iter().zip(&smp.x).map(|(a, b)| a - b).collect();
        clock = clock.max(norm(&d) / (1.0 + norm(&smp.x)));
    }
    Ok(GammaReport {
        t,
        gamma,
        orthogonal_residual: orth,
        s_prime,
        s,
        clock_residual: clock,
    })
}

/// Largest distance from points of `a` to the curve `b`, over the
/// initial arc of `a` no longer than `b`.
pub fn pointset_distance(a: &Trajectory, b: &Trajectory) -> f64 {
    let la = a.arc_lengths();
    let lb = b.arc_lengths();
    let limit = lb[lb.len() - 1];
    a.samples
        .iter()
        .zip(&la)
        .filter(|(_, l)| **l <= limit)
        .map(|(s, _)| b.distance_to_point(&s.x))
        .fold(0.0, f64::max)
}
