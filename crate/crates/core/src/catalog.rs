//! Closed-form Finsler norms, sprays and projective factors.
//!
//! The Funk norm of the unit ball is the positive root `F` of
//! `|x + y/F| = 1`:
//!
//! ```text
//! F(x, y) = (<x,y> + sqrt(<x,y>² + |y|²(1 − |x|²))) / (1 − |x|²)
//! ```
//!
//! evaluated in the rationalized form `|y|² / (sqrt(..) − <x,y>)` when
//! `<x,y> < 0` to avoid cancellation.

use crate::domain::{ConicalDomain, Constraint};
use crate::dual::{dot, norm2, Real, Scalar};
use crate::error::{Result, SprayError};
use crate::field::{ClosedForm, FinslerNorm, Params, ProjectiveFactor, SprayField};
use crate::state::TangentState;

/// Funk norm of the unit ball at any scalar type.
pub fn funk<S: Real>(x: &[S], y: &[S]) -> S {
    let b = dot(x, y);
    let a = S::one() - norm2(x);
    let yy = norm2(y);
    let disc = (b * b + yy * a).sqrt();
    if b.re() >= 0.0 {
        (b + disc) / a
    } else {
        yy / (disc - b)
    }
}

fn neg<S: Real>(y: &[S]) -> Vec<S> {
    y.iter().map(|&v| -v).collect()
}

/// Funk norm of the unit ball with domain and velocity checks.
pub fn funk_metric_ball(state: &TangentState) -> Result<f64> {
    if !ConicalDomain::unit_ball(state.dim()).contains(state) {
        return Err(SprayError::DomainViolation {
            label: "funk".into(),
        });
    }
    Ok(funk(state.x(), state.y()))
}

/// Absolute residuals of the two translation identities of the Funk norm
/// along the chord `u + t v`:
/// `F(u+tv, v) = F(u,v)/(1 − tF(u,v))` and `F(u+tv, −v) = F(u,−v)/(1 + tF(u,−v))`.
pub fn verify_funk_translation_identity(u: &[f64], v: &[f64], t: f64) -> Result<(f64, f64)> {
    if u.len() != v.len() {
        return Err(SprayError::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    let ball = ConicalDomain::unit_ball(u.len());
    let p: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + t * b).collect();
    if !ball.contains_raw(u, v) || !ball.contains_raw(&p, v) {
        return Err(SprayError::DomainViolation {
            label: "funk".into(),
        });
    }
    let fwd = funk(u, v);
    let bwd = funk(u, &neg(v));
    if !(1.0 - t * fwd > 0.0) || !(1.0 + t * bwd > 0.0) {
        return Err(SprayError::DomainViolation {
            label: "funk".into(),
        });
    }
    let r1 = (funk(&p, v) - fwd / (1.0 - t * fwd)).abs();
    let r2 = (funk(&p, &neg(v)) - bwd / (1.0 + t * bwd)).abs();
    Ok((r1, r2))
}

/// Closed-form projective factors used throughout the catalog.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FactorKind {
    Zero,
    /// `c F`
    Funk {
        c: f64,
    },
    /// `c [F(y) − F(−y)]`
    FunkReversible {
        c: f64,
    },
    /// `−<x,y> / (1 + |x|²)`
    SphereProj,
    /// `−y² / x²` on the upper half plane
    HalfPlaneTilt,
    /// `F/2 + F / (2 ln(F(−y) / (F(y) + F(−y))))`
    FunkLog,
    /// Klein norm `[F(y) + F(−y)] / 2`
    Klein,
}

impl FactorKind {
    pub fn value<S: Real>(&self, x: &[S], y: &[S]) -> S {
        match *self {
            FactorKind::Zero => S::zero(),
            FactorKind::Funk { c } => funk(x, y) * c,
            FactorKind::FunkReversible { c } => (funk(x, y) - funk(x, &neg(y))) * c,
            FactorKind::SphereProj => -dot(x, y) / (norm2(x) + 1.0),
            FactorKind::HalfPlaneTilt => -y[1] / x[1],
            FactorKind::FunkLog => {
                let f = funk(x, y);
                let fm = funk(x, &neg(y));
                f * 0.5 + f / ((fm / (f + fm)).ln() * 2.0)
            }
            FactorKind::Klein => (funk(x, y) + funk(x, &neg(y))) * 0.5,
        }
    }

    fn domain(&self, n: usize) -> ConicalDomain {
        match self {
            FactorKind::Zero | FactorKind::SphereProj => ConicalDomain::whole(n),
            FactorKind::HalfPlaneTilt => ConicalDomain::upper_half_plane(),
            _ => ConicalDomain::unit_ball(n),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FactorForm {
    pub n: usize,
    pub kind: FactorKind,
}

impl ClosedForm for FactorForm {
    fn dim(&self) -> usize {
        self.n
    }
    fn out_dim(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<Vec<S>> {
        Ok(vec![self.kind.value(x, y)])
    }
}

/// `G^i = P y^i` over the flat spray.
#[derive(Clone, Copy, Debug)]
pub struct ProjectivelyFlat {
    pub n: usize,
    pub kind: FactorKind,
}

impl ClosedForm for ProjectivelyFlat {
    fn dim(&self) -> usize {
        self.n
    }
    fn out_dim(&self) -> usize {
        self.n
    }
    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<Vec<S>> {
        let p = self.kind.value(x, y);
        Ok(y.iter().map(|&v| p * v).collect())
    }
}

/// `G^i = (<x,y> y^i − |y|² x^i) / (1 − |x|²)`: circle arcs orthogonal to the unit sphere.
#[derive(Clone, Copy, Debug)]
pub struct HyperbolicBall {
    pub n: usize,
}

impl ClosedForm for HyperbolicBall {
    fn dim(&self) -> usize {
        self.n
    }
    fn out_dim(&self) -> usize {
        self.n
    }
    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<Vec<S>> {
        let xy = dot(x, y);
        let yy = norm2(y);
        let den = S::one() - norm2(x);
        Ok(x.iter()
            .zip(y)
            .map(|(&xi, &yi)| (xy * yi - yy * xi) / den)
            .collect())
    }
}

/// Semicircles centred on the `x¹` axis: `G¹ = −y¹y²/(2x²)`, `G² = (y¹)²/(2x²)`.
#[derive(Clone, Copy, Debug)]
pub struct Semicircle;

impl ClosedForm for Semicircle {
    fn dim(&self) -> usize {
        2
    }
    fn out_dim(&self) -> usize {
        2
    }
    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<Vec<S>> {
        let d = x[1] * 2.0;
        Ok(vec![-(y[0] * y[1]) / d, y[0] * y[0] / d])
    }
}

/// Semicircle spray deformed by `P = −y²/x²`.
#[derive(Clone, Copy, Debug)]
pub struct SemicircleComplete;

impl ClosedForm for SemicircleComplete {
    fn dim(&self) -> usize {
        2
    }
    fn out_dim(&self) -> usize {
        2
    }
    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<Vec<S>> {
        let d = x[1] * 2.0;
        Ok(vec![
            -(y[0] * y[1]) * 3.0 / d,
            (y[0] * y[0] - y[1] * y[1] * 2.0) / d,
        ])
    }
}

/// Every spray label known to [`named_spray`], sorted.
pub const SPRAY_LABELS: &[&str] = &[
    "flat",
    "flat_ball",
    "funk_log",
    "funk_reversible",
    "funk_scaled",
    "hyperbolic_ball",
    "klein_finsler",
    "semicircle",
    "semicircle_complete",
    "sphere_proj",
];

/// Every factor label known to [`named_factor`], sorted.
pub const FACTOR_LABELS: &[&str] = &[
    "funk",
    "funk_log",
    "funk_reversible",
    "half_plane_tilt",
    "sphere_proj",
    "zero",
];

fn take_params(label: &str, params: &Params, allowed: &[&str]) -> Result<()> {
    for k in params.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(SprayError::BadParams(format!(
                "`{label}` does not take parameter `{k}`"
            )));
        }
    }
    for (k, v) in params {
        if !v.is_finite() {
            return Err(SprayError::BadParams(format!(
                "parameter `{k}` must be finite"
            )));
        }
    }
    Ok(())
}

fn dim_param(label: &str, params: &Params) -> Result<usize> {
    let d = params.get("dim").copied().unwrap_or(2.0);
    if d.fract() != 0.0 || d < 2.0 || d > 64.0 {
        return Err(SprayError::BadParams(format!(
            "`{label}`: dim must be an integer in [2, 64]"
        )));
    }
    Ok(d as usize)
}

fn planar(label: &str, params: &Params) -> Result<()> {
    if dim_param(label, params)? != 2 {
        return Err(SprayError::BadParams(format!(
            "`{label}` is only defined for dim = 2"
        )));
    }
    Ok(())
}

/// Builds a catalog spray. Parameters: `dim` (default 2) and `c` where applicable.
pub fn named_spray(label: &str, params: &Params) -> Result<SprayField> {
    let c = params.get("c").copied();
    match label {
        "flat" | "flat_ball" => {
            take_params(label, params, &["dim"])?;
            let n = dim_param(label, params)?;
            let domain = if label == "flat" {
                ConicalDomain::whole(n)
            } else {
                ConicalDomain::unit_ball(n)
            };
            SprayField::analytic(
                label,
                params.clone(),
                domain,
                ProjectivelyFlat {
                    n,
                    kind: FactorKind::Zero,
                },
            )
        }
        "funk_scaled" | "funk_reversible" => {
            take_params(label, params, &["dim", "c"])?;
            let n = dim_param(label, params)?;
            let c =
                c.ok_or_else(|| SprayError::BadParams(format!("`{label}` needs parameter `c`")))?;
            let kind = if label == "funk_scaled" {
                FactorKind::Funk { c }
            } else {
                FactorKind::FunkReversible { c }
            };
            SprayField::analytic(
                label,
                params.clone(),
                ConicalDomain::unit_ball(n),
                ProjectivelyFlat { n, kind },
            )
        }
        "klein_finsler" => {
            take_params(label, params, &["dim"])?;
            let n = dim_param(label, params)?;
            let kind = FactorKind::FunkReversible { c: 0.5 };
            SprayField::analytic(
                label,
                params.clone(),
                ConicalDomain::unit_ball(n),
                ProjectivelyFlat { n, kind },
            )
        }
        "funk_log" => {
            take_params(label, params, &["dim"])?;
            let n = dim_param(label, params)?;
            let kind = FactorKind::FunkLog;
            SprayField::analytic(
                label,
                params.clone(),
                ConicalDomain::unit_ball(n),
                ProjectivelyFlat { n, kind },
            )
        }
        "sphere_proj" => {
            take_params(label, params, &["dim"])?;
            let n = dim_param(label, params)?;
            let kind = FactorKind::SphereProj;
            SprayField::analytic(
                label,
                params.clone(),
                ConicalDomain::whole(n),
                ProjectivelyFlat { n, kind },
            )
        }
        "hyperbolic_ball" => {
            take_params(label, params, &["dim"])?;
            let n = dim_param(label, params)?;
            SprayField::analytic(
                label,
                params.clone(),
                ConicalDomain::unit_ball(n),
                HyperbolicBall { n },
            )
        }
        "semicircle" => {
            take_params(label, params, &["dim"])?;
            planar(label, params)?;
            SprayField::analytic(
                label,
                params.clone(),
                ConicalDomain::upper_half_plane(),
                Semicircle,
            )
        }
        "semicircle_complete" => {
            take_params(label, params, &["dim"])?;
            planar(label, params)?;
            let domain = ConicalDomain::upper_half_plane()
                .with(Constraint::ExcludeDirection {
                    direction: vec![0.0, 1.0],
                })
                .with(Constraint::ExcludeDirection {
                    direction: vec![0.0, -1.0],
                });
            SprayField::analytic(label, params.clone(), domain, SemicircleComplete)
        }
        other => Err(SprayError::UnknownLabel(other.to_string())),
    }
}

/// Builds a catalog projective factor. Parameters: `dim`, and `c` (default 1) for the Funk factors.
pub fn named_factor(label: &str, params: &Params) -> Result<ProjectiveFactor> {
    let c = params.get("c").copied().unwrap_or(1.0);
    let kind = match label {
        "zero" => {
            take_params(label, params, &["dim"])?;
            FactorKind::Zero
        }
        "funk" => {
            take_params(label, params, &["dim", "c"])?;
            FactorKind::Funk { c }
        }
        "funk_reversible" => {
            take_params(label, params, &["dim", "c"])?;
            FactorKind::FunkReversible { c }
        }
        "sphere_proj" => {
            take_params(label, params, &["dim"])?;
            FactorKind::SphereProj
        }
        "funk_log" => {
            take_params(label, params, &["dim"])?;
            FactorKind::FunkLog
        }
        "half_plane_tilt" => {
            take_params(label, params, &["dim"])?;
            planar(label, params)?;
            FactorKind::HalfPlaneTilt
        }
        other => return Err(SprayError::UnknownLabel(other.to_string())),
    };
    let n = dim_param(label, params)?;
    ProjectiveFactor::analytic(label, kind.domain(n), FactorForm { n, kind })
}

/// Funk norm of the unit ball in dimension `n`.
pub fn funk_norm(n: usize) -> FinslerNorm {
    let kind = FactorKind::Funk { c: 1.0 };
    FinslerNorm::new(
        ProjectiveFactor::analytic("funk", kind.domain(n), FactorForm { n, kind })
            .expect("dims agree"),
    )
}

/// Klein norm `[F(x,y) + F(x,−y)]/2` of the unit ball.
pub fn klein_norm(n: usize) -> FinslerNorm {
    let kind = FactorKind::Klein;
    FinslerNorm::new(
        ProjectiveFactor::analytic("klein", kind.domain(n), FactorForm { n, kind })
            .expect("dims agree"),
    )
}

pub fn params(pairs: &[(&str, f64)]) -> Params {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{check_homogeneity, projective_deform};

    fn st(x: &[f64], y: &[f64]) -> TangentState {
        TangentState::new(x.to_vec(), y.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(p, q)| (p - q).abs() <= tol)
    }

    /// Bisection on `|x + y/F| = 1` in `F`, independent of the closed form.
    fn funk_by_root(x: &[f64], y: &[f64]) -> f64 {
        let g = |f: f64| {
            x.iter()
                .zip(y)
                .map(|(a, b)| (a + b / f).powi(2))
                .sum::<f64>()
                - 1.0
        };
        let (mut lo, mut hi) = (1e-9, 1e9);
        for _ in 0..300 {
            let mid = (lo * hi).sqrt();
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn funk_examples() {
        assert!((funk_metric_ball(&st(&[0.0, 0.0], &[3.0, 4.0])).unwrap() - 5.0).abs() < 1e-15);
        let f = funk_metric_ball(&st(&[0.5, 0.0], &[1.0, 0.0])).unwrap();
        assert!((f - 2.0).abs() < 1e-15);
        assert!((f - funk_by_root(&[0.5, 0.0], &[1.0, 0.0])).abs() < 1e-9);
        let f = funk_metric_ball(&st(&[0.5, 0.0], &[-1.0, 0.0])).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
        assert!((f - funk_by_root(&[0.5, 0.0], &[-1.0, 0.0])).abs() < 1e-9);
    }

    #[test]
    fn funk_rejects_outside() {
        assert!(funk_metric_ball(&st(&[1.0, 0.0], &[1.0, 0.0])).is_err());
        assert!(funk_metric_ball(&st(&[0.0, 1.2], &[1.0, 0.0])).is_err());
    }

    #[test]
    fn translation_identity_examples() {
        let (r1, r2) = verify_funk_translation_identity(&[0.0, 0.0], &[1.0, 0.0], 0.5).unwrap();
        assert!(r1 < 1e-15 && r2 < 1e-15);
        assert!((funk(&[0.5, 0.0], &[1.0, 0.0]) - 2.0).abs() < 1e-15);
        let (r1, r2) = verify_funk_translation_identity(&[0.3, -0.2], &[0.4, 0.9], 0.0).unwrap();
        assert_eq!((r1, r2), (0.0, 0.0));
        let (r1, r2) = verify_funk_translation_identity(&[0.5, 0.0], &[1.0, 0.0], 0.25).unwrap();
        assert!((funk(&[0.75, 0.0], &[1.0, 0.0]) - 4.0).abs() < 1e-12);
        assert!(r1 <= 1e-10 && r2 <= 1e-10);
        assert!(verify_funk_translation_identity(&[0.5, 0.0], &[1.0, 0.0], 0.6).is_err());
    }

    #[test]
    fn named_spray_examples() {
        let flat = named_spray("flat", &Params::new()).unwrap();
        assert_eq!(
            flat.eval(&st(&[3.0, -1.0], &[0.2, 7.0])).unwrap(),
            vec![0.0, 0.0]
        );
        let h = named_spray("hyperbolic_ball", &Params::new()).unwrap();
        let g = h.eval(&st(&[0.5, 0.0], &[0.0, 1.0])).unwrap();
        assert!(close(&g, &[-2.0 / 3.0, 0.0], 1e-15));
        let g0 = h.eval(&st(&[0.0, 0.0], &[0.3, -0.8])).unwrap();
        assert_eq!(g0, vec![0.0, 0.0]);
        let sc = named_spray("semicircle_complete", &Params::new()).unwrap();
        let g = sc.eval(&st(&[0.0, 1.0], &[1.0, 1.0])).unwrap();
        assert!(close(&g, &[-1.5, -0.5], 1e-15));
        let semi = named_spray("semicircle", &Params::new()).unwrap();
        assert!(close(
            &semi.eval(&st(&[0.0, 1.0], &[1.0, 0.0])).unwrap(),
            &[0.0, 0.5],
            1e-15
        ));
    }

    #[test]
    fn named_spray_errors() {
        assert!(matches!(
            named_spray("nope", &Params::new()),
            Err(SprayError::UnknownLabel(_))
        ));
        assert!(matches!(
            named_spray("funk_scaled", &Params::new()),
            Err(SprayError::BadParams(_))
        ));
        assert!(matches!(
            named_spray("semicircle", &params(&[("dim", 3.0)])),
            Err(SprayError::BadParams(_))
        ));
        assert!(matches!(
            named_spray("flat", &params(&[("r", 1.0)])),
            Err(SprayError::BadParams(_))
        ));
        assert!(matches!(
            named_spray("flat", &params(&[("dim", 2.5)])),
            Err(SprayError::BadParams(_))
        ));
    }

    #[test]
    fn semicircle_complete_is_the_tilted_semicircle() {
        let semi = named_spray("semicircle", &Params::new()).unwrap();
        let tilt = named_factor("half_plane_tilt", &Params::new()).unwrap();
        let d = projective_deform(&semi, &tilt).unwrap();
        let sc = named_spray("semicircle_complete", &Params::new()).unwrap();
        for (x, y) in [([0.3, 0.7], [1.0, -0.4]), ([-1.0, 2.0], [0.2, 0.9])] {
            let s = st(&x, &y);
            assert!(close(&d.eval(&s).unwrap(), &sc.eval(&s).unwrap(), 1e-14));
        }
    }

    #[test]
    fn deform_flat_ball_by_half_funk_is_funk_spray() {
        let flat = named_spray("flat_ball", &Params::new()).unwrap();
        let p = funk_norm(2).as_factor(0.5);
        let d = projective_deform(&flat, &p).unwrap();
        let s = st(&[0.2, -0.3], &[0.7, 0.1]);
        let f = funk(s.x(), s.y());
        let expect: Vec<f64> = s.y().iter().map(|v| 0.5 * f * v).collect();
        assert!(close(&d.eval(&s).unwrap(), &expect, 1e-15));
        let fs = named_spray("funk_scaled", &params(&[("c", 0.5)])).unwrap();
        assert!(close(&fs.eval(&s).unwrap(), &expect, 1e-15));
    }

    #[test]
    fn every_label_builds_and_is_homogeneous() {
        for &l in SPRAY_LABELS {
            let p = if l.starts_with("funk_s") || l == "funk_reversible" {
                params(&[("c", 0.3)])
            } else {
                Params::new()
            };
            let s = named_spray(l, &p).unwrap();
            let state = st(&[0.1, 0.4], &[0.6, -0.2]);
            let rep = check_homogeneity(&s, &[state], &[0.5, 2.0, 10.0]).unwrap();
            assert!(rep.max_deviation <= 1e-12, "{l}: {}", rep.max_deviation);
        }
        for &l in FACTOR_LABELS {
            named_factor(l, &Params::new()).unwrap();
        }
    }
}
