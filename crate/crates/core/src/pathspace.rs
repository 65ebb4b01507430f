//! Parametric curve families and the sprays they induce.
//!
//! A family is given either in path-space form `x = σ(t; p)` with
//! `2(n − 1)` parameters `p`, or in offset form
//! `x = x_o + y_o s + f(s; x_o, y_o)` with `f(0) = f'(0) = 0`.
//!
//! Path-space families induce a spray by eliminating `(c, ŝ, p)` from
//! `x = σ(ŝ; p)`, `y = c σ_t(ŝ; p)` with Newton's method and returning
//! `G = −(c²/2) σ_tt(ŝ; p)`. Offset families use the gauge `s = 0`, so
//! `x_o = x`, `y_o = y` and `G = −½ f''(0; x, y)`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::domain::{ConicalDomain, Constraint};
use crate::error::{Result, SprayError};
use crate::field::{Params, SprayField};
use crate::geodesics::{self, IntegratorSettings, ProbeSettings};
use crate::lsq::{self, LmSettings};
use crate::newton::{self, NewtonSettings};
use crate::sampling;
use crate::state::TangentState;

/// Position and first two parameter derivatives of a curve.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveJet {
    pub x: Vec<f64>,
    pub xt: Vec<f64>,
    pub xtt: Vec<f64>,
}

type CurveFn = dyn Fn(f64, &[f64]) -> Option<CurveJet> + Send + Sync;
type SeedFn = dyn Fn(&[f64], &[f64]) -> Option<Vec<f64>> + Send + Sync;
type StatePredicate = dyn Fn(&[f64], &[f64]) -> bool + Send + Sync;
type OffsetFn = dyn Fn(f64, &[f64], &[f64]) -> CurveJet + Send + Sync;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyForm {
    /// `σ(t; p)` with `2(n − 1)` parameters.
    PathSpace,
    /// `x_o + y_o s + f(s; x_o, y_o)` with `2n` parameters.
    Offset,
}

#[derive(Clone)]
enum Kind {
    PathSpace {
        curve: Arc<CurveFn>,
        seed: Option<Arc<SeedFn>>,
        straight: Option<Arc<StatePredicate>>,
    },
    Offset {
        f: Arc<OffsetFn>,
    },
}

/// A family of parameterized curves on a conical region of `TRⁿ`.
#[derive(Clone)]
pub struct PathFamily {
    name: String,
    n: usize,
    param_dim: usize,
    domain: ConicalDomain,
    kind: Kind,
}

impl std::fmt::Debug for PathFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PathFamily")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("param_dim", &self.param_dim)
            .field("form", &self.form())
            .finish()
    }
}

/// Parameters locating a state on a family curve: `x = σ(ŝ; p)`,
/// `y = c σ_t(ŝ; p)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyFit {
    pub c: f64,
    pub s_hat: f64,
    pub params: Vec<f64>,
    /// Scaled Newton residual.
    pub residual: f64,
}

/// Built-in family labels.
pub const FAMILY_LABELS: [&str; 8] = [
    "ball_arcs",
    "circles",
    "cubic2d",
    "cubic3d",
    "degenerate",
    "lines",
    "semicircles",
    "zero",
];

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn jet(x: Vec<f64>, xt: Vec<f64>, xtt: Vec<f64>) -> CurveJet {
    CurveJet { x, xt, xtt }
}

impl PathFamily {
    /// A path-space family. `seed` maps a state to an initial guess for
    /// `(c, ŝ, p)`; `straight` marks states whose family curve degenerates
    /// to a straight line traversed at constant speed.
    pub fn path_space<C>(
        name: impl Into<String>,
        n: usize,
        param_dim: usize,
        domain: ConicalDomain,
        curve: C,
        seed: Option<Arc<SeedFn>>,
        straight: Option<Arc<StatePredicate>>,
    ) -> Result<Self>
    where
        C: Fn(f64, &[f64]) -> Option<CurveJet> + Send + Sync + 'static,
    {
        if domain.dim() != n {
            return Err(SprayError::DimensionMismatch {
                expected: n,
                got: domain.dim(),
            });
        }
        if param_dim != 2 * (n - 1) {
            return Err(SprayError::ParamCountMismatch {
                expected: 2 * (n - 1),
                got: param_dim,
            });
        }
        Ok(PathFamily {
            name: name.into(),
            n,
            param_dim,
            domain,
            kind: Kind::PathSpace {
                curve: Arc::new(curve),
                seed,
                straight,
            },
        })
    }

    /// An offset family; `f` returns `f`, `f'` and `f''` at `(s; x_o, y_o)`.
    pub fn offset<F>(name: impl Into<String>, n: usize, domain: ConicalDomain, f: F) -> Result<Self>
    where
        F: Fn(f64, &[f64], &[f64]) -> CurveJet + Send + Sync + 'static,
    {
        if domain.dim() != n {
            return Err(SprayError::DimensionMismatch {
                expected: n,
                got: domain.dim(),
            });
        }
        Ok(PathFamily {
            name: name.into(),
            n,
            param_dim: 2 * n,
            domain,
            kind: Kind::Offset { f: Arc::new(f) },
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn domain(&self) -> &ConicalDomain {
        &self.domain
    }

    pub fn form(&self) -> FamilyForm {
        match self.kind {
            Kind::PathSpace { .. } => FamilyForm::PathSpace,
            Kind::Offset { .. } => FamilyForm::Offset,
        }
    }

    /// `σ`, `σ_t`, `σ_tt` at `t`; `None` outside the curve's parameter domain.
    /// Offset families take `params = (x_o, y_o)`.
    pub fn sigma(&self, t: f64, params: &[f64]) -> Option<CurveJet> {
        if params.len() != self.param_dim {
            return None;
        }
        match &self.kind {
            Kind::PathSpace { curve, .. } => curve(t, params),
            Kind::Offset { f } => {
                let (xo, yo) = params.split_at(self.n);
                let j = f(t, xo, yo);
                let x = (0..self.n).map(|i| xo[i] + yo[i] * t + j.x[i]).collect();
                let xt = (0..self.n).map(|i| yo[i] + j.xt[i]).collect();
                Some(jet(x, xt, j.xtt))
            }
        }
    }

    /// Position on the fitted curve at geodesic time `t`: `σ(ŝ + c t; p)`.
    pub fn point(&self, fit: &FamilyFit, t: f64) -> Option<Vec<f64>> {
        self.sigma(fit.s_hat + fit.c * t, &fit.params).map(|j| j.x)
    }

    /// Whether the family curve through the state is a straight line.
    pub fn is_straight_at(&self, x: &[f64], y: &[f64]) -> bool {
        match &self.kind {
            Kind::PathSpace {
                straight: Some(p), ..
            } => p(x, y),
            _ => false,
        }
    }

    // ---- built-in families ----

    /// Straight lines `(t, u + v t)` in `Rⁿ`, defined for `y¹ > 0`.
    pub fn lines(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(SprayError::BadParams("lines need dim ≥ 2".into()));
        }
        let k = n - 1;
        let domain = ConicalDomain::whole(n).with(Constraint::Custom {
            name: "y1 > 0".into(),
            clearance: Arc::new(|_: &[f64], y: &[f64]| y[0] / norm(y)),
        });
        let curve = move |t: f64, p: &[f64]| {
            let (u, v) = p.split_at(k);
            let mut x = vec![t];
            x.extend((0..k).map(|a| u[a] + v[a] * t));
            let mut xt = vec![1.0];
            xt.extend_from_slice(v);
            Some(jet(x, xt, vec![0.0; k + 1]))
        };
        let seed = move |x: &[f64], y: &[f64]| {
            if !(y[0] > 0.0) {
                return None;
            }
            let v: Vec<f64> = (1..=k).map(|a| y[a] / y[0]).collect();
            let mut z = vec![y[0], x[0]];
            z.extend((0..k).map(|a| x[a + 1] - v[a] * x[0]));
            z.extend(v);
            Some(z)
        };
        Self::path_space("lines", n, 2 * k, domain, curve, Some(Arc::new(seed)), None)
    }

    /// `(t, u + v)` in the plane: parameters enter only through their sum.
    pub fn degenerate() -> Result<Self> {
        let curve =
            |t: f64, p: &[f64]| Some(jet(vec![t, p[0] + p[1]], vec![1.0, 0.0], vec![0.0, 0.0]));
        Self::path_space(
            "degenerate",
            2,
            2,
            ConicalDomain::whole(2),
            curve,
            None,
            None,
        )
    }

    /// Circles of radius `r`: `(a + r cos t, b + r sin t)`. Only the plane
    /// carries the right parameter count; in `Rⁿ` these circles have
    /// `3n − 4` parameters.
    pub fn circles(n: usize, r: f64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(SprayError::BadParams("radius must be positive".into()));
        }
        if n != 2 {
            return Err(SprayError::ParamCountMismatch {
                expected: 2 * (n - 1),
                got: 3 * n - 4,
            });
        }
        let curve = move |t: f64, p: &[f64]| {
            let (s, c) = t.sin_cos();
            Some(jet(
                vec![p[0] + r * c, p[1] + r * s],
                vec![-r * s, r * c],
                vec![-r * c, -r * s],
            ))
        };
        let seed = move |x: &[f64], y: &[f64]| {
            let ny = norm(y);
            // Counterclockwise motion: (cos t, sin t) is ŷ turned by −90°.
            let (ct, st) = (y[1] / ny, -y[0] / ny);
            Some(vec![ny / r, st.atan2(ct), x[0] - r * ct, x[1] - r * st])
        };
        Self::path_space(
            "circles",
            2,
            2,
            ConicalDomain::whole(2),
            curve,
            Some(Arc::new(seed)),
            None,
        )
    }

    /// Semicircles centred on the `x¹`-axis in the upper half-plane:
    /// `(a + b cos t, |b| sin t)`, `t ∈ (0, π)`. The sign of `b` selects the
    /// orientation. Vertical lines are the straight limit.
    pub fn semicircles() -> Result<Self> {
        let curve = |t: f64, p: &[f64]| {
            let (a, b) = (p[0], p[1]);
            let (s, c) = t.sin_cos();
            if !(s > 0.0) || b == 0.0 {
                return None;
            }
            let m = b.abs();
            Some(jet(
                vec![a + b * c, m * s],
                vec![-b * s, m * c],
                vec![-b * c, -m * s],
            ))
        };
        let seed = |x: &[f64], y: &[f64]| {
            if y[0] == 0.0 {
                return None;
            }
            let a = x[0] + x[1] * y[1] / y[0];
            let r = (x[0] - a).hypot(x[1]);
            let b = if y[0] < 0.0 { r } else { -r };
            let t = (x[1] / r).atan2((x[0] - a) / b);
            Some(vec![norm(y) / r, t, a, b])
        };
        let straight = |_: &[f64], y: &[f64]| y[0].abs() <= 1e-10 * norm(y);
        Self::path_space(
            "semicircles",
            2,
            2,
            ConicalDomain::upper_half_plane(),
            curve,
            Some(Arc::new(seed)),
            Some(Arc::new(straight)),
        )
    }

    /// Circle arcs in the unit ball meeting the sphere orthogonally, through
    /// the endpoints `p` (reached at `t = 0`) and `q`:
    /// `σ = (p − C) cos t + ρ p sin t + C` with `C = (p + q)/(1 + ⟨p, q⟩)`
    /// and `ρ = |p − C|`. Endpoints are given by stereographic coordinates
    /// from the south pole. Diameters are the straight limit.
    pub fn ball_arcs(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(SprayError::BadParams("ball arcs need dim ≥ 2".into()));
        }
        let k = n - 1;
        let curve = move |t: f64, prm: &[f64]| {
            let p = from_stereo(&prm[..k]);
            let q = from_stereo(&prm[k..]);
            let pq = dot(&p, &q);
            if !(1.0 + pq > 0.0) {
                return None;
            }
            let tau = 1.0 / (1.0 + pq);
            let centre: Vec<f64> = p.iter().zip(&q).map(|(a, b)| tau * (a + b)).collect();
            let a: Vec<f64> = p.iter().zip(&centre).map(|(a, b)| a - b).collect();
            let rho = norm(&a);
            if !(rho > 0.0) {
                return None;
            }
            let (s, c) = t.sin_cos();
            let x = (0..n)
                .map(|i| a[i] * c + rho * p[i] * s + centre[i])
                .collect();
            let xt = (0..n).map(|i| -a[i] * s + rho * p[i] * c).collect();
            let xtt = (0..n).map(|i| -a[i] * c - rho * p[i] * s).collect();
            Some(jet(x, xt, xtt))
        };
        let seed = move |x: &[f64], y: &[f64]| {
            let ny = norm(y);
            let yh: Vec<f64> = y.iter().map(|v| v / ny).collect();
            let xy = dot(x, &yh);
            let perp: Vec<f64> = x.iter().zip(&yh).map(|(a, b)| a - xy * b).collect();
            let dp = norm(&perp);
            if !(dp > 0.0) {
                return None;
            }
            let nu: Vec<f64> = perp.iter().map(|v| v / dp).collect();
            let r = (1.0 - dot(x, x)) / (2.0 * dp);
            // Points C + r(−ν cos θ + ŷ sin θ); the unit sphere is met where
            // (dp + r) cos θ − ⟨x, ŷ⟩ sin θ = r.
            let (aa, bb) = (dp + r, -xy);
            let phi = bb.atan2(aa);
            let w = (r / aa.hypot(bb)).acos();
            let at = |th: f64| -> Vec<f64> {
                let (s, c) = th.sin_cos();
                (0..n)
                    .map(|i| x[i] + r * nu[i] - r * nu[i] * c + r * yh[i] * s)
                    .collect()
            };
            let (tp, tq) = (phi + w, phi - w);
            let mut z = vec![ny / r, -tp];
            z.extend(to_stereo(&at(tp)));
            z.extend(to_stereo(&at(tq)));
            Some(z)
        };
        let straight = |x: &[f64], y: &[f64]| {
            let ny = norm(y);
            let xy = dot(x, y) / ny;
            let perp: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - xy * b / ny).collect();
            norm(&perp) <= 1e-10
        };
        Self::path_space(
            "ball_arcs",
            n,
            2 * k,
            ConicalDomain::unit_ball(n),
            curve,
            Some(Arc::new(seed)),
            Some(Arc::new(straight)),
        )
    }

    /// The planar cubic family `(a, b) + (u, v)s − (0, 1)(u³s³/3 + a u² s²)`.
    pub fn cubic2d() -> Result<Self> {
        Self::offset("cubic2d", 2, ConicalDomain::whole(2), |s, xo, yo| {
            let (a, u) = (xo[0], yo[0]);
            let f = -(u.powi(3) * s.powi(3) / 3.0 + a * u * u * s * s);
            let fp = -(u.powi(3) * s * s + 2.0 * a * u * u * s);
            let fpp = -(2.0 * u.powi(3) * s + 2.0 * a * u * u);
            jet(vec![0.0, f], vec![0.0, fp], vec![0.0, fpp])
        })
    }

    /// The cubic family in `R³`: `(a, b, c) + (u, v, w)s − (0, 1, 0)h(s)` with
    /// `h = −(u³ + w³)s³/3 − (a u² + c w²)s²`.
    pub fn cubic3d() -> Result<Self> {
        Self::offset("cubic3d", 3, ConicalDomain::whole(3), |s, xo, yo| {
            let k3 = yo[0].powi(3) + yo[2].powi(3);
            let k2 = xo[0] * yo[0] * yo[0] + xo[2] * yo[2] * yo[2];
            let f = k3 * s.powi(3) / 3.0 + k2 * s * s;
            let fp = k3 * s * s + 2.0 * k2 * s;
            let fpp = 2.0 * k3 * s + 2.0 * k2;
            jet(vec![0.0, f, 0.0], vec![0.0, fp, 0.0], vec![0.0, fpp, 0.0])
        })
    }

    /// Straight lines as an offset family, `f ≡ 0`.
    pub fn zero_offset(n: usize) -> Result<Self> {
        Self::offset("zero", n, ConicalDomain::whole(n), move |_, _, _| {
            jet(vec![0.0; n], vec![0.0; n], vec![0.0; n])
        })
    }

    /// Built-in family by label. Parameters: `dim` (lines, ball_arcs, zero,
    /// circles; default 2) and `r` (circles; default 1).
    pub fn builtin(label: &str, params: &Params) -> Result<Self> {
        for key in params.keys() {
            let ok = matches!((label, key.as_str()), ("circles", "r") | (_, "dim"));
            if !ok {
                return Err(SprayError::BadParams(format!(
                    "family `{label}` takes no parameter `{key}`"
                )));
            }
        }
        let dim = match params.get("dim") {
            None => 2,
            Some(&d) if d >= 2.0 && d.fract() == 0.0 && d <= 16.0 => d as usize,
            Some(d) => return Err(SprayError::BadParams(format!("invalid dim {d}"))),
        };
        let fixed = |want: usize| {
            if dim == want {
                Ok(())
            } else {
                Err(SprayError::BadParams(format!(
                    "family `{label}` lives in dimension {want}"
                )))
            }
        };
        match label {
            "lines" => Self::lines(dim),
            "degenerate" => fixed(2).and_then(|_| Self::degenerate()),
            "circles" => Self::circles(dim, params.get("r").copied().unwrap_or(1.0)),
            "semicircles" => fixed(2).and_then(|_| Self::semicircles()),
            "ball_arcs" => Self::ball_arcs(dim),
            "cubic2d" => fixed(2).and_then(|_| Self::cubic2d()),
            "cubic3d" => fixed(3).and_then(|_| Self::cubic3d()),
            "zero" => Self::zero_offset(dim),
            _ => Err(SprayError::UnknownLabel(label.to_string())),
        }
    }
}

fn from_stereo(u: &[f64]) -> Vec<f64> {
    let uu = dot(u, u);
    let mut p: Vec<f64> = u.iter().map(|v| 2.0 * v / (1.0 + uu)).collect();
    p.push((1.0 - uu) / (1.0 + uu));
    p
}

fn to_stereo(p: &[f64]) -> Vec<f64> {
    let n = p.len();
    // Renormalize against drift off the sphere.
    let m = norm(p);
    p[..n - 1]
        .iter()
        .map(|v| v / m / (1.0 + p[n - 1] / m))
        .collect()
}

// ---- elimination ----

fn equations(fam: &PathFamily, x: &[f64], y: &[f64], scale: f64, z: &[f64]) -> Option<Vec<f64>> {
    let ny = norm(y);
    let j = fam.sigma(z[1], &z[2..])?;
    let mut r: Vec<f64> = j.x.iter().zip(x).map(|(a, b)| (a - b) / scale).collect();
    r.extend(j.xt.iter().zip(y).map(|(a, b)| (z[0] * a - b) / ny));
    r.iter().all(|v| v.is_finite()).then_some(r)
}

fn equations_with_jacobian(
    fam: &PathFamily,
    x: &[f64],
    y: &[f64],
    scale: f64,
    z: &[f64],
) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let n = fam.n;
    let ny = norm(y);
    let c = z[0];
    let p = &z[2..];
    let j0 = fam.sigma(z[1], p)?;
    let r = equations(fam, x, y, scale, z)?;
    let mut jac = DMatrix::zeros(2 * n, 2 + p.len());
    for i in 0..n {
        jac[(i, 1)] = j0.xt[i] / scale;
        jac[(n + i, 0)] = j0.xt[i] / ny;
        jac[(n + i, 1)] = c * j0.xtt[i] / ny;
    }
    let mut q = p.to_vec();
    for k in 0..p.len() {
        let h = 1e-6 * (1.0 + p[k].abs());
        q[k] = p[k] + h;
        let a = fam.sigma(z[1], &q)?;
        q[k] = p[k] - h;
        let b = fam.sigma(z[1], &q)?;
        q[k] = p[k];
        for i in 0..n {
            jac[(i, 2 + k)] = (a.x[i] - b.x[i]) / (2.0 * h * scale);
            jac[(n + i, 2 + k)] = c * (a.xt[i] - b.xt[i]) / (2.0 * h * ny);
        }
    }
    Some((r, jac))
}

/// Multi-start least squares over `(c, ŝ, p)` for families without a seed map.
fn fallback_seed(fam: &PathFamily, x: &[f64], y: &[f64]) -> Option<Vec<f64>> {
    let grid = [-1.0, 0.0, 1.0];
    let k = fam.param_dim.min(4);
    let mut starts = Vec::new();
    let mut combos: Vec<Vec<f64>> = vec![vec![]];
    for _ in 0..k {
        combos = combos
            .into_iter()
            .flat_map(|v| grid.iter().map(move |g| [v.clone(), vec![*g]].concat()))
            .collect();
    }
    for s in grid {
        for combo in &combos {
            let mut z = vec![norm(y), s];
            z.extend(combo);
            z.resize(2 + fam.param_dim, 0.0);
            starts.push(z);
        }
    }
    let scale = 1.0 + norm(x);
    let fit = lsq::multi_start(
        |z: &[f64]| equations(fam, x, y, scale, z),
        &starts,
        &LmSettings::default(),
        1e-10,
    )?;
    (fit.max_abs <= 1e-6 && fit.params[0] > 0.0).then_some(fit.params)
}

/// Locates a state on the family by Newton elimination of `(c, ŝ, p)`.
/// Offset families answer directly with the gauge `s = 0`.
pub fn solve_state(fam: &PathFamily, x: &[f64], y: &[f64]) -> Result<FamilyFit> {
    solve_from(fam, x, y, None)
}

fn solve_from(
    fam: &PathFamily,
    x: &[f64],
    y: &[f64],
    start: Option<Vec<f64>>,
) -> Result<FamilyFit> {
    if x.len() != fam.n || y.len() != fam.n {
        return Err(SprayError::DimensionMismatch {
            expected: fam.n,
            got: x.len(),
        });
    }
    let seed = match &fam.kind {
        Kind::Offset { .. } => {
            return Ok(FamilyFit {
                c: 1.0,
                s_hat: 0.0,
                params: [x, y].concat(),
                residual: 0.0,
            });
        }
        Kind::PathSpace { seed, .. } => seed,
    };
    let z0 = start
        .or_else(|| seed.as_ref().and_then(|s| s(x, y)))
        .or_else(|| fallback_seed(fam, x, y))
        .ok_or(SprayError::NewtonDiverged(f64::INFINITY))?;
    if z0.len() != 2 + fam.param_dim || z0.iter().any(|v| !v.is_finite()) {
        return Err(SprayError::NewtonDiverged(f64::INFINITY));
    }
    // Position equations are measured against the size of the curve, which
    // keeps nearly straight members (huge radii) well conditioned.
    let curve_size = fam
        .sigma(z0[1], &z0[2..])
        .map(|j| norm(&j.xtt))
        .unwrap_or(0.0);
    let scale = 1.0 + norm(x) + curve_size;
    let sol = newton::solve(
        |z| equations_with_jacobian(fam, x, y, scale, z),
        &z0,
        &NewtonSettings::default(),
    )?;
    if !(sol.z[0] > 0.0) {
        return Err(SprayError::NewtonDiverged(sol.residual));
    }
    Ok(FamilyFit {
        c: sol.z[0],
        s_hat: sol.z[1],
        params: sol.z[2..].to_vec(),
        residual: sol.residual,
    })
}

/// `G = −(c²/2) σ_tt(ŝ; p)` at a located state.
fn coefficients(fam: &PathFamily, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if fam.is_straight_at(x, y) {
        return Ok(vec![0.0; fam.n]);
    }
    let fit = solve_state(fam, x, y)?;
    let j = fam
        .sigma(fit.s_hat, &fit.params)
        .ok_or(SprayError::NewtonDiverged(fit.residual))?;
    Ok(j.xtt.iter().map(|v| -0.5 * fit.c * fit.c * v).collect())
}

fn label_of(fam: &PathFamily) -> String {
    format!("pathspace:{}", fam.name)
}

/// Method II: the spray whose geodesics are the family's curves.
pub fn construct_spray_method2(fam: &PathFamily) -> Result<SprayField> {
    if fam.form() != FamilyForm::PathSpace {
        return Err(SprayError::BadParams(format!(
            "family `{}` is not in path-space form",
            fam.name
        )));
    }
    let f = fam.clone();
    SprayField::numeric(
        label_of(fam),
        Params::new(),
        fam.domain.clone(),
        move |x, y| coefficients(&f, x, y),
    )
}

/// Largest cocycle residual
/// `f(s; x̂, ŷ) − [f(λs + s_o; x_o, y_o) − f(s_o) − λ f'(s_o) s]`
/// with `x̂ = x_o + y_o s_o + f(s_o)`, `ŷ = λ(y_o + f'(s_o))`, over a few `s`.
pub fn cocycle_residual(
    fam: &PathFamily,
    xo: &[f64],
    yo: &[f64],
    lambda: f64,
    so: f64,
) -> Result<f64> {
    let f = match &fam.kind {
        Kind::Offset { f } => f,
        Kind::PathSpace { .. } => {
            return Err(SprayError::BadParams(format!(
                "family `{}` is not in offset form",
                fam.name
            )));
        }
    };
    let n = fam.n;
    let at_so = f(so, xo, yo);
    let xh: Vec<f64> = (0..n).map(|i| xo[i] + yo[i] * so + at_so.x[i]).collect();
    let yh: Vec<f64> = (0..n).map(|i| lambda * (yo[i] + at_so.xt[i])).collect();
    let mut worst: f64 = 0.0;
    for s in [-0.8, -0.3, 0.2, 0.5, 1.0] {
        let lhs = f(s, &xh, &yh);
        let far = f(lambda * s + so, xo, yo);
        for i in 0..n {
            let rhs = far.x[i] - at_so.x[i] - lambda * at_so.xt[i] * s;
            let size = 1.0 + far.x[i].abs().max(at_so.x[i].abs());
            worst = worst.max((lhs.x[i] - rhs).abs() / size);
        }
    }
    Ok(worst)
}

pub const COCYCLE_TOLERANCE: f64 = 1e-9;
const COCYCLE_SAMPLES: usize = 50;
const COCYCLE_SEED: u64 = 0x5eed;

/// Method I: `G = −½ f''(0; x, y)` in the gauge `s = 0`, after checking the
/// family's cocycle identity at seeded random samples.
pub fn construct_spray_method1(fam: &PathFamily) -> Result<SprayField> {
    let f = match &fam.kind {
        Kind::Offset { f } => f.clone(),
        Kind::PathSpace { .. } => {
            return Err(SprayError::BadParams(format!(
                "family `{}` is not in offset form",
                fam.name
            )));
        }
    };
    let n = fam.n;
    let mut rng = sampling::rng(COCYCLE_SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..COCYCLE_SAMPLES {
        let xo: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let yo: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lambda = rng.random_range(0.25..2.0);
        let so = rng.random_range(-1.0..1.0);
        worst = worst.max(cocycle_residual(fam, &xo, &yo, lambda, so)?);
        let origin = f(0.0, &xo, &yo);
        worst = worst.max(norm(&origin.x)).max(norm(&origin.xt));
    }
    if !(worst <= COCYCLE_TOLERANCE) {
        return Err(SprayError::GaugeAmbiguity(worst));
    }
    SprayField::numeric(
        label_of(fam),
        Params::new(),
        fam.domain.clone(),
        move |x, y| Ok(f(0.0, x, y).xtt.iter().map(|v| -0.5 * v).collect()),
    )
}

/// Method I or II according to the family's form.
pub fn construct_spray(fam: &PathFamily) -> Result<SprayField> {
    match fam.form() {
        FamilyForm::PathSpace => construct_spray_method2(fam),
        FamilyForm::Offset => construct_spray_method1(fam),
    }
}

/// Threshold on `|det|` certifying a nondegenerate parameterization.
pub const JACOBIAN_THRESHOLD: f64 = 1e-10;

/// Determinant of `∂(x^a, y^a)/∂p` for the family written as a graph
/// `x^a = x^a(x¹; p)`, `y^a = dx^a/dx¹`, at curve parameter `t`. Offset
/// families are restricted to the slice `x_o¹ = 0`, `y_o¹ = 1` and take
/// `params = (x_o^a, y_o^a)`.
pub fn jacobian_rank_check(fam: &PathFamily, t: f64, params: &[f64]) -> Result<f64> {
    let n = fam.n;
    let k = 2 * (n - 1);
    if params.len() != k {
        return Err(SprayError::DimensionMismatch {
            expected: k,
            got: params.len(),
        });
    }
    let full = |p: &[f64]| -> Vec<f64> {
        match fam.form() {
            FamilyForm::PathSpace => p.to_vec(),
            FamilyForm::Offset => {
                let mut v = vec![0.0];
                v.extend_from_slice(&p[..n - 1]);
                v.push(1.0);
                v.extend_from_slice(&p[n - 1..]);
                v
            }
        }
    };
    let j0 = fam
        .sigma(t, &full(params))
        .ok_or(SprayError::NotGraphLike)?;
    if !(j0.xt[0].abs() > 1e-8 * norm(&j0.xt)) {
        return Err(SprayError::NotGraphLike);
    }
    let slope = |j: &CurveJet, a: usize| j.xt[a] / j.xt[0];
    let mut m = DMatrix::zeros(k, k);
    let mut q = params.to_vec();
    for col in 0..k {
        let h = 1e-6 * (1.0 + params[col].abs());
        q[col] = params[col] + h;
        let a = fam.sigma(t, &full(&q)).ok_or(SprayError::NotGraphLike)?;
        q[col] = params[col] - h;
        let b = fam.sigma(t, &full(&q)).ok_or(SprayError::NotGraphLike)?;
        q[col] = params[col];
        let d1p = (a.x[0] - b.x[0]) / (2.0 * h);
        // Parameter change of t that keeps x¹ fixed.
        let dt = -d1p / j0.xt[0];
        for i in 1..n {
            let dxp = (a.x[i] - b.x[i]) / (2.0 * h);
            m[(i - 1, col)] = dxp + j0.xt[i] * dt;
            let dyp = (slope(&a, i) - slope(&b, i)) / (2.0 * h);
            let dyt = (j0.xtt[i] * j0.xt[0] - j0.xt[i] * j0.xtt[0]) / (j0.xt[0] * j0.xt[0]);
            m[(n - 2 + i, col)] = dyp + dyt * dt;
        }
    }
    Ok(m.determinant())
}

#[derive(Clone, Debug, Serialize)]
pub struct AxiomsReport {
    pub family: String,
    pub states: usize,
    /// States on the straight limit, not eliminated.
    pub straight_states: usize,
    pub existence_failures: usize,
    /// Largest distance between curves solved from the seed and from a perturbed seed.
    pub uniqueness_deviation: f64,
    pub closure_samples: usize,
    pub closure_deviation: f64,
    pub passed: bool,
}

pub const AXIOM_TOLERANCE: f64 = 1e-8;

fn curve_gap(fam: &PathFamily, a: &FamilyFit, b: &FamilyFit, times: &[f64]) -> f64 {
    times
        .iter()
        .map(|&t| match (fam.point(a, t), fam.point(b, t)) {
            (Some(p), Some(q)) => p
                .iter()
                .zip(&q)
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f64::max),
            _ => f64::INFINITY,
        })
        .fold(0.0, f64::max)
}

/// Sampled check of existence, local uniqueness and closure under affine
/// reparameterization `t ↦ λt + t_o`.
pub fn axioms_check(
    fam: &PathFamily,
    states: &[TangentState],
    closure: &[(f64, f64)],
) -> Result<AxiomsReport> {
    let mut report = AxiomsReport {
        family: fam.name.clone(),
        states: states.len(),
        straight_states: 0,
        existence_failures: 0,
        uniqueness_deviation: 0.0,
        closure_samples: 0,
        closure_deviation: 0.0,
        passed: false,
    };
    let local: Vec<f64> = (0..5).map(|i| -0.02 + 0.01 * i as f64).collect();
    for s in states {
        let (x, y) = (s.x(), s.y());
        if fam.is_straight_at(x, y) {
            report.straight_states += 1;
            continue;
        }
        let fit = match solve_state(fam, x, y) {
            Ok(f) => f,
            Err(_) => {
                report.existence_failures += 1;
                continue;
            }
        };
        if fam.form() == FamilyForm::PathSpace {
            let mut z: Vec<f64> = vec![fit.c, fit.s_hat];
            z.extend(&fit.params);
            let perturbed: Vec<f64> = z
                .iter()
                .enumerate()
                .map(|(i, v)| v + 1e-3 * (1.0 + v.abs()) * if i % 2 == 0 { 1.0 } else { -1.0 })
                .collect();
            let dev = match solve_from(fam, x, y, Some(perturbed)) {
                Ok(other) => curve_gap(fam, &fit, &other, &local),
                Err(_) => f64::INFINITY,
            };
            report.uniqueness_deviation = report.uniqueness_deviation.max(dev);
        }
        for &(lambda, t0) in closure {
            // The reparameterized curve η(t) = σ(λt + t_o) starts at
            // (σ(t_o), λ σ'(t_o)); the family member through that state must
            // trace η.
            let x0 = fam.point(&fit, t0).ok_or(SprayError::ClosureFailure {
                lambda,
                t0,
                deviation: f64::INFINITY,
            })?;
            let j = fam
                .sigma(fit.s_hat + fit.c * t0, &fit.params)
                .expect("point exists");
            let y0: Vec<f64> = j.xt.iter().map(|v| lambda * fit.c * v).collect();
            let fail = |deviation: f64| SprayError::ClosureFailure {
                lambda,
                t0,
                deviation,
            };
            if !fam.domain.contains_raw(&x0, &y0) {
                continue;
            }
            let other = solve_state(fam, &x0, &y0).map_err(|_| fail(f64::INFINITY))?;
            let span = 0.1 / lambda.max(1.0);
            let mut dev: f64 = 0.0;
            for i in 0..10 {
                let t = -span + 2.0 * span * i as f64 / 9.0;
                let (p, q) = match (fam.point(&fit, lambda * t + t0), fam.point(&other, t)) {
                    (Some(p), Some(q)) => (p, q),
                    _ => return Err(fail(f64::INFINITY)),
                };
                dev = dev.max(
                    p.iter()
                        .zip(&q)
                        .map(|(u, v)| (u - v).abs())
                        .fold(0.0, f64::max),
                );
            }
            report.closure_samples += 1;
            report.closure_deviation = report.closure_deviation.max(dev);
            if !(dev <= AXIOM_TOLERANCE) {
                return Err(fail(dev));
            }
        }
    }
    report.passed =
        report.existence_failures == 0 && report.uniqueness_deviation <= AXIOM_TOLERANCE;
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RoundtripSettings {
    /// Largest half-length of the compared time window.
    pub t_cap: f64,
    pub integrator: IntegratorSettings,
    pub probe: ProbeSettings,
}

impl Default for RoundtripSettings {
    fn default() -> Self {
        RoundtripSettings {
            t_cap: 2.0,
            integrator: IntegratorSettings::default(),
            probe: ProbeSettings::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RoundtripEntry {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub interval: (f64, f64),
    pub window: (f64, f64),
    /// `None` for states on the straight limit, compared with `x + y t`.
    pub fit: Option<FamilyFit>,
    pub max_distance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RoundtripReport {
    pub family: String,
    pub entries: Vec<RoundtripEntry>,
    pub max_distance: f64,
}

pub const ROUNDTRIP_TOLERANCE: f64 = 1e-6;

/// Integrates the spray from each initial state over half the probed
/// interval (capped at `t_cap` each way) and measures the distance to the
/// family curve `σ(ŝ + c t; p)` through the same state.
pub fn roundtrip_check(
    fam: &PathFamily,
    spray: &SprayField,
    initials: &[TangentState],
    settings: &RoundtripSettings,
) -> Result<RoundtripReport> {
    let probe = ProbeSettings {
        horizon: 2.0 * settings.t_cap,
        ..settings.probe
    };
    let mut entries = Vec::with_capacity(initials.len());
    for s in initials {
        let iv = geodesics::probe_maximal_interval(spray, s, &probe)?;
        let hi = (0.5 * iv.b).min(settings.t_cap);
        let lo = (0.5 * iv.a).max(-settings.t_cap);
        let fit = if fam.is_straight_at(s.x(), s.y()) {
            None
        } else {
            Some(solve_state(fam, s.x(), s.y())?)
        };
        let mut worst: f64 = 0.0;
        for end in [lo, hi] {
            if end == 0.0 {
                continue;
            }
            let traj = geodesics::integrate(spray, s, end, &settings.integrator)?;
            for smp in &traj.samples {
                let target = match &fit {
                    Some(f) => fam
                        .point(f, smp.t)
                        .ok_or(SprayError::NewtonDiverged(f.residual))?,
                    None => s
                        .x()
                        .iter()
                        .zip(s.y())
                        .map(|(a, b)| a + b * smp.t)
                        .collect(),
                };
                let d: Vec<f64> = smp.x.iter().zip(&target).map(|(a, b)| a - b).collect();
                worst = worst.max(norm(&d));
            }
        }
        entries.push(RoundtripEntry {
            x: s.x().to_vec(),
            y: s.y().to_vec(),
            interval: (iv.a, iv.b),
            window: (lo, hi),
            fit,
            max_distance: worst,
        });
    }
    let max_distance = entries.iter().map(|e| e.max_distance).fold(0.0, f64::max);
    Ok(RoundtripReport {
        family: fam.name.clone(),
        entries,
        max_distance,
    })
}
