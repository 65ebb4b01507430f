//! Berwald connection, Riemann and Ricci curvature, horizontal derivatives
//! along the spray, and the isotropy decomposition.
//!
//! Closed-form fields are differentiated by nested dual numbers. Fields
//! that only evaluate in `f64` fall back to Richardson finite differences.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dual::{Dual, Real, Scalar, D1};
use crate::error::{Result, SprayError};
use crate::fd::{fd_jet, FdSteps};
use crate::field::{projective_deform, ProjectiveFactor, SprayField};
use crate::state::TangentState;

/// Value, gradient and Hessian of `G` in `z = (x, y)`.
///
/// `grad[i][m] = ∂G^i/∂z^m`, `hess[i][p][q] = ∂²G^i/∂z^p∂z^q`, with
/// `z^m = x^m` for `m < n` and `z^{n+k} = y^k`.
#[derive(Clone, Debug)]
pub struct Jet<T> {
    pub g: Vec<T>,
    pub grad: Vec<Vec<T>>,
    pub hess: Vec<Vec<Vec<T>>>,
}

impl<T: Copy> Jet<T> {
    pub fn dim(&self) -> usize {
        self.g.len()
    }
    /// `∂G^i/∂x^k`
    pub fn gx(&self, i: usize, k: usize) -> T {
        self.grad[i][k]
    }
    /// `∂G^i/∂y^k`
    pub fn gy(&self, i: usize, k: usize) -> T {
        self.grad[i][self.dim() + k]
    }
    /// `∂²G^i/∂y^j∂y^k`
    pub fn gyy(&self, i: usize, j: usize, k: usize) -> T {
        let n = self.dim();
        self.hess[i][n + j][n + k]
    }
    /// `∂²G^i/∂x^j∂y^k`
    pub fn gxy(&self, i: usize, j: usize, k: usize) -> T {
        self.hess[i][j][self.dim() + k]
    }
}

/// Exact jet by nested duals; `T = f64` uses second-order duals, `T = D1`
/// third-order ones.
pub fn jet_at<T>(spray: &SprayField, x: &[T], y: &[T]) -> Result<Jet<T>>
where
    T: Real,
    Dual<Dual<T>>: Scalar,
{
    let n = x.len();
    let dim = 2 * n;
    let z: Vec<T> = x.iter().chain(y).copied().collect();
    let mut g = Vec::new();
    let mut grad = vec![vec![T::zero(); dim]; n];
    let mut hess = vec![vec![vec![T::zero(); dim]; dim]; n];
    for p in 0..dim {
        for q in p..dim {
            let w: Vec<Dual<Dual<T>>> = z
                .iter()
                .enumerate()
                .map(|(m, &v)| {
                    let inner = Dual::new(v, if m == q { T::one() } else { T::zero() });
                    let outer = Dual::new(if m == p { T::one() } else { T::zero() }, T::zero());
                    Dual::new(inner, outer)
                })
                .collect();
            let out = spray.eval_at(&w[..n], &w[n..])?;
            for i in 0..n {
                let o = out[i];
                if g.len() < n {
                    g.push(o.re.re);
                }
                if p == q {
                    grad[i][p] = o.re.eps;
                }
                hess[i][p][q] = o.eps.eps;
                hess[i][q][p] = o.eps.eps;
            }
        }
    }
    Ok(Jet { g, grad, hess })
}

fn check_state(spray: &SprayField, s: &TangentState) -> Result<()> {
    if s.dim() != spray.dim() {
        return Err(SprayError::DimensionMismatch {
            expected: spray.dim(),
            got: s.dim(),
        });
    }
    if !spray.domain().contains(s) {
        return Err(SprayError::DomainViolation {
            label: spray.label().to_string(),
        });
    }
    Ok(())
}

/// Jet at a state: exact for closed-form fields, finite differences otherwise.
pub fn spray_jet(spray: &SprayField, s: &TangentState) -> Result<Jet<f64>> {
    check_state(spray, s)?;
    if spray.is_exact() {
        jet_at(spray, s.x(), s.y())
    } else {
        fd_jet(
            &|x: &[f64], y: &[f64]| spray.eval_raw(x, y),
            s.x(),
            s.y(),
            FdSteps::default(),
        )
    }
}

/// Nonlinear connection `N^i_j = ∂G^i/∂y^j` and Berwald coefficients
/// `G^i_{jk} = ∂²G^i/∂y^j∂y^k`.
#[derive(Clone, Debug, Serialize)]
pub struct BerwaldData {
    pub n_conn: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<Vec<f64>>>,
}

impl BerwaldData {
    /// Largest violation of `N^i_j y^j = 2G^i` and `G^i_{jk} y^k = N^i_j`,
    /// relative to `1 + |rhs|`.
    pub fn euler_residual(&self, g: &[f64], y: &[f64]) -> f64 {
        let n = y.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let lhs: f64 = (0..n).map(|j| self.n_conn[i][j] * y[j]).sum();
            worst = worst.max((lhs - 2.0 * g[i]).abs() / (1.0 + (2.0 * g[i]).abs()));
            for j in 0..n {
                let lhs: f64 = (0..n).map(|k| self.gamma[i][j][k] * y[k]).sum();
                worst =
                    worst.max((lhs - self.n_conn[i][j]).abs() / (1.0 + self.n_conn[i][j].abs()));
            }
        }
        worst
    }
}

pub fn berwald_data(spray: &SprayField, state: &TangentState) -> Result<BerwaldData> {
    let j = spray_jet(spray, state)?;
    let n = state.dim();
    let n_conn = (0..n)
        .map(|i| (0..n).map(|k| j.gy(i, k)).collect())
        .collect();
    let gamma = (0..n)
        .map(|i| {
            (0..n)
                .map(|a| (0..n).map(|b| j.gyy(i, a, b)).collect())
                .collect()
        })
        .collect();
    Ok(BerwaldData { n_conn, gamma })
}

/// `R^i_k = 2∂_kG^i − y^j ∂_j∂̇_kG^i + 2G^j ∂̇_j∂̇_kG^i − ∂̇_jG^i ∂̇_kG^j`,
/// together with the sum of absolute term sizes.
pub fn riemann_from_jet<T: Real>(j: &Jet<T>, y: &[T]) -> (Vec<Vec<T>>, f64) {
    let n = y.len();
    let mut r = vec![vec![T::zero(); n]; n];
    let mut scale = 0.0;
    for i in 0..n {
        for k in 0..n {
            let mut acc = j.gx(i, k) * 2.0;
            scale += acc.re().abs();
            for m in 0..n {
                let t1 = y[m] * j.gxy(i, m, k);
                let t2 = j.g[m] * j.gyy(i, m, k) * 2.0;
                let t3 = j.gy(i, m) * j.gy(m, k);
                scale += t1.re().abs() + t2.re().abs() + t3.re().abs();
                acc = acc - t1 + t2 - t3;
            }
            r[i][k] = acc;
        }
    }
    (r, scale)
}

fn trace<T: Real>(r: &[Vec<T>]) -> T {
    (0..r.len()).fold(T::zero(), |acc, i| acc + r[i][i])
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvatureReport {
    /// `r[i][k] = R^i_k`
    pub r: Vec<Vec<f64>>,
    pub ric: f64,
    pub state: TangentState,
    pub scheme_error: f64,
}

/// Tolerated differentiation error for curvature.
pub const CURVATURE_ERROR_BOUND: f64 = 1e-5;
/// Tolerated differentiation error for horizontal derivatives of `Ric`.
pub const HORIZONTAL_ERROR_BOUND: f64 = 1e-4;

pub fn riemann_curvature(spray: &SprayField, state: &TangentState) -> Result<CurvatureReport> {
    check_state(spray, state)?;
    let (r, scheme_error) = if spray.is_exact() {
        let j = jet_at(spray, state.x(), state.y())?;
        let (r, scale) = riemann_from_jet(&j, state.y());
        (r, 64.0 * f64::EPSILON * scale)
    } else {
        let f = |x: &[f64], y: &[f64]| spray.eval_raw(x, y);
        let steps = FdSteps::default();
        let coarse = FdSteps {
            first: 2.0 * steps.first,
            second: 2.0 * steps.second,
        };
        let (r, _) = riemann_from_jet(&fd_jet(&f, state.x(), state.y(), steps)?, state.y());
        let (r2, _) = riemann_from_jet(&fd_jet(&f, state.x(), state.y(), coarse)?, state.y());
        let err = r
            .iter()
            .flatten()
            .zip(r2.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        (r, err)
    };
    if !(scheme_error <= CURVATURE_ERROR_BOUND) {
        return Err(SprayError::DifferentiationFailure(format!(
            "curvature error estimate {scheme_error:e} exceeds {CURVATURE_ERROR_BOUND:e}"
        )));
    }
    let ric = trace(&r);
    Ok(CurvatureReport {
        r,
        ric,
        state: state.clone(),
        scheme_error,
    })
}

/// `x + εy`, `y − 2εG(x,y)` as first-order duals: the spray flow direction.
fn flow_seed(spray: &SprayField, s: &TangentState) -> Result<(Vec<D1>, Vec<D1>)> {
    let g = spray.eval_raw(s.x(), s.y())?;
    let x = s
        .x()
        .iter()
        .zip(s.y())
        .map(|(&a, &b)| D1::new(a, b))
        .collect();
    let y = s
        .y()
        .iter()
        .zip(&g)
        .map(|(&a, &b)| D1::new(a, -2.0 * b))
        .collect();
    Ok((x, y))
}

/// `Ric_{;0} = y^j(∂_j Ric − N^m_j ∂̇_m Ric)`, the derivative of `Ric` along the spray.
pub fn ricci_horizontal_derivative(spray: &SprayField, state: &TangentState) -> Result<f64> {
    check_state(spray, state)?;
    if spray.is_exact() {
        let (x, y) = flow_seed(spray, state)?;
        let j = jet_at(spray, &x, &y)?;
        let (r, _) = riemann_from_jet(&j, &y);
        return Ok(trace(&r).eps);
    }
    // Central difference of Ric along the flow; two step sizes give an error estimate.
    let g = spray.eval(state)?;
    let ric_at = |e: f64| -> Result<f64> {
        let x: Vec<f64> = state
            .x()
            .iter()
            .zip(state.y())
            .map(|(a, b)| a + e * b)
            .collect();
        let y: Vec<f64> = state
            .y()
            .iter()
            .zip(&g)
            .map(|(a, b)| a - 2.0 * e * b)
            .collect();
        Ok(riemann_curvature(spray, &TangentState::new(x, y)?)?.ric)
    };
    let h = 1e-3 / state.speed();
    let d1 = (ric_at(h)? - ric_at(-h)?) / (2.0 * h);
    let d2 = (ric_at(2.0 * h)? - ric_at(-2.0 * h)?) / (4.0 * h);
    let err = (d1 - d2).abs();
    if !(err <= HORIZONTAL_ERROR_BOUND) {
        return Err(SprayError::DifferentiationFailure(format!(
            "Ric_;0 error estimate {err:e} exceeds {HORIZONTAL_ERROR_BOUND:e}"
        )));
    }
    Ok((4.0 * d1 - d2) / 3.0)
}

/// `P_{;0} = y^j(∂_j P − N^m_j ∂̇_m P)` using the connection of `base`.
pub fn factor_horizontal_derivative(
    base: &SprayField,
    factor: &ProjectiveFactor,
    state: &TangentState,
) -> Result<f64> {
    if factor.is_exact() {
        let (x, y) = flow_seed(base, state)?;
        return Ok(factor.value_at(&x, &y)?.eps);
    }
    let g = base.eval_raw(state.x(), state.y())?;
    let p = |e: f64| {
        let x: Vec<f64> = state
            .x()
            .iter()
            .zip(state.y())
            .map(|(a, b)| a + e * b)
            .collect();
        let y: Vec<f64> = state
            .y()
            .iter()
            .zip(&g)
            .map(|(a, b)| a - 2.0 * e * b)
            .collect();
        factor.value_raw(&x, &y).unwrap_or(f64::NAN)
    };
    let d = crate::fd::derivative(p, 1e-4 / state.speed());
    if d.is_finite() {
        Ok(d)
    } else {
        Err(SprayError::DifferentiationFailure(
            "factor undefined near state".into(),
        ))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WeakRicciReport {
    pub max_abs: f64,
    pub worst_state: Option<usize>,
    pub threshold: f64,
    pub weakly_ricci_constant: bool,
}

/// Default certification threshold on `|Ric_{;0}|` at unit-speed states.
pub const WEAK_RICCI_THRESHOLD: f64 = 1e-5;

/// Sampled test of `Ric_{;0} = 0`, with every velocity normalized to unit length.
pub fn is_weakly_ricci_constant(
    spray: &SprayField,
    states: &[TangentState],
    threshold: f64,
) -> Result<WeakRicciReport> {
    let mut rep = WeakRicciReport {
        max_abs: 0.0,
        worst_state: None,
        threshold,
        weakly_ricci_constant: true,
    };
    for (i, s) in states.iter().enumerate() {
        let v = ricci_horizontal_derivative(spray, &s.normalized())?.abs();
        if v >= rep.max_abs {
            rep.max_abs = v;
            rep.worst_state = Some(i);
        }
    }
    rep.weakly_ricci_constant = rep.max_abs <= threshold;
    Ok(rep)
}

/// Least-squares fit of `R^i_k ≈ R δ^i_k − τ_k y^i`.
#[derive(Clone, Debug, Serialize)]
pub struct IsotropyFit {
    pub r_scalar: f64,
    pub tau: Vec<f64>,
    /// Max-norm misfit at unit speed.
    pub residual: f64,
}

pub fn isotropy_decompose(report: &CurvatureReport) -> IsotropyFit {
    let n = report.state.dim();
    let speed = report.state.speed();
    let y: Vec<f64> = report.state.y().iter().map(|v| v / speed).collect();
    let s2 = speed * speed;
    // Unknowns (R, τ_0..τ_{n-1}); one equation per entry (i, k).
    let mut a = DMatrix::<f64>::zeros(n * n, n + 1);
    let mut b = DVector::<f64>::zeros(n * n);
    for i in 0..n {
        for k in 0..n {
            let row = i * n + k;
            if i == k {
                a[(row, 0)] = 1.0;
            }
            a[(row, 1 + k)] = -y[i];
            b[row] = report.r[i][k] / s2;
        }
    }
    let sol = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-14)
        .unwrap_or_else(|_| DVector::zeros(n + 1));
    let misfit = &a * &sol - &b;
    let residual = misfit.amax();
    IsotropyFit {
        r_scalar: sol[0] * s2,
        tau: (0..n).map(|k| sol[1 + k] * speed).collect(),
        residual,
    }
}

/// Terms of the Ricci relation for a projective deformation.
#[derive(Clone, Debug, Serialize)]
pub struct ProjectiveRicciCheck {
    pub ric_base: f64,
    pub ric_deformed: f64,
    pub p: f64,
    pub p_horizontal: f64,
    pub residual: f64,
}

/// `|R̄ic − [Ric − (n−1)(P_{;0} − P²)]|` for `Ḡ = G + P y`.
pub fn projective_ricci_check(
    base: &SprayField,
    factor: &ProjectiveFactor,
    state: &TangentState,
) -> Result<ProjectiveRicciCheck> {
    let deformed = projective_deform(base, factor)?;
    let ric_base = riemann_curvature(base, state)?.ric;
    let ric_deformed = riemann_curvature(&deformed, state)?.ric;
    let p = factor.value(state)?;
    let p_horizontal = factor_horizontal_derivative(base, factor, state)?;
    let n = state.dim() as f64;
    let residual = (ric_deformed - (ric_base - (n - 1.0) * (p_horizontal - p * p))).abs();
    Ok(ProjectiveRicciCheck {
        ric_base,
        ric_deformed,
        p,
        p_horizontal,
        residual,
    })
}

pub fn verify_projective_ricci_relation(
    base: &SprayField,
    factor: &ProjectiveFactor,
    state: &TangentState,
) -> Result<f64> {
    projective_ricci_check(base, factor, state).map(|c| c.residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{funk, funk_norm, named_factor, named_spray, params};
    use crate::field::Params;

    fn st(x: &[f64], y: &[f64]) -> TangentState {
        TangentState::new(x.to_vec(), y.to_vec()).unwrap()
    }

    #[test]
    fn flat_has_no_curvature() {
        let flat = named_spray("flat", &Params::new()).unwrap();
        let s = st(&[0.3, 2.0], &[1.0, -4.0]);
        let b = berwald_data(&flat, &s).unwrap();
        assert!(b.n_conn.iter().flatten().all(|&v| v == 0.0));
        let r = riemann_curvature(&flat, &s).unwrap();
        assert_eq!(r.ric, 0.0);
        assert_eq!(ricci_horizontal_derivative(&flat, &s).unwrap(), 0.0);
    }

    #[test]
    fn half_funk_connection_at_origin() {
        let sp = named_spray("funk_scaled", &params(&[("c", 0.5)])).unwrap();
        let y = [0.6, -0.8];
        let b = berwald_data(&sp, &st(&[0.0, 0.0], &y)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let d = if i == j { 0.5 } else { 0.0 };
                let expect = d + y[i] * y[j] / 2.0;
                assert!((b.n_conn[i][j] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn hyperbolic_ball_ricci_at_origin() {
        let h = named_spray("hyperbolic_ball", &Params::new()).unwrap();
        let y = [0.6, 0.8];
        let rep = riemann_curvature(&h, &st(&[0.0, 0.0], &y)).unwrap();
        for i in 0..2 {
            for k in 0..2 {
                let d = if i == k { 1.0 } else { 0.0 };
                assert!((rep.r[i][k] - 3.0 * (y[k] * y[i] - d)).abs() < 1e-13);
            }
        }
        assert!((rep.ric + 3.0).abs() < 1e-13);
        let fit = isotropy_decompose(&rep);
        assert!((fit.r_scalar + 3.0).abs() < 1e-12);
        assert!((fit.tau[0] + 1.8).abs() < 1e-12 && (fit.tau[1] + 2.4).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn hyperbolic_ball_fd_fallback_agrees() {
        let h = named_spray("hyperbolic_ball", &Params::new()).unwrap();
        let num = SprayField::numeric("h-num", Params::new(), h.domain().clone(), {
            let h = h.clone();
            move |x, y| h.eval_raw(x, y)
        })
        .unwrap();
        let s = st(&[0.2, -0.1], &[0.3, 0.7]);
        let a = riemann_curvature(&h, &s).unwrap().ric;
        let b = riemann_curvature(&num, &s).unwrap().ric;
        assert!((a - b).abs() < 1e-7, "{a} {b}");
        let a = ricci_horizontal_derivative(&h, &s).unwrap();
        let b = ricci_horizontal_derivative(&num, &s).unwrap();
        assert!((a - b).abs() < 1e-5, "{a} {b}");
    }

    /// `Ric = −(n−1)c(1−c)F²` and `Ric_{;0} = −2(n−1)c(1−c)(1−2c)F³` for `G = cFy`.
    #[test]
    fn funk_scaled_ricci_matches_closed_form() {
        for c in [0.0, 0.25, 0.5, 1.0, 2.0] {
            let sp = named_spray("funk_scaled", &params(&[("c", c)])).unwrap();
            for (x, y) in [([0.1, 0.2], [0.6, 0.8]), ([-0.5, 0.3], [1.0, -0.2])] {
                let s = st(&x, &y);
                let f = funk(&x, &y);
                let ric = riemann_curvature(&sp, &s).unwrap().ric;
                assert!((ric + c * (1.0 - c) * f * f).abs() < 1e-11 * (1.0 + f * f));
                let d = ricci_horizontal_derivative(&sp, &s).unwrap();
                let expect = -2.0 * c * (1.0 - c) * (1.0 - 2.0 * c) * f.powi(3);
                assert!(
                    (d - expect).abs() < 1e-10 * (1.0 + f.powi(3)),
                    "c={c}: {d} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn projective_relation_examples() {
        let flat = named_spray("flat_ball", &Params::new()).unwrap();
        let s = st(&[0.2, -0.4], &[0.5, 0.9]);
        let half = funk_norm(2).as_factor(0.5);
        assert!(verify_projective_ricci_relation(&flat, &half, &s).unwrap() < 1e-10);
        let zero = named_factor("zero", &Params::new()).unwrap();
        assert_eq!(
            verify_projective_ricci_relation(&flat, &zero, &s).unwrap(),
            0.0
        );
        let plane = named_spray("flat", &Params::new()).unwrap();
        let sp = named_factor("sphere_proj", &Params::new()).unwrap();
        assert!(verify_projective_ricci_relation(&plane, &sp, &s).unwrap() < 1e-10);
    }

    #[test]
    fn errors() {
        let h = named_spray("hyperbolic_ball", &Params::new()).unwrap();
        assert!(matches!(
            riemann_curvature(&h, &st(&[1.5, 0.0], &[1.0, 0.0])),
            Err(SprayError::DomainViolation { .. })
        ));
        let s3 = TangentState::new(vec![0.0; 3], vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            riemann_curvature(&h, &s3),
            Err(SprayError::DimensionMismatch { .. })
        ));
    }
}
