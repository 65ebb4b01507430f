//! Spray fields, projective factors and Finsler norms.
//!
//! Every field wraps an [`Evaluator`]. Closed-form fields implement
//! [`ClosedForm`] once, generically over the scalar type, and get exact
//! derivatives of every order through [`Analytic`]. Fields backed by an
//! inner numerical solve only provide `f64` values.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::domain::ConicalDomain;
use crate::dual::{Scalar, D1, D2, D3};
use crate::error::{Result, SprayError};
use crate::state::TangentState;

/// Object-safe evaluation of a field at the supported scalar types.
pub trait Evaluator: Send + Sync {
    fn dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    /// Whether the dual-number entry points are available.
    fn is_exact(&self) -> bool;
    fn eval_f64(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>>;
    fn eval_d1(&self, x: &[D1], y: &[D1]) -> Result<Vec<D1>>;
    fn eval_d2(&self, x: &[D2], y: &[D2]) -> Result<Vec<D2>>;
    fn eval_d3(&self, x: &[D3], y: &[D3]) -> Result<Vec<D3>>;
}

/// A field given by a formula that can be evaluated at any [`Scalar`].
pub trait ClosedForm: Send + Sync + 'static {
    fn dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<Vec<S>>;
    fn is_exact(&self) -> bool {
        true
    }
}

pub struct Analytic<C>(pub C);

impl<C: ClosedForm> Evaluator for Analytic<C> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn out_dim(&self) -> usize {
        self.0.out_dim()
    }
    fn is_exact(&self) -> bool {
        self.0.is_exact()
    }
    fn eval_f64(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.0.eval(x, y)
    }
    fn eval_d1(&self, x: &[D1], y: &[D1]) -> Result<Vec<D1>> {
        self.0.eval(x, y)
    }
    fn eval_d2(&self, x: &[D2], y: &[D2]) -> Result<Vec<D2>> {
        self.0.eval(x, y)
    }
    fn eval_d3(&self, x: &[D3], y: &[D3]) -> Result<Vec<D3>> {
        self.0.eval(x, y)
    }
}

type NumericFn = dyn Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync;

/// A field known only through `f64` evaluations.
pub struct Numeric {
    dim: usize,
    out_dim: usize,
    name: String,
    f: Arc<NumericFn>,
}

impl Numeric {
    pub fn new<F>(name: impl Into<String>, dim: usize, out_dim: usize, f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        Numeric {
            dim,
            out_dim,
            name: name.into(),
            f: Arc::new(f),
        }
    }

    fn no_duals<T>(&self) -> Result<T> {
        Err(SprayError::NotDifferentiable(self.name.clone()))
    }
}

impl Evaluator for Numeric {
    fn dim(&self) -> usize {
        self.dim
    }
    fn out_dim(&self) -> usize {
        self.out_dim
    }
    fn is_exact(&self) -> bool {
        false
    }
    fn eval_f64(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        (self.f)(x, y)
    }
    fn eval_d1(&self, _: &[D1], _: &[D1]) -> Result<Vec<D1>> {
        self.no_duals()
    }
    fn eval_d2(&self, _: &[D2], _: &[D2]) -> Result<Vec<D2>> {
        self.no_duals()
    }
    fn eval_d3(&self, _: &[D3], _: &[D3]) -> Result<Vec<D3>> {
        self.no_duals()
    }
}

/// `G^i + P y^i`, exact whenever both parts are.
struct Deform {
    spray: Arc<dyn Evaluator>,
    factor: Arc<dyn Evaluator>,
}

impl ClosedForm for Deform {
    fn dim(&self) -> usize {
        self.spray.dim()
    }
    fn out_dim(&self) -> usize {
        self.spray.out_dim()
    }
    fn is_exact(&self) -> bool {
        self.spray.is_exact() && self.factor.is_exact()
    }
    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<Vec<S>> {
        let mut g = S::eval_with(&*self.spray, x, y)?;
        let p = S::eval_with(&*self.factor, x, y)?[0];
        for (gi, &yi) in g.iter_mut().zip(y) {
            *gi += p * yi;
        }
        Ok(g)
    }
}

struct Scaled {
    inner: Arc<dyn Evaluator>,
    k: f64,
}

impl ClosedForm for Scaled {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn out_dim(&self) -> usize {
        self.inner.out_dim()
    }
    fn is_exact(&self) -> bool {
        self.inner.is_exact()
    }
    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<Vec<S>> {
        Ok(S::eval_with(&*self.inner, x, y)?
            .into_iter()
            .map(|v| v * self.k)
            .collect())
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(SprayError::DimensionMismatch { expected, got })
    } else {
        Ok(())
    }
}

pub type Params = BTreeMap<String, f64>;

/// Spray coefficients `G^i(x, y)`, positively 2-homogeneous in `y`.
#[derive(Clone)]
pub struct SprayField {
    label: String,
    params: Params,
    domain: ConicalDomain,
    eval: Arc<dyn Evaluator>,
}

impl std::fmt::Debug for SprayField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SprayField")
            .field("label", &self.label)
            .field("params", &self.params)
            .field("domain", &self.domain)
            .field("exact", &self.eval.is_exact())
            .finish()
    }
}

impl SprayField {
    pub fn new(
        label: impl Into<String>,
        params: Params,
        domain: ConicalDomain,
        eval: Arc<dyn Evaluator>,
    ) -> Result<Self> {
        check_len(domain.dim(), eval.dim())?;
        check_len(eval.dim(), eval.out_dim())?;
        Ok(SprayField {
            label: label.into(),
            params,
            domain,
            eval,
        })
    }

    pub fn analytic<C: ClosedForm>(
        label: impl Into<String>,
        params: Params,
        domain: ConicalDomain,
        c: C,
    ) -> Result<Self> {
        Self::new(label, params, domain, Arc::new(Analytic(c)))
    }

    pub fn numeric<F>(
        label: impl Into<String>,
        params: Params,
        domain: ConicalDomain,
        f: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        let label = label.into();
        let n = domain.dim();
        let eval = Arc::new(Numeric::new(label.clone(), n, n, f));
        Self::new(label, params, domain, eval)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &ConicalDomain {
        &self.domain
    }

    pub fn evaluator(&self) -> &Arc<dyn Evaluator> {
        &self.eval
    }

    pub fn is_exact(&self) -> bool {
        self.eval.is_exact()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_domain(mut self, domain: ConicalDomain) -> Result<Self> {
        check_len(self.dim(), domain.dim())?;
        self.domain = domain;
        Ok(self)
    }

    /// Coefficients at a state, checking dimensions and domain membership.
    pub fn eval(&self, s: &TangentState) -> Result<Vec<f64>> {
        check_len(self.dim(), s.dim())?;
        if !self.domain.contains(s) {
            return Err(SprayError::DomainViolation {
                label: self.label.clone(),
            });
        }
        self.eval.eval_f64(s.x(), s.y())
    }

    /// Coefficients without the domain check.
    pub fn eval_raw(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.eval.eval_f64(x, y)
    }

    pub fn eval_at<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<Vec<S>> {
        S::eval_with(&*self.eval, x, y)
    }
}

/// `eval_spray` as a free function.
pub fn eval_spray(spray: &SprayField, state: &TangentState) -> Result<Vec<f64>> {
    spray.eval(state)
}

/// Scalar field positively 1-homogeneous in `y`.
#[derive(Clone)]
pub struct ProjectiveFactor {
    label: String,
    domain: ConicalDomain,
    eval: Arc<dyn Evaluator>,
}

impl std::fmt::Debug for ProjectiveFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProjectiveFactor")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .finish()
    }
}

impl ProjectiveFactor {
    pub fn new(
        label: impl Into<String>,
        domain: ConicalDomain,
        eval: Arc<dyn Evaluator>,
    ) -> Result<Self> {
        check_len(domain.dim(), eval.dim())?;
        check_len(1, eval.out_dim())?;
        Ok(ProjectiveFactor {
            label: label.into(),
            domain,
            eval,
        })
    }

    pub fn analytic<C: ClosedForm>(
        label: impl Into<String>,
        domain: ConicalDomain,
        c: C,
    ) -> Result<Self> {
        Self::new(label, domain, Arc::new(Analytic(c)))
    }

    pub fn numeric<F>(label: impl Into<String>, domain: ConicalDomain, f: F) -> Result<Self>
    where
        F: Fn(&[f64], &[f64]) -> Result<f64> + Send + Sync + 'static,
    {
        let label = label.into();
        let n = domain.dim();
        let eval = Arc::new(Numeric::new(label.clone(), n, 1, move |x, y| {
            f(x, y).map(|v| vec![v])
        }));
        Self::new(label, domain, eval)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &ConicalDomain {
        &self.domain
    }

    pub fn evaluator(&self) -> &Arc<dyn Evaluator> {
        &self.eval
    }

    pub fn is_exact(&self) -> bool {
        self.eval.is_exact()
    }

    pub fn value(&self, s: &TangentState) -> Result<f64> {
        check_len(self.dim(), s.dim())?;
        if !self.domain.contains(s) {
            return Err(SprayError::DomainViolation {
                label: self.label.clone(),
            });
        }
        self.value_raw(s.x(), s.y())
    }

    pub fn value_raw(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.eval.eval_f64(x, y)?[0])
    }

    pub fn value_at<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        Ok(S::eval_with(&*self.eval, x, y)?[0])
    }

    /// `k * P`.
    pub fn scaled(&self, k: f64) -> ProjectiveFactor {
        ProjectiveFactor {
            label: format!("{k}*{}", self.label),
            domain: self.domain.clone(),
            eval: Arc::new(Analytic(Scaled {
                inner: self.eval.clone(),
                k,
            })),
        }
    }
}

/// A Finsler norm `F(x, y)`: positive and positively 1-homogeneous.
#[derive(Clone, Debug)]
pub struct FinslerNorm {
    inner: ProjectiveFactor,
}

impl FinslerNorm {
    pub fn new(inner: ProjectiveFactor) -> Self {
        FinslerNorm { inner }
    }

    pub fn label(&self) -> &str {
        self.inner.label()
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn value(&self, s: &TangentState) -> Result<f64> {
        self.inner.value(s)
    }

    pub fn value_raw(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.inner.value_raw(x, y)
    }

    /// The projective factor `c F`.
    pub fn as_factor(&self, c: f64) -> ProjectiveFactor {
        if c == 1.0 {
            self.inner.clone()
        } else {
            self.inner.scaled(c)
        }
    }
}

/// `Ḡ^i = G^i + P y^i` on the intersection of both domains.
pub fn projective_deform(spray: &SprayField, factor: &ProjectiveFactor) -> Result<SprayField> {
    check_len(spray.dim(), factor.dim())?;
    let eval: Arc<dyn Evaluator> = Arc::new(Analytic(Deform {
        spray: spray.eval.clone(),
        factor: factor.eval.clone(),
    }));
    SprayField::new(
        format!("{}+P[{}]", spray.label, factor.label),
        spray.params.clone(),
        spray.domain.intersect(&factor.domain),
        eval,
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct HomogeneityReport {
    pub max_deviation: f64,
    pub worst_state: Option<usize>,
    pub worst_lambda: Option<f64>,
    pub checked: usize,
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn homogeneity_scan<F>(
    states: &[TangentState],
    lambdas: &[f64],
    degree: i32,
    mut f: F,
) -> Result<HomogeneityReport>
where
    F: FnMut(&TangentState) -> Result<Vec<f64>>,
{
    if lambdas.iter().any(|&l| !(l > 0.0)) {
        return Err(SprayError::BadParams(
            "scaling factors must be positive".into(),
        ));
    }
    let mut rep = HomogeneityReport {
        max_deviation: 0.0,
        worst_state: None,
        worst_lambda: None,
        checked: 0,
    };
    for (i, s) in states.iter().enumerate() {
        let base = f(s)?;
        for &l in lambdas {
            let scaled = f(&s.scaled(l)?)?;
            let k = l.powi(degree);
            let expect: Vec<f64> = base.iter().map(|g| k * g).collect();
            let diff: Vec<f64> = scaled.iter().zip(&expect).map(|(a, b)| a - b).collect();
            let dev = euclid(&diff) / (1.0 + euclid(&expect));
            rep.checked += 1;
            if dev >= rep.max_deviation {
                rep.max_deviation = dev;
                rep.worst_state = Some(i);
                rep.worst_lambda = Some(l);
            }
        }
    }
    Ok(rep)
}

/// Max over states and scalings of `|G(x,λy) − λ²G(x,y)| / (1 + |λ²G(x,y)|)`.
pub fn check_homogeneity(
    spray: &SprayField,
    states: &[TangentState],
    lambdas: &[f64],
) -> Result<HomogeneityReport> {
    homogeneity_scan(states, lambdas, 2, |s| spray.eval(s))
}

/// Same scan for a degree-1 scalar field.
pub fn check_factor_homogeneity(
    factor: &ProjectiveFactor,
    states: &[TangentState],
    lambdas: &[f64],
) -> Result<HomogeneityReport> {
    homogeneity_scan(states, lambdas, 1, |s| factor.value(s).map(|v| vec![v]))
}
