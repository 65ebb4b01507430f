//! Forward-mode automatic differentiation.
//!
//! [`Dual<T>`] carries a value and one directional derivative. Nesting it
//! (`Dual<Dual<f64>>`, `Dual<Dual<Dual<f64>>>`) yields exact mixed partials
//! of second and third order, which is all the curvature code needs.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::error::SprayError;
use crate::field::Evaluator;

/// Arithmetic needed by closed-form spray coefficients.
pub trait Real:
    Copy
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn cst(v: f64) -> Self;
    /// Real part at the bottom of the nesting.
    fn re(&self) -> f64;
    fn sqrt(self) -> Self;
    fn ln(self) -> Self;
    fn exp(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self;
    fn atan(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, p: f64) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }
    fn one() -> Self {
        Self::cst(1.0)
    }
    fn recip(self) -> Self {
        Self::one() / self
    }
}

impl Real for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn re(&self) -> f64 {
        *self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn tan(self) -> Self {
        f64::tan(self)
    }
    #[inline]
    fn atan(self) -> Self {
        f64::atan(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    #[inline]
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
}

/// A value together with its derivative along one seeded direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

pub type D1 = Dual<f64>;
pub type D2 = Dual<D1>;
pub type D3 = Dual<D2>;

impl<T: Real> Dual<T> {
    #[inline]
    pub fn new(re: T, eps: T) -> Self {
        Dual { re, eps }
    }

    #[inline]
    pub fn constant(re: T) -> Self {
        Dual { re, eps: T::zero() }
    }

    /// `re` seeded with unit derivative.
    #[inline]
    pub fn variable(re: T) -> Self {
        Dual { re, eps: T::one() }
    }

    #[inline]
    fn chain(self, value: T, slope: T) -> Self {
        Dual {
            re: value,
            eps: self.eps * slope,
        }
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Dual::new(self.re + o.re, self.eps + o.eps)
    }
}

impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Dual::new(self.re - o.re, self.eps - o.eps)
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Dual::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl<T: Real> Div for Dual<T> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let inv = o.re.recip();
        let q = self.re * inv;
        Dual::new(q, (self.eps - q * o.eps) * inv)
    }
}

impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Dual::new(-self.re, -self.eps)
    }
}

impl<T: Real> Add<f64> for Dual<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: f64) -> Self {
        Dual::new(self.re + o, self.eps)
    }
}

impl<T: Real> Sub<f64> for Dual<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: f64) -> Self {
        Dual::new(self.re - o, self.eps)
    }
}

impl<T: Real> Mul<f64> for Dual<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: f64) -> Self {
        Dual::new(self.re * o, self.eps * o)
    }
}

impl<T: Real> Div<f64> for Dual<T> {
    type Output = Self;
    #[inline]
    fn div(self, o: f64) -> Self {
        Dual::new(self.re / o, self.eps / o)
    }
}

impl<T: Real> AddAssign for Dual<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> SubAssign for Dual<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Real> MulAssign for Dual<T> {
    #[inline]
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<T: Real> Real for Dual<T> {
    #[inline]
    fn cst(v: f64) -> Self {
        Dual::constant(T::cst(v))
    }
    #[inline]
    fn re(&self) -> f64 {
        self.re.re()
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, (s * 2.0).recip())
    }
    fn ln(self) -> Self {
        self.chain(self.re.ln(), self.re.recip())
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    fn tan(self) -> Self {
        let t = self.re.tan();
        self.chain(t, t * t + 1.0)
    }
    fn atan(self) -> Self {
        self.chain(self.re.atan(), (self.re * self.re + 1.0).recip())
    }
    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::one(),
            _ => self.chain(self.re.powi(n), self.re.powi(n - 1) * n as f64),
        }
    }
    fn powf(self, p: f64) -> Self {
        self.chain(self.re.powf(p), self.re.powf(p - 1.0) * p)
    }
}

/// The four scalar types fields can be evaluated at. Dispatching through
/// this trait lets composite fields call a `dyn Evaluator` generically.
pub trait Scalar: Real {
    fn eval_with(e: &dyn Evaluator, x: &[Self], y: &[Self]) -> Result<Vec<Self>, SprayError>;
}

impl Scalar for f64 {
    fn eval_with(e: &dyn Evaluator, x: &[f64], y: &[f64]) -> Result<Vec<f64>, SprayError> {
        e.eval_f64(x, y)
    }
}

impl Scalar for D1 {
    fn eval_with(e: &dyn Evaluator, x: &[D1], y: &[D1]) -> Result<Vec<D1>, SprayError> {
        e.eval_d1(x, y)
    }
}

impl Scalar for D2 {
    fn eval_with(e: &dyn Evaluator, x: &[D2], y: &[D2]) -> Result<Vec<D2>, SprayError> {
        e.eval_d2(x, y)
    }
}

impl Scalar for D3 {
    fn eval_with(e: &dyn Evaluator, x: &[D3], y: &[D3]) -> Result<Vec<D3>, SprayError> {
        e.eval_d3(x, y)
    }
}

/// Euclidean inner product.
pub fn dot<S: Real>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&p, &q)| acc + p * q)
}

pub fn norm2<S: Real>(a: &[S]) -> S {
    dot(a, a)
}

pub fn lift<S: Real>(v: &[f64]) -> Vec<S> {
    v.iter().map(|&c| S::cst(c)).collect()
}
